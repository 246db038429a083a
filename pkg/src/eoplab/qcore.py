"""Dense linear algebra and state primitives for small composite quantum systems.

Matrices are plain ``numpy`` arrays. States carry their subsystem dimensions
explicitly, and every multi-party index follows the same convention: a vector
on systems ``(d1, d2, ..., dn)`` reshapes to a C-ordered tensor with one axis
per subsystem, so the first subsystem is the most significant digit. For the
four-party purifications used by :mod:`eoplab.eop` the order is always
``(A, B, A', B')``.

All entropies are in bits (ebits for pure bipartite states).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
RANK_TOL = 1e-12
NORM_TOL = 1e-12
WEIGHT_TOL = 1e-12


class StateError(ValueError):
    """A state or ensemble violates one of its defining invariants."""


def _as_dims(dims) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if not dims or any(d < 1 for d in dims):
        raise StateError(f"dims must be a nonempty list of positive integers, got {dims}")
    return dims


def check_density_matrix(matrix: np.ndarray, atol: float = HERMITIAN_TOL) -> None:
    """Raise :class:`StateError` naming the first violated density-operator invariant."""
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise StateError(f"square matrix required, got shape {matrix.shape}")
    dev = np.max(np.abs(matrix - matrix.conj().T)) if matrix.size else 0.0
    if dev > atol:
        raise StateError(f"hermiticity violated: max |rho - rho^dag| = {dev:.3g}")
    tr = np.trace(matrix).real
    if abs(tr - 1.0) > atol:
        raise StateError(f"unit trace violated: trace = {tr:.12g}")
    lmin = np.linalg.eigvalsh(0.5 * (matrix + matrix.conj().T))[0]
    if lmin < -atol:
        raise StateError(f"positivity violated: smallest eigenvalue = {lmin:.3g}")


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Trace-one positive semidefinite operator on ``prod(dims)`` dimensions."""

    dims: tuple[int, ...]
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        dims = _as_dims(self.dims)
        m = np.asarray(self.matrix, dtype=complex)
        n = int(np.prod(dims))
        if m.shape != (n, n):
            raise StateError(f"matrix shape {m.shape} does not match dims {dims}")
        check_density_matrix(m)
        m.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def rank(self, tol: float = RANK_TOL) -> int:
        return int(np.sum(self.eigenvalues() > tol))


@dataclass(frozen=True, eq=False)
class PureState:
    """Unit vector on a composite system with subsystem dimensions ``dims``."""

    dims: tuple[int, ...]
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        dims = _as_dims(self.dims)
        v = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if v.size != int(np.prod(dims)):
            raise StateError(f"{v.size} amplitudes do not match dims {dims}")
        nrm = np.vdot(v, v).real
        if abs(nrm - 1.0) > NORM_TOL:
            raise StateError(f"normalization violated: squared norm = {nrm:.15g}")
        v.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "amplitudes", v)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims)

    def density(self) -> DensityOperator:
        v = self.amplitudes
        return DensityOperator(self.dims, np.outer(v, v.conj()))


@dataclass(frozen=True)
class WernerParams:
    f: float

    def __post_init__(self):
        if not 0.0 <= self.f <= 1.0:
            raise StateError(f"singlet fraction must lie in [0, 1], got {self.f}")

    @property
    def eigenvalues(self) -> np.ndarray:
        """Spectrum ``(f, (1-f)/3, (1-f)/3, (1-f)/3)``, singlet weight first."""
        g = (1.0 - self.f) / 3.0
        return np.array([self.f, g, g, g])


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Probability-weighted list of density operators on a common system."""

    items: tuple[tuple[float, DensityOperator], ...]

    def __post_init__(self):
        items = tuple((float(p), s) for p, s in self.items)
        if not items:
            raise StateError("ensemble must contain at least one state")
        weights = np.array([p for p, _ in items])
        if np.any(weights < 0):
            raise StateError("ensemble weights must be nonnegative")
        if abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise StateError(f"ensemble weights must sum to 1, got {weights.sum():.15g}")
        dims = items[0][1].dims
        if any(s.dims != dims for _, s in items):
            raise StateError("ensemble states must share dims")
        object.__setattr__(self, "items", items)

    @property
    def weights(self) -> np.ndarray:
        return np.array([p for p, _ in self.items])

    def average(self) -> DensityOperator:
        m = sum(p * s.matrix for p, s in self.items)
        return DensityOperator(self.items[0][1].dims, m)


# ---------------------------------------------------------------------------
# Linear algebra


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(np.asarray(a), np.asarray(b))


def hermitian_eig(h: np.ndarray, atol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.

    Returns ``(w, u)`` with ``h = u @ diag(w) @ u.conj().T``.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"square matrix required, got shape {h.shape}")
    dev = np.max(np.abs(h - h.conj().T)) if h.size else 0.0
    if dev > atol:
        raise ValueError(f"matrix is not Hermitian (max deviation {dev:.3g})")
    return np.linalg.eigh(0.5 * (h + h.conj().T))


def partial_trace(rho: DensityOperator, keep: Sequence[int]) -> DensityOperator:
    """Reduced state on the subsystems listed in ``keep`` (output in that order)."""
    keep = [int(k) for k in keep]
    n = len(rho.dims)
    if not keep:
        raise ValueError("keep must name at least one subsystem")
    if len(set(keep)) != len(keep) or any(not 0 <= k < n for k in keep):
        raise ValueError(f"invalid subsystem indices {keep} for {n} subsystems")
    traced = [i for i in range(n) if i not in keep]
    dk = int(np.prod([rho.dims[i] for i in keep]))
    dt = int(np.prod([rho.dims[i] for i in traced])) if traced else 1
    t = rho.matrix.reshape(rho.dims + rho.dims)
    t = t.transpose(keep + traced + [n + i for i in keep] + [n + i for i in traced])
    red = np.einsum("itjt->ij", t.reshape(dk, dt, dk, dt))
    return DensityOperator(tuple(rho.dims[i] for i in keep), red)


def reduced_state(psi: PureState, keep: Sequence[int]) -> DensityOperator:
    """Reduced state of a pure state, computed without forming the full projector."""
    keep = [int(k) for k in keep]
    n = len(psi.dims)
    if not keep or len(set(keep)) != len(keep) or any(not 0 <= k < n for k in keep):
        raise ValueError(f"invalid subsystem indices {keep} for {n} subsystems")
    traced = [i for i in range(n) if i not in keep]
    dk = int(np.prod([psi.dims[i] for i in keep]))
    m = psi.tensor().transpose(keep + traced).reshape(dk, -1)
    return DensityOperator(tuple(psi.dims[i] for i in keep), m @ m.conj().T)


def entropy_of_spectrum(w: np.ndarray) -> float:
    """Shannon entropy in bits with ``0 log 0 = 0``; tiny negatives are treated as 0."""
    w = np.asarray(w, dtype=float)
    w = w[w > 0]
    # eigenvalues of 1 + eps would otherwise give -0.0 or -1e-16
    return max(float(-np.sum(w * np.log2(w))), 0.0)


def entropy(rho: DensityOperator) -> float:
    """Von Neumann entropy in bits."""
    w = rho.eigenvalues()
    if w[0] < -PSD_TOL:
        raise StateError(f"positivity violated: smallest eigenvalue = {w[0]:.3g}")
    return entropy_of_spectrum(w)


def trace_distance(rho: DensityOperator, sigma: DensityOperator) -> float:
    if rho.dims != sigma.dims:
        raise ValueError(f"dimension mismatch: {rho.dims} vs {sigma.dims}")
    w = np.linalg.eigvalsh(rho.matrix - sigma.matrix)
    return 0.5 * float(np.sum(np.abs(w)))


def purity(rho: DensityOperator) -> float:
    return float(np.real(np.vdot(rho.matrix, rho.matrix)))


# ---------------------------------------------------------------------------
# Named states

_S = 1.0 / np.sqrt(2.0)
# Bell basis, singlet first; columns index |00>, |01>, |10>, |11>.
_BELL = np.array(
    [
        [0.0, _S, -_S, 0.0],  # (|01> - |10>)/sqrt2
        [0.0, _S, _S, 0.0],  # (|01> + |10>)/sqrt2
        [_S, 0.0, 0.0, -_S],  # (|00> - |11>)/sqrt2
        [_S, 0.0, 0.0, _S],  # (|00> + |11>)/sqrt2
    ],
    dtype=complex,
)


def bell_state(i: int) -> PureState:
    """Bell state ``i`` in {0, 1, 2, 3}; ``bell_state(0)`` is the singlet."""
    if i not in (0, 1, 2, 3):
        raise ValueError(f"Bell index must be 0..3, got {i}")
    return PureState((2, 2), _BELL[i])


def bell_basis() -> np.ndarray:
    """Unitary whose columns are the Bell states in :func:`bell_state` order."""
    return _BELL.T.copy()


def werner(f) -> DensityOperator:
    """Two-qubit Werner state ``f |s><s| + (1-f)(1 - |s><s|)/3`` with singlet ``s``."""
    p = f if isinstance(f, WernerParams) else WernerParams(float(f))
    b = bell_basis()
    return DensityOperator((2, 2), (b * p.eigenvalues) @ b.conj().T)


def werner_fraction(rho: DensityOperator) -> float:
    """Singlet fraction ``<s|rho|s>`` of a two-qubit state."""
    s = _BELL[0]
    return float(np.real(s.conj() @ rho.matrix @ s))


def is_bell_diagonal(rho: DensityOperator, atol: float = 1e-10) -> bool:
    if rho.dims != (2, 2):
        return False
    b = bell_basis()
    m = b.conj().T @ rho.matrix @ b
    return bool(np.max(np.abs(m - np.diag(np.diag(m)))) <= atol)


def product_state(*states: DensityOperator) -> DensityOperator:
    m = states[0].matrix
    dims = states[0].dims
    for s in states[1:]:
        m = np.kron(m, s.matrix)
        dims = dims + s.dims
    return DensityOperator(dims, m)


def standard_purification(rho: DensityOperator) -> PureState:
    """Purification ``sum_i sqrt(l_i) |e_i>|i>`` with ancilla dimension equal to the rank.

    The ancilla is appended as the last subsystem. Eigenvalues at or below
    ``RANK_TOL`` are dropped and the remaining weights renormalized.
    """
    w, u = np.linalg.eigh(rho.matrix)
    order = np.argsort(w)[::-1]
    w, u = w[order], u[:, order]
    r = max(int(np.sum(w > RANK_TOL)), 1)
    w, u = np.clip(w[:r], 0.0, None), u[:, :r]
    w = w / w.sum()
    amps = (u * np.sqrt(w)).reshape(-1)
    return PureState(rho.dims + (r,), amps)


def holevo_chi(ensemble: Ensemble) -> float:
    """Holevo quantity ``S(sum p_i rho_i) - sum p_i S(rho_i)``, clamped at 0."""
    avg = entropy(ensemble.average())
    chi = avg - sum(p * entropy(s) for p, s in ensemble.items)
    return max(chi, 0.0)


# ---------------------------------------------------------------------------
# Random states


def random_pure(dims, seed=None) -> PureState:
    """Haar-random pure state on ``dims``."""
    rng = np.random.default_rng(seed)
    dims = _as_dims(dims)
    n = int(np.prod(dims))
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return PureState(dims, v / np.linalg.norm(v))


def random_density(dim: int, rank: int | None = None, seed=None, dims=None) -> DensityOperator:
    """Random density operator ``G G^dag / tr`` with complex Gaussian ``G`` of ``rank`` columns."""
    rng = np.random.default_rng(seed)
    dims = _as_dims(dims if dims is not None else (dim,))
    if int(np.prod(dims)) != dim:
        raise ValueError(f"dims {dims} do not multiply to {dim}")
    rank = dim if rank is None else int(rank)
    if not 1 <= rank <= dim:
        raise ValueError(f"rank must lie in [1, {dim}], got {rank}")
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    m = g @ g.conj().T
    return DensityOperator(dims, m / np.trace(m).real)


# Orthonormal basis of the two-qubit symmetric subspace (columns).
_SYM = np.array(
    [[1.0, 0.0, 0.0], [0.0, _S, 0.0], [0.0, _S, 0.0], [0.0, 0.0, 1.0]], dtype=complex
)


def random_symmetric_state(seed=None, rank: int | None = None) -> DensityOperator:
    """Random two-qubit state supported on the symmetric subspace.

    The rank is drawn uniformly from {1, 2, 3} unless given.
    """
    rng = np.random.default_rng(seed)
    if rank is None:
        rank = int(rng.integers(1, 4))
    g = rng.standard_normal((3, rank)) + 1j * rng.standard_normal((3, rank))
    m = _SYM @ (g @ g.conj().T) @ _SYM.conj().T
    return DensityOperator((2, 2), m / np.trace(m).real)

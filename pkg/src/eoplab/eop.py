"""Upper estimates of the entanglement of purification by descent over isometries.

Every purification of ``rho`` on ``A B A' B'`` can be written as
``(1_AB (x) V) |phi>`` where ``|phi>`` is the standard purification on
``A B A'`` and ``V`` is an isometry from the purifying register into
``A' (x) B'``. The objective is the entropy of ``A A'`` of that pure state.

The optimizer works directly on the complex Stiefel manifold
``{V : V^dag V = 1}``: Euclidean gradient, tangent projection, QR retraction
and an Armijo backtracking line search. Local minima are feasible points, so
every reported value is an upper bound on the entanglement of purification,
never the value itself.

Gradient convention: for real ``f`` of complex ``V`` the returned gradient is
``G = df/dRe(V) + i df/dIm(V)``, so that ``df = Re tr(G^dag dV)``.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import qcore
from .qcore import DensityOperator, PureState, StateError

logger = logging.getLogger(__name__)

ISOMETRY_TOL = 1e-10
MAX_TOTAL_DIM = 4096
_LOG_FLOOR = 1e-14
_INV_LN2 = 1.0 / np.log(2.0)


@dataclass(frozen=True, eq=False)
class IsometryPoint:
    """Isometry from a ``d_in``-dimensional register into ``A' (x) B'``.

    ``matrix`` has shape ``(d_out_a * d_out_b, d_in)``; row index ``a' * d_out_b + b'``.
    """

    matrix: np.ndarray = field(repr=False)
    d_out_a: int
    d_out_b: int

    def __post_init__(self):
        v = np.asarray(self.matrix, dtype=complex)
        if v.ndim != 2 or v.shape[0] != self.d_out_a * self.d_out_b:
            raise ValueError(
                f"isometry shape {v.shape} does not match output dims "
                f"({self.d_out_a}, {self.d_out_b})"
            )
        if v.shape[1] > v.shape[0]:
            raise ValueError(f"no isometry from dimension {v.shape[1]} into {v.shape[0]}")
        dev = isometry_defect(v)
        if dev > ISOMETRY_TOL:
            raise ValueError(f"isometry constraint violated: max |V^dag V - 1| = {dev:.3g}")
        v.setflags(write=False)
        object.__setattr__(self, "matrix", v)

    @property
    def d_in(self) -> int:
        return self.matrix.shape[1]


def isometry_defect(v: np.ndarray) -> float:
    return float(np.max(np.abs(v.conj().T @ v - np.eye(v.shape[1]))))


@dataclass(frozen=True)
class OptimizerOptions:
    """Settings for :func:`local_minimize` and the multi-start drivers.

    ``ancilla_a``/``ancilla_b`` default to the rank of the state. ``workers``
    defaults to ``$EOPLAB_THREADS`` or 1.
    """

    restarts: int = 64
    max_iters: int = 5000
    grad_tol: float = 1e-8
    seed: int = 0
    include_trivial_starts: bool = True
    initial_step: float = 1.0
    shrink: float = 0.5
    sufficient_decrease: float = 1e-4
    max_halvings: int = 60
    ancilla_a: int | None = None
    ancilla_b: int | None = None
    workers: int | None = None

    def __post_init__(self):
        if self.restarts < 0 or (self.restarts == 0 and not self.include_trivial_starts):
            raise ValueError("need at least one start")
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if self.initial_step <= 0 or self.sufficient_decrease <= 0:
            raise ValueError("line-search parameters must be positive")


@dataclass(frozen=True)
class RestartResult:
    """Outcome of one local descent.

    ``status`` is ``"converged"`` (gradient below tolerance), ``"stalled"``
    (no step can decrease the objective beyond rounding error), ``"max_iters"``
    or ``"line_search_failed"``.
    """

    label: str
    value: float
    iterations: int
    grad_norm: float
    status: str

    @property
    def converged(self) -> bool:
        return self.status in ("converged", "stalled")

    @property
    def line_search_failed(self) -> bool:
        return self.status == "line_search_failed"


@dataclass(frozen=True, eq=False)
class EopCertificate:
    """Best feasible objective value found; an upper bound on E_P, not E_P itself."""

    best_value: float
    restarts: tuple[RestartResult, ...]
    best_isometry: IsometryPoint
    ancilla_dims: tuple[int, int]
    seed: int
    purification: PureState = field(repr=False)

    @property
    def per_restart_values(self) -> list[float]:
        return [r.value for r in self.restarts]

    @property
    def iterations(self) -> int:
        return sum(r.iterations for r in self.restarts)

    @property
    def line_search_failed(self) -> bool:
        return any(r.line_search_failed for r in self.restarts)

    def distinct_minima(self, tol: float = 1e-6) -> int:
        v = np.sort(self.per_restart_values)
        return int(1 + np.sum(np.diff(v) > tol))


# ---------------------------------------------------------------------------
# Objective and gradient


def _phi_tensor(phi: PureState) -> np.ndarray:
    if len(phi.dims) != 3:
        raise ValueError(f"purification must live on (A, B, A'), got dims {phi.dims}")
    return phi.tensor()


def _check_compatible(phi: PureState, v: IsometryPoint) -> None:
    if phi.dims[2] != v.d_in:
        raise ValueError(
            f"isometry input dimension {v.d_in} does not match purifying register {phi.dims[2]}"
        )


def _cut_matrix(t: np.ndarray, v: np.ndarray, da: int, db: int) -> np.ndarray:
    """Amplitudes of ``(1 (x) V)|phi>`` as a matrix from ``B B'`` to ``A A'``."""
    k = t.shape[2]
    vt = v.reshape(da, db, k)
    m = np.einsum("abk,pqk->apbq", t, vt)
    return m.reshape(t.shape[0] * da, t.shape[1] * db)


def _value(t, v, da, db) -> float:
    s = np.linalg.svd(_cut_matrix(t, v, da, db), compute_uv=False)
    return qcore.entropy_of_spectrum(s * s)


def _value_and_grad(t, v, da, db) -> tuple[float, np.ndarray]:
    m = _cut_matrix(t, v, da, db)
    u, s, wh = np.linalg.svd(m, full_matrices=False)
    lam = s * s
    value = qcore.entropy_of_spectrum(lam)
    # d/dlam of -lam log2 lam, with log floored so zero eigenvalues stay finite
    dg = -(np.log2(np.maximum(lam, _LOG_FLOOR)) + _INV_LN2)
    h = (u * (dg * s)) @ wh
    h = h.reshape(t.shape[0], da, t.shape[1], db)
    g = 2.0 * np.einsum("apbq,abk->pqk", h, t.conj())
    return value, g.reshape(da * db, t.shape[2])


def apply_isometry(phi: PureState, v: IsometryPoint) -> PureState:
    """``(1_AB (x) V)|phi>`` on ``(A, B, A', B')``."""
    t = _phi_tensor(phi)
    _check_compatible(phi, v)
    psi = np.einsum("abk,xk->abx", t, v.matrix)
    psi = psi / np.linalg.norm(psi)
    return PureState(phi.dims[:2] + (v.d_out_a, v.d_out_b), psi.reshape(-1))


def objective(phi: PureState, v: IsometryPoint) -> float:
    """Entropy of ``A A'`` for the purification ``(1 (x) V)|phi>``, in ebits."""
    t = _phi_tensor(phi)
    _check_compatible(phi, v)
    return _value(t, v.matrix, v.d_out_a, v.d_out_b)


def euclidean_gradient(phi: PureState, v: IsometryPoint) -> np.ndarray:
    """Gradient of :func:`objective` w.r.t. the entries of ``V`` (module convention)."""
    t = _phi_tensor(phi)
    _check_compatible(phi, v)
    return _value_and_grad(t, v.matrix, v.d_out_a, v.d_out_b)[1]


# ---------------------------------------------------------------------------
# Stiefel geometry


def project_tangent(v, g) -> np.ndarray:
    """Project ``g`` onto the tangent space ``{X : V^dag X + X^dag V = 0}`` at ``v``."""
    v = v.matrix if isinstance(v, IsometryPoint) else v
    a = v.conj().T @ g
    return g - v @ (0.5 * (a + a.conj().T))


def tangent_dimension(n: int, p: int) -> int:
    """Real dimension of the complex Stiefel manifold of ``n x p`` isometries."""
    return 2 * n * p - p * p


class RetractionError(ArithmeticError):
    """Retraction hit a (numerically) rank-deficient matrix; the step was too large."""


def _qr_retract(x: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(x)
    d = np.diag(r)
    if np.min(np.abs(d)) < 1e-12 * max(1.0, np.max(np.abs(d))):
        raise RetractionError("rank-deficient retraction")
    return q * (d / np.abs(d))


def retract(v, step: np.ndarray) -> IsometryPoint | np.ndarray:
    """QR retraction ``qf(V + step)`` with the phases of ``R``'s diagonal made positive."""
    if isinstance(v, IsometryPoint):
        return IsometryPoint(_qr_retract(v.matrix + step), v.d_out_a, v.d_out_b)
    return _qr_retract(v + step)


# ---------------------------------------------------------------------------
# Starting points


def trivial_embedding(d_in: int, d_out_a: int, d_out_b: int, side: str = "A") -> IsometryPoint:
    """``|k> -> |k>|0>`` (side ``"A"``) or ``|k> -> |0>|k>`` (side ``"B"``)."""
    v = np.zeros((d_out_a * d_out_b, d_in), dtype=complex)
    if side == "A":
        if d_in > d_out_a:
            raise ValueError(f"A-side embedding needs d_in <= d_out_a ({d_in} > {d_out_a})")
        v[np.arange(d_in) * d_out_b, np.arange(d_in)] = 1.0
    elif side == "B":
        if d_in > d_out_b:
            raise ValueError(f"B-side embedding needs d_in <= d_out_b ({d_in} > {d_out_b})")
        v[np.arange(d_in), np.arange(d_in)] = 1.0
    else:
        raise ValueError(f"side must be 'A' or 'B', got {side!r}")
    return IsometryPoint(v, d_out_a, d_out_b)


def random_isometry(d_in: int, d_out_a: int, d_out_b: int, seed=None) -> IsometryPoint:
    """Haar-distributed isometry from the QR of a complex Gaussian matrix."""
    rng = np.random.default_rng(seed)
    n = d_out_a * d_out_b
    g = rng.standard_normal((n, d_in)) + 1j * rng.standard_normal((n, d_in))
    return IsometryPoint(_qr_retract(g), d_out_a, d_out_b)


def restart_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for restart ``index`` so results never depend on scheduling."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, int(index)])


# ---------------------------------------------------------------------------
# Local descent


def local_minimize(phi: PureState, start: IsometryPoint, opts: OptimizerOptions | None = None,
                   callback=None):
    """Riemannian gradient descent with Armijo backtracking from ``start``.

    The first trial step is ``opts.initial_step``; later iterations start the
    backtracking from a Barzilai-Borwein step. Every accepted step satisfies the
    sufficient-decrease condition, so the objective never increases.

    ``callback(v, value)`` is called with each accepted iterate.

    Returns ``(value, IsometryPoint, RestartResult)``.
    """
    opts = opts or OptimizerOptions()
    t = _phi_tensor(phi)
    _check_compatible(phi, start)
    da, db = start.d_out_a, start.d_out_b
    v = start.matrix.copy()
    f, eg = _value_and_grad(t, v, da, db)
    g = project_tangent(v, eg)
    gn2 = float(np.vdot(g, g).real)
    step = opts.initial_step
    status = "max_iters"
    it = 0
    while True:
        if np.sqrt(gn2) <= opts.grad_tol:
            status = "converged"
            break
        if it >= opts.max_iters:
            break
        alpha = step
        for _ in range(opts.max_halvings + 1):
            try:
                vn = _qr_retract(v - alpha * g)
            except RetractionError:
                alpha *= opts.shrink
                continue
            fn = _value(t, vn, da, db)
            if fn <= f - opts.sufficient_decrease * alpha * gn2:
                break
            alpha *= opts.shrink
        else:
            # predicted decrease below rounding of f: stationary to working precision
            noise = 8 * np.finfo(float).eps * max(1.0, abs(f))
            if opts.sufficient_decrease * alpha * gn2 / opts.shrink <= noise:
                status = "stalled"
            else:
                status = "line_search_failed"
            break
        fn, egn = _value_and_grad(t, vn, da, db)
        gnew = project_tangent(vn, egn)
        # Barzilai-Borwein guess for the next trial step
        s = vn - v
        y = gnew - g
        sy = abs(float(np.vdot(s, y).real))
        step = float(np.vdot(s, s).real) / sy if sy > 0 else opts.initial_step
        step = min(max(step, 1e-6), 1e3)
        v, f, g = vn, fn, gnew
        gn2 = float(np.vdot(g, g).real)
        it += 1
        if callback is not None:
            callback(v, f)
    point = IsometryPoint(v, da, db)
    res = RestartResult(label="", value=float(f), iterations=it,
                        grad_norm=float(np.sqrt(gn2)), status=status)
    if res.line_search_failed:
        logger.warning("line search failed after %d halvings at value %.12g", opts.max_halvings, f)
    return float(f), point, res


# ---------------------------------------------------------------------------
# Multi-start drivers


def _default_workers(opts: OptimizerOptions) -> int:
    if opts.workers is not None:
        return max(1, int(opts.workers))
    env = os.environ.get("EOPLAB_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def _run_start(args):
    phi, label, start, opts = args
    if start is None:
        index = int(label.split("-")[1])
        start = random_isometry(phi.dims[2], opts.ancilla_a, opts.ancilla_b, restart_rng(opts.seed, index))
    _, point, res = local_minimize(phi, start, opts)
    return replace(res, label=label), point


def _multistart(phi: PureState, starts, opts: OptimizerOptions):
    labels = [s[0] for s in starts]
    jobs = [(phi, label, start, opts) for label, start in starts]
    workers = min(_default_workers(opts), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_run_start, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        out = [_run_start(j) for j in jobs]
    results = tuple(r for r, _ in out)
    assert [r.label for r in results] == labels
    best = min(range(len(out)), key=lambda i: (results[i].value, i))
    return results, out[best][1]


def _ancilla_dims(r: int, opts: OptimizerOptions) -> tuple[int, int]:
    da = opts.ancilla_a if opts.ancilla_a is not None else r
    db = opts.ancilla_b if opts.ancilla_b is not None else r
    if da < 1 or db < 1:
        raise ValueError("ancilla dimensions must be positive")
    if da * db < r:
        raise ValueError(f"ancilla dims ({da}, {db}) too small to hold a rank-{r} purification")
    return da, db


def _start_list(phi: PureState, da: int, db: int, opts: OptimizerOptions, extra=()):
    r = phi.dims[2]
    starts = list(extra)
    if opts.include_trivial_starts:
        if r <= da:
            starts.append(("trivial-A", trivial_embedding(r, da, db, "A")))
        if r <= db:
            starts.append(("trivial-B", trivial_embedding(r, da, db, "B")))
    starts += [(f"random-{i}", None) for i in range(opts.restarts)]
    if not starts:
        raise ValueError("no admissible starting points")
    return starts


def eop_from_purification(phi: PureState, opts: OptimizerOptions | None = None,
                          extra_starts=()) -> EopCertificate:
    """Multi-start minimization for a given purification on ``(A, B, A')``."""
    opts = opts or OptimizerOptions()
    _phi_tensor(phi)
    da, db = _ancilla_dims(phi.dims[2], opts)
    if phi.dims[0] * phi.dims[1] * da * db > MAX_TOTAL_DIM:
        raise ValueError(
            f"total dimension {phi.dims[0] * phi.dims[1] * da * db} exceeds cap {MAX_TOTAL_DIM}"
        )
    opts = replace(opts, ancilla_a=da, ancilla_b=db)
    results, point = _multistart(phi, _start_list(phi, da, db, opts, extra_starts), opts)
    return EopCertificate(
        best_value=min(r.value for r in results),
        restarts=results,
        best_isometry=point,
        ancilla_dims=(da, db),
        seed=opts.seed,
        purification=phi,
    )


def _bipartite(rho: DensityOperator) -> DensityOperator:
    if len(rho.dims) != 2:
        raise ValueError(f"bipartite state required, got dims {rho.dims}")
    return rho


def eop_estimate(rho: DensityOperator, opts: OptimizerOptions | None = None) -> EopCertificate:
    """Upper estimate of E_P(rho) for a bipartite state on ``(A, B)``.

    Starts: the two trivial embeddings (which alone give ``min(S(A), S(B))``)
    followed by ``opts.restarts`` Haar-random isometries.
    """
    rho = _bipartite(rho)
    return eop_from_purification(qcore.standard_purification(rho), opts)


def eop_pure(psi: PureState) -> float:
    """Exact E_P of a pure bipartite state, the entanglement entropy."""
    if len(psi.dims) != 2:
        raise ValueError(f"bipartite state required, got dims {psi.dims}")
    return qcore.entropy(qcore.reduced_state(psi, [0]))


def eop_pure_density(rho: DensityOperator) -> float:
    rho = _bipartite(rho)
    p = qcore.purity(rho)
    if p < 1 - 1e-8:
        raise StateError(f"state is not pure: tr rho^2 = {p:.12g}")
    return qcore.entropy(qcore.partial_trace(rho, [0]))


def _product_purification(phi1: PureState, phi2: PureState) -> PureState:
    t1, t2 = phi1.tensor(), phi2.tensor()
    t = np.einsum("abk,cdl->acbdkl", t1, t2)
    dims = (phi1.dims[0] * phi2.dims[0], phi1.dims[1] * phi2.dims[1], phi1.dims[2] * phi2.dims[2])
    return PureState(dims, t.reshape(-1))


def product_isometry(v1: IsometryPoint, v2: IsometryPoint) -> IsometryPoint:
    """``V1 (x) V2`` with outputs regrouped as ``(A1' A2') (x) (B1' B2')``."""
    a1, b1, a2, b2 = v1.d_out_a, v1.d_out_b, v2.d_out_a, v2.d_out_b
    k = np.kron(v1.matrix, v2.matrix).reshape(a1, b1, a2, b2, -1)
    k = k.transpose(0, 2, 1, 3, 4).reshape(a1 * a2 * b1 * b2, -1)
    return IsometryPoint(k, a1 * a2, b1 * b2)


def eop_product_estimate(rho: DensityOperator, sigma: DensityOperator,
                         opts: OptimizerOptions | None = None,
                         single: tuple[EopCertificate, EopCertificate] | None = None,
                         single_opts: OptimizerOptions | None = None) -> EopCertificate:
    """Upper estimate of E_P(rho (x) sigma) across ``A1 A2 : B1 B2``.

    The purification is the tensor product of the two standard purifications,
    and the start set includes the product of the single-copy best isometries,
    so the result never exceeds the sum of the single-copy estimates.
    ``single`` may pass precomputed single-copy certificates; otherwise they are
    computed with ``single_opts`` (default ``opts``).
    """
    opts = opts or OptimizerOptions()
    rho, sigma = _bipartite(rho), _bipartite(sigma)
    if single is None:
        so = single_opts or replace(opts, ancilla_a=None, ancilla_b=None)
        single = (eop_estimate(rho, so), eop_estimate(sigma, so))
    c1, c2 = single
    phi = _product_purification(c1.purification, c2.purification)
    v = product_isometry(c1.best_isometry, c2.best_isometry)
    opts = replace(
        opts,
        ancilla_a=opts.ancilla_a if opts.ancilla_a is not None else v.d_out_a,
        ancilla_b=opts.ancilla_b if opts.ancilla_b is not None else v.d_out_b,
    )
    extra = ()
    if (opts.ancilla_a, opts.ancilla_b) == (v.d_out_a, v.d_out_b):
        extra = (("product", v),)
    return eop_from_purification(phi, opts, extra_starts=extra)

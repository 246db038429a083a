"""Bounds on the regularized entanglement of purification and a convexity probe.

For any decomposition ``rho = sum_i p_i rho_i``,

    E_P^inf(rho) <= sum_i p_i E_P^inf(rho_i) + chi({p_i; rho_i}),

with ``chi`` the Holevo quantity. Equivalently ``E_P^inf - S`` is convex, so
if the single-copy curve ``Delta = E_P - S`` is found non-convex then E_P
differs from its regularization somewhere. :func:`convexity_violation`
looks for such midpoint violations on a grid of upper estimates.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np

from . import qcore
from .qcore import DensityOperator, Ensemble, StateError

PROVENANCES = ("exact", "single-copy-estimate", "external")


@dataclass(frozen=True, eq=False)
class DecompositionItem:
    weight: float
    state: DensityOperator = field(repr=False)
    upper_bound: float
    provenance: str = "external"

    def __post_init__(self):
        if self.upper_bound < 0:
            raise StateError(f"upper bound must be nonnegative, got {self.upper_bound}")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"provenance must be one of {PROVENANCES}, got {self.provenance!r}")


@dataclass(frozen=True, eq=False)
class EnsembleDecomposition:
    """Weighted states with caller-supplied bounds on their regularized EoP.

    A single-copy estimate is a valid bound, since E_P >= E_P^inf.
    """

    items: tuple[DecompositionItem, ...]

    def __post_init__(self):
        items = tuple(self.items)
        object.__setattr__(self, "items", items)
        # validates weights and shared dims
        self.ensemble()

    def ensemble(self) -> Ensemble:
        return Ensemble(tuple((it.weight, it.state) for it in self.items))


@dataclass(frozen=True, eq=False)
class DecompositionBound:
    bound: float
    chi: float
    weighted_upper: float
    average_state: DensityOperator = field(repr=False)
    provenances: tuple[str, ...]


def decomposition_bound(d: EnsembleDecomposition) -> DecompositionBound:
    """Upper bound ``sum p_i u_i + chi`` on E_P^inf of the average state."""
    ens = d.ensemble()
    chi = qcore.holevo_chi(ens)
    weighted = float(sum(it.weight * it.upper_bound for it in d.items))
    return DecompositionBound(
        bound=weighted + chi,
        chi=chi,
        weighted_upper=weighted,
        average_state=ens.average(),
        provenances=tuple(it.provenance for it in d.items),
    )


def delta(eop_upper: float, rho: DensityOperator) -> float:
    """``eop_upper - S(rho)``."""
    if eop_upper < 0:
        raise ValueError(f"eop_upper must be nonnegative, got {eop_upper}")
    return eop_upper - qcore.entropy(rho)


@dataclass(frozen=True)
class DeltaPoint:
    x: float
    delta_upper: float
    eop_upper: float
    entropy: float


@dataclass(frozen=True)
class DeltaGrid:
    """Upper estimates of ``Delta = E_P - S`` on a strictly increasing grid."""

    points: tuple[DeltaPoint, ...]

    def __post_init__(self):
        pts = tuple(self.points)
        xs = [p.x for p in pts]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("grid x values must be strictly increasing")
        for p in pts:
            if abs(p.delta_upper - (p.eop_upper - p.entropy)) > 1e-12:
                raise ValueError(f"inconsistent delta at x={p.x}")
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_values(cls, xs, eop_upper, entropies) -> "DeltaGrid":
        return cls(tuple(
            DeltaPoint(float(x), float(e - s), float(e), float(s))
            for x, e, s in zip(xs, eop_upper, entropies)
        ))

    @classmethod
    def from_deltas(cls, xs, deltas) -> "DeltaGrid":
        """Grid carrying only ``Delta`` values (entropy column set to zero)."""
        return cls.from_values(xs, deltas, np.zeros(len(xs)))

    @property
    def xs(self) -> np.ndarray:
        return np.array([p.x for p in self.points])

    @property
    def deltas(self) -> np.ndarray:
        return np.array([p.delta_upper for p in self.points])


class NoTripleError(ValueError):
    pass


def convexity_violation(grid: DeltaGrid, xtol: float = 1e-12):
    """Largest midpoint gap ``Delta(x) - (Delta(x-h) + Delta(x+h))/2`` over the grid.

    Only triples of grid points with equal spacing (to within ``xtol``) are
    considered. A positive result shows that the curve of upper estimates is
    not convex; it says something about E_P - S only insofar as the estimates
    are tight.

    Returns ``(max_violation, (x - h, x, x + h))``.
    """
    xs = grid.xs
    ds = grid.deltas
    n = len(xs)
    if n < 3:
        raise NoTripleError(f"need at least 3 grid points, got {n}")
    best, witness = -np.inf, None
    xl = list(xs)
    for j in range(1, n - 1):
        for i in range(j):
            target = 2 * xs[j] - xs[i]
            k = bisect.bisect_left(xl, target - xtol, lo=j + 1)
            if k < n and abs((xs[k] - xs[j]) - (xs[j] - xs[i])) <= xtol:
                gap = ds[j] - 0.5 * (ds[i] + ds[k])
                if gap > best:
                    best, witness = gap, (float(xs[i]), float(xs[j]), float(xs[k]))
    if witness is None:
        raise NoTripleError("grid contains no equally spaced triple")
    return float(best), witness


@dataclass(frozen=True)
class BenchmarkRow:
    f: float
    value: float
    kind: str
    note: str = ""


def werner_benchmark() -> tuple[BenchmarkRow, ...]:
    """Reference values for E_P of two-qubit Werner states ``W(f)``.

    ``kind`` is ``exact``, ``upper-bound`` (single-copy), ``regularized-upper-bound``
    or ``numerical-observation`` (a value reported from local search only).
    """
    return (
        BenchmarkRow(0.0, 1.0, "exact"),
        BenchmarkRow(0.005, 0.9663, "regularized-upper-bound",
                     "from the decomposition W(.005) = (W(0) + W(.01))/2"),
        BenchmarkRow(0.005, 0.99, "numerical-observation", "best local minima stay above this"),
        BenchmarkRow(0.01, 0.9226, "upper-bound"),
        BenchmarkRow(0.25, 0.0, "exact", "maximally mixed state"),
        BenchmarkRow(1.0, 1.0, "exact", "singlet"),
    )

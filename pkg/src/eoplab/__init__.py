"""Numerical upper estimates of the entanglement of purification.

Modules
-------
qcore
    Density operators, partial traces, entropies, Werner and Bell states.
eop
    Multi-start descent over purifying isometries.
bounds
    Decomposition bounds on the regularized quantity and a convexity probe.
cli
    ``eoplab`` command-line experiments.
"""
from .qcore import (
    DensityOperator, Ensemble, PureState, StateError, WernerParams, bell_state, entropy,
    holevo_chi, partial_trace, standard_purification, werner,
)
from .eop import (
    EopCertificate, IsometryPoint, OptimizerOptions, eop_estimate, eop_product_estimate,
    eop_pure, local_minimize, objective,
)
from .bounds import (
    DeltaGrid, DecompositionItem, EnsembleDecomposition, convexity_violation,
    decomposition_bound, delta, werner_benchmark,
)

__version__ = "0.1.0"

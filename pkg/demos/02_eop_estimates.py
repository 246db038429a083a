"""Upper estimates of the entanglement of purification for Werner states.

Each estimate runs local descent over isometries V: A' -> A'B' from the two
trivial embeddings plus random starts and keeps the best local minimum. The
value is a feasible point, hence an upper bound.

Run with ``python demos/02_eop_estimates.py`` (about a minute).
"""
import numpy as np

from eoplab import eop, qcore
from eoplab.eop import OptimizerOptions

opts = OptimizerOptions(restarts=16, seed=1)

print(" f        E_P upper   distinct minima   sorted local minima")
for f in (0.0, 0.004, 0.005, 0.007, 0.01, 0.25, 1.0):
    cert = eop.eop_estimate(qcore.werner(f), opts)
    mins = np.unique(np.round(cert.per_restart_values, 5))[:4]
    print(f"{f:<8} {cert.best_value:.6f}    {cert.distinct_minima():>3}               {mins}")

# Pure states need no optimization: E_P is the entanglement entropy.
psi = qcore.random_pure((2, 2), seed=4)
print("pure state: exact", eop.eop_pure(psi), "estimate", eop.eop_estimate(psi.density(), opts).best_value)

# The optimizer's iterates stay on the isometry manifold.
phi = qcore.standard_purification(qcore.werner(0.01))
defects = []
val, point, res = eop.local_minimize(
    phi, eop.random_isometry(4, 4, 4, seed=0), opts,
    callback=lambda v, f: defects.append(eop.isometry_defect(v)),
)
print(f"one descent: value {val:.6f}, {res.iterations} iterations ({res.status}), "
      f"max |V^dag V - 1| = {max(defects):.1e}")

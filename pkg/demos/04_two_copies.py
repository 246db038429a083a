"""Estimating E_P on two copies.

The two-copy purification is the product of the single-copy ones, and the
product of the single-copy optimal isometries is always among the starts, so
the two-copy estimate can only improve on the sum. Finding a strict
improvement would exhibit non-additivity directly; none is expected at this
budget.

Run with ``python demos/04_two_copies.py`` (under a minute; the isometry is 256 x 16).
"""
from eoplab import eop, qcore
from eoplab.eop import OptimizerOptions

rho = qcore.werner(0.005)
single = eop.eop_estimate(rho, OptimizerOptions(restarts=16, seed=0))
pair = eop.eop_product_estimate(rho, rho, OptimizerOptions(restarts=2, max_iters=1000, seed=0),
                                single=(single, single))
print(f"single copy: {single.best_value:.6f}")
print(f"two copies:  {pair.best_value:.6f}  vs 2 x single = {2 * single.best_value:.6f}")
for r in pair.restarts:
    print(f"  {r.label:<10} {r.value:.6f}  {r.iterations} it  {r.status}")

"""Werner states, their spectra and a purification.

Run with ``python demos/01_werner_states.py``.
"""
import numpy as np

from eoplab import qcore

# A Werner state mixes the singlet with the maximally mixed state on its
# orthogonal complement. The singlet weight f fixes the whole spectrum.
for f in (0.0, 0.005, 0.01, 0.25, 1.0):
    w = qcore.werner(f)
    print(f"f={f:<6} spectrum={np.round(np.sort(w.eigenvalues())[::-1], 6)} "
          f"S={qcore.entropy(w):.6f}")

# Both marginals are maximally mixed for every f, so S(A) = S(B) = 1.
w = qcore.werner(0.3)
print("marginal A:\n", np.round(qcore.partial_trace(w, [0]).matrix.real, 12))

# The standard purification appends an ancilla whose dimension is the rank.
phi = qcore.standard_purification(w)
print("purification dims (A, B, A'):", phi.dims)
back = qcore.reduced_state(phi, [0, 1])
print("trace distance after tracing the ancilla:", qcore.trace_distance(back, w))

# Holevo quantity of the half/half mixture of W(0) and W(.01), which is W(.005).
ens = qcore.Ensemble(((0.5, qcore.werner(0.0)), (0.5, qcore.werner(0.01))))
print("chi =", qcore.holevo_chi(ens))
print("average is W(.005):", qcore.trace_distance(ens.average(), qcore.werner(0.005)) < 1e-14)

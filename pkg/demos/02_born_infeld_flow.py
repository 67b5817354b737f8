"""Minimize the Born-Infeld energy and inspect the Hessian at the result."""
import numpy as np

from biym import ConformalMetric, FlowConfig, LatticeSpec, born_infeld, minimize, random_connection, spectrum
from biym.calculus import div_formula, stress_energy

lat = LatticeSpec.cubic(2, 5)
g = ConformalMetric.uniform(lat)
F = born_infeld()

D0 = random_connection(lat, m=3, seed=6, amplitude=0.5)

# Plain gradient descent first, briefly, to see the energy go down
gd = minimize(D0, g, F, FlowConfig(max_iters=200))
print("gd:", gd.status, "energy", gd.energy, "residual", gd.residual)

# Newton-CG finishes the job on this degenerate landscape
res = minimize(gd.connection, g, F, FlowConfig(method="newton_cg"))
print("newton:", res.status, "after", res.trace[-1][0], "iterations, residual", res.residual)

# Energy minima on the torus are flat up to gauge, so the low spectrum is a kernel.
eig = spectrum(res.connection, g, F, k=12)
print("lowest eigenvalues:", np.round(eig.eigenvalues, 8))
print("index", eig.index, "nullity", eig.nullity, "gauge directions", eig.gauge_dim)

S = stress_energy(res.connection, g, F)
div = div_formula(res.connection, g, F)
print("stress trace range:", S.trace.min(), S.trace.max())
print("divergence terms:", {k: f"{v:.2e}" for k, v in div.norms.items()})

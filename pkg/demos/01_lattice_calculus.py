"""Tour of the discrete calculus: forms, d, its adjoint, and curvature.

Run with ``python demos/01_lattice_calculus.py``.
"""
import numpy as np

from biym import Connection, ConformalMetric, LatticeSpec, PForm, curvature, d, delta, inner_form
from biym.flow import random_connection

rng = np.random.default_rng(0)

# A 4 x 4 x 4 periodic lattice with spacing 0.5 and an so(3) fiber.
lat = LatticeSpec.cubic(3, 4, h=0.5)
print(lat, "sites:", lat.sites, "edges:", lat.cells(1), "plaquettes:", lat.cells(2))

# Conformal metrics are one positive number per site.
g = ConformalMetric(lat, rng.uniform(0.5, 2.0, lat.extents))

# Forms are stored component-wise; to_vector/from_vector use the upper triangle.
D = random_connection(lat, 3, seed=1, amplitude=0.6)
phi = PForm.from_vector(1, lat, 3, rng.standard_normal(lat.cells(1) * 3))
psi = PForm.from_vector(2, lat, 3, rng.standard_normal(lat.cells(2) * 3))

# delta is the exact adjoint of d for any connection and conformal metric
lhs = inner_form(d(D, phi), psi, g)
rhs = inner_form(phi, delta(D, g, psi), g)
print(f"<d phi, psi> = {lhs:.15f}")
print(f"<phi, delta psi> = {rhs:.15f}")

# Curvature of D + beta expands exactly to second order.
R = curvature(D)
beta = phi * 0.1
from biym import wedge_bracket

gap = curvature(D + beta) - (R + d(D, beta) + wedge_bracket(beta, beta) * 0.5)
print("expansion defect:", np.abs(gap.values).max())

# The trivial connection is flat.
print("flat curvature max:", np.abs(curvature(Connection.flat(lat, 3)).values).max())

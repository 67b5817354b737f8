"""Numerical laboratory for the Yang-Mills-Born-Infeld functional on lattice torus bundles."""
from biym.algebra import AlgebraElement, bracket, inner, random_element
from biym.calculus import Connection, curvature, d, delta, interior, stress_energy, wedge_bracket
from biym.functional import (
    DensityF,
    born_infeld,
    density,
    el_residual,
    energy,
    hess_operator,
    hess_quadratic,
    spectrum,
    yang_mills,
)
from biym.flow import FlowConfig, minimize, random_connection
from biym.lattice import ConformalMetric, LatticeSpec, PForm, inner_form, pointwise_norm2

__version__ = "0.1.0"

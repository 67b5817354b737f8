"""Refinement studies: one smooth continuum connection sampled at several resolutions.

The physical torus is ``[0, 2 pi)^n`` with the flat metric.  At L sites per
axis the lattice uses index coordinates (h = 1) with the uniform conformal
factor ``c = eps^2``, ``eps = 2 pi / L``, and stores ``alpha = eps * A(x)``.
Orthonormal-frame quantities then approximate their continuum values.
"""
import numpy as np

from biym.algebra import generator
from biym.calculus import Connection, bianchi_residual, curvature, div_direct, div_formula, stress_energy
from biym.lattice import ConformalMetric, LatticeSpec, PForm, volume

__all__ = ["smooth_connection", "conservation_study", "loglog_slope"]


def _generators(m):
    return [generator(m, i, j).entries for i in range(m) for j in range(i + 1, m)]


def smooth_connection(n, L, m, amplitude=0.5):
    """Sample the fixed field
    ``A_mu = amp * sum_a G_a [sin(x_{mu+1} + .7a + .3mu) + .5 cos(x_{mu+a+1} - .4mu + .2a) + .25 sin(x_mu + a)]``.
    """
    eps = 2 * np.pi / L
    lat = LatticeSpec.cubic(n, L)
    metric = ConformalMetric.uniform(lat, eps**2)
    x = np.meshgrid(*[np.arange(L) * eps] * n, indexing="ij")
    vals = np.zeros(lat.form_shape(1, m))
    for mu in range(n):
        for a, G in enumerate(_generators(m)):
            f = (
                np.sin(x[(mu + 1) % n] + 0.7 * a + 0.3 * mu)
                + 0.5 * np.cos(x[(mu + a + 1) % n] - 0.4 * mu + 0.2 * a)
                + 0.25 * np.sin(x[mu] + a)
            )
            vals[mu] += amplitude * eps * f[..., None, None] * G
    return Connection(PForm(1, lat, m, vals)), metric


def loglog_slope(hs, errs):
    """Least-squares slope of log(err) against log(h)."""
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])


def conservation_study(F, n=2, m=3, sizes=(8, 16, 32), amplitude=0.5):
    """Rows of ``(L, h_phys, ||div_direct - div_formula||, ||d_D R||, ||div_direct||)``."""
    rows = []
    for L in sizes:
        D, metric = smooth_connection(n, L, m, amplitude)
        R = curvature(D)
        direct, norm_direct = div_direct(stress_energy(D, metric, F, R), metric)
        formula = div_formula(D, metric, F)
        diff = direct - formula.total
        gap = float(np.sqrt(np.sum(volume(metric) * np.sum(diff * diff, axis=-1))))
        rows.append((L, 2 * np.pi / L, gap, bianchi_residual(D, metric, R), norm_direct))
    return rows

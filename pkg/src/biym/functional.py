"""F-Yang-Mills energies, their gradients, Hessians and spectra.

For a density ``F`` the energy is ``sum_x vol(x) F(Q(x)/2)`` with ``Q`` the
orthonormal-frame norm squared of the curvature.  Born-Infeld is
``F(t) = sqrt(1 + 2t) - 1``; Yang-Mills is ``F(t) = t``.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from biym.algebra import bracket, dim_so, inner
from biym.calculus import Connection, _frame, _require_uniform, curvature, d, delta, stress_energy, wedge_bracket
from biym.errors import ConvergenceError
from biym.lattice import ConformalMetric, PForm, inner_form, pointwise_norm2, volume, weight

__all__ = [
    "DensityF",
    "born_infeld",
    "yang_mills",
    "fp_density",
    "fp_el_density",
    "density",
    "energy",
    "el_residual",
    "first_variation",
    "curvature_operator",
    "hess_quadratic",
    "hess_operator",
    "spectrum",
    "metric_variation",
]


@dataclass(frozen=True)
class DensityF:
    name: str
    f: callable = field(repr=False)
    df: callable = field(repr=False)
    d2f: callable = field(repr=False)
    p: float = None

    @property
    def label(self):
        """Compact name used in snapshots and configs, e.g. ``fp:3``."""
        return self.name if self.p is None else f"{self.name}:{self.p:g}"


def born_infeld():
    return DensityF(
        "born_infeld",
        lambda t: np.sqrt(1 + 2 * np.asarray(t)) - 1,
        lambda t: 1 / np.sqrt(1 + 2 * np.asarray(t)),
        lambda t: -((1 + 2 * np.asarray(t)) ** -1.5),
    )


def yang_mills():
    return DensityF(
        "yang_mills",
        lambda t: np.asarray(t, dtype=float) * 1.0,
        lambda t: np.ones_like(np.asarray(t, dtype=float)),
        lambda t: np.zeros_like(np.asarray(t, dtype=float)),
    )


def fp_density(p):
    """``F(t) = 1/2 (1 + 2t)^((p-2)/2)``, the literal integrand of the F_p energy."""
    e = (p - 2) / 2
    return DensityF(
        "fp",
        lambda t: 0.5 * (1 + 2 * np.asarray(t)) ** e,
        lambda t: e * (1 + 2 * np.asarray(t)) ** (e - 1),
        lambda t: 2 * e * (e - 1) * (1 + 2 * np.asarray(t)) ** (e - 2),
        p=float(p),
    )


def fp_el_density(p):
    """Density whose gradient is ``delta((1 + Q)^((p-2)/2) R)``.

    ``F(t) = ((1 + 2t)^(p/2) - 1) / p``, so ``F'(t) = (1 + 2t)^((p-2)/2)``.
    """
    e = p / 2
    return DensityF(
        "fp_el",
        lambda t: ((1 + 2 * np.asarray(t)) ** e - 1) / p,
        lambda t: (1 + 2 * np.asarray(t)) ** (e - 1),
        lambda t: 2 * (e - 1) * (1 + 2 * np.asarray(t)) ** (e - 2),
        p=float(p),
    )


_BUILTIN = {
    "born_infeld": born_infeld,
    "bi": born_infeld,
    "yang_mills": yang_mills,
    "ym": yang_mills,
    "fp": fp_density,
    "fp_el": fp_el_density,
}


def density(name, p=None):
    """Look up a built-in density by name; ``"fp:3"`` is accepted as well."""
    if ":" in name:
        name, ps = name.split(":", 1)
        p = float(ps)
    try:
        make = _BUILTIN[name]
    except KeyError:
        raise ValueError(f"unknown density {name!r}; choose from {sorted(_BUILTIN)}") from None
    if name in ("fp", "fp_el"):
        if p is None:
            raise ValueError(f"density {name!r} needs an exponent p")
        return make(p)
    return make()


def energy(D, metric, F, R=None):
    if R is None:
        R = curvature(D)
    q = pointwise_norm2(R, metric)
    return float(np.sum(volume(metric) * F.f(q / 2)))


def el_residual(D, metric, F, R=None):
    """``delta_D(F'(Q/2) R)``: the L2 gradient of :func:`energy` on 1-forms."""
    if R is None:
        R = curvature(D)
    q = pointwise_norm2(R, metric)
    return delta(D, metric, R * F.df(q / 2))


def first_variation(D, B, metric, F):
    """Directional derivative of the energy along ``B``, computed two ways.

    Returns ``(inner_form(d_D B, F' R), inner_form(B, el_residual))``.
    """
    R = curvature(D)
    q = pointwise_norm2(R, metric)
    lhs = inner_form(d(D, B), R * F.df(q / 2), metric)
    rhs = inner_form(B, el_residual(D, metric, F, R), metric)
    return lhs, rhs


def curvature_operator(D, B, metric, R=None):
    """``(R^D B)(X) = sum_i [R(e_i, X), B(e_i)]`` in coordinate components."""
    _require_uniform(metric, "curvature_operator")
    if R is None:
        R = curvature(D)
    lat = D.lattice
    b = B.values
    out = np.zeros_like(b)
    for nu in range(lat.n):
        for mu in range(lat.n):
            if mu != nu:
                out[nu] += bracket(R.component((mu, nu)), b[mu])
    return B.like(out) * _frame(metric, 2)


def _pointwise_pair2(a, b, metric):
    """Orthonormal-frame pointwise pairing of two 2-forms."""
    return inner(a.values, b.values).sum(axis=0) * _frame(metric, 2) ** 2


def hess_quadratic(D, B, metric, F):
    """Second derivative of the energy along the straight line ``D + tB`` at t = 0."""
    _require_uniform(metric, "hess_quadratic")
    R = curvature(D)
    q = pointwise_norm2(R, metric)
    dB = d(D, B)
    a = _pointwise_pair2(dB, R, metric)
    quad = _pointwise_pair2(dB, dB, metric)
    rb = inner(B.values, curvature_operator(D, B, metric, R).values).sum(axis=0) * _frame(metric, 1) ** 2
    local = F.d2f(q / 2) * a**2 + F.df(q / 2) * (quad + rb)
    return float(np.sum(volume(metric) * local))


def hess_operator(D, B, metric, F, R=None):
    """Self-adjoint operator ``S_D`` with ``inner_form(B, S_D B) = hess_quadratic``.

    ``S_D(B) = delta(F' d_D B + F'' <d_D B, R> R) + F' R^D(B)``.
    """
    _require_uniform(metric, "hess_operator")
    if R is None:
        R = curvature(D)
    q = pointwise_norm2(R, metric)
    dB = d(D, B)
    a = _pointwise_pair2(dB, R, metric)
    inside = dB * F.df(q / 2) + R * (F.d2f(q / 2) * a)
    return delta(D, metric, inside) + curvature_operator(D, B, metric, R) * F.df(q / 2)


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    index: int
    nullity: int
    tau: float
    method: str
    residuals: np.ndarray
    gauge_dim: int = None
    gauge_null: int = None


def _operator_matrix(apply, dim):
    cols = np.empty((dim, dim))
    e = np.zeros(dim)
    for j in range(dim):
        e[j] = 1.0
        cols[:, j] = apply(e)
        e[j] = 0.0
    return 0.5 * (cols + cols.T)


def spectrum(D, metric, F, k, tau=None, dense_limit=4000, seed=0):
    """Lowest ``k`` eigenvalues of ``S_D`` on 1-forms, with index and nullity.

    Upper-triangle coordinates are orthonormal for ``inner_form`` up to the
    constant cell weight, so the coordinate matrix is symmetric and shares
    its eigenvalues with ``S_D``.
    """
    _require_uniform(metric, "spectrum")
    lat, m = D.lattice, D.m
    R = curvature(D)
    dim = lat.cells(1) * dim_so(m)
    k = min(int(k), dim)

    def apply(v):
        B = PForm.from_vector(1, lat, m, v)
        return hess_operator(D, B, metric, F, R).to_vector()

    gauge_dim = gauge_null = None
    if dim <= dense_limit:
        M = _operator_matrix(apply, dim)
        w, V = np.linalg.eigh(M)
        vals, vecs = w[:k], V[:, :k]
        scale = float(np.abs(w).max(initial=0.0))
        method = "dense"
    else:
        op = LinearOperator((dim, dim), matvec=apply, dtype=float)
        v0 = np.random.default_rng(seed).standard_normal(dim)
        try:
            vals, vecs = eigsh(op, k=k, which="SA", v0=v0, tol=1e-12, maxiter=20 * dim)
        except ArpackNoConvergence as exc:
            res = [np.linalg.norm(apply(v) - lam * v) for lam, v in zip(exc.eigenvalues, exc.eigenvectors.T)]
            raise ConvergenceError(
                "iterative eigensolver did not converge",
                converged=exc.eigenvalues,
                residuals=np.array(res),
            ) from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        scale = float(np.abs(eigsh(op, k=1, which="LM", v0=v0, tol=1e-3, return_eigenvectors=False)).max())
        method = "iterative"
    residuals = np.array([np.linalg.norm(apply(v) - lam * v) for lam, v in zip(vals, vecs.T)])
    if tau is None:
        # relative to the operator norm, not to the (possibly all-zero) computed eigenvalues
        tau = 1e-8 * max(scale, 1e-300)
    index = int(np.sum(vals < -tau))
    nullity = int(np.sum(np.abs(vals) <= tau))

    if method == "dense":
        G = _gauge_basis(D)
        if G.shape[1]:
            gauge_dim = G.shape[1]
            gw = np.linalg.eigvalsh(G.T @ M @ G)
            gauge_null = int(np.sum(np.abs(gw) <= tau))
        else:
            gauge_dim = gauge_null = 0
    return SpectrumResult(vals, index, nullity, float(tau), method, residuals, gauge_dim, gauge_null)


def _gauge_basis(D):
    """Orthonormal basis (columns) of the image of ``d_D`` on 0-forms."""
    lat, m = D.lattice, D.m
    n0 = lat.cells(0) * dim_so(m)
    cols = np.empty((lat.cells(1) * dim_so(m), n0))
    e = np.zeros(n0)
    for j in range(n0):
        e[j] = 1.0
        cols[:, j] = d(D, PForm.from_vector(0, lat, m, e)).to_vector()
        e[j] = 0.0
    U, s, _ = np.linalg.svd(cols, full_matrices=False)
    rank = int(np.sum(s > 1e-10 * s.max(initial=0.0)))
    return U[:, :rank]


def metric_variation(D, metric, F, u, step=1e-5):
    """Energy change under the conformal variation ``delta g = u g``.

    Returns ``(closed, fd)``: the stress-tensor pairing ``1/2 sum u tr(S) vol``
    and a central difference of the energy under ``c -> (1 + s u) c``.
    """
    u = np.asarray(u, dtype=float)
    if u.shape == ():
        u = np.full(metric.lattice.extents, float(u))
    R = curvature(D)
    S = stress_energy(D, metric, F, R)
    closed = 0.5 * float(np.sum(u * S.trace * volume(metric)))
    plus = energy(D, metric.scaled(1 + step * u), F, R)
    minus = energy(D, metric.scaled(1 - step * u), F, R)
    return closed, (plus - minus) / (2 * step)

"""Twisted exterior calculus on the lattice.

``d`` uses forward differences plus brackets with the connection form, all
anchored at the cell's base site.  ``delta`` is the exact adjoint of ``d``
for the weighted L2 pairing of :mod:`biym.lattice`, written in closed local
form (backward differences of weighted components).  Summation by parts is
exact on the periodic lattice, so adjointness holds to rounding.

The discrete Bianchi identity ``d_D R = 0`` only holds to first order in h.
"""
from dataclasses import dataclass

import numpy as np

from biym.algebra import bracket, inner
from biym.errors import UnsupportedConfiguration
from biym.lattice import PForm, components, norm, pointwise_norm2, shift, volume, weight

__all__ = [
    "Connection",
    "StressTensor",
    "d",
    "delta",
    "wedge_bracket",
    "curvature",
    "interior",
    "stress_energy",
    "div_direct",
    "div_formula",
    "bianchi_residual",
    "full_components",
]


@dataclass(eq=False)
class Connection:
    """``D = d + alpha`` on the trivial bundle; ``alpha`` is a 1-form."""

    alpha: PForm

    def __post_init__(self):
        if self.alpha.p != 1:
            raise ValueError("connection form must be a 1-form")

    @classmethod
    def flat(cls, lattice, m):
        return cls(PForm.zeros(1, lattice, m))

    @property
    def lattice(self):
        return self.alpha.lattice

    @property
    def m(self):
        return self.alpha.m

    def __add__(self, beta):
        return Connection(self.alpha + beta)

    def __sub__(self, beta):
        return Connection(self.alpha - beta)


@dataclass(eq=False)
class StressTensor:
    """Symmetric ``n x n`` tensor per site, orthonormal-frame components."""

    S: np.ndarray

    @property
    def trace(self):
        return np.trace(self.S, axis1=-2, axis2=-1)


def _require_uniform(metric, what):
    if not metric.is_uniform:
        raise UnsupportedConfiguration(f"{what} requires a uniform metric (constant conformal factor)")


def _check(D, form):
    if D is None:
        return
    if form.lattice != D.lattice or form.m != D.m:
        raise ValueError("form and connection live on different lattices or fibers")


def d(D, phi):
    """Covariant exterior derivative of a 0-, 1- or 2-form.  ``D=None`` is the trivial connection."""
    p = phi.p
    if not 0 <= p <= 2:
        raise ValueError(f"d is defined for degrees 0..2, got {p}")
    _check(D, phi)
    lat = phi.lattice
    n, h = lat.n, lat.h
    src = {c: i for i, c in enumerate(components(n, p))}
    out = np.zeros(lat.form_shape(p + 1, phi.m))
    alpha = None if D is None else D.alpha.values
    for k, I in enumerate(components(n, p + 1)):
        acc = out[k]
        for a, mu in enumerate(I):
            J = I[:a] + I[a + 1:]
            f = phi.values[src[J]]
            term = (shift(f[None], mu)[0] - f) / h
            if alpha is not None:
                term = term + bracket(alpha[mu], f)
            if a % 2:
                acc -= term
            else:
                acc += term
    return PForm(p + 1, lat, phi.m, out)


def delta(D, metric, psi):
    """Formal adjoint of :func:`d` with respect to ``inner_form`` under ``metric``."""
    p = psi.p
    if not 1 <= p <= 3:
        raise ValueError(f"delta is defined for degrees 1..3, got {p}")
    _check(D, psi)
    lat = psi.lattice
    n, h = lat.n, lat.h
    big = weight(metric, p)[None, ..., None, None] * psi.values
    src = {c: i for i, c in enumerate(components(n, p))}
    out = np.zeros(lat.form_shape(p - 1, psi.m))
    alpha = None if D is None else D.alpha.values
    for k, J in enumerate(components(n, p - 1)):
        acc = out[k]
        for mu in range(n):
            if mu in J:
                continue
            a = sum(1 for j in J if j < mu)
            I = tuple(sorted(J + (mu,)))
            W = big[src[I]]
            term = (W - shift(W[None], mu, -1)[0]) / h
            if alpha is not None:
                term = term + bracket(alpha[mu], W)
            if a % 2:
                acc += term
            else:
                acc -= term
    out /= weight(metric, p - 1)[None, ..., None, None]
    return PForm(p - 1, lat, psi.m, out)


def wedge_bracket(phi, psi):
    """``[phi ^ psi](X, Y) = [phi(X), psi(Y)] - [phi(Y), psi(X)]`` for 1-forms."""
    if phi.p != 1 or psi.p != 1:
        raise ValueError("wedge_bracket expects two 1-forms")
    phi._compatible(psi)
    a, b = phi.values, psi.values
    lat = phi.lattice
    out = np.zeros(lat.form_shape(2, phi.m))
    for k, (mu, nu) in enumerate(components(lat.n, 2)):
        out[k] = bracket(a[mu], b[nu]) - bracket(a[nu], b[mu])
    return PForm(2, lat, phi.m, out)


def curvature(D):
    """``R_{mu nu} = Delta_mu alpha_nu - Delta_nu alpha_mu + [alpha_mu, alpha_nu]``."""
    a = D.alpha.values
    lat = D.lattice
    h = lat.h
    out = np.zeros(lat.form_shape(2, D.m))
    for k, (mu, nu) in enumerate(components(lat.n, 2)):
        out[k] = (shift(a[nu][None], mu)[0] - a[nu]) / h
        out[k] -= (shift(a[mu][None], nu)[0] - a[mu]) / h
        out[k] += bracket(a[mu], a[nu])
    return PForm(2, lat, D.m, out)


def full_components(form):
    """Dense antisymmetric array of shape ``(n,)*p + sites + (m, m)``."""
    lat = form.lattice
    n, p = lat.n, form.p
    out = np.zeros((n,) * p + lat.extents + (form.m, form.m))
    from itertools import permutations

    for k, I in enumerate(components(n, p)):
        for perm in permutations(range(p)):
            axes = tuple(I[i] for i in perm)
            sign = 1
            for i in range(p):
                for j in range(i + 1, p):
                    if perm[i] > perm[j]:
                        sign = -sign
            out[axes] = sign * form.values[k]
    return out


def _frame(metric, p):
    """Coordinate-to-orthonormal factor ``(sqrt(c) h)^-p`` per site."""
    return (np.sqrt(metric.c) * metric.lattice.h) ** (-p)


def interior(psi, k, metric=None):
    """``i_{e_k} psi`` for a 2-form; with a metric, in orthonormal-frame components."""
    if psi.p != 2:
        raise ValueError("interior expects a 2-form")
    lat = psi.lattice
    out = np.zeros(lat.form_shape(1, psi.m))
    for nu in range(lat.n):
        if nu != k:
            out[nu] = psi.component((k, nu))
    res = PForm(1, lat, psi.m, out)
    return res if metric is None else res * _frame(metric, 2)


def stress_energy(D, metric, F, R=None):
    """``S = F(Q/2) g - F'(Q/2) R (.) R`` in the orthonormal frame at each site."""
    if R is None:
        R = curvature(D)
    n = D.lattice.n
    q = pointwise_norm2(R, metric)
    Rn = full_components(R) * _frame(metric, 2)[None, None, ..., None, None]
    # (R (.) R)_{kl} = sum_j <R_kj, R_lj>
    prod = 0.5 * np.einsum("kj...ab,lj...ab->...kl", Rn, Rn)
    S = F.f(q / 2)[..., None, None] * np.eye(n) - F.df(q / 2)[..., None, None] * prod
    S = 0.5 * (S + np.swapaxes(S, -1, -2))
    return StressTensor(S)


def _covector_norm(v, metric):
    return float(np.sqrt(np.sum(volume(metric) * np.sum(v * v, axis=-1))))


def div_direct(S, metric):
    """Forward-difference divergence ``sum_mu e_mu(S_{mu k})``; returns (field, L2 norm)."""
    _require_uniform(metric, "div_direct")
    lat = metric.lattice
    n, h = lat.n, lat.h
    scale = _frame(metric, 1)
    out = np.zeros(lat.extents + (n,))
    for mu in range(n):
        s = S.S[..., mu, :]
        out += (np.roll(s, -1, axis=mu) - s) / h
    out *= scale[..., None]
    return out, _covector_norm(out, metric)


@dataclass
class DivergenceFormula:
    total: np.ndarray
    coderivative: np.ndarray
    coderivative_expanded: np.ndarray
    bianchi: np.ndarray
    norms: dict


def div_formula(D, metric, F):
    """Divergence of the stress tensor from the closed-form expression.

    ``div S(X) = <delta(F' R), i_X R> + F' <i_X d_D R, R>``; the first term is
    evaluated through ``delta`` applied to ``F' R`` so that it vanishes exactly
    at a discrete critical point.  The Leibniz-expanded version
    ``<F' delta R - i_{grad F'} R, i_X R>`` is returned alongside.
    """
    _require_uniform(metric, "div_formula")
    lat = D.lattice
    n, h = lat.n, lat.h
    R = curvature(D)
    q = pointwise_norm2(R, metric)
    coef = F.df(q / 2)
    f1, f2, f3 = (_frame(metric, p)[..., None, None] for p in (1, 2, 3))
    Rn = full_components(R) * f2[None, None]

    el = delta(D, metric, R * coef).values * f1[None]
    coderiv = np.einsum("j...ab,lj...ab->...l", el, Rn) * 0.5

    dR = delta(D, metric, R).values * f1[None]
    grad = np.stack([(np.roll(coef, -1, axis=mu) - coef) / h for mu in range(n)]) * _frame(metric, 1)[None]
    igrad = np.einsum("k...,kj...ab->j...ab", grad, Rn)
    expanded_vec = coef[None, ..., None, None] * dR - igrad
    expanded = 0.5 * np.einsum("j...ab,lj...ab->...l", expanded_vec, Rn)

    if n >= 3:
        G = full_components(d(D, R)) * f3[None, None, None]
        # <i_l dR, R> = sum_{k<j} <G_lkj, R_kj> = 1/2 sum_{kj}
        bian = 0.25 * np.einsum("lkj...ab,kj...ab->...l", G, Rn)
        bian *= coef[..., None]
    else:
        bian = np.zeros(lat.extents + (n,))
    total = coderiv + bian
    norms = {
        "total": _covector_norm(total, metric),
        "coderivative": _covector_norm(coderiv, metric),
        "coderivative_expanded": _covector_norm(expanded, metric),
        "bianchi": _covector_norm(bian, metric),
    }
    return DivergenceFormula(total, coderiv, expanded, bian, norms)


def bianchi_residual(D, metric, R=None):
    """L2 norm of ``d_D R_D`` (zero when n < 3: no 3-cells)."""
    if D.lattice.n < 3:
        return 0.0
    if R is None:
        R = curvature(D)
    return norm(d(D, R), metric)

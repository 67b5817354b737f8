"""Conformal rescaling that turns a Yang-Mills connection into a
Born-Infeld critical point (dimension n >= 5).

Scalar chain::

    h(t)      = sqrt(1 + 2t) - 1
    H         = inverse of h'(t) = 1/sqrt(1 + 2t),  H(y) = (y^-2 - 1)/2
    F_conf(y) = H(y^((n-4)/2)) / y^2 = (y^(4-n) - 1) / (2 y^2)
    Phi       = inverse of F_conf,  [0, inf) -> (0, 1]

``sigma = Phi(Q/2)`` solves ``sigma^((n-4)/2) sqrt(1 + sigma^2 Q) = 1``
sitewise, and ``g~ = g / sigma``.
"""
import math
from dataclasses import dataclass

import numpy as np

from biym.calculus import curvature, delta
from biym.errors import ConvergenceError, DomainError
from biym.functional import born_infeld, el_residual
from biym.lattice import ConformalMetric, norm, pointwise_norm2

__all__ = [
    "h_fun",
    "H_fun",
    "F_conf",
    "phi",
    "SigmaField",
    "sigma_field",
    "rescale_metric",
    "step2_verify",
    "step1_weight",
    "functional_equation_residual",
    "conformal_weight",
]


def _require_dim(n):
    if n == 4:
        raise DomainError(
            "the conformal construction needs n >= 5; in dimension 4 the "
            "Euler-Lagrange equations are conformally invariant"
        )
    if n < 5:
        raise DomainError(f"the conformal construction needs n >= 5, got n={n}")


def h_fun(t):
    if t < 0:
        raise DomainError("h is defined for t >= 0")
    return math.sqrt(1 + 2 * t) - 1


def H_fun(y):
    if not 0 < y <= 1:
        raise DomainError("H is defined on (0, 1]")
    return (y**-2 - 1) / 2


def F_conf(y, n):
    if not 0 < y <= 1:
        raise DomainError("F_conf is defined on (0, 1]")
    _require_dim(n)
    # expm1 keeps precision when y is close to 1
    return math.expm1((4 - n) * math.log(y)) / (2 * y * y)


def _dF_conf(y, n):
    return ((2 - n) * y ** (1 - n) + 2 * y**-3) / 2


def phi(t, n, tol=1e-12, max_bisect=200, max_newton=50):
    """Unique ``sigma`` in (0, 1] with ``F_conf(sigma, n) = t``."""
    if t < 0 or math.isnan(t):
        raise DomainError("phi is defined for t >= 0")
    _require_dim(n)
    if t == 0:
        return 1.0
    lo, hi = 0.5, 1.0
    while F_conf(lo, n) <= t:
        hi, lo = lo, lo / 2
        if lo < 1e-300:
            raise ConvergenceError("could not bracket the root", lo=lo, hi=hi, t=t)
    # F_conf is decreasing: F(lo) > t >= F(hi)
    for _ in range(max_bisect):
        mid = 0.5 * (lo + hi)
        if F_conf(mid, n) > t:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-6 * hi:
            break
    y = 0.5 * (lo + hi)
    for _ in range(max_newton):
        r = F_conf(y, n) - t
        if abs(r) <= tol * max(t, 1e-300):
            return y
        step = r / _dF_conf(y, n)
        y_new = y - step
        if not lo <= y_new <= hi:
            y_new = 0.5 * (lo + hi)
        if F_conf(y_new, n) > t:
            lo = y_new
        else:
            hi = y_new
        if y_new == y:
            break
        y = y_new
    r = F_conf(y, n) - t
    # near y = 1 the float grid limits the attainable residual to ~eps * F'(1)
    if abs(r) <= max(tol * t, 4 * np.finfo(float).eps * abs(_dF_conf(y, n))):
        return y
    raise ConvergenceError("Newton polish did not reach tolerance", lo=lo, hi=hi, y=y, residual=r)


@dataclass(eq=False)
class SigmaField:
    sigma: np.ndarray
    n: int


def functional_equation_residual(sigma, q, n):
    """``|sigma^((n-4)/2) sqrt(1 + sigma^2 Q) - 1|`` per site."""
    return np.abs(sigma ** ((n - 4) / 2) * np.sqrt(1 + sigma**2 * q) - 1)


def sigma_field(D, metric, n=None):
    n = D.lattice.n if n is None else n
    _require_dim(n)
    q = pointwise_norm2(curvature(D), metric)
    sig = np.array([phi(t, n) for t in (q / 2).ravel()]).reshape(q.shape)
    return SigmaField(sig, n)


def rescale_metric(metric, sigma):
    """``g~ = sigma^-1 g``."""
    s = sigma.sigma if isinstance(sigma, SigmaField) else np.asarray(sigma)
    return ConformalMetric(metric.lattice, metric.c / s)


@dataclass
class Step2Report:
    r_ym: float
    r_bi: float
    sigma_min: float
    sigma_max: float
    bound: float
    defect: float
    equation_residual: float
    sigma: SigmaField
    metric: ConformalMetric

    @property
    def ok(self):
        return self.r_bi <= self.bound * (1 + 1e-9) + 1e-300 and self.defect <= 1e-10


def step2_verify(D, metric):
    """Compare the Yang-Mills residual under ``g`` with the Born-Infeld residual under ``g~``.

    The base-site anchoring gives the exact cellwise relation
    ``r_BI = sigma^(n/2 - 1) r_YM``; the defect is measured relative to
    ``max(1, max |sigma^(n/2-1) r_YM|)``.  Both norms are L2 under ``g``.
    """
    n = D.lattice.n
    _require_dim(n)
    R = curvature(D)
    r_ym = delta(D, metric, R)
    sig = sigma_field(D, metric)
    g_t = rescale_metric(metric, sig)
    r_bi = el_residual(D, g_t, born_infeld(), R)
    factor = sig.sigma ** (n / 2 - 1)
    pred = r_ym.values * factor[None, ..., None, None]
    scale = max(1.0, float(np.abs(pred).max(initial=0.0)))
    defect = float(np.abs(r_bi.values - pred).max(initial=0.0)) / scale
    res_ym = norm(r_ym, metric)
    q = pointwise_norm2(R, metric)
    return Step2Report(
        r_ym=res_ym,
        r_bi=norm(r_bi, metric),
        sigma_min=float(sig.sigma.min()),
        sigma_max=float(sig.sigma.max()),
        bound=float(factor.max()) * res_ym,
        defect=defect,
        equation_residual=float(functional_equation_residual(sig.sigma, q, n).max()),
        sigma=sig,
        metric=g_t,
    )


def conformal_weight(q, p, n):
    """``f = (1 + Q)^((p-2)/(n-4))`` per site."""
    _require_dim(n)
    return (1 + np.asarray(q, dtype=float)) ** ((p - 2) / (n - 4))


@dataclass
class Step1Report:
    f: np.ndarray
    metric: ConformalMetric
    residual_bar: float
    residual_weighted: float
    defect: float


def step1_weight(D, metric, p):
    """Weight ``f = (1 + Q)^((p-2)/(n-4))`` and the Yang-Mills residual under ``f g``.

    Under the base-site anchoring
    ``delta_{fg} R = f^(1 - n/2) delta_g((1 + Q)^((p-2)/2) R)`` holds cellwise;
    ``defect`` is its relative violation.
    """
    n = D.lattice.n
    _require_dim(n)
    if not 2 * p > n:
        raise ValueError(f"step 1 requires 2p > n, got p={p}, n={n}")
    R = curvature(D)
    q = pointwise_norm2(R, metric)
    f = conformal_weight(q, p, n)
    g_bar = metric.scaled(f)
    r_bar = delta(D, g_bar, R)
    r_w = delta(D, metric, R * (1 + q) ** ((p - 2) / 2))
    pred = r_w.values * (f ** (1 - n / 2))[None, ..., None, None]
    scale = max(1.0, float(np.abs(pred).max(initial=0.0)))
    defect = float(np.abs(r_bar.values - pred).max(initial=0.0)) / scale
    return Step1Report(f, g_bar, norm(r_bar, metric), norm(r_w, metric), defect)

"""Independent reference implementations used as test oracles.

These are written per site with explicit index arithmetic and dense matrix
products, deliberately sharing no code with the vectorized kernels.
"""
import itertools

import numpy as np


def comm(a, b):
    return a @ b - b @ a


def pair(a, b):
    return 0.5 * np.trace(a.T @ b)


def site_shift(x, mu, k, extents):
    y = list(x)
    y[mu] = (y[mu] + k) % extents[mu]
    return tuple(y)


def curvature_site(alpha, x, mu, nu, extents, h):
    """R_{mu nu}(x) from a (n, *extents, m, m) connection array."""
    a_nu_fwd = alpha[(nu,) + site_shift(x, mu, 1, extents)]
    a_mu_fwd = alpha[(mu,) + site_shift(x, nu, 1, extents)]
    a_mu, a_nu = alpha[(mu,) + x], alpha[(nu,) + x]
    return (a_nu_fwd - a_nu) / h - (a_mu_fwd - a_mu) / h + comm(a_mu, a_nu)


def plain_ym_action(alpha, c, h):
    """1/2 sum_x vol(x) sum_{mu<nu} |R_{mu nu}|^2_g, by explicit loops."""
    n = alpha.shape[0]
    extents = alpha.shape[1:-2]
    total = 0.0
    for x in itertools.product(*[range(L) for L in extents]):
        q = 0.0
        for mu, nu in itertools.combinations(range(n), 2):
            R = curvature_site(alpha, x, mu, nu, extents, h)
            q += pair(R, R)
        q /= (c[x] * h * h) ** 2
        total += 0.5 * c[x] ** (n / 2) * h**n * q
    return total


def plain_ym_gradient(alpha, h):
    """Gradient of the plain YM action (uniform metric c = 1) by direct differentiation.

    For each edge (y, rho) the action depends on alpha_rho(y) through the
    plaquettes anchored at y (linear + bracket terms) and at y - e_mu
    (forward difference only).  Returns an array shaped like ``alpha``
    representing the inner-product gradient (pairing <.,.> = 1/2 tr).
    """
    n = alpha.shape[0]
    extents = alpha.shape[1:-2]
    w2 = h ** (n - 4)
    grad = np.zeros_like(alpha)
    for x in itertools.product(*[range(L) for L in extents]):
        for mu, nu in itertools.combinations(range(n), 2):
            R = curvature_site(alpha, x, mu, nu, extents, h)
            # dE = w2 * <dR, R>; dR/d alpha_nu(x+mu) = 1/h
            grad[(nu,) + site_shift(x, mu, 1, extents)] += w2 * R / h
            grad[(mu,) + site_shift(x, nu, 1, extents)] -= w2 * R / h
            # dR/d alpha_nu(x) = -1/h and bracket [alpha_mu, .]; adjoint of ad is -ad
            grad[(nu,) + x] += w2 * (-R / h - comm(alpha[(mu,) + x], R))
            grad[(mu,) + x] += w2 * (R / h + comm(alpha[(nu,) + x], R))
    # convert from gradient w.r.t. <,> with 1-form weight w1 = h^(n-2)
    return grad / h ** (n - 2)


def fourier_delta_d_min(L, h=1.0):
    """Smallest nonzero eigenvalue of delta d on 1-forms on a 2-D L x L torus."""
    vals = []
    for k1 in range(L):
        for k2 in range(L):
            lam = 4 * np.sin(np.pi * k1 / L) ** 2 / h**2 + 4 * np.sin(np.pi * k2 / L) ** 2 / h**2
            if lam > 1e-12:
                vals.append(lam)
    return min(vals)

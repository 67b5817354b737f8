"""Seeded identity checks behind ``biym verify``.

Each check returns the worst residual over its trials; the caller compares it
against a tolerance.  Residuals are relative unless noted.
"""
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from biym._rng import stream
from biym.algebra import dim_so, inner
from biym.calculus import curvature, d, delta, stress_energy, wedge_bracket
from biym.conformal import functional_equation_residual, sigma_field
from biym.errors import DomainError
from biym.flow import random_connection
from biym.functional import (
    born_infeld,
    curvature_operator,
    energy,
    first_variation,
    hess_operator,
    hess_quadratic,
    metric_variation,
    yang_mills,
)
from biym.lattice import ConformalMetric, PForm, inner_form, pointwise_norm2

DEFAULT_TOLERANCES = {
    "adjointness": 1e-10,
    "curvature_expansion": 1e-13,
    "first_variation_pairing": 1e-12,
    "first_variation_fd": 1e-6,
    "second_variation_fd": 1e-5,
    "hessian_form": 1e-10,
    "hessian_symmetry": 1e-10,
    "bracket_identity": 1e-12,
    "stress_trace": 1e-12,
    "metric_variation": 1e-7,
    "functional_equation": 1e-10,
}

CONFORMAL_IDENTITIES = {"functional_equation"}


def rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def random_form(p, lattice, m, seed, tag, scale=1.0):
    rng = stream(seed, tag)
    return PForm.from_vector(p, lattice, m, scale * rng.standard_normal(lattice.cells(p) * dim_so(m)))


def random_metric(lattice, seed, low=0.5, high=2.0):
    return ConformalMetric(lattice, stream(seed, "verify.metric").uniform(low, high, lattice.extents))


@dataclass
class Context:
    lattice: object
    m: int
    metric: ConformalMetric
    seeds: list
    amplitude: float = 0.5

    def connection(self, seed):
        return random_connection(self.lattice, self.m, seed, self.amplitude)


def check_adjointness(ctx):
    worst = 0.0
    for s in ctx.seeds:
        D = ctx.connection(s)
        for metric in (ctx.metric, random_metric(ctx.lattice, s)):
            for p in (0, 1, 2):
                if p + 1 > ctx.lattice.n:
                    continue
                phi = random_form(p, ctx.lattice, ctx.m, s, f"adj.phi{p}")
                psi = random_form(p + 1, ctx.lattice, ctx.m, s, f"adj.psi{p}")
                a = inner_form(d(D, phi), psi, metric)
                b = inner_form(phi, delta(D, metric, psi), metric)
                worst = max(worst, rel(a, b))
    return worst


def check_curvature_expansion(ctx):
    worst = 0.0
    for s in ctx.seeds:
        D = ctx.connection(s)
        beta = random_form(1, ctx.lattice, ctx.m, s, "exp.beta", 0.5)
        lhs = curvature(D + beta).values
        rhs = (curvature(D) + d(D, beta) + wedge_bracket(beta, beta) * 0.5).values
        worst = max(worst, float(np.abs(lhs - rhs).max(initial=0.0)) / max(1.0, float(np.abs(lhs).max(initial=0.0))))
    return worst


def _fd_first(D, B, metric, F, t=1e-4):
    return (energy(D + B * t, metric, F) - energy(D - B * t, metric, F)) / (2 * t)


def _fd_second(D, B, metric, F, t=1e-3):
    return (energy(D + B * t, metric, F) - 2 * energy(D, metric, F) + energy(D - B * t, metric, F)) / t**2


def check_first_variation_pairing(ctx):
    worst = 0.0
    for s in ctx.seeds:
        D = ctx.connection(s)
        B = random_form(1, ctx.lattice, ctx.m, s, "fv.B")
        for F in (born_infeld(), yang_mills()):
            worst = max(worst, rel(*first_variation(D, B, ctx.metric, F)))
    return worst


def check_first_variation_fd(ctx):
    worst = 0.0
    for s in ctx.seeds:
        D = ctx.connection(s)
        B = random_form(1, ctx.lattice, ctx.m, s, "fv.B")
        for F in (born_infeld(), yang_mills()):
            _, analytic = first_variation(D, B, ctx.metric, F)
            worst = max(worst, rel(analytic, _fd_first(D, B, ctx.metric, F)))
    return worst


def _uniform(ctx):
    return ConformalMetric.uniform(ctx.lattice)


def check_second_variation_fd(ctx):
    g = _uniform(ctx)
    worst = 0.0
    for s in ctx.seeds:
        D = ctx.connection(s)
        B = random_form(1, ctx.lattice, ctx.m, s, "sv.B")
        for F in (born_infeld(), yang_mills()):
            worst = max(worst, rel(hess_quadratic(D, B, g, F), _fd_second(D, B, g, F)))
    return worst


def check_hessian_form(ctx):
    g = _uniform(ctx)
    worst = 0.0
    for s in ctx.seeds:
        D = ctx.connection(s)
        B = random_form(1, ctx.lattice, ctx.m, s, "sv.B")
        for F in (born_infeld(), yang_mills()):
            worst = max(worst, rel(inner_form(B, hess_operator(D, B, g, F), g), hess_quadratic(D, B, g, F)))
    return worst


def check_hessian_symmetry(ctx):
    g = _uniform(ctx)
    worst = 0.0
    for s in ctx.seeds:
        D = ctx.connection(s)
        B = random_form(1, ctx.lattice, ctx.m, s, "sym.B")
        B2 = random_form(1, ctx.lattice, ctx.m, s, "sym.B2")
        for F in (born_infeld(), yang_mills()):
            a = inner_form(B, hess_operator(D, B2, g, F), g)
            b = inner_form(B2, hess_operator(D, B, g, F), g)
            scale = np.sqrt(abs(inner_form(B, hess_operator(D, B, g, F), g) * inner_form(B2, hess_operator(D, B2, g, F), g)))
            worst = max(worst, abs(a - b) / max(abs(a), scale, 1e-300))
    return worst


def check_bracket_identity(ctx):
    """Sitewise, absolute relative to the largest site term."""
    g = _uniform(ctx)
    worst = 0.0
    for s in ctx.seeds:
        D = ctx.connection(s)
        B = random_form(1, ctx.lattice, ctx.m, s, "br.B")
        R = curvature(D)
        lhs = inner(wedge_bracket(B, B).values, R.values).sum(axis=0)
        rhs = inner(B.values, curvature_operator(D, B, g, R).values).sum(axis=0)
        rhs = rhs * g.lattice.h**2 * g.c
        scale = max(1.0, float(np.abs(lhs).max(initial=0.0)))
        worst = max(worst, float(np.abs(lhs - rhs).max(initial=0.0)) / scale)
    return worst


def check_stress_trace(ctx):
    worst = 0.0
    n = ctx.lattice.n
    for s in ctx.seeds:
        D = ctx.connection(s)
        for F in (born_infeld(), yang_mills()):
            S = stress_energy(D, ctx.metric, F)
            q = pointwise_norm2(curvature(D), ctx.metric)
            expect = n * F.f(q / 2) - 2 * q * F.df(q / 2)
            scale = max(1.0, float(np.abs(expect).max()))
            worst = max(worst, float(np.abs(S.trace - expect).max()) / scale)
    return worst


def check_metric_variation(ctx):
    worst = 0.0
    for s in ctx.seeds:
        D = ctx.connection(s)
        u = stream(s, "mv.u").standard_normal(ctx.lattice.extents)
        for F in (born_infeld(), yang_mills()):
            closed, fd = metric_variation(D, ctx.metric, F, u)
            # conformally invariant cases (YM, n = 4) have both sides ~ 0
            scale = max(abs(closed), abs(fd), energy(D, ctx.metric, F) * np.abs(u).max(), 1e-300)
            worst = max(worst, abs(closed - fd) / scale)
    return worst


def check_functional_equation(ctx):
    n = ctx.lattice.n
    worst = 0.0
    for s in ctx.seeds:
        D = ctx.connection(s)
        sig = sigma_field(D, ctx.metric)
        q = pointwise_norm2(curvature(D), ctx.metric)
        worst = max(worst, float(functional_equation_residual(sig.sigma, q, n).max()))
    return worst


CHECKS = {
    "adjointness": check_adjointness,
    "curvature_expansion": check_curvature_expansion,
    "first_variation_pairing": check_first_variation_pairing,
    "first_variation_fd": check_first_variation_fd,
    "second_variation_fd": check_second_variation_fd,
    "hessian_form": check_hessian_form,
    "hessian_symmetry": check_hessian_symmetry,
    "bracket_identity": check_bracket_identity,
    "stress_trace": check_stress_trace,
    "metric_variation": check_metric_variation,
    "functional_equation": check_functional_equation,
}


def default_identities(n):
    return [k for k in CHECKS if n >= 5 or k not in CONFORMAL_IDENTITIES]


def worker_count():
    raw = os.environ.get("BIYM_THREADS", "0")
    try:
        k = int(raw)
    except ValueError:
        raise ValueError(f"BIYM_THREADS must be an integer, got {raw!r}") from None
    if k < 0:
        raise ValueError("BIYM_THREADS must be >= 0")
    return k or (os.cpu_count() or 1)


def run_suite(ctx, identities, tolerances):
    """Return rows ``(identity, max_residual, tolerance, passed)`` in request order."""
    unknown = [k for k in identities if k not in CHECKS]
    if unknown:
        raise ValueError(f"unknown identities: {unknown}")
    if ctx.lattice.n < 5 and CONFORMAL_IDENTITIES & set(identities):
        raise DomainError(f"the conformal construction needs n >= 5, got n={ctx.lattice.n}")
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        results = list(pool.map(lambda k: CHECKS[k](ctx), identities))
    rows = []
    for k, r in zip(identities, results):
        tol = float(tolerances.get(k, DEFAULT_TOLERANCES[k]))
        rows.append((k, r, tol, bool(r <= tol)))
    return rows

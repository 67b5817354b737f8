"""Gradient descent with Armijo backtracking on connection coefficients."""
import logging
from dataclasses import dataclass, field

import numpy as np

from biym._rng import stream
from biym.algebra import dim_so
from biym.calculus import Connection, curvature
from biym.functional import el_residual, energy, hess_operator
from biym.lattice import PForm, inner_form, norm

log = logging.getLogger(__name__)

__all__ = ["FlowConfig", "FlowResult", "minimize", "random_connection"]


@dataclass
class FlowConfig:
    density: str = "born_infeld"
    p: float = None
    max_iters: int = 50_000
    residual_tol: float = 1e-8
    initial_step: float = 1.0
    armijo: float = 1e-4
    backtrack: float = 0.5
    seed: int = 0
    amplitude: float = 0.5
    method: str = "gd"
    max_cg: int = 200

    def __post_init__(self):
        if self.method not in ("gd", "newton_cg"):
            raise ValueError("method must be 'gd' or 'newton_cg'")
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")
        if not 0 < self.armijo < 1:
            raise ValueError("armijo constant must lie in (0, 1)")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")
        if not self.initial_step > 0:
            raise ValueError("initial_step must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")


@dataclass
class FlowResult:
    connection: Connection
    status: str
    trace: list = field(default_factory=list)

    @property
    def converged(self):
        return self.status == "converged"

    @property
    def energy(self):
        return self.trace[-1][1]

    @property
    def residual(self):
        return self.trace[-1][2]


def random_connection(lattice, m, seed, amplitude):
    """Connection whose edge values are uniform skew matrices in [-amplitude, amplitude]."""
    if amplitude < 0:
        raise ValueError("amplitude must be >= 0")
    k = dim_so(m)
    rng = stream(seed, "flow.random_connection")
    tri = rng.uniform(-amplitude, amplitude, size=(lattice.n,) + lattice.extents + (k,))
    return Connection(PForm.from_vector(1, lattice, m, tri.ravel()))


def _newton_direction(D, metric, F, R, g, max_cg):
    """Truncated CG on ``H x = -g``; falls back to ``-g`` when no descent results."""
    gg = inner_form(g, g, metric)
    eta = min(0.5, gg**0.25)
    x = g * 0.0
    r = -g
    p = r
    rr = gg
    for _ in range(max_cg):
        Hp = hess_operator(D, p, metric, F, R)
        curv = inner_form(p, Hp, metric)
        if curv <= 1e-14 * inner_form(p, p, metric):
            break
        a = rr / curv
        x = x + p * a
        r = r - Hp * a
        rr_new = inner_form(r, r, metric)
        if rr_new <= eta * eta * gg:
            break
        p = r + p * (rr_new / rr)
        rr = rr_new
    slope = inner_form(g, x, metric)
    if not slope < 0:
        return -g, -gg
    return x, slope


def minimize(D0, metric, F, cfg):
    """Descend ``energy`` until the L2 norm of ``el_residual`` drops below tolerance.

    ``method="gd"`` steps along ``-el_residual``; the first trial step of every
    iteration is ``min(initial_step, 2 * previous accepted step)``.
    ``method="newton_cg"`` (uniform metrics only) takes a truncated-CG Newton
    direction from :func:`hess_operator` and starts backtracking at 1.  Both
    accept a step only under the Armijo condition, so energies never increase.

    Each row of ``trace`` is ``(iter, energy, residual_norm, step)``; row 0 is
    the starting point with step 0.
    """
    D = D0
    R = curvature(D)
    e = energy(D, metric, F, R)
    g = el_residual(D, metric, F, R)
    gn = norm(g, metric)
    trace = [(0, e, gn, 0.0)]
    step = cfg.initial_step
    status = "max_iters"
    for it in range(1, cfg.max_iters + 1):
        if gn <= cfg.residual_tol:
            status = "converged"
            break
        if cfg.method == "newton_cg":
            direction, slope = _newton_direction(D, metric, F, R, g, cfg.max_cg)
            t = 1.0
        else:
            direction, slope = -g, -gn * gn
            t = min(cfg.initial_step, 2 * step)
        while True:
            trial = D + direction * t
            R_t = curvature(trial)
            e_t = energy(trial, metric, F, R_t)
            if e_t <= e + cfg.armijo * t * slope:
                break
            t *= cfg.backtrack
            if t < 1e-16:
                status = "line_search_failed"
                break
        if status == "line_search_failed":
            log.warning("line search failed at iteration %d (residual %.3e)", it, gn)
            break
        D, R, e, step = trial, R_t, e_t, t
        g = el_residual(D, metric, F, R)
        gn = norm(g, metric)
        trace.append((it, e, gn, t))
    else:
        if gn <= cfg.residual_tol:
            status = "converged"
    log.info("flow finished: %s after %d iterations, energy %.6e, residual %.3e", status, trace[-1][0], e, gn)
    return FlowResult(D, status, trace)

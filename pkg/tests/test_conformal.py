import math

import numpy as np
import pytest

from biym.calculus import Connection, curvature
from biym.conformal import (
    F_conf,
    H_fun,
    conformal_weight,
    functional_equation_residual,
    h_fun,
    phi,
    rescale_metric,
    sigma_field,
    step1_weight,
    step2_verify,
)
from biym.errors import DomainError
from biym.flow import random_connection
from biym.lattice import ConformalMetric, LatticeSpec, pointwise_norm2, weight

from conftest import rand_metric


def test_scalar_chain():
    for t in [0.0, 0.3, 2.0]:
        y = 1 / math.sqrt(1 + 2 * t)
        assert abs(H_fun(y) - t) <= 1e-14 * max(1, t)
        # H inverts h'
        s = 1e-6
        hp = (h_fun(t + s) - h_fun(max(t - s, 0))) / (s + min(s, t))
        assert abs(H_fun(hp) - t) <= 1e-5
    assert F_conf(1.0, 5) == 0.0
    with pytest.raises(DomainError):
        h_fun(-1)
    with pytest.raises(DomainError):
        H_fun(1.5)


@pytest.mark.parametrize("n", [5, 6])
def test_phi_round_trip_and_monotone(n):
    ts = [0.0, 1e-12, 1e-6, 0.01, 0.5, 3.0, 100.0, 1e6]
    ys = [phi(t, n) for t in ts]
    assert ys[0] == 1.0
    assert all(a > b for a, b in zip(ys, ys[1:]))
    for t, y in zip(ts[2:], ys[2:]):
        # near y = 1 the attainable residual is limited by the float grid
        floor = 4 * np.finfo(float).eps * abs((4 - n) / 2)
        assert abs(F_conf(y, n) - t) <= max(1e-12 * t, floor)


@pytest.mark.parametrize("t", [1e-3, 0.2, 5.0, 40.0])
def test_phi_n6_quartic(t):
    q = 2 * t
    s2 = (-1 + math.sqrt(1 + 4 * q)) / (2 * q)
    assert abs(phi(t, 6) - math.sqrt(s2)) <= 1e-10


def test_phi_domain():
    with pytest.raises(DomainError, match="conformal"):
        phi(0.5, 4)
    with pytest.raises(DomainError):
        phi(0.5, 3)
    with pytest.raises(DomainError):
        phi(-0.1, 5)


@pytest.mark.parametrize("n", [5, 6])
def test_sigma_field_equation(rng, n):
    lat = LatticeSpec.cubic(n, 3)
    g = rand_metric(lat, rng)
    D = random_connection(lat, 2, n, 0.8)
    sig = sigma_field(D, g)
    q = pointwise_norm2(curvature(D), g)
    assert functional_equation_residual(sig.sigma, q, n).max() <= 1e-10
    assert np.all((sig.sigma > 0) & (sig.sigma <= 1))
    gt = rescale_metric(g, sig)
    np.testing.assert_array_equal(gt.c, g.c / sig.sigma)


def test_weight_cancellation(rng):
    # sigma^(n/2 - 2) times the p = 2 weight of g~ recovers the weight of g
    lat = LatticeSpec.cubic(5, 3)
    g = rand_metric(lat, rng)
    s = rng.uniform(0.2, 1.0, lat.extents)
    gt = rescale_metric(g, s)
    np.testing.assert_allclose(weight(gt, 2) * s ** (5 / 2 - 2), weight(g, 2), rtol=1e-14)


def test_sigma_flat_is_one():
    lat = LatticeSpec.cubic(5, 3)
    sig = sigma_field(Connection.flat(lat, 2), ConformalMetric.uniform(lat))
    assert np.all(sig.sigma == 1.0)


def test_step2_exact_proportionality(rng):
    lat = LatticeSpec.cubic(5, 3)
    g = ConformalMetric.uniform(lat)
    D = random_connection(lat, 2, 3, 0.5)
    rep = step2_verify(D, g)
    assert rep.defect <= 1e-10 and rep.r_bi <= rep.bound * (1 + 1e-9)
    assert rep.equation_residual <= 1e-10


def test_step2_refuses_low_dimension():
    lat = LatticeSpec.cubic(4, 3)
    with pytest.raises(DomainError, match="conformal"):
        step2_verify(Connection.flat(lat, 2), ConformalMetric.uniform(lat))


def test_step1_weight(rng):
    lat = LatticeSpec.cubic(5, 3)
    g = ConformalMetric.uniform(lat)
    D = random_connection(lat, 2, 4, 0.5)
    rep = step1_weight(D, g, 3.0)
    q = pointwise_norm2(curvature(D), g)
    np.testing.assert_allclose(rep.f, conformal_weight(q, 3.0, 5))
    assert rep.defect <= 1e-10
    with pytest.raises(ValueError):
        step1_weight(D, g, 2.0)

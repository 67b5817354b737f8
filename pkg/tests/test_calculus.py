import numpy as np
import pytest

from biym.algebra import dim_so
from biym.calculus import (
    Connection,
    bianchi_residual,
    curvature,
    d,
    delta,
    div_direct,
    div_formula,
    interior,
    stress_energy,
    StressTensor,
    wedge_bracket,
)
from biym.errors import UnsupportedConfiguration
from biym.flow import random_connection
from biym.functional import born_infeld, yang_mills
from biym.lattice import ConformalMetric, LatticeSpec, PForm, inner_form, pointwise_norm2
from biym.refine import conservation_study, loglog_slope

from conftest import rand_form, rand_metric
from oracles import curvature_site


def test_d_of_constant_is_zero():
    lat = LatticeSpec.cubic(3, 4)
    s = PForm(0, lat, 3, np.broadcast_to(np.array([[0, 1, 2], [-1, 0, 3], [-2, -3, 0.0]]), lat.form_shape(0, 3)))
    assert np.all(d(Connection.flat(lat, 3), s).values == 0)


@pytest.mark.parametrize("p", [0, 1])
def test_abelian_d_squared_vanishes(rng, p):
    lat = LatticeSpec.cubic(4, 3, h=0.7)
    D = random_connection(lat, 2, 3, 0.8)
    phi = rand_form(p, lat, 2, rng)
    assert np.abs(d(D, d(D, phi)).values).max() <= 1e-12


def test_degree_errors(rng):
    lat = LatticeSpec.cubic(3, 3)
    D = Connection.flat(lat, 2)
    with pytest.raises(ValueError):
        d(D, rand_form(3, lat, 2, rng))
    with pytest.raises(ValueError):
        delta(D, ConformalMetric.uniform(lat), rand_form(0, lat, 2, rng))


def test_curvature_matches_site_oracle():
    lat = LatticeSpec((3), (3, 4, 5), 0.6)
    D = random_connection(lat, 3, 11, 0.7)
    R = curvature(D)
    for x in [(0, 0, 0), (2, 3, 4), (1, 0, 3)]:
        for mu, nu in [(0, 1), (0, 2), (1, 2)]:
            np.testing.assert_allclose(
                R.component((mu, nu))[x], curvature_site(D.alpha.values, x, mu, nu, lat.extents, lat.h), atol=1e-14
            )


def test_curvature_trivial_and_abelian(rng):
    lat = LatticeSpec.cubic(3, 3)
    assert np.all(curvature(Connection.flat(lat, 3)).values == 0)
    D = random_connection(lat, 2, 1, 1.0)
    np.testing.assert_array_equal(curvature(D).values, d(None, D.alpha).values)


@pytest.mark.parametrize("n,m", [(2, 3), (3, 3), (4, 2), (5, 3)])
def test_curvature_expansion(rng, n, m):
    lat = LatticeSpec.cubic(n, 3, h=0.9)
    D = random_connection(lat, m, n, 0.7)
    beta = rand_form(1, lat, m, rng, 0.6)
    lhs = curvature(D + beta).values
    rhs = (curvature(D) + d(D, beta) + wedge_bracket(beta, beta) * 0.5).values
    assert np.abs(lhs - rhs).max() <= 1e-13


def test_wedge_bracket_properties(rng):
    lat = LatticeSpec.cubic(3, 3)
    phi, psi = rand_form(1, lat, 3, rng), rand_form(1, lat, 3, rng)
    np.testing.assert_array_equal(wedge_bracket(phi, psi).values, wedge_bracket(psi, phi).values)
    self_ = wedge_bracket(phi, phi)
    a = phi.values
    np.testing.assert_allclose(self_.component((0, 2)), 2 * (a[0] @ a[2] - a[2] @ a[0]), atol=1e-14)
    ab = rand_form(1, lat, 2, rng)
    assert np.all(wedge_bracket(ab, rand_form(1, lat, 2, rng)).values == 0)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
@pytest.mark.parametrize("m", [2, 3])
@pytest.mark.parametrize("uniform", [True, False])
def test_adjointness(rng, n, m, uniform):
    lat = LatticeSpec.cubic(n, 3, h=0.8)
    g = ConformalMetric.uniform(lat, 1.3) if uniform else rand_metric(lat, rng)
    D = random_connection(lat, m, 7 * n + m, 0.6)
    for p in (0, 1, 2):
        phi, psi = rand_form(p, lat, m, rng), rand_form(p + 1, lat, m, rng)
        a = inner_form(d(D, phi), psi, g)
        b = inner_form(phi, delta(D, g, psi), g)
        scale = np.sqrt(inner_form(d(D, phi), d(D, phi), g) * inner_form(psi, psi, g)) + 1e-300
        assert abs(a - b) <= 1e-10 * scale


def test_delta_zero_and_abelian_square(rng):
    lat = LatticeSpec.cubic(2, 5)
    g = ConformalMetric.uniform(lat)
    D = random_connection(lat, 2, 0, 1.0)
    assert np.all(delta(D, g, PForm.zeros(2, lat, 2)).values == 0)
    psi = rand_form(2, lat, 2, rng)
    assert np.abs(delta(D, g, delta(D, g, psi)).values).max() <= 1e-12


def test_interior(rng):
    lat = LatticeSpec.cubic(4, 3)
    g = rand_metric(lat, rng)
    psi = rand_form(2, lat, 3, rng)
    assert np.all(interior(PForm.zeros(2, lat, 3), 1).values == 0)
    np.testing.assert_array_equal(interior(psi, 0).values[1], -interior(psi, 1).values[0])
    total = sum(0.5 * np.einsum("c...ab,c...ab->...", interior(psi, k, g).values, interior(psi, k, g).values)
                for k in range(4))
    np.testing.assert_allclose(total, 2 * pointwise_norm2(psi, g), rtol=1e-13)


@pytest.mark.parametrize("F", [born_infeld(), yang_mills()], ids=lambda F: F.name)
def test_stress_trace_and_symmetry(F):
    lat = LatticeSpec.cubic(3, 4)
    g = ConformalMetric.uniform(lat)
    D = random_connection(lat, 3, 4, 0.6)
    S = stress_energy(D, g, F)
    assert np.all(S.S == np.swapaxes(S.S, -1, -2))
    q = pointwise_norm2(curvature(D), g)
    np.testing.assert_allclose(S.trace, 3 * F.f(q / 2) - 2 * q * F.df(q / 2), atol=1e-12, rtol=0)


def test_stress_flat_is_zero():
    lat = LatticeSpec.cubic(3, 3)
    g = ConformalMetric.uniform(lat)
    assert np.all(stress_energy(Connection.flat(lat, 2), g, born_infeld()).S == 0)


def test_div_direct_constant_and_zero():
    lat = LatticeSpec.cubic(3, 3)
    g = ConformalMetric.uniform(lat)
    zero, nz = div_direct(StressTensor(np.zeros(lat.extents + (3, 3))), g)
    assert nz == 0 and np.all(zero == 0)
    const = np.broadcast_to(np.array([[1, 2, 3], [2, 5, 6], [3, 6, 9.0]]), lat.extents + (3, 3))
    v, nv = div_direct(StressTensor(const), g)
    assert np.all(v == 0)


def test_div_requires_uniform(rng):
    lat = LatticeSpec.cubic(2, 3)
    g = rand_metric(lat, rng)
    D = Connection.flat(lat, 2)
    with pytest.raises(UnsupportedConfiguration):
        div_direct(stress_energy(D, g, born_infeld()), g)
    with pytest.raises(UnsupportedConfiguration):
        div_formula(D, g, born_infeld())


def test_div_formula_flat_and_pure_gauge(rng):
    lat = LatticeSpec.cubic(3, 4)
    g = ConformalMetric.uniform(lat)
    assert div_formula(Connection.flat(lat, 3), g, born_infeld()).norms["total"] == 0
    s = rand_form(0, lat, 2, rng)
    D = Connection(d(None, s))
    res = div_formula(D, g, born_infeld())
    assert res.norms["total"] <= 1e-12


def test_div_formula_terms_at_critical_point():
    """Terms evaluated separately: the coderivative part is bounded by the residual."""
    from biym.flow import FlowConfig, minimize
    from biym.functional import el_residual
    from biym.lattice import norm

    lat = LatticeSpec.cubic(2, 5)
    g = ConformalMetric.uniform(lat)
    res = minimize(random_connection(lat, 3, 2, 0.3), g, born_infeld(), FlowConfig(residual_tol=1e-9, method="newton_cg"))
    assert res.converged
    D = res.connection
    out = div_formula(D, g, born_infeld())
    R = curvature(D)
    rmax = np.sqrt(pointwise_norm2(R, g).max())
    bound = norm(el_residual(D, g, born_infeld()), g) * rmax * np.sqrt(lat.n)
    assert out.norms["coderivative"] <= bound + 1e-15
    assert out.norms["bianchi"] == 0  # n = 2


def test_bianchi_converges_first_order():
    rows = conservation_study(born_infeld(), n=3, m=3, sizes=(6, 12))
    assert rows[1][3] < rows[0][3]
    assert loglog_slope([r[1] for r in rows], [r[3] for r in rows]) > 0.8

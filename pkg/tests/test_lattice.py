import numpy as np
import pytest

from biym.lattice import (
    ConformalMetric,
    LatticeSpec,
    PForm,
    components,
    inner_form,
    pointwise_norm2,
    shift,
    weight,
)

from conftest import rand_form, rand_metric


def test_cell_counts():
    lat = LatticeSpec((4), (3, 4, 5, 3), 0.5)
    N = 3 * 4 * 5 * 3
    assert [lat.cells(p) for p in range(4)] == [N, N * 4, N * 6, N * 4]


def test_spec_validation():
    with pytest.raises(ValueError):
        LatticeSpec(2, (2, 5))
    with pytest.raises(ValueError):
        LatticeSpec(7, (3,) * 7)
    with pytest.raises(ValueError):
        ConformalMetric(LatticeSpec.cubic(2, 3), -np.ones((3, 3)))


def test_weight_examples():
    lat = LatticeSpec.cubic(4, 3, h=1.0)
    g = ConformalMetric.uniform(lat)
    for p in range(4):
        assert np.all(weight(g, p) == 1.0)
    lat4 = LatticeSpec.cubic(4, 3, h=0.37)
    g4 = ConformalMetric(lat4, np.random.default_rng(0).uniform(0.2, 5, lat4.extents))
    np.testing.assert_allclose(weight(g4, 2), 1.0, rtol=1e-15)
    lat6 = LatticeSpec.cubic(6, 3)
    assert weight(ConformalMetric.uniform(lat6, 4.0), 2, (0,) * 6) == 4.0


def test_inner_form_basic(rng):
    lat = LatticeSpec.cubic(3, 3)
    g = rand_metric(lat, rng)
    phi = rand_form(1, lat, 3, rng)
    assert inner_form(phi, PForm.zeros(1, lat, 3), g) == 0
    assert inner_form(phi, phi, g) > 0
    assert inner_form(PForm.zeros(1, lat, 3), PForm.zeros(1, lat, 3), g) == 0
    with pytest.raises(ValueError):
        inner_form(phi, rand_form(2, lat, 3, rng), g)


@pytest.mark.parametrize("p", [0, 1, 2, 3])
def test_conformal_scaling_of_pairing(rng, p):
    lat = LatticeSpec.cubic(4, 3, h=0.8)
    g = rand_metric(lat, rng)
    sigma = rng.uniform(0.3, 1.0, lat.extents)
    phi, psi = rand_form(p, lat, 2, rng), rand_form(p, lat, 2, rng)
    direct = inner_form(phi, psi, ConformalMetric(lat, g.c / sigma))
    local = 0.5 * np.einsum("c...ab,c...ab->...", phi.values, psi.values)
    expected = np.sum(weight(g, p) * sigma ** (p - lat.n / 2) * local)
    assert direct == pytest.approx(expected, rel=1e-13)


def test_pointwise_norm2():
    lat = LatticeSpec.cubic(2, 3)
    g = ConformalMetric.uniform(lat)
    R = PForm.zeros(2, lat, 2)
    assert np.all(pointwise_norm2(R, g) == 0)
    R.values[0, 1, 2] = [[0, 3], [-3, 0]]
    assert pointwise_norm2(R, g, (1, 2)) == 9.0


def test_pointwise_norm2_conformal(rng):
    lat = LatticeSpec.cubic(3, 3, h=0.6)
    g = rand_metric(lat, rng)
    sigma = rng.uniform(0.2, 1, lat.extents)
    R = rand_form(2, lat, 3, rng)
    np.testing.assert_allclose(
        pointwise_norm2(R, ConformalMetric(lat, g.c / sigma)), sigma**2 * pointwise_norm2(R, g), rtol=1e-14
    )


def test_periodicity(rng):
    lat = LatticeSpec((3), (3, 4, 5))
    phi = rand_form(1, lat, 2, rng)
    for mu, L in enumerate(lat.extents):
        np.testing.assert_array_equal(shift(phi.values, mu, L), phi.values)
        np.testing.assert_array_equal(shift(shift(phi.values, mu, 1), mu, -1), phi.values)


def test_two_accumulation_orders_agree(rng):
    lat = LatticeSpec.cubic(3, 4, h=0.9)
    g = rand_metric(lat, rng)
    phi = rand_form(2, lat, 3, rng)
    total = inner_form(phi, phi, g)
    by_site = 0.0
    w = weight(g, 2)
    for x in np.ndindex(*lat.extents):
        for k in range(len(components(3, 2))):
            a = phi.values[(k,) + x]
            by_site += w[x] * 0.5 * np.trace(a.T @ a)
    assert total == pytest.approx(by_site, rel=1e-12)


def test_component_antisymmetry(rng):
    lat = LatticeSpec.cubic(3, 3)
    phi = rand_form(2, lat, 2, rng)
    np.testing.assert_array_equal(phi.component((2, 0)), -phi.component((0, 2)))
    assert np.all(phi.component((1, 1)) == 0)


def test_vector_roundtrip(rng):
    lat = LatticeSpec.cubic(2, 3)
    phi = rand_form(1, lat, 4, rng)
    back = PForm.from_vector(1, lat, 4, phi.to_vector())
    np.testing.assert_array_equal(back.values, phi.values)

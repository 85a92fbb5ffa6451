import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entropic_dynamics.errors import ArgumentError, DomainError
from entropic_dynamics.grid import (
    Boundary,
    DensityField,
    Grid,
    ScalarField,
    gradient,
    integrate,
    laplacian,
    normalize,
)


def periodic_2pi(n=256):
    return Grid(n, 0.0, 2 * math.pi, Boundary.PERIODIC)


class TestGrid:
    def test_spacing_rules(self):
        assert Grid(10, 0.0, 1.0, Boundary.PERIODIC).spacing == pytest.approx(0.1)
        assert Grid(11, 0.0, 1.0).spacing == pytest.approx(0.1)

    @pytest.mark.parametrize("n, lo, hi", [(7, 0, 1), (16, 1, 1), (16, 2, 1), (8.5, 0, 1)])
    def test_invalid(self, n, lo, hi):
        with pytest.raises(ArgumentError):
            Grid(n, lo, hi)

    def test_periodic_companion_shares_nodes(self):
        g = Grid(513, -20, 20)
        p = g.periodic_companion()
        assert p.periodic and p.n_points == 512
        np.testing.assert_allclose(p.x, g.x[:-1], atol=1e-12)
        assert p.reflecting_companion() == g

    def test_minimum_image(self):
        g = Grid(10, 0.0, 1.0, Boundary.PERIODIC)
        assert g.displacement(0.95, 0.05) == pytest.approx(-0.1)


class TestFields:
    def test_scalar_field_rejects_nonfinite(self):
        with pytest.raises(DomainError):
            ScalarField(Grid(8, 0, 1), [0, 1, np.nan, 0, 0, 0, 0, 0])

    def test_shape_mismatch(self):
        with pytest.raises(ArgumentError):
            ScalarField(Grid(8, 0, 1), np.zeros(9))

    def test_density_invariants(self):
        g = Grid(11, 0.0, 1.0)
        DensityField(g, np.ones(11))
        with pytest.raises(DomainError):
            DensityField(g, 2 * np.ones(11))
        with pytest.raises(DomainError):
            DensityField(g, np.r_[-1.0, np.ones(10) * 1.1])

    def test_values_read_only(self):
        f = ScalarField(Grid(8, 0, 1), np.zeros(8))
        with pytest.raises(ValueError):
            f.values[0] = 1.0

    def test_grid_mismatch_in_arithmetic(self):
        with pytest.raises(ArgumentError):
            ScalarField(Grid(8, 0, 1), np.zeros(8)) + ScalarField(Grid(8, 0, 2), np.zeros(8))


class TestGradient:
    def test_constant(self):
        g = Grid(32, -1, 1)
        assert np.all(gradient(ScalarField(g, np.full(32, 4.0))).values == 0)

    def test_linear_reflecting(self):
        g = Grid(32, -1, 1)
        np.testing.assert_allclose(gradient(ScalarField(g, 3 * g.x)).values, 3.0, rtol=1e-12)

    def test_sine_periodic(self):
        g = periodic_2pi()
        err = np.abs(gradient(ScalarField(g, np.sin(g.x))).values - np.cos(g.x)).max()
        assert err < 1e-3

    def test_second_order_convergence(self):
        errs = []
        for n in (64, 128):
            g = periodic_2pi(n)
            errs.append(np.abs(gradient(ScalarField(g, np.sin(g.x))).values - np.cos(g.x)).max())
        assert math.log2(errs[0] / errs[1]) >= 1.9

    def test_second_order_at_closed_ends(self):
        errs = []
        for n in (65, 129):
            g = Grid(n, 0.0, 2.0)
            errs.append(np.abs(gradient(ScalarField(g, np.exp(g.x))).values - np.exp(g.x)).max())
        assert math.log2(errs[0] / errs[1]) >= 1.9

    def test_axis_out_of_range(self):
        g = Grid(8, 0, 1)
        with pytest.raises(ArgumentError):
            gradient(ScalarField(g, np.zeros(8)), axis=1)


class TestLaplacian:
    def test_constant(self):
        g = Grid(16, 0, 1)
        assert np.all(laplacian(ScalarField(g, np.ones(16))).values == 0)

    def test_quadratic_exact_everywhere(self):
        g = Grid(16, -2, 3)
        np.testing.assert_allclose(laplacian(ScalarField(g, g.x ** 2)).values, 2.0, rtol=1e-9)

    def test_sine_periodic(self):
        g = periodic_2pi()
        err = np.abs(laplacian(ScalarField(g, np.sin(g.x))).values + np.sin(g.x)).max()
        assert err < 1e-3

    def test_order(self):
        errs = []
        for n in (64, 128):
            g = periodic_2pi(n)
            errs.append(np.abs(laplacian(ScalarField(g, np.sin(g.x))).values + np.sin(g.x)).max())
        assert math.log2(errs[0] / errs[1]) >= 1.9

    def test_2d_sums_axes(self):
        g = Grid(16, -1, 1, dim=2)
        x, y = g.mesh()
        out = laplacian(ScalarField(g, x ** 2 + 3 * y ** 2), inverse_masses=[1.0, 0.5])
        np.testing.assert_allclose(out.values, 2.0 + 0.5 * 6.0, rtol=1e-9)


class TestQuadrature:
    def test_unit_interval(self):
        g = Grid(11, 0.0, 1.0)
        assert integrate(ScalarField(g, np.ones(11))) == pytest.approx(1.0, abs=1e-15)
        assert integrate(ScalarField(g, np.zeros(11))) == 0.0

    def test_gaussian(self):
        g = Grid(512, -10.0, 10.0)
        f = np.exp(-0.5 * g.x ** 2) / math.sqrt(2 * math.pi)
        assert abs(integrate(ScalarField(g, f)) - 1.0) < 1e-8

    def test_periodic_derivative_integrates_to_zero(self):
        g = periodic_2pi(128)
        f = ScalarField(g, np.exp(np.sin(g.x)))
        assert abs(integrate(gradient(f))) < 1e-14

    def test_normalize(self):
        g = Grid(11, 0.0, 1.0)
        rho = normalize(ScalarField(g, np.full(11, 2.0)))
        np.testing.assert_allclose(rho.values, 1.0)
        again = normalize(rho)
        assert np.max(np.abs(again.values - rho.values)) <= 1e-12

    def test_normalize_gaussian(self):
        g = Grid(512, -10.0, 10.0)
        rho = normalize(ScalarField(g, np.exp(-g.x ** 2)))
        np.testing.assert_allclose(rho.values, np.exp(-g.x ** 2) / math.sqrt(math.pi), atol=1e-12)

    @pytest.mark.parametrize("values", [np.zeros(11), np.r_[-1.0, np.ones(10)]])
    def test_normalize_errors(self, values):
        with pytest.raises(DomainError):
            normalize(ScalarField(Grid(11, 0.0, 1.0), values))


coeffs = st.floats(-5, 5, allow_nan=False)


@settings(max_examples=30, deadline=None)
@given(a=coeffs, b=coeffs, seed=st.integers(0, 2 ** 31 - 1),
       periodic=st.booleans())
def test_operators_linear(a, b, seed, periodic):
    rng = np.random.default_rng(seed)
    g = Grid(40, -1, 1, Boundary.PERIODIC if periodic else Boundary.REFLECTING)
    f, h = rng.normal(size=40), rng.normal(size=40)
    F, H = ScalarField(g, f), ScalarField(g, h)
    combo = ScalarField(g, a * f + b * h)
    for op in (gradient, laplacian):
        lhs = op(combo).values
        rhs = a * op(F).values + b * op(H).values
        scale = 1 + np.abs(a * op(F).values).max() + np.abs(b * op(H).values).max()
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1), scale=st.floats(1e-3, 1e3))
def test_normalize_idempotent(seed, scale):
    g = Grid(33, 0.0, 2.0)
    v = np.random.default_rng(seed).uniform(0.0, 1.0, 33) * scale + 1e-6
    once = normalize(ScalarField(g, v))
    twice = normalize(once)
    assert np.max(np.abs(once.values - twice.values)) <= 1e-12 * max(1.0, once.values.max())

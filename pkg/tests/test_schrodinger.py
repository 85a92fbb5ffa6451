import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entropic_dynamics import schrodinger as sch
from entropic_dynamics.errors import ArgumentError, DomainError, NumericalError, PhaseUnwrapError
from entropic_dynamics.fields import Potential
from entropic_dynamics.grid import Boundary, Grid, ScalarField, normalize
from entropic_dynamics.statmodel import ModelParams

HBAR1 = ModelParams(xi=0.125)


def periodic(n=512, lo=-20.0, hi=20.0):
    return Grid(n, lo, hi, Boundary.PERIODIC)


def packet(grid, mu=0.0, sigma=1.0, p=0.0, curvature=0.0):
    x = grid.x
    amp = np.exp(-(x - mu) ** 2 / (4 * sigma ** 2) + 1j * (p * x + curvature * x ** 2))
    return sch.WaveField.normalized(grid, amp)


def variance(psi):
    x, w = psi.grid.x, psi.grid.weights() * psi.density
    m = float(np.sum(w * x))
    return float(np.sum(w * (x - m) ** 2))


class TestRegraduate:
    def test_values(self):
        assert sch.regraduate(0.125) == 1.0
        assert sch.regraduate(0.5) == 2.0

    @pytest.mark.parametrize("hbar", [0.1, 1.0, 2.5, 7.0])
    def test_round_trip(self, hbar):
        assert abs(sch.regraduate(sch.xi_from_hbar(hbar)) - hbar) <= 1e-15 * hbar

    @pytest.mark.parametrize("xi", [0.0, -1.0])
    def test_invalid(self, xi):
        with pytest.raises(ArgumentError):
            sch.regraduate(xi)


class TestWaveField:
    def test_norm_enforced(self):
        g = periodic(64)
        with pytest.raises(DomainError):
            sch.WaveField(g, 2 * packet(g).values)

    def test_conjugate(self):
        psi = packet(periodic(64), p=1.0)
        np.testing.assert_array_equal(psi.conjugate().values, np.conj(psi.values))


class TestFromFields:
    def test_zero_phase_is_sqrt_rho(self):
        g = Grid(201, -8, 8)
        rho = normalize(ScalarField(g, np.exp(-g.x ** 2)))
        psi = sch.from_fields(rho, None, 1.0)
        np.testing.assert_allclose(psi.values, np.sqrt(rho.values))
        assert abs(psi.norm() - 1) < 1e-10

    def test_plane_wave_one_winding(self):
        L, n = 10.0, 128
        g = Grid(n, 0.0, L, Boundary.PERIODIC)
        rho = normalize(ScalarField(g, np.ones(n)))
        psi = sch.from_fields(rho, ScalarField(g, 2 * math.pi * g.x / L), 1.0)
        winding = np.sum(np.angle(np.roll(psi.values, -1) / psi.values)) / (2 * math.pi)
        assert winding == pytest.approx(1.0, abs=1e-12)

    def test_invalid_k(self):
        g = Grid(11, 0, 1)
        with pytest.raises(ArgumentError):
            sch.from_fields(normalize(ScalarField(g, np.ones(11))), None, 0.0)

    @pytest.mark.parametrize("k", [0.5, 1.0, 3.0])
    def test_round_trip(self, k):
        g = Grid(401, -10, 10)
        rho = normalize(ScalarField(g, np.exp(-0.5 * (g.x - 1) ** 2)))
        phi = ScalarField(g, 0.3 * g.x ** 2 - 1.1 * g.x + 2.0)
        rho2, phi2 = sch.to_fields(sch.from_fields(rho, phi, k), k)
        mask = rho.values > 1e-6 * rho.values.max()
        np.testing.assert_allclose(rho2.values, rho.values, atol=1e-12)
        diff = (phi2.values - phi.values)[mask]
        assert np.ptp(diff) < 1e-10


class TestToFields:
    def test_real_positive(self):
        g = Grid(201, -8, 8)
        psi = sch.WaveField.normalized(g, np.exp(-g.x ** 2))
        _, phi = sch.to_fields(psi, 1.0)
        assert np.max(np.abs(phi.values)) < 1e-15

    def test_plane_wave_slope(self):
        g = Grid(257, 0.0, 20.0)
        p = 1.3
        _, phi = sch.to_fields(sch.WaveField.normalized(g, np.exp(1j * p * g.x)), 1.0)
        slope = np.polyfit(g.x, phi.values, 1)[0]
        assert slope == pytest.approx(p, abs=1e-8)

    def test_plane_wave_slope_periodic(self):
        # a winding phase on a ring has one 2 pi jump; every other increment is p h
        n, L = 256, 20.0
        g = Grid(n, 0, L, Boundary.PERIODIC)
        p = 2 * math.pi * 5 / L
        _, phi = sch.to_fields(sch.WaveField.normalized(g, np.exp(1j * p * g.x)), 1.0)
        slope = np.median(np.diff(phi.values)) / g.spacing
        assert slope == pytest.approx(p, abs=1e-8)

    def test_quadratic_phase_packet(self):
        g = Grid(801, -15, 15)
        psi = packet(g, 0.5, 1.2, p=0.7, curvature=0.4)
        _, phi = sch.to_fields(psi, 1.0)
        mask = sch.phase_mask(psi)
        expected = 0.7 * g.x + 0.4 * g.x ** 2
        assert np.ptp((phi.values - expected)[mask]) < 1e-8

    def test_node_on_path(self):
        g = Grid(201, -5, 5)
        values = np.exp(-g.x ** 2) * np.where(np.abs(g.x) < 0.3, 0.0, 1.0) * np.sign(g.x)
        values[g.x > 2] = 0
        values[(g.x > 1.0) & (g.x < 1.5)] = 0
        values[g.x >= 1.5] = np.exp(-g.x[g.x >= 1.5] ** 2 / 10)
        psi = sch.WaveField.normalized(g, values)
        with pytest.raises(PhaseUnwrapError):
            sch.to_fields(psi, 1.0, threshold=1e-6)


class TestNonlinearResidual:
    def test_zero_at_optimum(self):
        psi = packet(Grid(401, -10, 10), 0.3, 1.1, p=0.5)
        assert sch.nonlinear_coefficient(1.0, 0.125) == 0.0
        assert sch.nonlinear_residual(psi, 1.0, HBAR1) == 0.0

    def test_coefficient_value(self):
        assert sch.nonlinear_coefficient(1.0, 0.25) == pytest.approx(-0.5)

    def test_off_optimum_positive(self):
        psi = packet(Grid(401, -10, 10))
        assert sch.nonlinear_residual(psi, 1.1, HBAR1) > 0

    def test_linear_in_coefficient(self):
        psi = packet(Grid(401, -10, 10))
        k1, k2 = 1.2, 1.5
        r1, r2 = sch.nonlinear_residual(psi, k1, HBAR1), sch.nonlinear_residual(psi, k2, HBAR1)
        c1, c2 = sch.nonlinear_coefficient(k1, 0.125), sch.nonlinear_coefficient(k2, 0.125)
        assert r2 / r1 == pytest.approx(abs(c2 / c1), rel=1e-12)


class TestStepPeriodic:
    def test_plane_wave_eigenphase(self):
        g = periodic(64, 0.0, 2 * math.pi)
        j, dt = 3, 0.01
        psi = sch.WaveField.normalized(g, np.exp(1j * j * g.x))
        out = sch.step_schrodinger(psi, Potential.none(), HBAR1, dt)
        ratio = out.values / psi.values
        np.testing.assert_allclose(ratio, np.exp(-1j * j ** 2 * dt / 2), atol=1e-12)

    def test_ground_state_stationary(self):
        g = periodic(256, -12, 12)
        psi = sch.WaveField.normalized(g, np.exp(-g.x ** 2 / 2))
        out = sch.evolve_wave(psi, Potential.harmonic(), HBAR1, 1e-3, 1000, order=4)[-1]
        assert np.max(np.abs(out.density - psi.density)) < 1e-8

    def test_free_spreading(self):
        psi = packet(periodic())
        out = sch.evolve_wave(psi, Potential.none(), HBAR1, 2e-3, 1000)[-1]
        assert out.time == pytest.approx(2.0)
        assert variance(out) == pytest.approx(2.0, rel=1e-6)

    def test_unitarity_and_energy(self):
        g = periodic(256, -12, 12)
        V = Potential.harmonic()
        traj = sch.evolve_wave(packet(g, 2.0, 0.7), V, HBAR1, 1e-3, 1000, record_every=100, order=4)
        assert abs(traj[-1].norm() - 1) < 1e-10
        assert sch.wave_energy_drift(traj, V, HBAR1) < 1e-10

    def test_fourth_order_time_convergence(self):
        g = periodic(128, -10, 10)
        V = Potential.harmonic()
        psi = packet(g, 1.0, 0.8)
        out = {dt: sch.evolve_wave(psi, V, HBAR1, dt, int(round(1 / dt)), order=4)[-1].values
               for dt in (0.05, 0.025, 0.0125)}
        e1 = np.abs(out[0.05] - out[0.0125]).max()
        e2 = np.abs(out[0.025] - out[0.0125]).max()
        assert e1 / e2 > 12

    def test_linearity(self):
        g = periodic(256, -12, 12)
        V = Potential.harmonic()
        a, b = 0.6 + 0.2j, -0.3 + 0.7j
        p1, p2 = packet(g, -2, 0.8, p=1.0), packet(g, 2, 1.2, p=-0.5)
        mix = a * p1.values + b * p2.values
        scale = math.sqrt(float(np.sum(np.abs(mix) ** 2 * g.weights())))
        evolve = sch.Propagator(g, V, HBAR1, 0.01).step
        lhs = mix / scale
        r1, r2 = p1.values, p2.values
        for _ in range(100):
            lhs, r1, r2 = evolve(lhs), evolve(r1), evolve(r2)
        np.testing.assert_allclose(lhs, (a * r1 + b * r2) / scale, atol=1e-10)

    def test_time_reversal(self):
        g = periodic(256, -12, 12)
        V = Potential.harmonic()
        psi = packet(g, 1.5, 0.9, p=0.8)
        fwd = sch.evolve_wave(psi, V, HBAR1, 0.01, 300)[-1]
        back = sch.evolve_wave(fwd.conjugate(), V, HBAR1, 0.01, 300)[-1].conjugate()
        np.testing.assert_allclose(back.values, psi.values, atol=1e-8)


class TestStepReflecting:
    def test_unitarity(self):
        g = Grid(401, -12, 12)
        psi = packet(g, 1.0, 0.8, p=1.0)
        out = sch.evolve_wave(psi, Potential.harmonic(), HBAR1, 1e-3, 1000)[-1]
        assert abs(out.norm() - 1) < 1e-8

    def test_ground_state_nearly_stationary(self):
        g = Grid(801, -12, 12)
        psi = sch.WaveField.normalized(g, np.exp(-g.x ** 2 / 2))
        out = sch.evolve_wave(psi, Potential.harmonic(), HBAR1, 1e-2, 100)[-1]
        assert np.max(np.abs(out.density - psi.density)) < 1e-3

    def test_time_reversal(self):
        g = Grid(401, -12, 12)
        V = Potential.harmonic()
        psi = packet(g, 1.5, 0.9, p=0.8)
        fwd = sch.evolve_wave(psi, V, HBAR1, 0.01, 200)[-1]
        back = sch.evolve_wave(fwd.conjugate(), V, HBAR1, 0.01, 200)[-1].conjugate()
        np.testing.assert_allclose(back.values, psi.values, atol=1e-8)


class TestErrors:
    def test_requires_positive_hbar(self):
        g = periodic(64)
        with pytest.raises(ArgumentError):
            sch.step_schrodinger(packet(g), Potential.none(), ModelParams(xi=0.0), 0.01)

    def test_nonfinite(self):
        g = periodic(64)
        prop = sch.Propagator(g, Potential.none(), HBAR1, 0.01)
        prop.step = lambda v: v * np.nan
        with pytest.raises(NumericalError) as info:
            prop.advance(packet(g), step_offset=5)
        assert info.value.engine == "wave" and info.value.step == 5


@settings(max_examples=15, deadline=None)
@given(mu=st.floats(-3, 3), sigma=st.floats(0.6, 2), p=st.floats(-2, 2), k=st.floats(0.3, 3))
def test_round_trip_property(mu, sigma, p, k):
    g = Grid(401, -15, 15)
    psi = packet(g, mu, sigma, p=p)
    rho, phi = sch.to_fields(psi, k)
    again = sch.from_fields(rho, phi, k)
    mask = sch.phase_mask(psi)
    np.testing.assert_allclose(again.values[mask], psi.values[mask], atol=1e-10)

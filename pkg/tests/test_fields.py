import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entropic_dynamics import fields as fd
from entropic_dynamics.errors import ArgumentError, NumericalError, PrecisionWarning
from entropic_dynamics.grid import Boundary, Grid, ScalarField, integrate, normalize
from entropic_dynamics.statmodel import ModelParams

HBAR1 = ModelParams(xi=0.125)

# far Gaussian tails sit below the density floor by design
quiet_floor = pytest.mark.filterwarnings("ignore::entropic_dynamics.errors.PrecisionWarning")


def gaussian(grid, mu=0.0, sigma=1.0):
    return normalize(ScalarField(grid, np.exp(-0.5 * ((grid.x - mu) / sigma) ** 2)))


def ground_state(grid):
    return fd.FieldState.from_log_density(grid, -grid.x ** 2)


def variance(rho):
    x, w = rho.grid.x, rho.grid.weights() * rho.values
    m = float(np.sum(w * x))
    return float(np.sum(w * (x - m) ** 2))


class TestPotential:
    def test_kinds(self):
        x = np.array([[0.0], [1.0], [2.0]])
        np.testing.assert_allclose(fd.Potential.harmonic(2.0, 3.0).value(x), [0, 9, 36])
        np.testing.assert_allclose(fd.Potential.double_well(1.0, 2.0).value(x), [2, 0, 18])
        np.testing.assert_allclose(fd.Potential.barrier(2.0, 1.0).value(x[:1]), [2.0])
        np.testing.assert_allclose(fd.Potential.polynomial([1.0, 0.0, 1.0]).value(x), [1, 2, 5])
        assert np.all(fd.Potential.none().value(x) == 0)

    def test_gradient_matches_difference(self):
        V = fd.Potential.double_well(1.5, 0.3)
        x = np.linspace(-2, 2, 7)[:, None]
        h = 1e-6
        np.testing.assert_allclose(V.gradient(x)[:, 0], (V.value(x + h) - V.value(x - h)) / (2 * h),
                                   rtol=1e-6, atol=1e-6)


class TestCurrentVelocity:
    def test_constant_phase(self):
        g = Grid(64, -5, 5)
        s = fd.FieldState.from_fields(gaussian(g), np.full(64, 3.0))
        assert np.all(fd.current_velocity(s, HBAR1).current[0].values == 0)

    def test_linear_phase(self):
        g = Grid(64, -5, 5)
        s = fd.FieldState.from_fields(gaussian(g), 1.5 * g.x)
        v = fd.current_velocity(s, ModelParams(masses=(2.0,))).current[0].values
        np.testing.assert_allclose(v, 0.75, rtol=1e-12)

    def test_pure_osmotic_flow(self):
        g = Grid(401, -5, 5)
        rho = gaussian(g, sigma=1.3)
        p = ModelParams()
        S = ScalarField(g, np.full(401, 0.7))
        phi = fd.phase_from_entropy(S, rho, p.eta)
        vel = fd.current_velocity(fd.FieldState.from_fields(rho, phi), p, S=S)
        expected = 0.5 * g.x / 1.3 ** 2
        np.testing.assert_allclose(vel.current[0].values, expected, atol=1e-10)
        np.testing.assert_allclose(vel.osmotic[0].values, expected, atol=1e-10)
        assert vel.residual < 1e-8

    def test_decomposition_identity(self):
        g = Grid(201, -4, 4)
        rho = gaussian(g, 0.3, 0.8)
        p = ModelParams(masses=(1.7,), eta=0.6)
        S = ScalarField(g, np.sin(g.x) + 0.2 * g.x ** 2)
        vel = fd.current_velocity(fd.FieldState.from_fields(rho, fd.phase_from_entropy(S, rho, p.eta)), p, S=S)
        assert vel.residual < 1e-8


@quiet_floor
class TestOsmoticVelocity:
    def test_uniform(self):
        g = Grid(64, 0, 1, Boundary.PERIODIC)
        u = fd.osmotic_velocity(normalize(ScalarField(g, np.ones(64))), ModelParams())
        assert np.all(u[0].values == 0)

    @pytest.mark.parametrize("sigma, expected", [(1.0, 0.5), (2.0, 0.125)])
    def test_gaussian(self, sigma, expected):
        g = Grid(401, -10, 10)
        u = fd.osmotic_velocity(gaussian(g, sigma=sigma), ModelParams())[0]
        i = int(np.argmin(np.abs(g.x - 1.0)))
        assert u.values[i] == pytest.approx(expected, rel=1e-9)

    def test_fick_law_second_order(self):
        res = [fd.fick_residual(gaussian(Grid(n, -8, 8)), ModelParams()) for n in (201, 401)]
        assert res[1] < res[0] / 3.5

    def test_floor_warning(self):
        g = Grid(201, -40, 40)
        with pytest.warns(PrecisionWarning):
            fd.osmotic_velocity(gaussian(g, sigma=0.5), ModelParams())


@quiet_floor
class TestFisher:
    def test_uniform(self):
        g = Grid(64, 0, 1, Boundary.PERIODIC)
        assert fd.fisher_functional(normalize(ScalarField(g, np.ones(64)))).trace == 0.0

    @pytest.mark.parametrize("sigma", [1.0, 2.0])
    def test_gaussian(self, sigma):
        g = Grid(2001, -12 * sigma, 12 * sigma)
        assert fd.fisher_functional(gaussian(g, sigma=sigma)).trace == pytest.approx(1 / sigma ** 2, abs=1e-6)

    def test_product_of_gaussians(self):
        g = Grid(201, -12, 12, dim=2)
        x, y = g.mesh()
        rho = normalize(ScalarField(g, np.exp(-0.5 * x ** 2 - 0.125 * y ** 2)))
        info = fd.fisher_functional(rho)
        np.testing.assert_allclose(np.diag(info.matrix), [1.0, 0.25], rtol=1e-6)
        assert abs(info.matrix[0, 1]) < 1e-8

    def test_mass_weighted_trace(self):
        g = Grid(2001, -12, 12)
        info = fd.fisher_functional(gaussian(g), ModelParams(masses=(2.0,)))
        assert info.trace == pytest.approx(0.5, abs=1e-6)


@quiet_floor
class TestQuantumPotential:
    def test_uniform(self):
        g = Grid(64, 0, 1, Boundary.PERIODIC)
        assert np.all(fd.quantum_potential(normalize(ScalarField(g, np.ones(64))), HBAR1).values == 0)

    def test_gaussian_center(self):
        g = Grid(401, -10, 10)
        q = fd.quantum_potential(gaussian(g), HBAR1)
        assert q.values[200] == pytest.approx(0.25, abs=1e-12)

    def test_ground_state_total_is_flat(self):
        g = Grid(401, -5, 5)
        rho = ground_state(g).rho
        total = fd.quantum_potential(rho, HBAR1).values + fd.Potential.harmonic().on_grid(g)
        interior = np.abs(g.x) < 4
        np.testing.assert_allclose(total[interior], 0.5, atol=1e-4)

    def test_zero_xi(self):
        g = Grid(64, -5, 5)
        assert np.all(fd.quantum_potential(gaussian(g), ModelParams(xi=0.0)).values == 0)


class TestHamiltonian:
    def test_uniform_is_zero(self):
        g = Grid(64, 0, 1, Boundary.PERIODIC)
        s = fd.FieldState.from_fields(normalize(ScalarField(g, np.ones(64))), np.full(64, 2.0))
        assert fd.ensemble_hamiltonian(s, HBAR1, fd.Potential.none()) == 0.0

    def test_ground_state(self):
        g = Grid(1001, -10, 10)
        assert fd.ensemble_hamiltonian(ground_state(g), HBAR1, fd.Potential.harmonic()) == pytest.approx(0.5, abs=1e-4)

    def test_linear_phase_adds_kinetic(self):
        g = Grid(401, -10, 10)
        p = ModelParams(masses=(2.0,), xi=0.125)
        V = fd.Potential.harmonic(2.0)
        s = fd.gaussian_state(g, 0.3, 0.9)
        moved = fd.gaussian_state(g, 0.3, 0.9, phase_slope=1.2)
        diff = fd.ensemble_hamiltonian(moved, p, V) - fd.ensemble_hamiltonian(s, p, V)
        assert diff == pytest.approx(1.2 ** 2 / 4, abs=1e-12)

    def test_nonnegative(self):
        g = Grid(201, -6, 6)
        s = fd.FieldState.from_fields(gaussian(g, 1.0, 0.7), np.sin(g.x))
        assert fd.ensemble_hamiltonian(s, HBAR1, fd.Potential.harmonic()) >= 0


class TestStepCoupled:
    def test_ground_state_single_step(self):
        g = Grid(512, -10, 10)
        s0 = ground_state(g)
        dt = 2e-4
        s1 = fd.step_coupled(s0, HBAR1, fd.Potential.harmonic(), dt)
        resolved = s0.rho.values > 1e-8 * s0.rho.values.max()
        assert np.max(np.abs(s1.rho.values - s0.rho.values)) < 1e-8
        np.testing.assert_allclose(s1.phi_values[resolved], -0.5 * dt, atol=1e-10)
        assert s1.time == pytest.approx(dt)

    def test_ground_state_energy_drift(self):
        g = Grid(256, -10, 10)
        traj = fd.evolve_fields(ground_state(g), HBAR1, fd.Potential.harmonic(), 1e-3, 200, record_every=50)
        assert fd.energy_drift(traj, HBAR1, fd.Potential.harmonic()) < 1e-8

    def test_free_packet_spreading(self):
        g = Grid(512, -20, 20)
        traj = fd.evolve_fields(fd.gaussian_state(g), HBAR1, fd.Potential.none(), 1e-3, 2000, record_every=500)
        assert traj[-1].time == pytest.approx(2.0)
        assert variance(traj[-1].rho) == pytest.approx(2.0, rel=1e-3)
        assert fd.energy_drift(traj, HBAR1, fd.Potential.none()) < 1e-4
        assert max(s.mass_error for s in traj) < 1e-6

    def test_step_halving_is_fourth_order(self):
        g = Grid(64, -10, 10)
        p = ModelParams(xi=0.125)
        V = fd.Potential.harmonic()
        s0 = fd.gaussian_state(g, 1.0, 1.0)
        runs = {}
        for dt, n in ((0.02, 50), (0.01, 100), (0.005, 200)):
            runs[dt] = fd.evolve_fields(s0, p, V, dt, n)[-1].rho.values
        e1 = np.abs(runs[0.02] - runs[0.005]).max()
        e2 = np.abs(runs[0.01] - runs[0.005]).max()
        assert e1 / e2 >= 8

    def test_gauge_invariance(self):
        g = Grid(128, -10, 10)
        V = fd.Potential.harmonic()
        s = fd.gaussian_state(g, 1.0, 0.8, phase_slope=0.4)
        a = fd.evolve_fields(s, HBAR1, V, 0.004, 20)
        b = fd.evolve_fields(s.shifted_phase(7.0), HBAR1, V, 0.004, 20)
        assert np.max(np.abs(a[-1].rho.values - b[-1].rho.values)) < 1e-12
        assert abs(fd.energy_drift(a, HBAR1, V) - fd.energy_drift(b, HBAR1, V)) < 1e-12

    def test_stability_bound_enforced(self):
        g = Grid(64, -10, 10)
        bound = fd.stability_bound(g, HBAR1)
        with pytest.raises(ArgumentError):
            fd.step_coupled(fd.gaussian_state(g), HBAR1, fd.Potential.none(), 1.01 * bound)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_nonfinite_reports_step(self):
        g = Grid(64, -10, 10)
        s = fd.FieldState(g, np.full(64, np.log(1 / 20)), np.where(np.arange(64) == 30, 1e300, 0.0))
        with pytest.raises(NumericalError) as info:
            fd.step_coupled(s, HBAR1, fd.Potential.none(), 1e-3, step_index=17)
        assert info.value.step == 17 and info.value.engine == "fields"


class TestClassicalLimit:
    def test_mean_follows_cosine(self):
        g = Grid(2001, -3, 3)
        p = ModelParams(xi=0.0)
        V = fd.Potential.harmonic()
        c = fd.Characteristics.from_state(fd.gaussian_state(g, 1.0, 0.05))
        dt = 0.01
        worst = 0.0
        for k in range(int(round(math.pi / dt))):
            c = fd.evolve_characteristics(c, p, V, dt, 1)
            worst = max(worst, abs(c.mean_position() - math.cos(c.time)))
        assert worst < 1e-3

    def test_density_deposit_normalized(self):
        g = Grid(201, -3, 3)
        c = fd.Characteristics.from_state(fd.gaussian_state(g, 0.5, 0.3), refine=4)
        assert integrate(c.density_on(g)) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(mu=st.floats(-2, 2), sigma=st.floats(0.5, 2), slope=st.floats(-2, 2))
def test_fisher_trace_nonnegative_and_hamiltonian_positive(mu, sigma, slope):
    g = Grid(201, -12, 12)
    s = fd.gaussian_state(g, mu, sigma, phase_slope=slope)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PrecisionWarning)
        assert fd.fisher_functional(s.rho).trace >= 0
    assert fd.ensemble_hamiltonian(s, HBAR1, fd.Potential.harmonic()) >= 0

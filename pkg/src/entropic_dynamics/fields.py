"""Coupled continuity / Hamilton-Jacobi dynamics of the pair (rho, Phi).

The engine stores ``log rho`` rather than ``rho``. With L = log rho the two
equations read

    dL/dt   = -sum_a (1/m_a) (Phi_aa + L_a Phi_a)
    dPhi/dt = -sum_a (1/m_a) Phi_a**2 / 2 - V + xi sum_a (1/m_a) (2 L_aa + L_a**2)

which is the continuity equation divided by rho, and the quantum potential
written through the identity (d2 sqrt(rho)) / sqrt(rho) = L''/2 + L'**2/4.
Centered differences are exact for quadratic L and Phi, so Gaussian packets
in at most quadratic potentials carry no spatial truncation error.

Points where rho falls below 1e-8 max(rho) are treated as vacuum: they are
not evolved but continued smoothly from the resolved region (``fill_vacuum``).
A small fourth-difference damping on L and Phi suppresses grid-scale noise
near that edge; it vanishes on cubics, so Gaussian packets stay exact.
"""
from __future__ import annotations

import math
import warnings
from functools import lru_cache
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.special import logsumexp

from .errors import ArgumentError, DomainError, NumericalError, PrecisionWarning
from .grid import DensityField, Grid, ScalarField, diff1, diff2
from .statmodel import ModelParams

DENSITY_FLOOR = 1e-12
# relative density below which the field solver does not evolve points
VACUUM_THRESHOLD = 1e-8
FLOOR_WARN_FRACTION = 0.01
STABILITY_FACTOR = 0.2


class PotentialKind(str, Enum):
    NONE = "none"
    HARMONIC = "harmonic"
    DOUBLE_WELL = "double-well"
    BARRIER = "barrier"
    POLYNOMIAL = "polynomial"


@dataclass(frozen=True)
class Potential:
    """External scalar potential, separable over coordinates.

    harmonic:    m omega^2 (x - center)^2 / 2
    double-well: b ((x - center)^2 - a^2)^2
    barrier:     height exp(-(x - center)^2 / (2 width^2))
    polynomial:  ascending coefficients
    """

    kind: PotentialKind = PotentialKind.NONE
    mass: float = 1.0
    omega: float = 1.0
    a: float = 1.0
    b: float = 1.0
    height: float = 1.0
    width: float = 1.0
    center: float = 0.0
    coefficients: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", PotentialKind(self.kind))
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if self.kind is PotentialKind.BARRIER and not self.width > 0:
            raise ArgumentError("barrier width must be positive")

    @classmethod
    def none(cls):
        return cls(PotentialKind.NONE)

    @classmethod
    def harmonic(cls, mass: float = 1.0, omega: float = 1.0, center: float = 0.0):
        return cls(PotentialKind.HARMONIC, mass=mass, omega=omega, center=center)

    @classmethod
    def double_well(cls, a: float, b: float, center: float = 0.0):
        return cls(PotentialKind.DOUBLE_WELL, a=a, b=b, center=center)

    @classmethod
    def barrier(cls, height: float, width: float, center: float = 0.0):
        return cls(PotentialKind.BARRIER, height=height, width=width, center=center)

    @classmethod
    def polynomial(cls, coefficients: Sequence[float]):
        return cls(PotentialKind.POLYNOMIAL, coefficients=tuple(coefficients))

    def _axis_value(self, x: np.ndarray) -> np.ndarray:
        y = x - self.center
        k = self.kind
        if k is PotentialKind.NONE:
            return np.zeros_like(y)
        if k is PotentialKind.HARMONIC:
            return 0.5 * self.mass * self.omega ** 2 * y ** 2
        if k is PotentialKind.DOUBLE_WELL:
            return self.b * (y ** 2 - self.a ** 2) ** 2
        if k is PotentialKind.BARRIER:
            return self.height * np.exp(-0.5 * (y / self.width) ** 2)
        return npoly.polyval(x, self.coefficients)

    def _axis_derivative(self, x: np.ndarray) -> np.ndarray:
        y = x - self.center
        k = self.kind
        if k is PotentialKind.NONE:
            return np.zeros_like(y)
        if k is PotentialKind.HARMONIC:
            return self.mass * self.omega ** 2 * y
        if k is PotentialKind.DOUBLE_WELL:
            return 4 * self.b * y * (y ** 2 - self.a ** 2)
        if k is PotentialKind.BARRIER:
            return -y / self.width ** 2 * self._axis_value(x)
        return npoly.polyval(x, npoly.polyder(self.coefficients))

    def value(self, points) -> np.ndarray:
        """V at positions of shape ``(..., n_coords)``."""
        pts = np.asarray(points, dtype=float)
        return self._axis_value(pts).sum(axis=-1)

    def gradient(self, points) -> np.ndarray:
        return self._axis_derivative(np.asarray(points, dtype=float))

    def on_grid(self, grid: Grid) -> np.ndarray:
        v = sum(self._axis_value(m) for m in grid.mesh())
        if not np.all(np.isfinite(v)):
            raise DomainError("potential is not finite on the grid")
        return v


@dataclass(frozen=True)
class FieldState:
    """Snapshot of (rho, Phi) at one instant.

    ``log_rho`` is the canonical storage; ``rho`` and ``phi`` give the field
    views. ``mass_error`` records how far the integral of rho had drifted
    from one before the last renormalization.
    """

    grid: Grid
    log_rho: np.ndarray
    phi_values: np.ndarray
    time: float = 0.0
    mass_error: float = 0.0

    def __post_init__(self):
        for name in ("log_rho", "phi_values"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != self.grid.shape:
                raise ArgumentError(f"{name} has shape {arr.shape}, grid is {self.grid.shape}")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def from_fields(cls, rho: DensityField, phi: ScalarField | np.ndarray | None = None,
                    time: float = 0.0) -> "FieldState":
        grid = rho.grid
        if phi is None:
            phi_values = np.zeros(grid.shape)
        elif isinstance(phi, ScalarField):
            if phi.grid != grid:
                raise ArgumentError("rho and phi live on different grids")
            phi_values = phi.values
        else:
            phi_values = np.asarray(phi, dtype=float)
        return cls(grid, floored_log_density(rho), phi_values, time)

    @classmethod
    def from_log_density(cls, grid: Grid, log_rho, phi=None, time: float = 0.0) -> "FieldState":
        """Build from an unnormalized log-density (normalized here)."""
        log_rho = np.asarray(log_rho, dtype=float)
        log_rho = log_rho - _log_mass(log_rho, grid)
        phi = np.zeros(grid.shape) if phi is None else phi
        return cls(grid, log_rho, phi, time)

    @property
    def rho(self) -> DensityField:
        return DensityField(self.grid, np.exp(self.log_rho), tolerance=1e-6)

    @property
    def phi(self) -> ScalarField:
        return ScalarField(self.grid, self.phi_values)

    def shifted_phase(self, c: float) -> "FieldState":
        return replace(self, phi_values=self.phi_values + c)


@dataclass(frozen=True)
class Velocities:
    """Per-axis velocity fields. ``drift`` and ``osmotic`` need S."""

    current: list[ScalarField]
    drift: list[ScalarField] | None = None
    osmotic: list[ScalarField] | None = None
    residual: float | None = None


@dataclass(frozen=True)
class FisherInformation:
    matrix: np.ndarray
    trace: float


def _log_mass(log_rho: np.ndarray, grid: Grid) -> float:
    return float(logsumexp(log_rho.ravel(), b=grid.weights().ravel()))


def floored_log_density(rho: DensityField, warn: bool = False) -> np.ndarray:
    """log of rho with values below 1e-12 max(rho) raised to that floor."""
    values = rho.values
    peak = float(values.max())
    if peak <= 0:
        raise DomainError("density is identically zero")
    floor = DENSITY_FLOOR * peak
    low = values < floor
    if warn and low.mean() > FLOOR_WARN_FRACTION:
        warnings.warn(f"density floor active on {100 * low.mean():.1f}% of the grid",
                      PrecisionWarning, stacklevel=3)
    return np.log(np.maximum(values, floor))


def _grad_list(values: np.ndarray, grid: Grid) -> list[np.ndarray]:
    return [diff1(values, grid, a) for a in range(grid.dim)]


def _inverse_masses(params: ModelParams, grid: Grid) -> np.ndarray:
    minv = params.inverse_masses
    if minv.size != grid.dim:
        raise ArgumentError(f"params describe {minv.size} coordinates but the grid is {grid.dim}-D")
    return minv


def phase_from_entropy(S: ScalarField, rho: DensityField, eta: float) -> ScalarField:
    """Phi = eta (S - log sqrt(rho))."""
    if S.grid != rho.grid:
        raise ArgumentError("S and rho live on different grids")
    return ScalarField(S.grid, eta * (S.values - 0.5 * floored_log_density(rho)))


def entropy_from_state(s: FieldState, eta: float) -> ScalarField:
    """Recover the drift potential S = Phi / eta + log sqrt(rho)."""
    return ScalarField(s.grid, s.phi_values / eta + 0.5 * s.log_rho)


def osmotic_velocity(rho: DensityField, params: ModelParams) -> list[ScalarField]:
    """u = -(eta / 2m) grad log rho, one field per axis."""
    grid = rho.grid
    minv = _inverse_masses(params, grid)
    grads = _grad_list(floored_log_density(rho, warn=True), grid)
    return [ScalarField(grid, -0.5 * params.eta * minv[a] * g) for a, g in enumerate(grads)]


def fick_residual(rho: DensityField, params: ModelParams) -> float:
    """max |rho u + D grad rho| relative to max |D grad rho|.

    Zero in the continuum; on the grid it is a second-order truncation error
    because grad(log rho) * rho and grad(rho) are different stencils.
    """
    grid = rho.grid
    u = osmotic_velocity(rho, params)
    worst, scale = 0.0, 0.0
    for a, ua in enumerate(u):
        flux = params.diffusion[a] * diff1(rho.values, grid, a)
        worst = max(worst, float(np.max(np.abs(rho.values * ua.values + flux))))
        scale = max(scale, float(np.max(np.abs(flux))))
    return worst / scale if scale > 0 else worst


def current_velocity(s: FieldState, params: ModelParams, S: ScalarField | None = None) -> Velocities:
    """v = m^-1 grad Phi; with S also the drift b and osmotic u parts.

    ``residual`` is max |v - b - u|, which vanishes when Phi was built from
    (S, rho) by ``phase_from_entropy``.
    """
    grid = s.grid
    minv = _inverse_masses(params, grid)
    v = [ScalarField(grid, minv[a] * g) for a, g in enumerate(_grad_list(s.phi_values, grid))]
    if S is None:
        return Velocities(current=v)
    if S.grid != grid:
        raise ArgumentError("S lives on a different grid")
    b = [ScalarField(grid, params.eta * minv[a] * g) for a, g in enumerate(_grad_list(S.values, grid))]
    u = [ScalarField(grid, -0.5 * params.eta * minv[a] * g)
         for a, g in enumerate(_grad_list(s.log_rho, grid))]
    residual = max(float(np.max(np.abs(v[a].values - b[a].values - u[a].values)))
                   for a in range(grid.dim))
    return Velocities(current=v, drift=b, osmotic=u, residual=residual)


def _fisher_from_log(log_rho: np.ndarray, grid: Grid) -> np.ndarray:
    rho = np.exp(log_rho)
    w = grid.weights()
    grads = _grad_list(log_rho, grid)
    out = np.empty((grid.dim, grid.dim))
    for a in range(grid.dim):
        for b in range(a, grid.dim):
            out[a, b] = out[b, a] = float(np.sum((w * rho * grads[a] * grads[b]).ravel()))
    return out


def fisher_functional(rho: DensityField, params: ModelParams | None = None) -> FisherInformation:
    """Fisher information of the translation family of rho and its mass-weighted trace.

    Uses I_ab = integral of rho d_a(log rho) d_b(log rho); without ``params``
    the trace uses unit masses.
    """
    grid = rho.grid
    log_rho = floored_log_density(rho, warn=True)
    # integrand with the floored density, weighted by the actual rho
    grads = _grad_list(log_rho, grid)
    w = grid.weights()
    matrix = np.empty((grid.dim, grid.dim))
    for a in range(grid.dim):
        for b in range(a, grid.dim):
            matrix[a, b] = matrix[b, a] = float(np.sum((w * rho.values * grads[a] * grads[b]).ravel()))
    minv = np.ones(grid.dim) if params is None else _inverse_masses(params, grid)
    return FisherInformation(matrix=matrix, trace=float(np.sum(minv * np.diag(matrix))))


def _quantum_from_log(log_rho: np.ndarray, grid: Grid, minv: np.ndarray, xi: float) -> np.ndarray:
    # -4 xi sum minv (d2 sqrt(rho))/sqrt(rho) = -xi sum minv (2 L'' + L'^2)
    q = np.zeros(grid.shape)
    for a in range(grid.dim):
        la = diff1(log_rho, grid, a)
        q += minv[a] * (2.0 * diff2(log_rho, grid, a) + la * la)
    return -xi * q


def quantum_potential(rho: DensityField, params: ModelParams) -> ScalarField:
    """Q = -4 xi sum_a (1/m_a) (d_a^2 sqrt(rho)) / sqrt(rho)."""
    grid = rho.grid
    minv = _inverse_masses(params, grid)
    log_rho = floored_log_density(rho, warn=True)
    return ScalarField(grid, _quantum_from_log(log_rho, grid, minv, params.xi))


def ensemble_hamiltonian(s: FieldState, params: ModelParams, V: Potential) -> float:
    """Kinetic term + xi * trace(m^-1 I) + expected potential."""
    grid = s.grid
    minv = _inverse_masses(params, grid)
    rho = np.exp(s.log_rho)
    w = grid.weights()
    kinetic = sum(minv[a] * g * g for a, g in enumerate(_grad_list(s.phi_values, grid)))
    fisher = _fisher_from_log(s.log_rho, grid)
    h = float(np.sum((w * rho * (0.5 * kinetic + V.on_grid(grid))).ravel()))
    return h + params.xi * float(np.sum(minv * np.diag(fisher)))


def stability_bound(grid: Grid, params: ModelParams) -> float:
    """Largest admissible solver step, 0.2 m h^2 / hbar (infinite when hbar = 0)."""
    if params.xi == 0:
        return math.inf
    return STABILITY_FACTOR * float(np.min(params.coordinate_masses)) * grid.spacing ** 2 / params.hbar


HYPER_DISSIPATION = 1.0
# keeps the explicit damping term inside the RK4 stability interval
HYPER_RATE_CAP = 0.15


def _fourth_difference(f: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    """Undivided fourth difference; zero for cubics and within two nodes of a closed end."""
    g = np.moveaxis(f, axis, 0)
    if grid.periodic:
        out = (np.roll(g, 2, 0) - 4 * np.roll(g, 1, 0) + 6 * g
               - 4 * np.roll(g, -1, 0) + np.roll(g, -2, 0))
    else:
        out = np.zeros_like(g)
        out[2:-2] = g[:-4] - 4 * g[1:-3] + 6 * g[2:-2] - 4 * g[3:-1] + g[4:]
    return np.moveaxis(out, 0, axis)


def _rhs(log_rho, phi, grid, minv, xi, v, hyper=HYPER_DISSIPATION, rate_cap=math.inf):
    d_l = np.zeros(grid.shape)
    d_phi = -v
    h = grid.spacing
    hbar = math.sqrt(8.0 * xi)
    for a in range(grid.dim):
        la = diff1(log_rho, grid, a)
        pa = diff1(phi, grid, a)
        d_l -= minv[a] * (diff2(phi, grid, a) + la * pa)
        d_phi += minv[a] * (xi * (2.0 * diff2(log_rho, grid, a) + la * la) - 0.5 * pa * pa)
        if hyper and xi > 0:
            # grid-scale modes grow at rate ~ (hbar/m)|L'|/(2h) where the amplitude is
            # steep; damp them at a matching rate (no effect on quadratic profiles)
            rate = np.minimum(hyper * hbar * minv[a] * np.abs(la) / (2.0 * h), rate_cap)
            d_l -= rate * _fourth_difference(log_rho, grid, a)
            d_phi -= rate * _fourth_difference(phi, grid, a)
    return d_l, d_phi


EDGE_FIT_POINTS = 8


@lru_cache(maxsize=256)
def _extrapolation_matrix(m: int, count: int) -> np.ndarray:
    """Maps the m rows nearest the edge to the quadratic fit at 1..count rows beyond it."""
    design = np.vander(np.arange(m, dtype=float), 3, increasing=True)
    out = np.vander(-np.arange(1, count + 1, dtype=float), 3, increasing=True)
    return out @ np.linalg.pinv(design)


def _extrapolate_axis(arr: np.ndarray, lo: int, hi: int, cap: bool) -> np.ndarray:
    """Quadratic continuation along axis 0 outside rows ``lo..hi`` (in place).

    The quadratic is a least-squares fit to the outermost resolved rows, so
    grid-scale noise at the edge is not propagated into the continuation.
    """
    n = arr.shape[0]
    m = min(EDGE_FIT_POINTS, hi - lo + 1)
    if lo > 0:
        e = _extrapolation_matrix(m, lo)
        val = np.tensordot(e, arr[lo:lo + m], axes=1)[::-1]
        arr[:lo] = np.minimum(val, arr[lo]) if cap else val
    if hi < n - 1:
        e = _extrapolation_matrix(m, n - 1 - hi)
        val = np.tensordot(e, arr[hi - m + 1:hi + 1][::-1], axes=1)
        arr[hi + 1:] = np.minimum(val, arr[hi]) if cap else val
    return arr


def _resolved_box(log_rho: np.ndarray, grid: Grid) -> list[tuple[int, int]]:
    """Index range per axis of the bounding box where rho > threshold * max(rho)."""
    # strict margin: values sitting exactly on the floor count as vacuum
    mask = log_rho > float(log_rho.max()) + math.log(VACUUM_THRESHOLD) + 1e-9
    box = []
    for a in range(grid.dim):
        other = tuple(i for i in range(grid.dim) if i != a)
        line = mask.any(axis=other) if other else mask
        idx = np.flatnonzero(line)
        if idx.size < 4:
            raise NumericalError("fewer than four grid points above the density floor",
                                 engine="fields")
        box.append((int(idx[0]), int(idx[-1])))
    return box


def fill_vacuum(log_rho: np.ndarray, phi: np.ndarray, grid: Grid,
                box: list[tuple[int, int]] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Replace values outside the resolved region by smooth continuations.

    Below the vacuum threshold the (log rho, Phi) equations amplify roundoff
    without bound, so those points are not evolved: log rho and Phi are
    continued quadratically from the resolved region (exact for Gaussian
    packets), with log rho capped at its boundary value.
    """
    if box is None:
        box = _resolved_box(log_rho, grid)
    lr, ph = np.array(log_rho), np.array(phi)
    for a, (lo, hi) in enumerate(box):
        if lo == 0 and hi == grid.n_points - 1:
            continue
        lr = np.moveaxis(_extrapolate_axis(np.moveaxis(lr, a, 0), lo, hi, cap=True), 0, a)
        ph = np.moveaxis(_extrapolate_axis(np.moveaxis(ph, a, 0), lo, hi, cap=False), 0, a)
    return lr, ph


class CoupledStepper:
    """Classical RK4 stepper for the (log rho, Phi) system with cached operators."""

    def __init__(self, grid: Grid, params: ModelParams, V: Potential, dt_solver: float):
        if not dt_solver > 0:
            raise ArgumentError(f"dt_solver must be positive, got {dt_solver}")
        bound = stability_bound(grid, params)
        if dt_solver > bound * (1 + 1e-12):
            raise ArgumentError(f"dt_solver {dt_solver} exceeds the stability bound {bound:.4g}")
        self.grid = grid
        self.params = params
        self.minv = _inverse_masses(params, grid)
        self.v = V.on_grid(grid)
        self.dt = float(dt_solver)

    def _rhs(self, l, p, box):
        l, p = fill_vacuum(l, p, self.grid, box)
        return _rhs(l, p, self.grid, self.minv, self.params.xi, self.v,
                    rate_cap=HYPER_RATE_CAP / self.dt)

    def step(self, s: FieldState, step_index: int = 0) -> FieldState:
        if s.grid != self.grid:
            raise ArgumentError("state lives on a different grid")
        g, dt = self.grid, self.dt
        box = _resolved_box(s.log_rho, g)
        l0, p0 = fill_vacuum(s.log_rho, s.phi_values, g, box)
        k1l, k1p = self._rhs(l0, p0, box)
        k2l, k2p = self._rhs(l0 + 0.5 * dt * k1l, p0 + 0.5 * dt * k1p, box)
        k3l, k3p = self._rhs(l0 + 0.5 * dt * k2l, p0 + 0.5 * dt * k2p, box)
        k4l, k4p = self._rhs(l0 + dt * k3l, p0 + dt * k3p, box)
        l1 = l0 + dt / 6.0 * (k1l + 2 * k2l + 2 * k3l + k4l)
        p1 = p0 + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
        if not (np.all(np.isfinite(l1)) and np.all(np.isfinite(p1))):
            raise NumericalError(f"field solver produced non-finite values at step {step_index}",
                                 engine="fields", step=step_index)
        l1, p1 = fill_vacuum(l1, p1, g, box)
        log_mass = _log_mass(l1, g)
        if not math.isfinite(log_mass) or abs(log_mass) > 1.0:
            raise NumericalError(f"field solver lost normalization at step {step_index}",
                                 engine="fields", step=step_index)
        return FieldState(g, l1 - log_mass, p1, s.time + dt, mass_error=abs(math.expm1(log_mass)))


def step_coupled(s: FieldState, params: ModelParams, V: Potential, dt_solver: float,
                 step_index: int = 0) -> FieldState:
    """One RK4 step of the continuity + generalized Hamilton-Jacobi system."""
    return CoupledStepper(s.grid, params, V, dt_solver).step(s, step_index)


def evolve_fields(s: FieldState, params: ModelParams, V: Potential, dt_solver: float,
                  n_steps: int, record_every: int | None = None) -> list[FieldState]:
    """Advance ``n_steps``; returns the recorded states (always first and last)."""
    if n_steps < 0:
        raise ArgumentError("n_steps must be >= 0")
    stepper = CoupledStepper(s.grid, params, V, dt_solver)
    out = [s]
    for i in range(n_steps):
        s = stepper.step(s, i)
        if (record_every and (i + 1) % record_every == 0) or i == n_steps - 1:
            if out[-1] is not s:
                out.append(s)
    return out


def energy_drift(trajectory: Iterable[FieldState], params: ModelParams, V: Potential) -> float:
    """max_t |H(t) - H(0)| / max(|H(0)|, 1e-12)."""
    states = list(trajectory)
    if len(states) < 2:
        raise ArgumentError("need at least two states")
    h = [ensemble_hamiltonian(st, params, V) for st in states]
    return max(abs(x - h[0]) for x in h) / max(abs(h[0]), 1e-12)


@dataclass(frozen=True)
class Characteristics:
    """Lagrangian form of the xi = 0 dynamics: one classical trajectory per label.

    Each label carries a position, the momentum grad Phi at that position, the
    value of Phi transported along the trajectory, and a fixed probability
    weight. It represents multi-stream states that a single-valued Phi on a
    grid cannot, such as the focus of a cold harmonic ensemble.
    """

    positions: np.ndarray
    momenta: np.ndarray
    phase: np.ndarray
    weights: np.ndarray
    time: float = 0.0

    @classmethod
    def from_state(cls, s: FieldState, refine: int = 1) -> "Characteristics":
        grid = s.grid
        if grid.dim != 1:
            raise ArgumentError("characteristics are implemented for 1-D states")
        if refine < 1:
            raise ArgumentError("refine must be >= 1")
        x = grid.x
        grad_phi = diff1(s.phi_values, grid)
        if refine == 1:
            labels, lr, ph, gp = x, s.log_rho, s.phi_values, grad_phi
            w = grid.weights()
        else:
            h = grid.spacing / refine
            labels = grid.x_min + h * np.arange((grid.n_points - 1) * refine + 1)
            lr = np.interp(labels, x, s.log_rho)
            ph = np.interp(labels, x, s.phi_values)
            gp = np.interp(labels, x, grad_phi)
            w = np.full(labels.size, h)
            w[0] = w[-1] = 0.5 * h
        mass = np.exp(lr) * w
        return cls(labels.copy(), gp.copy(), ph.copy(), mass / mass.sum(), s.time)

    def mean_position(self) -> float:
        return float(np.sum(self.weights * self.positions))

    def density_on(self, grid: Grid) -> DensityField:
        """Deposit the label weights on ``grid`` with linear (cloud-in-cell) weights."""
        x = np.clip(self.positions, grid.x_min, grid.x_max)
        f = (x - grid.x_min) / grid.spacing
        i = np.clip(np.floor(f).astype(int), 0, grid.n_points - 2)
        t = f - i
        acc = np.zeros(grid.n_points)
        np.add.at(acc, i, self.weights * (1 - t))
        np.add.at(acc, i + 1, self.weights * t)
        acc /= grid.weights()
        return DensityField(grid, acc / float(np.sum(acc * grid.weights())))


def evolve_characteristics(c: Characteristics, params: ModelParams, V: Potential, dt: float,
                           n_steps: int) -> Characteristics:
    """RK4 for dX/dt = P/m, dP/dt = -V'(X), dPhi/dt = P^2/(2m) - V(X)."""
    if params.n_coords != 1:
        raise ArgumentError("characteristics are implemented for one coordinate")
    m = float(params.coordinate_masses[0])

    def rhs(x, p):
        return p / m, -V.gradient(x[:, None])[:, 0], 0.5 * p * p / m - V.value(x[:, None])

    x, p, ph = c.positions, c.momenta, c.phase
    for _ in range(n_steps):
        k1 = rhs(x, p)
        k2 = rhs(x + 0.5 * dt * k1[0], p + 0.5 * dt * k1[1])
        k3 = rhs(x + 0.5 * dt * k2[0], p + 0.5 * dt * k2[1])
        k4 = rhs(x + dt * k3[0], p + dt * k3[1])
        x = x + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        p = p + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        ph = ph + dt / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    return Characteristics(x, p, ph, c.weights, c.time + n_steps * dt)


def gaussian_state(grid: Grid, mu: float = 0.0, sigma: float = 1.0, phase_slope: float = 0.0,
                   time: float = 0.0) -> FieldState:
    """Gaussian density (same on every axis) with linear phase Phi = p x."""
    mesh = grid.mesh()
    log_rho = sum(-0.5 * ((m - mu) / sigma) ** 2 for m in mesh)
    phi = sum(phase_slope * m for m in mesh)
    return FieldState.from_log_density(grid, log_rho, phi, time)

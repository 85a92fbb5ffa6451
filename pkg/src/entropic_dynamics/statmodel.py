"""Maximum-entropy transition kernel, its multipliers and the information metric."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.interpolate import RegularGridInterpolator
from scipy.special import logsumexp

from .errors import ArgumentError, ConvergenceError, DomainError, PrecisionError
from .grid import DensityField, Grid, ScalarField, diff1

TAIL_MASS_LIMIT = 1e-10


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of an N-particle system in d dimensions.

    ``masses`` holds one mass per particle; coordinate-level quantities
    (``coordinate_masses``, ``inverse_masses``, ``diffusion``) repeat each
    particle's value ``dim`` times.
    """

    masses: tuple[float, ...] = (1.0,)
    eta: float = 1.0
    xi: float = 0.125
    dt: float = 0.01
    n_particles: int | None = None
    dim: int = 1

    def __post_init__(self):
        masses = tuple(float(m) for m in np.atleast_1d(self.masses))
        object.__setattr__(self, "masses", masses)
        if self.n_particles is None:
            object.__setattr__(self, "n_particles", len(masses))
        if self.n_particles < 1 or len(masses) != self.n_particles:
            raise ArgumentError(f"expected {self.n_particles} masses, got {len(masses)}")
        if not all(m > 0 and math.isfinite(m) for m in masses):
            raise ArgumentError(f"masses must be positive and finite: {masses}")
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise ArgumentError(f"eta must be positive, got {self.eta}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ArgumentError(f"dt must be positive, got {self.dt}")
        if not math.isfinite(self.xi) or self.xi < 0:
            # negative coupling makes the Fisher term destabilizing
            raise ArgumentError(f"xi must be nonnegative, got {self.xi}")
        if self.dim not in (1, 2):
            raise ArgumentError(f"dim must be 1 or 2, got {self.dim}")
        alphas = self.alphas
        if not all(math.isfinite(a) and a > 0 for a in alphas):
            raise ArgumentError(f"multipliers must be finite and positive: {alphas}")

    @property
    def n_coords(self) -> int:
        return self.n_particles * self.dim

    @property
    def alphas(self) -> list[float]:
        return [m / (self.eta * self.dt) for m in self.masses]

    @property
    def coordinate_masses(self) -> np.ndarray:
        return np.repeat(np.array(self.masses), self.dim)

    @property
    def inverse_masses(self) -> np.ndarray:
        return 1.0 / self.coordinate_masses

    @property
    def coordinate_alphas(self) -> np.ndarray:
        return self.coordinate_masses / (self.eta * self.dt)

    @property
    def diffusion(self) -> np.ndarray:
        """Diagonal of the diffusion tensor, eta / (2 m)."""
        return self.eta / (2.0 * self.coordinate_masses)

    @property
    def hbar(self) -> float:
        return math.sqrt(8.0 * self.xi)

    def mass_tensor(self) -> np.ndarray:
        return np.diag(self.coordinate_masses)

    def inverse_mass_tensor(self) -> np.ndarray:
        return np.diag(self.inverse_masses)

    def replace(self, **changes) -> "ModelParams":
        data = dict(masses=self.masses, eta=self.eta, xi=self.xi, dt=self.dt,
                    n_particles=self.n_particles, dim=self.dim)
        data.update(changes)
        if "masses" in changes and "n_particles" not in changes:
            data["n_particles"] = None
        return ModelParams(**data)


class DriftKind(str, Enum):
    POLYNOMIAL = "polynomial"
    TABULATED = "tabulated"
    GAUSSIAN_FAMILY = "gaussian-family"


@dataclass(frozen=True)
class DriftPotential:
    """The entropy field S(x) whose gradient sources the drift.

    Polynomial and Gaussian-family potentials are separable: S is the sum of
    the same one-variable polynomial over all coordinates. Coefficients are in
    ascending order (``c0 + c1 x + c2 x**2 ...``). For the Gaussian family
    the polynomial gives ``log sigma_y(x)`` and S is the differential entropy
    of a normal distribution with that width, relative to a uniform measure.
    """

    kind: DriftKind
    coefficients: tuple[float, ...] = ()
    table: ScalarField | None = None
    _interp: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", DriftKind(self.kind))
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if self.kind is DriftKind.TABULATED:
            if self.table is None:
                raise ArgumentError("tabulated drift potential needs a table")
            if self.table.grid.dim == 2:
                g = self.table.grid
                axes = (g.x, g.x)
                interps = [RegularGridInterpolator(axes, self.table.values)]
                interps += [RegularGridInterpolator(axes, diff1(self.table.values, g, a))
                            for a in range(2)]
                object.__setattr__(self, "_interp", tuple(interps))
        elif not self.coefficients:
            object.__setattr__(self, "coefficients", (0.0,))

    @classmethod
    def constant(cls, value: float = 0.0) -> "DriftPotential":
        return cls(DriftKind.POLYNOMIAL, (value,))

    @classmethod
    def polynomial(cls, coefficients: Sequence[float]) -> "DriftPotential":
        return cls(DriftKind.POLYNOMIAL, tuple(coefficients))

    @classmethod
    def tabulated(cls, table: ScalarField) -> "DriftPotential":
        return cls(DriftKind.TABULATED, table=table)

    @classmethod
    def gaussian_family(cls, log_sigma_coefficients: Sequence[float]) -> "DriftPotential":
        return cls(DriftKind.GAUSSIAN_FAMILY, tuple(log_sigma_coefficients))

    @property
    def is_constant(self) -> bool:
        return self.kind is not DriftKind.TABULATED and not any(self.coefficients[1:])

    def _check_domain(self, points: np.ndarray):
        if not np.all(np.isfinite(points)):
            raise DomainError("positions must be finite")
        if self.kind is DriftKind.TABULATED and not np.all(self.table.grid.contains(points)):
            g = self.table.grid
            raise DomainError(f"position outside tabulated domain [{g.x_min}, {g.x_max}]")

    def _wrap(self, points: np.ndarray) -> np.ndarray:
        g = self.table.grid
        if g.periodic:
            return g.x_min + np.mod(points - g.x_min, g.length)
        return np.clip(points, g.x_min, g.x_max)

    def _lookup(self, points: np.ndarray, which: int) -> np.ndarray:
        """Linear interpolation of the table (which=0) or its derivative along axis which-1."""
        g = self.table.grid
        pts = self._wrap(points)
        if g.dim == 1:
            if pts.shape[-1] != 1:
                raise ArgumentError("1-D table evaluated at multi-coordinate positions")
            xs = g.x
            ys = self.table.values if which == 0 else diff1(self.table.values, g)
            if g.periodic:
                return np.interp(pts[..., 0], xs, ys, period=g.length)
            return np.interp(pts[..., 0], xs, ys)
        if pts.shape[-1] != 2:
            raise ArgumentError("2-D table evaluated at positions without two coordinates")
        flat = pts.reshape(-1, 2)
        return self._interp[which](flat).reshape(pts.shape[:-1])

    def value(self, points) -> np.ndarray:
        """S at positions of shape ``(..., n_coords)``."""
        pts = np.asarray(points, dtype=float)
        self._check_domain(pts)
        if self.kind is DriftKind.TABULATED:
            return self._lookup(pts, 0)
        s = npoly.polyval(pts, self.coefficients).sum(axis=-1)
        if self.kind is DriftKind.GAUSSIAN_FAMILY:
            # 0.5 log(2 pi e sigma^2) per coordinate
            s = s + 0.5 * math.log(2 * math.pi * math.e) * pts.shape[-1]
        return s

    def gradient(self, points) -> np.ndarray:
        """Gradient of S at positions of shape ``(..., n_coords)``; same shape out."""
        pts = np.asarray(points, dtype=float)
        self._check_domain(pts)
        if self.kind is DriftKind.TABULATED:
            return np.stack([self._lookup(pts, a + 1) for a in range(pts.shape[-1])], axis=-1)
        return npoly.polyval(pts, npoly.polyder(self.coefficients))

    def on_grid(self, grid: Grid) -> np.ndarray:
        if self.kind is DriftKind.TABULATED and self.table.grid == grid:
            return np.array(self.table.values)
        return self.value(np.stack(grid.mesh(), axis=-1))

    def gradient_on_grid(self, grid: Grid) -> np.ndarray:
        """Array of shape ``grid.shape + (dim,)``."""
        if self.kind is DriftKind.TABULATED and self.table.grid == grid:
            return np.stack([diff1(self.table.values, grid, a) for a in range(grid.dim)], axis=-1)
        return self.gradient(np.stack(grid.mesh(), axis=-1))


@dataclass(frozen=True)
class TransitionMoments:
    mean_shift: np.ndarray
    covariance_diag: np.ndarray


@dataclass(frozen=True)
class InformationMetric:
    gamma: np.ndarray
    mass_tensor: np.ndarray


def _as_point(x, n_coords: int) -> np.ndarray:
    p = np.atleast_1d(np.asarray(x, dtype=float))
    if p.shape != (n_coords,):
        raise ArgumentError(f"position must have {n_coords} coordinates, got shape {p.shape}")
    return p


def _per_axis(alpha, n: int) -> np.ndarray:
    a = np.broadcast_to(np.asarray(alpha, dtype=float), (n,)).copy()
    if not np.all(a > 0) or not np.all(np.isfinite(a)):
        raise ArgumentError(f"multipliers must be positive and finite, got {alpha}")
    return a


def multipliers_from_timescale(params: ModelParams) -> list[float]:
    """Per-particle multipliers alpha_n = m_n / (eta dt)."""
    return params.alphas


def diffusion_tensor(params: ModelParams) -> np.ndarray:
    return np.diag(params.diffusion)


def multiplier_from_step_constraint(kappa: float, d: int) -> float:
    """Multiplier fixing the expected squared step length of an isotropic Gaussian step."""
    if d not in (1, 2, 3):
        raise ArgumentError(f"d must be 1, 2 or 3, got {d}")
    if not kappa > 0:
        raise DomainError(f"kappa must be positive, got {kappa}")
    return d / kappa


def drift_entropy(dp: DriftPotential, x) -> float:
    point = np.atleast_1d(np.asarray(x, dtype=float))
    return float(dp.value(point))


def _log_kernel(x: np.ndarray, dp: DriftPotential, alpha: np.ndarray, grid: Grid) -> np.ndarray:
    mesh = grid.mesh()
    logp = dp.on_grid(grid)
    for a in range(grid.dim):
        logp = logp - 0.5 * alpha[a] * grid.displacement(mesh[a], x[a]) ** 2
    return logp


def _tail_mass(p: np.ndarray, x: np.ndarray, dp: DriftPotential, alpha: np.ndarray,
               grid: Grid) -> float:
    """Estimate the probability mass of a normalized kernel lying outside the grid."""
    w = grid.weights()
    h = grid.spacing
    tail = 0.0
    for a in range(grid.dim):
        pa = np.moveaxis(p, a, 0)
        wa = np.moveaxis(w, a, 0) / h
        if grid.periodic:
            d = np.abs(grid.displacement(grid.x, x[a]))
            far = d >= 0.45 * grid.length
            tail += float(np.sum((pa * wa)[far]) * h)
            continue
        for idx, outward in ((0, -1.0), (-1, 1.0)):
            edge = float(np.sum(pa[idx] * (wa[idx] if grid.dim == 2 else 1.0)))
            if grid.dim == 2:
                edge /= max(float(np.sum(wa[idx])), 1e-300) / grid.n_points
            if edge == 0.0:
                continue
            xe = grid.x[idx]
            pt = np.array(x, dtype=float)
            pt[a] = xe
            s_slope = float(dp.gradient(pt[None, :])[0, a])
            decay = -outward * (s_slope - alpha[a] * (xe - x[a]))
            if decay <= 0:
                return math.inf
            tail += edge / decay
    return tail


def transition_density(x, dp: DriftPotential, alpha, grid: Grid,
                       check_support: bool = True) -> DensityField:
    """Normalized kernel exp[S(x') - alpha |x' - x|^2 / 2] over x' on ``grid``."""
    point = _as_point(x, grid.dim)
    a = _per_axis(alpha, grid.dim)
    logp = _log_kernel(point, dp, a, grid)
    p = np.exp(logp - logp.max())
    p /= float(np.sum((p * grid.weights()).ravel()))
    if check_support:
        tail = _tail_mass(p, point, dp, a, grid)
        if tail > TAIL_MASS_LIMIT:
            raise PrecisionError(f"kernel mass outside the grid ~{tail:.3g} exceeds {TAIL_MASS_LIMIT}")
    return DensityField(grid, p)


def transition_moments(x, dp: DriftPotential, params: ModelParams) -> TransitionMoments:
    """Short-step mean displacement and variance of the kernel at x."""
    point = _as_point(x, params.n_coords)
    alpha = params.coordinate_alphas
    grad = dp.gradient(point[None, :])[0]
    return TransitionMoments(mean_shift=grad / alpha, covariance_diag=1.0 / alpha)


def entropy_objective(p_mass, q_mass, s_values) -> float:
    """-sum P log(P/Q) + sum P S over discrete probability masses."""
    p = np.asarray(p_mass, dtype=float).ravel()
    q = np.asarray(q_mass, dtype=float).ravel()
    s = np.asarray(s_values, dtype=float).ravel()
    nz = p > 0
    return float(-np.sum(p[nz] * np.log(p[nz] / q[nz])) + np.sum(p * s))


def variational_gap(x, dp: DriftPotential, alpha, grid: Grid, *, damping: float = 0.5,
                    max_iter: int = 10_000, tol: float = 1e-14) -> float:
    """Total-variation distance between a numerically maximized kernel and the closed form.

    The discretized entropy functional is maximized over probability masses
    with exponentiated-gradient steps ``P <- P**(1-damping) * (Q e^S)**damping``,
    which keep P positive and normalized.
    """
    point = _as_point(x, grid.dim)
    a = _per_axis(alpha, grid.dim)
    closed = transition_density(point, dp, a, grid)
    w = grid.weights()
    closed_mass = closed.values * w

    mesh = grid.mesh()
    log_q = np.log(w)
    for ax in range(grid.dim):
        log_q = log_q - 0.5 * a[ax] * grid.displacement(mesh[ax], point[ax]) ** 2
    log_q -= logsumexp(log_q)
    s = dp.on_grid(grid)

    log_p = np.full(grid.shape, -math.log(w.size))
    target = log_q + s
    change = math.inf
    for _ in range(max_iter):
        new = (1 - damping) * log_p + damping * target
        new -= logsumexp(new)
        change = float(np.max(np.abs(new - log_p)))
        log_p = new
        if change < tol:
            break
    else:
        gap = 0.5 * float(np.sum(np.abs(np.exp(log_p) - closed_mass)))
        raise ConvergenceError(f"entropy ascent did not converge (last change {change:.3g})", gap)
    return 0.5 * float(np.sum(np.abs(np.exp(log_p) - closed_mass)))


def information_metric(params: ModelParams, dp: DriftPotential, x, C: float | None = None,
                       *, n_quad: int = 257, half_width: float = 12.0) -> InformationMetric:
    """Fisher-Rao metric of the kernel family P(x'|x), evaluated by quadrature.

    Derivatives of log P with respect to the source position x are central
    differences; the x' integral uses a tensor grid spanning ``half_width``
    kernel widths around x on each axis. Supports up to two coordinates.
    """
    n = params.n_coords
    if n > 2:
        raise ArgumentError("information_metric supports at most two coordinates")
    point = _as_point(x, n)
    C = params.dt if C is None else float(C)
    if not C > 0:
        raise ArgumentError(f"C must be positive, got {C}")
    alpha = params.coordinate_alphas
    widths = 1.0 / np.sqrt(alpha)

    shift = dp.gradient(point[None, :])[0] / alpha
    axes = [np.linspace(point[i] + shift[i] - half_width * widths[i],
                        point[i] + shift[i] + half_width * widths[i], n_quad) for i in range(n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack(mesh, axis=-1)
    s = dp.value(pts)
    w1 = [np.full(n_quad, ax[1] - ax[0]) for ax in axes]
    for wi in w1:
        wi[0] *= 0.5
        wi[-1] *= 0.5
    w = w1[0] if n == 1 else np.multiply.outer(w1[0], w1[1])
    log_w = np.log(w)

    def log_kernel(src):
        lp = s.copy()
        for i in range(n):
            lp = lp - 0.5 * alpha[i] * (mesh[i] - src[i]) ** 2
        return lp - logsumexp(lp + log_w)

    base = log_kernel(point)
    p = np.exp(base)
    edge = max(float(np.max(np.abs(np.moveaxis(p, i, 0)[[0, -1]]))) for i in range(n))
    if edge * float(np.max(widths)) > TAIL_MASS_LIMIT:
        raise PrecisionError("quadrature box truncates the kernel")

    scores = []
    for i in range(n):
        delta = 1e-4 * widths[i]
        up, down = point.copy(), point.copy()
        up[i] += delta
        down[i] -= delta
        scores.append((log_kernel(up) - log_kernel(down)) / (2 * delta))
    gamma = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            gamma[i, j] = gamma[j, i] = C * float(np.sum((w * p * scores[i] * scores[j]).ravel()))
    mass = params.eta * params.dt / C * gamma
    return InformationMetric(gamma=gamma, mass_tensor=mass)

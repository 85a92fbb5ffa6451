"""Walker ensembles driven by the entropic Wiener process.

Random increments come from counter-based streams: the Philox key depends on
(master seed, step index) and walker ``i`` reads the block of counters
starting at ``i * blocks_per_walker``. Any partition of the walkers into
chunks therefore draws exactly the same numbers, so results do not depend on
the number of threads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import logsumexp, ndtri

from .errors import ArgumentError, DomainError, NumericalError
from .grid import DensityField, Grid, normalize, ScalarField
from .statmodel import DriftPotential, ModelParams, TransitionMoments  # noqa: F401

DENSITY_FLOOR = 1e-12
_INIT_STREAM = 2 ** 62


def _philox_key(seed: int, stream: int) -> np.ndarray:
    ss = np.random.SeedSequence(entropy=int(seed) % 2 ** 64, spawn_key=(int(stream),))
    return ss.generate_state(2, np.uint64)


def standard_normals(seed: int, stream: int, n_walkers: int, n_coords: int,
                     start: int = 0) -> np.ndarray:
    """Standard normal draws for walkers ``start .. start + n_walkers - 1``.

    Each walker consumes whole Philox blocks (four 64-bit words) so the draw
    for a walker depends only on (seed, stream, walker index).
    """
    blocks = -(-n_coords // 4)
    bitgen = np.random.Philox(key=_philox_key(seed, stream), counter=[start * blocks, 0, 0, 0])
    raw = bitgen.random_raw(n_walkers * blocks * 4).reshape(n_walkers, blocks * 4)[:, :n_coords]
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    return ndtri(u)


def _uniforms(seed: int, stream: int, n: int) -> np.ndarray:
    bitgen = np.random.Philox(key=_philox_key(seed, stream))
    raw = bitgen.random_raw(n)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


@dataclass(frozen=True)
class Ensemble:
    """Positions of W independent walkers, one row per walker."""

    positions: np.ndarray
    time: float = 0.0
    rng_seed: int = 0
    step_count: int = 0

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim == 1:
            pos = pos[:, None]
        if pos.ndim != 2 or pos.shape[0] < 1:
            raise ArgumentError(f"positions must be a (W, n_coords) array with W >= 1, got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise NumericalError("walker positions must be finite", engine="ensemble")
        pos.flags.writeable = False
        object.__setattr__(self, "positions", pos)

    @property
    def n_walkers(self) -> int:
        return self.positions.shape[0]

    @property
    def n_coords(self) -> int:
        return self.positions.shape[1]

    @classmethod
    def at(cls, x0, n_walkers: int, seed: int = 0) -> "Ensemble":
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        return cls(np.tile(x0, (n_walkers, 1)), rng_seed=seed)

    @classmethod
    def from_density(cls, rho: DensityField, n_walkers: int, seed: int = 0) -> "Ensemble":
        """Sample walkers from a 1-D density by inverse-CDF on the piecewise-linear interpolant."""
        grid = rho.grid
        if grid.dim != 1:
            raise ArgumentError("sampling from a density is implemented for 1-D grids")
        x = grid.x
        p = rho.values
        if grid.periodic:
            x = np.append(x, grid.x_max)
            p = np.append(p, p[0])
        h = np.diff(x)
        cell = 0.5 * (p[1:] + p[:-1]) * h
        cdf = np.concatenate(([0.0], np.cumsum(cell)))
        u = _uniforms(seed, _INIT_STREAM, n_walkers) * cdf[-1]
        idx = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, len(cell) - 1)
        # invert the piecewise-quadratic CDF: a t^2 + p0 t = target
        p0 = p[idx]
        a = 0.5 * (p[idx + 1] - p0) / h[idx]
        target = np.maximum(u - cdf[idx], 0.0)
        root = np.sqrt(np.maximum(p0 ** 2 + 4 * a * target, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            t = 2 * target / (p0 + root)
        t = np.clip(np.nan_to_num(t, nan=0.0, posinf=h[idx]), 0.0, h[idx])
        return cls((x[idx] + t)[:, None], rng_seed=seed)


@dataclass(frozen=True)
class StepStatistics:
    sample_mean_shift: np.ndarray
    sample_variance: np.ndarray
    standard_errors: np.ndarray


def apply_boundary(positions: np.ndarray, domain: Grid | None) -> np.ndarray:
    """Mirror-reflect into a closed domain or wrap into a periodic one."""
    if domain is None:
        return positions
    a, L = domain.x_min, domain.length
    if domain.periodic:
        return a + np.mod(positions - a, L)
    y = np.mod(positions - a, 2 * L)
    return a + np.where(y > L, 2 * L - y, y)


def _step_chunk(pos, start, params, dp, seed, step_index, domain):
    grad = dp.gradient(pos)
    drift = params.eta * params.inverse_masses * grad
    bad = ~np.all(np.isfinite(drift), axis=1)
    if np.any(bad):
        walker = start + int(np.flatnonzero(bad)[0])
        raise NumericalError(f"non-finite drift for walker {walker} at step {step_index}",
                             engine="ensemble", step=step_index)
    z = standard_normals(seed, step_index, pos.shape[0], pos.shape[1], start)
    sigma = np.sqrt(params.eta * params.dt * params.inverse_masses)
    return apply_boundary(pos + drift * params.dt + sigma * z, domain)


def _chunks(n: int, n_threads: int):
    k = max(1, min(int(n_threads), n))
    edges = np.linspace(0, n, k + 1).astype(int)
    return [(int(edges[i]), int(edges[i + 1])) for i in range(k) if edges[i + 1] > edges[i]]


def step(e: Ensemble, params: ModelParams, dp: DriftPotential, domain: Grid | None = None,
         n_threads: int = 1) -> Ensemble:
    """One entropic-time step: drift b dt plus a Gaussian fluctuation of variance eta dt / m."""
    if e.n_coords != params.n_coords:
        raise ArgumentError(f"ensemble has {e.n_coords} coordinates, params describe {params.n_coords}")
    pos = e.positions
    parts = _chunks(e.n_walkers, n_threads)
    if len(parts) == 1:
        new = _step_chunk(pos, 0, params, dp, e.rng_seed, e.step_count, domain)
    else:
        with ThreadPoolExecutor(max_workers=len(parts)) as pool:
            futures = [pool.submit(_step_chunk, pos[a:b], a, params, dp, e.rng_seed,
                                   e.step_count, domain) for a, b in parts]
            new = np.concatenate([f.result() for f in futures])
    return replace(e, positions=new, time=e.time + params.dt, step_count=e.step_count + 1)


def propagate(e: Ensemble, params: ModelParams, dp: DriftPotential, n_steps: int,
              domain: Grid | None = None, n_threads: int = 1) -> Ensemble:
    if n_steps < 0:
        raise ArgumentError(f"n_steps must be >= 0, got {n_steps}")
    for _ in range(n_steps):
        e = step(e, params, dp, domain, n_threads)
    return e


def step_statistics(before: Ensemble, after: Ensemble, params: ModelParams | None = None,
                    domain: Grid | None = None) -> StepStatistics:
    """Per-coordinate sample mean and variance (ddof=1) of the displacements."""
    if before.positions.shape != after.positions.shape:
        raise ArgumentError("ensembles differ in shape")
    disp = after.positions - before.positions
    if domain is not None and domain.periodic:
        disp = domain.displacement(after.positions, before.positions)
    w = disp.shape[0]
    mean = disp.mean(axis=0)
    var = disp.var(axis=0, ddof=1) if w > 1 else np.zeros(disp.shape[1])
    return StepStatistics(mean, var, np.sqrt(var / w))


def silverman_bandwidth(e: Ensemble) -> np.ndarray:
    return 1.06 * e.positions.std(axis=0, ddof=1 if e.n_walkers > 1 else 0) * e.n_walkers ** (-0.2)


def empirical_density(e: Ensemble, grid: Grid, bandwidth=None, chunk: int = 4096) -> DensityField:
    """Gaussian kernel density estimate of the walkers on ``grid``.

    The default bandwidth is Silverman's normal-reference rule, raised to the
    grid spacing when the ensemble is narrower than a cell.
    """
    if e.n_walkers == 0:
        raise ArgumentError("empty ensemble")
    if e.n_coords != grid.dim:
        raise ArgumentError(f"ensemble has {e.n_coords} coordinates but grid is {grid.dim}-D")
    h = grid.spacing
    if bandwidth is None:
        bw = np.maximum(silverman_bandwidth(e), h)
    else:
        bw = np.broadcast_to(np.asarray(bandwidth, dtype=float), (grid.dim,)).copy()
        if np.any(bw < h * (1 - 1e-12)):
            raise ArgumentError(f"bandwidth {bandwidth} is below the grid spacing {h}")
    x = grid.x
    total = np.zeros(grid.shape)
    pos = e.positions
    for a in range(0, e.n_walkers, chunk):
        block = pos[a:a + chunk]
        k = [np.exp(-0.5 * (grid.displacement(x[None, :], block[:, i:i + 1]) / bw[i]) ** 2)
             for i in range(grid.dim)]
        if grid.dim == 1:
            total += k[0].sum(axis=0)
        else:
            total += k[0].T @ k[1]
    return normalize(ScalarField(grid, total))


def _log_kernel_matrix(dp: DriftPotential, alpha: float, grid: Grid) -> np.ndarray:
    """log P(x_j | x_i) for all grid nodes, rows normalized on the grid."""
    x = grid.x
    s = dp.on_grid(grid)
    logk = s[None, :] - 0.5 * alpha * grid.displacement(x[None, :], x[:, None]) ** 2
    log_w = np.log(grid.weights())
    return logk - logsumexp(logk + log_w[None, :], axis=1, keepdims=True)


def _floored_log_density(rho: DensityField) -> tuple[np.ndarray, np.ndarray]:
    values = rho.values
    peak = float(values.max())
    if peak <= 0:
        raise DomainError("density is identically zero")
    floored = np.maximum(values, DENSITY_FLOOR * peak)
    return floored, np.log(floored)


def _check_grid_1d(rho: DensityField, grid: Grid):
    if rho.grid != grid:
        raise ArgumentError("density and grid differ")
    if grid.dim != 1:
        raise ArgumentError("reverse kernels are implemented for 1-D grids")


def reverse_kernel(x_prime: float, rho: DensityField, dp: DriftPotential, alpha: float,
                   grid: Grid) -> DensityField:
    """Bayes-reversed kernel P(x | x') proportional to rho(x) P(x' | x), over x."""
    _check_grid_1d(rho, grid)
    if not alpha > 0:
        raise ArgumentError(f"alpha must be positive, got {alpha}")
    x = grid.x
    log_w = np.log(grid.weights())
    s_all = dp.on_grid(grid)
    log_zeta = logsumexp(s_all[None, :] - 0.5 * alpha * grid.displacement(x[None, :], x[:, None]) ** 2
                         + log_w[None, :], axis=1)
    s_prime = float(dp.value(np.array([[x_prime]]))[0])
    log_fwd = s_prime - 0.5 * alpha * grid.displacement(x_prime, x) ** 2 - log_zeta
    floored, log_rho = _floored_log_density(rho)
    fwd = np.exp(log_fwd - log_fwd.max())
    genuine = float(np.sum(rho.values * fwd * np.exp(log_w)))
    padding = float(np.sum((floored - rho.values) * fwd * np.exp(log_w)))
    if genuine <= padding:
        raise DomainError(f"density vanishes where x' = {x_prime} can originate")
    log_r = log_rho + log_fwd
    r = np.exp(log_r - logsumexp(log_r + log_w))
    return DensityField(grid, r)


def arrow_asymmetry(rho: DensityField, dp: DriftPotential, alpha: float, grid: Grid) -> float:
    """Expected KL divergence of the reverse kernels from moment-matched Gaussians.

    The average over arrival points x' is weighted by the predictive density
    of x'; a forward kernel that is Gaussian in x' generally has reverse
    kernels that are not, and this measures by how much.
    """
    _check_grid_1d(rho, grid)
    if not alpha > 0:
        raise ArgumentError(f"alpha must be positive, got {alpha}")
    x = grid.x
    w = grid.weights()
    log_w = np.log(w)
    logk = _log_kernel_matrix(dp, alpha, grid)           # [i, j] = log P(x_j | x_i)
    _, log_rho = _floored_log_density(rho)
    log_joint = log_rho[:, None] + logk                   # column j: unnormalized reverse kernel
    log_r = log_joint - logsumexp(log_joint + log_w[:, None], axis=0, keepdims=True)
    r = np.exp(log_r)

    d = grid.displacement(x[:, None], x[None, :])         # x_i relative to x'_j
    mean_off = np.sum(w[:, None] * r * d, axis=0)
    var = np.sum(w[:, None] * r * (d - mean_off[None, :]) ** 2, axis=0)
    if np.any(var <= 0):
        raise DomainError("reverse kernel has zero spread; grid too coarse for alpha")
    dg = grid.displacement(x[:, None], (x + mean_off)[None, :])
    log_g = -0.5 * dg ** 2 / var[None, :]
    log_g = log_g - logsumexp(log_g + log_w[:, None], axis=0, keepdims=True)
    kl = np.sum(w[:, None] * r * (log_r - log_g), axis=0)

    predictive = np.exp(logsumexp(np.log(np.maximum(rho.values, 1e-300))[:, None] + logk
                                  + log_w[:, None], axis=0))
    weights = predictive * w
    return max(float(np.sum(weights * kl) / np.sum(weights)), 0.0)

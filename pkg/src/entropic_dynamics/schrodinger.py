"""Linear Schrodinger reference engine and the regraduation bookkeeping.

Periodic grids use split-step Fourier propagation (``numpy.fft``); closed
grids use Crank-Nicolson with a mirror (zero-flux) Laplacian, which is
self-adjoint in the trapezoid inner product and therefore exactly unitary
in that norm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import solve_banded

from .errors import ArgumentError, DomainError, NumericalError, PhaseUnwrapError
from .fields import Potential, _inverse_masses
from .grid import DensityField, Grid, ScalarField, diff1, diff2
from .statmodel import ModelParams

NORM_TOLERANCE = 1e-10
PHASE_MASK = 1e-6

# fourth-order composition of second-order steps (Yoshida 1990)
_CBRT2 = 2.0 ** (1.0 / 3.0)
_YOSHIDA = (1.0 / (2.0 - _CBRT2), -_CBRT2 / (2.0 - _CBRT2), 1.0 / (2.0 - _CBRT2))


def regraduate(xi: float) -> float:
    """hbar = sqrt(8 xi)."""
    if not xi > 0:
        raise ArgumentError(f"xi must be positive, got {xi}")
    return math.sqrt(8.0 * xi)


def xi_from_hbar(hbar: float) -> float:
    """Inverse of ``regraduate``: xi = hbar^2 / 8."""
    if not hbar > 0:
        raise ArgumentError(f"hbar must be positive, got {hbar}")
    return hbar * hbar / 8.0


def _norm2(values: np.ndarray, grid: Grid) -> float:
    return float(np.sum((np.abs(values) ** 2 * grid.weights()).ravel()))


@dataclass(frozen=True)
class WaveField:
    """Normalized complex amplitude on a grid."""

    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if v.shape != self.grid.shape:
            raise ArgumentError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("wave values must be finite")
        n = _norm2(v, self.grid)
        if abs(n - 1.0) > NORM_TOLERANCE:
            raise DomainError(f"wave norm is {n!r}, not 1")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def normalized(cls, grid: Grid, values, time: float = 0.0) -> "WaveField":
        v = np.asarray(values, dtype=complex)
        n = _norm2(v, grid)
        if not n > 0:
            raise DomainError("cannot normalize a zero wave")
        return cls(grid, v / math.sqrt(n), time)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def norm(self) -> float:
        return _norm2(self.values, self.grid)

    def conjugate(self) -> "WaveField":
        return WaveField(self.grid, np.conj(self.values), self.time)


def from_fields(rho: DensityField, phi: ScalarField | None, k: float, time: float = 0.0) -> WaveField:
    """Psi = sqrt(rho) exp(i Phi / k)."""
    if not k > 0:
        raise ArgumentError(f"k must be positive, got {k}")
    phase = np.zeros(rho.grid.shape) if phi is None else phi.values
    if phi is not None and phi.grid != rho.grid:
        raise ArgumentError("rho and phi live on different grids")
    psi = np.sqrt(rho.values) * np.exp(1j * phase / k)
    # rho is normalized to 1e-8 by contract; tighten to the wave tolerance
    return WaveField.normalized(rho.grid, psi, time)


def phase_mask(psi: WaveField, threshold: float = PHASE_MASK) -> np.ndarray:
    """Points where |Psi|^2 exceeds ``threshold`` times its maximum."""
    d = psi.density
    return d > threshold * d.max()


def _unwrap_line(values: np.ndarray, mask: np.ndarray, start: int, periodic: bool) -> np.ndarray:
    """Accumulate nearest-branch phase increments outward from ``start``.

    Returns the phase on the contiguous masked run containing ``start`` and
    NaN elsewhere; a masked point beyond a gap means the path crosses a node.
    """
    n = values.size
    out = np.full(n, np.nan)
    out[start] = np.angle(values[start])
    visited = np.zeros(n, dtype=bool)
    visited[start] = True
    for step in (1, -1):
        i = start
        while True:
            j = i + step
            if periodic:
                j %= n
            elif not 0 <= j < n:
                break
            if visited[j] or not mask[j]:
                break
            out[j] = out[i] + np.angle(values[j] * np.conj(values[i]))
            visited[j] = True
            i = j
    if np.any(mask & ~visited):
        raise PhaseUnwrapError("|Psi| nearly vanishes between masked regions; phase is multi-valued")
    return out


def to_fields(psi: WaveField, k: float, threshold: float = PHASE_MASK) -> tuple[DensityField, ScalarField]:
    """Invert ``from_fields``: rho = |Psi|^2 and Phi = k arg(Psi), unwrapped.

    The unwrap starts at the maximum of |Psi|. Outside the mask Phi is held
    at the value of the nearest masked point along the unwrap path; use
    ``phase_mask`` to select the meaningful region.
    """
    if not k > 0:
        raise ArgumentError(f"k must be positive, got {k}")
    grid = psi.grid
    rho = DensityField(grid, psi.density, tolerance=1e-9)
    mask = phase_mask(psi, threshold)
    v = psi.values
    peak = np.unravel_index(int(np.argmax(psi.density)), grid.shape)
    if grid.dim == 1:
        phase = _hold(_unwrap_line(v, mask, peak[0], grid.periodic))
    else:
        # unwrap the column through the peak, then each row from that column
        col = _unwrap_line(v[:, peak[1]], mask[:, peak[1]], peak[0], grid.periodic)
        phase = np.full(grid.shape, np.nan)
        for i in np.flatnonzero(np.isfinite(col)):
            row = _unwrap_line(v[i], mask[i], peak[1], grid.periodic)
            phase[i] = row + (col[i] - row[peak[1]])
        if np.any(mask & np.isnan(phase)):
            raise PhaseUnwrapError("masked region is not reachable along the unwrap path")
        phase = _hold_2d(phase)
    return rho, ScalarField(grid, k * phase)


def _hold(line: np.ndarray) -> np.ndarray:
    ok = np.flatnonzero(np.isfinite(line))
    idx = np.arange(line.size)
    return line[ok][np.clip(np.searchsorted(ok, idx), 0, ok.size - 1)] if ok.size else np.zeros_like(line)


def _hold_2d(phase: np.ndarray) -> np.ndarray:
    rows = np.flatnonzero(np.any(np.isfinite(phase), axis=1))
    filled = np.array(phase)
    for i in rows:
        filled[i] = _hold(phase[i])
    pick = rows[np.clip(np.searchsorted(rows, np.arange(phase.shape[0])), 0, rows.size - 1)]
    return filled[pick]


def nonlinear_coefficient(k: float, xi: float) -> float:
    """k^2/2 - 4 xi, snapped to exactly 0 within rounding of k = sqrt(8 xi)."""
    if not k > 0:
        raise ArgumentError(f"k must be positive, got {k}")
    if xi < 0:
        raise ArgumentError(f"xi must be nonnegative, got {xi}")
    a, b = 0.5 * k * k, 4.0 * xi
    c = a - b
    if abs(c) <= 8 * np.finfo(float).eps * max(a, b):
        return 0.0
    return c


def nonlinear_residual(psi: WaveField, k: float, params: ModelParams,
                       threshold: float = PHASE_MASK) -> float:
    """L2 norm over the phase mask of (k^2/2 - 4 xi) m^-1 (d^2|Psi|/|Psi|) Psi.

    d^2|Psi|/|Psi| is evaluated as L''/2 + L'^2/4 with L = log |Psi|^2.
    """
    c = nonlinear_coefficient(k, params.xi)
    grid = psi.grid
    minv = _inverse_masses(params, grid)
    if c == 0.0:
        return 0.0
    mask = phase_mask(psi, threshold)
    d = psi.density
    log_rho = np.log(np.maximum(d, threshold * d.max() * 1e-6))
    ratio = np.zeros(grid.shape)
    for a in range(grid.dim):
        la = diff1(log_rho, grid, a)
        ratio += minv[a] * (0.5 * diff2(log_rho, grid, a) + 0.25 * la * la)
    term = c * ratio * psi.values
    w = grid.weights()
    return float(np.sqrt(np.sum((np.abs(term) ** 2 * w)[mask])))


class Propagator:
    """Precomputed single-step propagator for one (grid, V, params, dt).

    ``order`` selects Strang splitting (2) or its fourth-order Yoshida
    composition (4) on periodic grids; closed grids always use
    Crank-Nicolson.
    """

    def __init__(self, grid: Grid, V: Potential, params: ModelParams, dt_solver: float,
                 order: int = 2):
        if not params.xi > 0:
            raise ArgumentError("the wave engine needs xi > 0")
        if not dt_solver > 0:
            raise ArgumentError(f"dt_solver must be positive, got {dt_solver}")
        if order not in (2, 4):
            raise ArgumentError(f"order must be 2 or 4, got {order}")
        if not grid.periodic and grid.dim != 1:
            raise ArgumentError("Crank-Nicolson is implemented for 1-D closed grids")
        self.grid, self.params, self.dt, self.order = grid, params, float(dt_solver), order
        self.hbar = params.hbar
        self.minv = _inverse_masses(params, grid)
        self.v = V.on_grid(grid)

    @cached_property
    def _k2(self) -> np.ndarray:
        g = self.grid
        k = 2 * np.pi * np.fft.fftfreq(g.n_points, d=g.spacing)
        if g.dim == 1:
            return self.minv[0] * k * k
        return self.minv[0] * (k * k)[:, None] + self.minv[1] * (k * k)[None, :]

    def _split_factors(self, tau: float):
        kick = np.exp(-0.5j * tau * self.v / self.hbar)
        drift = np.exp(-0.5j * self.hbar * tau * self._k2)
        return kick, drift

    @cached_property
    def _stages(self):
        weights = (1.0,) if self.order == 2 else _YOSHIDA
        return [self._split_factors(w * self.dt) for w in weights]

    @cached_property
    def _cn(self):
        # (1 + i dt H / 2hbar) psi' = (1 - i dt H / 2hbar) psi with a mirror Laplacian
        g, n = self.grid, self.grid.n_points
        c = self.hbar * self.minv[0] / (2 * g.spacing ** 2)
        diag = 2 * c + self.v / self.hbar
        lower = np.full(n - 1, -c)
        upper = np.full(n - 1, -c)
        upper[0] = lower[-1] = -2 * c
        z = 0.5j * self.dt
        ab = np.zeros((3, n), dtype=complex)
        ab[0, 1:] = z * upper
        ab[1] = 1 + z * diag
        ab[2, :-1] = z * lower
        return ab, diag, lower, upper

    def _apply_h(self, psi: np.ndarray) -> np.ndarray:
        _, diag, lower, upper = self._cn
        out = diag * psi
        out[:-1] += upper * psi[1:]
        out[1:] += lower * psi[:-1]
        return out

    def step(self, values: np.ndarray) -> np.ndarray:
        if self.grid.periodic:
            axes = tuple(range(self.grid.dim))
            for kick, drift in self._stages:
                values = kick * values
                values = np.fft.ifftn(drift * np.fft.fftn(values, axes=axes), axes=axes)
                values = kick * values
            return values
        ab = self._cn[0]
        rhs = values - 0.5j * self.dt * self._apply_h(values)
        return solve_banded((1, 1), ab, rhs)

    def advance(self, psi: WaveField, n_steps: int = 1, step_offset: int = 0) -> WaveField:
        if psi.grid != self.grid:
            raise ArgumentError("wave lives on a different grid")
        v = np.array(psi.values)
        for i in range(n_steps):
            v = self.step(v)
            if not np.all(np.isfinite(v)):
                raise NumericalError(f"wave solver produced non-finite values at step {step_offset + i}",
                                     engine="wave", step=step_offset + i)
        # renormalize away accumulated rounding only
        return WaveField.normalized(self.grid, v, psi.time + n_steps * self.dt)


def step_schrodinger(psi: WaveField, V: Potential, params: ModelParams, dt_solver: float,
                     order: int = 2) -> WaveField:
    """One step of i hbar dPsi/dt = -hbar^2/2 m^-1 Laplacian Psi + V Psi."""
    return Propagator(psi.grid, V, params, dt_solver, order).advance(psi)


def evolve_wave(psi: WaveField, V: Potential, params: ModelParams, dt_solver: float,
                n_steps: int, record_every: int | None = None, order: int = 2) -> list[WaveField]:
    """Advance ``n_steps``; returns the recorded states (always first and last)."""
    if n_steps < 0:
        raise ArgumentError("n_steps must be >= 0")
    prop = Propagator(psi.grid, V, params, dt_solver, order)
    out = [psi]
    every = record_every or n_steps
    done = 0
    while done < n_steps:
        chunk = min(every, n_steps - done)
        psi = prop.advance(psi, chunk, done)
        done += chunk
        out.append(psi)
    return out


def wave_energy(psi: WaveField, V: Potential, params: ModelParams) -> float:
    """<Psi|H|Psi>, spectral kinetic term on periodic grids, mirror stencil otherwise."""
    grid = psi.grid
    v = psi.values
    hbar = params.hbar
    w = grid.weights()
    pot = float(np.sum((w * np.abs(v) ** 2 * V.on_grid(grid)).ravel()))
    if grid.periodic:
        prop = Propagator(grid, V, params, 1.0)
        axes = tuple(range(grid.dim))
        spec = np.fft.fftn(v, axes=axes)
        kin = 0.5 * hbar ** 2 * float(np.sum(prop._k2 * np.abs(spec) ** 2)) / spec.size
        kin *= float(w.ravel()[0])
    else:
        if grid.dim != 1:
            raise ArgumentError("closed-grid energy is implemented in 1-D")
        prop = Propagator(grid, V, params, 1.0)
        hv = prop._apply_h(v) - prop.v / hbar * v
        kin = hbar * float(np.real(np.sum(w * np.conj(v) * hv)))
    return kin + pot


def wave_energy_drift(trajectory, V: Potential, params: ModelParams) -> float:
    """max_t |E(t) - E(0)| / max(|E(0)|, 1e-12)."""
    states = list(trajectory)
    if len(states) < 2:
        raise ArgumentError("need at least two states")
    e = [wave_energy(s, V, params) for s in states]
    return max(abs(x - e[0]) for x in e) / max(abs(e[0]), 1e-12)

"""Scenario configuration, the multi-engine runner and its outputs.

A scenario is one JSON document. ``run_scenario`` builds the shared initial
(rho, Phi), runs the requested engines, samples them on the scenario grid
and checks the configured thresholds.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import ensemble as ens
from . import fields as fl
from . import schrodinger as sch
from .errors import ArgumentError, ConfigError, PhaseUnwrapError
from .grid import Boundary, DensityField, Grid, ScalarField, diff1, normalize
from .statmodel import DriftPotential, ModelParams

ENGINES = ("ensemble", "fields", "wave")
STEP_TOLERANCE = 1e-9


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridSpec(_Strict):
    n: int = Field(512, ge=8)
    x_min: float = -20.0
    x_max: float = 20.0
    boundary: Literal["reflecting", "periodic"] = "reflecting"

    @model_validator(mode="after")
    def _ordered(self):
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")
        return self


class ParamsSpec(_Strict):
    masses: list[float] = Field(default_factory=lambda: [1.0], min_length=1, max_length=1)
    eta: float = Field(1.0, gt=0)
    xi: float = Field(0.125, ge=0)
    dt: float = Field(0.01, gt=0)


class GaussianInit(_Strict):
    kind: Literal["gaussian"] = "gaussian"
    mu: float = 0.0
    sigma: float = Field(1.0, gt=0)
    phase_slope: float = 0.0


class MixtureInit(_Strict):
    """Amplitude sum_i sqrt(w_i) exp(-(x - mu_i)^2 / (4 sigma^2) + i p_i x / hbar)."""

    kind: Literal["mixture"] = "mixture"
    mus: list[float] = Field(min_length=1)
    sigma: float = Field(1.0, gt=0)
    weights: Optional[list[float]] = None
    phase_slopes: Optional[list[float]] = None

    @model_validator(mode="after")
    def _lengths(self):
        for name in ("weights", "phase_slopes"):
            v = getattr(self, name)
            if v is not None and len(v) != len(self.mus):
                raise ValueError(f"{name} must have one entry per component")
        if self.weights is not None and (min(self.weights) <= 0):
            raise ValueError("weights must be positive")
        return self


class TabulatedInit(_Strict):
    kind: Literal["tabulated"] = "tabulated"
    rho: list[float]
    phi: Optional[list[float]] = None


InitialSpec = Annotated[Union[GaussianInit, MixtureInit, TabulatedInit], Field(discriminator="kind")]


class PotentialSpec(_Strict):
    kind: Literal["none", "harmonic", "double-well", "barrier", "polynomial"] = "none"
    mass: float = 1.0
    omega: float = 1.0
    a: float = 1.0
    b: float = 1.0
    height: float = 1.0
    width: float = Field(1.0, gt=0)
    center: float = 0.0
    coefficients: list[float] = Field(default_factory=list)


class DriftSpec(_Strict):
    """``fields`` derives S = Phi/eta + log sqrt(rho) from the field engine at every step."""

    kind: Literal["fields", "polynomial", "gaussian-family"] = "fields"
    coefficients: list[float] = Field(default_factory=lambda: [0.0])


class Thresholds(_Strict):
    fields_wave_linf: Optional[float] = None
    fields_wave_l1: Optional[float] = None
    ensemble_fields_l1: Optional[float] = None
    energy_drift_fields: Optional[float] = None
    energy_drift_wave: Optional[float] = None
    stationarity: Optional[float] = None
    variance_target: Optional[float] = None
    variance_rtol: Optional[float] = None
    hamiltonian_target: Optional[float] = None
    hamiltonian_tol: Optional[float] = None
    mean_position_tol: Optional[float] = None
    arrow_min: Optional[float] = None

    @model_validator(mode="after")
    def _pairs(self):
        for a, b in (("variance_target", "variance_rtol"), ("hamiltonian_target", "hamiltonian_tol")):
            if (getattr(self, a) is None) != (getattr(self, b) is None):
                raise ValueError(f"{a} and {b} must be given together")
        return self


class ScenarioConfig(_Strict):
    name: str = Field(min_length=1, pattern=r"^[A-Za-z0-9_.-]+$")
    description: str = ""
    grid: GridSpec = Field(default_factory=GridSpec)
    params: ParamsSpec = Field(default_factory=ParamsSpec)
    initial: InitialSpec = Field(default_factory=GaussianInit)
    potential: PotentialSpec = Field(default_factory=PotentialSpec)
    drift: DriftSpec = Field(default_factory=DriftSpec)
    engines: list[Literal["ensemble", "fields", "wave"]] = Field(min_length=1)
    walkers: int = Field(100_000, ge=2)
    seed: int = Field(0, ge=0)
    duration: float = Field(gt=0)
    dt_solver: Optional[float] = Field(None, gt=0)
    output_every: Optional[float] = Field(None, gt=0)
    output_dir: Optional[str] = None
    wave_method: Literal["spectral", "native"] = "spectral"
    wave_order: Literal[2, 4] = 4
    threads: int = Field(1, ge=1)
    thresholds: Thresholds = Field(default_factory=Thresholds)

    @model_validator(mode="after")
    def _consistent(self):
        if len(set(self.engines)) != len(self.engines):
            raise ValueError("engines must not repeat")
        if "wave" in self.engines and self.params.xi == 0:
            raise ValueError("the wave engine needs xi > 0")
        if "ensemble" in self.engines and self.drift.kind == "fields":
            if "fields" not in self.engines or self.params.xi == 0:
                raise ValueError("drift kind 'fields' needs the fields engine with xi > 0")
            _multiple(self.params.dt, self.solver_step, "params.dt", "dt_solver")
        if isinstance(self.initial, TabulatedInit):
            if len(self.initial.rho) != self.grid.n:
                raise ValueError("initial.rho must have one value per grid point")
            if self.initial.phi is not None and len(self.initial.phi) != self.grid.n:
                raise ValueError("initial.phi must have one value per grid point")
        _multiple(self.duration, self.solver_step, "duration", "dt_solver")
        _multiple(self.sample_step, self.solver_step, "output_every", "dt_solver")
        _multiple(self.duration, self.sample_step, "duration", "output_every")
        if "ensemble" in self.engines:
            _multiple(self.sample_step, self.params.dt, "output_every", "params.dt")
        return self

    @property
    def solver_step(self) -> float:
        return self.dt_solver if self.dt_solver is not None else self.duration / 1e4

    @property
    def sample_step(self) -> float:
        return self.output_every if self.output_every is not None else self.duration

    def model_params(self) -> ModelParams:
        p = self.params
        return ModelParams(masses=tuple(p.masses), eta=p.eta, xi=p.xi, dt=p.dt)

    def grid_object(self) -> Grid:
        g = self.grid
        return Grid(g.n, g.x_min, g.x_max, Boundary(g.boundary))

    def potential_object(self) -> fl.Potential:
        p = self.potential
        return fl.Potential(p.kind, p.mass, p.omega, p.a, p.b, p.height, p.width, p.center,
                            tuple(p.coefficients))


def _ratio(a: float, b: float) -> int:
    r = a / b
    n = round(r)
    if n < 1 or abs(r - n) > STEP_TOLERANCE * max(1.0, r):
        return -1
    return int(n)


def _multiple(a: float, b: float, name_a: str, name_b: str):
    if _ratio(a, b) < 0:
        raise ValueError(f"{name_a} ({a}) must be a whole multiple of {name_b} ({b})")


def _format_validation(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        path = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{path}: {e['msg']}")
    return "; ".join(lines)


def load_config(source: Union[str, Path, dict], **overrides) -> ScenarioConfig:
    """Parse and validate a scenario from a path, JSON text, dict or bundled name.

    Unknown keys are rejected. ``overrides`` replace top-level keys before
    validation (``None`` values are ignored).
    """
    if isinstance(source, dict):
        data = dict(source)
    else:
        text = _read_source(source)
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("<root>: a scenario must be a JSON object")
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc)) from exc


def _read_source(source) -> str:
    path = Path(source)
    if path.is_file():
        return path.read_text()
    if str(source) in bundled_scenarios():
        return _bundled_path(str(source)).read_text()
    if isinstance(source, str) and source.lstrip().startswith("{"):
        return source
    raise ConfigError(f"no such scenario file or bundled scenario: {source}")


def _bundled_path(name: str):
    return resources.files("entropic_dynamics").joinpath("scenarios", f"{name}.json")


def bundled_scenarios() -> dict[str, str]:
    """Bundled scenario names mapped to their one-line descriptions."""
    out = {}
    for item in sorted(resources.files("entropic_dynamics").joinpath("scenarios").iterdir(),
                       key=lambda p: p.name):
        if item.name.endswith(".json"):
            out[item.name[:-5]] = json.loads(item.read_text()).get("description", "")
    return out


def initial_state(cfg: ScenarioConfig) -> fl.FieldState:
    """Shared initial (rho, Phi) on the scenario grid."""
    grid = cfg.grid_object()
    init = cfg.initial
    x = grid.x
    if isinstance(init, GaussianInit):
        return fl.gaussian_state(grid, init.mu, init.sigma, init.phase_slope)
    if isinstance(init, TabulatedInit):
        rho = normalize(ScalarField(grid, init.rho))
        phi = np.zeros(grid.n_points) if init.phi is None else np.asarray(init.phi, dtype=float)
        return fl.FieldState.from_fields(rho, phi)
    # mixture: build the amplitude, then split into modulus and phase
    hbar = _phase_unit(cfg)
    amp = _mixture_amplitude(init, x, hbar)
    rho = normalize(ScalarField(grid, np.abs(amp) ** 2))
    try:
        phi_values = sch.to_fields(sch.WaveField.normalized(grid, amp), hbar)[1].values
    except PhaseUnwrapError:
        # separated packets: the phase is only defined per packet
        phi_values = hbar * np.angle(amp)
    return fl.FieldState.from_fields(rho, phi_values)


def _phase_unit(cfg: ScenarioConfig) -> float:
    return cfg.model_params().hbar if cfg.params.xi > 0 else 1.0


def _mixture_amplitude(init: MixtureInit, x: np.ndarray, hbar: float) -> np.ndarray:
    weights = init.weights or [1.0] * len(init.mus)
    slopes = init.phase_slopes or [0.0] * len(init.mus)
    amp = np.zeros(x.size, dtype=complex)
    for mu, w, p in zip(init.mus, weights, slopes):
        amp += math.sqrt(w) * np.exp(-0.25 * ((x - mu) / init.sigma) ** 2 + 1j * p * x / hbar)
    return amp


def initial_wave(cfg: ScenarioConfig, grid: Grid) -> sch.WaveField:
    """Initial wave on ``grid`` (the scenario grid or its periodic companion)."""
    hbar = cfg.model_params().hbar
    init = cfg.initial
    x = grid.x
    if isinstance(init, MixtureInit):
        return sch.WaveField.normalized(grid, _mixture_amplitude(init, x, hbar))
    s = initial_state(cfg)
    n = grid.n_points
    return sch.WaveField.normalized(grid, np.sqrt(np.exp(s.log_rho[:n])) * np.exp(1j * s.phi_values[:n] / hbar))


@dataclass
class DistanceRow:
    l1: float
    linf: float


def compare_densities(a, b, grid: Grid | None = None) -> list[DistanceRow]:
    """Per-sample L1 and Linf distances between two density series.

    ``a`` and ``b`` are sequences of DensityField (or arrays with ``grid``).
    """
    if len(a) != len(b):
        raise ArgumentError(f"series lengths differ: {len(a)} vs {len(b)}")
    out = []
    for fa, fb in zip(a, b):
        if isinstance(fa, DensityField) or isinstance(fb, DensityField):
            ga = fa.grid if isinstance(fa, DensityField) else grid
            gb = fb.grid if isinstance(fb, DensityField) else grid
            if ga != gb:
                raise ArgumentError("densities live on different grids")
            g = ga
        else:
            g = grid
        if g is None:
            raise ArgumentError("a grid is needed to compare raw arrays")
        va = fa.values if isinstance(fa, DensityField) else np.asarray(fa, dtype=float)
        vb = fb.values if isinstance(fb, DensityField) else np.asarray(fb, dtype=float)
        if va.shape != vb.shape or va.shape != g.shape:
            raise ArgumentError("density arrays do not match the grid")
        d = np.abs(va - vb)
        out.append(DistanceRow(float(np.sum((d * g.weights()).ravel())), float(d.max())))
    return out


@dataclass
class EngineTrack:
    """Samples of one engine on the scenario grid."""

    rho: list[np.ndarray] = field(default_factory=list)
    energy: list[float] = field(default_factory=list)
    extra: dict = field(default_factory=dict)


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    times: list[float]
    tracks: dict[str, EngineTrack]
    report: dict
    csv_text: str

    @property
    def passed(self) -> bool:
        return self.report["passed"]


def _run_fields(cfg, grid, params, V, n_steps, sample_every, drift_every):
    s = initial_state(cfg)
    track = EngineTrack()
    tables = []
    if params.xi == 0:
        return _run_characteristics(cfg, s, grid, params, V, n_steps, sample_every), tables
    stepper = fl.CoupledStepper(grid, params, V, cfg.solver_step)
    for i in range(n_steps + 1):
        if i % sample_every == 0:
            _record_fields(track, s, params, V)
        if drift_every and i % drift_every == 0 and i < n_steps:
            tables.append(fl.entropy_from_state(s, params.eta).values)
        if i < n_steps:
            s = stepper.step(s, i)
    return track, tables


def _record_fields(track, s, params, V):
    g = s.grid
    minv = params.inverse_masses
    track.rho.append(np.exp(s.log_rho))
    track.energy.append(fl.ensemble_hamiltonian(s, params, V))
    lp = diff1(s.log_rho, g)
    track.extra.setdefault("phi", []).append(np.array(s.phi_values))
    track.extra.setdefault("v", []).append(minv[0] * diff1(s.phi_values, g))
    track.extra.setdefault("u", []).append(-0.5 * params.eta * minv[0] * lp)
    track.extra.setdefault("Q", []).append(fl._quantum_from_log(s.log_rho, g, minv, params.xi))


def _run_characteristics(cfg, s, grid, params, V, n_steps, sample_every):
    track = EngineTrack()
    c = fl.Characteristics.from_state(s, refine=4)
    dt = cfg.solver_step
    x0, p0 = c.mean_position(), float(np.sum(c.weights * c.momenta))
    ref = fl.Characteristics(np.array([x0]), np.array([p0]), np.zeros(1), np.ones(1))
    means, refs = [], []
    for i in range(0, n_steps + 1, sample_every):
        if i:
            c = fl.evolve_characteristics(c, params, V, dt, sample_every)
            ref = fl.evolve_characteristics(ref, params, V, dt, sample_every)
        track.rho.append(c.density_on(grid).values)
        m = float(params.coordinate_masses[0])
        kinetic = float(np.sum(c.weights * c.momenta ** 2)) / (2 * m)
        track.energy.append(kinetic + float(np.sum(c.weights * V.value(c.positions[:, None]))))
        means.append(c.mean_position())
        refs.append(float(ref.positions[0]))
    track.extra["mean_position"] = means
    track.extra["classical_position"] = refs
    return track


def _run_wave(cfg, grid, params, V, n_steps, sample_every):
    wgrid = grid.periodic_companion() if cfg.wave_method == "spectral" else grid
    psi = initial_wave(cfg, wgrid)
    prop = sch.Propagator(wgrid, V, params, cfg.solver_step, cfg.wave_order)
    track = EngineTrack()
    for i in range(0, n_steps + 1, sample_every):
        if i:
            psi = prop.advance(psi, sample_every, i - sample_every)
        d = psi.density
        if wgrid.n_points != grid.n_points:
            d = np.append(d, d[0])  # periodic image at x_max
        track.rho.append(d)
        track.energy.append(sch.wave_energy(psi, V, params))
    return track


def _run_ensemble(cfg, grid, params, rho0, tables, n_samples, steps_per_sample):
    e = ens.Ensemble.from_density(DensityField(grid, rho0, tolerance=1e-6), cfg.walkers, cfg.seed)
    track = EngineTrack()
    static = None
    if cfg.drift.kind != "fields":
        static = DriftPotential(cfg.drift.kind, tuple(cfg.drift.coefficients))
    k = 0
    for j in range(n_samples):
        if j:
            for _ in range(steps_per_sample):
                dp = static or DriftPotential.tabulated(ScalarField(grid, tables[k]))
                e = ens.step(e, params, dp, domain=grid, n_threads=cfg.threads)
                k += 1
        track.rho.append(ens.empirical_density(e, grid).values)
    return track


def _moments(rho: np.ndarray, grid: Grid) -> tuple[float, float]:
    w = grid.weights() * rho
    x = grid.x
    m = float(np.sum(w * x) / np.sum(w))
    return m, float(np.sum(w * (x - m) ** 2) / np.sum(w))


def _drift(series: list[float]) -> float:
    e0 = series[0]
    return max(abs(e - e0) for e in series) / max(abs(e0), 1e-12)


def run_scenario(cfg: ScenarioConfig) -> ScenarioResult:
    """Run every configured engine and assemble the comparison report."""
    grid = cfg.grid_object()
    params = cfg.model_params()
    V = cfg.potential_object()
    n_steps = _ratio(cfg.duration, cfg.solver_step)
    sample_every = _ratio(cfg.sample_step, cfg.solver_step)
    n_samples = n_steps // sample_every + 1
    times = [i * sample_every * cfg.solver_step for i in range(n_samples)]
    tracks: dict[str, EngineTrack] = {}

    use_fields_drift = "ensemble" in cfg.engines and cfg.drift.kind == "fields"
    drift_every = _ratio(params.dt, cfg.solver_step) if use_fields_drift else 0
    tables: list[np.ndarray] = []
    if "fields" in cfg.engines:
        tracks["fields"], tables = _run_fields(cfg, grid, params, V, n_steps, sample_every, drift_every)
    if "wave" in cfg.engines:
        tracks["wave"] = _run_wave(cfg, grid, params, V, n_steps, sample_every)
    if "ensemble" in cfg.engines:
        rho0 = np.exp(initial_state(cfg).log_rho)
        tracks["ensemble"] = _run_ensemble(cfg, grid, params, rho0, tables, n_samples,
                                           _ratio(cfg.sample_step, params.dt))

    report = _build_report(cfg, grid, params, times, tracks)
    return ScenarioResult(cfg, times, tracks, report, _csv_text(grid, times, tracks))


def _build_report(cfg, grid, params, times, tracks) -> dict:
    samples = []
    pairs = [(a, b) for a, b in (("fields", "wave"), ("ensemble", "fields"), ("ensemble", "wave"))
             if a in tracks and b in tracks]
    dist = {f"{a}-{b}": compare_densities(tracks[a].rho, tracks[b].rho, grid) for a, b in pairs}
    arrow = []
    if cfg.thresholds.arrow_min is not None:
        dp = DriftPotential(cfg.drift.kind, tuple(cfg.drift.coefficients)) \
            if cfg.drift.kind != "fields" else None
        alpha = float(params.coordinate_alphas[0])
        src = tracks.get("fields") or tracks.get("wave") or tracks["ensemble"]
        for j in range(len(times)):
            rho = normalize(ScalarField(grid, src.rho[j]))
            table = dp or DriftPotential.constant()
            arrow.append(ens.arrow_asymmetry(rho, table, alpha, grid))
    for j, t in enumerate(times):
        row = {"t": t, "distances": {k: {"l1": v[j].l1, "linf": v[j].linf} for k, v in dist.items()},
               "mean": {}, "variance": {}}
        for name, tr in tracks.items():
            m, var = _moments(tr.rho[j], grid)
            row["mean"][name], row["variance"][name] = m, var
        if arrow:
            row["arrow_asymmetry"] = arrow[j]
        samples.append(row)

    summary = {}
    for name, tr in tracks.items():
        if tr.energy:
            summary[f"energy_drift_{name}"] = _drift(tr.energy)
            summary[f"energy_initial_{name}"] = tr.energy[0]
        summary[f"stationarity_{name}"] = max(float(np.max(np.abs(r - tr.rho[0]))) for r in tr.rho)
    for k, v in dist.items():
        summary[f"max_l1_{k}"] = max(r.l1 for r in v)
        summary[f"max_linf_{k}"] = max(r.linf for r in v)
    if "fields" in tracks and "mean_position" in tracks["fields"].extra:
        ex = tracks["fields"].extra
        summary["mean_position_error"] = max(abs(a - b) for a, b in
                                             zip(ex["mean_position"], ex["classical_position"]))

    checks = _threshold_checks(cfg.thresholds, summary, samples, tracks)
    return {
        "scenario": cfg.name,
        "seed": cfg.seed,
        "engines": sorted(tracks),
        "duration": cfg.duration,
        "dt_solver": cfg.solver_step,
        "samples": samples,
        "summary": summary,
        "thresholds": checks,
        "passed": all(c["passed"] for c in checks),
    }


def _check(name, value, limit, passed):
    return {"name": name, "value": value, "limit": limit, "passed": bool(passed)}


def _threshold_checks(th: Thresholds, summary, samples, tracks) -> list[dict]:
    out = []
    for key, stat in (("fields_wave_linf", "max_linf_fields-wave"),
                      ("fields_wave_l1", "max_l1_fields-wave"),
                      ("ensemble_fields_l1", "max_l1_ensemble-fields"),
                      ("energy_drift_fields", "energy_drift_fields"),
                      ("energy_drift_wave", "energy_drift_wave"),
                      ("mean_position_tol", "mean_position_error")):
        limit = getattr(th, key)
        if limit is None:
            continue
        value = summary.get(stat)
        out.append(_check(key, value, limit, value is not None and value < limit))
    if th.stationarity is not None:
        for name in ("fields", "wave"):
            if name in tracks:
                v = summary[f"stationarity_{name}"]
                out.append(_check(f"stationarity_{name}", v, th.stationarity, v < th.stationarity))
    if th.variance_target is not None:
        for name in ("fields", "wave"):
            if name in tracks:
                v = samples[-1]["variance"][name]
                rel = abs(v - th.variance_target) / abs(th.variance_target)
                out.append(_check(f"variance_{name}", v, th.variance_target, rel < th.variance_rtol))
    if th.hamiltonian_target is not None:
        v = summary.get("energy_initial_fields")
        ok = v is not None and abs(v - th.hamiltonian_target) < th.hamiltonian_tol
        out.append(_check("hamiltonian_fields", v, th.hamiltonian_target, ok))
    if th.arrow_min is not None:
        v = samples[0].get("arrow_asymmetry")
        out.append(_check("arrow_asymmetry", v, th.arrow_min, v is not None and v > th.arrow_min))
    return out


def _csv_text(grid: Grid, times, tracks) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    cols = ["t", "x", "rho_fields", "rho_wave", "rho_ensemble", "phi", "v", "u", "Q"]
    writer.writerow(cols)
    x = grid.x
    nan = np.full(grid.n_points, np.nan)
    f = tracks.get("fields")
    for j, t in enumerate(times):
        columns = [np.full(grid.n_points, t), x]
        for name in ("fields", "wave", "ensemble"):
            columns.append(tracks[name].rho[j] if name in tracks else nan)
        for key in ("phi", "v", "u", "Q"):
            columns.append(f.extra[key][j] if f is not None and key in f.extra else nan)
        for row in zip(*columns):
            writer.writerow(["%.17g" % v for v in row])
    return buf.getvalue()


def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def write_outputs(result: ScenarioResult, out_dir: Union[str, Path]) -> tuple[Path, Path]:
    """Write ``<name>.csv`` and ``<name>.report.json`` under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = result.config.name
    csv_path = out / f"{name}.csv"
    json_path = out / f"{name}.report.json"
    csv_path.write_text(result.csv_text)
    json_path.write_text(report_json(result.report))
    return csv_path, json_path

"""Configuration parsing, single runs, parameter sweeps and file output.

The configuration is a flat UTF-8 file of ``key = value`` lines with ``#``
comments and dotted keys::

    grid.n = 3
    grid.Ns = 32
    model.p = 3
    init.kind = eigenmode
    init.amplitude = 2.5

Summaries use the same format, so a summary can be read back with
:func:`parse_flat`.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
import logging
import math
import os
from pathlib import Path

import numpy as np

from .diagnostics import (
    HypothesisViolation,
    blowup_time_upper_bound,
    fit_decay,
    first_entry_into_V,
    high_energy_blowup_check,
    high_energy_constants_for,
    construct_high_energy_data,
    invariant_set_monitor,
    nehari_margin,
    subcritical_eta_range,
    subcritical_L0,
    subcritical_time_bound,
)
from .grid import GridSpec, build_grid
from .integrator import DAMPING_MODES, SchemeParams, SimResult, simulate
from .operators import POTENTIALS, second_eigenmode
from .series import format_float
from .variational import (
    ModelParams,
    WellConstants,
    hp_upper,
    lambda_star,
    make_model,
    well_constants,
)

__all__ = [
    "ConfigError",
    "RunConfig",
    "SweepConfig",
    "RunOutcome",
    "PRNG_NAME",
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_BLOWUP",
    "parse_flat",
    "parse_config",
    "parse_sweep_config",
    "format_config",
    "build_model",
    "initial_data",
    "compute_constants",
    "execute",
    "run",
    "sweep",
    "format_summary",
    "PHASE_COLUMNS",
]

log = logging.getLogger(__name__)

PRNG_NAME = "PCG64"
EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP = 0, 2, 3
INIT_KINDS = ("eigenmode", "gaussian-bump", "nehari-scaled", "corollary51")
G_KINDS = ("constant", "radial")
SWEEP_AXES = ("amplitude", "gamma", "p", "m")


class ConfigError(ValueError):
    """Every problem found in a configuration, one message per entry."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


def _auto_float(text: str):
    return None if text.strip().lower() == "auto" else float(text)


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _int(text: str) -> int:
    val = float(text)
    if val != int(val):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(val)


def _r_value(text: str):
    """``R`` is a number or a multiple of the well depth such as ``2d``."""
    t = text.strip()
    if t.endswith("d"):
        return ("d", float(t[:-1] or 1.0))
    return ("abs", float(t))


def _values(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


# key -> (parser, default); a default of ... marks a required key
SCHEMA = {
    "grid.n": (_int, ...),
    "grid.Ns": (_int, ...),
    "grid.Nx": (_int, ...),
    "grid.s_min": (float, ...),
    "grid.torus_length": (float, 2 * math.pi),
    "model.p": (float, ...),
    "model.m": (float, ...),
    "model.gamma": (float, 0.0),
    "model.potential": (str, "none"),
    "model.g_kind": (str, "constant"),
    "model.beta": (float, 1.0),
    "model.enforce_hp": (_bool, True),
    "scheme.dt": (_auto_float, None),
    "scheme.cfl_safety": (float, 0.5),
    "scheme.blowup_cap": (_auto_float, None),
    "scheme.newton_tol": (float, 1e-14),
    "scheme.t_max": (float, 10.0),
    "scheme.damping": (str, "coupled"),
    "scheme.adaptive": (_bool, True),
    "init.kind": (str, "eigenmode"),
    "init.amplitude": (float, 1.0),
    "init.velocity": (float, 0.0),
    "init.noise": (float, 0.0),
    "init.seed": (_int, 0),
    "init.R": (_r_value, None),
    "init.profile": (str, "eigenmode"),
    "init.center": (_auto_float, None),
    "init.width": (float, 1.0),
    "constants.restarts": (_int, 200),
    "analysis.xi": (float, 1.0),
    "analysis.eps": (float, 0.01),
    "analysis.tstar_C": (_auto_float, None),
    "outputs.dir": (str, "out"),
    "outputs.record_every": (_int, 1),
}

SWEEP_SCHEMA = {
    "sweep.axis": (str, ...),
    "sweep.values": (_values, ...),
    "sweep.workers": (_int, 1),
}


def parse_flat(text: str) -> tuple[dict[str, str], dict[str, int], list[str]]:
    """Split ``key = value`` lines; returns values, line numbers, syntax errors."""
    values, lines, errors = {}, {}, []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if key in values:
            errors.append(f"line {lineno}: {key}: duplicate key (first set on line {lines[key]})")
            continue
        values[key] = value
        lines[key] = lineno
    return values, lines, errors


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec
    p: float
    m: float
    gamma: float = 0.0
    potential: str = "none"
    g_kind: str = "constant"
    beta: float = 1.0
    enforce_hp: bool = True
    scheme: SchemeParams = field(default_factory=SchemeParams)
    init_kind: str = "eigenmode"
    amplitude: float = 1.0
    velocity: float = 0.0
    noise: float = 0.0
    seed: int = 0
    R: tuple | None = None
    profile: str = "eigenmode"
    center: float | None = None
    width: float = 1.0
    restarts: int = 200
    xi: float = 1.0
    eps: float = 0.01
    tstar_C: float | None = None
    out_dir: str = "out"
    record_every: int = 1

    def with_value(self, axis: str, value: float) -> "RunConfig":
        name = {"amplitude": "amplitude", "gamma": "gamma", "p": "p", "m": "m"}[axis]
        return replace(self, **{name: float(value)})


@dataclass(frozen=True)
class SweepConfig:
    base: RunConfig
    axis: str
    values: tuple[float, ...]
    workers: int = 1


def _typed(values, lines, schema, errors):
    out = {}
    for key, (parse, default) in schema.items():
        if key not in values:
            if default is ...:
                errors.append(f"{key}: required key missing")
            out[key] = None if default is ... else default
            continue
        try:
            out[key] = parse(values[key])
        except ValueError as exc:
            errors.append(f"line {lines[key]}: {key}: {exc}")
            out[key] = None if default is ... else default
    return out


def _validate(cfg: dict, lines: dict, errors: list[str]) -> None:
    def err(key, msg):
        where = f"line {lines[key]}: " if key in lines else ""
        errors.append(f"{where}{key}: {msg}")

    n, Ns, Nx, s_min = (cfg[k] for k in ("grid.n", "grid.Ns", "grid.Nx", "grid.s_min"))
    if n is not None and n < 3:
        err("grid.n", f"must be >= 3, got {n}")
    if Ns is not None and Ns < 4:
        err("grid.Ns", f"must be >= 4, got {Ns}")
    if Nx is not None and Nx < 1:
        err("grid.Nx", f"must be >= 1, got {Nx}")
    if s_min is not None and not s_min < 0:
        err("grid.s_min", f"must be negative, got {s_min}")
    if not cfg["grid.torus_length"] > 0:
        err("grid.torus_length", "must be positive")
    p, m = cfg["model.p"], cfg["model.m"]
    if p is not None:
        if not p > 2:
            err("model.p", f"hypothesis (H_p) needs 2 < p < (2n-2)/(n-2), got p = {p}")
        elif cfg["model.enforce_hp"] and n is not None and n >= 3 and not p < hp_upper(n):
            err("model.p", f"hypothesis (H_p) needs p < (2n-2)/(n-2) = {hp_upper(n):.6g}, got p = {p}")
    if m is not None and not m >= 2:
        err("model.m", f"must be >= 2, got {m}")
    if cfg["model.potential"] not in POTENTIALS:
        err("model.potential", f"must be one of {POTENTIALS}")
    if cfg["model.g_kind"] not in G_KINDS:
        err("model.g_kind", f"must be one of {G_KINDS}")
    if not cfg["model.beta"] >= 0:
        err("model.beta", "must be nonnegative (hypothesis (H_g))")
    if cfg["scheme.dt"] is not None and not cfg["scheme.dt"] > 0:
        err("scheme.dt", "must be positive or auto")
    if not 0 < cfg["scheme.cfl_safety"] <= 1:
        err("scheme.cfl_safety", "must lie in (0, 1]")
    if cfg["scheme.blowup_cap"] is not None and not cfg["scheme.blowup_cap"] > 0:
        err("scheme.blowup_cap", "must be positive or auto")
    if not cfg["scheme.t_max"] > 0:
        err("scheme.t_max", "must be positive")
    if cfg["scheme.damping"] not in DAMPING_MODES:
        err("scheme.damping", f"must be one of {DAMPING_MODES}")
    kind = cfg["init.kind"]
    if kind not in INIT_KINDS:
        err("init.kind", f"must be one of {INIT_KINDS}")
    if not cfg["init.amplitude"] >= 0:
        err("init.amplitude", "must be nonnegative")
    if cfg["init.seed"] < 0:
        err("init.seed", "must be a nonnegative integer")
    if kind == "corollary51":
        R = cfg["init.R"]
        if R is None:
            err("init.R", "required for init.kind = corollary51")
        elif not R[1] > 0:
            err("init.R", "must be positive")
        if p is not None and m is not None and not p > m:
            err("model.p", "corollary51 data need p > m")
    if cfg["init.profile"] not in ("eigenmode", "gaussian-bump"):
        err("init.profile", "must be eigenmode or gaussian-bump")
    if not cfg["init.width"] > 0:
        err("init.width", "must be positive")
    if cfg["constants.restarts"] < 1:
        err("constants.restarts", "must be >= 1")
    if cfg["outputs.record_every"] < 1:
        err("outputs.record_every", "must be >= 1")


def _to_run_config(cfg: dict) -> RunConfig:
    grid = GridSpec(cfg["grid.n"], cfg["grid.Ns"], cfg["grid.Nx"], cfg["grid.s_min"], cfg["grid.torus_length"])
    scheme = SchemeParams(
        dt=cfg["scheme.dt"],
        cfl_safety=cfg["scheme.cfl_safety"],
        blowup_cap=cfg["scheme.blowup_cap"],
        newton_tol=cfg["scheme.newton_tol"],
        t_max=cfg["scheme.t_max"],
        damping=cfg["scheme.damping"],
        adaptive=cfg["scheme.adaptive"],
    )
    return RunConfig(
        grid=grid,
        p=cfg["model.p"],
        m=cfg["model.m"],
        gamma=cfg["model.gamma"],
        potential=cfg["model.potential"],
        g_kind=cfg["model.g_kind"],
        beta=cfg["model.beta"],
        enforce_hp=cfg["model.enforce_hp"],
        scheme=scheme,
        init_kind=cfg["init.kind"],
        amplitude=cfg["init.amplitude"],
        velocity=cfg["init.velocity"],
        noise=cfg["init.noise"],
        seed=cfg["init.seed"],
        R=cfg["init.R"],
        profile=cfg["init.profile"],
        center=cfg["init.center"],
        width=cfg["init.width"],
        restarts=cfg["constants.restarts"],
        xi=cfg["analysis.xi"],
        eps=cfg["analysis.eps"],
        tstar_C=cfg["analysis.tstar_C"],
        out_dir=cfg["outputs.dir"],
        record_every=cfg["outputs.record_every"],
    )


def _parse(text: str, extra_schema: dict | None = None):
    values, lines, errors = parse_flat(text)
    schema = dict(SCHEMA)
    if extra_schema:
        schema.update(extra_schema)
    for key in values:
        if key not in schema:
            errors.append(f"line {lines[key]}: {key}: unknown key")
    cfg = _typed(values, lines, schema, errors)
    _validate(cfg, lines, errors)
    return cfg, lines, errors


def parse_config(text: str) -> RunConfig:
    cfg, _, errors = _parse(text)
    if errors:
        raise ConfigError(errors)
    return _to_run_config(cfg)


def parse_sweep_config(text: str) -> SweepConfig:
    cfg, lines, errors = _parse(text, SWEEP_SCHEMA)
    axis, vals = cfg["sweep.axis"], cfg["sweep.values"]
    if axis is not None and axis not in SWEEP_AXES:
        errors.append(f"line {lines['sweep.axis']}: sweep.axis: must be one of {SWEEP_AXES}")
    if vals is not None:
        if not vals:
            errors.append("sweep.values: must be nonempty")
        elif any(b <= a for a, b in zip(vals, vals[1:])):
            errors.append(f"line {lines['sweep.values']}: sweep.values: must be strictly increasing")
    if cfg["sweep.workers"] is not None and cfg["sweep.workers"] < 1:
        errors.append("sweep.workers: must be >= 1")
    if errors:
        raise ConfigError(errors)
    return SweepConfig(_to_run_config(cfg), axis, tuple(vals), cfg["sweep.workers"])


def _fmt(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, tuple):
        return f"{format_float(value[1])}d" if value[0] == "d" else format_float(value[1])
    return str(value)


def format_config(config: RunConfig) -> str:
    """Render a configuration in the input format (all keys)."""
    g, s = config.grid, config.scheme
    pairs = [
        ("grid.n", g.n), ("grid.Ns", g.Ns), ("grid.Nx", g.Nx), ("grid.s_min", float(g.s_min)),
        ("grid.torus_length", float(g.torus_length)),
        ("model.p", config.p), ("model.m", config.m), ("model.gamma", config.gamma),
        ("model.potential", config.potential), ("model.g_kind", config.g_kind),
        ("model.beta", config.beta), ("model.enforce_hp", config.enforce_hp),
        ("scheme.dt", s.dt), ("scheme.cfl_safety", s.cfl_safety), ("scheme.blowup_cap", s.blowup_cap),
        ("scheme.newton_tol", s.newton_tol), ("scheme.t_max", s.t_max), ("scheme.damping", s.damping),
        ("scheme.adaptive", s.adaptive),
        ("init.kind", config.init_kind), ("init.amplitude", config.amplitude),
        ("init.velocity", config.velocity), ("init.noise", config.noise), ("init.seed", config.seed),
        ("init.profile", config.profile), ("init.center", config.center), ("init.width", config.width),
        ("constants.restarts", config.restarts),
        ("analysis.xi", config.xi), ("analysis.eps", config.eps), ("analysis.tstar_C", config.tstar_C),
        ("outputs.dir", config.out_dir), ("outputs.record_every", config.record_every),
    ]
    if config.R is not None:
        pairs.insert(24, ("init.R", config.R))
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in pairs)


def build_model(config: RunConfig) -> ModelParams:
    grid = build_grid(config.grid)
    if config.g_kind == "radial":
        g = config.beta * (1.0 + grid.x1_field()) / 2.0
    else:
        g = config.beta
    return make_model(grid, config.p, config.m, config.gamma, config.potential, g, config.enforce_hp)


def compute_constants(config: RunConfig, model: ModelParams | None = None) -> WellConstants:
    model = build_model(config) if model is None else model
    return well_constants(model, restarts=config.restarts, seed=config.seed)


def _bump(config: RunConfig, model: ModelParams) -> np.ndarray:
    grid = model.grid
    s0 = config.grid.s_min / 2.0 if config.center is None else config.center
    r2 = (grid.s_field() - s0) ** 2 + grid.xprime_norm_field() ** 2
    # the Dirichlet rows are not stored, so the bump is cut off there implicitly
    return np.exp(-r2 / config.width**2)


def initial_data(config: RunConfig, model: ModelParams, constants: WellConstants):
    """``(u0, u1)`` for the configured initial-data kind."""
    grid = model.grid
    omega1 = constants.omega1
    kind = config.init_kind
    if kind == "eigenmode":
        u0 = config.amplitude * omega1
    elif kind == "gaussian-bump":
        u0 = config.amplitude * _bump(config, model)
    elif kind == "nehari-scaled":
        profile = omega1 if config.profile == "eigenmode" else _bump(config, model)
        u0 = config.amplitude * lambda_star(profile, model) * profile
    elif kind == "corollary51":
        omega2 = second_eigenmode(grid, omega1)
        R = config.R[1] * (constants.d if config.R[0] == "d" else 1.0)
        hec = high_energy_constants_for(model, constants)
        u0, u1 = construct_high_energy_data(R, omega1, omega2, model, hec)
        return u0, u1
    else:
        raise ValueError(f"unknown init.kind {kind!r}")
    u1 = config.velocity * omega1
    if config.noise:
        rng = np.random.Generator(np.random.PCG64(config.seed))
        u0 = u0 + config.noise * rng.standard_normal(grid.shape)
    return u0, u1


@dataclass
class RunOutcome:
    classification: str
    exit_code: int
    summary: dict[str, str]
    series_csv: str = field(repr=False)
    summary_text: str = field(repr=False)
    result: SimResult | None = field(default=None, repr=False)
    series_path: Path | None = None
    summary_path: Path | None = None


def format_summary(summary: dict[str, str]) -> str:
    return "".join(f"{k} = {v}\n" for k, v in summary.items())


def execute(config: RunConfig, constants: WellConstants | None = None) -> RunOutcome:
    """Simulate one configuration and assemble its summary (no file output)."""
    model = build_model(config)
    if constants is None:
        constants = compute_constants(config, model)
    u0, u1 = initial_data(config, model, constants)
    result = simulate(u0, u1, model, config.scheme, constants, record_every=config.record_every)
    series = result.series
    E0 = series.E[0]
    summary: dict[str, str] = {"prng": PRNG_NAME, "seed": str(config.seed)}
    summary.update({f"constants.{k}": format_float(v) for k, v in constants.as_dict().items()})
    if 0 <= E0 < constants.d:
        summary["constants.theta"] = format_float(constants.theta(E0, model))
    summary["E0"] = format_float(E0)
    summary["E0_over_d"] = format_float(E0 / constants.d)
    summary["dt"] = format_float(result.scheme.dt)
    summary["blowup_cap"] = format_float(result.blowup_cap)
    summary["steps"] = str(result.steps)
    summary["records"] = str(len(series))

    if result.blew_up:
        classification = "blow-up"
        summary["blowup_time"] = format_float(result.blowup_time)
    else:
        classification = "global"
        try:
            rep = fit_decay(series, model.m)
        except ValueError:
            rep = None
        if rep is not None and rep.rate > 0:
            classification = "global-decay"
            summary["decay.mode"] = rep.mode.value
            summary["decay.rate"] = format_float(rep.rate)
            summary["decay.amplitude"] = format_float(rep.amplitude)
            summary["decay.r_squared"] = format_float(rep.r_squared)
            summary["decay.window"] = f"{format_float(rep.fit_window[0])},{format_float(rep.fit_window[1])}"
    summary["classification"] = classification

    entry = first_entry_into_V(series, constants.d)
    summary["first_entry_V"] = "none" if entry is None else format_float(entry)
    summary["nehari_margin"] = format_float(nehari_margin(series))
    monitor = invariant_set_monitor(series, constants, model)
    summary["monitor.violations"] = str(len(monitor.violations))
    if monitor.first is not None:
        v = monitor.first
        summary["monitor.first"] = f"{v.rule} at t={format_float(v.t)}: {v.detail}"

    if model.p > model.m and model.alpha > 0:
        lo, eta_max = subcritical_eta_range(model.p, model.m)
        if E0 < 0:
            eta = eta_max / 2
            L0 = subcritical_L0(E0, model.grid.inner(u0, u1), eta, config.eps)
            summary["subcritical.eta"] = format_float(eta)
            summary["subcritical.L0"] = format_float(L0)
            if L0 > 0 and config.tstar_C is not None:
                summary["subcritical.T_star"] = format_float(subcritical_time_bound(L0, eta, config.tstar_C))
        try:
            hec = high_energy_constants_for(model, constants)
        except ValueError as exc:
            summary["high_energy.error"] = str(exc)
        else:
            summary["high_energy.M0"] = format_float(hec.M0)
            summary["high_energy.M"] = format_float(hec.M)
            summary["high_energy.K_M"] = format_float(hec.K_M)
            summary["high_energy.eta_M"] = format_float(hec.eta_M)
            passed = high_energy_blowup_check(u0, u1, model, hec)
            summary["high_energy.check"] = "true" if passed else "false"
            if passed:
                try:
                    b = blowup_time_upper_bound(u0, u1, model, constants, hec, xi=config.xi)
                except HypothesisViolation as exc:
                    summary["time_bound.error"] = str(exc)
                else:
                    for name in ("sigma", "eps2", "eps", "rho1", "rho2", "M1", "M2", "F0", "T_upper", "T_upper_as_printed"):
                        summary[f"time_bound.{name}"] = format_float(getattr(b, name))
    exit_code = EXIT_BLOWUP if result.blew_up else EXIT_OK
    return RunOutcome(classification, exit_code, summary, series.to_csv(), format_summary(summary), result)


def _write(out_dir: Path, outcome: RunOutcome) -> RunOutcome:
    out_dir.mkdir(parents=True, exist_ok=True)
    outcome.series_path = out_dir / "series.csv"
    outcome.summary_path = out_dir / "summary.txt"
    outcome.series_path.write_text(outcome.series_csv, encoding="utf-8")
    outcome.summary_path.write_text(outcome.summary_text, encoding="utf-8")
    return outcome


def run(config: RunConfig, out_dir: str | os.PathLike | None = None) -> RunOutcome:
    """Simulate, then write ``series.csv`` and ``summary.txt`` into the output directory."""
    outcome = execute(config)
    return _write(Path(config.out_dir if out_dir is None else out_dir), outcome)


PHASE_COLUMNS = (
    "value", "E0", "E0_over_d", "classification", "blowup_time", "decay_rate",
    "first_entry_V", "consistent", "resolved",
)


def _sweep_child(args):
    config, constants = args
    outcome = execute(config, constants)
    outcome.result = None  # keep the pickle small
    return outcome


def sweep(sweep_config: SweepConfig, out_dir: str | os.PathLike | None = None, band: float = 1e-3) -> Path:
    """Run every axis value and write ``phase.csv`` plus per-run files.

    A run is *resolved* when every record keeps ``|I| / (|a| + |b|) >=
    band``; *consistent* means that blow-up happened exactly when the
    trajectory entered ``{E < d} inside V``.
    """
    base = sweep_config.base
    configs = [base.with_value(sweep_config.axis, v) for v in sweep_config.values]
    for cfg in configs:  # fail before launching anything
        build_model(cfg)
    shared = compute_constants(base) if sweep_config.axis == "amplitude" else None
    jobs = [(cfg, shared) for cfg in configs]
    if sweep_config.workers > 1:
        with ProcessPoolExecutor(max_workers=sweep_config.workers) as pool:
            outcomes = list(pool.map(_sweep_child, jobs))
    else:
        outcomes = [_sweep_child(job) for job in jobs]

    root = Path(base.out_dir if out_dir is None else out_dir)
    root.mkdir(parents=True, exist_ok=True)
    lines = [",".join(PHASE_COLUMNS)]
    for k, (value, outcome) in enumerate(zip(sweep_config.values, outcomes)):
        _write(root / f"run_{k:03d}", outcome)
        s = outcome.summary
        blew = outcome.classification == "blow-up"
        entered = s["first_entry_V"] != "none"
        resolved = float(s["nehari_margin"]) >= band
        row = [
            format_float(value),
            s["E0"],
            s["E0_over_d"],
            outcome.classification,
            s.get("blowup_time", "none"),
            s.get("decay.rate", "none"),
            s["first_entry_V"],
            "true" if blew == entered else "false",
            "true" if resolved else "false",
        ]
        lines.append(",".join(row))
    path = root / "phase.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path

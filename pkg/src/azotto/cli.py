"""Batch command line: ``azotto {spectrum,thermalize,cycle,sweep} --config run.yaml``.

Exit codes: 0 success, 2 invalid configuration, 3 non-convergence,
4 quadrature failure. Diagnostics go to stderr; stdout receives one summary line.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from enum import Enum
from pathlib import Path
from typing import Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError, model_validator

from .cycle import CycleMode, OttoConfig, run_limit_cycle
from .dynamics import (
    ModulationSchedule,
    QubitState,
    ThermalizationCriterion,
    ThermalizationError,
    WindowRule,
    gibbs_state,
    run_thermalization_stroke,
)
from .spectral import QuadratureConfig, QuadratureError, SpectralModel, SpectrumKind, spectral_density
from .sweep import Observable, SweepError, SweepSpec, overlap_dataset, qa_sweep

log = logging.getLogger("azotto")

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_QUADRATURE = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------- schema


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", use_enum_values=True)


class BathSection(_Strict):
    kind: SpectrumKind
    gamma0: PositiveFloat  # rate
    width: PositiveFloat  # frequency: Gamma (Lorentzian) or nu_bar (super-Ohmic)
    detuning: float = 0.0  # frequency
    ohmic_exponent: float = Field(3.0, gt=1.0)  # dimensionless, super-Ohmic only
    beta: Optional[PositiveFloat] = None  # inverse energy; filled from the cycle when omitted
    omega_ref: Optional[PositiveFloat] = None  # frequency; filled from the cycle when omitted


class ScheduleSection(_Strict):
    tau_cp: PositiveFloat  # time, in time_unit
    tau_dc: float = Field(0.0, ge=0.0)  # time, in time_unit
    lambda_bar: float = Field(1.0, ge=0.0)
    max_windows: PositiveInt = 10_000


class QuadratureSection(_Strict):
    rel_tol: PositiveFloat = 1e-8
    abs_tol: PositiveFloat = 1e-10
    window_halfwidth_factor: PositiveFloat = 40.0
    max_subdivisions: PositiveInt = 20_000


class SpectrumSection(_Strict):
    bath: BathSection
    nu_min: Optional[float] = None  # frequency; default omega_ref - 40 width
    nu_max: Optional[float] = None
    n_points: int = Field(2001, ge=2)
    overlap_times: list[PositiveFloat] = []  # time, in time_unit

    @model_validator(mode="after")
    def _complete_bath(self):
        if self.bath.beta is None or self.bath.omega_ref is None:
            raise ValueError("spectrum.bath needs beta and omega_ref")
        return self


class CycleSection(_Strict):
    omega_c: PositiveFloat  # frequency
    omega_h: PositiveFloat  # frequency
    beta_h: PositiveFloat  # inverse energy
    beta_c: PositiveFloat  # inverse energy
    epsilon: float = Field(gt=0.0, lt=1.0)
    tau_u1: float = Field(0.0, ge=0.0)  # time, in time_unit
    tau_u2: float = Field(0.0, ge=0.0)  # time, in time_unit
    mode: CycleMode = CycleMode.AZD
    window_rule: WindowRule = WindowRule.CLOSED_FORM
    bath: Optional[BathSection] = None  # shared by both baths unless overridden
    hot_bath: Optional[BathSection] = None
    cold_bath: Optional[BathSection] = None
    schedule: ScheduleSection
    cold_schedule: Optional[ScheduleSection] = None  # defaults to ``schedule``

    @model_validator(mode="after")
    def _has_baths(self):
        if self.bath is None and (self.hot_bath is None or self.cold_bath is None):
            raise ValueError("give either cycle.bath or both cycle.hot_bath and cycle.cold_bath")
        return self


class GridSection(_Strict):
    values: Optional[list[PositiveFloat]] = None  # time, in time_unit
    start: Optional[PositiveFloat] = None
    stop: Optional[PositiveFloat] = None
    step: Optional[PositiveFloat] = None

    @model_validator(mode="after")
    def _one_form(self):
        ranged = (self.start, self.stop, self.step)
        if self.values is None and any(v is None for v in ranged):
            raise ValueError("grid needs either values or start/stop/step")
        if self.values is not None and any(v is not None for v in ranged):
            raise ValueError("grid takes values or start/stop/step, not both")
        return self

    def points(self) -> list[float]:
        if self.values is not None:
            return list(self.values)
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [round(self.start + k * self.step, 12) for k in range(n)]


class SweepSection(_Strict):
    observable: Observable = Observable.POWER
    grid: GridSection
    emit_overlap: bool = False
    overlap_times: Optional[list[PositiveFloat]] = None  # time, in time_unit


class ThermalizeSection(_Strict):
    bath: BathSection
    omega: PositiveFloat  # frequency of the working medium during the stroke
    target_beta: PositiveFloat
    epsilon: float = Field(gt=0.0, lt=1.0)
    initial_p1: Optional[float] = Field(None, ge=0.0, le=1.0)
    initial_omega: Optional[PositiveFloat] = None  # start from Gibbs(initial_omega, initial_beta)
    initial_beta: Optional[PositiveFloat] = None
    schedule: ScheduleSection
    samples_per_window: PositiveInt = 32
    window_rule: WindowRule = WindowRule.CLOSED_FORM

    @model_validator(mode="after")
    def _initial(self):
        gibbs = (self.initial_omega, self.initial_beta)
        if self.initial_p1 is None and any(v is None for v in gibbs):
            raise ValueError("give initial_p1 or both initial_omega and initial_beta")
        if self.initial_p1 is not None and any(v is not None for v in gibbs):
            raise ValueError("give initial_p1 or initial_omega/initial_beta, not both")
        return self


class RunConfig(_Strict):
    time_unit: Literal["inverse_width", "absolute"] = "inverse_width"
    out_dir: str = "out"
    verbosity: Literal["debug", "info", "warning", "error"] = "info"
    quadrature: QuadratureSection = QuadratureSection()
    spectrum: Optional[SpectrumSection] = None
    thermalize: Optional[ThermalizeSection] = None
    cycle: Optional[CycleSection] = None
    sweep: Optional[SweepSection] = None


# --------------------------------------------------------------------------- loading


def _line_of(root, loc) -> Optional[int]:
    node = root
    line = getattr(getattr(node, "start_mark", None), "line", None)
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            match = [v for k, v in node.value if k.value == key]
            if not match:
                break
            node = match[0]
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
        else:
            break
        line = node.start_mark.line
    return None if line is None else line + 1


def load_config(path: Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: YAML syntax error: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        lines = []
        for err in exc.errors():
            field = ".".join(str(p) for p in err["loc"])
            line = _line_of(root, err["loc"])
            where = f"{path}:{line}" if line else str(path)
            lines.append(f"{where}: field '{field}': {err['msg']}")
        raise ConfigError("\n".join(lines)) from exc


def resolved_header(cfg: RunConfig, command: str, extra: dict | None = None) -> list[str]:
    doc = {"command": command, **cfg.model_dump(mode="json", exclude_none=True)}
    if extra:
        doc["derived"] = extra
    dumped = yaml.safe_dump(doc, sort_keys=False, default_flow_style=False).rstrip("\n")
    return [f"# {line}" for line in dumped.splitlines()]


# --------------------------------------------------------------------------- builders


def _scale(cfg: RunConfig, width: float) -> float:
    return 1.0 / width if cfg.time_unit == "inverse_width" else 1.0


def build_model(section: BathSection, omega_ref=None, beta=None) -> SpectralModel:
    try:
        return SpectralModel(
            kind=section.kind,
            gamma0=section.gamma0,
            width=section.width,
            detuning=section.detuning,
            beta=section.beta if section.beta is not None else beta,
            omega_ref=section.omega_ref if section.omega_ref is not None else omega_ref,
            ohmic_exponent=section.ohmic_exponent,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid bath: {exc}") from exc


def build_quadrature(cfg: RunConfig) -> QuadratureConfig:
    return QuadratureConfig(**cfg.quadrature.model_dump())


def _schedule(section: ScheduleSection, unit: float) -> ModulationSchedule:
    return ModulationSchedule(section.tau_cp * unit, section.tau_dc * unit, section.lambda_bar, section.max_windows)


def build_otto(cfg: RunConfig) -> tuple[OttoConfig, float]:
    """OttoConfig in absolute time units plus the time-unit scale used for the grid."""
    c = cfg.cycle
    if c is None:
        raise ConfigError("this command needs a 'cycle' section")
    for name in ("hot_bath", "cold_bath"):
        sec = getattr(c, name) or c.bath
        if sec.omega_ref is not None or sec.beta is not None:
            raise ConfigError(f"cycle.{name}: omega_ref and beta come from the cycle section; remove them")
    hot = build_model(c.hot_bath or c.bath, c.omega_h, c.beta_h)
    cold = build_model(c.cold_bath or c.bath, c.omega_c, c.beta_c)
    unit = _scale(cfg, hot.width)
    try:
        otto = OttoConfig(
            omega_c=c.omega_c, omega_h=c.omega_h, beta_h=c.beta_h, beta_c=c.beta_c,
            hot_bath=hot, cold_bath=cold,
            hot_schedule=_schedule(c.schedule, unit),
            cold_schedule=_schedule(c.cold_schedule or c.schedule, unit),
            criterion=ThermalizationCriterion(c.epsilon),
            tau_u1=c.tau_u1 * unit, tau_u2=c.tau_u2 * unit,
            mode=c.mode, window_rule=c.window_rule,
        )
    except ValueError as exc:
        raise ConfigError(f"invalid cycle: {exc}") from exc
    return otto, unit


# --------------------------------------------------------------------------- output


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "nan" if math.isnan(value) else format(float(value), ".12g")
    return str(value)


def write_csv(path: Path, header: list[str], columns: list[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(line + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def _plot(enabled: bool):
    if not enabled:
        return None
    from . import plotting

    return plotting


# --------------------------------------------------------------------------- commands


def cmd_spectrum(cfg: RunConfig, out: Path, args) -> str:
    s = cfg.spectrum
    if s is None:
        raise ConfigError("the spectrum command needs a 'spectrum' section")
    model = build_model(s.bath)
    q = build_quadrature(cfg)
    lo = s.nu_min if s.nu_min is not None else model.omega_ref - 40 * model.width
    hi = s.nu_max if s.nu_max is not None else model.omega_ref + 40 * model.width
    if not hi > lo:
        raise ConfigError("spectrum.nu_max must exceed spectrum.nu_min")
    nu = np.linspace(lo, hi, s.n_points)
    g = spectral_density(model, nu)
    header = resolved_header(cfg, "spectrum")
    files = [write_csv(out / "spectrum.csv", header, ["nu", "G"], zip(nu, g))]
    plots = _plot(args.plot)
    if plots:
        files.append(plots.plot_spectrum(nu, g, out / "spectrum.png", model.kind.value))
    unit = _scale(cfg, model.width)
    for t_cfg in s.overlap_times:
        t = t_cfg * unit
        data = overlap_dataset(model, model.omega_ref, t, q=q)
        extra = {"t_absolute": t, "overlap_R": data.overlap}
        name = f"overlap_t{fmt(t_cfg)}"
        files.append(write_csv(out / f"{name}.csv", resolved_header(cfg, "spectrum", extra),
                               ["nu", "G", "sinc_kernel"], zip(data.nu, data.G, data.sinc_kernel)))
        if plots:
            files.append(plots.plot_overlap(data.nu, data.G, data.sinc_kernel, out / f"{name}.png", f"t = {fmt(t)}"))
    peak = nu[int(np.argmax(g))]
    return f"spectrum: {len(files)} files in {out}; max G = {fmt(g.max())} at nu = {fmt(peak)}"


def _trajectory_rows(traj, unit):
    return zip((t / unit for t in traj.time), traj.p1, traj.window_kind)


def cmd_thermalize(cfg: RunConfig, out: Path, args) -> str:
    s = cfg.thermalize
    if s is None:
        raise ConfigError("the thermalize command needs a 'thermalize' section")
    model = build_model(s.bath, s.omega, s.target_beta)
    unit = _scale(cfg, model.width)
    try:
        schedule = _schedule(s.schedule, unit)
        initial = (QubitState.from_p1(s.initial_p1) if s.initial_p1 is not None
                   else gibbs_state(s.initial_omega, s.initial_beta))
        criterion = ThermalizationCriterion(s.epsilon)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    q = build_quadrature(cfg)
    failure = None
    try:
        rec = run_thermalization_stroke(
            initial, model, s.omega, schedule, criterion, s.target_beta, q,
            trajectory=True, samples_per_window=s.samples_per_window, rule=s.window_rule,
        )
    except ThermalizationError as exc:
        failure, rec = exc, exc.record
    header = resolved_header(cfg, "thermalize", {"time_columns": cfg.time_unit})
    cols = ["duration", "n_cp", "n_dc", "p1_initial", "p1_final", "p1_target", "distance", "converged"]
    target = gibbs_state(s.omega, s.target_beta).p1
    summary = [rec.duration / unit, rec.n_cp, rec.n_dc, initial.p1, rec.final_state.p1, target, rec.distance, rec.converged]
    files = [write_csv(out / "stroke.csv", header, cols, [summary]),
             write_csv(out / "trajectory.csv", header, ["time", "p1", "window_kind"], _trajectory_rows(rec.trajectory, unit))]
    plots = _plot(args.plot)
    if plots:
        t = rec.trajectory
        files.append(plots.plot_trajectory(np.asarray(t.time) / unit, t.p1, t.window_kind, out / "trajectory.png"))
    line = (f"thermalize: converged={fmt(rec.converged)} n_cp={rec.n_cp} n_dc={rec.n_dc} "
            f"duration={fmt(rec.duration / unit)} distance={fmt(rec.distance)}")
    if failure is not None:
        raise _Converge(str(failure), line)
    return line


class _Converge(RuntimeError):
    """Non-convergence after partial outputs were written; carries the summary line."""

    def __init__(self, message: str, summary: str):
        super().__init__(message)
        self.summary = summary


def cmd_cycle(cfg: RunConfig, out: Path, args) -> str:
    otto, unit = build_otto(cfg)
    report = run_limit_cycle(otto, build_quadrature(cfg), trajectory=True)
    header = resolved_header(cfg, "cycle", {"time_columns": "absolute (cycle.csv), " + cfg.time_unit + " (trajectories)"})
    record = report.to_record(otto)
    files = [write_csv(out / "cycle.csv", header, list(record), [record.values()])]
    plots = _plot(args.plot)
    for name, stroke in (("hot", report.hot_stroke), ("cold", report.cold_stroke)):
        t = stroke.trajectory
        files.append(write_csv(out / f"{name}_trajectory.csv", header, ["time", "p1", "window_kind"],
                               _trajectory_rows(t, unit)))
        if plots:
            files.append(plots.plot_trajectory(np.asarray(t.time) / unit, t.p1, t.window_kind,
                                               out / f"{name}_trajectory.png", f"{name} stroke"))
    return (f"cycle: regime={report.regime.value} W={fmt(report.W)} P={fmt(report.P)} "
            f"eta={fmt(report.eta)} n_dc_hot={report.n_dc_hot} n_dc_cold={report.n_dc_cold}")


def cmd_sweep(cfg: RunConfig, out: Path, args) -> str:
    s = cfg.sweep
    if s is None:
        raise ConfigError("the sweep command needs a 'sweep' section")
    otto, unit = build_otto(cfg)
    grid = s.grid.points()
    try:
        spec = SweepSpec(otto, [t * unit for t in grid], s.observable, s.emit_overlap)
    except ValueError as exc:
        raise ConfigError(f"sweep: {exc}") from exc
    q = build_quadrature(cfg)
    rows = qa_sweep(spec, q, jobs=args.jobs)
    for r in rows:
        if r.note:
            log.info("tau_cp=%s: %s", fmt(r.tau_cp / unit), r.note)
    header = resolved_header(cfg, "sweep", {"tau_cp_column": cfg.time_unit, "other_columns": "absolute"})
    cols = ["tau_cp", "value", "baseline", "qa_ratio", "n_dc_hot", "n_dc_cold", "converged"]
    table = [[t, r.value, r.baseline, r.qa_ratio, r.n_dc_hot, r.n_dc_cold, r.converged] for t, r in zip(grid, rows)]
    files = [write_csv(out / "sweep.csv", header, cols, table)]
    plots = _plot(args.plot)
    if plots:
        files.append(plots.plot_sweep(grid, [r.qa_ratio for r in rows], out / "sweep.png",
                                      ylabel=f"QA ({spec.observable.value})"))
    if s.emit_overlap:
        times = s.overlap_times or [grid[0], grid[-1]]
        for t_cfg in times:
            data = overlap_dataset(otto.hot_bath, otto.omega_h, t_cfg * unit, q=q)
            name = f"overlap_hot_t{fmt(t_cfg)}"
            extra = {"t_absolute": t_cfg * unit, "overlap_R": data.overlap}
            files.append(write_csv(out / f"{name}.csv", resolved_header(cfg, "sweep", extra),
                                   ["nu", "G", "sinc_kernel"], zip(data.nu, data.G, data.sinc_kernel)))
            if plots:
                files.append(plots.plot_overlap(data.nu, data.G, data.sinc_kernel, out / f"{name}.png"))
    ratios = [r.qa_ratio for r in rows if r.qa_ratio is not None]
    n_ok = sum(r.converged for r in rows)
    best = fmt(max(ratios)) if ratios else "none"
    return f"sweep: {n_ok}/{len(rows)} rows converged; max qa_ratio={best}; {len(files)} files in {out}"


COMMANDS = {"spectrum": cmd_spectrum, "thermalize": cmd_thermalize, "cycle": cmd_cycle, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="azotto", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, type=Path, help="YAML run configuration")
    p.add_argument("--out", type=Path, help="output directory (overrides out_dir in the config)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for sweep rows")
    p.add_argument("--seedless", action="store_true",
                   help="accepted for compatibility; every computation is deterministic, so this does nothing")
    p.add_argument("--plot", action="store_true", help="also render PNG figures next to the CSV files")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.handlers = [handler]
    log.propagate = False
    try:
        cfg = load_config(args.config)
        log.setLevel(cfg.verbosity.upper())
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        out = args.out if args.out is not None else Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        summary = COMMANDS[args.command](cfg, out, args)
    except ConfigError as exc:
        log.error("configuration error:\n%s", exc)
        return EXIT_CONFIG
    except _Converge as exc:
        log.error("%s", exc)
        print(exc.summary)
        return EXIT_CONVERGENCE
    except (ThermalizationError, SweepError) as exc:
        log.error("no convergence: %s", exc)
        return EXIT_CONVERGENCE
    except QuadratureError as exc:
        log.error("quadrature failure: %s", exc)
        return EXIT_QUADRATURE
    print(summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Scans over the coupling-window length and quantum-advantage ratios."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from functools import partial

import numpy as np

from .cycle import CycleMode, CycleReport, OttoConfig, Regime, run_limit_cycle
from .dynamics import (
    ThermalizationError,
    gibbs_state,
    markovian_thermalization_stroke,
    run_thermalization_stroke,
)
from .spectral import (
    DEFAULT_QUADRATURE,
    QuadratureConfig,
    SpectralModel,
    response_coefficient,
    spectral_density,
)

__all__ = [
    "Observable",
    "SweepSpec",
    "SweepRow",
    "SweepError",
    "OverlapData",
    "markov_baseline",
    "qa_sweep",
    "thermalization_time_sweep",
    "overlap_dataset",
]


class Observable(str, Enum):
    POWER = "power"
    COOLING_RATE = "cooling_rate"
    THERMALIZATION_TIME = "thermalization_time"


class SweepError(RuntimeError):
    pass


@dataclass(frozen=True)
class SweepSpec:
    base: OttoConfig
    tau_cp_grid: tuple
    observable: Observable = Observable.POWER
    emit_overlap: bool = False

    def __post_init__(self):
        grid = tuple(float(t) for t in self.tau_cp_grid)
        if not grid:
            raise ValueError("tau_cp_grid must be nonempty")
        if any(t <= 0 or not math.isfinite(t) for t in grid):
            raise ValueError("tau_cp_grid entries must be positive")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("tau_cp_grid must be strictly increasing")
        object.__setattr__(self, "tau_cp_grid", grid)
        object.__setattr__(self, "observable", Observable(self.observable))


@dataclass(frozen=True)
class SweepRow:
    """One grid point. ``qa_ratio`` is None unless both runs converged in the expected regime."""

    tau_cp: float
    value: float | None
    baseline: float
    qa_ratio: float | None
    n_dc_hot: int | None
    n_dc_cold: int | None
    converged: bool
    regime: str | None = None
    note: str = ""


_EXPECTED = {Observable.POWER: Regime.ENGINE, Observable.COOLING_RATE: Regime.REFRIGERATOR}


def markov_baseline(config: OttoConfig, q: QuadratureConfig = DEFAULT_QUADRATURE) -> CycleReport:
    return run_limit_cycle(config.with_mode(CycleMode.MARKOVIAN), q)


def _figure(report: CycleReport, observable: Observable) -> float:
    return report.power_magnitude if observable is Observable.POWER else abs(report.kappa)


def _cycle_row(tau_cp: float, spec: SweepSpec, baseline: CycleReport, q: QuadratureConfig) -> SweepRow:
    obs = spec.observable
    base_value = _figure(baseline, obs)
    try:
        report = run_limit_cycle(spec.base.with_mode(CycleMode.AZD).with_tau_cp(tau_cp), q)
    except ThermalizationError as exc:
        return SweepRow(tau_cp, None, base_value, None, None, None, False, None, str(exc))
    expected = _EXPECTED[obs]
    value = _figure(report, obs)
    if report.regime is expected and baseline.regime is expected:
        ratio, note = value / base_value, ""
    else:
        ratio = None
        note = f"regime {report.regime.value} (baseline {baseline.regime.value}); ratio withheld"
    return SweepRow(tau_cp, value, base_value, ratio, report.n_dc_hot, report.n_dc_cold, True,
                    report.regime.value, note)


def _markov_hot_time(config: OttoConfig) -> float:
    start = gibbs_state(config.omega_c, config.beta_c)
    return markovian_thermalization_stroke(
        start, config.hot_bath, config.omega_h, config.criterion, config.beta_h,
        config.hot_schedule.lambda_bar,
    ).duration


def _thermalization_row(tau_cp: float, spec: SweepSpec, baseline: float, q: QuadratureConfig) -> SweepRow:
    cfg = spec.base.with_tau_cp(tau_cp)
    start = gibbs_state(cfg.omega_c, cfg.beta_c)
    try:
        rec = run_thermalization_stroke(
            start, cfg.hot_bath, cfg.omega_h, cfg.hot_schedule, cfg.criterion, cfg.beta_h, q,
            rule=cfg.window_rule,
        )
    except ThermalizationError as exc:
        return SweepRow(tau_cp, None, baseline, None, None, None, False, None, str(exc))
    # ratio > 1 means the modulated stroke thermalizes faster than the Markov one
    return SweepRow(tau_cp, rec.duration, baseline, baseline / rec.duration, rec.n_dc, None, True)


def _run_rows(worker, grid, jobs: int):
    if jobs is None or jobs <= 1 or len(grid) == 1:
        return [worker(t) for t in grid]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, grid, chunksize=max(1, len(grid) // (4 * jobs))))


def qa_sweep(spec: SweepSpec, q: QuadratureConfig = DEFAULT_QUADRATURE, jobs: int = 1) -> list[SweepRow]:
    """AZD cycle at every tau_cp of the grid, ratioed against the Markov baseline.

    Power and cooling-rate ratios use magnitudes, and only when the modulated and
    Markov cycles are both in the regime the observable belongs to.
    """
    if spec.observable is Observable.THERMALIZATION_TIME:
        baseline_time = _markov_hot_time(spec.base)
        worker = partial(_thermalization_row, spec=spec, baseline=baseline_time, q=q)
    else:
        baseline = markov_baseline(spec.base, q)
        worker = partial(_cycle_row, spec=spec, baseline=baseline, q=q)
    rows = _run_rows(worker, spec.tau_cp_grid, jobs)
    if not any(r.converged for r in rows):
        raise SweepError(f"no grid point converged ({len(rows)} tried); first failure: {rows[0].note}")
    return rows


def thermalization_time_sweep(spec: SweepSpec, q: QuadratureConfig = DEFAULT_QUADRATURE,
                              jobs: int = 1) -> tuple[list[tuple], float]:
    """Hot-stroke thermalization time per tau_cp and the Markov reference time.

    Non-converged grid points carry tau_th = nan and n_dc = None.
    """
    if spec.observable is not Observable.THERMALIZATION_TIME:
        raise ValueError("thermalization_time_sweep needs observable = thermalization_time")
    rows = qa_sweep(spec, q, jobs)
    curve = [(r.tau_cp, r.value if r.converged else math.nan, r.n_dc_hot) for r in rows]
    return curve, rows[0].baseline


@dataclass(frozen=True)
class OverlapData:
    nu: np.ndarray
    G: np.ndarray
    sinc_kernel: np.ndarray
    overlap: float


def overlap_dataset(model: SpectralModel, omega: float, t: float, n: int = 4001,
                    q: QuadratureConfig = DEFAULT_QUADRATURE) -> OverlapData:
    """Spectrum and t*sinc((nu - omega) t) sampled on the truncated domain around omega.

    ``overlap`` is the full integral of their product, i.e. R(omega, t).
    """
    if not t > 0:
        raise ValueError("t must be positive")
    half = q.window_halfwidth_factor * max(model.width, 2 * math.pi / t)
    nu = np.linspace(omega - half, omega + half, n)
    if n % 2 == 0:
        nu = np.sort(np.append(nu, omega))
    g = spectral_density(model, nu)
    kernel = t * np.sinc((nu - omega) * t / np.pi)
    return OverlapData(nu, g, kernel, response_coefficient(model, omega, t, q))

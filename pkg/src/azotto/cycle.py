"""Four-stroke Otto cycle of a two-level working medium.

A --(w_c -> w_h, unitary)--> B --(hot bath)--> C --(w_h -> w_c, unitary)--> D --(cold bath)--> A

Energies are <E> = (w/2)(p2 - p1). The cycle starts from the cold Gibbs state
at A and is closed there: with epsilon-thermalization on both baths one pass
from Gibbs is already the limit cycle up to epsilon, and the residual
|p1(end of cold stroke) - p1(A)| is reported as ``closure_gap``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum

from .dynamics import (
    ModulationSchedule,
    QubitState,
    StrokeRecord,
    ThermalizationCriterion,
    ThermalizationError,
    WindowRule,
    gibbs_state,
    markovian_thermalization_stroke,
    run_thermalization_stroke,
)
from .spectral import DEFAULT_QUADRATURE, QuadratureConfig, SpectralModel, markovian_rate

__all__ = [
    "CycleMode",
    "Regime",
    "OttoConfig",
    "CycleReport",
    "UndefinedFigureOfMerit",
    "run_limit_cycle",
    "efficiency",
    "cooling_rate_and_cop",
    "classify_regime",
]


class CycleMode(str, Enum):
    AZD = "azd"
    MARKOVIAN = "markovian"


class Regime(str, Enum):
    ENGINE = "engine"
    REFRIGERATOR = "refrigerator"
    HEAT_DISTRIBUTOR = "heat_distributor"
    OTHER = "other"


class UndefinedFigureOfMerit(ArithmeticError):
    pass


@dataclass(frozen=True)
class OttoConfig:
    omega_c: float
    omega_h: float
    beta_h: float
    beta_c: float
    hot_bath: SpectralModel
    cold_bath: SpectralModel
    hot_schedule: ModulationSchedule
    cold_schedule: ModulationSchedule
    criterion: ThermalizationCriterion
    tau_u1: float = 0.0
    tau_u2: float = 0.0
    mode: CycleMode = CycleMode.AZD
    window_rule: WindowRule = WindowRule.CLOSED_FORM

    def __post_init__(self):
        object.__setattr__(self, "mode", CycleMode(self.mode))
        object.__setattr__(self, "window_rule", WindowRule(self.window_rule))
        for name in ("omega_c", "omega_h", "beta_h", "beta_c"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v!r}")
        # equality is admitted so the degenerate single-temperature cycle can be run
        if self.beta_c < self.beta_h:
            raise ValueError("beta_c must be >= beta_h (the cold bath is the colder one)")
        for name in ("tau_u1", "tau_u2"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be nonnegative, got {v!r}")
        checks = (
            ("hot_bath", self.hot_bath, self.omega_h, self.beta_h),
            ("cold_bath", self.cold_bath, self.omega_c, self.beta_c),
        )
        for name, bath, omega, beta in checks:
            if not math.isclose(bath.omega_ref, omega, rel_tol=1e-12):
                raise ValueError(f"{name}.omega_ref ({bath.omega_ref}) must equal the stroke frequency {omega}")
            if not math.isclose(bath.beta, beta, rel_tol=1e-12):
                raise ValueError(f"{name}.beta ({bath.beta}) must equal the bath inverse temperature {beta}")

    def with_mode(self, mode: CycleMode) -> "OttoConfig":
        return replace(self, mode=CycleMode(mode))

    def with_tau_cp(self, tau_cp: float) -> "OttoConfig":
        return replace(
            self,
            hot_schedule=replace(self.hot_schedule, tau_cp=tau_cp),
            cold_schedule=replace(self.cold_schedule, tau_cp=tau_cp),
        )

    def to_record(self) -> dict:
        """Flat key/value echo of every input."""
        out = {}
        for key, value in asdict(self).items():
            if isinstance(value, dict):
                for sub, v in value.items():
                    out[f"{key}.{sub}"] = v.value if isinstance(v, Enum) else v
            else:
                out[key] = value.value if isinstance(value, Enum) else value
        return out


@dataclass
class CycleReport:
    E_A: float
    E_B: float
    E_C: float
    E_D: float
    Q_h: float
    Q_c: float
    E_AB: float
    E_CD: float
    W: float
    tau_h: float
    tau_c: float
    tau_total: float
    P: float
    kappa: float
    regime: Regime
    n_dc_hot: int
    n_dc_cold: int
    closure_gap: float
    mode: CycleMode
    eta: float | None = None
    cop: float | None = None
    hot_stroke: StrokeRecord | None = field(default=None, repr=False)
    cold_stroke: StrokeRecord | None = field(default=None, repr=False)

    @property
    def power_magnitude(self) -> float:
        return abs(self.P)

    @property
    def first_law_residual(self) -> float:
        return self.Q_h + self.Q_c + self.E_AB + self.E_CD

    def to_record(self, config: OttoConfig | None = None) -> dict:
        rec = {
            k: (v.value if isinstance(v, Enum) else v)
            for k, v in self.__dict__.items()
            if k not in ("hot_stroke", "cold_stroke")
        }
        rec["power_magnitude"] = self.power_magnitude
        if config is not None:
            rec.update({f"config.{k}": v for k, v in config.to_record().items()})
        return rec


def classify_regime(Q_h: float, Q_c: float, W: float) -> Regime:
    if Q_h > 0 and Q_c < 0 and W < 0:
        return Regime.ENGINE
    if Q_h < 0 and Q_c > 0 and W > 0:
        return Regime.REFRIGERATOR
    if Q_c < 0 and W > 0:
        return Regime.HEAT_DISTRIBUTOR
    return Regime.OTHER


def efficiency(report: CycleReport) -> float:
    """eta = -W / Q_h."""
    if report.Q_h == 0:
        raise UndefinedFigureOfMerit("efficiency undefined: Q_h = 0")
    return -report.W / report.Q_h


def cooling_rate_and_cop(report: CycleReport) -> tuple[float, float]:
    if not report.tau_total > 0:
        raise UndefinedFigureOfMerit("cooling rate undefined: non-positive cycle period")
    work_in = report.E_AB + report.E_CD
    if work_in == 0:
        raise UndefinedFigureOfMerit("CoP undefined: zero work input")
    return report.Q_c / report.tau_total, report.Q_c / work_in


def _stroke(config: OttoConfig, initial: QubitState, bath: SpectralModel, omega: float,
            schedule: ModulationSchedule, beta: float, q: QuadratureConfig,
            trajectory: bool) -> StrokeRecord:
    if config.mode is CycleMode.MARKOVIAN:
        return markovian_thermalization_stroke(
            initial, bath, omega, config.criterion, beta, schedule.lambda_bar, trajectory=trajectory
        )
    return run_thermalization_stroke(
        initial, bath, omega, schedule, config.criterion, beta, q,
        trajectory=trajectory, rule=config.window_rule,
    )


def run_limit_cycle(config: OttoConfig, q: QuadratureConfig = DEFAULT_QUADRATURE,
                    trajectory: bool = False) -> CycleReport:
    if config.mode is CycleMode.MARKOVIAN and markovian_rate(config.hot_bath, config.omega_h) == 0:
        raise ThermalizationError("Markovian cycle has no heat flow: G_h(omega_h) = 0", math.inf)

    w_c, w_h = config.omega_c, config.omega_h
    state_a = gibbs_state(w_c, config.beta_c)
    e_a = state_a.energy(w_c)
    e_b = state_a.energy(w_h)

    hot = _stroke(config, state_a, config.hot_bath, w_h, config.hot_schedule, config.beta_h, q, trajectory)
    state_c = hot.final_state
    e_c = state_c.energy(w_h)
    e_d = state_c.energy(w_c)

    cold = _stroke(config, state_c, config.cold_bath, w_c, config.cold_schedule, config.beta_c, q, trajectory)

    q_h = e_c - e_b
    q_c = e_a - e_d
    e_ab = e_b - e_a
    e_cd = e_d - e_c
    work = -(q_h + q_c)
    tau = config.tau_u1 + hot.duration + config.tau_u2 + cold.duration
    if not tau > 0:
        raise ValueError("cycle period must be positive; give the unitary strokes a duration")

    report = CycleReport(
        E_A=e_a, E_B=e_b, E_C=e_c, E_D=e_d,
        Q_h=q_h, Q_c=q_c, E_AB=e_ab, E_CD=e_cd, W=work,
        tau_h=hot.duration, tau_c=cold.duration, tau_total=tau,
        P=work / tau, kappa=q_c / tau,
        regime=classify_regime(q_h, q_c, work),
        n_dc_hot=hot.n_dc, n_dc_cold=cold.n_dc,
        closure_gap=abs(cold.final_state.p1 - state_a.p1),
        mode=config.mode,
        hot_stroke=hot, cold_stroke=cold,
    )
    if q_h != 0:
        report.eta = efficiency(report)
    if e_ab + e_cd != 0:
        report.cop = cooling_rate_and_cop(report)[1]
    return report

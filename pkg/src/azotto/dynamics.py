"""Thermalization strokes of a two-level working medium under step-function coupling.

Populations obey the rate equation

    dp1/dt = 2 lambda(t)^2 [R(w, t) p2 - R(-w, t) p1],   p2 = 1 - p1,

with p1 the ground-state population. While coupled, a window of length tau
maps p1 affinely, p1 -> decay * p1 + offset; while decoupled nothing moves.
The time argument of R restarts at zero at the start of every coupling
window, so every window of a stroke applies the same map.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .spectral import (
    DEFAULT_QUADRATURE,
    QuadratureConfig,
    SpectralModel,
    accumulated_rates,
    markovian_rate,
    response_coefficients,
)

__all__ = [
    "QubitState",
    "ModulationSchedule",
    "ThermalizationCriterion",
    "Trajectory",
    "StrokeRecord",
    "ThermalizationError",
    "WindowRule",
    "gibbs_state",
    "window_map",
    "evolve_coupling_window",
    "evolve_decoupling_window",
    "evolve_markov",
    "run_thermalization_stroke",
    "markovian_thermalization_stroke",
    "detect_nonmarkovianity",
]

_NORM_TOL = 1e-12


@dataclass(frozen=True)
class QubitState:
    """Diagonal qubit state: p1 = ground (-w/2), p2 = excited (+w/2)."""

    p1: float
    p2: float

    def __post_init__(self):
        for name in ("p1", "p2"):
            v = getattr(self, name)
            if not (math.isfinite(v) and -_NORM_TOL <= v <= 1 + _NORM_TOL):
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}")
        if abs(self.p1 + self.p2 - 1.0) > _NORM_TOL:
            raise ValueError(f"populations must sum to 1, got {self.p1 + self.p2!r}")

    @classmethod
    def from_p1(cls, p1: float) -> "QubitState":
        p1 = min(max(float(p1), 0.0), 1.0)
        return cls(p1, 1.0 - p1)

    def energy(self, omega: float) -> float:
        return 0.5 * omega * (self.p2 - self.p1)

    def distance(self, other: "QubitState") -> float:
        return abs(self.p1 - other.p1)


@dataclass(frozen=True)
class ModulationSchedule:
    tau_cp: float
    tau_dc: float = 0.0
    lambda_bar: float = 1.0
    max_windows: int = 10_000

    def __post_init__(self):
        if not (math.isfinite(self.tau_cp) and self.tau_cp > 0):
            raise ValueError(f"tau_cp must be positive, got {self.tau_cp!r}")
        if not (math.isfinite(self.tau_dc) and self.tau_dc >= 0):
            raise ValueError(f"tau_dc must be nonnegative, got {self.tau_dc!r}")
        if not (math.isfinite(self.lambda_bar) and self.lambda_bar >= 0):
            raise ValueError(f"lambda_bar must be nonnegative, got {self.lambda_bar!r}")
        if int(self.max_windows) < 1:
            raise ValueError("max_windows must be at least 1")


@dataclass(frozen=True)
class ThermalizationCriterion:
    epsilon: float

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon!r}")


@dataclass
class Trajectory:
    time: list = field(default_factory=list)
    p1: list = field(default_factory=list)
    window_kind: list = field(default_factory=list)

    def extend(self, times, p1s, kind: str):
        self.time.extend(float(t) for t in times)
        self.p1.extend(float(p) for p in p1s)
        self.window_kind.extend([kind] * len(times))


@dataclass
class StrokeRecord:
    duration: float
    n_cp: int
    n_dc: int
    final_state: QubitState
    distance: float
    converged: bool = True
    trajectory: Trajectory | None = None


class ThermalizationError(RuntimeError):
    """A stroke hit its window cap (or has zero rates) without reaching epsilon."""

    def __init__(self, message: str, best_distance: float, record: StrokeRecord | None = None):
        super().__init__(f"{message} (best distance {best_distance:.3e})")
        self.best_distance = best_distance
        self.record = record


class WindowRule(str, Enum):
    """How a coupling window is propagated.

    ``closed_form`` uses J+ and J- only and is exact when R(-w, t) / R(w, t)
    is constant in time; ``exact`` integrates the time-dependent rates
    (Duhamel form) and costs a few hundred extra quadratures per stroke.
    """

    CLOSED_FORM = "closed_form"
    EXACT = "exact"


def gibbs_state(omega: float, beta: float) -> QubitState:
    if not (omega > 0 and beta > 0):
        raise ValueError("gibbs_state needs positive omega and beta")
    # p1 / p2 = exp(beta * omega)
    p2 = 1.0 / (1.0 + math.exp(beta * omega))
    return QubitState(1.0 - p2, p2)


def _closed_form_map(model, omega, times, lam2, q):
    jp = lam2 * accumulated_rates(model, omega, times, q)
    jm = lam2 * accumulated_rates(model, -omega, times, q)
    b = jp + jm
    decay = np.exp(-b)
    with np.errstate(invalid="ignore", divide="ignore"):
        offset = np.where(b > 0, jp / b * -np.expm1(-b), 0.0)
    return decay, offset


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def _exact_map(model, omega, times, lam2, q):
    # offset(t) = int_0^t 2 lam2 R+(s) exp(B(s) - B(t)) ds, B = lam2 (J+ + J-)
    omega = float(omega)
    fastest = abs(omega) + abs(model.feature) + q.window_halfwidth_factor * model.width
    h_max = 0.5 * math.pi / fastest
    edges = np.concatenate([[0.0], times])
    nodes, weights, owner = [], [], []
    for k, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        if hi <= lo:
            continue
        m = max(1, math.ceil((hi - lo) / h_max))
        sub = np.linspace(lo, hi, m + 1)
        half = 0.5 * np.diff(sub)[:, None]
        mid = 0.5 * (sub[1:] + sub[:-1])[:, None]
        nodes.append((mid + half * _GL_X).ravel())
        weights.append((half * _GL_W).ravel())
        owner.append(np.full(m * _GL_X.size, k))
    s = np.concatenate(nodes)
    w = np.concatenate(weights)
    owner = np.concatenate(owner)
    rp = response_coefficients(model, omega, s, q)
    b_nodes = lam2 * (accumulated_rates(model, omega, s, q) + accumulated_rates(model, -omega, s, q))
    b_times = lam2 * (accumulated_rates(model, omega, times, q) + accumulated_rates(model, -omega, times, q))
    ref = b_times[-1] if b_times.size else 0.0
    pieces = np.bincount(owner, w * 2.0 * lam2 * rp * np.exp(b_nodes - ref), minlength=times.size)
    offset = np.cumsum(pieces) * np.exp(ref - b_times)
    return np.exp(-b_times), offset


def window_map(
    model: SpectralModel,
    omega: float,
    tau,
    lambda_bar: float = 1.0,
    q: QuadratureConfig = DEFAULT_QUADRATURE,
    rule: WindowRule = WindowRule.CLOSED_FORM,
):
    """Affine coefficients (decay, offset) with p1(tau) = decay * p1(0) + offset.

    ``tau`` may be an increasing array of times within one window.
    """
    times = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("window times must be nonnegative and increasing")
    lam2 = float(lambda_bar) ** 2
    if WindowRule(rule) is WindowRule.EXACT:
        decay, offset = _exact_map(model, omega, times, lam2, q)
    else:
        decay, offset = _closed_form_map(model, omega, times, lam2, q)
    if np.ndim(tau) == 0:
        return float(decay[0]), float(offset[0])
    return decay, offset


def evolve_coupling_window(
    initial: QubitState,
    model: SpectralModel,
    omega: float,
    tau: float,
    lambda_bar: float = 1.0,
    q: QuadratureConfig = DEFAULT_QUADRATURE,
    rule: WindowRule = WindowRule.CLOSED_FORM,
) -> QubitState:
    if tau == 0:
        return initial
    decay, offset = window_map(model, omega, tau, lambda_bar, q, rule)
    return QubitState.from_p1(decay * initial.p1 + offset)


def evolve_decoupling_window(initial: QubitState, tau: float) -> QubitState:
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    return initial


def _markov_rates(model, omega, lambda_bar):
    lam2 = lambda_bar**2
    return 2 * lam2 * markovian_rate(model, omega), 2 * lam2 * markovian_rate(model, -omega)


def evolve_markov(initial: QubitState, model: SpectralModel, omega: float, t: float,
                  lambda_bar: float = 1.0) -> QubitState:
    """Constant-rate (Markov limit) evolution for a time t."""
    up, down = _markov_rates(model, omega, lambda_bar)
    k = up + down
    if k == 0 or t == 0:
        return initial
    p_eq = up / k
    return QubitState.from_p1(p_eq + (initial.p1 - p_eq) * math.exp(-k * t))


def run_thermalization_stroke(
    initial: QubitState,
    model: SpectralModel,
    omega: float,
    schedule: ModulationSchedule,
    criterion: ThermalizationCriterion,
    target_beta: float,
    q: QuadratureConfig = DEFAULT_QUADRATURE,
    trajectory: bool = False,
    samples_per_window: int = 32,
    rule: WindowRule = WindowRule.CLOSED_FORM,
) -> StrokeRecord:
    """Alternate coupling / decoupling windows until p1 is within epsilon of Gibbs.

    Convergence is tested after each coupling window; the stroke ends there,
    so n_dc = n_cp - 1. Raises ThermalizationError after ``max_windows``
    coupling windows (the partial record rides on the exception).
    """
    target = gibbs_state(omega, target_beta).p1
    eps = criterion.epsilon
    tau_cp, tau_dc = schedule.tau_cp, schedule.tau_dc
    decay, offset = window_map(model, omega, tau_cp, schedule.lambda_bar, q, rule)

    traj = None
    if trajectory:
        traj = Trajectory()
        sample_t = np.linspace(0.0, tau_cp, samples_per_window + 1)[1:]
        s_decay, s_offset = window_map(model, omega, sample_t, schedule.lambda_bar, q, rule)

    p1 = initial.p1
    best = math.inf
    clock = 0.0
    for n in range(1, int(schedule.max_windows) + 1):
        if traj is not None:
            traj.extend([clock], [p1], "coupling")
            traj.extend(clock + sample_t, s_decay * p1 + s_offset, "coupling")
        p1 = decay * p1 + offset
        clock += tau_cp
        dist = abs(p1 - target)
        best = min(best, dist)
        if dist <= eps:
            return StrokeRecord(clock, n, n - 1, QubitState.from_p1(p1), dist, True, traj)
        if traj is not None:
            traj.extend([clock, clock + tau_dc], [p1, p1], "decoupling")
        clock += tau_dc

    n = int(schedule.max_windows)
    record = StrokeRecord(clock - tau_dc, n, n - 1, QubitState.from_p1(p1), abs(p1 - target), False, traj)
    raise ThermalizationError(f"no epsilon-thermalization within {n} coupling windows", best, record)


def markovian_thermalization_stroke(
    initial: QubitState,
    model: SpectralModel,
    omega: float,
    criterion: ThermalizationCriterion,
    target_beta: float,
    lambda_bar: float = 1.0,
    trajectory: bool = False,
    samples: int = 64,
) -> StrokeRecord:
    """Continuous coupling with constant rates; duration is the analytic first passage."""
    target = gibbs_state(omega, target_beta).p1
    eps = criterion.epsilon
    d0 = initial.p1 - target
    if abs(d0) <= eps:
        duration = 0.0
    else:
        up, down = _markov_rates(model, omega, lambda_bar)
        k = up + down
        if k == 0:
            raise ThermalizationError("zero Markov rates: bath spectrum vanishes at the working frequency", abs(d0))
        d_inf = up / k - target
        level = math.copysign(eps, d0)
        # d(t) = d_inf + (d0 - d_inf) exp(-k t) moves monotonically from d0 toward d_inf
        ratio = (level - d_inf) / (d0 - d_inf)
        if not 0 < ratio < 1:
            raise ThermalizationError("Markov steady state lies outside the epsilon ball", abs(d_inf))
        duration = -math.log(ratio) / k
    final = evolve_markov(initial, model, omega, duration, lambda_bar)
    traj = None
    if trajectory:
        traj = Trajectory()
        ts = np.linspace(0.0, duration, samples + 1)
        traj.extend(ts, [evolve_markov(initial, model, omega, t, lambda_bar).p1 for t in ts], "coupling")
    return StrokeRecord(duration, 1, 0, final, abs(final.p1 - target), True, traj)


def detect_nonmarkovianity(model: SpectralModel, omega: float, t_grid,
                           q: QuadratureConfig = DEFAULT_QUADRATURE) -> list[tuple[float, float]]:
    """Grid points where R(omega, t) < 0, i.e. witnesses of non-Markovian dynamics."""
    ts = np.asarray(t_grid, dtype=float)
    if ts.size == 0 or np.any(np.diff(ts) <= 0):
        raise ValueError("t_grid must be nonempty and strictly increasing")
    r = response_coefficients(model, omega, ts, q)
    return [(float(t), float(v)) for t, v in zip(ts, r) if v < 0]

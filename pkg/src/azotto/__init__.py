"""Finite-time quantum Otto cycles with anti-Zeno coupling/decoupling strokes."""
from .cycle import CycleMode, CycleReport, OttoConfig, Regime, classify_regime, cooling_rate_and_cop, efficiency, run_limit_cycle
from .dynamics import (
    ModulationSchedule,
    QubitState,
    StrokeRecord,
    ThermalizationCriterion,
    ThermalizationError,
    WindowRule,
    detect_nonmarkovianity,
    evolve_coupling_window,
    evolve_decoupling_window,
    gibbs_state,
    markovian_thermalization_stroke,
    run_thermalization_stroke,
)
from .spectral import (
    DEFAULT_QUADRATURE,
    QuadratureConfig,
    QuadratureError,
    SpectralModel,
    SpectrumKind,
    accumulated_rate,
    markovian_rate,
    response_coefficient,
    spectral_density,
)
from .sweep import Observable, SweepError, SweepRow, SweepSpec, markov_baseline, overlap_dataset, qa_sweep, thermalization_time_sweep

__version__ = "0.1.0"

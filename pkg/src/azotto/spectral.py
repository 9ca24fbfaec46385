"""Bath spectral response functions and the sinc-kernel response coefficients.

Units follow hbar = k_B = 1 throughout. A bath is described by its spectral
response G(nu) on nu >= 0; the nu < 0 branch is fixed by detailed balance,
G(-|nu|) = exp(-beta |nu|) G(|nu|).

The time-dependent rates are convolutions of G with the kernel
sin((nu - omega) t) / (nu - omega), evaluated by adaptive Gauss-Kronrod
quadrature on panels aligned with the kernel's zero crossings.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "SpectrumKind",
    "SpectralModel",
    "QuadratureConfig",
    "QuadratureError",
    "DEFAULT_QUADRATURE",
    "spectral_density",
    "response_coefficient",
    "markovian_rate",
    "accumulated_rate",
    "response_coefficients",
    "accumulated_rates",
    "integration_intervals",
]


class SpectrumKind(str, Enum):
    LORENTZIAN = "lorentzian"
    SUPER_OHMIC = "super_ohmic"


class QuadratureError(RuntimeError):
    """Adaptive quadrature ran out of subdivisions before meeting tolerance."""

    def __init__(self, message: str, error_estimate: float, value: float):
        super().__init__(f"{message} (error estimate {error_estimate:.3e}, value {value:.6e})")
        self.error_estimate = error_estimate
        self.value = value


@dataclass(frozen=True)
class SpectralModel:
    """Spectral response of one thermal bath.

    ``width`` is Gamma for the Lorentzian and nu_bar for the super-Ohmic
    family; the bath correlation time is ``1 / width``. The Lorentzian
    peaks at ``omega_ref + detuning``; the super-Ohmic spectrum switches on
    at ``omega_ref - detuning``.
    """

    kind: SpectrumKind
    gamma0: float
    width: float
    detuning: float
    beta: float
    omega_ref: float
    ohmic_exponent: float = 3.0

    def __post_init__(self):
        object.__setattr__(self, "kind", SpectrumKind(self.kind))
        for name in ("gamma0", "width", "beta", "omega_ref"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")
        if not math.isfinite(self.detuning):
            raise ValueError(f"detuning must be finite, got {self.detuning!r}")
        if self.kind is SpectrumKind.SUPER_OHMIC and not (
            math.isfinite(self.ohmic_exponent) and self.ohmic_exponent > 1
        ):
            raise ValueError(
                f"ohmic_exponent must exceed 1 for a super-Ohmic bath, got {self.ohmic_exponent!r}"
            )

    @property
    def correlation_time(self) -> float:
        return 1.0 / self.width

    @property
    def feature(self) -> float:
        """Frequency where the positive branch is anchored (peak or edge)."""
        if self.kind is SpectrumKind.LORENTZIAN:
            return self.omega_ref + self.detuning
        return self.omega_ref - self.detuning

    def positive_branch(self, nu):
        nu = np.asarray(nu, dtype=float)
        if self.kind is SpectrumKind.LORENTZIAN:
            d = nu - self.feature
            return self.gamma0 * self.width**2 / (d * d + self.width**2)
        s = self.ohmic_exponent
        x = nu - self.feature
        out = np.zeros_like(x)
        on = x > 0
        xs = x[on]
        # log form keeps x**s from overflowing before the exponential cutoff
        out[on] = self.gamma0 * self.width * np.exp(
            s * np.log(xs / self.width) - xs / self.width
        )
        return out

    def support(self, factor: float) -> list[tuple[float, float]]:
        """Intervals carrying essentially all spectral weight, both branches."""
        if self.kind is SpectrumKind.LORENTZIAN:
            lo, hi = self.feature - factor * self.width, self.feature + factor * self.width
        else:
            lo, hi = self.feature, self.feature + factor * self.width
        out = []
        if hi > 0:
            out.append((max(lo, 0.0), hi))
            out.append((-hi, -max(lo, 0.0)))
        return out

    def kinks(self) -> list[float]:
        """Points where G is not smooth (branch junction, spectral edge)."""
        pts = [0.0]
        if self.kind is SpectrumKind.SUPER_OHMIC and self.feature > 0:
            pts += [self.feature, -self.feature]
        return pts


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    window_halfwidth_factor: float = 40.0
    max_subdivisions: int = 20000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("quadrature tolerances must be strictly positive")
        if not self.window_halfwidth_factor > 0:
            raise ValueError("window_halfwidth_factor must be positive")
        if int(self.max_subdivisions) < 1:
            raise ValueError("max_subdivisions must be at least 1")


DEFAULT_QUADRATURE = QuadratureConfig()


def spectral_density(model: SpectralModel, nu):
    """G(nu) for scalar or array ``nu``; negative frequencies use the KMS branch."""
    arr = np.asarray(nu, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("spectral_density requires finite frequencies")
    mag = np.abs(arr)
    g = model.positive_branch(mag)
    g = np.where(arr < 0, np.exp(-model.beta * mag) * g, g)
    if np.ndim(nu) == 0:
        return float(g)
    return g


def markovian_rate(model: SpectralModel, omega: float) -> float:
    """Long-time limit pi * G(omega) of the response coefficient."""
    return math.pi * spectral_density(model, omega)


# 15-point Kronrod rule with embedded 7-point Gauss rule (QUADPACK qk15).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
# Gauss nodes sit at odd positions of the Kronrod set (XGK[1], XGK[3], ...).
_GW = np.zeros(15)
_GW[1:7:2] = _WG[:3]
_GW[7] = _WG[3]
_GW[9:15:2] = _WG[2::-1]


def _gk15(f, a, b):
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[:, None] + half[:, None] * _NODES[None, :]
    fx = f(x)
    k = half * (fx @ _KW)
    g = half * (fx @ _GW)
    return k, np.abs(k - g)


def _adaptive(f, a, b, group, ngroups: int, q: QuadratureConfig) -> np.ndarray:
    """Integrate ``f`` over panels [a, b]; panels sharing a ``group`` id are summed.

    ``f(x, group)`` receives a (panels, 15) node array and the panel group ids.
    Each group is refined independently until its own tolerance is met.
    """
    vals, errs = _gk15(lambda x: f(x, group), a, b)
    used = np.zeros(ngroups, dtype=int)
    while True:
        totals = np.bincount(group, vals, minlength=ngroups)
        errsum = np.bincount(group, errs, minlength=ngroups)
        tol = np.maximum(q.abs_tol, q.rel_tol * np.abs(totals))
        open_ = errsum > tol
        if not open_.any():
            return totals
        counts = np.bincount(group, minlength=ngroups)
        worst = np.zeros(ngroups)
        np.maximum.at(worst, group, errs)
        # split every panel carrying more than its even share of the budget,
        # and always the worst panel of each unfinished group
        bad = open_[group] & ((errs > tol[group] / counts[group]) | (errs >= worst[group]))
        used += np.bincount(group[bad], minlength=ngroups)
        if (used > q.max_subdivisions).any():
            g = int(np.argmax(np.where(open_, errsum, -1.0)))
            raise QuadratureError("quadrature did not converge", float(errsum[g]), float(totals[g]))
        ab, bb, gb = a[bad], b[bad], group[bad]
        mb = 0.5 * (ab + bb)
        na = np.concatenate([ab, mb])
        nb = np.concatenate([mb, bb])
        ng = np.concatenate([gb, gb])
        nv, ne = _gk15(lambda x: f(x, ng), na, nb)
        keep = ~bad
        a = np.concatenate([a[keep], na])
        b = np.concatenate([b[keep], nb])
        group = np.concatenate([group[keep], ng])
        vals = np.concatenate([vals[keep], nv])
        errs = np.concatenate([errs[keep], ne])


def _merge(intervals):
    intervals = sorted(intervals)
    out = [list(intervals[0])]
    for lo, hi in intervals[1:]:
        if lo <= out[-1][1]:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return [tuple(iv) for iv in out]


def integration_intervals(model: SpectralModel, center: float, t: float, q: QuadratureConfig):
    """Truncated integration domain for a kernel of time scale ``t`` at ``center``.

    The kernel window has half-width ``factor * max(width, 2 pi / t)``; the
    bath's support windows (both KMS branches) are added on top.
    """
    factor = q.window_halfwidth_factor
    half = factor * max(model.width, 2.0 * math.pi / t)
    return _merge([(center - half, center + half), *model.support(factor)])


def _panels(model: SpectralModel, center: float, spacing: float, q: QuadratureConfig, t: float):
    """Panel edges: kernel zeros every ``spacing``, refined inside the support."""
    fine = min(spacing, model.width)
    supp = model.support(q.window_halfwidth_factor)
    kinks = model.kinks()
    lo_all, hi_all = [], []
    for lo, hi in integration_intervals(model, center, t, q):
        k0 = math.ceil((lo - center) / spacing)
        k1 = math.floor((hi - center) / spacing)
        edges = [lo, hi, *(center + spacing * np.arange(k0, k1 + 1))]
        for slo, shi in supp:
            slo, shi = max(slo, lo), min(shi, hi)
            if shi > slo:
                n = max(1, math.ceil((shi - slo) / fine))
                edges.extend(np.linspace(slo, shi, n + 1))
        edges.extend(p for p in kinks if lo < p < hi)
        e = np.unique(np.asarray(edges, dtype=float))
        e = e[(e >= lo) & (e <= hi)]
        lo_all.append(e[:-1])
        hi_all.append(e[1:])
    a = np.concatenate(lo_all)
    b = np.concatenate(hi_all)
    keep = b > a
    return a[keep], b[keep]


def _check_times(name: str, times) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(times, dtype=float))
    if arr.ndim != 1 or not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError(f"{name} must be nonnegative finite times")
    return arr


# Panels per batch when many times are integrated in one call.
_BATCH_PANELS = 200_000


def _integrate(model, omega, times, kernel, q, power):
    omega = float(omega)
    # Below t_floor the kernel is flat over the spectrum to ~1e-16, so the result
    # scales as t**power; evaluating there avoids an unbounded kernel window.
    t_floor = 1e-8 / (abs(omega) + abs(model.feature) + model.width)
    scale = np.where(times < t_floor, (times / t_floor) ** power, 1.0)
    times = np.where(times > 0, np.maximum(times, t_floor), 0.0)
    out = np.zeros(times.size)
    live = np.flatnonzero(times > 0)
    batch_a, batch_b, batch_g, members = [], [], [], []
    size = 0

    def flush():
        nonlocal size
        if not members:
            return
        a = np.concatenate(batch_a)
        b = np.concatenate(batch_b)
        g = np.concatenate(batch_g)
        ts = times[np.asarray(members)]

        def f(x, grp):
            tt = ts[grp][:, None]
            return spectral_density(model, x) * kernel(x - omega, tt)

        out[np.asarray(members)] = _adaptive(f, a, b, g, len(members), q)
        batch_a.clear(); batch_b.clear(); batch_g.clear(); members.clear()
        size = 0

    for i in live:
        t = times[i]
        a, b = _panels(model, omega, math.pi / t, q, t)
        batch_a.append(a)
        batch_b.append(b)
        batch_g.append(np.full(a.size, len(members)))
        members.append(i)
        size += a.size
        if size >= _BATCH_PANELS:
            flush()
    flush()
    return out * scale


def _sinc_kernel(x, t):
    return t * np.sinc(x * t / math.pi)


def _sinc2_kernel(x, t):
    # 2 (1 - cos(x t)) / x**2 written without the removable singularity
    s = np.sinc(x * t / (2.0 * math.pi))
    return t * t * s * s


def response_coefficient(
    model: SpectralModel, omega: float, t: float, q: QuadratureConfig = DEFAULT_QUADRATURE
) -> float:
    """R(omega, t) = integral of G(nu) sin((nu - omega) t) / (nu - omega) over nu.

    Negative values signal non-Markovian dynamics.
    """
    return float(response_coefficients(model, omega, [t], q)[0])


def response_coefficients(model: SpectralModel, omega: float, times, q: QuadratureConfig = DEFAULT_QUADRATURE):
    """Vectorized :func:`response_coefficient` over an array of times."""
    return _integrate(model, omega, _check_times("t", times), _sinc_kernel, q, 1)


def accumulated_rate(
    model: SpectralModel, omega: float, T: float, q: QuadratureConfig = DEFAULT_QUADRATURE
) -> float:
    """J(T) = 2 * integral_0^T R(omega, t) dt, with the time integral done in closed form.

    Uses 2 (1 - cos(x T)) / x**2 = T**2 sinc(x T / 2)**2, which is nonnegative,
    so J(T) >= 0 even where R itself dips below zero.
    """
    return float(accumulated_rates(model, omega, [T], q)[0])


def accumulated_rates(model: SpectralModel, omega: float, times, q: QuadratureConfig = DEFAULT_QUADRATURE):
    """Vectorized :func:`accumulated_rate` over an array of durations."""
    return _integrate(model, omega, _check_times("T", times), _sinc2_kernel, q, 2)

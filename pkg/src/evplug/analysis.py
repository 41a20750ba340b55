"""Force/tilt wave analysis and strategy classification for insertion traces."""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .control import StrategyKind
from .trace import Trace


class UnclassifiableError(ValueError):
    pass


class Extremum(NamedTuple):
    t: float
    value: float
    kind: str  # "max" or "min"


class Delta(NamedTuple):
    value: float
    degenerate: bool = False


class ResponseTime(NamedTuple):
    mean: float
    max: float
    degenerate: bool = False


def _refine(x: np.ndarray, t: np.ndarray, i: int) -> tuple[float, float]:
    if i <= 0 or i >= len(x) - 1:
        return float(t[i]), float(x[i])
    a, b, c = x[i - 1], x[i], x[i + 1]
    denom = a - 2.0 * b + c
    if denom == 0.0:
        return float(t[i]), float(b)
    off = min(0.5, max(-0.5, 0.5 * (a - c) / denom))
    half = 0.5 * (t[i + 1] - t[i - 1])
    return float(t[i] + off * half), float(b - 0.25 * (a - c) * off)


def find_extrema(series, t=None, min_prominence: float | None = None,
                 refine: bool = True) -> list[Extremum]:
    """Alternating maxima and minima separated by at least ``min_prominence``.

    A turning point is accepted once the signal has moved ``min_prominence``
    away from it in both directions, so end points and small ripples are
    dropped.  The default floor is 10% of the peak-to-peak range.  With
    ``refine`` each extremum is placed on the parabola through its
    neighbouring samples.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or len(x) < 3:
        raise ValueError("need at least 3 samples")
    t = np.arange(len(x), dtype=float) if t is None else np.asarray(t, dtype=float)
    if t.shape != x.shape:
        raise ValueError("time and series lengths differ")
    ptp = float(np.ptp(x))
    thr = 0.1 * ptp if min_prominence is None else float(min_prominence)
    if ptp == 0.0 or ptp < thr:
        return []
    thr = max(thr, 1e-12 * max(1.0, ptp))

    picks: list[tuple[int, str]] = []
    direction = 0
    imax = imin = 0
    for i in range(1, len(x)):
        v = x[i]
        if direction == 0:
            if v > x[imax]:
                imax = i
            if v < x[imin]:
                imin = i
            if v - x[imin] >= thr:
                if imin > 0 and x[:imin].max() - x[imin] >= thr:
                    picks.append((imin, "min"))
                direction, imax = 1, i
            elif x[imax] - v >= thr:
                if imax > 0 and x[imax] - x[:imax].min() >= thr:
                    picks.append((imax, "max"))
                direction, imin = -1, i
        elif direction > 0:
            if v > x[imax]:
                imax = i
            elif x[imax] - v >= thr:
                picks.append((imax, "max"))
                direction, imin = -1, i
        else:
            if v < x[imin]:
                imin = i
            elif v - x[imin] >= thr:
                picks.append((imin, "min"))
                direction, imax = 1, i

    out = []
    for i, kind in picks:
        ti, vi = _refine(x, t, i) if refine else (float(t[i]), float(x[i]))
        out.append(Extremum(ti, vi, kind))
    return out


def max_consecutive_delta(extrema: list[Extremum]) -> Delta:
    if len(extrema) < 2:
        return Delta(0.0, True)
    vals = np.array([e.value for e in extrema])
    return Delta(float(np.max(np.abs(np.diff(vals)))))


def response_time(extrema: list[Extremum]) -> ResponseTime:
    """Mean and longest spacing between consecutive extrema."""
    if len(extrema) < 2:
        return ResponseTime(0.0, 0.0, True)
    gaps = np.diff([e.t for e in extrema])
    return ResponseTime(float(gaps.mean()), float(gaps.max()))


# ---------------------------------------------------------------- classification

def _detrend(x: np.ndarray, t: np.ndarray) -> np.ndarray:
    if len(x) < 2:
        return x - x.mean()
    coef = np.polyfit(t - t[0], x, 1)
    return x - np.polyval(coef, t - t[0])


def _autocorr(x: np.ndarray) -> np.ndarray:
    n = len(x)
    size = 1 << (2 * n - 1).bit_length()
    fx = np.fft.rfft(x, size)
    ac = np.fft.irfft(fx * np.conj(fx), size)[:n]
    return ac / ac[0] if ac[0] > 0 else np.zeros(n)


def dominant_period(x: np.ndarray, dt: float, min_corr: float = 0.2) -> float | None:
    """Lag of the first autocorrelation peak after the first zero crossing."""
    ac = _autocorr(x - x.mean())
    if not np.any(ac):
        return None
    neg = np.nonzero(ac < 0)[0]
    if len(neg) == 0:
        return None
    start = neg[0]
    seg = ac[start:len(ac) // 2 + 1]
    if len(seg) < 3:
        return None
    k = int(np.argmax(seg))
    if seg[k] < min_corr or k == 0 or k == len(seg) - 1:
        return None
    lag = start + k
    # parabolic refinement of the peak lag
    a, b, c = ac[lag - 1], ac[lag], ac[lag + 1]
    denom = a - 2 * b + c
    off = 0.5 * (a - c) / denom if denom != 0 else 0.0
    return float((lag + max(-0.5, min(0.5, off))) * dt)


def _bandpass(x: np.ndarray, dt: float, f0: float, width: float) -> np.ndarray:
    fx = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(len(x), dt)
    mask = (freqs >= f0 * (1 - width)) & (freqs <= f0 * (1 + width))
    return np.fft.irfft(fx * mask, len(x))


@dataclass(frozen=True)
class ClassifierSettings:
    dominance: float = 4.0     # energy ratio for "mainly affects"
    min_rms: float = 0.75      # N, band-passed RMS that counts as oscillation
    band: float = 0.3          # relative half-width around the dominant frequency
    phase_tol: float = 60.0    # deg around the quarter-period lag
    max_period: float = 2.0    # s, slowest oscillation searched for


class Classification(NamedTuple):
    kind: StrategyKind
    period: float | None
    rms_fx: float
    rms_fy: float
    phase: float | None


def analyze_oscillation(trace: Trace, settings: ClassifierSettings = ClassifierSettings()
                        ) -> Classification:
    t = trace.t
    if len(t) < 3:
        raise UnclassifiableError("trace has fewer than 3 samples")
    dt = float(np.median(np.diff(t)))
    fx = _detrend(trace.fx, t)
    fy = _detrend(trace.fy, t)
    duration = trace.duration

    ref = fx if np.var(fx) >= np.var(fy) else fy
    period = dominant_period(ref, dt)
    other = dominant_period(fy if ref is fx else fx, dt)
    if period is None:
        period = other
    if period is None or period > settings.max_period:
        loud = max(np.std(fx), np.std(fy)) >= settings.min_rms
        if loud and duration < settings.max_period:
            raise UnclassifiableError(
                f"trace of {duration:.3g} s is shorter than the slowest oscillation searched")
        return Classification(StrategyKind.STRAIGHT_BACK, None, 0.0, 0.0, None)
    if duration < period:
        raise UnclassifiableError(f"trace of {duration:.3g} s is shorter than one period")

    f0 = 1.0 / period
    bx = _bandpass(fx, dt, f0, settings.band)
    by = _bandpass(fy, dt, f0, settings.band)
    rx, ry = float(np.sqrt(np.mean(bx ** 2))), float(np.sqrt(np.mean(by ** 2)))
    sig_x, sig_y = rx >= settings.min_rms, ry >= settings.min_rms
    ratio = (ry * ry) / (rx * rx) if rx > 0 else math.inf

    phase = None
    if sig_x and sig_y:
        n = len(bx)
        size = 1 << (2 * n - 1).bit_length()
        cc = np.fft.irfft(np.fft.rfft(bx, size) * np.conj(np.fft.rfft(by, size)), size)
        max_lag = max(1, int(round(0.5 * period / dt)))
        lags = np.concatenate([np.arange(0, max_lag + 1), np.arange(-max_lag, 0)])
        vals = np.concatenate([cc[:max_lag + 1], cc[size - max_lag:]])
        lag = lags[int(np.argmax(vals))]
        phase = float(360.0 * lag * dt / period)

    # Quadrature is tested before dominance: wall loads during a jam add an
    # in-phase component that can skew the energy ratio of a spiral, while
    # a line rocking pattern never produces a quarter-period lag.
    if not sig_x and not sig_y:
        kind = StrategyKind.STRAIGHT_BACK
    elif phase is not None and abs(abs(phase) - 90.0) <= settings.phase_tol:
        kind = StrategyKind.SP
    elif sig_y and (not sig_x or ratio >= settings.dominance):
        kind = StrategyKind.LR
    elif sig_x and (not sig_y or 1.0 / ratio >= settings.dominance):
        kind = StrategyKind.UD
    else:
        kind = StrategyKind.LR if ry >= rx else StrategyKind.UD
    return Classification(kind, period, rx, ry, phase)


def classify_strategy(trace: Trace, settings: ClassifierSettings = ClassifierSettings()
                      ) -> StrategyKind:
    """Which rocking pattern produced this trace, judged from F_x and F_y.

    F_y-only oscillation is left-right, F_x-only up-down, both in quadrature
    a spiral, and no oscillation a straight push or pull.
    """
    return analyze_oscillation(trace, settings).kind


# ---------------------------------------------------------------- aggregates

@dataclass(frozen=True)
class DeltaStats:
    d_theta_x: float
    d_theta_y: float
    d_fx: float
    d_fy: float
    f_z_plugin: float
    f_z_plugout: float
    t_response: float
    t_response_max: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


QUANTITIES = ("d_theta_x", "d_theta_y", "d_fx", "d_fy", "f_z_plugin", "f_z_plugout",
              "t_response")
UNITS = {"d_theta_x": "deg", "d_theta_y": "deg", "d_fx": "N", "d_fy": "N",
         "f_z_plugin": "N", "f_z_plugout": "N", "t_response": "s", "t_response_max": "s"}


def _wave(series, t):
    return find_extrema(series, t) if len(series) >= 3 else []


def delta_stats(trace: Trace) -> DeltaStats:
    """Wave statistics of one trial; waves are read off the plug-in part."""
    if not len(trace):
        raise ValueError("empty trace")
    pin = trace.segment("plugin") if trace.meta.get("phase") != "plugout" else trace
    pout = trace.segment("plugout") if trace.meta.get("phase") != "plugin" else None
    t = pin.t
    ex_fx, ex_fy = _wave(pin.fx, t), _wave(pin.fy, t)
    d_fx = max_consecutive_delta(ex_fx).value
    d_fy = max_consecutive_delta(ex_fy).value
    rt = response_time(ex_fy if d_fy >= d_fx else ex_fx)
    if trace.meta.get("phase") == "plugout":
        fz_in, fz_out = 0.0, max(0.0, float(trace.fz.max()))
    else:
        fz_in = min(0.0, float(pin.fz.min()))
        fz_out = max(0.0, float(pout.fz.max())) if pout is not None and len(pout) else 0.0
    return DeltaStats(
        d_theta_x=max_consecutive_delta(_wave(pin.theta_x, t)).value,
        d_theta_y=max_consecutive_delta(_wave(pin.theta_y, t)).value,
        d_fx=d_fx, d_fy=d_fy, f_z_plugin=fz_in, f_z_plugout=fz_out,
        t_response=rt.mean, t_response_max=rt.max,
    )


class Summary(NamedTuple):
    mean: float
    max: float
    min: float
    std: float


@dataclass(frozen=True)
class SummaryStats:
    n: int
    rows: dict[str, Summary]

    def to_dict(self) -> dict:
        return {"n": self.n, "rows": {k: v._asdict() for k, v in self.rows.items()}}


def summarize(collection: Iterable[DeltaStats]) -> SummaryStats:
    """Mean, max, min and sample std of every wave quantity over a cohort."""
    items = list(collection)
    if not items:
        raise ValueError("empty collection")
    rows = {}
    for q in QUANTITIES + ("t_response_max",):
        vals = np.array(sorted(getattr(s, q) for s in items), dtype=float)
        std = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        mean = float(np.mean(vals))
        rows[q] = Summary(min(max(mean, vals[0]), vals[-1]), float(vals[-1]),
                          float(vals[0]), std)
    return SummaryStats(len(items), rows)


@dataclass(frozen=True)
class ForceRangeRow:
    mean_min: tuple[float, float, float]   # fx, fy, fz
    mean_max: tuple[float, float, float]

    def to_dict(self) -> dict:
        return {"mean_min": list(self.mean_min), "mean_max": list(self.mean_max)}


def force_ranges(groups: Mapping[str, Iterable[Trace]]) -> dict[str, ForceRangeRow]:
    """Per-strategy average of per-trace force minima and maxima."""
    out = {}
    for name, traces in groups.items():
        traces = list(traces)
        if not traces:
            raise ValueError(f"no traces for strategy {name}")
        mins = np.array(sorted(tuple(tr.data[:, 1:4].min(axis=0)) for tr in traces))
        maxs = np.array(sorted(tuple(tr.data[:, 1:4].max(axis=0)) for tr in traces))
        out[name] = ForceRangeRow(tuple(float(v) for v in mins.mean(axis=0)),
                                  tuple(float(v) for v in maxs.mean(axis=0)))
    return out

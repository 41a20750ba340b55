"""Seeded insertion trials and Monte Carlo strategy campaigns."""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .analysis import (QUANTITIES, UNITS, DeltaStats, ForceRangeRow, Summary,
                       SummaryStats, delta_stats, summarize)
from .config import CLOSED_LOOP, Config, parse_strategy
from .contact import (ContactState, MotionCommand, Wrench, sample_initial_error,
                      sample_sensor, step)
from .control import (Axes, StrategyKind, controller_init, plugin_step,
                      plugin_terminated, plugout_step, plugout_terminated)
from .operator import HumanOperator
from .pose import TiltPair, rotation_from_tilt, tilt_angles
from .stats import AnovaResult, TTestResult, paired_ttest, rm_anova
from .trace import Trace, TraceRecorder, load_trace, save_trace


@dataclass(frozen=True)
class TrialConfig:
    strategy: str = "SP"
    config: Config = field(default_factory=Config)
    seed: int = 0
    initial_error: TiltPair | None = None   # overrides the seeded draw

    def __post_init__(self):
        object.__setattr__(self, "strategy", parse_strategy(self.strategy))
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class TrialResult:
    strategy: str
    seed: int
    success: bool
    plugin_success: bool
    plugin_time: float
    plugout_time: float
    initial_error: TiltPair
    force_min: tuple[float, float, float]   # fx, fy, fz over the whole trace
    force_max: tuple[float, float, float]
    timed_out: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["initial_error"] = list(self.initial_error)
        d["force_min"] = list(self.force_min)
        d["force_max"] = list(self.force_max)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrialResult":
        d = dict(d)
        d["initial_error"] = TiltPair(*d["initial_error"])
        d["force_min"] = tuple(d["force_min"])
        d["force_max"] = tuple(d["force_max"])
        return cls(**d)


def trial_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent generators for the initial error and the sensor noise."""
    err_ss, noise_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(err_ss), np.random.default_rng(noise_ss)


def _measured_tilt(actual: TiltPair) -> TiltPair:
    return tilt_angles(rotation_from_tilt(actual))


def run_trial(tc: TrialConfig) -> tuple[TrialResult, Trace]:
    """Plug in with the configured strategy, then pull straight out."""
    cfg = tc.config
    socket, sensor, cs = cfg.socket, cfg.sensor, cfg.controller
    dt = cfg.campaign.dt_control
    n_max = int(math.ceil(cfg.campaign.timeout / dt - 1e-9))
    err_rng, noise_rng = trial_streams(tc.seed)
    err = tc.initial_error or sample_initial_error(err_rng, cfg.campaign.max_error)
    gains = controller_init(cs, v_const=cs.v_const, gain_convention=cs.gain_convention,
                            push_force=cs.push_force)
    closed = tc.strategy == CLOSED_LOOP
    if closed:
        sys = gains.axis_params()
        axes = Axes()
        human = None
    else:
        human = HumanOperator(StrategyKind(tc.strategy), cfg.strategy, cfg.operator)

    state = ContactState(tilt=err)
    rec = TraceRecorder()
    sample = sample_sensor(sensor, Wrench(), noise_rng)
    rec.add(0.0, sample, _measured_tilt(err), 0.0)
    correction = TiltPair(0.0, 0.0)
    depth_frac = 0.0

    i = 0
    plugin_done = False
    while i < n_max:
        i += 1
        t = i * dt
        if closed:
            axes, cmd = plugin_step(gains, sys, axes, sample, dt)
            correction = cmd.tilt_setpoint
        else:
            correction = human.command((i - 1) * dt, depth_frac)
        setpoint = TiltPair(err[0] + correction[0], err[1] + correction[1])
        state, w = step(socket, state, MotionCommand(setpoint, gains.v_const, gains.push_force), dt)
        depth_frac = state.depth / socket.full_depth
        sample = sample_sensor(sensor, w, noise_rng)
        rec.add(t, sample, _measured_tilt(state.tilt), state.depth)
        if closed:
            if plugin_terminated(sample, gains):
                plugin_done = True
                break
        else:
            human.feel(sample, dt)
            if state.depth >= socket.full_depth:
                plugin_done = True
                break
    plugin_time = i * dt
    seated = state.depth >= socket.full_depth
    plugin_end = plugin_time

    plugout_time = 0.0
    plugout_ok = False
    if seated:
        mode = StrategyKind(cs.plugout_mode)
        j = 0
        t0 = plugin_time
        while j < n_max:
            j += 1
            t = t0 + j * dt
            cmd = plugout_step(gains, correction, (j - 1) * dt, mode, cfg.strategy,
                               scale=state.depth / socket.full_depth)
            setpoint = TiltPair(err[0] + cmd.tilt_setpoint[0], err[1] + cmd.tilt_setpoint[1])
            state, w = step(socket, state, replace(cmd, tilt_setpoint=setpoint), dt)
            sample = sample_sensor(sensor, w, noise_rng)
            rec.add(t, sample, _measured_tilt(state.tilt), state.depth)
            if plugout_terminated(sample, gains, state.depth):
                plugout_ok = True
                break
        plugout_time = j * dt

    trace = rec.build(strategy=tc.strategy, seed=tc.seed, phase="both",
                      plugin_end=repr(plugin_end), full_depth=repr(socket.full_depth),
                      initial_error=f"{err[0]!r} {err[1]!r}")
    fmin = tuple(float(trace.data[:, k].min()) for k in (1, 2, 3))
    fmax = tuple(float(trace.data[:, k].max()) for k in (1, 2, 3))
    result = TrialResult(
        strategy=tc.strategy, seed=tc.seed, success=bool(seated and plugout_ok),
        plugin_success=bool(seated), plugin_time=plugin_time, plugout_time=plugout_time,
        initial_error=TiltPair(float(err[0]), float(err[1])),
        force_min=fmin, force_max=fmax,
        timed_out=not plugin_done or (seated and not plugout_ok),
    )
    return result, trace


# ---------------------------------------------------------------- campaigns

OPEN_LOOP = ("LR", "UD", "SP")
PAIRS = (("LR", "SP"), ("LR", "UD"), ("SP", "UD"))


class _Job(NamedTuple):
    strategy: str
    index: int
    seed: int
    config: Config
    trace_dir: str | None


class TrialRecord(NamedTuple):
    """What a campaign keeps of one trial: the result and its wave statistics."""
    index: int
    result: TrialResult
    deltas: DeltaStats | None


def trace_filename(strategy: str, index: int) -> str:
    return f"{strategy}_{index:05d}.csv"


def _run_job(job: _Job) -> TrialRecord:
    result, trace = run_trial(TrialConfig(job.strategy, job.config, job.seed))
    if job.trace_dir is not None:
        save_trace(trace.with_meta(index=job.index),
                   Path(job.trace_dir) / trace_filename(job.strategy, job.index))
    deltas = delta_stats(trace) if result.success else None
    return TrialRecord(job.index, result, deltas)


def _time_summary(values) -> Summary | None:
    vals = np.array(sorted(values), dtype=float)
    if not len(vals):
        return None
    std = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
    return Summary(float(vals.mean()), float(vals[-1]), float(vals[0]), std)


def compare_strategies(results: Mapping[str, Sequence[TrialResult]]
                       ) -> tuple[AnovaResult | None, dict[str, TTestResult]]:
    """RM-ANOVA and pairwise paired t-tests on plug-in time.

    Only the open-loop strategies enter, and only trial indices at which every
    one of them succeeded, so each trial index acts as one subject.
    """
    names = [s for s in OPEN_LOOP if s in results]
    if len(names) < 2:
        return None, {}
    n = min(len(results[s]) for s in names)
    common = [i for i in range(n) if all(results[s][i].success for s in names)]
    if len(common) < 2:
        return None, {}
    times = np.array([[results[s][i].plugin_time for s in names] for i in common])
    anova = rm_anova(times)
    ttests = {}
    for a, b in PAIRS:
        if a in names and b in names:
            ttests[f"{a}-{b}"] = paired_ttest(times[:, names.index(a)],
                                              times[:, names.index(b)])
    return anova, ttests


@dataclass(frozen=True)
class CampaignReport:
    n_trials: int
    base_seed: int
    strategies: tuple[str, ...]
    results: dict[str, tuple[TrialResult, ...]]
    success_rate: dict[str, float]
    plugin_time: dict[str, Summary | None]
    plugout_time: dict[str, Summary | None]
    force_table: dict[str, ForceRangeRow]
    summary: dict[str, SummaryStats | None]
    anova: AnovaResult | None
    ttests: dict[str, TTestResult]

    @classmethod
    def build(cls, n_trials: int, base_seed: int,
              records: Mapping[str, Sequence[TrialRecord]]) -> "CampaignReport":
        results, rate, t_in, t_out, forces, summary = {}, {}, {}, {}, {}, {}
        for name, recs in records.items():
            recs = sorted(recs, key=lambda r: r.index)
            res = tuple(r.result for r in recs)
            ok = [r for r in res if r.success]
            results[name] = res
            rate[name] = len(ok) / len(res)
            t_in[name] = _time_summary(r.plugin_time for r in ok)
            t_out[name] = _time_summary(r.plugout_time for r in ok)
            forces[name] = ForceRangeRow(
                tuple(float(np.mean(sorted(r.force_min[k] for r in res))) for k in range(3)),
                tuple(float(np.mean(sorted(r.force_max[k] for r in res))) for k in range(3)))
            deltas = [r.deltas for r in recs if r.deltas is not None]
            summary[name] = summarize(deltas) if deltas else None
        anova, ttests = compare_strategies(results)
        return cls(n_trials, base_seed, tuple(records), results, rate, t_in, t_out,
                   forces, summary, anova, ttests)

    def to_dict(self) -> dict:
        def opt(x, f):
            return None if x is None else f(x)
        return {
            "n_trials": self.n_trials,
            "base_seed": self.base_seed,
            "strategies": list(self.strategies),
            "success_rate": dict(self.success_rate),
            "plugin_time": {k: opt(v, Summary._asdict) for k, v in self.plugin_time.items()},
            "plugout_time": {k: opt(v, Summary._asdict) for k, v in self.plugout_time.items()},
            "force_table": {k: v.to_dict() for k, v in self.force_table.items()},
            "summary": {k: opt(v, SummaryStats.to_dict) for k, v in self.summary.items()},
            "anova": opt(self.anova, lambda a: {**a._asdict(), "df": list(a.df)}),
            "ttests": {k: v._asdict() for k, v in self.ttests.items()},
            "results": {k: [r.to_dict() for r in v] for k, v in self.results.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=True)

    def format_text(self) -> str:
        return format_report(self)


def load_results(path) -> dict[str, tuple[TrialResult, ...]]:
    """Per-trial results stored in a report JSON file."""
    try:
        doc = json.loads(Path(path).read_text())
        return {k: tuple(TrialResult.from_dict(r) for r in v)
                for k, v in doc["results"].items()}
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ValueError(f"cannot read report {path}: {exc}") from None


def run_campaign(cfg: Config, n_trials: int | None = None, base_seed: int | None = None,
                 workers: int | None = None, trace_dir=None) -> CampaignReport:
    """Run every configured strategy on the same seeded sequence of initial errors.

    Trial ``i`` uses seed ``base_seed + i`` for every strategy, so the
    strategies are compared on identical misalignments.  With ``workers > 1``
    trials run in a process pool; results are reduced by trial index, so the
    report does not depend on scheduling.
    """
    camp = cfg.campaign
    n = camp.trials if n_trials is None else n_trials
    seed0 = camp.base_seed if base_seed is None else base_seed
    nw = camp.workers if workers is None else workers
    if n < 1:
        raise ValueError("n_trials must be at least 1")
    if nw < 1:
        raise ValueError("workers must be at least 1")
    if seed0 < 0 or seed0 + n > 2 ** 64:
        raise ValueError("seeds must stay within the 64-bit unsigned range")
    tdir = None
    if trace_dir is not None:
        Path(trace_dir).mkdir(parents=True, exist_ok=True)
        tdir = str(trace_dir)
    jobs = [_Job(s, i, seed0 + i, cfg, tdir) for s in camp.strategies for i in range(n)]
    if nw == 1:
        recs = [_run_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=nw) as pool:
            recs = list(pool.map(_run_job, jobs, chunksize=max(1, len(jobs) // (4 * nw))))
    grouped: dict[str, list[TrialRecord]] = {s: [] for s in camp.strategies}
    for job, rec in zip(jobs, recs):
        grouped[job.strategy].append(rec)
    return CampaignReport.build(n, seed0, grouped)


def trace_succeeded(trace: Trace, full_depth: float | None = None) -> bool:
    """Recount success from a stored trace: it seated, then came fully out."""
    if not len(trace):
        return False
    full = float(trace.meta["full_depth"]) if full_depth is None else full_depth
    depth = trace.depth
    return bool(depth.max() >= full and depth[-1] <= 0.0)


def success_from_traces(trace_dir) -> dict[str, float]:
    """Per-strategy success rate recomputed by counting stored trace files."""
    counts: dict[str, list[int]] = {}
    for path in sorted(Path(trace_dir).glob("*.csv")):
        tr = load_trace(path)
        c = counts.setdefault(tr.meta["strategy"], [0, 0])
        c[0] += trace_succeeded(tr)
        c[1] += 1
    return {k: ok / total for k, (ok, total) in counts.items()}


# ---------------------------------------------------------------- text tables

def _fmt(v, fmt=".2f"):
    return "-" if v is None or (isinstance(v, float) and math.isnan(v)) else format(v, fmt)


def format_report(rep: CampaignReport) -> str:
    names = list(rep.strategies)
    lines = [f"Campaign: {rep.n_trials} trials per strategy, seeds {rep.base_seed}"
             f"..{rep.base_seed + rep.n_trials - 1}", ""]
    lines.append(f"{'strategy':<10}{'success':>12}{'plug-in s':>12}{'plug-out s':>12}")
    for s in names:
        ok = sum(r.success for r in rep.results[s])
        pin, pout = rep.plugin_time[s], rep.plugout_time[s]
        lines.append(f"{s:<10}{f'{ok} ({100 * rep.success_rate[s]:.0f}%)':>12}"
                     f"{_fmt(pin and pin.mean):>12}{_fmt(pout and pout.mean):>12}")
    lines += ["", "Force ranges, mean of per-trial min / max [N]",
              f"{'strategy':<10}{'Fx':>18}{'Fy':>18}{'Fz':>18}"]
    for s in names:
        row = rep.force_table[s]
        cells = "".join(f"{f'{lo:.1f} / {hi:.1f}':>18}"
                        for lo, hi in zip(row.mean_min, row.mean_max))
        lines.append(f"{s:<10}{cells}")
    lines += ["", "Wave statistics over successful trials (mean / max / min)"]
    lines.append(f"{'quantity':<18}" + "".join(f"{s:>26}" for s in names))
    for q in QUANTITIES + ("t_response_max",):
        cells = []
        for s in names:
            st = rep.summary[s]
            cells.append("-" if st is None else
                         f"{st.rows[q].mean:.2f} / {st.rows[q].max:.2f} / {st.rows[q].min:.2f}")
        lines.append(f"{q + ' [' + UNITS[q] + ']':<18}" + "".join(f"{c:>26}" for c in cells))
    lines += ["", format_comparison(rep.anova, rep.ttests)]
    return "\n".join(lines) + "\n"


def format_comparison(anova: AnovaResult | None, ttests: Mapping[str, TTestResult]) -> str:
    if anova is None:
        return "Plug-in time comparison: not enough trials succeeded in every strategy"
    lines = [f"RM-ANOVA on plug-in time: F({anova.df[0]},{anova.df[1]}) = "
             f"{_fmt(anova.f, '.3f')}, p = {_fmt(anova.p, '.3g')}"]
    for name, t in ttests.items():
        note = " (zero-variance differences)" if t.degenerate else ""
        lines.append(f"paired t {name}: t({t.df}) = {_fmt(t.t, '.3f')}, "
                     f"p = {_fmt(t.p, '.3g')}, mean diff = {t.mean_diff:.3f} s{note}")
    return "\n".join(lines)

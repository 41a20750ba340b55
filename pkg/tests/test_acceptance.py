"""Acceptance criteria, each at its stated tolerance.

Every test carries a ``criterion`` marker; the summary lists one PASS/FAIL
line per criterion at the end of the run.
"""

import math
import time

import numpy as np
import pytest

from _synth import random_case, synthetic_trace
from evplug.analysis import classify_strategy, find_extrema, max_consecutive_delta, response_time
from evplug.campaign import (TrialConfig, run_campaign, run_trial, success_from_traces,
                             trace_filename)
from evplug.config import CampaignSettings, Config, ControllerSettings
from evplug.control import (AxisState, SecondOrderParams, controller_init,
                            critically_damped_step, second_order_step)
from evplug.pose import rot_x, rot_y, rotation_from_tilt, tilt_angles
from evplug.stats import paired_ttest, rm_anova
from evplug.trace import HEADER, Trace, load_trace, save_trace

from test_stats import f_tail_by_quadrature, oracle_anova

criterion = pytest.mark.criterion


@criterion(1, "tilt angles: single-axis exact within 1e-9 deg, 10/10 cross-coupling < 0.05 deg, < 1 s")
def test_tilt_angle_correctness(record_property):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(500):
        a = float(rng.uniform(-89.0, 89.0))
        worst = max(worst, abs(tilt_angles(rot_x(a)).theta_x - abs(a)),
                    tilt_angles(rot_x(a)).theta_y)
        b = float(rng.uniform(-89.0, 89.0))
        worst = max(worst, abs(tilt_angles(rot_y(b)).theta_y - abs(b)),
                    tilt_angles(rot_y(b)).theta_x)
    coupling = 0.0
    for sx in (-1, 1):
        for sy in (-1, 1):
            got = tilt_angles(rotation_from_tilt((10.0 * sx, 10.0 * sy)))
            coupling = max(coupling, abs(got.theta_x - 10.0), abs(got.theta_y - 10.0))
    elapsed = time.perf_counter() - start
    record_property("max_err_deg", f"{worst:.2e}")
    record_property("coupling_deg", f"{coupling:.2e}")
    record_property("runtime_s", f"{elapsed:.3f}")
    assert worst < 1e-9
    assert coupling < 0.05
    assert elapsed < 1.0


@criterion(2, "step response 1-5e^-4 within 1e-3, no overshoot, halving dt shrinks error >= 4x, < 1 s")
def test_second_order_dynamics(record_property):
    start = time.perf_counter()
    wn = 4.0 / 0.26
    p = SecondOrderParams(1.0, wn)

    def run(n, method):
        s, traj = AxisState(), []
        for _ in range(n):
            s = second_order_step(p, s, 1.0, 0.26 / n, method)
            traj.append(s.theta)
        return np.array(traj)

    traj = run(40, "exact")
    target = 1.0 - 5.0 * math.exp(-4.0)
    tail = []
    s = AxisState()
    for _ in range(1000):
        s = second_order_step(p, s, 1.0, 0.005)
        tail.append(s.theta)
    ref = float(critically_damped_step(1.0, wn, 0.26))
    errs = [abs(run(n, "heun")[-1] - ref) for n in (40, 80, 160)]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    elapsed = time.perf_counter() - start
    record_property("theta_ts", f"{traj[-1]:.6f}")
    record_property("heun_ratios", f"{ratios[0]:.3f},{ratios[1]:.3f}")
    record_property("runtime_s", f"{elapsed:.3f}")
    assert abs(traj[-1] - target) < 1e-3
    assert abs(target - 0.90842) < 1e-5
    assert max(tail) <= 1.0 and np.all(np.diff(tail) >= -1e-15)
    assert min(ratios) >= 4.0
    assert elapsed < 1.0


@criterion(3, "controller_init reproduces omega_n = 4/0.26 and the reference human gains (deg per N)")
def test_controller_parameterization(record_property):
    g = controller_init(ControllerSettings(), gain_convention="deg_per_N")
    record_property("omega_n", f"{g.omega_n:.4f}")
    record_property("k_ud", f"{g.k_ud:.5f}")
    record_property("k_lr", f"{g.k_lr:.5f}")
    assert g.omega_n == 4.0 / 0.26
    assert abs(g.omega_n - 15.385) < 1e-3
    assert g.k_ud == 9.5 / 32.6
    assert g.k_lr == 6.8 / 27.7
    assert g.t_s == 0.26 and g.zeta == 1.0


@pytest.fixture(scope="module")
def campaign_200(tmp_path_factory):
    trace_dir = tmp_path_factory.mktemp("traces")
    start = time.perf_counter()
    report = run_campaign(Config(), n_trials=200, base_seed=0, trace_dir=trace_dir)
    return report, trace_dir, time.perf_counter() - start


@criterion(4, "200-trial ordering LR <= UD <= SP = 100%, Admittance >= SP, < 60 s")
def test_strategy_ordering(campaign_200, record_property):
    report, trace_dir, elapsed = campaign_200
    rate = report.success_rate
    for name in ("LR", "UD", "SP", "Admittance"):
        record_property(name, f"{100 * rate[name]:.1f}%")
    record_property("runtime_s", f"{elapsed:.1f}")
    for results in report.results.values():
        assert all(r.initial_error.total < 10.0 for r in results)
    assert rate["LR"] <= rate["UD"] <= rate["SP"]
    assert rate["SP"] == 1.0
    assert rate["Admittance"] >= rate["SP"]
    assert success_from_traces(trace_dir) == rate
    assert elapsed < 60.0


@criterion(5, "every successful trace: min F_z in plug-in < 0 and max F_z in plug-out > 0")
def test_force_sign_signatures(campaign_200, record_property):
    report, trace_dir, _ = campaign_200
    checked = bad = 0
    for name, results in report.results.items():
        for i, res in enumerate(results):
            if not res.success:
                continue
            trace = load_trace(trace_dir / trace_filename(name, i))
            checked += 1
            if not (trace.segment("plugin").fz.min() < 0 < trace.segment("plugout").fz.max()):
                bad += 1
    record_property("traces", checked)
    record_property("violations", bad)
    assert checked > 0 and bad == 0


@criterion(6, "100 synthetic traces: delta 2A within 1%, response T/2 within one sample, 100% labels")
def test_analysis_oracle_equivalence(record_property):
    rng = np.random.default_rng(6)
    worst_delta = worst_rt = 0.0
    correct = oscillating = 0
    for _ in range(100):
        case = random_case(rng)
        labelled = synthetic_trace(**case, noise=0.02 * case["amplitude"], rng=rng)
        correct += classify_strategy(labelled).value == case["kind"]
        if case["kind"] == "StraightBack":
            continue
        oscillating += 1
        clean = synthetic_trace(**case)
        series = clean.fy if case["kind"] == "LR" else clean.fx
        ex = find_extrema(series, clean.t)
        delta = max_consecutive_delta(ex).value
        rt = response_time(ex)
        worst_delta = max(worst_delta, abs(delta / (2 * case["amplitude"]) - 1.0))
        worst_rt = max(worst_rt, abs(rt.mean - case["period"] / 2), abs(rt.max - case["period"] / 2))
    record_property("delta_rel_err", f"{worst_delta:.2e}")
    record_property("rt_err_s", f"{worst_rt:.2e}")
    record_property("accuracy", f"{correct}/100")
    assert oscillating > 0
    assert worst_delta < 0.01
    assert worst_rt <= 0.01
    assert correct == 100


@criterion(7, "rm_anova df (2, 42); F/p vs brute force within 1e-8/1e-6; paired t = 2*sqrt(3), df 2")
def test_statistics(record_property):
    rng = np.random.default_rng(7)
    assert rm_anova(rng.normal(size=(22, 3))).df == (2, 42)
    worst_f = worst_p = 0.0
    for _ in range(50):
        n, k = int(rng.integers(3, 30)), int(rng.integers(2, 6))
        x = rng.normal(size=(n, k)) + rng.normal(size=(n, 1)) + 0.4 * rng.normal(size=k)
        res = rm_anova(x)
        f, d1, d2 = oracle_anova(x)
        worst_f = max(worst_f, abs(res.f - f) / f)
        worst_p = max(worst_p, abs(res.p - f_tail_by_quadrature(f, d1, d2)))
    t = paired_ttest([1.0, 2.0, 3.0], [0.0, 0.0, 0.0])
    record_property("F_rel_err", f"{worst_f:.1e}")
    record_property("p_abs_err", f"{worst_p:.1e}")
    record_property("t", f"{t.t:.12f}")
    assert worst_f < 1e-8 and worst_p < 1e-6
    assert abs(t.t - 2 * math.sqrt(3)) < 1e-12 and t.df == 2


@criterion(8, "same seed reproduces trace bit-exactly; report invariant to parallel scheduling")
def test_determinism(record_property):
    for strategy in ("LR", "UD", "SP", "Admittance"):
        for seed in (0, 12345, 2 ** 63 + 7):
            a, ta = run_trial(TrialConfig(strategy, seed=seed))
            b, tb = run_trial(TrialConfig(strategy, seed=seed))
            assert a == b
            assert ta.data.tobytes() == tb.data.tobytes() and ta.meta == tb.meta
    cfg = Config(campaign=CampaignSettings(trials=12))
    serial = run_campaign(cfg, workers=1).to_json()
    parallel = run_campaign(cfg, workers=4).to_json()
    record_property("report_bytes", len(serial))
    assert serial == parallel


@criterion(9, "save/load round trip within 1e-9 on 1,000-sample traces")
def test_trace_round_trip(tmp_path, record_property):
    worst = 0.0
    rng = np.random.default_rng(9)
    for k in range(5):
        data = rng.normal(scale=10.0 ** rng.uniform(-3, 3), size=(1000, len(HEADER)))
        data[:, 0] = np.arange(1000) / 100.0
        trace = Trace(data, {"seed": str(k)})
        path = tmp_path / f"t{k}.csv"
        save_trace(trace, path)
        back = load_trace(path)
        assert back.meta == trace.meta and back.data.shape == data.shape
        worst = max(worst, float(np.max(np.abs(back.data - data))))
    _, sim = run_trial(TrialConfig("SP", seed=1))
    save_trace(sim, tmp_path / "sim.csv")
    worst = max(worst, float(np.max(np.abs(load_trace(tmp_path / "sim.csv").data - sim.data))))
    record_property("max_abs_err", f"{worst:.1e}")
    assert worst <= 1e-9

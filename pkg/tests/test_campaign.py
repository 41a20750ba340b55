import json
from dataclasses import replace

import pytest

from evplug.campaign import (TrialConfig, compare_strategies, load_results,
                             run_campaign, run_trial, success_from_traces, trace_filename,
                             trace_succeeded)
from evplug.config import CampaignSettings, Config
from evplug.contact import SensorModel, Wrench
from evplug.control import OscillationParams, StrategyKind
from evplug.operator import HumanOperator, OperatorParams
from evplug.pose import TiltPair
from evplug.trace import load_trace

QUIET = replace(Config(), sensor=SensorModel(0.0, 0.0))


def small(n_strategies=("LR", "UD", "SP", "Admittance"), **kw):
    return replace(Config(), campaign=CampaignSettings(strategies=n_strategies, **kw))


@pytest.mark.parametrize("strategy", ["LR", "SP", "Admittance"])
def test_trial_is_deterministic(strategy):
    a = run_trial(TrialConfig(strategy, seed=11))
    b = run_trial(TrialConfig(strategy, seed=11))
    assert a[0] == b[0]
    assert a[1] == b[1]


def test_different_seeds_differ():
    assert run_trial(TrialConfig("SP", seed=1))[0] != run_trial(TrialConfig("SP", seed=2))[0]


@pytest.mark.parametrize("strategy", ["SP", "Admittance"])
def test_aligned_trial_takes_kinematic_time(strategy):
    res, trace = run_trial(TrialConfig(strategy, QUIET, 0, TiltPair(0.0, 0.0)))
    assert res.success
    assert res.plugin_time == pytest.approx(30.0 / 10.0, rel=0.1)
    assert res.plugin_time <= QUIET.campaign.timeout and res.plugout_time <= QUIET.campaign.timeout


def test_left_right_cannot_fix_up_down_error():
    res, trace = run_trial(TrialConfig("LR", Config(), 0, TiltPair(0.0, 8.0)))
    assert not res.success and not res.plugin_success and res.timed_out
    assert res.plugin_time == pytest.approx(30.0)
    assert trace.depth.max() < 30.0


def test_paired_initial_errors():
    errs = {s: run_trial(TrialConfig(s, seed=5))[0].initial_error for s in ("LR", "UD", "SP", "Admittance")}
    assert len(set(errs.values())) == 1
    assert errs["SP"].total < 10.0


def test_trial_config_validation():
    with pytest.raises(ValueError):
        TrialConfig("SP", seed=-1)
    with pytest.raises(ValueError):
        TrialConfig("zigzag")


def test_force_signs_of_a_successful_trial():
    res, trace = run_trial(TrialConfig("SP", seed=3))
    assert res.success
    assert trace.segment("plugin").fz.min() < 0 < trace.segment("plugout").fz.max()
    assert res.force_min[2] == trace.fz.min()


def test_single_trial_campaign_has_every_row():
    rep = run_campaign(small(), n_trials=1)
    assert set(rep.success_rate) == {"LR", "UD", "SP", "Admittance"}
    assert set(rep.force_table) == set(rep.summary) == set(rep.success_rate)
    assert all(0.0 <= r <= 1.0 for r in rep.success_rate.values())


def test_three_strategy_campaign():
    rep = run_campaign(small(("LR", "UD", "SP")), n_trials=1)
    assert len(rep.success_rate) == 3


def test_campaign_seeds_and_reduction(tmp_path):
    rep = run_campaign(small(), n_trials=8, base_seed=100, trace_dir=tmp_path)
    for s, results in rep.results.items():
        assert [r.seed for r in results] == list(range(100, 108))
    assert success_from_traces(tmp_path) == rep.success_rate
    tr = load_trace(tmp_path / trace_filename("SP", 3))
    assert trace_succeeded(tr) == rep.results["SP"][3].success
    assert tr.meta["index"] == "3"


def test_parallel_matches_serial():
    a = run_campaign(small(), n_trials=6, workers=1)
    b = run_campaign(small(), n_trials=6, workers=3)
    assert a.to_json() == b.to_json()


def test_anova_over_common_successes():
    rep = run_campaign(small(("LR", "UD", "SP")), n_trials=12)
    common = sum(all(rep.results[s][i].success for s in ("LR", "UD", "SP")) for i in range(12))
    assert rep.anova.df == (2, 2 * (common - 1))
    assert set(rep.ttests) == {"LR-SP", "LR-UD", "SP-UD"}


def test_report_json_round_trip(tmp_path):
    rep = run_campaign(small(), n_trials=4)
    path = tmp_path / "report.json"
    path.write_text(rep.to_json())
    doc = json.loads(path.read_text())
    assert doc["success_rate"] == rep.success_rate
    results = load_results(path)
    assert results == rep.results
    assert compare_strategies(results) == (rep.anova, rep.ttests)
    text = rep.format_text()
    assert "RM-ANOVA" in text or "not enough" in text
    assert all(s in text for s in rep.strategies)


def test_campaign_argument_validation():
    with pytest.raises(ValueError):
        run_campaign(small(), n_trials=0)
    with pytest.raises(ValueError):
        run_campaign(small(), n_trials=1, workers=0)


def test_operator_yields_towards_lateral_force():
    op = HumanOperator(StrategyKind.LR, OscillationParams())
    for _ in range(100):
        op.feel(Wrench(fx=-30.0, fy=20.0), 0.01)
    # theta_x rocks and follows F_y freely; theta_y gives only passively
    assert op.centre.theta_x == pytest.approx(2.0)
    assert op.centre.theta_y == pytest.approx(-OperatorParams().passive_limit_y)
    cmd = op.command(0.0, 1.0)
    assert cmd == op.centre

"""Benchmark harness: exact ratios, counter determinism, report artifacts."""

import json
from fractions import Fraction

import numpy as np
import pytest

from kickrl.basis import KernelKind
from kickrl.bench import (
    DEFAULT_SETTINGS,
    BenchSetting,
    OpCounters,
    _make_policy,
    count_state_terms,
    format_report,
    run_benchmark,
    sample_states,
    state_speedup,
    _deterministic_view,
)
from kickrl.kicksim import state_space


@pytest.fixture(scope="module")
def small_report():
    return run_benchmark(n_decisions=40, n_trials=2, warmup=2, seed=0)


# ------------------------------------------------------------ exact ratios

def test_state_term_ratio_at_the_default_grids():
    r = state_speedup([15, 11, 13], [3, 3, 3])
    assert r == Fraction(2145, 27) == Fraction(715, 9)
    assert abs(float(r) - 79.4) < 0.05


def test_state_term_ratio_edge_cases():
    assert state_speedup([7], [7]) == 1
    assert state_speedup([10, 10], [2, 2]) == 25
    with pytest.raises(ValueError):
        state_speedup([10, 10], [2])
    with pytest.raises(ValueError):
        state_speedup([10], [0])
    with pytest.raises(ValueError):
        state_speedup([0], [1])


def test_op_counters_lifecycle():
    c = OpCounters()
    c.kernel_evals += 5
    c.multiply_adds += 7
    c.active_entries += 3
    c.decisions += 1
    assert c.as_dict() == {
        "kernel_evals": 5,
        "multiply_adds": 7,
        "active_entries": 3,
        "decisions": 1,
    }
    c.reset()
    assert c.as_dict() == {
        "kernel_evals": 0,
        "multiply_adds": 0,
        "active_entries": 0,
        "decisions": 0,
    }


# ----------------------------------------------------------- state streams

def test_sampled_states_stay_in_the_box():
    space = state_space("proposed")
    rng = np.random.default_rng(5)
    for s in sample_states(space, 200, rng):
        for x, g in zip(s, space.dims):
            assert g.lo <= x <= g.hi
        assert s[3] in (0.0, 1.0)  # discrete dimension draws center values


def test_count_state_terms_dense_vs_sparse():
    space = state_space("legacy")
    rng = np.random.default_rng(11)
    states = sample_states(space, 100, rng)
    dense = count_state_terms(KernelKind.GAUSSIAN, states, space)
    sparse = count_state_terms(KernelKind.GAUSSIAN3S, states, space)
    assert dense["max_active_entries"] == 2145
    assert dense["mean_active_entries"] > 2144.0  # a few corner states underflow
    assert sparse["max_active_entries"] <= 27
    assert 1.0 <= sparse["mean_active_entries"] <= 27.0
    assert dense["mean_kernel_evals"] == 15 + 11 + 13
    assert sparse["mean_kernel_evals"] < 25.0


def test_make_policy_rejects_unknown_schemes():
    with pytest.raises(ValueError):
        _make_policy(
            BenchSetting("x", "federated", KernelKind.GAUSSIAN),
            state_space("proposed"),
            np.random.default_rng(0),
        )


# ---------------------------------------------------------------- reports

def test_report_lists_the_four_settings_in_order(small_report):
    names = [r["name"] for r in small_report["settings"]]
    assert names == ["drl-fsbf", "drl-gaussian", "crl-fsbf", "crl-gaussian"]
    assert [s.name for s in DEFAULT_SETTINGS] == names


def test_report_theory_block(small_report):
    ar = small_report["theory"]["action_eval_ratio"]
    assert (ar["numerator"], ar["denominator"], ar["value"]) == (85, 1, 85.0)
    sr = small_report["theory"]["state_term_ratio"]
    assert (sr["numerator"], sr["denominator"]) == (715, 9)
    assert abs(sr["value"] - 79.44) < 0.01


def test_report_model_sizes(small_report):
    by_name = {r["name"]: r for r in small_report["settings"]}
    for name in ("drl-fsbf", "drl-gaussian"):
        assert by_name[name]["model_bytes"] == 823_680
        assert by_name[name]["n_actions_total"] == 48
    for name in ("crl-fsbf", "crl-gaussian"):
        assert by_name[name]["model_bytes"] == 70_012_800
        assert by_name[name]["n_actions_total"] == 4080
    assert all(r["n_features"] == 4290 for r in small_report["settings"])


def test_counters_cover_exactly_the_counted_decisions(small_report):
    for r in small_report["settings"]:
        c = r["counters"]
        assert c["decisions"] == 40
        assert c["multiply_adds"] == c["active_entries"] * r["n_actions_total"]
        assert r["per_decision"]["multiply_adds"] == c["multiply_adds"] / 40


def test_multiply_add_ratio_is_exactly_85_on_shared_streams(small_report):
    by_name = {r["name"]: r for r in small_report["settings"]}
    for kernel in ("fsbf", "gaussian"):
        crl = by_name[f"crl-{kernel}"]["counters"]
        drl = by_name[f"drl-{kernel}"]["counters"]
        assert crl["active_entries"] == drl["active_entries"]
        assert Fraction(crl["multiply_adds"], drl["multiply_adds"]) == Fraction(85, 1)
    mr = small_report["measured_ratios"]["multiply_adds"]
    assert mr["crl-gaussian/drl-gaussian"] == 85.0
    assert mr["crl-fsbf/drl-fsbf"] == 85.0


def test_sparse_settings_activate_at_most_27_entries(small_report):
    by_name = {r["name"]: r for r in small_report["settings"]}
    for name in ("drl-fsbf", "crl-fsbf"):
        assert by_name[name]["per_decision"]["active_entries"] <= 27.0
    for name in ("drl-gaussian", "crl-gaussian"):
        assert by_name[name]["per_decision"]["active_entries"] > 4280.0
    st = small_report["state_terms"]
    assert st["space_dims"] == [15, 11, 13]
    assert st["sparse"]["max_active_entries"] <= 27
    assert st["dense"]["max_active_entries"] == 2145


def test_wall_fields_are_present_and_positive(small_report):
    for r in small_report["settings"]:
        assert r["seconds_per_decision_median"] > 0.0
        assert len(r["seconds_per_decision_trials"]) == 2
    for v in small_report["measured_ratios"]["wall"].values():
        assert v > 0.0


def test_counter_view_is_reproducible_for_one_seed(small_report):
    again = run_benchmark(n_decisions=40, n_trials=2, warmup=2, seed=0)
    assert _deterministic_view(small_report) == _deterministic_view(again)
    other = run_benchmark(n_decisions=40, n_trials=2, warmup=2, seed=1)
    assert (
        _deterministic_view(other)["settings"][0]["counters"]
        != _deterministic_view(small_report)["settings"][0]["counters"]
    )


def test_deterministic_view_strips_wall_clock(small_report):
    view = _deterministic_view(small_report)
    for r in view["settings"]:
        assert "seconds_per_decision_median" not in r
        assert "seconds_per_decision_trials" not in r
    assert "wall" not in view["measured_ratios"]
    assert "multiply_adds" in view["measured_ratios"]
    json.dumps(view)  # must be serializable as written


def test_artifacts_round_trip(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_benchmark(out_dir=str(a), n_decisions=20, n_trials=2, warmup=1, seed=3)
    run_benchmark(out_dir=str(b), n_decisions=20, n_trials=2, warmup=1, seed=3)
    ca = (a / "bench_counters.json").read_bytes()
    cb = (b / "bench_counters.json").read_bytes()
    assert ca == cb
    parsed = json.loads(ca)
    assert parsed["config"]["n_decisions"] == 20
    assert (a / "bench_report.txt").exists()


def test_formatted_report_contains_the_expected_sections(small_report):
    text = format_report(small_report)
    assert "theory (exact)" in text
    assert "85/1 = 85" in text
    assert "715/9 = 79.4444" in text
    assert "state terms, continuous dims only (15x11x13 centers)" in text
    assert "measured ratios" in text
    for name in ("drl-fsbf", "drl-gaussian", "crl-fsbf", "crl-gaussian"):
        assert name in text
    assert "wall-clock lines are host-specific" in text

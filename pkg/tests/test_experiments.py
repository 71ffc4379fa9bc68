import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from inlsdecay.errors import QueryError, ValidationError
from inlsdecay.experiments import (
    ScenarioConfig,
    coefficient_classes,
    decade_increments,
    fit_bound,
    gn_study,
    identity_residual,
    run_scenario,
    subsequence_scan,
)
from inlsdecay.functionals import Probe
from inlsdecay.model import CoefficientFamily, ModelSpec, PotentialSpec, default_mollified, make_grid, odd_gaussian_pair
from inlsdecay.solver import SolverConfig, evolve

K1 = ModelSpec(1.0, 0.5)
K2F = ModelSpec(2.0, 0.5, K=CoefficientFamily("K2_pure", -1))


# --- fit_bound ----------------------------------------------------------------


def test_fit_zero_values():
    res = fit_bound([(T, R, 0.0) for T in (10, 20) for R in (2, 4)])
    assert res.C == 0.0


def test_fit_single_pair():
    res = fit_bound([(10.0, 10.0, 1.0)], "R/T + R^-b", 0.5)
    assert res.C == pytest.approx(1 / (1 + 10**-0.5), rel=1e-12)
    assert res.C == pytest.approx(0.7597, abs=1e-4)
    assert not res.verified


def test_fit_empty():
    with pytest.raises(QueryError):
        fit_bound([])


def test_fit_unknown_form():
    with pytest.raises(QueryError):
        fit_bound([(1.0, 1.0, 1.0)], "R^2")


@pytest.mark.parametrize("form", ["R/T + R^-b", "R/T + R^-2"])
def test_fit_exact_form_verified(form):
    b = 0.5
    data = []
    for T in (25.0, 50.0, 100.0):
        for R in (5.0, 10.0, 20.0):
            base = R / T + (R ** -b if form.endswith("b") else R ** -2.0)
            data.append((T, R, 3.0 * base))
    res = fit_bound(data, form, b)
    assert res.C == pytest.approx(3.0)
    assert res.spread == pytest.approx(1.0)
    assert res.doubling_change == pytest.approx(1.0)
    assert res.verified


def test_fit_unstable_under_doubling():
    data = [(T, R, T**2) for T in (10.0, 20.0) for R in (1.0, 2.0)]
    res = fit_bound(data)
    assert res.doubling_change > 2 and not res.verified


# --- subsequence_scan ---------------------------------------------------------


def test_scan_constant():
    env, cand = subsequence_scan([(t, 2.0) for t in range(6)])
    assert np.all(env == 2.0) and cand == [0.0]


def test_scan_decreasing():
    series = [(float(t), 10.0 - t) for t in range(8)]
    scan = subsequence_scan(series)
    assert scan.candidates == [t for t, _ in series]
    assert scan.mean_spacing == pytest.approx(1.0)


def test_scan_oscillatory_slope():
    t = np.linspace(1, 50, 400)
    v = t**-1.0 * (1.5 + np.cos(t))
    scan = subsequence_scan(zip(t, v))
    assert len(scan.candidates) > 3
    assert -1.5 < scan.envelope_slope < -0.8


def test_scan_empty():
    with pytest.raises(QueryError):
        subsequence_scan([])


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=60))
def test_scan_matches_brute_force(values):
    series = list(enumerate(values))
    env, cand = subsequence_scan(series)
    brute = [min(values[: i + 1]) for i in range(len(values))]
    assert list(env) == brute
    assert np.all(np.diff(env) <= 0)
    assert cand[0] == 0
    for t in cand[1:]:
        assert values[int(t)] < min(values[: int(t)])


# --- hypothesis encoding ------------------------------------------------------


@pytest.mark.parametrize(
    "tag,model,kwargs,match",
    [
        ("thm1_case2", ModelSpec(1.0, 0.5, K=CoefficientFamily("K2_pure", -1)), dict(epsilon_small=0.1), "sigma > 2 - b"),
        ("thm1_case3", ModelSpec(2.0, 0.5, K=CoefficientFamily("K3_decay")), dict(epsilon_small=0.1), "sigma <= 2 - b"),
        ("thm1_case3", ModelSpec(1.0, 0.5, K=CoefficientFamily("K2_pure")), dict(epsilon_small=0.1), r"\(K3\)"),
        ("thm_odd_case1", K1, dict(initial_family="gaussian"), "odd"),
        ("thm_odd_case1", K2F, {}, r"\(K1\)"),
        ("thm_odd_case2", ModelSpec(1.0, 0.5, K=CoefficientFamily("K4_decay", -1)), {}, "small data"),
        ("thm1_case1", ModelSpec(1.0, 0.5, mu=0.1, V=PotentialSpec("yukawa", 0.5, 1.0)), {}, "mu = 0"),
        ("thm_potential_1", K2F, dict(epsilon_small=0.1), "mu > 0"),
        ("thm_potential_2", ModelSpec(1.0, 0.5, mu=0.1), dict(epsilon_small=0.1), r"\(V\)"),
        ("thm9", K1, {}, "unknown theorem"),
    ],
)
def test_hypothesis_rejection(tag, model, kwargs, match):
    with pytest.raises(ValidationError, match=match):
        ScenarioConfig(tag, model, **kwargs)


@pytest.mark.parametrize(
    "fam,expected",
    [
        (CoefficientFamily("K1_pure"), {"K1", "K2"}),
        (CoefficientFamily("K2_pure", -1), {"K2"}),
        (CoefficientFamily("K3_decay", -1), {"K2", "K3"}),
        (CoefficientFamily("K4_decay"), {"K1", "K2", "K3", "K4"}),
        (CoefficientFamily("zero"), set()),
    ],
)
def test_coefficient_classes(fam, expected):
    assert coefficient_classes(fam) == expected


def test_admissible_configs():
    pot = PotentialSpec("yukawa", 0.5, 1.0)
    ScenarioConfig("thm1_case2", K2F, epsilon_small=0.1)
    ScenarioConfig("thm1_case3", ModelSpec(1.0, 0.5, K=CoefficientFamily("K3_decay", -1)), epsilon_small=0.1)
    ScenarioConfig("thm_odd_case2", ModelSpec(1.0, 0.5, K=CoefficientFamily("K4_decay", -1)), epsilon_small=0.1)
    cfg = ScenarioConfig("thm_potential_2", ModelSpec(1.0, 0.5, mu=0.01, V=pot), epsilon_small=0.1)
    assert cfg.full_limit and cfg.odd and cfg.kernel == "xKprime_over_1px"
    assert not ScenarioConfig("thm1_case1", K1).full_limit


# --- run_scenario -------------------------------------------------------------


def test_zero_data_trivial_pass():
    cfg = ScenarioConfig("thm_odd_case1", K1, initial_family="zero")
    rep = run_scenario(cfg, SolverConfig(0.01, 1.0, observer_stride=10), make_grid(20.0, 512))
    assert rep.passed and rep.valid
    assert np.all(rep.l2_local == 0) and np.all(rep.linf_local == 0)
    assert rep.plateau_M == 0.0


def test_contaminated_run_is_invalid():
    cfg = ScenarioConfig("thm_odd_case1", K1, center=3.0)
    rep = run_scenario(cfg, SolverConfig(0.01, 20.0, observer_stride=20), make_grid(8.0, 256))
    assert not rep.valid and not rep.passed
    assert rep.breach_time is not None and 0 < rep.breach_time <= 20


def test_odd_run_forces_projection():
    cfg = ScenarioConfig("thm_odd_case1", K1)
    rep = run_scenario(cfg, SolverConfig(0.01, 1.0, observer_stride=10, enforce_odd=False), make_grid(40.0, 1024))
    assert rep.trajectory.solver.enforce_odd
    assert "lim" in rep.note


def test_report_serializable():
    cfg = ScenarioConfig("thm_odd_case1", K1)
    rep = run_scenario(cfg, SolverConfig(0.01, 0.5, observer_stride=10), make_grid(40.0, 1024))
    d = rep.to_dict()
    assert "trajectory" not in d and isinstance(d["times"], list)


def test_identity_residual_short_run():
    g = make_grid(40.0, 4096)
    traj = evolve(odd_gaussian_pair(g), default_mollified(K1, g),
                  SolverConfig(1e-3, 0.4, enforce_odd=True, observer_stride=10, keep_snapshots=False), Probe())
    assert identity_residual(traj) < 1e-2


def test_decade_increments():
    t = np.linspace(0, 30, 301)
    inc = decade_increments(t, t**2, 10.0)
    assert inc == pytest.approx([100.0, 300.0, 500.0])


def test_gn_study_small():
    res = gn_study(0.5, sample_count=10, grid=make_grid(40.0, 2048))
    assert res.passed and math.isfinite(res.sup_coarse)
    with pytest.raises(QueryError):
        gn_study(0.5, sample_count=0)


# --- long-run invariants (shared simulations) ---------------------------------


def test_report_envelope_and_running_integral(odd_k1_report):
    rep = odd_k1_report
    assert np.all(np.diff(rep.envelope) <= 0)
    assert np.all(np.diff(rep.h1_alpha_running) >= 0)


def test_plateau_increments_shrink(odd_k1_report):
    rep = odd_k1_report
    inc = decade_increments(rep.times, rep.h1_alpha_running, 10.0)
    terminal = inc[len(inc) // 2:]
    assert all(a > b for a, b in zip(terminal, terminal[1:]))


def test_morawetz_decades_shrink(odd_k1_report, k2_morawetz_report):
    for rep in (odd_k1_report, k2_morawetz_report):
        inc = rep.morawetz_cumulative_increments
        assert len(inc) == 10
        assert all(a > b for a, b in zip(inc, inc[1:]))


def test_k2_subsequence_decay(k2_morawetz_report):
    rep = k2_morawetz_report
    assert rep.valid and rep.verdict["decay"]
    assert rep.envelope_min_l2 < 0.5 * rep.initial_l2
    assert "liminf" in rep.note

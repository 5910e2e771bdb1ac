import math
from dataclasses import replace

import numpy as np
import pytest

from unicusum.alphabet_dist import Categorical, kl_divergence
from unicusum.errors import InfeasibleKappa, ValidationError
from unicusum.simulator import (CSV_COLUMNS, Procedure, StreamSpec, arl_bound, delay_slope,
                                error_prob_bound, estimate_arl0, estimate_error_prob,
                                estimate_worst_delay, fixed_estimate, gen_stream, kappa_lambda,
                                optimality_experiment, run_trials, trials_csv)

A = Categorical([1.0, 0.0])
B = Categorical([0.0, 1.0])
PRE = Categorical([0.5, 0.5])
POST = Categorical([0.9, 0.1])
D10 = kl_divergence(POST, PRE)


def test_gen_stream_change_points():
    s = gen_stream(StreamSpec(A, B, n0=3, change_point=1, horizon=6, seed=1), trial=0)
    assert s.symbols.tolist() == [0, 0, 0] + [1] * 6
    s = gen_stream(StreamSpec(A, B, n0=0, change_point=None, horizon=6, seed=1), trial=0)
    assert s.symbols.tolist() == [0] * 6
    s = gen_stream(StreamSpec(A, B, n0=2, change_point=5, horizon=8, seed=1))
    post = s.post.symbols.tolist()
    assert post[:4] == [0] * 4 and post[4:] == [1] * 4
    assert s.change_point == 5 and s.n0 == 2


def test_gen_stream_deterministic():
    spec = StreamSpec(PRE, POST, n0=50, change_point=10, horizon=100, seed=4)
    assert gen_stream(spec, 3).symbols.tobytes() == gen_stream(spec, 3).symbols.tobytes()
    assert gen_stream(spec, 3).symbols.tobytes() != gen_stream(spec, 4).symbols.tobytes()


def test_spec_validation():
    with pytest.raises(ValidationError):
        StreamSpec(PRE, POST, change_point=20, horizon=10)
    with pytest.raises(ValidationError):
        StreamSpec(PRE, Categorical([0.2, 0.3, 0.5]))


def test_bound_formulas():
    assert error_prob_bound(0.01, 0.5) == pytest.approx(0.01 / (math.sqrt(2) - 1))
    assert error_prob_bound(0.01, 0.5) == pytest.approx(0.02414, abs=1e-5)
    assert arl_bound(8, 0.5) == pytest.approx(8 * (math.sqrt(2) - 1))
    assert arl_bound(8, 0.5) == pytest.approx(3.3137, abs=1e-4)
    assert error_prob_bound(0.01, 0.1, log_beta=0.2) == math.inf
    # eps0 enters additively / in the denominator
    assert error_prob_bound(0.01, 0.5, 0.1, 0.003) == pytest.approx(
        0.01 / (2 ** 0.4 - 1) + 0.003)
    assert arl_bound(8, 0.5, 0.1, 0.01) == pytest.approx(8 / (1 / (2 ** 0.4 - 1) + 0.08))


def test_error_prob_vanishes_as_alpha_shrinks():
    spec = StreamSpec(PRE, PRE, horizon=2000, seed=2)
    s = estimate_error_prob(spec, Procedure("jbpage", 200.0, 0.5), 50)
    assert s.false_alarm_fraction == 0.0 and s.passed


def test_error_prob_small_run():
    spec = StreamSpec(PRE, PRE, n0=2000, horizon=5000, seed=3)
    s = estimate_error_prob(spec, Procedure("empirical", -math.log2(0.05), 0.5), 300, delta=0.05)
    assert s.passed
    c = s.checks
    assert c["eps0_used"] == min(c["eps0_hoeffding"], c["eps0_mc_upper"])
    assert c["eps0_source"] in ("hoeffding", "monte_carlo")
    with pytest.raises(ValidationError):
        estimate_error_prob(spec, Procedure("empirical", 5.0, 0.5), 10)


def test_arl_all_censored_at_huge_threshold():
    spec = StreamSpec(PRE, PRE, horizon=300, seed=5)
    s = estimate_arl0(spec, Procedure("jbpage", 500.0, 0.5), 20)
    assert s.censored_fraction == 1.0
    assert s.mean_stop == 300.0
    assert not s.passed


def test_arl_small_run():
    spec = StreamSpec(PRE, PRE, horizon=3000, seed=6)
    s = estimate_arl0(spec, Procedure("jbpage", 3.0, 0.5), 100)
    assert s.passed and s.mean_stop >= 3.3137


def test_point_mass_delay():
    # post-change is all zeros: drift per symbol is -log2(0.5) - lam, minus a log-size code cost
    spec = StreamSpec(PRE, Categorical([1.0, 0.0]), n0=0, change_point=1, horizon=500, seed=7)
    thr, lam = 20.0, 0.2
    s = estimate_worst_delay(spec, Procedure("jbpage", thr, lam), 20)
    predicted = thr / (1.0 - lam)
    assert abs(s.mean_delay - predicted) <= 0.3 * predicted
    assert s.var_delay == 0.0


def test_delay_near_asymptote():
    spec = StreamSpec(PRE, POST, n0=10 ** 5, change_point=1, horizon=2000, seed=8)
    s = estimate_worst_delay(spec, Procedure("empirical", 10.0, 0.2), 500)
    assert abs(s.mean_delay - 10 / (D10 - 0.2)) <= 0.25 * 30.2
    assert s.config["conditional"] and s.config["estimate"]["n0"] == 10 ** 5
    assert s.checks["predicted_delay"] == pytest.approx(
        10 / (kl_divergence(POST, fixed_estimate(spec).mu_hat) - 0.2))


def test_page_worst_case_at_reset():
    proc = Procedure("page", 8.0)
    m1 = estimate_worst_delay(StreamSpec(PRE, POST, change_point=1, horizon=1000, seed=9), proc, 600)
    m50 = estimate_worst_delay(StreamSpec(PRE, POST, change_point=50, horizon=1050, seed=9), proc, 600)
    delays50 = np.array([r.delay for r in m50.results if not r.false_alarm])
    assert m1.mean_delay >= delays50.mean() - m1.delay_halfwidth - m50.delay_halfwidth


def test_degradation_ordering():
    gammas = 10.0
    base = StreamSpec(PRE, POST, n0=0, change_point=1, horizon=3000, seed=10)
    page = estimate_worst_delay(base, Procedure("page", gammas), 400)
    jb = estimate_worst_delay(base, Procedure("jbpage", gammas, 0.2), 400)
    assert page.mean_delay <= jb.mean_delay + page.delay_halfwidth + jb.delay_halfwidth
    far = []
    for n0 in (100, 10 ** 5):
        s = estimate_worst_delay(replace(base, n0=n0), Procedure("empirical", gammas, 0.2), 400)
        far.append(abs(s.mean_delay - jb.mean_delay))
    assert far[1] < far[0]


def test_slope_report_linear_model():
    spec = StreamSpec(PRE, POST, n0=0, change_point=1, horizon=1, seed=11)
    r = delay_slope(spec, Procedure("page", 1.0), [2.0 ** g for g in (4, 6, 8, 10)], 200)
    x = np.array(r.gammas_log2)
    fitted = r.slope * x + r.intercept
    assert np.allclose(fitted + np.array(r.residuals), r.mean_delays)
    # one more bit of threshold moves the prediction by exactly the slope
    assert (r.slope * (x + 1) + r.intercept - fitted) == pytest.approx(np.full(4, r.slope))
    assert r.predicted_slope == pytest.approx(1 / D10)
    with pytest.raises(ValidationError):
        delay_slope(spec, Procedure("page", 1.0), [4, 8, 16], 10)


def test_kappa_lambda():
    # exact estimate: lam = D (1 - 1/(1+kappa))
    assert kappa_lambda(D10, D10, 0.5) == pytest.approx(D10 / 3)


def test_optimality_rows():
    rows = optimality_experiment(PRE, POST, 0.5, 2.0 ** 8, [10 ** 4], 100, seed=3)
    r = rows[0]
    assert r.feasible and not r.unstable
    assert r.window[0] < r.lam < r.window[1]
    assert r.ratio == pytest.approx(r.mean_delay / (8 / D10))
    assert r.log2_eta > 8


def test_optimality_large_kappa_flags_instability():
    rows = optimality_experiment(PRE, POST, 1e4, 2.0 ** 8, [10 ** 5], 10, seed=3)
    r = rows[0]
    assert r.unstable and r.mean_delay is None
    assert r.lam == pytest.approx(r.window[1], abs=1e-3)


def test_optimality_infeasible_kappa():
    with pytest.raises(InfeasibleKappa):
        optimality_experiment(PRE, POST, 0.01, 2.0 ** 8, [10 ** 5], 10, seed=3)


def test_summaries_reproducible():
    spec = StreamSpec(PRE, POST, n0=500, change_point=5, horizon=500, seed=12)
    proc = Procedure("empirical", 6.0, 0.2)
    a = estimate_worst_delay(spec, proc, 50, conditional=False)
    b = estimate_worst_delay(spec, proc, 50, conditional=False)
    assert a.to_dict() == b.to_dict()


def test_csv_layout():
    spec = StreamSpec(PRE, POST, change_point=3, horizon=200, seed=13)
    res = run_trials(spec, Procedure("jbpage", 5.0, 0.2), 5)
    text = trials_csv(res, spec.to_dict())
    lines = text.splitlines()
    assert lines[0].startswith("# unicusum") and lines[1].startswith("# config:")
    assert lines[2] == ",".join(CSV_COLUMNS)
    assert len(lines) == 8
    for r in res:
        assert r.delay == max(r.stop_time - 3 + 1, 0)
        if r.censored:
            assert r.stop_time == 200


def test_zero_reference_trials_are_reported():
    # a one-symbol warm-up always leaves the other symbol unseen
    spec = StreamSpec(PRE, PRE, n0=1, horizon=50, seed=14)
    s = estimate_arl0(spec, Procedure("empirical", 3.0, 0.5), 40, delta=0.1)
    assert s.zero_ref_trials > 0

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tiptrust.core import (
    ExperiencePair,
    PerformanceObservation,
    TrustParams,
    direct_update,
    indirect_update,
    log_beta_pdf,
)
from tiptrust.errors import DomainError, MisuseError, NumericError
from tiptrust.inference import (
    AgentHistory,
    FitOptions,
    ModelVariant,
    SufficientSums,
    build_sufficient_sums,
    estimate_missing,
    fit,
    gradient,
    hold_out_tail,
    impute_series,
    log_likelihood,
)
from tiptrust.synth import SynthConfig, generate_experiment


def random_history(rng, K=None, missing=0.0):
    K = int(rng.integers(0, 21)) if K is None else K
    direct = [False] + [bool(rng.random() < 0.5) for _ in range(K)]
    ratings = rng.uniform(0.02, 0.98, K + 1).round(6).tolist()
    p = [rng.integers(0, 11) / 10 if d else None for d in direct]
    for k in range(1, K + 1):
        if rng.random() < missing:
            ratings[k] = None
    return AgentHistory(
        ratings=ratings,
        direct=direct,
        p=p,
        p_bar=[None if v is None else 1 - v for v in p],
        peer_trust=rng.uniform(0.02, 0.98, K + 1).round(6).tolist(),
        trust_in_peer=rng.uniform(0.3, 1.0, K + 1).round(6).tolist(),
    )


def random_theta(rng):
    return np.concatenate([rng.uniform(0.3, 20, 2), rng.uniform(0.0, 20, 4)])


def replay(h, theta):
    params = TrustParams.from_array(theta)
    e = params.prior
    out = [e]
    for k in range(1, h.K + 1):
        if h.direct[k]:
            e = direct_update(e, params, PerformanceObservation(h.p[k], h.p_bar[k]))
        else:
            e = indirect_update(
                e, params, h.ratings[k - 1], h.peer_trust[k], h.trust_in_peer[k]
            )
        out.append(e)
    return out


def test_direct_only_sums():
    h = AgentHistory([0.5, 0.6, 0.7], [False, True, True], [None, 0.9, 0.8], [None, 0.1, 0.2],
                     [None] * 3, [None] * 3)
    s = build_sufficient_sums(h)
    np.testing.assert_allclose(s.P, [0, 0.9, 1.7])
    np.testing.assert_allclose(s.P_bar, [0, 0.1, 0.3])
    assert not s.Q.any() and not s.Q_bar.any()


def test_indirect_sums_hand_value():
    h = AgentHistory([0.5, 0.6], [False, False], [None, None], [None, None], [0.4, 0.8], [0.9, 0.5])
    s = build_sufficient_sums(h)
    assert s.Q[1] == pytest.approx(0.15)
    assert s.Q_bar[1] == 0


def test_peer_matching_previous_gives_zero_indirect_sums():
    ratings = [0.3, 0.5, 0.45, 0.6]
    h = AgentHistory(ratings, [False] * 4, [None] * 4, [None] * 4, [None] + ratings[:-1], [0.8] * 4)
    s = build_sufficient_sums(h)
    assert not s.Q.any() and not s.Q_bar.any()


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_sums_invariants_and_replay(seed):
    rng = np.random.default_rng(seed)
    h = random_history(rng)
    s = build_sufficient_sums(h)
    for arr in (s.P, s.P_bar, s.Q, s.Q_bar):
        assert np.all(np.diff(arr) >= 0) and np.all(arr >= 0)
    assert not np.any((np.diff(s.Q) > 0) & (np.diff(s.Q_bar) > 0))
    theta = random_theta(rng)
    alpha, beta = s.experience(theta)
    for k, e in enumerate(replay(h, theta)):
        assert abs(alpha[k] - e.alpha) < 1e-12 * max(1, e.alpha)
        assert abs(beta[k] - e.beta) < 1e-12 * max(1, e.beta)


def test_uniform_single_rating_loglik_is_zero():
    h = AgentHistory([0.37], [False], [None], [None], [None], [None])
    s = build_sufficient_sums(h)
    assert log_likelihood(TrustParams(1, 1, 0, 0, 0, 0), s, h.ratings) == pytest.approx(0, abs=1e-13)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_loglik_equals_sum_of_log_pdfs(seed):
    rng = np.random.default_rng(seed)
    h = random_history(rng)
    theta = random_theta(rng)
    s = build_sufficient_sums(h)
    direct = sum(log_beta_pdf(t, e) for t, e in zip(h.ratings, replay(h, theta)))
    assert abs(log_likelihood(theta, s, h.ratings) - direct) < 1e-12 * max(1, abs(direct))


def test_gradient_empty_sums_rows_are_zero():
    h = AgentHistory([0.7], [False], [None], [None], [None], [None])
    g = gradient([2.0, 3.0, 1.0, 1.0, 1.0, 1.0], build_sufficient_sums(h), h.ratings)
    assert g[0] != 0 and g[1] != 0
    assert np.all(g[2:] == 0.0)


def test_gradient_doubles_with_duplicated_sessions():
    rng = np.random.default_rng(5)
    h = random_history(rng, K=12)
    s = build_sufficient_sums(h)
    dup = SufficientSums(*(np.concatenate([a, a]) for a in (s.P, s.P_bar, s.Q, s.Q_bar)))
    theta = random_theta(rng)
    g = gradient(theta, s, h.ratings)
    g2 = gradient(theta, dup, list(h.ratings) * 2)
    np.testing.assert_allclose(g2, 2 * g, rtol=1e-13, atol=1e-13)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    h = random_history(rng)
    s = build_sufficient_sums(h)
    theta = random_theta(rng) + 0.1
    g = gradient(theta, s, h.ratings)
    step = 1e-5
    for i in range(6):
        e = np.zeros(6)
        e[i] = step
        fd = (log_likelihood(theta + e, s, h.ratings) - log_likelihood(theta - e, s, h.ratings)) / (2 * step)
        assert abs(fd - g[i]) <= 1e-5 * max(1.0, abs(g[i]))


def test_observed_mask_drops_sessions():
    rng = np.random.default_rng(1)
    h = random_history(rng, K=6)
    s = build_sufficient_sums(h)
    theta = random_theta(rng)
    mask = np.array([1, 1, 0, 1, 0, 1, 1], dtype=float)
    full = [log_likelihood(theta, SufficientSums(s.P[k:k+1], s.P_bar[k:k+1], s.Q[k:k+1], s.Q_bar[k:k+1]),
                           [h.ratings[k]]) for k in range(7)]
    assert log_likelihood(theta, s, h.ratings, mask) == pytest.approx(np.dot(mask, full), rel=1e-12)


def _synthetic_history(seed=0, pair="x:B"):
    ex = generate_experiment(SynthConfig(seed=seed))
    return ex, ex.dataset.history(*pair.split(":"))


def test_fit_ascends_and_respects_bounds():
    _, h = _synthetic_history(3)
    for variant in ModelVariant:
        rep = fit(h, variant)
        assert rep.converged
        assert np.all(np.diff(rep.loglik_trajectory) > 0)
        theta = rep.theta_star.as_array()
        free = variant.free_mask
        assert np.all(theta[free] >= 1e-6)
        assert np.all(theta[~free] == 0.0)
        assert rep.iterations == rep.loglik_trajectory.size - 1


def test_fit_reaches_stationary_point():
    _, h = _synthetic_history(4, "y:A")
    rep = fit(h)
    assert rep.converged
    theta = rep.theta_star.as_array()
    g = gradient(theta, build_sufficient_sums(h), h.ratings)
    projected = np.abs(np.maximum(theta + g, 1e-6) - theta)
    assert projected.max() < 1e-6


def test_fixed_step_rule_reaches_same_optimum():
    _, h = _synthetic_history(1, "x:A")
    fast = fit(h, ModelVariant.DIRECT_ONLY)
    slow = fit(h, ModelVariant.DIRECT_ONLY, FitOptions(step_rule="fixed"))
    assert fast.converged and slow.converged
    assert slow.iterations >= fast.iterations
    assert abs(fast.final_loglik - slow.final_loglik) < 1e-6


def test_unknown_step_rule_rejected():
    with pytest.raises(MisuseError):
        FitOptions(step_rule="newton")


def test_nesting_of_variants():
    for seed in range(3):
        ex = generate_experiment(SynthConfig(seed=seed))
        for h in ex.dataset.histories().values():
            tip = fit(h).final_loglik
            for variant in (ModelVariant.DIRECT_ONLY, ModelVariant.INDIRECT_ONLY):
                assert tip >= fit(h, variant).final_loglik - 1e-6


def test_direct_only_equals_tip_on_direct_only_data():
    rng = np.random.default_rng(2)
    K = 15
    p = [None] + (rng.integers(3, 11, K) / 10).tolist()
    h = AgentHistory(
        ratings=rng.uniform(0.3, 0.9, K + 1).round(6).tolist(),
        direct=[False] + [True] * K,
        p=p,
        p_bar=[None] + [1 - v for v in p[1:]],
        peer_trust=[None] * (K + 1),
        trust_in_peer=[None] * (K + 1),
    )
    a = fit(h, "tip").expected_trust_series
    b = fit(h, "direct").expected_trust_series
    assert np.sqrt(np.mean((a - b) ** 2)) < 1e-3


def test_constant_half_rating():
    h = AgentHistory([0.5], [False], [None], [None], [None], [None])
    rep = fit(h)
    assert abs(rep.expected_trust_series[0] - 0.5) < 1e-3


def test_fit_tracks_generating_expectation():
    errs = []
    for seed in range(10):
        ex = generate_experiment(SynthConfig(seed=seed))
        for pair, h in ex.dataset.histories().items():
            mu = fit(h).expected_trust_series
            errs.append(np.mean(np.abs(mu - ex.expected[pair])))
    errs = np.array(errs)
    assert errs.mean() < 0.05
    assert np.mean(errs < 0.05) >= 0.9


def test_non_finite_start_reported():
    _, h = _synthetic_history(0)
    with pytest.raises(NumericError):
        fit(h, options=FitOptions(theta0=(np.inf, 1, 1, 1, 1, 1)))


def test_incomplete_history_needs_imputation():
    h = AgentHistory([0.5, None], [False, True], [None, 0.7], [None, 0.3], [None, None], [None, None])
    with pytest.raises(MisuseError):
        build_sufficient_sums(h)
    with pytest.raises(MisuseError):
        fit(h)


def test_history_validation():
    with pytest.raises(DomainError):
        AgentHistory([None, 0.5], [False, False], [None] * 2, [None] * 2, [0.5] * 2, [0.5] * 2)
    with pytest.raises(DomainError):
        AgentHistory([0.5, 0.5], [False, True], [None] * 2, [None] * 2, [0.5] * 2, [0.5] * 2)
    with pytest.raises(DomainError):
        AgentHistory([0.5, 0.5], [False], [None], [None], [None], [None])
    h = AgentHistory([0.0, 1.0], [False, False], [None] * 2, [None] * 2, [0.5] * 2, [0.5] * 2)
    assert h.ratings == (1e-4, 1 - 1e-4)


def _tail_history(ratings, peer=None):
    n = len(ratings)
    return AgentHistory(ratings, [False] * n, [None] * n, [None] * n,
                        peer or [0.5] * n, [0.8] * n)


def test_imputation_examples():
    h = _tail_history([0.5, 0.55, 0.6, None, 0.7])
    assert impute_series(h).ratings[3] == 0.6
    h = _tail_history([0.5, 0.7, None, None, None])
    filled = impute_series(h)
    assert filled.ratings[2:] == (0.7, 0.7, 0.7)
    assert filled.imputed == {2, 3, 4}
    full = _tail_history([0.5, 0.6, 0.7])
    assert impute_series(full).ratings == full.ratings


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_imputation_idempotent(seed):
    h = random_history(np.random.default_rng(seed), missing=0.3)
    once = impute_series(h)
    assert impute_series(once) == once


def test_imputation_requires_initial_values():
    h = AgentHistory([0.5, 0.6], [False, False], [None] * 2, [None] * 2, [None, 0.5], [0.5, 0.5])
    with pytest.raises(DomainError):
        impute_series(h)


def test_estimate_missing_without_gaps_matches_fit():
    _, h = _synthetic_history(6)
    res = estimate_missing(h)
    assert res.estimates == ()
    assert np.array_equal(res.report.theta_star.as_array(), fit(h).theta_star.as_array())


def test_estimate_missing_predicts_expectations():
    _, h = _synthetic_history(7)
    masked, truth = hold_out_tail(h, 4)
    assert set(truth) == {12, 13, 14, 15}
    res = estimate_missing(masked)
    assert [u for u, _ in res.estimates] == [12, 13, 14, 15]
    mu = res.report.expected_trust_series
    assert all(v == mu[u] for u, v in res.estimates)
    assert res.warnings == ()


def test_underdetermined_estimate_warns():
    _, h = _synthetic_history(8)
    masked, _ = hold_out_tail(h, h.K)
    assert estimate_missing(masked).warnings


def test_holdout_bounds():
    _, h = _synthetic_history(0)
    with pytest.raises(MisuseError):
        hold_out_tail(h, 0)
    with pytest.raises(MisuseError):
        hold_out_tail(h, h.K + 1)


def test_report_serialisation():
    _, h = _synthetic_history(0)
    doc = fit(h, "direct").to_dict()
    assert set(doc) == {"model", "theta", "final_loglik", "iterations", "converged", "expected_trust"}
    assert doc["model"] == "direct" and doc["theta"]["s_hat"] == 0.0
    assert len(doc["expected_trust"]) == h.K + 1

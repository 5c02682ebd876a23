import numpy as np
import pytest

from oracles import trapezoid_tanh_moments
from scvamp.likelihood import (
    ChannelSpec,
    gh_rule,
    likelihood_step,
    log_normalizer,
    scalar_moments,
)
from scvamp.messages import GaussianMessage


def test_gh_rule_order_two_closed_form():
    rule = gh_rule(2)
    np.testing.assert_allclose(np.sort(rule.nodes), [-1 / np.sqrt(2), 1 / np.sqrt(2)],
                               atol=1e-14)
    np.testing.assert_allclose(rule.weights, np.sqrt(np.pi) / 2, atol=1e-14)


def test_gh_rule_order_three_closed_form():
    rule = gh_rule(3)
    np.testing.assert_allclose(np.sort(rule.nodes), [-np.sqrt(1.5), 0.0, np.sqrt(1.5)],
                               atol=1e-14)
    w = rule.weights[np.argsort(rule.nodes)]
    np.testing.assert_allclose(w, [np.sqrt(np.pi) / 6, 2 * np.sqrt(np.pi) / 3,
                                   np.sqrt(np.pi) / 6], atol=1e-13)


def test_gh_rule_weight_sum_and_symmetry():
    for q in (2, 5, 17, 50, 200):
        rule = gh_rule(q)
        assert rule.weights.sum() == pytest.approx(np.sqrt(np.pi), abs=1e-12)
        np.testing.assert_allclose(np.sort(rule.nodes), -np.sort(-rule.nodes)[::-1],
                                   atol=1e-13)
        assert np.all(rule.weights > 0)


def test_gh_rule_fourth_moment():
    rule = gh_rule(50)
    value = np.sum(rule.weights * rule.nodes**4)
    assert value == pytest.approx(0.75 * np.sqrt(np.pi), abs=1e-12)


def test_gh_rule_polynomial_exactness():
    # degree 6 integrated exactly by a 4-point rule (2Q - 1 = 7)
    rule = gh_rule(4)
    assert np.sum(rule.weights * rule.nodes**6) == pytest.approx(
        (15.0 / 8.0) * np.sqrt(np.pi), rel=1e-13
    )


def test_gh_rule_order_bounds():
    with pytest.raises(ValueError):
        gh_rule(1)
    with pytest.raises(ValueError):
        gh_rule(201)


def test_channel_spec_validation():
    with pytest.raises(ValueError):
        ChannelSpec("tanh", 0.0)
    with pytest.raises(ValueError):
        ChannelSpec("tanh", -1.0)
    with pytest.raises(ValueError):
        ChannelSpec("tanh", 1.0, 1)
    with pytest.raises(ValueError):
        ChannelSpec("cube", 1.0)


def test_channel_spec_snr():
    spec = ChannelSpec.from_snr_db(10.0, "tanh")
    assert spec.noise_variance == pytest.approx(0.1)
    assert spec.snr_db == pytest.approx(10.0)


def test_channel_spec_accepts_callable():
    spec = ChannelSpec(lambda w: np.clip(w, -1.0, 1.0), 0.5)
    assert not spec.is_identity
    m1, m2 = scalar_moments(0.0, 0.2, 0.4, spec)
    assert np.isfinite(m1) and m2 >= m1 * m1


def test_identity_conjugate_example():
    spec = ChannelSpec("id", 1.0)
    m1, m2 = scalar_moments(0.0, 1.0, 1.0, spec)
    assert m1 == pytest.approx(0.5, abs=1e-14)
    assert m2 - m1 * m1 == pytest.approx(0.5, abs=1e-14)


def test_identity_closed_form_independent_of_quadrature_order():
    for q in (2, 3, 50, 100):
        spec = ChannelSpec("id", 0.3, q)
        m1, m2 = scalar_moments(0.4, 0.7, -0.2, spec)
        v_post = 1.0 / (1.0 / 0.7 + 1.0 / 0.3)
        expect = v_post * (0.4 / 0.7 + -0.2 / 0.3)
        assert m1 == pytest.approx(expect, abs=1e-12)
        assert m2 - m1 * m1 == pytest.approx(v_post, abs=1e-12)


def test_tanh_delta_prior_limit():
    spec = ChannelSpec("tanh", 0.2)
    m1, _ = scalar_moments(0.37, 1e-10, 0.9, spec)
    assert m1 == pytest.approx(0.37, abs=1e-7)


def test_tanh_matches_dense_integration_oracle():
    spec = ChannelSpec("tanh", 0.1, 50)
    m1, m2 = scalar_moments(0.3, 0.8, 0.5, spec)
    m1o, m2o = trapezoid_tanh_moments(0.3, 0.8, 0.5, 0.1)
    assert m1 == pytest.approx(m1o, rel=1e-8)
    assert m2 == pytest.approx(m2o, rel=1e-8)


def test_cavity_variance_must_be_positive():
    with pytest.raises(ValueError):
        scalar_moments(0.0, 0.0, 0.0, ChannelSpec("tanh", 0.1))


def test_identity_step_returns_observation_exactly():
    rng = np.random.default_rng(3)
    y = rng.normal(size=6)
    spec = ChannelSpec("id", 0.37)
    for _ in range(5):
        rw = GaussianMessage(rng.normal(size=6), float(np.exp(rng.uniform(-2, 2))))
        ext, post = likelihood_step(rw, y, spec)
        np.testing.assert_array_equal(ext.mean, y)
        assert ext.variance == 0.37
        assert post.alpha == pytest.approx(0.37 / (rw.variance + 0.37), rel=1e-12)


def test_identity_alpha_matches_fisher_information_form():
    # alpha = 1 - (v/N) J with J = N / (v + sigma2) for the conjugate case
    spec = ChannelSpec("id", 0.6)
    rw = GaussianMessage(np.array([0.1, -0.4, 2.0]), 1.3)
    _, post = likelihood_step(rw, np.array([0.0, 0.5, 1.5]), spec)
    fisher = 3 / (1.3 + 0.6)
    assert post.alpha == pytest.approx(1.0 - (1.3 / 3) * fisher, rel=1e-12)


def test_uninformative_observation_limit():
    spec = ChannelSpec("tanh", 1e6)
    rw = GaussianMessage(np.zeros(4), 0.5)
    ext, post = likelihood_step(rw, np.ones(4), spec)
    assert post.alpha == pytest.approx(1.0 - 1e-6)  # raw ratio clipped at the ceiling
    assert ext.variance > 1e4


def test_step_matches_hand_extrinsic_on_oracle_moments():
    rng = np.random.default_rng(4)
    v = 0.3
    sigma2 = 0.15
    spec = ChannelSpec("tanh", sigma2, 50)
    r = rng.normal(size=8) * 0.8
    y = np.tanh(r + np.sqrt(v) * rng.normal(size=8)) + np.sqrt(sigma2) * rng.normal(size=8)
    ext, post = likelihood_step(GaussianMessage(r, v), y, spec)
    m1o = np.empty(8)
    m2o = np.empty(8)
    for i in range(8):
        m1o[i], m2o[i] = trapezoid_tanh_moments(r[i], v, y[i], sigma2)
    v_post = np.mean(m2o - m1o**2)
    alpha = v_post / v
    hand_mean = (m1o - alpha * r) / (1 - alpha)
    hand_var = alpha / (1 - alpha) * v
    np.testing.assert_allclose(post.mean, m1o, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(ext.mean, hand_mean, rtol=1e-6, atol=1e-8)
    assert ext.variance == pytest.approx(hand_var, rel=1e-7)


# wide grid for the self-consistency (finite-difference) suites
_FD_GRID = [
    (r, v, y, s2)
    for r in (-1.0, 0.0, 0.7)
    for v in (0.1, 0.5)
    for y in (-0.8, 0.3)
    for s2 in (0.1, 0.4)
]

# model-consistent grid (y near tanh(r)) on which Q=50 is fully converged and
# the posterior contracts; strongly discrepant (r, y) pairs with a weak
# likelihood can genuinely widen the posterior beyond the cavity, e.g.
# (r, v, y, s2) = (-1, 0.1, 0.3, 0.4) has true variance 0.108 > v.
_CONVERGED_GRID = [
    (r, v, float(np.tanh(r) + d * np.sqrt(s2)), s2)
    for r in (-1.0, -0.3, 0.3, 1.0)
    for (v, s2) in ((0.1, 0.1), (0.1, 0.2), (0.3, 0.2), (0.4, 0.5))
    for d in (-0.5, 0.0, 0.5)
]


def test_tweedie_consistency_finite_difference():
    # v * d/dr log Z equals m1 - r
    for r, v, y, s2 in _FD_GRID:
        spec = ChannelSpec("tanh", s2, 50)
        h = 1e-4 * np.sqrt(v)
        grad = (log_normalizer(r + h, v, y, spec) - log_normalizer(r - h, v, y, spec)) / (2 * h)
        m1, _ = scalar_moments(r, v, y, spec)
        assert v * grad == pytest.approx(m1 - r, abs=1e-6)


def test_second_order_tweedie_finite_difference():
    # per-component posterior variance equals v + v^2 * ds/dr
    for r, v, y, s2 in _FD_GRID:
        spec = ChannelSpec("tanh", s2, 50)
        h = 1e-4 * np.sqrt(v)

        def score(rr):
            m1, _ = scalar_moments(rr, v, y, spec)
            return (m1 - rr) / v

        ds = (score(r + h) - score(r - h)) / (2 * h)
        m1, m2 = scalar_moments(r, v, y, spec)
        assert m2 - m1 * m1 == pytest.approx(v + v * v * ds, abs=1e-5)


def test_monotone_quadrature_convergence():
    for r, v, y, s2 in _CONVERGED_GRID:
        m50, _ = scalar_moments(r, v, y, ChannelSpec("tanh", s2, 50))
        m100, _ = scalar_moments(r, v, y, ChannelSpec("tanh", s2, 100))
        assert abs(m50 - m100) <= 1e-9


def test_posterior_variance_never_exceeds_prior():
    for r, v, y, s2 in _CONVERGED_GRID:
        m1, m2 = scalar_moments(r, v, y, ChannelSpec("tanh", s2, 50))
        assert m2 - m1 * m1 <= v + 1e-9


def test_underflow_fallback_returns_prior_moments():
    spec = ChannelSpec("tanh", 1e-3, 50)
    with pytest.warns(RuntimeWarning):
        m1, m2 = scalar_moments(0.0, 1.0, 1e200, spec)
    assert m1 == 0.0
    assert m2 == pytest.approx(1.0)


def test_step_dimension_mismatch():
    with pytest.raises(ValueError):
        likelihood_step(GaussianMessage(np.zeros(3), 1.0), np.zeros(4), ChannelSpec("id", 1.0))

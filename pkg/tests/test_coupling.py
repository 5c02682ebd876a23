import numpy as np
import pytest

from oracles import dense_coupling, log_gaussian_coupling_normalizer
from scvamp.coupling import coupling_posterior, coupling_step, precompute
from scvamp.messages import GaussianMessage


def _msg(mean, v):
    return GaussianMessage(np.asarray(mean, dtype=float), v)


def test_precompute_identity():
    mix = precompute(np.eye(4))
    np.testing.assert_allclose(mix.eigenvalues, 1.0)
    np.testing.assert_allclose(
        mix.eigenvectors @ np.diag(mix.eigenvalues) @ mix.eigenvectors.T, np.eye(4),
        atol=1e-12,
    )


def test_precompute_zero_matrix():
    mix = precompute(np.zeros((2, 2)))
    np.testing.assert_allclose(mix.eigenvalues, 0.0)


def test_precompute_matches_svd():
    rng = np.random.default_rng(5)
    h = rng.normal(size=(4, 4))
    mix = precompute(h)
    sv = np.linalg.svd(h, compute_uv=False)
    np.testing.assert_allclose(np.sort(mix.eigenvalues), np.sort(sv**2), atol=1e-10)


def test_precompute_gram_reconstruction():
    rng = np.random.default_rng(6)
    for m, n in [(6, 4), (3, 5), (16, 16)]:
        h = rng.normal(size=(m, n))
        mix = precompute(h)
        gram = mix.eigenvectors @ np.diag(mix.eigenvalues) @ mix.eigenvectors.T
        np.testing.assert_allclose(gram, h.T @ h, atol=1e-10)


def test_precompute_eigenvalues_clamped_nonnegative():
    rng = np.random.default_rng(7)
    h = rng.normal(size=(3, 12))  # rank-deficient gram, round-off eigenvalues near 0
    mix = precompute(h)
    assert np.all(mix.eigenvalues >= 0.0)


def test_precompute_rejects_non_finite():
    with pytest.raises(ValueError):
        precompute(np.array([[1.0, np.nan]]))


def test_posterior_equal_precision_average():
    mix = precompute(np.eye(4))
    x, w = coupling_posterior(_msg(np.zeros(4), 1.0), _msg(2 * np.ones(4), 1.0), mix)
    np.testing.assert_allclose(x.mean, 1.0)
    assert x.variance == pytest.approx(0.5)
    assert x.alpha == pytest.approx(0.5)
    np.testing.assert_allclose(w.mean, x.mean)
    assert w.alpha == pytest.approx(0.5)


def test_posterior_zero_matrix_uninformative_w_side():
    mix = precompute(np.zeros((3, 3)))
    rx = _msg([0.5, -1.0, 2.0], 0.7)
    x, w = coupling_posterior(rx, _msg(np.ones(3), 1.3), mix)
    np.testing.assert_allclose(x.mean, rx.mean, rtol=1e-14)
    assert x.alpha == pytest.approx(1.0 - 1e-6)  # raw 1 clipped down
    np.testing.assert_allclose(w.mean, 0.0)
    assert w.variance == 0.0


def test_posterior_matches_dense_inverse_oracle():
    rng = np.random.default_rng(8)
    for _ in range(30):
        m = int(rng.integers(2, 9))
        n = int(rng.integers(2, 9))
        h = rng.normal(size=(m, n))
        vx = float(np.exp(rng.uniform(-1.5, 1.5)))
        vw = float(np.exp(rng.uniform(-1.5, 1.5)))
        rx = rng.normal(size=n)
        rw = rng.normal(size=m)
        mix = precompute(h)
        x, w = coupling_posterior(_msg(rx, vx), _msg(rw, vw), mix)
        xo, wo, vxo, vwo, axo, awo = dense_coupling(h, rx, vx, rw, vw)
        np.testing.assert_allclose(x.mean, xo, atol=1e-10)
        np.testing.assert_allclose(w.mean, wo, atol=1e-10)
        assert x.variance == pytest.approx(vxo, abs=1e-10)
        assert w.variance == pytest.approx(vwo, abs=1e-10)
        assert x.alpha == pytest.approx(axo, abs=1e-10)
        assert w.alpha == pytest.approx(awo, abs=1e-10)


def test_posterior_spec_instance_6x4():
    rng = np.random.default_rng(9)
    h = rng.normal(size=(6, 4))
    rx, rw = rng.normal(size=4), rng.normal(size=6)
    mix = precompute(h)
    x, w = coupling_posterior(_msg(rx, 0.7), _msg(rw, 1.3), mix)
    xo, wo, vxo, vwo, *_ = dense_coupling(h, rx, 0.7, rw, 1.3)
    np.testing.assert_allclose(x.mean, xo, atol=1e-10)
    assert x.variance == pytest.approx(vxo, abs=1e-10)
    assert w.variance == pytest.approx(vwo, abs=1e-10)


def test_w_mean_is_exactly_h_times_x_mean():
    rng = np.random.default_rng(10)
    h = rng.normal(size=(5, 7))
    mix = precompute(h)
    x, w = coupling_posterior(_msg(rng.normal(size=7), 0.9), _msg(rng.normal(size=5), 0.4), mix)
    np.testing.assert_array_equal(w.mean, h @ x.mean)


def test_coupling_step_extrinsic_example():
    mix = precompute(np.eye(4))
    ext_x, ext_w, x_post = coupling_step(_msg(np.zeros(4), 1.0), _msg(2 * np.ones(4), 1.0), mix)
    np.testing.assert_allclose(ext_x.mean, 2.0, rtol=1e-14)
    assert ext_x.variance == pytest.approx(1.0, rel=1e-12)
    np.testing.assert_allclose(x_post, 1.0)


def test_trace_identity_alpha_versus_dense():
    rng = np.random.default_rng(12)
    for _ in range(20):
        n = int(rng.integers(2, 17))
        m = int(rng.integers(2, 17))
        h = rng.normal(size=(m, n))
        vx = float(np.exp(rng.uniform(-1, 1)))
        vw = float(np.exp(rng.uniform(-1, 1)))
        mix = precompute(h)
        x, _ = coupling_posterior(_msg(np.zeros(n), vx), _msg(np.zeros(m), vw), mix)
        sigma = np.linalg.inv(np.eye(n) / vx + h.T @ h / vw)
        assert x.alpha == pytest.approx(np.trace(sigma) / n / vx, rel=1e-12)


def test_stein_divergence_matches_alpha():
    # averaged d x_mean_i / d rx_i by central differences equals alpha_x
    rng = np.random.default_rng(13)
    h = rng.normal(size=(5, 4))
    mix = precompute(h)
    vx, vw = 0.6, 1.1
    rx = rng.normal(size=4)
    rw = rng.normal(size=5)
    x, _ = coupling_posterior(_msg(rx, vx), _msg(rw, vw), mix)
    step = 1e-5 * np.sqrt(vx)
    div = 0.0
    for i in range(4):
        up, dn = rx.copy(), rx.copy()
        up[i] += step
        dn[i] -= step
        xp, _ = coupling_posterior(_msg(up, vx), _msg(rw, vw), mix)
        xm, _ = coupling_posterior(_msg(dn, vx), _msg(rw, vw), mix)
        div += (xp.mean[i] - xm.mean[i]) / (2 * step)
    assert div / 4 == pytest.approx(x.alpha, abs=1e-6)


def test_tweedie_form_finite_difference():
    # x_mean - rx equals vx * grad log Z, Z the closed-form Gaussian normalizer
    rng = np.random.default_rng(14)
    for m, n in [(3, 2), (4, 4), (2, 4)]:
        h = rng.normal(size=(m, n))
        vx = 0.8
        vw = 0.5
        rx = rng.normal(size=n)
        rw = rng.normal(size=m)
        mix = precompute(h)
        x, _ = coupling_posterior(_msg(rx, vx), _msg(rw, vw), mix)
        grad = np.zeros(n)
        hstep = 1e-6
        for i in range(n):
            up, dn = rx.copy(), rx.copy()
            up[i] += hstep
            dn[i] -= hstep
            grad[i] = (
                log_gaussian_coupling_normalizer(h, up, vx, rw, vw)
                - log_gaussian_coupling_normalizer(h, dn, vx, rw, vw)
            ) / (2 * hstep)
        np.testing.assert_allclose(x.mean - rx, vx * grad, atol=1e-6)


def test_blockdiag_fast_path_matches_dense():
    rng = np.random.default_rng(15)
    b, reps = 4, 3
    block = rng.normal(size=(b, b))
    full = np.zeros((b * reps, b * reps))
    for i in range(reps):
        full[i * b:(i + 1) * b, i * b:(i + 1) * b] = block
    fast = precompute(full, block_size=b)
    dense = precompute(full)
    rx = _msg(rng.normal(size=b * reps), 0.7)
    rw = _msg(rng.normal(size=b * reps), 1.4)
    xf, wf = coupling_posterior(rx, rw, fast)
    xd, wd = coupling_posterior(rx, rw, dense)
    np.testing.assert_allclose(xf.mean, xd.mean, atol=1e-12)
    np.testing.assert_allclose(wf.mean, wd.mean, atol=1e-12)
    assert xf.variance == pytest.approx(xd.variance, abs=1e-12)
    assert wf.variance == pytest.approx(wd.variance, abs=1e-12)
    assert xf.alpha == pytest.approx(xd.alpha, abs=1e-12)
    assert wf.alpha == pytest.approx(wd.alpha, abs=1e-12)


def test_blockdiag_equals_per_block_concatenation():
    rng = np.random.default_rng(16)
    b = 3
    block = rng.normal(size=(b, b))
    full = np.zeros((2 * b, 2 * b))
    full[:b, :b] = block
    full[b:, b:] = block
    mix_full = precompute(full, block_size=b)
    mix_block = precompute(block)
    rx = rng.normal(size=2 * b)
    rw = rng.normal(size=2 * b)
    x_full, w_full = coupling_posterior(_msg(rx, 0.9), _msg(rw, 0.6), mix_full)
    parts_x, parts_w, alphas = [], [], []
    for i in range(2):
        xs, ws = coupling_posterior(
            _msg(rx[i * b:(i + 1) * b], 0.9), _msg(rw[i * b:(i + 1) * b], 0.6), mix_block
        )
        parts_x.append(xs.mean)
        parts_w.append(ws.mean)
        alphas.append(xs.alpha)
    np.testing.assert_allclose(x_full.mean, np.concatenate(parts_x), atol=1e-12)
    np.testing.assert_allclose(w_full.mean, np.concatenate(parts_w), atol=1e-12)
    assert x_full.alpha == pytest.approx(np.mean(alphas), abs=1e-12)


def test_blockdiag_validation():
    block = np.ones((2, 2))
    bad = np.zeros((4, 4))
    bad[:2, :2] = block
    bad[2:, 2:] = 2 * block  # blocks differ
    with pytest.raises(ValueError):
        precompute(bad, block_size=2)
    bad2 = np.zeros((4, 4))
    bad2[:2, :2] = block
    bad2[2:, 2:] = block
    bad2[0, 3] = 1e-9  # off-block leakage
    with pytest.raises(ValueError):
        precompute(bad2, block_size=2)


def test_dimension_mismatch_errors():
    mix = precompute(np.eye(3))
    with pytest.raises(ValueError):
        coupling_posterior(_msg(np.zeros(2), 1.0), _msg(np.zeros(3), 1.0), mix)
    with pytest.raises(ValueError):
        coupling_posterior(_msg(np.zeros(3), 1.0), _msg(np.zeros(4), 1.0), mix)

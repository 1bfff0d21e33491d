import logging
import math

import numpy as np
import pytest
import scipy.linalg

from onlinetensor.baselines import omeg_run
from onlinetensor.errors import IndexOutOfRange, InvalidBudget, SpectralNormViolation
from onlinetensor.oteg import (
    DenseOteg,
    OtegConfig,
    SquaredLoss,
    StructuredOteg,
    ZeroLoss,
    compute_tau_beta,
    initial_state,
    loss_gradient_tensor,
    nominal_learning_rate,
    oteg_run,
    prediction_operator,
    regret_bound,
    regret_threshold,
    squared_loss_game,
)
from onlinetensor.spectral import LEARNER_NORM, embed_phi
from onlinetensor.tensor_core import fft3, mirror_faces


def config(m=2, n=3, d=4, T=100, **kw):
    kw.setdefault("tau", np.full(d, 2.0))
    kw.setdefault("beta", np.full(d, 1.0))
    return OtegConfig(m=m, n=n, d=d, T=T, **kw)


def random_game(rng, shape, T):
    m, n, d = shape
    A = rng.uniform(-1, 1, shape)
    idx = np.column_stack([rng.integers(0, s, T) for s in shape])
    return A, idx


def random_block_state(rng, m, n, d):
    """Hermitian faces, conjugate-symmetric across faces."""
    N = 2 * (m + n)
    half = d // 2 + 1
    Z = rng.standard_normal((half, N, N)) + 1j * rng.standard_normal((half, N, N))
    H = Z + np.conj(np.swapaxes(Z, 1, 2))
    H[0] = H[0].real
    if d % 2 == 0:
        H[d // 2] = H[d // 2].real
    return mirror_faces(H, d)


def test_config_derived_quantities():
    c = config(m=3, n=4, d=2, G=1.5)
    assert (c.p, c.N) == (7, 14)
    np.testing.assert_allclose(c.gamma(), [9.0, 9.0])
    assert c.spectral_policy == "raise"
    assert config(eta_mode="experimental").spectral_policy == "warn"


def test_config_validation():
    with pytest.raises(InvalidBudget):
        config(d=3, tau=[1.0, 2.0, 3.0])
    with pytest.raises(InvalidBudget):
        config(d=2, tau=[1.0, 1.0], beta=[0.1, 0.1])
    with pytest.raises(ValueError):
        config(eta_mode="fast")
    with pytest.raises(ValueError):
        config(T=0)
    with pytest.raises(ValueError):
        config(spectral_policy="ignore")


def test_prediction_operator_simple_states(rng):
    c = config()
    assert prediction_operator(np.zeros((4, 10, 10)), 1, 2, 3, 2) == 0
    W1 = initial_state(c)
    for idx in np.ndindex(2, 3, 4):
        assert prediction_operator(W1, *idx, m=2) == 0
    A = rng.uniform(-1, 1, (2, 3, 4))
    W = embed_phi(A)
    for idx in np.ndindex(A.shape):
        assert prediction_operator(W, *idx, m=2) == pytest.approx(A[idx], abs=1e-8)


def test_prediction_operator_out_of_range():
    W = np.zeros((4, 10, 10))
    for bad in [(2, 0, 0), (0, 3, 0), (0, 0, 4), (-1, 0, 0)]:
        with pytest.raises(IndexOutOfRange):
            prediction_operator(W, *bad, m=2)
    with pytest.raises(IndexError):
        loss_gradient_tensor(1.0, 0, 3, 0, 2, 3, 4)


def test_loss_gradient_structure(rng):
    m, n, d = 2, 3, 5
    assert not loss_gradient_tensor(0.0, 1, 2, 3, m, n, d).any()
    for _ in range(10):
        g = rng.uniform(-3, 3)
        i, j, k = rng.integers(0, m), rng.integers(0, n), rng.integers(0, d)
        L = loss_gradient_tensor(g, i, j, k, m, n, d)
        p = m + n
        assert np.count_nonzero(np.abs(L).sum(axis=0)) == 4
        col = g * np.exp(-2j * np.pi * np.arange(d) * k / d)
        np.testing.assert_allclose(L[:, i, j + m], col)
        np.testing.assert_allclose(L[:, i + p, j + m + p], -col)
        np.testing.assert_allclose(L, np.conj(np.swapaxes(L, 1, 2)))
        np.testing.assert_allclose(np.einsum("kab,kba->k", L, L).real, 4 * g * g)
        np.testing.assert_allclose(np.abs(np.linalg.eigvalsh(L)).max(), abs(g))


def test_linear_loss_identity(rng):
    m, n, d = 2, 3, 4
    for _ in range(10):
        W = random_block_state(rng, m, n, d)
        g = rng.uniform(-2, 2)
        i, j, k = rng.integers(0, m), rng.integers(0, n), rng.integers(0, d)
        L = loss_gradient_tensor(g, i, j, k, m, n, d)
        via_blocks = np.trace(scipy.linalg.block_diag(*W) @ scipy.linalg.block_diag(*L))
        assert abs(via_blocks.imag) < 1e-8
        assert via_blocks.real == pytest.approx(2 * g * prediction_operator(W, i, j, k, m), abs=1e-8)


def test_nominal_learning_rate_examples():
    c = OtegConfig(m=1, n=1, d=1, tau=[4.0], beta=[1.0], G=0.5, T=math.log(4))
    # log N * sum(tau) / (T * 4 G^2 * sum(beta)) = log 4 * 4 / (log 4 * 1 * 1) = 4
    assert nominal_learning_rate(c) == pytest.approx(2.0)
    c2 = OtegConfig(m=1, n=1, d=1, tau=[4.0], beta=[1.0], G=0.5, T=2 * math.log(4))
    assert nominal_learning_rate(c2) == pytest.approx(2.0 / math.sqrt(2))
    c3 = OtegConfig(m=1, n=1, d=1, tau=[4.0], beta=[1.0], G=0.5, T=math.log(4), eta_mode="experimental")
    assert nominal_learning_rate(c3) == pytest.approx(16.0)
    c4 = OtegConfig(m=1, n=1, d=1, tau=[4.0], beta=[1.0], G=0.5, T=math.log(4), eta_multiplier=3.0)
    assert nominal_learning_rate(c4) == pytest.approx(6.0)
    with pytest.raises(ValueError):
        nominal_learning_rate(c, G=0.0)


def test_nominal_learning_rate_formula(rng):
    c = config(m=3, n=2, d=4, T=250, G=0.7, tau=[1.0, 2.0, 3.0, 2.0], beta=[0.5, 1.0, 1.5, 2.0])
    expected = math.sqrt(math.log(10) * 8.0 / (250 * 4 * 0.49 * 5.0))
    assert nominal_learning_rate(c) == pytest.approx(expected)


def test_regret_bound_examples():
    c = OtegConfig(m=1, n=1, d=1, tau=[1.0], beta=[1.0], G=1.0, T=100)
    assert regret_bound(c) == pytest.approx(2 * math.sqrt(100 * math.log(4)))
    assert regret_bound(c) == pytest.approx(23.548, abs=1e-3)
    small = OtegConfig(m=1, n=1, d=1, tau=[10.0], beta=[1.0], G=1.0, T=5)
    assert small.T < regret_threshold(small)
    assert regret_bound(small) == pytest.approx(10.0)
    twice = OtegConfig(m=1, n=1, d=1, tau=[1.0], beta=[1.0], G=2.0, T=100)
    assert regret_bound(twice) == pytest.approx(2 * regret_bound(c))


def test_compute_tau_beta(rng):
    p = compute_tau_beta(np.zeros((100, 150, 2)), amplitude=0.0)
    np.testing.assert_allclose(p.beta, [math.sqrt(250)] * 2)
    assert not p.tau.any()
    with pytest.raises(InvalidBudget):
        OtegConfig(100, 150, 2, p.tau, p.beta, T=10)
    M = rng.standard_normal((3, 4, 5))
    exact = compute_tau_beta(M, amplitude=0.0)
    nuclear = np.linalg.svd(fft3(M, norm=LEARNER_NORM), compute_uv=False).sum(axis=1)
    np.testing.assert_allclose(exact.tau, 2 * nuclear)
    noisy = compute_tau_beta(M, amplitude=5.0, rng=np.random.default_rng(1))
    noise = noisy.tau - exact.tau
    assert np.all((noise >= 0) & (noise <= 5))
    np.testing.assert_allclose(noisy.tau, noisy.tau[[0, 4, 3, 2, 1]])


def test_zero_loss_keeps_initial_state():
    c = config(T=20)
    plays = [(0, 1, 2, ZeroLoss())] * 20
    for engine in ("dense", "structured"):
        tr = oteg_run(c, plays, engine=engine, keep_learner=True)
        assert tr.cumulative_loss == 0
        np.testing.assert_allclose(tr.learner.faces(), initial_state(c), atol=1e-14)


def test_single_entry_converges():
    c = OtegConfig(m=2, n=2, d=2, tau=[3.0, 3.0], beta=[2.0, 2.0], T=500, G=2.0)
    y = 0.6
    tr = oteg_run(c, [(1, 0, 1, SquaredLoss(y))] * 500)
    gaps = np.abs(y - tr.p)
    assert gaps[-1] < gaps[0] / 10
    assert np.all(np.diff(gaps[50:]) <= 1e-12)


@pytest.mark.parametrize("shape", [(2, 3, 1), (3, 2, 4), (2, 2, 5)])
@pytest.mark.parametrize("per_face", [False, True])
def test_structured_engine_matches_dense(rng, shape, per_face):
    A, idx = random_game(rng, shape, 150)
    params = compute_tau_beta(A, rng=rng)
    c = OtegConfig(*shape, params.tau, params.beta, T=150, adaptive_G=True, eta_mode="experimental",
                   per_face=per_face)
    dense = oteg_run(c, squared_loss_game(A, idx), engine="dense", keep_learner=True)
    fast = oteg_run(c, squared_loss_game(A, idx), engine="structured", keep_learner=True)
    np.testing.assert_allclose(fast.p, dense.p, atol=1e-10)
    np.testing.assert_allclose(fast.final, dense.final, atol=1e-10)
    np.testing.assert_allclose(fast.learner.faces(), dense.learner.faces(), atol=1e-10)
    np.testing.assert_allclose(fast.learner.face_traces(),
                               np.trace(dense.learner.faces(), axis1=1, axis2=2).real[: shape[2] // 2 + 1])


def test_render_matches_prediction_operator(rng):
    A, idx = random_game(rng, (2, 3, 4), 60)
    params = compute_tau_beta(A, rng=rng)
    c = OtegConfig(2, 3, 4, params.tau, params.beta, T=60, G=4.0)
    tr = oteg_run(c, squared_loss_game(A, idx), engine="dense", keep_learner=True)
    W = tr.learner.faces()
    for ijk in np.ndindex(2, 3, 4):
        assert tr.final[ijk] == pytest.approx(prediction_operator(W, *ijk, m=2), abs=1e-10)


def test_d1_reduces_to_omeg(rng):
    A = rng.uniform(-1, 1, (4, 3, 1))
    idx = np.column_stack([rng.integers(0, 4, 500), rng.integers(0, 3, 500), np.zeros(500, int)])
    tau = compute_tau_beta(A, amplitude=0.0).tau + 1.0
    c = OtegConfig(4, 3, 1, tau, [math.sqrt(7)], T=500, adaptive_G=True, eta_mode="experimental")
    tensor = oteg_run(c, squared_loss_game(A, idx), engine="dense")
    matrix = omeg_run(A, idx, mode=1, tau=tau)
    np.testing.assert_allclose(matrix.p, tensor.p, atol=1e-10)


def test_gamma_and_spectral_constraints(rng):
    A, idx = random_game(rng, (3, 2, 4), 200)
    params = compute_tau_beta(A, rng=rng)
    c = OtegConfig(3, 2, 4, params.tau, params.beta, T=200, adaptive_G=True, eta_mode="experimental")
    tr = oteg_run(c, squared_loss_game(A, idx))
    for t in range(tr.T):
        L = loss_gradient_tensor(tr.g[t], *tr.indices[t], 3, 2, 4)
        np.testing.assert_allclose(np.einsum("kab,kba->k", L, L).real, 4 * tr.g[t] ** 2, rtol=1e-12)
        assert 4 * tr.g[t] ** 2 <= 4 * tr.G[t] ** 2
        assert np.abs(np.linalg.eigvalsh(L)).max() <= 2 * tr.G[t] + 1e-8


def test_adaptive_g_updates_before_eta(rng):
    A, idx = random_game(rng, (2, 2, 2), 50)
    params = compute_tau_beta(A, rng=rng)
    c = OtegConfig(2, 2, 2, params.tau, params.beta, T=50, adaptive_G=True, eta_mode="experimental")
    tr = oteg_run(c, squared_loss_game(A, idx))
    np.testing.assert_allclose(tr.G, np.maximum.accumulate(np.maximum(np.abs(tr.g), c.G0)))
    for t in range(tr.T):
        assert tr.eta[t] == pytest.approx(nominal_learning_rate(c, tr.G[t]))


def test_linearization_inequality(rng):
    for _ in range(200):
        y, u = rng.uniform(-1, 1, 2)
        p = rng.uniform(-3, 3)
        loss = SquaredLoss(y)
        g = loss.derivative(p)
        assert 2 * g * (p - u) >= 2 * (loss(p) - loss(u)) - 1e-12


def test_truncation(rng):
    c = OtegConfig(1, 1, 1, [50.0], [1.0], T=200, G=40.0, truncate=True, eta_multiplier=4.0,
                   spectral_policy="warn")
    tr = oteg_run(c, [(0, 0, 0, SquaredLoss(10.0))] * 200)
    assert np.all(np.abs(tr.p) <= 1.0)
    assert tr.p.max() == 1.0


def test_spectral_policy(rng, caplog):
    A, idx = random_game(rng, (2, 2, 2), 30)
    params = compute_tau_beta(A, rng=rng)
    strict = OtegConfig(2, 2, 2, params.tau, params.beta, T=30, G=1.0, eta_multiplier=500.0,
                        spectral_policy="raise")
    with pytest.raises(SpectralNormViolation):
        oteg_run(strict, squared_loss_game(A, idx))
    loose = OtegConfig(2, 2, 2, params.tau, params.beta, T=30, G=1.0, eta_multiplier=500.0,
                       spectral_policy="warn")
    with caplog.at_level(logging.WARNING):
        tr = oteg_run(loose, squared_loss_game(A, idx))
    assert tr.config["spectral_violations"] > 0
    assert any("eta*||L||" in r.message for r in caplog.records)


@pytest.mark.parametrize("seed", range(5))
def test_regret_within_bound_small_games(seed):
    rng = np.random.default_rng(seed)
    shape = tuple(int(v) for v in rng.integers(1, 4, 3))
    from onlinetensor.spectral import pn_decompose

    A = rng.uniform(-1, 1, shape)
    dec = pn_decompose(A)
    beta = dec.beta * max(1.0, 1.0 / dec.beta.sum())
    T = 300
    c = OtegConfig(*shape, dec.tau + 1e-9, beta, T=T, G=4.0, truncate=True, spectral_policy="warn")
    idx = np.column_stack([rng.integers(0, s, T) for s in shape])
    tr = oteg_run(c, squared_loss_game(A, idx))
    assert np.all(np.isfinite(tr.p))
    assert tr.cumulative_loss <= regret_bound(c)

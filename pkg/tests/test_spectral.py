import numpy as np
import pytest
import scipy.linalg

from onlinetensor.errors import DimensionMismatch, NotHermitianFaces, NotPD, NotSquare
from onlinetensor.oteg import prediction_operator
from onlinetensor.spectral import (
    LEARNER_NORM,
    complex_gradient_check,
    embed_phi,
    face_log,
    is_positive_definite,
    pn_decompose,
    sym_embed,
    tensor_exp,
    tensor_log,
    von_neumann_divergence,
    von_neumann_entropy,
)
from onlinetensor.tensor_core import (
    blkdiag,
    fft3,
    identity_tensor,
    inner_product,
    t_product,
    tensor_trace,
)
from oracles import random_pd_faces, random_pd_tensor, series_exp


def test_is_positive_definite():
    assert is_positive_definite(np.broadcast_to(np.eye(3), (2, 3, 3)))
    faces = np.broadcast_to(np.eye(3), (2, 3, 3)).copy()
    faces[1, 2, 2] = -1
    assert not is_positive_definite(faces)
    faces = np.broadcast_to(np.eye(3), (2, 3, 3)).copy()
    faces[0, 0, 1] = 0.5
    assert not is_positive_definite(faces)
    with pytest.raises(NotSquare):
        is_positive_definite(np.zeros((2, 3, 4)))


def test_embedding_plus_ridge_is_pd(rng):
    W = embed_phi(rng.uniform(-1, 1, (3, 4, 3)))
    assert not is_positive_definite(W)
    assert is_positive_definite(W + 1e-3 * np.eye(W.shape[1]), tol=1e-6)


def test_tensor_exp_of_zero_is_identity():
    np.testing.assert_allclose(tensor_exp(np.zeros((3, 3, 4))), identity_tensor(3, 4), atol=1e-14)


def test_tensor_exp_log_round_trips(rng):
    W = random_pd_tensor(rng, 4, 5)
    np.testing.assert_allclose(tensor_exp(tensor_log(W)), W, atol=1e-8)
    S = rng.standard_normal((4, 4, 5))
    S = S + S.transpose(1, 0, 2)[:, :, np.r_[0, np.arange(4, 0, -1)]]
    np.testing.assert_allclose(tensor_log(tensor_exp(S)), S, atol=1e-8)


def test_tensor_exp_matches_series(rng):
    S = rng.standard_normal((3, 3, 4))
    S = S + S.transpose(1, 0, 2)[:, :, np.r_[0, np.arange(3, 0, -1)]]
    S *= 0.5 / np.max(np.linalg.norm(fft3(S), ord=2, axis=(1, 2)))
    assert np.max(np.abs(tensor_exp(S) - series_exp(S, terms=9))) < 1e-6


def test_tensor_exp_commuting_sum(rng):
    S = rng.standard_normal((3, 3, 4))
    S = 0.2 * (S + S.transpose(1, 0, 2)[:, :, np.r_[0, np.arange(3, 0, -1)]])
    S2 = t_product(S, S)
    lhs = t_product(tensor_exp(S), tensor_exp(S2))
    np.testing.assert_allclose(lhs, tensor_exp(S + S2), atol=1e-6)


def test_tensor_log_identity_and_errors(rng):
    np.testing.assert_allclose(tensor_log(identity_tensor(3, 2)), 0, atol=1e-14)
    singular = identity_tensor(3, 2)
    singular[2, 2, 0] = 0
    with pytest.raises(NotPD):
        tensor_log(singular)
    with pytest.raises(NotSquare):
        tensor_log(np.zeros((2, 3, 2)))
    with pytest.raises(NotHermitianFaces):
        tensor_exp(rng.standard_normal((3, 3, 2)))


def test_face_log_clamps_tiny_negative_eigenvalues():
    faces = np.diag([1.0, -1e-11])[None].astype(complex)
    assert np.isfinite(face_log(faces)).all()
    with pytest.raises(NotPD):
        face_log(np.diag([1.0, -1e-9])[None].astype(complex))
    with pytest.raises(NotPD):
        face_log(np.diag([1.0, 1e-13])[None].astype(complex), strict=True)


def test_entropy_closed_forms(rng):
    N, d, c = 4, 3, 2.5
    assert von_neumann_entropy(np.broadcast_to(np.eye(N), (d, N, N))) == pytest.approx(-N * d)
    assert von_neumann_entropy(c * np.broadcast_to(np.eye(N), (d, N, N))) == pytest.approx(
        d * N * (c * np.log(c) - c))
    W = random_pd_faces(rng, d, N)
    B = blkdiag(W)
    via_matrix = np.trace(B @ scipy.linalg.logm(B) - B).real
    assert von_neumann_entropy(W) == pytest.approx(via_matrix, abs=1e-10)


def test_entropy_spatial_domain(rng):
    W = random_pd_tensor(rng, 3, 4)
    spatial = tensor_trace(t_product(W, tensor_log(W)) - W)
    assert von_neumann_entropy(fft3(W)) == pytest.approx(spatial, abs=1e-8)


def test_divergence_closed_form_and_zero(rng):
    N, d = 3, 2
    eye = np.broadcast_to(np.eye(N), (d, N, N)).astype(complex)
    assert von_neumann_divergence(2 * eye, eye) == pytest.approx(d * N * (2 * np.log(2) - 1))
    W = random_pd_faces(rng, d, N)
    assert abs(von_neumann_divergence(W, W)) < 1e-10
    with pytest.raises(DimensionMismatch):
        von_neumann_divergence(W, eye[:1])


def test_divergence_nonnegative(rng):
    for _ in range(200):
        Wp, W = random_pd_faces(rng, 2, 3), random_pd_faces(rng, 2, 3)
        assert von_neumann_divergence(Wp, W) >= -1e-8


def test_gradient_check_linear_and_trace(rng):
    X = rng.standard_normal((3, 3, 4))
    C = rng.standard_normal((3, 3, 4))
    # trace: the Fourier gradient of sum_k Tr(X_k) is the identity in every face
    eye = lambda Xh: np.broadcast_to(np.eye(3), Xh.shape).astype(complex)
    assert complex_gradient_check(tensor_trace, eye, X) < 1e-6
    Ch = fft3(C)
    assert complex_gradient_check(lambda Y: inner_product(Y, C), lambda Xh: Ch, X) < 1e-6


def test_gradient_check_entropy(rng):
    W = random_pd_tensor(rng, 3, 4)
    f = lambda Y: von_neumann_entropy(fft3(Y))
    grad = lambda Wh: face_log(Wh)
    assert complex_gradient_check(f, grad, W, symmetric=True) < 1e-5


def test_gradient_check_catches_wrong_gradient(rng):
    X = rng.standard_normal((2, 2, 3))
    wrong = lambda Xh: 2 * np.broadcast_to(np.eye(2), Xh.shape).astype(complex)
    assert complex_gradient_check(tensor_trace, wrong, X) > 0.5


def test_sym_embed(rng):
    A = rng.standard_normal((3, 4, 5))
    S = sym_embed(A)
    assert S.shape == (5, 7, 7)
    np.testing.assert_allclose(S, np.conj(np.swapaxes(S, 1, 2)))
    np.testing.assert_array_equal(S[:, :3, 3:], fft3(A, norm=LEARNER_NORM))
    vals = np.linalg.eigvalsh(S)
    np.testing.assert_allclose(np.sort(vals, axis=1), np.sort(-vals, axis=1), atol=1e-10)
    assert not sym_embed(np.zeros((2, 3, 2))).any()


def test_pn_decompose(rng):
    dec = pn_decompose(np.zeros((3, 4, 2)))
    assert not dec.P.any() and not dec.N.any() and not dec.tau.any()
    A = rng.standard_normal((3, 4, 2))
    dec = pn_decompose(A)
    np.testing.assert_allclose(dec.P - dec.N, sym_embed(A), atol=1e-10)
    nuclear = np.linalg.svd(fft3(A, norm=LEARNER_NORM), compute_uv=False).sum(axis=1)
    np.testing.assert_allclose(dec.tau, 2 * nuclear, atol=1e-8)
    for M in (dec.P, dec.N):
        assert np.linalg.eigvalsh(M).min() > -1e-10
        assert np.real(np.diagonal(M, axis1=1, axis2=2)).max() <= dec.beta.max() + 1e-8


def test_embed_phi(rng):
    assert not embed_phi(np.zeros((2, 3, 2))).any()
    A = rng.uniform(-1, 1, (4, 5, 3))
    W = embed_phi(A)
    for idx in np.ndindex(A.shape):
        assert prediction_operator(W, *idx, m=4) == pytest.approx(A[idx], abs=1e-8)
    np.testing.assert_allclose(np.trace(W, axis1=1, axis2=2).real, pn_decompose(A).tau, atol=1e-10)

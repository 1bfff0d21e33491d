"""Fast invariant checks behind ``onlinetensor verify``.

Each check returns ``(ok, detail)``; :func:`run_checks` runs them all.
"""
from __future__ import annotations

import numpy as np

from .baselines import flatten_mode, forel_update, ForelState, svt_faces, unflatten_mode
from .oteg import (OtegConfig, loss_gradient_tensor, oteg_run, prediction_operator, regret_bound,
                   squared_loss_game)
from .spectral import embed_phi, pn_decompose, tensor_exp, tensor_log, von_neumann_divergence
from .tensor_core import fft3, identity_tensor, t_product, t_svd, t_transpose, tnn


def _circular_product(A, B):
    n3 = A.shape[2]
    C = np.zeros((A.shape[0], B.shape[1], n3))
    for k in range(n3):
        for l in range(n3):
            C[:, :, k] += A[:, :, (k - l) % n3] @ B[:, :, l]
    return C


def check_t_product(rng):
    A, B = rng.standard_normal((4, 3, 5)), rng.standard_normal((3, 2, 5))
    err = np.linalg.norm(t_product(A, B) - _circular_product(A, B)) / np.linalg.norm(_circular_product(A, B))
    return err < 1e-8, f"relative error {err:.2e}"


def check_t_svd(rng):
    X = rng.standard_normal((5, 4, 6))
    f = t_svd(X)
    err = np.linalg.norm(f.reconstruct() - X) / np.linalg.norm(X)
    return err < 1e-8, f"reconstruction error {err:.2e}"


def check_exp_log(rng):
    B = rng.standard_normal((4, 4, 3))
    X = t_product(B, t_transpose(B)) + 0.5 * identity_tensor(4, 3)
    err = np.max(np.abs(tensor_exp(tensor_log(X)) - X))
    return err < 1e-8, f"exp(log X) error {err:.2e}"


def check_divergence(rng):
    worst = np.inf
    for _ in range(20):
        W = []
        for _ in range(2):
            Z = rng.standard_normal((3, 4, 4)) + 1j * rng.standard_normal((3, 4, 4))
            W.append(Z @ np.conj(np.swapaxes(Z, 1, 2)) + 0.1 * np.eye(4))
        worst = min(worst, von_neumann_divergence(W[0], W[1]))
    return worst >= -1e-8, f"min divergence {worst:.2e}"


def check_embedding(rng):
    A = rng.uniform(-1, 1, (6, 7, 4))
    W = embed_phi(A)
    err = max(abs(prediction_operator(W, i, j, k, 6) - A[i, j, k]) for i, j, k in np.ndindex(A.shape))
    return err < 1e-8, f"max prediction error {err:.2e}"


def check_gradient_tensor(rng):
    g = rng.uniform(-2, 2)
    L = loss_gradient_tensor(g, 1, 2, 3, 3, 4, 5)
    tr = np.real(np.einsum("kab,kba->k", L, L))
    err = np.max(np.abs(tr - 4 * g * g))
    norm = np.max(np.abs(np.linalg.eigvalsh(L)))
    ok = err < 1e-10 and abs(norm - abs(g)) < 1e-10
    return ok, f"Tr(L^2) error {err:.2e}, ||L|| = {norm:.6f} for |g| = {abs(g):.6f}"


def check_regret(rng):
    m, n, d, T = 3, 3, 2, 400
    A = rng.uniform(-1, 1, (m, n, d))
    dec = pn_decompose(A)
    beta = np.maximum(dec.beta, 1.0 / d)
    cfg = OtegConfig(m, n, d, dec.tau, beta, T=T, G=4.0, truncate=True)
    idx = np.column_stack([rng.integers(0, s, T) for s in (m, n, d)])
    tr = oteg_run(cfg, squared_loss_game(A, idx))
    bound = regret_bound(cfg)
    return tr.cumulative_loss <= bound, f"regret {tr.cumulative_loss:.3f} <= bound {bound:.3f}"


def check_svt(rng):
    X = rng.standard_normal((4, 3, 5))
    lam = 0.7
    s = np.linalg.svd(fft3(X), compute_uv=False)
    expected = np.maximum(s - lam, 0).sum()
    err = abs(tnn(svt_faces(X, lam)) - expected)
    return err < 1e-8, f"tnn error {err:.2e}"


def check_fista(rng):
    state = ForelState.empty((4, 3, 5), eta=0.3)
    M = rng.uniform(-1, 1, (4, 3, 5))
    worst = 0.0
    for idx in np.ndindex(4, 3, 2):
        forel_update(state, idx, M[idx])
        worst = max(worst, float(np.max(np.diff(state.history))))
    return worst <= 1e-12, f"largest objective increase {worst:.2e}"


def check_unfold(rng):
    X = rng.standard_normal((3, 4, 5))
    ok = all(np.array_equal(unflatten_mode(flatten_mode(X, md), md, X.shape), X) for md in (1, 2, 3))
    return ok, "flatten/unflatten round trip"


CHECKS = {
    "t_product matches circular convolution": check_t_product,
    "t-SVD reconstructs": check_t_svd,
    "tensor exp/log round trip": check_exp_log,
    "von Neumann divergence non-negative": check_divergence,
    "embedding is read back exactly": check_embedding,
    "gradient tensor trace and norm": check_gradient_tensor,
    "regret within bound": check_regret,
    "SVT shrinks face spectra": check_svt,
    "FISTA objective non-increasing": check_fista,
    "mode unfolding is a bijection": check_unfold,
}


def run_checks(seed: int = 0):
    """Yield ``(name, ok, detail)`` for every check."""
    for number, (name, fn) in enumerate(CHECKS.items()):
        rng = np.random.default_rng([seed, number])
        try:
            ok, detail = fn(rng)
        except Exception as exc:  # report, don't abort the suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        yield name, bool(ok), detail

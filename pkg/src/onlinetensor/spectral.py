"""Positive-definite tensor calculus in the Fourier domain.

PD tensors are handled as face-major complex stacks ``(d, N, N)`` whose faces
are Hermitian. exp, log and entropy are evaluated face-by-face through the
Hermitian eigendecomposition.

The (beta, tau) embedding used by the online learner works in the
``norm="forward"`` Fourier coordinates (forward DFT scaled by ``1/d``, inverse
a plain sum over faces). In those coordinates an entry of the spatial tensor is
read off the Fourier tube without any extra factor, and a loss gradient
built from unit-modulus DFT columns pairs with the state to give exactly
``2 g p``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConvergenceFailure, DimensionMismatch, NotHermitianFaces, NotPD, NotSquare
from .tensor_core import as_tensor3, fft3, ifft3, mirror_faces, real_part

LEARNER_NORM = "forward"
EIGEN_FLOOR = 1e-12
NEGATIVE_EIGEN_TOL = 1e-10
HERMITIAN_TOL = 1e-10

_DUAL_NORM = {"backward": "forward", "forward": "backward", "ortho": "ortho"}


def hermitian_defect(faces: np.ndarray) -> float:
    faces = np.asarray(faces)
    return float(np.max(np.abs(faces - np.conj(np.swapaxes(faces, -1, -2))), initial=0.0))


def _check_square(faces):
    if faces.ndim != 3 or faces.shape[1] != faces.shape[2]:
        raise NotSquare(f"expected a stack of square faces, got {faces.shape}")


def _check_hermitian(faces, tol=HERMITIAN_TOL):
    _check_square(faces)
    scale = 1.0 + float(np.max(np.abs(faces), initial=0.0))
    defect = hermitian_defect(faces)
    if defect > tol * scale:
        raise NotHermitianFaces(f"faces deviate from Hermitian by {defect:.3e}")


def eigh_faces(faces):
    try:
        return np.linalg.eigh(faces)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc


def _from_eig(vals, vecs):
    return (vecs * vals[:, None, :]) @ np.conj(np.swapaxes(vecs, 1, 2))


def is_positive_definite(Xh, tol: float = 1e-10) -> bool:
    """True iff every face is Hermitian within ``tol`` and has ``lambda_min > tol``."""
    Xh = np.asarray(Xh)
    _check_square(Xh)
    if hermitian_defect(Xh) > tol:
        return False
    herm = 0.5 * (Xh + np.conj(np.swapaxes(Xh, 1, 2)))
    vals = np.linalg.eigvalsh(herm)
    return bool(np.all(vals[:, 0] > tol))


def face_exp(faces) -> np.ndarray:
    faces = np.asarray(faces)
    _check_hermitian(faces)
    vals, vecs = eigh_faces(faces)
    return _from_eig(np.exp(vals), vecs)


def face_log(faces, strict: bool = False) -> np.ndarray:
    """Matrix log of every Hermitian face.

    ``strict`` rejects any eigenvalue below :data:`EIGEN_FLOOR`; otherwise
    eigenvalues down to ``-NEGATIVE_EIGEN_TOL`` are clamped to the floor.
    """
    faces = np.asarray(faces)
    _check_hermitian(faces)
    vals, vecs = eigh_faces(faces)
    lo = float(vals.min()) if vals.size else 1.0
    if lo < (EIGEN_FLOOR if strict else -NEGATIVE_EIGEN_TOL):
        raise NotPD(f"minimum eigenvalue {lo:.3e}")
    return _from_eig(np.log(np.maximum(vals, EIGEN_FLOOR)), vecs)


def tensor_exp(X) -> np.ndarray:
    """Tensor exponential under the t-product, for tensors with Hermitian Fourier faces."""
    X = as_tensor3(X)
    if X.shape[0] != X.shape[1]:
        raise NotSquare(f"tensor_exp needs square faces, got {X.shape}")
    return ifft3(face_exp(fft3(X)))


def tensor_log(X) -> np.ndarray:
    """Tensor logarithm; raises :class:`NotPD` unless every Fourier face is PD."""
    X = as_tensor3(X)
    if X.shape[0] != X.shape[1]:
        raise NotSquare(f"tensor_log needs square faces, got {X.shape}")
    return ifft3(face_log(fft3(X), strict=True))


def von_neumann_entropy(Wh) -> float:
    """``sum_k Tr(W_k log W_k - W_k)`` over the Fourier faces of a PD tensor."""
    Wh = np.asarray(Wh)
    _check_hermitian(Wh)
    vals = np.linalg.eigvalsh(Wh)
    if vals.size and vals.min() < -NEGATIVE_EIGEN_TOL:
        raise NotPD(f"minimum eigenvalue {vals.min():.3e}")
    vals = np.maximum(vals, 0.0)
    safe = np.maximum(vals, EIGEN_FLOOR)
    return float(np.sum(vals * np.log(safe) - vals))


def von_neumann_divergence(Wp, W) -> float:
    """Bregman divergence of the entropy, ``Delta(Wp, W)``."""
    Wp, W = np.asarray(Wp), np.asarray(W)
    if Wp.shape != W.shape:
        raise DimensionMismatch(f"divergence between {Wp.shape} and {W.shape}")
    log_w = face_log(W)
    cross = np.sum((Wp - W) * np.conj(log_w))
    value = von_neumann_entropy(Wp) - von_neumann_entropy(W) - cross
    return float(real_part(value))


def fourier_pullback(Gh, norm: str = "backward") -> np.ndarray:
    """Map a Fourier-domain gradient back to the spatial domain.

    Gradients transform with the adjoint of the forward DFT, which for
    ``norm`` is the inverse DFT with the dual normalization. For the
    ``"forward"`` coordinates this is plain :func:`ifft3`.
    """
    return ifft3(Gh, norm=_DUAL_NORM[norm])


def _transpose_partner(idx, n3):
    i, j, t = idx
    return (j, i, (-t) % n3)


def complex_gradient_check(
    f: Callable[[np.ndarray], float],
    fourier_grad: Callable[[np.ndarray], np.ndarray],
    X,
    h: float = 1e-6,
    symmetric: bool = False,
    norm: str = "backward",
) -> float:
    """Largest entrywise gap between a central-difference gradient of ``f`` and
    the pulled-back analytic Fourier gradient.

    ``fourier_grad`` maps the face stack ``fft3(X, norm)`` to the complex
    gradient of the Fourier-domain form of ``f``. With ``symmetric=True`` each
    perturbation is symmetrized under the t-transpose so that PD arguments stay
    Hermitian in every face.
    """
    X = as_tensor3(X)
    n3 = X.shape[2]
    analytic = fourier_pullback(fourier_grad(fft3(X, norm=norm)), norm=norm)
    fd = np.zeros_like(X)
    for idx in np.ndindex(*X.shape):
        E = np.zeros_like(X)
        if symmetric:
            E[idx] += 0.5
            E[_transpose_partner(idx, n3)] += 0.5
        else:
            E[idx] = 1.0
        fd[idx] = (f(X + h * E) - f(X - h * E)) / (2 * h)
    return float(np.max(np.abs(fd - analytic)))


def sym_embed(A, norm: str = LEARNER_NORM) -> np.ndarray:
    """Face-wise Hermitian symmetrization ``[[0, A_k], [A_k^H, 0]]`` of the Fourier faces."""
    Ah = fft3(A, norm=norm)
    d, m, n = Ah.shape
    out = np.zeros((d, m + n, m + n), dtype=np.complex128)
    out[:, :m, m:] = Ah
    out[:, m:, :m] = np.conj(np.swapaxes(Ah, 1, 2))
    return out


@dataclass(frozen=True)
class PNDecomposition:
    """``sym(A_k) = P_k - N_k`` with PSD stacks ``P``, ``N`` of shape ``(d, p, p)``."""

    P: np.ndarray
    N: np.ndarray
    beta: np.ndarray
    tau: np.ndarray


def pn_decompose(A, tol: float = 1e-12) -> PNDecomposition:
    """Split each symmetrized face into its positive and negative spectral parts.

    The split attains the least trace budget, ``tau(k) = 2 * ||A_k||_*``.
    ``beta(k)`` is the largest diagonal entry of ``P_k`` or ``N_k``; it is a
    witness only, not the least feasible beta.
    """
    A = as_tensor3(A)
    d = A.shape[2]
    half = d // 2 + 1
    faces = sym_embed(A)[:half]
    vals, vecs = eigh_faces(faces)
    cut = tol * max(1.0, float(np.max(np.abs(vals), initial=0.0)))
    vals = np.where(np.abs(vals) <= cut, 0.0, vals)
    P = mirror_faces(_from_eig(np.maximum(vals, 0.0), vecs), d)
    N = mirror_faces(_from_eig(np.maximum(-vals, 0.0), vecs), d)
    tr_p = np.real(np.trace(P, axis1=1, axis2=2))
    tr_n = np.real(np.trace(N, axis1=1, axis2=2))
    diag = np.concatenate(
        [np.real(np.diagonal(P, axis1=1, axis2=2)), np.real(np.diagonal(N, axis1=1, axis2=2))],
        axis=1,
    )
    return PNDecomposition(P=P, N=N, beta=diag.max(axis=1), tau=tr_p + tr_n)


def embed_phi(A, decomposition: PNDecomposition | None = None) -> np.ndarray:
    """Block-diagonal PSD embedding with faces ``[[P_k, 0], [0, N_k]]``, shape ``(d, 2p, 2p)``."""
    dec = decomposition if decomposition is not None else pn_decompose(A)
    d, p, _ = dec.P.shape
    out = np.zeros((d, 2 * p, 2 * p), dtype=np.complex128)
    out[:, :p, :p] = dec.P
    out[:, p:, p:] = dec.N
    return out

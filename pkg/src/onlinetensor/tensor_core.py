"""t-product algebra for real third-order tensors.

Spatial tensors are plain ``(n1, n2, n3)`` float arrays indexed ``X[i, j, k]``.
Their Fourier-domain counterparts are *face-major* complex stacks of shape
``(n3, n1, n2)``: ``Xh[k]`` is the k-th frontal face after a DFT along the
tubes, so batched ``numpy.linalg`` routines act on all faces at once.

The default transform is numpy's ``norm="backward"``: unnormalized forward
DFT, ``1/n3``-scaled inverse. With that choice the face-wise product of two
transformed tensors is exactly the transform of their tubal circular
convolution.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    ConvergenceFailure,
    DimensionMismatch,
    ImaginaryResidue,
    NotSquare,
    OffBlockMass,
)

RESIDUE_TOL = 1e-8
RANK_TOL = 1e-10


def as_tensor3(X) -> np.ndarray:
    """Validate and return ``X`` as a finite real 3-D float array."""
    X = np.asarray(X)
    if X.ndim != 3:
        raise DimensionMismatch(f"expected a 3-D tensor, got shape {X.shape}")
    if np.iscomplexobj(X):
        raise TypeError("spatial tensors must be real")
    X = X.astype(np.float64, copy=False)
    if not np.all(np.isfinite(X)):
        raise ValueError("tensor has non-finite entries")
    return X


def real_part(Z: np.ndarray, tol: float = RESIDUE_TOL):
    """Drop the imaginary part of ``Z`` after checking it is negligible.

    Raises :class:`ImaginaryResidue` when ``max|Im| > tol * (1 + max|Re|)``.
    """
    Z = np.asarray(Z)
    if not np.iscomplexobj(Z):
        return Z
    re, im = Z.real, Z.imag
    max_im = float(np.max(np.abs(im))) if im.size else 0.0
    max_re = float(np.max(np.abs(re))) if re.size else 0.0
    if max_im > tol * (1.0 + max_re):
        raise ImaginaryResidue(
            f"imaginary residue {max_im:.3e} exceeds {tol:.1e} * (1 + {max_re:.3e})"
        )
    return np.array(re) if Z.ndim else float(re)


def fft3(X, norm: str = "backward") -> np.ndarray:
    """DFT along the tubes; returns the face-major stack ``(n3, n1, n2)``."""
    X = as_tensor3(X)
    return np.moveaxis(np.fft.fft(X, axis=2, norm=norm), 2, 0)


def ifft3(Xh, norm: str = "backward", tol: float = RESIDUE_TOL) -> np.ndarray:
    """Inverse of :func:`fft3`.

    The imaginary residue is checked and discarded; see :func:`real_part`.
    """
    Xh = np.asarray(Xh)
    if Xh.ndim != 3:
        raise DimensionMismatch(f"expected a face stack, got shape {Xh.shape}")
    X = np.fft.ifft(Xh, axis=0, norm=norm)
    return real_part(np.moveaxis(X, 0, 2), tol)


def mirror_faces(half: np.ndarray, n3: int) -> np.ndarray:
    """Complete faces ``0..n3//2`` to a conjugate-symmetric stack of ``n3`` faces."""
    full = np.empty((n3,) + half.shape[1:], dtype=np.result_type(half, np.complex128))
    full[: half.shape[0]] = half
    for k in range(half.shape[0], n3):
        full[k] = np.conj(half[n3 - k])
    return full


def t_product(X, Y) -> np.ndarray:
    """t-product ``X * Y`` of an ``n1 x n2 x n3`` and an ``n2 x l x n3`` tensor."""
    X, Y = as_tensor3(X), as_tensor3(Y)
    if X.shape[1] != Y.shape[0] or X.shape[2] != Y.shape[2]:
        raise DimensionMismatch(f"cannot t-multiply {X.shape} by {Y.shape}")
    return ifft3(fft3(X) @ fft3(Y))


def t_transpose(X) -> np.ndarray:
    """Transpose every frontal slice, then reverse the order of slices 2..n3."""
    X = as_tensor3(X)
    Xt = X.transpose(1, 0, 2)
    order = np.r_[0, np.arange(X.shape[2] - 1, 0, -1)]
    return np.ascontiguousarray(Xt[:, :, order])


def identity_tensor(n: int, n3: int) -> np.ndarray:
    if n < 1 or n3 < 1:
        raise ValueError("identity tensor needs n >= 1 and n3 >= 1")
    eye = np.zeros((n, n, n3))
    eye[:, :, 0] = np.eye(n)
    return eye


@dataclass(frozen=True)
class TSVDFactors:
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return t_product(t_product(self.U, self.S), t_transpose(self.V))


def _face_svd(faces, full_matrices=True, compute_uv=True):
    try:
        return np.linalg.svd(faces, full_matrices=full_matrices, compute_uv=compute_uv)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc


def t_svd(X) -> TSVDFactors:
    """Tensor SVD ``X = U * S * V^T`` computed face-by-face in the Fourier domain.

    Only faces ``0..n3//2`` are decomposed; the remaining faces are their
    conjugates, which keeps the inverse transforms exactly real.
    """
    X = as_tensor3(X)
    n1, n2, n3 = X.shape
    Xh = fft3(X)
    half = n3 // 2 + 1
    faces = Xh[:half].copy()
    # self-conjugate faces are real up to rounding
    faces[0] = faces[0].real
    if n3 % 2 == 0:
        faces[n3 // 2] = faces[n3 // 2].real
    u, s, vh = _face_svd(faces)
    r = min(n1, n2)
    sh = np.zeros((half, n1, n2))
    idx = np.arange(r)
    sh[:, idx, idx] = s
    Uh = mirror_faces(u, n3)
    Sh = mirror_faces(sh.astype(np.complex128), n3)
    Vh = mirror_faces(np.conj(np.swapaxes(vh, 1, 2)), n3)
    return TSVDFactors(U=ifft3(Uh), S=ifft3(Sh), V=ifft3(Vh))


def face_singular_values(X, norm: str = "backward") -> np.ndarray:
    """Singular values of every Fourier face, shape ``(n3, min(n1, n2))``."""
    return _face_svd(fft3(X, norm=norm), compute_uv=False)


def multi_rank(X, tol: float = RANK_TOL) -> np.ndarray:
    """Vector of Fourier-face ranks, counting ``sigma > tol * sigma_max(face)``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    s = face_singular_values(X)
    if s.shape[1] == 0:
        return np.zeros(s.shape[0], dtype=int)
    top = s[:, :1]
    return np.sum((s > tol * top) & (top > 0), axis=1).astype(int)


def tnn(X) -> float:
    """Tensor nuclear norm: sum of the nuclear norms of the Fourier faces."""
    return float(np.sum(face_singular_values(X)))


def tensor_trace(X) -> float:
    X = as_tensor3(X)
    if X.shape[0] != X.shape[1]:
        raise NotSquare(f"trace needs square faces, got {X.shape}")
    Xh = fft3(X)
    return float(real_part(np.sum(np.trace(Xh, axis1=1, axis2=2))))


def inner_product(X, Y) -> float:
    """``<X, Y> = Tr(X * Y^T) = sum_k Tr(Xh[k] Yh[k]^H)``."""
    X, Y = as_tensor3(X), as_tensor3(Y)
    if X.shape != Y.shape:
        raise DimensionMismatch(f"inner product of {X.shape} and {Y.shape}")
    return float(real_part(np.sum(fft3(X) * np.conj(fft3(Y)))))


def blkdiag(Xh) -> np.ndarray:
    """Materialize the block-diagonal matrix of a face stack (tests and checks only)."""
    return scipy.linalg.block_diag(*np.asarray(Xh))


def reshapeT(M, dims, tol: float = 1e-12) -> np.ndarray:
    """Inverse of :func:`blkdiag` for a stack of ``n3`` faces of size ``n1 x n2``."""
    n1, n2, n3 = dims
    M = np.asarray(M)
    if M.shape != (n1 * n3, n2 * n3):
        raise DimensionMismatch(f"matrix {M.shape} does not hold {n3} blocks of {n1}x{n2}")
    faces = np.stack([M[k * n1:(k + 1) * n1, k * n2:(k + 1) * n2] for k in range(n3)])
    rest = M.copy()
    for k in range(n3):
        rest[k * n1:(k + 1) * n1, k * n2:(k + 1) * n2] = 0
    if rest.size and np.max(np.abs(rest)) > tol:
        raise OffBlockMass(f"off-block mass {np.max(np.abs(rest)):.3e}")
    return faces

"""Tensor exponentiated gradient: the mirror-descent step on PD Fourier stacks.

Only the trace-normalization projection is implemented. The diagonal (beta)
and prediction-box parts of the constraint set are monitored and logged,
never enforced.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidBudget, NotPD, SpectralNormViolation
from .spectral import _check_hermitian, _from_eig, eigh_faces, EIGEN_FLOOR, NEGATIVE_EIGEN_TOL

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConstraintSet:
    tau: np.ndarray
    beta: np.ndarray
    box: bool = False
    per_face: bool = False

    def __post_init__(self):
        tau = np.atleast_1d(np.asarray(self.tau, dtype=float))
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if tau.shape != beta.shape:
            raise InvalidBudget(f"tau {tau.shape} and beta {beta.shape} differ in length")
        if not np.all(tau > 0):
            raise InvalidBudget(f"tau must be positive, got {tau}")
        if not np.all(beta > 0):
            raise InvalidBudget(f"beta must be positive, got {beta}")
        if beta.sum() < 1:
            raise InvalidBudget(f"||beta||_1 = {beta.sum():.4g} < 1")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "beta", beta)

    @property
    def total_tau(self) -> float:
        return float(self.tau.sum())


@dataclass(frozen=True)
class TEGState:
    What: np.ndarray
    eta: float
    t: int = 0


def face_traces(Wh) -> np.ndarray:
    return np.real(np.trace(Wh, axis1=1, axis2=2))


def teg_raw_update(What, Lhat, eta: float) -> np.ndarray:
    """Face-wise ``exp(log W_k - eta * L_k)``.

    ``W`` is eigendecomposed once to form its log, the Hermitian sum is
    eigendecomposed again and exponentiated.
    """
    What, Lhat = np.asarray(What), np.asarray(Lhat)
    _check_hermitian(What)
    _check_hermitian(Lhat)
    vals, vecs = eigh_faces(What)
    if vals.min() < -NEGATIVE_EIGEN_TOL:
        raise NotPD(f"minimum eigenvalue {vals.min():.3e}")
    log_w = _from_eig(np.log(np.maximum(vals, EIGEN_FLOOR)), vecs)
    arg = log_w - eta * Lhat
    arg = 0.5 * (arg + np.conj(np.swapaxes(arg, 1, 2)))
    vals, vecs = eigh_faces(arg)
    return _from_eig(np.exp(vals), vecs)


def project_trace(What, tau, per_face: bool = False) -> np.ndarray:
    """Trace normalization onto ``{sum_k Tr(W_k) <= sum(tau)}``.

    With ``per_face`` each face is scaled onto ``Tr(W_k) <= tau[k]`` instead.
    Scaling is the exact von Neumann projection onto either set.
    """
    What = np.asarray(What)
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    vals = np.linalg.eigvalsh(What)
    if vals.min() < -NEGATIVE_EIGEN_TOL:
        raise NotPD(f"minimum eigenvalue {vals.min():.3e}")
    tr = face_traces(What)
    if per_face:
        scale = np.where(tr > tau, tau / tr, 1.0)
        return What * scale[:, None, None]
    total = tr.sum()
    budget = tau.sum()
    if total <= budget:
        return What
    return What * (budget / total)


def spectral_norm(Lhat) -> float:
    """``||blkdiag(L)||``: the largest absolute eigenvalue over the Hermitian faces."""
    vals = np.linalg.eigvalsh(np.asarray(Lhat))
    return float(np.max(np.abs(vals), initial=0.0))


def check_constraints(What, constraints: ConstraintSet) -> list[str]:
    """Describe violations of the monitored (unenforced) constraints."""
    issues = []
    diag = np.real(np.diagonal(What, axis1=1, axis2=2))
    over = diag.max(axis=1) - constraints.beta
    if np.any(over > 1e-8):
        issues.append(f"diagonal exceeds beta by up to {over.max():.3g}")
    return issues


def teg_step(
    state: TEGState,
    Lhat,
    constraints: ConstraintSet,
    strict: bool = True,
    check: bool = True,
) -> TEGState:
    """One projected exponentiated-gradient step.

    Raises :class:`SpectralNormViolation` when ``eta * ||blkdiag(L)|| > 1``
    and ``strict`` is set; otherwise the violation is logged. ``check=False``
    skips the test for callers that have already made it.
    """
    value = state.eta * spectral_norm(Lhat) if check else 0.0
    if value > 1 + 1e-12:
        if strict:
            raise SpectralNormViolation(value)
        logger.warning("spectral-norm condition violated: eta*||L|| = %.4g", value)
    W = teg_raw_update(state.What, Lhat, state.eta)
    W = project_trace(W, constraints.tau, per_face=constraints.per_face)
    for issue in check_constraints(W, constraints):
        logger.debug("step %d: %s", state.t + 1, issue)
    return replace(state, What=W, t=state.t + 1)

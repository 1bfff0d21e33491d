"""Comparison learners: FoReL with a tensor-nuclear-norm regularizer, OMEG on
mode unfoldings, and independent slice-by-slice matrix learners.

All learners play the same entrywise squared-loss game as OTEG and return an
:class:`ExperimentTrace`.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch
from .oteg import OtegConfig, SquaredLoss, compute_tau_beta, oteg_run
from .tensor_core import as_tensor3, fft3, ifft3
from .trace import ExperimentTrace, empty_trace

FISTA_LIPSCHITZ = 2.0
FISTA_ITERATIONS = 5


def _svt(X, threshold):
    Xh = fft3(X)
    U, s, Vh = np.linalg.svd(Xh, full_matrices=False)
    s = np.maximum(s - threshold, 0.0)
    W = ifft3((U * s[:, None, :]) @ Vh)
    return W, float(s.sum())


def svt_faces(X, threshold: float) -> np.ndarray:
    """Soft-threshold the singular values of every Fourier face by ``threshold``.

    Faces are the unnormalized DFT faces, so this is the proximal map of
    ``(threshold / n3) * tnn``.
    """
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    return _svt(as_tensor3(X), threshold)[0]


@dataclass
class ForelState:
    W: np.ndarray
    mask: np.ndarray
    values: np.ndarray
    observations: list = field(default_factory=list)
    eta: float = 1.0
    iterations: int = FISTA_ITERATIONS
    history: list = field(default_factory=list)

    @classmethod
    def empty(cls, shape, eta: float = 1.0, iterations: int = FISTA_ITERATIONS):
        return cls(W=np.zeros(shape), mask=np.zeros(shape, dtype=bool), values=np.zeros(shape),
                   eta=eta, iterations=iterations)


def forel_objective(W, mask, values, eta: float, tnn_value: float | None = None) -> float:
    """``||P(W - M)||_F^2 + eta * tnn(W)`` where ``P`` keeps the observed entries."""
    if tnn_value is None:
        tnn_value = float(np.linalg.svd(fft3(W), compute_uv=False).sum())
    r = np.where(mask, W - values, 0.0)
    return float(np.sum(r * r) + eta * tnn_value)


def forel_update(state: ForelState, index, y: float) -> ForelState:
    """Record the play and run monotone FISTA, warm-started at the previous iterate.

    Step size is ``1 / L`` with ``L = 2``. The objective at every accepted
    iterate is appended to ``state.history`` (warm start first), so the
    sequence is non-increasing by construction.
    """
    i, j, k = index
    state.mask[i, j, k] = True
    state.values[i, j, k] = y
    state.observations.append(((int(i), int(j), int(k)), float(y)))
    n3 = state.W.shape[2]
    threshold = n3 * state.eta / FISTA_LIPSCHITZ
    mask, values, eta = state.mask, state.values, state.eta

    x = state.W
    fx = forel_objective(x, mask, values, eta)
    history = [fx]
    y_pt, t = x, 1.0
    for _ in range(state.iterations):
        grad = 2.0 * np.where(mask, y_pt - values, 0.0)
        z, tnn_z = _svt(y_pt - grad / FISTA_LIPSCHITZ, threshold)
        fz = forel_objective(z, mask, values, eta, tnn_z)
        x_prev = x
        if fz <= fx:
            x, fx = z, fz
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y_pt = x + (t / t_next) * (z - x) + ((t - 1.0) / t_next) * (x - x_prev)
        t = t_next
        history.append(fx)
    state.W = x
    state.history = history
    return state


def forel_learning_rate(B: float, G: float, T: int) -> float:
    """``B / (G sqrt(T))``."""
    if G <= 0 or T <= 0:
        raise ValueError("G and T must be positive")
    return B / (G * math.sqrt(T))


def forel_run(
    truth,
    indices,
    T: int | None = None,
    B: float | None = None,
    G0: float = 1e-6,
    iterations: int = FISTA_ITERATIONS,
    algorithm: str = "forel",
) -> ExperimentTrace:
    """FoReL game against ``truth`` with adaptive ``G`` and ``B = 1.1 ||truth||_F``."""
    truth = as_tensor3(truth)
    indices = np.asarray(indices, dtype=np.int64).reshape(-1, 3)
    T = len(indices) if T is None else T
    B = 1.1 * float(np.linalg.norm(truth)) if B is None else B
    state = ForelState.empty(truth.shape, iterations=iterations)
    trace = empty_trace(algorithm, len(indices), config={"B": B, "T": T, "iterations": iterations})
    G = G0
    start = time.perf_counter()
    for t, (i, j, k) in enumerate(indices):
        loss = SquaredLoss(truth[i, j, k])
        p = float(state.W[i, j, k])
        g = loss.derivative(p)
        G = max(G, abs(g))
        state.eta = forel_learning_rate(B, G, T) if B > 0 else 0.0
        forel_update(state, (i, j, k), loss.target)
        trace.indices[t] = (i, j, k)
        trace.y[t] = loss.target
        trace.p[t] = p
        trace.g[t] = g
        trace.loss[t] = loss(p)
        trace.eta[t] = state.eta
        trace.G[t] = G
    trace.wall_time = time.perf_counter() - start
    trace.final = state.W
    return trace


def flatten_mode(X, mode: int) -> np.ndarray:
    """Mode-``mode`` unfolding (modes 1..3), rows indexed by that dimension.

    Columns run over the remaining dimensions in ascending order with the
    lower-numbered one varying fastest, so entry ``(i, j, k)`` of an
    ``n1 x n2 x n3`` tensor lands at ``(i, j + n2 k)`` in mode 1,
    ``(j, i + n1 k)`` in mode 2 and ``(k, i + n1 j)`` in mode 3.
    """
    X = as_tensor3(X)
    if mode not in (1, 2, 3):
        raise ValueError(f"mode must be 1, 2 or 3, got {mode}")
    return np.reshape(np.moveaxis(X, mode - 1, 0), (X.shape[mode - 1], -1), order="F")


def unflatten_mode(M, mode: int, shape) -> np.ndarray:
    shape = tuple(shape)
    rest = [s for a, s in enumerate(shape) if a != mode - 1]
    M = np.asarray(M)
    if M.shape != (shape[mode - 1], rest[0] * rest[1]):
        raise DimensionMismatch(f"unfolding {M.shape} does not match {shape} in mode {mode}")
    Y = np.reshape(M, (shape[mode - 1], rest[0], rest[1]), order="F")
    return np.moveaxis(Y, 0, mode - 1)


def mode_index(index, mode: int, shape) -> tuple[int, int]:
    """Position of tensor entry ``index`` in the mode-``mode`` unfolding."""
    i, j, k = (int(v) for v in index)
    n1, n2, _ = shape
    if mode == 1:
        return i, j + n2 * k
    if mode == 2:
        return j, i + n1 * k
    if mode == 3:
        return k, i + n1 * j
    raise ValueError(f"mode must be 1, 2 or 3, got {mode}")


def matrix_config(
    A,
    T: int,
    amplitude: float = 5.0,
    rng: np.random.Generator | None = None,
    tau=None,
    **kwargs,
) -> OtegConfig:
    """d = 1 learner configuration for matrix ``A`` with budgets from :func:`compute_tau_beta`."""
    A = np.asarray(A, dtype=float)
    A3 = A[:, :, None] if A.ndim == 2 else A
    params = compute_tau_beta(A3, amplitude=amplitude, rng=rng)
    tau = params.tau if tau is None else np.atleast_1d(np.asarray(tau, dtype=float))
    kwargs.setdefault("adaptive_G", True)
    kwargs.setdefault("eta_mode", "experimental")
    return OtegConfig(m=A3.shape[0], n=A3.shape[1], d=1, tau=tau, beta=params.beta, T=T, **kwargs)


def _matrix_game(A, positions):
    for r, c in positions:
        yield int(r), int(c), 0, SquaredLoss(A[r, c])


def omeg_run(
    truth,
    indices,
    mode: int,
    T: int | None = None,
    amplitude: float = 5.0,
    rng: np.random.Generator | None = None,
    engine: str = "structured",
    tau=None,
    **kwargs,
) -> ExperimentTrace:
    """Matrix exponentiated gradient (OTEG with ``d = 1``) on the mode unfolding.

    ``indices`` are tensor triples; the returned trace reports them unchanged.
    """
    truth = as_tensor3(truth)
    indices = np.asarray(indices, dtype=np.int64).reshape(-1, 3)
    A = flatten_mode(truth, mode)
    T = len(indices) if T is None else T
    config = matrix_config(A, T, amplitude=amplitude, rng=rng, tau=tau, **kwargs)
    positions = [mode_index(idx, mode, truth.shape) for idx in indices]
    trace = oteg_run(config, _matrix_game(A, positions), engine=engine, algorithm=f"omeg{mode}")
    trace.indices[:] = indices
    trace.final = unflatten_mode(trace.final[:, :, 0], mode, truth.shape)
    trace.config["mode"] = mode
    return trace


def slicewise_run(
    truth,
    indices,
    learner: str = "omeg",
    amplitude: float = 5.0,
    rng: np.random.Generator | None = None,
    engine: str = "structured",
    **kwargs,
) -> ExperimentTrace:
    """One independent matrix learner per frontal slice.

    Each slice learner sees only the plays routed to it, in order, and uses
    that count as its horizon. ``learner`` is ``"omeg"`` (default) or
    ``"forel"``. Results are merged back into play order.
    """
    truth = as_tensor3(truth)
    indices = np.asarray(indices, dtype=np.int64).reshape(-1, 3)
    d = truth.shape[2]
    merged = empty_trace("slicewise", len(indices), config={"learner": learner})
    final = np.zeros_like(truth)
    start = time.perf_counter()
    for k in range(d):
        rows = np.flatnonzero(indices[:, 2] == k)
        slice_truth = truth[:, :, k:k + 1]
        sub = np.column_stack([indices[rows, 0], indices[rows, 1], np.zeros(len(rows), dtype=np.int64)])
        if learner == "forel":
            if len(rows) == 0:
                continue
            part = forel_run(slice_truth, sub)
        elif learner == "omeg":
            # budgets are drawn even for empty slices so later slices see the same stream
            config = matrix_config(slice_truth[:, :, 0], max(len(rows), 1), amplitude=amplitude,
                                   rng=rng, **kwargs)
            if len(rows) == 0:
                continue
            part = oteg_run(config, _matrix_game(slice_truth[:, :, 0], sub[:, :2]), engine=engine)
        else:
            raise ValueError(f"unknown slice learner {learner!r}")
        for name in ("y", "p", "g", "loss", "eta", "G"):
            getattr(merged, name)[rows] = getattr(part, name)
        final[:, :, k] = part.final[:, :, 0]
    merged.indices[:] = indices
    merged.final = final
    merged.wall_time = time.perf_counter() - start
    return merged

"""Online tensor exponentiated gradient (OTEG) for entrywise tensor prediction.

The learner keeps a block-diagonal PD state in the ``norm="forward"`` Fourier
coordinates: face ``k`` is ``[[P_k, 0], [0, N_k]]`` of size ``2p x 2p`` with
``p = m + n``. The prediction at ``(i, j, k)`` is the inverse DFT, at depth
``k``, of the tube ``(P - N)[:, i, j + m]``.

Two engines run the same algorithm:

``"dense"``
    builds every loss-gradient tensor explicitly and calls :func:`teg_step`.
``"structured"``
    uses the fact that, starting from a scaled identity, every iterate has
    the form ``P_k = e^{c_k} exp(-sym(Theta_k))`` and
    ``N_k = e^{c_k} exp(+sym(Theta_k))``, where ``Theta_k`` is the
    ``m x n`` accumulation of the scaled gradients. One SVD of ``Theta_k``
    per face yields predictions, traces and projections without forming the
    ``2p x 2p`` faces.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass
from typing import Iterable, Tuple

import numpy as np
from scipy.special import logsumexp

from .errors import DimensionMismatch, IndexOutOfRange, InvalidBudget, SpectralNormViolation
from .spectral import LEARNER_NORM, pn_decompose
from .teg import ConstraintSet, TEGState, teg_step
from .tensor_core import as_tensor3, fft3, ifft3, mirror_faces, real_part
from .trace import ExperimentTrace, empty_trace

logger = logging.getLogger(__name__)

EXPERIMENTAL_ETA_FACTOR = 8.0


class SquaredLoss:
    """``l(p) = (y - p)^2`` with subderivative ``2 (p - y)``."""

    def __init__(self, y: float):
        self.target = float(y)

    def __call__(self, p: float) -> float:
        return (self.target - p) ** 2

    def derivative(self, p: float) -> float:
        return 2.0 * (p - self.target)


class ZeroLoss:
    target = float("nan")

    def __call__(self, p):
        return 0.0

    def derivative(self, p):
        return 0.0


def squared_loss_game(truth, indices) -> Iterable[Tuple[int, int, int, SquaredLoss]]:
    """Adversary that plays ``indices`` in order with squared loss against ``truth``."""
    truth = np.asarray(truth)
    for i, j, k in indices:
        yield int(i), int(j), int(k), SquaredLoss(truth[i, j, k])


@dataclass
class OtegConfig:
    m: int
    n: int
    d: int
    tau: np.ndarray
    beta: np.ndarray
    T: int
    G: float = 1.0
    adaptive_G: bool = False
    G0: float = 1e-6
    eta_mode: str = "nominal"
    eta_multiplier: float | None = None
    truncate: bool = False
    per_face: bool = False
    spectral_policy: str | None = None
    seed: int = 0

    def __post_init__(self):
        self.tau = np.atleast_1d(np.asarray(self.tau, dtype=float))
        self.beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if self.tau.shape != (self.d,) or self.beta.shape != (self.d,):
            raise DimensionMismatch(f"tau and beta need length d={self.d}")
        # mirrored faces must share a budget or predictions stop being real
        mirror = self.tau[(-np.arange(self.d)) % self.d]
        if not np.allclose(self.tau, mirror, rtol=1e-12, atol=0):
            raise InvalidBudget("tau must satisfy tau[k] == tau[(d - k) % d]")
        if self.eta_mode not in ("nominal", "experimental"):
            raise ValueError(f"unknown eta_mode {self.eta_mode!r}")
        if self.T < 1:
            raise ValueError("horizon T must be >= 1")
        if self.spectral_policy is None:
            self.spectral_policy = "raise" if self.eta_mode == "nominal" else "warn"
        if self.spectral_policy not in ("raise", "warn"):
            raise ValueError(f"unknown spectral_policy {self.spectral_policy!r}")
        self.constraints  # validates tau/beta

    @property
    def p(self) -> int:
        return self.m + self.n

    @property
    def N(self) -> int:
        return 2 * self.p

    def gamma(self, G: float | None = None) -> np.ndarray:
        G = self.G if G is None else G
        return np.full(self.d, 4.0 * G * G)

    @property
    def constraints(self) -> ConstraintSet:
        return ConstraintSet(self.tau, self.beta, per_face=self.per_face)

    def snapshot(self) -> dict:
        out = asdict(self)
        out["tau"] = [float(v) for v in self.tau]
        out["beta"] = [float(v) for v in self.beta]
        return out


def nominal_learning_rate(config: OtegConfig, G: float | None = None) -> float:
    """``sqrt(log N * sum(tau) / (T * sum(gamma * beta)))`` with ``gamma = 4 G^2``.

    ``eta_mode="experimental"`` multiplies by 8; an explicit
    ``eta_multiplier`` takes precedence over both.
    """
    G = config.G if G is None else G
    if G <= 0:
        raise ValueError("G must be positive")
    eta = math.sqrt(
        math.log(config.N) * config.tau.sum()
        / (config.T * float(np.sum(config.gamma(G) * config.beta)))
    )
    if config.eta_multiplier is not None:
        return config.eta_multiplier * eta
    if config.eta_mode == "experimental":
        return EXPERIMENTAL_ETA_FACTOR * eta
    return eta


def regret_bound(config: OtegConfig) -> float:
    """Regret guarantee for ``config``: ``2G sqrt(T log N sum(beta) sum(tau))``,
    or ``2 G T`` when ``T`` is below ``log N sum(tau) / sum(beta)``."""
    sb, st = config.beta.sum(), config.tau.sum()
    logN = math.log(config.N)
    if config.T < logN * st / sb:
        return 2.0 * config.G * config.T
    return 2.0 * config.G * math.sqrt(config.T * logN * sb * st)


def regret_threshold(config: OtegConfig) -> float:
    return math.log(config.N) * config.tau.sum() / config.beta.sum()


@dataclass(frozen=True)
class DecompParams:
    tau: np.ndarray
    beta: np.ndarray


def compute_tau_beta(M, amplitude: float = 5.0, rng: np.random.Generator | None = None) -> DecompParams:
    """Budgets for learning ``M``: ``beta(k) = sqrt(m + n)`` and
    ``tau(k) = 2 ||M_k||_* + U[0, amplitude]``.

    Faces are taken in the learner's Fourier coordinates. One noise draw is
    shared by each conjugate pair of faces.
    """
    M = as_tensor3(M)
    m, n, d = M.shape
    s = np.linalg.svd(fft3(M, norm=LEARNER_NORM), compute_uv=False)
    tau = 2.0 * s.sum(axis=1)
    if amplitude > 0:
        rng = np.random.default_rng() if rng is None else rng
        half = rng.uniform(0.0, amplitude, size=d // 2 + 1)
        noise = np.array([half[min(k, d - k)] for k in range(d)])
        tau = tau + noise
    return DecompParams(tau=tau, beta=np.full(d, math.sqrt(m + n)))


def dft_column(k: int, d: int) -> np.ndarray:
    """Column ``k`` of the unnormalized forward DFT matrix, ``exp(-2 pi i q k / d)``."""
    return np.exp(-2j * np.pi * np.arange(d) * k / d)


def _check_index(i, j, k, m, n, d):
    if not (0 <= i < m and 0 <= j < n and 0 <= k < d):
        raise IndexOutOfRange(f"index {(i, j, k)} outside {(m, n, d)}")


def prediction_operator(What, i: int, j: int, k: int, m: int) -> float:
    """Read entry ``(i, j, k)`` off a block PD state of shape ``(d, 2p, 2p)``."""
    What = np.asarray(What)
    d, N, _ = What.shape
    p = N // 2
    _check_index(i, j, k, m, p - m, d)
    tube = What[:, i, j + m] - What[:, i + p, j + m + p]
    return float(real_part(np.sum(tube * np.conj(dft_column(k, d)))))


def loss_gradient_tensor(g: float, i: int, j: int, k: int, m: int, n: int, d: int) -> np.ndarray:
    """Fourier gradient of ``l(P_W(i, j, k))`` for subderivative ``g``.

    Four nonzero tubes carry ``+-g`` times the DFT column ``k`` or its
    conjugate. Every face is Hermitian with ``Tr(L_k^2) = 4 g^2``, and
    ``sum_k Tr(W_k L_k) = 2 g P_W(i, j, k)``.
    """
    _check_index(i, j, k, m, n, d)
    p = m + n
    col = g * dft_column(k, d)
    L = np.zeros((d, 2 * p, 2 * p), dtype=np.complex128)
    L[:, i, j + m] = col
    L[:, j + m, i] = np.conj(col)
    L[:, i + p, j + m + p] = -col
    L[:, j + m + p, i + p] = -np.conj(col)
    return L


def initial_state(config: OtegConfig) -> np.ndarray:
    """``W_1`` with faces ``tau(k) / N * I``."""
    eye = np.eye(config.N, dtype=np.complex128)
    return config.tau[:, None, None] / config.N * eye


class DenseOteg:
    """Explicit-state engine: one :func:`teg_step` per play."""

    def __init__(self, config: OtegConfig):
        self.config = config
        self.state = TEGState(What=initial_state(config), eta=0.0, t=0)

    def predict(self, i, j, k) -> float:
        return prediction_operator(self.state.What, i, j, k, self.config.m)

    def update(self, i, j, k, g, eta):
        cfg = self.config
        L = loss_gradient_tensor(g, i, j, k, cfg.m, cfg.n, cfg.d)
        self.state = teg_step(TEGState(self.state.What, eta, self.state.t), L, cfg.constraints, check=False)

    def faces(self) -> np.ndarray:
        return self.state.What

    def render(self) -> np.ndarray:
        cfg = self.config
        p, m = cfg.p, cfg.m
        diff = self.state.What[:, :m, m:p] - self.state.What[:, p:p + m, p + m:]
        return ifft3(diff, norm=LEARNER_NORM)


class StructuredOteg:
    """Closed-form engine; see the module docstring."""

    def __init__(self, config: OtegConfig):
        self.config = config
        m, n, d = config.m, config.n, config.d
        self.half = d // 2 + 1
        self.weights = np.array([1.0 if (q == 0 or 2 * q == d) else 2.0 for q in range(self.half)])
        self.theta = np.zeros((self.half, m, n), dtype=np.complex128)
        self.log_base = np.log(config.tau[: self.half] / config.N)
        self.log_scale = np.zeros(self.half)
        self.t = 0
        self._refresh()

    @property
    def log_c(self) -> np.ndarray:
        return self.log_base + self.log_scale

    def _refresh(self):
        self.u, self.s, self.vh = np.linalg.svd(self.theta, full_matrices=False)

    def _face_log_traces(self) -> np.ndarray:
        m, n = self.config.m, self.config.n
        parts = [self.s, -self.s]
        if m != n:
            parts.append(np.full((self.half, 1), math.log(abs(m - n))))
        return math.log(2.0) + self.log_c + logsumexp(np.concatenate(parts, axis=1), axis=1)

    def face_traces(self) -> np.ndarray:
        return np.exp(self._face_log_traces())

    def _scaled_sinh(self) -> np.ndarray:
        c = self.log_c[:, None]
        return 0.5 * (np.exp(c + self.s) - np.exp(c - self.s))

    def predict(self, i, j, k) -> float:
        cfg = self.config
        _check_index(i, j, k, cfg.m, cfg.n, cfg.d)
        a = -2.0 * np.einsum("qr,qr,qr->q", self.u[:, i, :], self._scaled_sinh(), self.vh[:, :, j])
        phase = np.exp(2j * np.pi * np.arange(self.half) * k / cfg.d)
        return float(np.sum(self.weights * np.real(a * phase)))

    def update(self, i, j, k, g, eta):
        cfg = self.config
        self.theta[:, i, j] += eta * g * dft_column(k, cfg.d)[: self.half]
        self._refresh()
        log_tr = self._face_log_traces()
        if cfg.per_face:
            excess = log_tr - np.log(cfg.tau[: self.half])
            self.log_scale -= np.maximum(excess, 0.0)
        else:
            log_total = logsumexp(log_tr, b=self.weights)
            excess = log_total - math.log(cfg.tau.sum())
            if excess > 0:
                self.log_scale -= excess
        self.t += 1

    def _top_right(self) -> np.ndarray:
        """``(P - N)`` off-diagonal block ``-2 e^c U sinh(S) V^H`` for faces ``0..d//2``."""
        return -2.0 * (self.u * self._scaled_sinh()[:, None, :]) @ self.vh

    def render(self) -> np.ndarray:
        return ifft3(mirror_faces(self._top_right(), self.config.d), norm=LEARNER_NORM)

    def faces(self) -> np.ndarray:
        """Materialize the full ``(d, 2p, 2p)`` state (testing and checks only)."""
        cfg = self.config
        m, n, p = cfg.m, cfg.n, cfg.p
        out = np.zeros((self.half, 2 * p, 2 * p), dtype=np.complex128)
        for q in range(self.half):
            sym = np.zeros((p, p), dtype=np.complex128)
            sym[:m, m:] = self.theta[q]
            sym[m:, :m] = np.conj(self.theta[q].T)
            vals, vecs = np.linalg.eigh(sym)
            c = self.log_c[q]
            out[q, :p, :p] = (vecs * np.exp(c - vals)) @ np.conj(vecs.T)
            out[q, p:, p:] = (vecs * np.exp(c + vals)) @ np.conj(vecs.T)
        return mirror_faces(out, cfg.d)


ENGINES = {"structured": StructuredOteg, "dense": DenseOteg}


def make_learner(config: OtegConfig, engine: str = "structured"):
    try:
        return ENGINES[engine](config)
    except KeyError:
        raise ValueError(f"unknown engine {engine!r}") from None


def oteg_run(
    config: OtegConfig,
    adversary: Iterable,
    engine: str = "structured",
    algorithm: str = "oteg",
    keep_learner: bool = False,
) -> ExperimentTrace:
    """Play the online game.

    ``adversary`` yields ``(i, j, k, loss)`` where ``loss(p)`` is the loss
    and ``loss.derivative(p)`` a subderivative. With ``adaptive_G`` the
    Lipschitz estimate ``G`` is raised to ``|g_t|`` and ``eta`` recomputed
    before the update that uses them.
    """
    plays = list(adversary)
    learner = make_learner(config, engine)
    trace = empty_trace(algorithm, len(plays), config=config.snapshot())
    G = config.G0 if config.adaptive_G else config.G
    eta = nominal_learning_rate(config, G)
    violations, worst = 0, 0.0
    start = time.perf_counter()
    for t, (i, j, k, loss) in enumerate(plays):
        p = learner.predict(i, j, k)
        if config.truncate:
            p = min(1.0, max(-1.0, p))
        value = loss(p)
        g = loss.derivative(p)
        if config.adaptive_G and abs(g) > G:
            G = abs(g)
            eta = nominal_learning_rate(config, G)
        # every face of the gradient tensor has eigenvalues +-|g|
        spectral = eta * abs(g)
        if spectral > 1 + 1e-12:
            if config.spectral_policy == "raise":
                raise SpectralNormViolation(spectral)
            violations += 1
            worst = max(worst, spectral)
        learner.update(i, j, k, g, eta)
        trace.indices[t] = (i, j, k)
        trace.y[t] = getattr(loss, "target", np.nan)
        trace.p[t] = p
        trace.g[t] = g
        trace.loss[t] = value
        trace.eta[t] = eta
        trace.G[t] = G
    trace.wall_time = time.perf_counter() - start
    if violations:
        logger.warning("%s: eta*||L|| > 1 on %d of %d steps (max %.4g)", algorithm, violations, len(plays), worst)
    trace.config["spectral_violations"] = violations
    trace.final = learner.render()
    if keep_learner:
        trace.learner = learner
    return trace

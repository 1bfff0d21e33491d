"""Semi-synthetic ratings tensors driven by a social influence graph.

Dataset A: each epoch mixes the neighbourhood mean of last epoch's ratings
with a noisy copy of the user's own rating. Dataset B adds a freeze rule: once
a rating reaches 5 it stays there.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import networkx as nx
import numpy as np

from .errors import DimensionMismatch, DisconnectedAfterRetries, IsolatedNode, ParseError, ScaleMismatch
from .rng import derived_seed, stream

RATING_MIN, RATING_MAX = 1.0, 5.0
FREEZE_TOL = 1e-9
SCALE_TOL = 1e-9


@dataclass(frozen=True)
class InfluenceGraph:
    """Undirected simple graph on nodes ``0..n-1`` with no isolated nodes."""

    n: int
    edges: frozenset

    def __post_init__(self):
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop at node {u}")
        deg = self.degrees()
        isolated = np.flatnonzero(deg == 0)
        if isolated.size:
            raise IsolatedNode(f"nodes without neighbours: {isolated[:10].tolist()}")

    @classmethod
    def from_pairs(cls, n: int, pairs) -> "InfluenceGraph":
        return cls(n, frozenset((min(u, v), max(u, v)) for u, v in pairs if u != v))

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n, self.n))
        for u, v in self.edges:
            A[u, v] = A[v, u] = 1.0
        return A

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def neighbors(self, u: int) -> list[int]:
        return sorted({b if a == u else a for a, b in self.edges if u in (a, b)})

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(sorted(self.edges))
        return g


def load_edge_list(path, n_users: int | None = None) -> InfluenceGraph:
    """Read whitespace-separated ``u v`` pairs (0-indexed), keeping nodes below ``n_users``.

    Blank lines and lines starting with ``#`` are skipped.
    """
    pairs = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            u, v = int(parts[0]), int(parts[1])
        except (ValueError, IndexError):
            raise ParseError(f"{path}:{lineno}: expected two integers, got {line!r}") from None
        if len(parts) != 2 or u < 0 or v < 0:
            raise ParseError(f"{path}:{lineno}: expected two non-negative integers, got {line!r}")
        pairs.append((u, v))
    if n_users is None:
        n_users = 1 + max((max(p) for p in pairs), default=-1)
    kept = [(u, v) for u, v in pairs if u < n_users and v < n_users]
    return InfluenceGraph.from_pairs(n_users, kept)


def gen_ws_graph(n: int, k_ring: int, p_rewire: float, seed: int, max_tries: int = 100) -> InfluenceGraph:
    """Connected Watts-Strogatz small-world graph, deterministic in ``seed``."""
    if k_ring % 2 or k_ring < 2:
        raise ValueError("k_ring must be a positive even integer")
    if not 0.0 <= p_rewire <= 1.0:
        raise ValueError("p_rewire must lie in [0, 1]")
    for attempt in range(max_tries):
        g = nx.watts_strogatz_graph(n, k_ring, p_rewire, seed=derived_seed(seed, f"ws-graph/{attempt}"))
        if nx.is_connected(g):
            return InfluenceGraph.from_pairs(n, g.edges())
    raise DisconnectedAfterRetries(f"no connected graph after {max_tries} attempts")


def init_ratings(n_users: int, n_movies: int, r: int, seed: int) -> np.ndarray:
    """Rank-``r`` matrix with entries in ``[1, 5]``.

    Factors are uniform on ``[1, 2]``, so the product is positive and a pure
    rescaling by ``5 / max`` keeps the rank exact and places every entry in
    ``[1.25, 5]``.
    """
    if not 1 <= r <= min(n_users, n_movies):
        raise ValueError(f"rank {r} outside 1..{min(n_users, n_movies)}")
    rng = stream(seed, "init-ratings")
    U = rng.uniform(1.0, 2.0, size=(n_users, r))
    V = rng.uniform(1.0, 2.0, size=(n_movies, r))
    M = U @ V.T
    return RATING_MAX * M / M.max()


@dataclass
class RatingsTensor:
    data: np.ndarray
    raw: bool = True

    @property
    def shape(self):
        return self.data.shape


def _check_inputs(M0, graph):
    M0 = np.asarray(M0, dtype=float)
    if M0.ndim != 2:
        raise DimensionMismatch(f"initial ratings must be a matrix, got {M0.shape}")
    if graph.n != M0.shape[0]:
        raise DimensionMismatch(f"graph has {graph.n} nodes for {M0.shape[0]} users")
    if M0.min() < RATING_MIN - SCALE_TOL or M0.max() > RATING_MAX + SCALE_TOL:
        raise ScaleMismatch("initial ratings must lie in [1, 5]")
    return M0


def _evolve(M0, graph, epochs, seed, freeze, a_values=None, per_user=False, noise=True):
    M0 = _check_inputs(M0, graph)
    if epochs < 1:
        raise ValueError("need at least one epoch")
    n_users, n_movies = M0.shape
    A = graph.adjacency()
    averaging = A / A.sum(axis=1, keepdims=True)
    a_rng = stream(seed, "evolve/a")
    r_rng = stream(seed, "evolve/rand-rating")
    out = np.empty((n_users, n_movies, epochs))
    out[:, :, 0] = M0
    frozen = M0 >= RATING_MAX - FREEZE_TOL if freeze else np.zeros_like(M0, dtype=bool)
    for s in range(1, epochs):
        prev = out[:, :, s - 1]
        if a_values is not None:
            a = np.full((n_users, 1), float(a_values[s - 1]))
        elif per_user:
            a = a_rng.uniform(0.0, 1.0, size=(n_users, 1))
        else:
            a = np.full((n_users, 1), a_rng.uniform(0.0, 1.0))
        rand = r_rng.integers(1, 6, size=prev.shape).astype(float)
        self_term = 0.5 * (prev + (rand if noise else prev))
        new = a * (averaging @ prev) + (1.0 - a) * self_term
        if freeze:
            new = np.where(frozen, RATING_MAX, new)
            frozen |= new >= RATING_MAX - FREEZE_TOL
            new = np.where(frozen, RATING_MAX, new)
        out[:, :, s] = np.clip(new, RATING_MIN, RATING_MAX)
    return RatingsTensor(out, raw=True)


def evolve_a(M0, graph: InfluenceGraph, epochs: int, seed: int, a_values=None,
             per_user: bool = False, noise: bool = True) -> RatingsTensor:
    """Dataset A dynamics.

    ``M(u, :, s) = a(s) * mean_{v ~ u} M(v, :, s-1) + (1 - a(s)) * (M(u, :, s-1) + R) / 2``
    with ``R`` uniform on ``{1, ..., 5}`` per entry. ``a(s)`` is drawn once per
    epoch unless ``per_user`` is set; ``a_values`` pins it (length
    ``epochs - 1``). ``noise=False`` replaces ``R`` by the previous rating.
    """
    return _evolve(M0, graph, epochs, seed, False, a_values, per_user, noise)


def evolve_b(M0, graph: InfluenceGraph, epochs: int, seed: int, a_values=None,
             per_user: bool = False, noise: bool = True, freeze: bool = True) -> RatingsTensor:
    """Dataset B: Dataset A dynamics, but a rating that reaches 5 never moves again."""
    return _evolve(M0, graph, epochs, seed, freeze, a_values, per_user, noise)


def to_game_scale(R) -> np.ndarray:
    """Map raw ratings in ``[1, 5]`` to ``[-1, 1]`` via ``(r - 3) / 2``."""
    if isinstance(R, RatingsTensor):
        if not R.raw:
            raise ScaleMismatch("tensor is already on the game scale")
        R = R.data
    R = np.asarray(R, dtype=float)
    if R.size and (R.min() < RATING_MIN - SCALE_TOL or R.max() > RATING_MAX + SCALE_TOL):
        raise ScaleMismatch("ratings outside [1, 5]; is this already game scale?")
    return (R - 3.0) / 2.0


def from_game_scale(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.size and (X.min() < -1 - SCALE_TOL or X.max() > 1 + SCALE_TOL):
        raise ScaleMismatch("values outside [-1, 1]")
    return 2.0 * X + 3.0


def write_manifest(path, params: dict) -> None:
    """Flat ``key=value`` text, keys sorted."""
    with open(path, "w") as fh:
        for key in sorted(params):
            fh.write(f"{key}={params[key]}\n")


def read_manifest(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"{path}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def generate_dataset(kind: str, n_users: int, n_movies: int, epochs: int, seed: int,
                     rank: int = 3, k_ring: int = 6, p_rewire: float = 0.1,
                     per_user: bool = False, graph: InfluenceGraph | None = None) -> RatingsTensor:
    """Graph + initial ratings + evolution for ``kind`` ``"A"`` or ``"B"``."""
    if kind.upper() not in ("A", "B"):
        raise ValueError(f"unknown dataset kind {kind!r}")
    if graph is None:
        graph = gen_ws_graph(n_users, k_ring, p_rewire, seed)
    M0 = init_ratings(n_users, n_movies, min(rank, n_users, n_movies), seed)
    if kind.upper() == "A":
        return evolve_a(M0, graph, epochs, seed, per_user=per_user)
    return evolve_b(M0, graph, epochs, seed, per_user=per_user)

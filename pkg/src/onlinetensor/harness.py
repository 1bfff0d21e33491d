"""Experiment driver: build a game, run every selected learner on the same
play sequence, and write CSVs, a manifest and an SVG plot."""
from __future__ import annotations

import dataclasses
import logging
import os
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import forel_run, omeg_run, slicewise_run
from .datagen import generate_dataset, load_edge_list, to_game_scale, write_manifest
from .errors import BudgetExceeded, ParseError
from .oteg import OtegConfig, compute_tau_beta, oteg_run, squared_loss_game
from .rng import stream
from .tensorio import load_tensor
from .trace import ExperimentTrace, round_average

logger = logging.getLogger(__name__)

OUTDIR_ENV = "ONLINETENSOR_OUTDIR"
ALGORITHMS = ("oteg", "slicewise", "omeg1", "omeg2", "omeg3", "forel")


def fmt(x) -> str:
    """Shortest round-trip text for a float; ints stay ints."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


@dataclass
class RunConfig:
    dataset: str = "A"
    path: str | None = None
    graph: str | None = None
    m: int = 30
    n: int = 20
    d: int = 8
    T: float = 0.2
    R: int = 30
    window: int | None = None
    algorithms: tuple = ALGORITHMS
    seed: int = 42
    eta_mode: str = "experimental"
    eta_multiplier: float | None = None
    amplitude: float = 5.0
    truncate: bool = False
    per_face: bool = False
    engine: str = "structured"
    fista_iterations: int = 5
    slice_learner: str = "omeg"
    rank: int = 3
    k_ring: int = 6
    p_rewire: float = 0.1
    per_user: bool = False
    outdir: str = "out"
    plot: bool = True

    def __post_init__(self):
        if isinstance(self.algorithms, str):
            self.algorithms = tuple(a.strip() for a in self.algorithms.split(",") if a.strip())
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ValueError(f"unknown algorithms: {sorted(unknown)}")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.m, self.n, self.d

    def horizon(self, dims=None) -> int:
        """``T`` as a play count: values below 1 are a fraction of the cube."""
        m, n, d = dims or self.dims
        total = m * n * d
        T = int(round(self.T * total)) if self.T < 1 else int(self.T)
        if T > total:
            raise BudgetExceeded(f"T={T} exceeds the {total} entries of the cube")
        if T < 1:
            raise BudgetExceeded("horizon rounds to zero plays")
        return T

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        """Build from string values (config file or CLI), coercing by field type."""
        kinds = {f.name: f for f in dataclasses.fields(cls)}
        out = {}
        for key, raw in values.items():
            if raw is None:
                continue
            if key not in kinds:
                raise ParseError(f"unknown config key {key!r}")
            out[key] = _coerce(kinds[key], raw)
        return cls(**out)

    def items(self) -> dict:
        out = dataclasses.asdict(self)
        out["algorithms"] = ",".join(self.algorithms)
        return out


def _coerce(f: dataclasses.Field, raw):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    kind = str(f.type)
    if text.lower() in ("none", "") and "None" in kind:
        return None
    try:
        if kind.startswith("bool"):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind.startswith("int"):
            return int(text)
        if kind.startswith("float"):
            return float(text)
    except ValueError:
        raise ParseError(f"bad value for {f.name}: {raw!r}") from None
    return text


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def sample_play_sequence(dims, T: int, seed: int) -> np.ndarray:
    """``T`` distinct index triples drawn uniformly without replacement, shape ``(T, 3)``."""
    m, n, d = dims
    total = m * n * d
    if T > total:
        raise BudgetExceeded(f"T={T} exceeds the {total} entries of the cube")
    flat = stream(seed, "plays").choice(total, size=T, replace=False)
    return np.column_stack(np.unravel_index(flat, (m, n, d))).astype(np.int64)


def build_truth(config: RunConfig) -> np.ndarray:
    """Game-scale ground truth in ``[-1, 1]``."""
    if config.dataset.lower() == "file":
        if not config.path:
            raise ValueError("dataset=file needs path")
        X = load_tensor(config.path)
        if X.min() < -1 or X.max() > 1:
            X = to_game_scale(X)
        return X
    graph = load_edge_list(config.graph, config.m) if config.graph else None
    R = generate_dataset(config.dataset, config.m, config.n, config.d, config.seed,
                         rank=config.rank, k_ring=config.k_ring, p_rewire=config.p_rewire,
                         per_user=config.per_user, graph=graph)
    return to_game_scale(R)


def run_algorithm(name: str, truth, indices, config: RunConfig) -> ExperimentTrace:
    seed = config.seed
    if name == "oteg":
        m, n, d = truth.shape
        params = compute_tau_beta(truth, amplitude=config.amplitude, rng=stream(seed, "tau/oteg"))
        cfg = OtegConfig(m, n, d, params.tau, params.beta, T=len(indices), adaptive_G=True,
                         eta_mode=config.eta_mode, eta_multiplier=config.eta_multiplier,
                         truncate=config.truncate, per_face=config.per_face, seed=seed)
        return oteg_run(cfg, squared_loss_game(truth, indices), engine=config.engine)
    if name.startswith("omeg"):
        mode = int(name[-1])
        return omeg_run(truth, indices, mode, amplitude=config.amplitude, rng=stream(seed, f"tau/{name}"),
                        engine=config.engine, truncate=config.truncate,
                        eta_mode=config.eta_mode, eta_multiplier=config.eta_multiplier)
    if name == "slicewise":
        kwargs = {}
        if config.slice_learner == "omeg":
            kwargs = dict(amplitude=config.amplitude, rng=stream(seed, "tau/slicewise"), engine=config.engine,
                          truncate=config.truncate, eta_mode=config.eta_mode,
                          eta_multiplier=config.eta_multiplier)
        return slicewise_run(truth, indices, learner=config.slice_learner, **kwargs)
    if name == "forel":
        return forel_run(truth, indices, iterations=config.fista_iterations)
    raise ValueError(f"unknown algorithm {name!r}")


def run_experiment(config: RunConfig, truth=None) -> dict[str, ExperimentTrace]:
    """Run every selected algorithm on one shared play sequence.

    The regret comparator is the truth tensor itself, whose loss is zero, so
    each trace's regret equals its cumulative loss.
    """
    truth = build_truth(config) if truth is None else np.asarray(truth, dtype=float)
    indices = sample_play_sequence(truth.shape, config.horizon(truth.shape), config.seed)
    traces = {}
    for name in config.algorithms:
        start = time.perf_counter()
        trace = run_algorithm(name, truth, indices, config)
        trace.algorithm = name
        trace.comparator_loss = 0.0
        trace.wall_time = time.perf_counter() - start
        traces[name] = trace
        logger.info("%s: cumulative loss %.4f in %.2fs", name, trace.cumulative_loss, trace.wall_time)
    return traces


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def emit_outputs(traces: dict, outdir, R: int = 30, window: int | None = None,
                 config: RunConfig | None = None, plot: bool = True) -> list[Path]:
    """Write per-algorithm loss and step CSVs, ``compare.csv``, ``manifest.txt``
    and ``plot.svg``. Only the manifest carries timings."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    curves = {}
    for name, tr in traces.items():
        rounds = round_average(tr.loss, min(R, tr.T), window) if tr.T else np.zeros(0)
        curves[name] = rounds
        path = outdir / f"loss_{name}.csv"
        _write_csv(path, ["round", "avg_loss"], [(r + 1, v) for r, v in enumerate(rounds)])
        written.append(path)
        path = outdir / f"steps_{name}.csv"
        _write_csv(path, ["t", "i", "j", "k", "y", "p", "loss"],
                   [(t + 1, *(int(v) for v in tr.indices[t]), tr.y[t], tr.p[t], tr.loss[t])
                    for t in range(tr.T)])
        written.append(path)
    names = list(traces)
    n_rounds = max((len(c) for c in curves.values()), default=0)
    path = outdir / "compare.csv"
    _write_csv(path, ["round", *names],
               [(r + 1, *(curves[a][r] for a in names)) for r in range(n_rounds)])
    written.append(path)
    written.append(_write_manifest(outdir / "manifest.txt", traces, config, R, window))
    if plot and traces:
        written.append(plot_rounds(curves, outdir / "plot.svg"))
    return written


def _write_manifest(path, traces, config, R, window):
    info = {"R": R, "window": window, "regret_comparator": "truth tensor (zero loss)",
            "python": platform.python_version(), "numpy": np.__version__}
    if config is not None:
        info.update({f"config.{k}": v for k, v in config.items().items()})
    for name, tr in traces.items():
        info[f"{name}.T"] = tr.T
        info[f"{name}.cumulative_loss"] = fmt(tr.cumulative_loss)
        info[f"{name}.regret"] = fmt(tr.regret) if tr.regret is not None else "n/a"
        info[f"{name}.wall_time_s"] = f"{tr.wall_time:.3f}"
        if "spectral_violations" in tr.config:
            info[f"{name}.spectral_violations"] = tr.config["spectral_violations"]
    write_manifest(path, info)
    return path


def plot_rounds(curves: dict, path) -> Path:
    """SVG line plot of round-averaged losses, reproducible byte-for-byte."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "onlinetensor", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for name, values in curves.items():
            ax.plot(np.arange(1, len(values) + 1), values, label=name, marker=".")
        ax.set_xlabel("round")
        ax.set_ylabel("average loss")
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return Path(path)


def resolve_outdir(config: RunConfig, cli_value: str | None = None) -> str:
    """CLI flag, then the environment variable, then the config value."""
    return cli_value or os.environ.get(OUTDIR_ENV) or config.outdir


def tail_mean(curve, k: int = 5) -> float:
    curve = np.asarray(curve, dtype=float)
    return float(curve[-k:].mean())

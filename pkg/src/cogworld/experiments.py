"""Experiment pipelines producing plot-ready long-format CSV files.

Seeding: every episode draws from its own stream keyed by
``(master_seed, namespace, C, episode_index)`` through
``numpy.random.SeedSequence`` and the default PCG64 generator. Evaluation
episodes use the ``"test"`` namespace in every pipeline, so the same master
seed yields the same test episodes for the accuracy sweep, the hallucination
analysis and the reservoir benchmark.

Work is split into fixed blocks of episode indices and results are gathered
in block order, so outputs do not depend on the number of workers.
"""
from __future__ import annotations

import hashlib
import json
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from . import io as _io
from .controller import (
    ControllerConfig,
    build_landscape,
    online_reward,
    oracle_reward,
    sample_omega,
    train_controller,
)
from .environment import EnvConfig, episode_rng, sample_episode, write_episodes_jsonl
from .generator import EmbeddingSpace, create_embeddings, naive_likelihoods
from .metrics import (
    MetricSeries,
    below_chance_mass,
    disentanglement,
    factorization_regret,
    hit_histogram,
    relative_accuracy,
    summary,
    write_metrics_csv,
)
from .observers import KINDS, run_trajectory, write_beliefs_csv
from .reservoir import RidgeAccumulator, episode_reservoir, esn_inputs, drive_inputs, joint_log_increments, accumulate_beliefs, save_esn

BLOCK = 250
TEST_NS = "test"
RNG_ALGORITHM = "numpy PCG64 seeded by SeedSequence([seed, crc32(namespace), C, index])"


class ConfigError(ValueError):
    """Invalid or unknown configuration."""


def _check_keys(section: str, d: dict, allowed: Sequence[str]) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{section} must be a JSON object")
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {section}: {sorted(unknown)}")


@dataclass(frozen=True)
class ESNSettings:
    sweep: tuple[int, ...] = (1, 2)
    n_hidden: int = 500
    spectral_radius: float = 0.1
    ridge: float = 1e-4
    train_episodes: int = 20000
    test_episodes: int = 5000
    z_scale: float = 5.0


@dataclass(frozen=True)
class ControlSettings:
    conditions: tuple[str, ...] = ("offline-oracle", "online")
    omega_seeds: tuple[int, ...] = tuple(range(20))
    C: int = 2
    episodes: int = 2000
    batch: int = 1024
    lr: float = 0.005
    beta: float = 0.05
    beta_decay: float = 0.999
    optimizer: str = "adam"
    binary_omega: bool = True
    log_every: int = 50


@dataclass(frozen=True)
class HallucinationSettings:
    C: int = 2
    bins: int = 50
    threshold: float = 0.05


@dataclass(frozen=True)
class ExperimentConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    sweep: tuple[int, ...] = (1, 2, 3)
    episodes: int = 5000
    observers: tuple[str, ...] = ("joint", "naive")
    outputs: dict = field(default_factory=dict)
    workers: int = 1
    seed: int = 0
    esn: ESNSettings = field(default_factory=ESNSettings)
    control: ControlSettings = field(default_factory=ControlSettings)
    hallucination: HallucinationSettings = field(default_factory=HallucinationSettings)

    def __post_init__(self):
        if self.episodes < 1:
            raise ConfigError("episodes must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        bad = [o for o in self.observers if o not in KINDS]
        if bad:
            raise ConfigError(f"unknown observers {bad}; expected a subset of {list(KINDS)}")
        for C in self.sweep:
            if not 1 <= C <= self.env.S:
                raise ConfigError(f"context size {C} outside [1, S]")
        for cond in self.control.conditions:
            if cond not in ("online", "offline-oracle"):
                raise ConfigError(f"unknown control condition {cond!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        _check_keys("config", d, [f.name for f in fields(cls)])
        kw: dict[str, Any] = {}
        try:
            if "env" in d:
                _check_keys("env", d["env"], [f.name for f in fields(EnvConfig) if f.name != "seed"])
            seed = int(d.get("seed", 0))
            kw["env"] = EnvConfig(**{**d.get("env", {}), "seed": seed})
            kw["seed"] = seed
            for name in ("episodes", "workers"):
                if name in d:
                    kw[name] = int(d[name])
            if "sweep" in d:
                kw["sweep"] = tuple(int(c) for c in d["sweep"])
            if "observers" in d:
                kw["observers"] = tuple(d["observers"])
            if "outputs" in d:
                _check_keys("outputs", d["outputs"], OUTPUT_NAMES)
                kw["outputs"] = dict(d["outputs"])
            for name, typ in (("esn", ESNSettings), ("control", ControlSettings), ("hallucination", HallucinationSettings)):
                if name in d:
                    _check_keys(name, d[name], [f.name for f in fields(typ)])
                    sub = {k: tuple(v) if isinstance(v, list) else v for k, v in d[name].items()}
                    kw[name] = typ(**sub)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc
        return cls(**kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["env"].pop("seed")
        return d

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    def output(self, name: str, out_dir: Path) -> Path:
        return Path(out_dir) / self.outputs.get(name, OUTPUT_DEFAULTS[name])


OUTPUT_DEFAULTS = {
    "episodes": "episodes.jsonl",
    "embeddings": "embeddings.json",
    "beliefs": "beliefs.csv",
    "metrics": "metrics.csv",
    "summary": "summary.json",
    "fig2": "fig2.csv",
    "hallucination": "hallucination.csv",
    "esn": "esn.csv",
    "esn_models": "esn_C{C}.json",
    "control_curves": "control_curves.csv",
    "control_summary": "control_summary.csv",
    "control_trajectories": "control_trajectories.json",
}
OUTPUT_NAMES = tuple(OUTPUT_DEFAULTS)


# ---------------------------------------------------------------------------
# parallel plumbing


@lru_cache(maxsize=4)
def _space(seed: int, S: int, d_o: int, d_E: int) -> EmbeddingSpace:
    return create_embeddings(seed, S, d_o, d_E)


def space_for(env: EnvConfig) -> EmbeddingSpace:
    return _space(env.seed, env.S, env.d_o, env.d_E)


def _blocks(n: int, block: int = BLOCK) -> list[range]:
    return [range(s, min(s + block, n)) for s in range(0, n, block)]


def parallel_map(fn: Callable, tasks: Sequence, workers: int = 1) -> list:
    """Ordered map; ``workers > 1`` uses a process pool."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _observe_block(task) -> dict:
    env, namespace, indices, observers, keep = task
    space = space_for(env)
    out: dict[str, Any] = {"hit": {}, "hitp": {}, "traj": {}, "records": [], "optimal": []}
    fr, dis = [], []
    for k in indices:
        ep = sample_episode(space, env, k, namespace)
        a = ep.optimal_action
        out["optimal"].append(a)
        trajs = {kind: run_trajectory(ep, kind) for kind in observers}
        for kind, tr in trajs.items():
            gm = tr.goal_marginal
            out["hit"].setdefault(kind, []).append(np.argmax(gm, axis=1) == a)
            out["hitp"].setdefault(kind, []).append(gm[:, a])
            if keep:
                out["traj"].setdefault(kind, []).append(tr)
        if "joint" in trajs and "naive" in trajs:
            fr.append([factorization_regret(p, q) for p, q in zip(trajs["joint"].goal_marginal, trajs["naive"].goal_marginal)])
            if keep:
                dis.append(disentanglement(trajs["joint"], naive_likelihoods(ep.likelihood), ep))
        if keep:
            out["records"].append(ep.to_record())
    out["fr"] = np.array(fr) if fr else None
    out["dis"] = np.array(dis) if dis else None
    for key in ("hit", "hitp"):
        out[key] = {kind: np.array(v, dtype=float) for kind, v in out[key].items()}
    return out


def observe_episodes(
    env: EnvConfig, n: int, observers: Sequence[str], workers: int = 1, namespace: str = TEST_NS, keep: bool = False
) -> dict:
    """Run observers over ``n`` episodes and gather per-step statistics.

    Returns a dict with ``hit[kind]`` and ``hitp[kind]`` arrays of shape
    ``(n, T + 1)``, ``fr`` (or ``None``) and, when ``keep``, the
    trajectories, episode records and dis-entanglement series.
    """
    tasks = [(env, namespace, blk, tuple(observers), keep) for blk in _blocks(n)]
    parts = parallel_map(_observe_block, tasks, workers)
    res: dict[str, Any] = {
        "hit": {k: np.concatenate([p["hit"][k] for p in parts]) for k in observers},
        "hitp": {k: np.concatenate([p["hitp"][k] for p in parts]) for k in observers},
        "optimal": np.concatenate([p["optimal"] for p in parts]).astype(int),
        "fr": np.concatenate([p["fr"] for p in parts]) if parts[0]["fr"] is not None else None,
    }
    if keep:
        res["traj"] = {k: [t for p in parts for t in p["traj"][k]] for k in observers}
        res["records"] = [r for p in parts for r in p["records"]]
        res["dis"] = np.concatenate([p["dis"] for p in parts]) if parts[0]["dis"] is not None else None
    return res


def _sem(x: np.ndarray) -> np.ndarray:
    if x.shape[0] < 2:
        return np.zeros(x.shape[1:])
    return x.std(axis=0, ddof=1) / np.sqrt(x.shape[0])


def write_manifest(out_dir: Path, command: str, config: ExperimentConfig, outputs: dict, started: float, extra=None) -> Path:
    """Per-command manifest with config hash, version, timing and checksums."""
    manifest = {
        "command": command,
        "tool_version": __version__,
        "config_hash": config.digest(),
        "master_seed": config.seed,
        "rng": RNG_ALGORITHM,
        "wall_clock_seconds": time.time() - started,
        "outputs": {str(Path(p).name): _io.sha256_file(p) for p in outputs.values()},
    }
    if extra:
        manifest.update(extra)
    return _io.write_json(Path(out_dir) / f"manifest_{command}.json", manifest)


# ---------------------------------------------------------------------------
# pipelines


def run_generate(config: ExperimentConfig, out_dir) -> dict:
    started = time.time()
    out_dir = Path(out_dir)
    space = space_for(config.env)
    eps = (sample_episode(space, config.env, k, TEST_NS) for k in range(config.episodes))
    paths = {
        "episodes": write_episodes_jsonl(config.output("episodes", out_dir), eps),
        "embeddings": _io.write_json(config.output("embeddings", out_dir), space.to_dict()),
    }
    write_manifest(out_dir, "generate", config, paths, started)
    return paths


def run_observe(config: ExperimentConfig, out_dir) -> dict:
    """Observer trajectories, per-episode metrics and a summary at ``env.C``."""
    started = time.time()
    out_dir = Path(out_dir)
    env = config.env
    res = observe_episodes(env, config.episodes, config.observers, config.workers, keep=True)
    ids = list(range(config.episodes))
    series = [MetricSeries(f"hit_{k}", res["hit"][k]) for k in config.observers]
    series += [MetricSeries(f"hit_probability_{k}", res["hitp"][k]) for k in config.observers]
    if res["fr"] is not None:
        series.append(MetricSeries("factorization_regret", res["fr"]))
    if res.get("dis") is not None:
        series.append(MetricSeries("disentanglement", res["dis"]))
    trajs = ((eid, tr) for k in config.observers for eid, tr in zip(ids, res["traj"][k]))
    paths = {
        "beliefs": write_beliefs_csv(config.output("beliefs", out_dir), trajs),
        "metrics": write_metrics_csv(config.output("metrics", out_dir), series, ids),
        "summary": _io.write_json(config.output("summary", out_dir), summary(series)),
    }
    write_manifest(out_dir, "observe", config, paths, started)
    return paths


def fig2_table(config: ExperimentConfig) -> list[tuple]:
    """Rows ``(C, t, observer, accuracy, accuracy_sem, relative_accuracy, fr_mean, fr_sem)``."""
    if set(config.observers) != {"joint", "naive"}:
        raise ConfigError("the accuracy sweep needs both joint and naive observers")
    rows = []
    for C in config.sweep:
        env = config.env.replace(C=C)
        res = observe_episodes(env, config.episodes, config.observers, config.workers)
        naive_acc = res["hit"]["naive"].mean(axis=0)
        fr_mean, fr_sem = res["fr"].mean(axis=0), _sem(res["fr"])
        for kind in config.observers:
            acc = res["hit"][kind].mean(axis=0)
            sem = _sem(res["hit"][kind])
            rel = relative_accuracy(acc, naive_acc, env.R)
            for t in range(env.T + 1):
                rows.append((C, t, kind, float(acc[t]), float(sem[t]), float(rel[t]), float(fr_mean[t]), float(fr_sem[t])))
    return rows


FIG2_HEADER = ("C", "t", "observer", "accuracy", "accuracy_sem", "relative_accuracy", "fr_mean", "fr_sem")


def run_fig2(config: ExperimentConfig, out_dir) -> dict:
    started = time.time()
    rows = fig2_table(config)
    paths = {"fig2": _io.write_csv(config.output("fig2", out_dir), FIG2_HEADER, rows)}
    write_manifest(Path(out_dir), "fig2", config, paths, started)
    return paths


def hallucination_table(config: ExperimentConfig) -> tuple[list[tuple], dict]:
    h = config.hallucination
    env = config.env.replace(C=h.C)
    res = observe_episodes(env, config.episodes, config.observers, config.workers)
    rows, below = [], {}
    for kind in config.observers:
        below[kind] = []
        for t in range(env.T + 1):
            vals = res["hitp"][kind][:, t]
            mass, edges = hit_histogram(vals, h.bins)
            bc = below_chance_mass(vals, h.threshold)
            below[kind].append(bc)
            for b in range(h.bins):
                rows.append((kind, t, float(edges[b]), float(edges[b + 1]), float(mass[b]), bc))
    return rows, below


def run_hallucination(config: ExperimentConfig, out_dir) -> dict:
    started = time.time()
    rows, _ = hallucination_table(config)
    header = ("observer", "t", "bin_lo", "bin_hi", "mass", "below_chance_mass")
    paths = {"hallucination": _io.write_csv(config.output("hallucination", out_dir), header, rows)}
    write_manifest(Path(out_dir), "hallucinate", config, paths, started)
    return paths


def reservoir_seed(master_seed: int, C: int) -> int:
    return zlib.crc32(f"reservoir:{master_seed}:{C}".encode())


def _esn_stats_block(task):
    env, res, indices = task
    space = space_for(env)
    eps = [sample_episode(space, env, k, "esn-train") for k in indices]
    X = drive_inputs(res, np.stack([esn_inputs(ep) for ep in eps])).reshape(-1, res.N)
    Y = np.concatenate([joint_log_increments(run_trajectory(ep, "joint")) for ep in eps])
    return RidgeAccumulator().add(X, Y)


def _esn_eval_block(task):
    env, res, readout, indices = task
    space = space_for(env)
    eps = [sample_episode(space, env, k, TEST_NS) for k in indices]
    X = drive_inputs(res, np.stack([esn_inputs(ep) for ep in eps]))
    hits = []
    for ep, states in zip(eps, X):
        marg = accumulate_beliefs(readout(states), ep.C, ep.R)
        hits.append(np.argmax(marg[:, ep.goal, :], axis=1) == ep.optimal_action)
    return np.array(hits, dtype=float)


def esn_benchmark(config: ExperimentConfig, C: int):
    """Train and test the Echo State observer at context size ``C``.

    Returns ``(reservoir, readout, esn_hits, observer_result)`` where the
    hit matrices have shape ``(test_episodes, T + 1)``.
    """
    s = config.esn
    env = config.env.replace(C=C)
    res = episode_reservoir(reservoir_seed(config.seed, C), s.n_hidden, env.d_o, C, s.spectral_radius, z_scale=s.z_scale)
    parts = parallel_map(_esn_stats_block, [(env, res, b) for b in _blocks(s.train_episodes)], config.workers)
    acc = RidgeAccumulator()
    for p in parts:
        acc = acc.merge(p)
    readout = acc.solve(s.ridge)
    hits = np.concatenate(
        parallel_map(_esn_eval_block, [(env, res, readout, b) for b in _blocks(s.test_episodes)], config.workers)
    )
    ref = observe_episodes(env, s.test_episodes, ("joint", "naive"), config.workers)
    return res, readout, hits, ref


def run_esn(config: ExperimentConfig, out_dir) -> dict:
    started = time.time()
    out_dir = Path(out_dir)
    rows, paths, seeds = [], {}, {}
    for C in config.esn.sweep:
        res, readout, hits, ref = esn_benchmark(config, C)
        seeds[str(C)] = res.seed
        model_path = out_dir / config.outputs.get("esn_models", OUTPUT_DEFAULTS["esn_models"]).format(C=C)
        save_esn(model_path, res, readout)
        paths[f"esn_C{C}"] = model_path
        for kind, h in (("joint", ref["hit"]["joint"]), ("naive", ref["hit"]["naive"]), ("esn", hits)):
            acc, sem = h.mean(axis=0), _sem(h)
            rows.extend((C, t, kind, float(acc[t]), float(sem[t])) for t in range(h.shape[1]))
    paths["esn"] = _io.write_csv(config.output("esn", out_dir), ("C", "t", "observer", "accuracy", "accuracy_sem"), rows)
    write_manifest(out_dir, "esn", config, paths, started, {"reservoir_seeds": seeds})
    return paths


def _control_task(task):
    config, condition, omega_seed = task
    s = config.control
    env = config.env.replace(C=s.C)
    ep = sample_episode(space_for(env), env, 0, "control")
    omega = sample_omega(omega_seed, env.d_o, s.binary_omega)
    true = build_landscape(omega, ep.likelihood, "oracle")
    if condition == "offline-oracle":
        reward = oracle_reward(true)
    else:
        reward = online_reward(omega, ep.likelihood, env.T)
    cc = ControllerConfig(s.episodes, s.batch, s.lr, s.beta, s.beta_decay, s.optimizer, s.log_every)
    result = train_controller(cc, reward, true, episode_rng(config.seed, omega_seed, f"control:{condition}", s.C))
    return condition, omega_seed, omega.omega, true, result


def control_runs(config: ExperimentConfig) -> list:
    s = config.control
    tasks = [(config, cond, sd) for cond in s.conditions for sd in s.omega_seeds]
    return parallel_map(_control_task, tasks, config.workers)


def run_control(config: ExperimentConfig, out_dir) -> dict:
    started = time.time()
    out_dir = Path(out_dir)
    runs = control_runs(config)
    curve_rows, summary_rows = [], []
    overlay: dict[str, Any] = {"landscapes": {}, "trajectories": []}
    for cond in config.control.conditions:
        perf = np.array([r[4].performance for r in runs if r[0] == cond])
        mean, sem = perf.mean(axis=0), _sem(perf)
        lo, hi = perf.min(axis=0), perf.max(axis=0)
        summary_rows.extend(
            (cond, e + 1, float(mean[e]), float(sem[e]), float(lo[e]), float(hi[e]), perf.shape[0])
            for e in range(perf.shape[1])
        )
    for cond, sd, omega, true, result in runs:
        curve_rows.extend(
            (cond, sd, e + 1, float(result.performance[e]), float(result.entropy[e]))
            for e in range(result.performance.size)
        )
        overlay["landscapes"][str(sd)] = {"omega": omega, **true.to_dict(), "argmax": list(true.argmax())}
        overlay["trajectories"].append(
            {"condition": cond, "omega_seed": sd, "path": [{"episode": e, "greedy": list(c)} for e, c in result.greedy_path]}
        )
    paths = {
        "control_curves": _io.write_csv(
            config.output("control_curves", out_dir),
            ("condition", "omega_seed", "episode", "normalized_performance", "entropy"),
            curve_rows,
        ),
        "control_summary": _io.write_csv(
            config.output("control_summary", out_dir),
            ("condition", "episode", "mean", "sem", "min", "max", "n"),
            summary_rows,
        ),
        "control_trajectories": _io.write_json(config.output("control_trajectories", out_dir), overlay),
    }
    write_manifest(out_dir, "control", config, paths, started)
    return paths

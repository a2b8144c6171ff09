"""Episode sampling and the set-state/observe interface."""
from __future__ import annotations

import zlib
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Sequence

import numpy as np

from . import io as _io
from .generator import (
    EmbeddingSpace,
    InteractionSet,
    LikelihoodTensor,
    build_likelihood,
    context_interactions,
    create_embeddings,
)


@dataclass(frozen=True)
class EnvConfig:
    S: int = 500
    C: int = 2
    R: int = 10
    T: int = 30
    d_o: int = 5
    d_E: int = 30
    lam: float = 2.0
    seed: int = 0

    def __post_init__(self):
        for name in ("S", "C", "R", "T", "d_o", "d_E"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.C > self.S:
            raise ValueError(f"context size C={self.C} exceeds the number of variables S={self.S}")
        if self.R < 2:
            raise ValueError("R must be >= 2")
        if self.d_E < self.d_o:
            raise ValueError("d_E must be >= d_o")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> "EnvConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown env keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **kw) -> "EnvConfig":
        return EnvConfig(**{**asdict(self), **kw})

    def embeddings(self) -> EmbeddingSpace:
        return create_embeddings(self.seed, self.S, self.d_o, self.d_E)


@dataclass(frozen=True)
class Episode:
    context: tuple[int, ...]
    realizations: np.ndarray
    goal: int
    interactions: InteractionSet
    likelihood: LikelihoodTensor
    observations: np.ndarray
    seed: int
    index: int = 0

    @property
    def C(self) -> int:
        return len(self.context)

    @property
    def R(self) -> int:
        return self.likelihood.R

    @property
    def T(self) -> int:
        return self.observations.shape[0]

    @property
    def optimal_action(self) -> int:
        return int(self.realizations[self.goal])

    def to_record(self) -> dict:
        return {
            "context": list(self.context),
            "realizations": [int(r) for r in self.realizations],
            "goal": int(self.goal),
            "observations": self.observations.astype(int).tolist(),
        }


def episode_rng(seed: int, episode_index: int, namespace: str = "", C: int = 0) -> np.random.Generator:
    """Independent stream for one episode, keyed by ``(seed, namespace, C, index)``.

    The stream never depends on evaluation order or worker count.
    """
    tag = zlib.crc32(namespace.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, tag, C, episode_index]))


def sample_observation(ell: LikelihoodTensor, r: Sequence[int], rng: np.random.Generator) -> np.ndarray:
    """One binary observation vector, each dimension ``~ Bernoulli(ell_i(r))``."""
    p = ell.ell[(slice(None),) + tuple(int(x) for x in r)]
    return (rng.random(p.shape) < p).astype(np.int8)


def set_state_and_observe(
    ell: LikelihoodTensor, r: Sequence[int], T: int, rng: np.random.Generator
) -> np.ndarray:
    """``T`` i.i.d. observations with the world held at joint realization ``r``."""
    p = ell.ell[(slice(None),) + tuple(int(x) for x in r)]
    return (rng.random((T, p.shape[0])) < p).astype(np.int8)


def sample_episode(
    space: EmbeddingSpace,
    cfg: EnvConfig,
    episode_index: int,
    namespace: str = "",
    allowed: Sequence[int] | None = None,
) -> Episode:
    """Sample context, realizations, goal and an observation trajectory.

    Args:
        allowed: optional subset of variable indices the context is drawn
            from (train/test variable splits).
    """
    if (space.S, space.d_o, space.d_E) != (cfg.S, cfg.d_o, cfg.d_E):
        raise ValueError("EnvConfig dimensions do not match the embedding space")
    pool = np.arange(cfg.S) if allowed is None else np.asarray(sorted(set(int(a) for a in allowed)))
    if cfg.C > pool.size:
        raise ValueError(f"context size C={cfg.C} exceeds the {pool.size} available variables")
    rng = episode_rng(cfg.seed, episode_index, namespace, cfg.C)
    context = tuple(int(c) for c in rng.choice(pool, size=cfg.C, replace=False))
    realizations = rng.integers(0, cfg.R, size=cfg.C)
    goal = int(rng.integers(0, cfg.C))
    inter = context_interactions(space, context)
    ell = build_likelihood(inter, cfg.R, cfg.lam)
    obs = set_state_and_observe(ell, realizations, cfg.T, rng)
    return Episode(
        context=context,
        realizations=realizations,
        goal=goal,
        interactions=inter,
        likelihood=ell,
        observations=obs,
        seed=cfg.seed,
        index=episode_index,
    )


def sample_episodes(
    space: EmbeddingSpace, cfg: EnvConfig, indices: Iterable[int], namespace: str = "", allowed=None
) -> list[Episode]:
    return [sample_episode(space, cfg, int(k), namespace, allowed) for k in indices]


def write_episodes_jsonl(path, episodes: Iterable[Episode]):
    return _io.write_jsonl(path, (ep.to_record() for ep in episodes))

"""Exact Joint and Naive Bayesian observers.

Both observers start from a uniform prior and are updated in log space. The
Joint observer keeps the full posterior over all ``R**C`` joint realizations;
the Naive observer keeps one marginal per context variable and updates it
with the marginalized likelihood, ignoring interactions.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal

import numpy as np
from scipy.special import logsumexp

from . import io as _io
from .environment import Episode
from .generator import LikelihoodTensor, naive_likelihoods

LOG_FLOOR = np.log(1e-300)

Kind = Literal["joint", "naive"]
KINDS: tuple[str, ...] = ("joint", "naive")


@dataclass
class JointBelief:
    log_post: np.ndarray  # shape (R,) * C

    @classmethod
    def uniform(cls, R: int, C: int) -> "JointBelief":
        return cls(np.full((R,) * C, -C * np.log(R)))

    def marginals(self) -> np.ndarray:
        """Per-variable marginals, shape ``(C, R)``."""
        p = np.exp(self.log_post)
        C = p.ndim
        out = np.stack([p.sum(axis=tuple(a for a in range(C) if a != c)) for c in range(C)])
        return out / out.sum(axis=1, keepdims=True)


@dataclass
class MarginalBeliefs:
    log_B: np.ndarray  # shape (C, R)

    @classmethod
    def uniform(cls, R: int, C: int) -> "MarginalBeliefs":
        return cls(np.full((C, R), -np.log(R)))

    @property
    def B(self) -> np.ndarray:
        return np.exp(self.log_B)


@dataclass
class BeliefTrajectory:
    """Belief snapshots after 0..T observations.

    Attributes:
        marginals: ``(T + 1, C, R)`` per-variable marginal beliefs.
        goal: index of the goal variable.
        kind: ``"joint"``, ``"naive"`` or ``"esn"``.
    """

    marginals: np.ndarray
    goal: int
    kind: str

    @property
    def goal_marginal(self) -> np.ndarray:
        return self.marginals[:, self.goal, :]


def bernoulli_loglik(obs: np.ndarray, log_p: np.ndarray, log_q: np.ndarray) -> np.ndarray:
    """``sum_i o_i ln p_i + (1 - o_i) ln(1 - p_i)`` over the leading axis.

    ``log_p`` and ``log_q`` hold ``ln ell`` and ``ln(1 - ell)`` with the
    observation dimension first.
    """
    obs = np.asarray(obs, dtype=float)
    shape = (-1,) + (1,) * (log_p.ndim - 1)
    o = obs.reshape(shape)
    return np.sum(o * log_p + (1.0 - o) * log_q, axis=0)


def _lse(a: np.ndarray, axis=None, keepdims: bool = False) -> np.ndarray:
    # hot-path logsumexp; inputs are finite by construction
    m = np.max(a, axis=axis, keepdims=True)
    out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return out if keepdims else np.squeeze(out, axis=axis)


def _log_tables(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    with np.errstate(divide="ignore"):
        return np.maximum(np.log(p), LOG_FLOOR), np.maximum(np.log1p(-p), LOG_FLOOR)


def _joint_step(log_post, obs, log_p, log_q):
    lp = log_post + bernoulli_loglik(obs, log_p, log_q)
    return lp - _lse(lp)


def joint_update(belief: JointBelief, obs, ell: LikelihoodTensor) -> JointBelief:
    """One sequential Bayes step on the full joint posterior."""
    return JointBelief(_joint_step(belief.log_post, obs, *_log_tables(ell.ell)))


def joint_goal_marginal(belief: JointBelief, g: int) -> np.ndarray:
    C = belief.log_post.ndim
    axes = tuple(a for a in range(C) if a != g)
    lm = logsumexp(belief.log_post, axis=axes) if axes else belief.log_post
    return np.exp(lm - logsumexp(lm))


def _naive_step(log_B, obs, log_p, log_q):
    lb = log_B + bernoulli_loglik(obs, log_p, log_q)
    return lb - _lse(lb, axis=1, keepdims=True)


def naive_update(marginals: MarginalBeliefs, obs, naive_ell: np.ndarray) -> MarginalBeliefs:
    """Update each variable's marginal independently.

    Args:
        naive_ell: ``(C, d_o, R)`` marginal likelihoods ``P(o_i = 1 | r_c)``.
    """
    tables = _log_tables(np.moveaxis(naive_ell, 1, 0))  # (d_o, C, R)
    return MarginalBeliefs(_naive_step(marginals.log_B, obs, *tables))


def map_action(goal_belief) -> int:
    """Argmax with lowest-index tie-break."""
    return int(np.argmax(np.asarray(goal_belief)))


def batch_log_posterior(observations: np.ndarray, ell: LikelihoodTensor) -> np.ndarray:
    """Normalized log joint posterior after all observations, computed in one sum."""
    log_p, log_q = _log_tables(ell.ell)
    obs = np.asarray(observations, dtype=float)
    ones = obs.sum(axis=0)
    zeros = obs.shape[0] - ones
    shape = (-1,) + (1,) * ell.C
    lp = np.sum(ones.reshape(shape) * log_p + zeros.reshape(shape) * log_q, axis=0)
    return lp - logsumexp(lp)


def run_trajectory(episode: Episode, kind: str = "joint") -> BeliefTrajectory:
    """Run an observer over an episode, recording all ``T + 1`` snapshots."""
    R, C, T = episode.R, episode.C, episode.T
    snaps = np.empty((T + 1, C, R))
    if kind == "joint":
        tables = _log_tables(episode.likelihood.ell)
        belief = JointBelief.uniform(R, C)
        snaps[0] = belief.marginals()
        for t in range(T):
            belief = JointBelief(_joint_step(belief.log_post, episode.observations[t], *tables))
            snaps[t + 1] = belief.marginals()
    elif kind == "naive":
        tables = _log_tables(np.moveaxis(naive_likelihoods(episode.likelihood), 1, 0))
        log_B = MarginalBeliefs.uniform(R, C).log_B
        snaps[0] = np.exp(log_B)
        for t in range(T):
            log_B = _naive_step(log_B, episode.observations[t], *tables)
            snaps[t + 1] = np.exp(log_B)
    else:
        raise ValueError(f"unknown observer kind {kind!r}")
    return BeliefTrajectory(marginals=snaps, goal=episode.goal, kind=kind)


def write_beliefs_csv(path, trajectories: Iterable[tuple[int, BeliefTrajectory]]):
    """Long-format CSV: episode_id, t, observer, variable, realization, belief."""

    def rows():
        for eid, traj in trajectories:
            Tp1, C, R = traj.marginals.shape
            for t in range(Tp1):
                for c in range(C):
                    for r in range(R):
                        yield (eid, t, traj.kind, c, r, float(traj.marginals[t, c, r]))

    return _io.write_csv(path, ("episode_id", "t", "observer", "variable", "realization", "belief"), rows())

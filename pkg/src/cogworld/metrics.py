"""Information-theoretic and behavioural metrics over belief trajectories."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import io as _io
from .environment import Episode
from .observers import BeliefTrajectory

PROB_FLOOR = 1e-300


@dataclass
class MetricSeries:
    name: str
    values: np.ndarray  # (episodes, T + 1)

    def mean(self) -> np.ndarray:
        return self.values.mean(axis=0)

    def sem(self) -> np.ndarray:
        n = self.values.shape[0]
        if n < 2:
            return np.zeros(self.values.shape[1])
        return self.values.std(axis=0, ddof=1) / np.sqrt(n)


def kl_divergence(p, q) -> float:
    """``D_KL(p || q)`` with ``0 ln 0 = 0`` and ``q`` floored at 1e-300."""
    p = np.asarray(p, dtype=float)
    q = np.maximum(np.asarray(q, dtype=float), PROB_FLOOR)
    mask = p > 0
    return float(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask]))))


def jeffreys(p, q) -> float:
    return kl_divergence(p, q) + kl_divergence(q, p)


def factorization_regret(joint_goal, naive_goal) -> float:
    """KL divergence from the Joint to the Naive goal marginal."""
    return max(kl_divergence(joint_goal, naive_goal), 0.0)


def regret_series(joint: Sequence[BeliefTrajectory], naive: Sequence[BeliefTrajectory]) -> MetricSeries:
    vals = np.array(
        [
            [factorization_regret(pj, pn) for pj, pn in zip(j.goal_marginal, n.goal_marginal)]
            for j, n in zip(joint, naive)
        ]
    )
    return MetricSeries("factorization_regret", vals)


def hits(trajectories: Sequence[BeliefTrajectory], optimal_actions: Sequence[int]) -> np.ndarray:
    """``(episodes, T + 1)`` indicator that the MAP action is optimal."""
    return np.array(
        [np.argmax(tr.goal_marginal, axis=1) == a for tr, a in zip(trajectories, optimal_actions)],
        dtype=float,
    )


def accuracy_curve(trajectories: Sequence[BeliefTrajectory], optimal_actions: Sequence[int]) -> np.ndarray:
    """Fraction of episodes whose MAP goal action is optimal, per step."""
    if len(trajectories) == 0:
        raise ValueError("empty trajectory batch")
    return hits(trajectories, optimal_actions).mean(axis=0)


def relative_accuracy(curve_a, curve_b, R: int) -> np.ndarray:
    """Elementwise ``a / b`` with the denominator floored at chance ``1/R``."""
    a = np.asarray(curve_a, dtype=float)
    b = np.asarray(curve_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("curves must have the same length")
    return a / np.maximum(b, 1.0 / R)


def hit_probabilities(trajectories: Sequence[BeliefTrajectory], optimal_actions: Sequence[int]) -> np.ndarray:
    """Belief mass on the correct action, ``(episodes, T + 1)``."""
    return np.array([tr.goal_marginal[:, a] for tr, a in zip(trajectories, optimal_actions)])


def hit_distribution(
    trajectories: Sequence[BeliefTrajectory], optimal_actions: Sequence[int], t: int, bins: int = 50
) -> tuple[np.ndarray, np.ndarray]:
    """Histogram of the hit probability at step ``t`` pooled over episodes.

    Returns ``(mass, edges)``; ``mass`` sums to 1 over the ``bins`` equal-width
    bins on [0, 1] (the last bin is closed).
    """
    vals = hit_probabilities(trajectories, optimal_actions)[:, t]
    return hit_histogram(vals, bins)


def hit_histogram(values, bins: int = 50) -> tuple[np.ndarray, np.ndarray]:
    counts, edges = np.histogram(np.clip(values, 0.0, 1.0), bins=bins, range=(0.0, 1.0))
    return counts / max(counts.sum(), 1), edges


def below_chance_mass(values, threshold: float) -> float:
    """Fraction of hit probabilities strictly below ``threshold``."""
    return float(np.mean(np.asarray(values) < threshold))


def disentanglement(joint_traj: BeliefTrajectory, naive_ell: np.ndarray, episode: Episode) -> np.ndarray:
    """Jeffreys divergence between naive and history-conditioned goal likelihoods.

    For observations ``t = 1 .. T-1`` compares the normalized naive marginal
    likelihood ``prod_i p_i(o_t | r_g)`` with the normalized belief ratio
    ``B_t(r_g) / B_{t-1}(r_g)`` of the exact Joint observer. Because that
    observer is exact, the ratio is the history-conditioned likelihood up to
    normalization.

    Args:
        naive_ell: ``(C, d_o, R)`` marginal likelihoods.
    """
    g = episode.goal
    B = joint_traj.goal_marginal
    assert np.all(B > 0), "joint goal marginal has a zero entry"
    p = naive_ell[g]  # (d_o, R)
    out = np.empty(episode.T - 1)
    for t in range(1, episode.T):
        o = episode.observations[t - 1].astype(float)[:, None]
        log_qa = np.sum(o * np.log(p) + (1 - o) * np.log1p(-p), axis=0)
        qa = np.exp(log_qa - log_qa.max())
        qa /= qa.sum()
        ratio = np.maximum(B[t] / B[t - 1], PROB_FLOOR)
        qb = ratio / ratio.sum()
        out[t - 1] = jeffreys(qa, qb)
    return out


def participation_ratio(states) -> float:
    """``(sum lambda)^2 / sum lambda^2`` over sample-covariance eigenvalues."""
    X = np.asarray(states, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need a (samples, dims) matrix with at least 2 samples")
    cov = np.atleast_2d(np.cov(X, rowvar=False))
    ev = np.clip(np.linalg.eigvalsh(cov), 0.0, None)
    denom = np.sum(ev**2)
    if denom <= 0:
        return 1.0
    return float(np.sum(ev) ** 2 / denom)


def write_metrics_csv(path, series: Sequence[MetricSeries], episode_ids: Sequence[int] | None = None):
    """Long-format CSV ``metric, episode_id, t, value`` plus per-t ``mean`` rows."""

    def rows():
        for s in series:
            ids = episode_ids if episode_ids is not None else range(s.values.shape[0])
            for eid, row in zip(ids, s.values):
                for t, v in enumerate(row):
                    yield (s.name, eid, t, float(v))
            for t, v in enumerate(s.mean()):
                yield (s.name, "mean", t, float(v))

    return _io.write_csv(path, ("metric", "episode_id", "t", "value"), rows())


def summary(series: Sequence[MetricSeries]) -> dict:
    return {s.name: {"mean": s.mean(), "sem": s.sem(), "n": int(s.values.shape[0])} for s in series}

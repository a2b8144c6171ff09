"""Preference landscapes and advantage actor-critic control over joint realizations.

The actor is a softmax over all ``R**C`` joint realizations and the critic a
single scalar: the interactions are fixed within a run, so networks fed only
with them reduce to free parameters.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Literal

import numpy as np

from . import io as _io
from .generator import LikelihoodTensor

EPS_CLIP = 1e-3

RewardFn = Callable[[np.ndarray, np.random.Generator], np.ndarray]


@dataclass(frozen=True)
class PreferenceSpec:
    omega: np.ndarray
    seed: int = 0


def sample_omega(seed: int, d_o: int, binary: bool = True) -> PreferenceSpec:
    """Preferred observations; binary by default, else uniform on [0, 1]."""
    rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, 0x0E6A]))
    omega = rng.integers(0, 2, size=d_o).astype(float) if binary else rng.random(d_o)
    return PreferenceSpec(omega=omega, seed=seed)


@dataclass(frozen=True)
class PreferenceLandscape:
    reward: np.ndarray  # shape (R,) * C
    source: Literal["oracle", "empirical"]

    @property
    def flat(self) -> np.ndarray:
        return self.reward.reshape(-1)

    def argmax(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(np.argmax(self.reward), self.reward.shape))

    def to_dict(self) -> dict:
        return {"source": self.source, "shape": list(self.reward.shape), "reward": self.flat}


def _reward_from_probs(p: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Rewards for likelihood columns ``p`` of shape ``(d_o, ...)``."""
    p = np.clip(p, EPS_CLIP, 1.0 - EPS_CLIP)
    w = omega.reshape((-1,) + (1,) * (p.ndim - 1))
    return np.exp(np.mean(np.log(p) * w + np.log1p(-p) * (1.0 - w), axis=0))


def intrinsic_reward(r, omega: PreferenceSpec | np.ndarray, ell: LikelihoodTensor) -> float:
    """``exp(mean_i [Omega_i ln l_i(r) + (1 - Omega_i) ln(1 - l_i(r))])`` with clipped ``l``."""
    om = omega.omega if isinstance(omega, PreferenceSpec) else np.asarray(omega, dtype=float)
    p = ell.ell[(slice(None),) + tuple(int(x) for x in r)]
    return float(_reward_from_probs(p, om))


def build_landscape(
    omega: PreferenceSpec,
    ell: LikelihoodTensor,
    kind: Literal["oracle", "empirical"] = "oracle",
    rng: np.random.Generator | None = None,
    T: int = 30,
) -> PreferenceLandscape:
    """Intrinsic reward at every joint realization.

    ``empirical`` replaces each cell's likelihood by the mean of ``T``
    observations taken with the world set to that cell.
    """
    if kind == "oracle":
        p = ell.ell
    elif kind == "empirical":
        if rng is None:
            raise ValueError("empirical landscapes need an rng")
        p = rng.binomial(T, ell.ell) / T
    else:
        raise ValueError(f"unknown landscape kind {kind!r}")
    return PreferenceLandscape(reward=_reward_from_probs(p, omega.omega), source=kind)


def oracle_reward(landscape: PreferenceLandscape) -> RewardFn:
    flat = landscape.flat

    def reward(actions: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return flat[actions]

    return reward


def online_reward(omega: PreferenceSpec, ell: LikelihoodTensor, T: int = 30) -> RewardFn:
    """Reward from the empirical mean of ``T`` observations per sampled realization.

    The count of ones in ``T`` Bernoulli draws is drawn directly as a
    binomial; the distribution is identical to observing ``T`` times.
    """
    flat = ell.flat()

    def reward(actions: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        p_hat = rng.binomial(T, flat[:, actions]) / T
        return _reward_from_probs(p_hat, omega.omega)

    return reward


# ---------------------------------------------------------------------------
# policy


def softmax(logits: np.ndarray) -> np.ndarray:
    e = np.exp(logits - logits.max())
    return e / e.sum()


def entropy(pi: np.ndarray) -> float:
    nz = pi[pi > 0]
    return float(-np.sum(nz * np.log(nz)))


@dataclass
class PolicyParams:
    logits: np.ndarray
    value: float
    beta: float
    lr: float
    beta_decay: float = 0.999
    optimizer: Literal["adam", "sgd"] = "adam"
    step: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None

    @classmethod
    def init(
        cls, n_actions: int, lr: float = 0.005, beta: float = 0.05, beta_decay: float = 0.999,
        optimizer: str = "adam", value: float = 0.5,
    ) -> "PolicyParams":
        return cls(
            logits=np.zeros(n_actions), value=float(value), beta=float(beta), lr=float(lr),
            beta_decay=float(beta_decay), optimizer=optimizer,  # type: ignore[arg-type]
        )

    @property
    def pi(self) -> np.ndarray:
        return softmax(self.logits)

    def greedy(self) -> int:
        return int(np.argmax(self.logits))


def a2c_loss(logits, value, actions, rewards, beta, advantage=None) -> float:
    """Batch-mean controller loss.

    ``A^2 - ln pi(r) * A_detached - beta * H(pi)``; ``advantage`` is the
    detached advantage (computed from ``value`` when omitted).
    """
    pi = softmax(np.asarray(logits, dtype=float))
    A = rewards - value
    A_det = A if advantage is None else advantage
    logpi = np.log(pi[actions])
    return float(np.mean(A**2 - logpi * A_det) - beta * entropy(pi))


def a2c_grad(logits, value, actions, rewards, beta, advantage=None) -> tuple[np.ndarray, float]:
    """Analytic gradient of :func:`a2c_loss` w.r.t. ``(logits, value)``."""
    logits = np.asarray(logits, dtype=float)
    pi = softmax(logits)
    A = rewards - value
    A_det = A if advantage is None else advantage
    B = actions.size
    g = -np.bincount(actions, weights=A_det, minlength=logits.size) / B + pi * np.mean(A_det)
    logpi = np.log(np.maximum(pi, 1e-300))
    H = -np.sum(pi * logpi)
    g += beta * pi * (logpi + H)
    g_v = float(np.mean(-2.0 * A))
    return g, g_v


def _apply(policy: PolicyParams, g_logits: np.ndarray, g_value: float) -> PolicyParams:
    grad = np.append(g_logits, g_value)
    step = policy.step + 1
    if policy.optimizer == "sgd":
        delta = policy.lr * grad
        m, v = policy.m, policy.v
    elif policy.optimizer == "adam":
        b1, b2, eps = 0.9, 0.999, 1e-8
        m = (np.zeros_like(grad) if policy.m is None else policy.m) * b1 + (1 - b1) * grad
        v = (np.zeros_like(grad) if policy.v is None else policy.v) * b2 + (1 - b2) * grad**2
        delta = policy.lr * (m / (1 - b1**step)) / (np.sqrt(v / (1 - b2**step)) + eps)
    else:
        raise ValueError(f"unknown optimizer {policy.optimizer!r}")
    return replace(
        policy, logits=policy.logits - delta[:-1], value=float(policy.value - delta[-1]),
        step=step, m=m, v=v,
    )


def a2c_step(
    policy: PolicyParams, reward_fn: RewardFn, rng: np.random.Generator, batch: int = 1024
) -> tuple[PolicyParams, dict]:
    """Sample a batch of joint actions, take one gradient step, decay the entropy bonus."""
    if batch < 1:
        raise ValueError("batch must be >= 1")
    pi = policy.pi
    cdf = np.cumsum(pi)
    actions = np.minimum(np.searchsorted(cdf, rng.random(batch) * cdf[-1], side="right"), pi.size - 1)
    rewards = reward_fn(actions, rng)
    A = rewards - policy.value
    g, g_v = a2c_grad(policy.logits, policy.value, actions, rewards, policy.beta)
    new = _apply(policy, g, g_v)
    if not np.all(np.isfinite(new.logits)):
        raise FloatingPointError("non-finite policy logits")
    new = replace(new, beta=policy.beta * policy.beta_decay)
    diag = {
        "loss": a2c_loss(policy.logits, policy.value, actions, rewards, policy.beta),
        "mean_advantage": float(A.mean()),
        "mean_reward": float(rewards.mean()),
        "entropy": entropy(pi),
    }
    return new, diag


def normalized_performance(policy: PolicyParams | np.ndarray, true_landscape: PreferenceLandscape) -> float:
    """Reward of the greedy joint action relative to the landscape maximum."""
    logits = policy.logits if isinstance(policy, PolicyParams) else np.asarray(policy)
    flat = true_landscape.flat
    return float(flat[int(np.argmax(logits))] / flat.max())


@dataclass(frozen=True)
class ControllerConfig:
    episodes: int = 2000
    batch: int = 1024
    lr: float = 0.005
    beta: float = 0.05
    beta_decay: float = 0.999
    optimizer: str = "adam"
    log_every: int = 50


@dataclass
class TrainingResult:
    policy: PolicyParams
    performance: np.ndarray  # (episodes,)
    entropy: np.ndarray  # (episodes,)
    greedy_path: list[tuple[int, tuple[int, ...]]] = field(default_factory=list)


def train_controller(
    config: ControllerConfig,
    reward_fn: RewardFn,
    true_landscape: PreferenceLandscape,
    rng: np.random.Generator,
) -> TrainingResult:
    """Run ``config.episodes`` A2C steps, scoring each against the true landscape.

    The greedy joint action is logged before training and every
    ``config.log_every`` episodes.
    """
    shape = true_landscape.reward.shape
    policy = PolicyParams.init(
        true_landscape.flat.size, lr=config.lr, beta=config.beta,
        beta_decay=config.beta_decay, optimizer=config.optimizer,
    )
    perf = np.empty(config.episodes)
    ent = np.empty(config.episodes)
    path = [(0, tuple(int(i) for i in np.unravel_index(policy.greedy(), shape)))]
    for e in range(config.episodes):
        policy, diag = a2c_step(policy, reward_fn, rng, config.batch)
        perf[e] = normalized_performance(policy, true_landscape)
        ent[e] = entropy(policy.pi)
        if (e + 1) % config.log_every == 0:
            path.append((e + 1, tuple(int(i) for i in np.unravel_index(policy.greedy(), shape))))
    return TrainingResult(policy=policy, performance=perf, entropy=ent, greedy_path=path)


def is_local_max(landscape: np.ndarray, cell: tuple[int, ...]) -> bool:
    """True if no single-coordinate +-1 move (without wrap) increases the reward."""
    here = landscape[cell]
    for ax in range(landscape.ndim):
        for step in (-1, 1):
            nb = list(cell)
            nb[ax] += step
            if 0 <= nb[ax] < landscape.shape[ax] and landscape[tuple(nb)] > here:
                return False
    return True


def write_learning_curve(path, rows):
    """CSV ``condition, omega_seed, episode, normalized_performance, entropy``."""
    return _io.write_csv(path, ("condition", "omega_seed", "episode", "normalized_performance", "entropy"), rows)

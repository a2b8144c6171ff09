"""Echo State observer with a ridge-regression readout.

The reservoir receives the current observation concatenated with the
flattened context interactions and is never trained. A linear readout maps
each reservoir state to per-variable log-belief increments; increments are
accumulated over time and passed through a softmax over realizations.

The readout is fitted in closed form to the Joint observer's log-marginal
increments rather than by gradient descent on a divergence loss.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import io as _io
from .environment import Episode
from .observers import BeliefTrajectory, run_trajectory


@dataclass(frozen=True)
class Reservoir:
    W_rec: np.ndarray
    W_in: np.ndarray
    x0: np.ndarray
    spectral_radius: float
    seed: int

    @property
    def N(self) -> int:
        return self.W_rec.shape[0]

    @property
    def input_dim(self) -> int:
        return self.W_in.shape[1]

    def to_dict(self) -> dict:
        return {
            "seed": int(self.seed),
            "N": self.N,
            "input_dim": self.input_dim,
            "spectral_radius": float(self.spectral_radius),
            "W_rec": self.W_rec,
            "W_in": self.W_in,
            "x0": self.x0,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Reservoir":
        N, D = int(d["N"]), int(d["input_dim"])
        return cls(
            W_rec=np.asarray(d["W_rec"], dtype=float).reshape(N, N),
            W_in=np.asarray(d["W_in"], dtype=float).reshape(N, D),
            x0=np.asarray(d["x0"], dtype=float).reshape(N),
            spectral_radius=float(d["spectral_radius"]),
            seed=int(d["seed"]),
        )


@dataclass(frozen=True)
class Readout:
    W: np.ndarray  # (C * R, N)
    b: np.ndarray  # (C * R,)
    ridge: float

    def __call__(self, states: np.ndarray) -> np.ndarray:
        return states @ self.W.T + self.b

    def to_dict(self) -> dict:
        return {"ridge": float(self.ridge), "shape": list(self.W.shape), "W": self.W, "b": self.b}

    @classmethod
    def from_dict(cls, d: dict) -> "Readout":
        W = np.asarray(d["W"], dtype=float).reshape(d["shape"])
        return cls(W=W, b=np.asarray(d["b"], dtype=float), ridge=float(d["ridge"]))

    @classmethod
    def zeros(cls, out_dim: int, N: int) -> "Readout":
        return cls(W=np.zeros((out_dim, N)), b=np.zeros(out_dim), ridge=0.0)


def measured_spectral_radius(W: np.ndarray) -> float:
    if W.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(W))))


def init_reservoir(
    seed: int,
    N: int,
    input_dim: int,
    spectral_radius: float = 0.1,
    input_scale=None,
    mask: np.ndarray | None = None,
) -> Reservoir:
    """Random reservoir rescaled to the requested spectral radius.

    Input weights are standard normal times ``input_scale`` (a scalar or one
    value per input column, default ``1 / sqrt(input_dim)``), zeroed outside
    ``mask`` when one is given.
    """
    if N < 1 or input_dim < 1:
        raise ValueError("N and input_dim must be >= 1")
    if spectral_radius < 0:
        raise ValueError("spectral_radius must be >= 0")
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((N, N))
    W_in = rng.standard_normal((N, input_dim))
    scale = 1.0 / np.sqrt(input_dim) if input_scale is None else np.asarray(input_scale, dtype=float)
    W_in = W_in * scale
    if mask is not None:
        W_in = np.where(mask, W_in, 0.0)
    rho = measured_spectral_radius(W)
    W = W * (spectral_radius / rho) if rho > 0 else W * 0.0
    return Reservoir(W_rec=W, W_in=W_in, x0=np.zeros(N), spectral_radius=float(spectral_radius), seed=seed)


def input_layout(d_o: int, C: int) -> tuple[int, int]:
    """``(interactions per dimension, input width)`` of :func:`esn_inputs`."""
    nz = 1 if C == 1 else C * (C - 1)
    return nz, d_o + d_o * nz + 1


def episode_reservoir(
    seed: int,
    N: int,
    d_o: int,
    C: int,
    spectral_radius: float = 0.1,
    obs_scale: float = 1.0,
    z_scale: float = 5.0,
    bias_scale: float = 1.0,
) -> Reservoir:
    """Reservoir whose read-in is partitioned by observation dimension.

    Neuron ``j`` reads observable ``j mod d_o``, that dimension's
    interactions and the constant input. Every other input weight is zero.
    """
    nz, D = input_layout(d_o, C)
    mask = np.zeros((N, D), dtype=bool)
    dims = np.arange(N) % d_o
    mask[np.arange(N), dims] = True
    for k in range(nz):
        mask[np.arange(N), d_o + dims * nz + k] = True
    mask[:, -1] = True
    scale = np.concatenate([np.full(d_o, obs_scale), np.full(d_o * nz, z_scale), [bias_scale]])
    return init_reservoir(seed, N, D, spectral_radius, input_scale=scale, mask=mask)


def esn_inputs(episode: Episode) -> np.ndarray:
    """``(T, d_o + n_z + 1)`` inputs: observation, flat interactions, constant 1."""
    z = episode.interactions.flat()
    obs = episode.observations.astype(float)
    T = obs.shape[0]
    return np.hstack([obs, np.broadcast_to(z, (T, z.size)), np.ones((T, 1))])


def drive_inputs(res: Reservoir, U: np.ndarray, x0: np.ndarray | None = None) -> np.ndarray:
    """Run the reservoir over inputs ``U`` of shape ``(..., T, D)``.

    ``x_{t+1} = tanh(W_rec x_t + W_in u_t)``; returns states ``x_1 .. x_T``.
    """
    U = np.asarray(U, dtype=float)
    lead, T = U.shape[:-2], U.shape[-2]
    x = np.broadcast_to(res.x0 if x0 is None else x0, lead + (res.N,)).copy()
    drive_in = U @ res.W_in.T
    out = np.empty(lead + (T, res.N))
    for t in range(T):
        x = np.tanh(x @ res.W_rec.T + drive_in[..., t, :])
        out[..., t, :] = x
    return out


def drive(res: Reservoir, episode: Episode) -> np.ndarray:
    return drive_inputs(res, esn_inputs(episode))


def joint_log_increments(traj: BeliefTrajectory) -> np.ndarray:
    """``ln B_t - ln B_{t-1}`` for every variable, shape ``(T, C * R)``."""
    lb = np.log(traj.marginals)
    return np.diff(lb, axis=0).reshape(lb.shape[0] - 1, -1)


@dataclass
class RidgeAccumulator:
    """Sufficient statistics for a centered ridge fit; merging is associative."""

    n: int = 0
    sx: np.ndarray | None = None
    sy: np.ndarray | None = None
    sxx: np.ndarray | None = None
    sxy: np.ndarray | None = None

    def add(self, X: np.ndarray, Y: np.ndarray) -> "RidgeAccumulator":
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        part = RidgeAccumulator(X.shape[0], X.sum(0), Y.sum(0), X.T @ X, X.T @ Y)
        return self.merge(part)

    def merge(self, other: "RidgeAccumulator") -> "RidgeAccumulator":
        if self.n == 0:
            return other
        if other.n == 0:
            return self
        return RidgeAccumulator(
            self.n + other.n, self.sx + other.sx, self.sy + other.sy,
            self.sxx + other.sxx, self.sxy + other.sxy,
        )

    def solve(self, ridge: float) -> Readout:
        if self.n == 0:
            raise ValueError("no samples accumulated")
        mx = self.sx / self.n
        my = self.sy / self.n
        cxx = self.sxx - self.n * np.outer(mx, mx)
        cxy = self.sxy - self.n * np.outer(mx, my)
        A = cxx + ridge * np.eye(cxx.shape[0])
        if ridge <= 0 and np.linalg.cond(A) > 1e12:
            raise np.linalg.LinAlgError("singular normal matrix; use ridge > 0")
        W = np.linalg.solve(A, cxy).T
        return Readout(W=W, b=my - W @ mx, ridge=float(ridge))


def fit_readout(states: np.ndarray, targets: np.ndarray, ridge: float = 1e-4) -> Readout:
    """Closed-form ridge regression on centered data.

    ``W = Y_c X_c^T (X_c X_c^T + ridge I)^{-1}`` with the bias recovered from
    the means, where columns of ``X_c`` are centered states.
    """
    return RidgeAccumulator().add(states, targets).solve(ridge)


def accumulate_beliefs(increments: np.ndarray, C: int, R: int) -> np.ndarray:
    """Softmax over realizations of cumulative increments; ``(T + 1, C, R)``.

    Row 0 is the uniform prior (empty sum).
    """
    inc = np.asarray(increments, dtype=float).reshape(-1, C, R)
    M = np.concatenate([np.zeros((1, C, R)), np.cumsum(inc, axis=0)])
    M -= M.max(axis=-1, keepdims=True)
    e = np.exp(M)
    return e / e.sum(axis=-1, keepdims=True)


def fit_esn(
    res: Reservoir, episodes: Sequence[Episode], ridge: float = 1e-4, block: int = 500
) -> Readout:
    """Fit the readout on Joint-observer log-marginal increments.

    Statistics are accumulated over fixed blocks of ``block`` episodes in
    order, so the result does not depend on how work is split.
    """
    acc = RidgeAccumulator()
    for start in range(0, len(episodes), block):
        chunk = episodes[start : start + block]
        U = np.stack([esn_inputs(ep) for ep in chunk])
        X = drive_inputs(res, U).reshape(-1, res.N)
        Y = np.concatenate([joint_log_increments(run_trajectory(ep, "joint")) for ep in chunk])
        acc = acc.add(X, Y)
    return acc.solve(ridge)


def evaluate_esn(
    res: Reservoir, readout: Readout, episodes: Sequence[Episode], block: int = 500
) -> tuple[np.ndarray, list[BeliefTrajectory]]:
    """Accuracy curve and belief trajectories of the Echo State observer."""
    trajs: list[BeliefTrajectory] = []
    for start in range(0, len(episodes), block):
        chunk = episodes[start : start + block]
        U = np.stack([esn_inputs(ep) for ep in chunk])
        X = drive_inputs(res, U)
        for ep, states in zip(chunk, X):
            marg = accumulate_beliefs(readout(states), ep.C, ep.R)
            trajs.append(BeliefTrajectory(marginals=marg, goal=ep.goal, kind="esn"))
    acc = np.mean(
        [np.argmax(tr.goal_marginal, axis=1) == ep.optimal_action for tr, ep in zip(trajs, episodes)],
        axis=0,
    )
    return acc, trajs


def save_esn(path, res: Reservoir, readout: Readout) -> None:
    _io.write_json(path, {"reservoir": res.to_dict(), "readout": readout.to_dict()})

"""Ground-truth embeddings and the interaction -> likelihood expansion.

Each latent variable ``s`` owns one key and one query vector per observation
dimension. A context of ``C`` variables interacts through query/key dot
products ``z[i, c, c'] = q[c, i] . k[c', i]``. Every interaction is expanded
into a phase-shifted sinusoid of length ``R``; pairwise outer products of
those sinusoids are broadcast over the joint realization grid, summed and
squashed by a sigmoid to give ``P(o_i = 1 | r_1, ..., r_C)``.

Realizations are 0-based throughout. Likelihood tensors use row-major
multi-indices with axis order ``(r_1, ..., r_C)``.
"""
from __future__ import annotations

import itertools
import zlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit, logsumexp

from . import io as _io

RESIDUAL_FLOOR = 1e-12
MAX_REDRAWS = 64


@dataclass(frozen=True)
class EmbeddingSpace:
    """Key/query vectors for all variables, each of shape ``(S, d_o, d_E)``."""

    keys: np.ndarray
    queries: np.ndarray
    seed: int

    @property
    def S(self) -> int:
        return self.keys.shape[0]

    @property
    def d_o(self) -> int:
        return self.keys.shape[1]

    @property
    def d_E(self) -> int:
        return self.keys.shape[2]

    def to_dict(self) -> dict:
        return {
            "seed": int(self.seed),
            "S": self.S,
            "d_o": self.d_o,
            "d_E": self.d_E,
            "keys": self.keys,
            "queries": self.queries,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EmbeddingSpace":
        shape = (d["S"], d["d_o"], d["d_E"])
        keys = np.asarray(d["keys"], dtype=float).reshape(shape)
        queries = np.asarray(d["queries"], dtype=float).reshape(shape)
        return cls(keys=keys, queries=queries, seed=int(d["seed"]))

    def save(self, path) -> None:
        _io.write_json(path, self.to_dict())


@dataclass(frozen=True)
class InteractionSet:
    """Interactions of one context.

    ``z`` has shape ``(d_o, C, C)``; ``z[i, c, c2]`` is the modulation of
    variable ``c2`` onto ``c`` in observation dimension ``i``. The diagonal is
    only populated (with the self term) when ``C == 1``.
    """

    z: np.ndarray
    context: tuple[int, ...]

    @property
    def C(self) -> int:
        return len(self.context)

    @property
    def d_o(self) -> int:
        return self.z.shape[0]

    def flat(self) -> np.ndarray:
        """Interactions as a flat vector, dimension-major.

        Off-diagonal entries in row-major ``(c, c2)`` order for ``C >= 2``;
        the ``d_o`` self terms for ``C == 1``.
        """
        if self.C == 1:
            return self.z[:, 0, 0].copy()
        mask = ~np.eye(self.C, dtype=bool)
        return self.z[:, mask].reshape(-1)


@dataclass(frozen=True)
class LikelihoodTensor:
    """``ell[i, r_1, ..., r_C] = P(o_i = 1 | r)`` for every joint realization."""

    ell: np.ndarray
    R: int
    C: int
    context: tuple[int, ...] = ()
    lam: float = float("nan")

    @property
    def d_o(self) -> int:
        return self.ell.shape[0]

    def flat(self) -> np.ndarray:
        """View of shape ``(d_o, R**C)``, row-major over realizations."""
        return self.ell.reshape(self.d_o, -1)

    def to_dict(self) -> dict:
        return {
            "R": self.R,
            "C": self.C,
            "context": list(self.context),
            "lambda": float(self.lam),
            "ell": self.flat(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LikelihoodTensor":
        R, C = int(d["R"]), int(d["C"])
        flat = np.asarray(d["ell"], dtype=float)
        ell = flat.reshape((flat.shape[0],) + (R,) * C)
        return cls(ell=ell, R=R, C=C, context=tuple(d["context"]), lam=float(d["lambda"]))

    def save(self, path) -> None:
        _io.write_json(path, self.to_dict())


# ---------------------------------------------------------------------------
# embeddings


def _sub_seed(seed: int, s: int, attempt: int) -> np.random.SeedSequence:
    tag = zlib.crc32(f"redraw:{seed}:{s}:{attempt}".encode())
    return np.random.SeedSequence([seed & 0xFFFFFFFF, s, attempt, tag])


def gram_schmidt(vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Modified Gram-Schmidt over axis -2 of ``(..., n, d)``.

    Returns the orthonormalized stack and the residual norm of every vector
    before its normalization (small residuals flag near-dependent inputs).
    """
    out = np.array(vectors, dtype=float, copy=True)
    n = out.shape[-2]
    residuals = np.empty(out.shape[:-1])
    for j in range(n):
        v = out[..., j, :]
        for k in range(j):
            u = out[..., k, :]
            v -= np.sum(u * v, axis=-1, keepdims=True) * u
        norm = np.linalg.norm(v, axis=-1)
        residuals[..., j] = norm
        v /= np.where(norm > 0, norm, 1.0)[..., None]
    return out, residuals


def create_embeddings(seed: int, S: int, d_o: int, d_E: int) -> EmbeddingSpace:
    """Draw standard-normal keys and queries and orthonormalize per variable.

    For each variable the ``d_o`` key vectors (and separately the query
    vectors) are made orthogonal by Gram-Schmidt, then normalized along
    ``d_E``. A variable whose Gram-Schmidt residual falls below 1e-12 is
    redrawn from a sub-seed derived from ``(seed, s, attempt)``.

    Raises:
        ValueError: if ``d_E < d_o`` or any size is non-positive.
    """
    if S < 1 or d_o < 1:
        raise ValueError("S and d_o must be >= 1")
    if d_E < d_o:
        raise ValueError(f"d_E={d_E} < d_o={d_o}: Gram-Schmidt would produce a zero vector")
    rng = np.random.default_rng(seed)
    keys = rng.standard_normal((S, d_o, d_E))
    queries = rng.standard_normal((S, d_o, d_E))

    keys, kres = gram_schmidt(keys)
    queries, qres = gram_schmidt(queries)
    bad = np.flatnonzero((kres.min(axis=1) < RESIDUAL_FLOOR) | (qres.min(axis=1) < RESIDUAL_FLOOR))
    for s in bad:
        for attempt in range(1, MAX_REDRAWS + 1):
            sub = np.random.default_rng(_sub_seed(seed, int(s), attempt))
            k, kr = gram_schmidt(sub.standard_normal((d_o, d_E)))
            q, qr = gram_schmidt(sub.standard_normal((d_o, d_E)))
            if kr.min() >= RESIDUAL_FLOOR and qr.min() >= RESIDUAL_FLOOR:
                keys[s], queries[s] = k, q
                break
        else:
            raise RuntimeError(f"variable {s}: degenerate embedding after {MAX_REDRAWS} redraws")

    keys /= np.linalg.norm(keys, axis=-1, keepdims=True)
    queries /= np.linalg.norm(queries, axis=-1, keepdims=True)
    return EmbeddingSpace(keys=keys, queries=queries, seed=seed)


# ---------------------------------------------------------------------------
# interactions


def _check_context(space: EmbeddingSpace, context: Sequence[int]) -> tuple[int, ...]:
    ctx = tuple(int(c) for c in context)
    if len(ctx) == 0:
        raise ValueError("context must contain at least one variable")
    if len(set(ctx)) != len(ctx):
        raise ValueError(f"duplicate context indices in {ctx}")
    if min(ctx) < 0 or max(ctx) >= space.S:
        raise ValueError(f"context indices must lie in [0, {space.S})")
    return ctx


def compute_interactions(space: EmbeddingSpace, context: Sequence[int], i: int) -> np.ndarray:
    """``C x C`` interaction matrix of observation dimension ``i``."""
    ctx = _check_context(space, context)
    q = space.queries[list(ctx), i]
    k = space.keys[list(ctx), i]
    z = q @ k.T
    if len(ctx) > 1:
        np.fill_diagonal(z, 0.0)
    return z


def context_interactions(space: EmbeddingSpace, context: Sequence[int]) -> InteractionSet:
    """Interactions of a context across all observation dimensions."""
    ctx = _check_context(space, context)
    z = np.stack([compute_interactions(space, ctx, i) for i in range(space.d_o)])
    return InteractionSet(z=z, context=ctx)


# ---------------------------------------------------------------------------
# expansion


def phase_weights(z, R: int) -> np.ndarray:
    """Softmax weights over the ``N = 2R + 1`` phase bins for interaction(s) ``z``.

    Broadcasts over the shape of ``z``; the last output axis has length N.
    """
    N = 1 + 2 * R
    z = np.asarray(z, dtype=float)[..., None]
    n = np.arange(N)
    theta = 2 * np.pi * (n / N - z)
    dist = np.minimum(np.abs(theta), 2 * np.pi - np.abs(theta))
    logits = -((N / (2 * np.pi)) * dist) ** 2
    return np.exp(logits - logsumexp(logits, axis=-1, keepdims=True))


def phase_basis(R: int, lam: float) -> np.ndarray:
    """Cyclically shifted sinusoid table ``Theta[n, r]`` of shape ``(N, R)``."""
    N = 1 + 2 * R
    n = np.arange(N)[:, None]
    r = np.arange(R)[None, :]
    return lam * np.sin((2 * np.pi / N) * (np.mod(n - r, N) - N))


def expand_phase_vector(z, R: int, lam: float) -> np.ndarray:
    """Expand interaction(s) ``z`` into phase vector(s) of length ``R``.

    ``v(r) = sum_n Theta(n, r) * omega(n)``. Vectorized over ``z``.
    """
    if R < 2:
        raise ValueError("R must be >= 2")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    return phase_weights(z, R) @ phase_basis(R, lam)


def likelihood_logits(interactions: InteractionSet, R: int, lam: float) -> np.ndarray:
    """Pre-sigmoid likelihood tensor, shape ``(d_o,) + (R,) * C``."""
    C, d_o = interactions.C, interactions.d_o
    v = expand_phase_vector(interactions.z, R, lam)  # (d_o, C, C, R)
    if C == 1:
        return v[:, 0, 0, :].copy()
    out = np.zeros((d_o,) + (R,) * C)
    for a, b in itertools.combinations(range(C), 2):
        block = v[:, a, b, :, None] * v[:, b, a, None, :]  # (d_o, R, R)
        shape = [d_o] + [1] * C
        shape[1 + a] = R
        shape[1 + b] = R
        out += block.reshape(shape)
    return out


def build_likelihood(interactions: InteractionSet, R: int, lam: float) -> LikelihoodTensor:
    """Sigmoid of the summed, broadcast pairwise outer products."""
    ell = expit(likelihood_logits(interactions, R, lam))
    return LikelihoodTensor(ell=ell, R=R, C=interactions.C, context=interactions.context, lam=float(lam))


def marginal_likelihood(ell: LikelihoodTensor, c: int) -> np.ndarray:
    """``P(o_i = 1 | r_c)`` under a uniform prior on the other variables, ``(d_o, R)``."""
    if not 0 <= c < ell.C:
        raise ValueError(f"variable index {c} outside [0, {ell.C})")
    axes = tuple(1 + a for a in range(ell.C) if a != c)
    return ell.ell.mean(axis=axes) if axes else ell.ell.copy()


def naive_likelihoods(ell: LikelihoodTensor) -> np.ndarray:
    """Marginal likelihoods of every context variable, shape ``(C, d_o, R)``."""
    return np.stack([marginal_likelihood(ell, c) for c in range(ell.C)])

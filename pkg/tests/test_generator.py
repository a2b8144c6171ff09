import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import expit

from cogworld.generator import (
    EmbeddingSpace,
    InteractionSet,
    LikelihoodTensor,
    build_likelihood,
    compute_interactions,
    context_interactions,
    create_embeddings,
    expand_phase_vector,
    gram_schmidt,
    likelihood_logits,
    marginal_likelihood,
    naive_likelihoods,
    phase_weights,
)


def test_default_keys_orthonormal(space):
    gram = np.einsum("sid,sjd->sij", space.keys, space.keys)
    assert np.allclose(gram, np.eye(5), atol=1e-9)
    gram_q = np.einsum("sid,sjd->sij", space.queries, space.queries)
    assert np.allclose(gram_q, np.eye(5), atol=1e-9)


def test_scalar_embedding_is_unit():
    sp = create_embeddings(0, 1, 1, 1)
    assert abs(abs(sp.keys[0, 0, 0]) - 1.0) < 1e-15
    assert abs(abs(sp.queries[0, 0, 0]) - 1.0) < 1e-15


def test_gram_identity_seed7():
    sp = create_embeddings(7, 10, 3, 8)
    for s in range(10):
        assert np.abs(sp.keys[s] @ sp.keys[s].T - np.eye(3)).max() < 1e-9


def test_embeddings_reject_small_d_E():
    with pytest.raises(ValueError):
        create_embeddings(0, 3, 5, 4)


def test_embeddings_deterministic():
    a, b = create_embeddings(11, 20, 5, 30), create_embeddings(11, 20, 5, 30)
    assert np.array_equal(a.keys, b.keys) and np.array_equal(a.queries, b.queries)


def test_embedding_round_trip(tmp_path):
    sp = create_embeddings(2, 4, 3, 6)
    back = EmbeddingSpace.from_dict(sp.to_dict())
    assert np.array_equal(back.keys, sp.keys) and np.array_equal(back.queries, sp.queries)


def test_gram_schmidt_reports_dependence():
    v = np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
    _, res = gram_schmidt(v)
    assert res[1] < 1e-12


def _space_from(q, k):
    return EmbeddingSpace(keys=k[None, None], queries=q[None, None], seed=0)


def test_interaction_identical_and_orthogonal():
    e = np.array([0.6, 0.8])
    keys = np.stack([[e], [np.array([0.8, -0.6])]])  # (2, 1, 2)
    sp = EmbeddingSpace(keys=keys, queries=np.stack([[e], [e]]), seed=0)
    z = compute_interactions(sp, (0, 1), 0)
    assert z[1, 0] == pytest.approx(1.0, abs=1e-15)  # q_1 . k_0 with q_1 = k_0
    assert z[0, 1] == pytest.approx(0.0, abs=1e-15)  # q_0 . k_1 orthogonal


def test_interactions_match_dot_products():
    sp = create_embeddings(3, 10, 5, 30)
    z = compute_interactions(sp, (2, 5), 0)
    assert abs(z[0, 1] - float(np.dot(sp.queries[2, 0], sp.keys[5, 0]))) < 1e-12
    assert abs(z[1, 0] - float(np.dot(sp.queries[5, 0], sp.keys[2, 0]))) < 1e-12


def test_interactions_reject_bad_context(small_space):
    with pytest.raises(ValueError):
        context_interactions(small_space, (1, 1))
    with pytest.raises(ValueError):
        context_interactions(small_space, (0, small_space.S))


def test_zero_lambda_gives_zero_phase():
    assert np.all(expand_phase_vector(np.linspace(-1, 1, 7), 10, 0.0) == 0.0)


def _phase_oracle(z, R, lam):
    N = 2 * R + 1
    w = []
    for n in range(N):
        th = 2 * np.pi * (n / N - z)
        d = min(abs(th), 2 * np.pi - abs(th))
        w.append(np.exp(-((N / (2 * np.pi)) * d) ** 2))
    w = np.array(w) / sum(w)
    v = np.zeros(R)
    for r in range(R):
        for n in range(N):
            v[r] += lam * np.sin(2 * np.pi / N * (((n - r) % N) - N)) * w[n]
    return v


def test_phase_vector_direct_oracle():
    assert np.abs(expand_phase_vector(0.3, 10, 2.0) - _phase_oracle(0.3, 10, 2.0)).max() < 1e-12


@settings(max_examples=200, deadline=None)
@given(z=st.floats(-1.0, 1.0), R=st.integers(2, 16), lam=st.floats(0.0, 5.0))
def test_phase_weights_normalized(z, R, lam):
    w = phase_weights(z, R)
    assert np.all(w >= 0)
    assert abs(w.sum() - 1.0) < 1e-12
    v = expand_phase_vector(z, R, lam)
    assert np.all(np.abs(v) <= lam + 1e-12)


@settings(max_examples=200, deadline=None)
@given(
    C=st.integers(1, 3),
    R=st.integers(2, 6),
    lam=st.floats(0.0, 4.0),
    seed=st.integers(0, 2**31 - 1),
)
def test_logit_bounds(C, R, lam, seed):
    rng = np.random.default_rng(seed)
    z = rng.uniform(-1, 1, size=(2, C, C))
    if C > 1:
        for i in range(2):
            np.fill_diagonal(z[i], 0.0)
    inter = InteractionSet(z=z, context=tuple(range(C)))
    logits = likelihood_logits(inter, R, lam)
    bound = lam if C == 1 else lam**2 * C * (C - 1) / 2
    assert np.all(np.abs(logits) <= bound + 1e-12)
    ell = build_likelihood(inter, R, lam).ell
    assert np.all((ell >= expit(-bound) - 1e-15) & (ell <= expit(bound) + 1e-15))


def test_zero_lambda_likelihood_is_half(small_space):
    for C in (1, 2, 3):
        inter = context_interactions(small_space, tuple(range(C)))
        assert np.all(build_likelihood(inter, 5, 0.0).ell == 0.5)


def test_likelihood_c2_entrywise(small_space):
    inter = context_interactions(small_space, (3, 9))
    R, lam = 3, 2.0
    ell = build_likelihood(inter, R, lam).ell
    for i in range(inter.d_o):
        v12 = _phase_oracle(inter.z[i, 0, 1], R, lam)
        v21 = _phase_oracle(inter.z[i, 1, 0], R, lam)
        for r1, r2 in itertools.product(range(R), repeat=2):
            assert abs(ell[i, r1, r2] - expit(v12[r1] * v21[r2])) < 1e-12


def test_likelihood_c3_triple_loop(small_space):
    inter = context_interactions(small_space, (0, 7, 12))
    R, lam = 4, 2.0
    ell = build_likelihood(inter, R, lam).ell
    assert ell.shape == (5, 4, 4, 4)
    for i in range(inter.d_o):
        v = {(a, b): _phase_oracle(inter.z[i, a, b], R, lam) for a in range(3) for b in range(3) if a != b}
        for r in itertools.product(range(R), repeat=3):
            s = 0.0
            for a, b in ((0, 1), (0, 2), (1, 2)):
                s += v[a, b][r[a]] * v[b, a][r[b]]
            assert abs(ell[(i,) + r] - expit(s)) < 1e-12


def test_c1_uses_self_interaction(small_space):
    inter = context_interactions(small_space, (4,))
    ell = build_likelihood(inter, 10, 2.0).ell
    for i in range(5):
        assert np.allclose(ell[i], expit(_phase_oracle(inter.z[i, 0, 0], 10, 2.0)), atol=1e-12)


def test_marginal_likelihood_cases():
    rng = np.random.default_rng(0)
    t1 = LikelihoodTensor(rng.uniform(size=(5, 4)), R=4, C=1, context=(0,), lam=1.0)
    assert np.array_equal(marginal_likelihood(t1, 0), t1.ell)
    half = LikelihoodTensor(np.full((5, 3, 3), 0.5), R=3, C=2, context=(0, 1), lam=0.0)
    assert np.all(marginal_likelihood(half, 1) == 0.5)
    t2 = LikelihoodTensor(rng.uniform(size=(2, 3, 3)), R=3, C=2, context=(0, 1), lam=1.0)
    for i in range(2):
        rows = [sum(t2.ell[i, r, s] for s in range(3)) / 3 for r in range(3)]
        cols = [sum(t2.ell[i, s, r] for s in range(3)) / 3 for r in range(3)]
        assert np.abs(marginal_likelihood(t2, 0)[i] - rows).max() < 1e-12
        assert np.abs(marginal_likelihood(t2, 1)[i] - cols).max() < 1e-12
    assert naive_likelihoods(t2).shape == (2, 2, 3)


def test_likelihood_round_trip():
    rng = np.random.default_rng(1)
    t = LikelihoodTensor(rng.uniform(size=(2, 3, 3)), R=3, C=2, context=(4, 1), lam=2.0)
    back = LikelihoodTensor.from_dict(t.to_dict())
    assert np.array_equal(back.ell, t.ell) and back.context == t.context

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cogworld.generator import LikelihoodTensor, naive_likelihoods
from cogworld.observers import (
    JointBelief,
    MarginalBeliefs,
    batch_log_posterior,
    joint_goal_marginal,
    joint_update,
    map_action,
    naive_update,
    run_trajectory,
    write_beliefs_csv,
)

from conftest import make_episode, random_tensor


def _recursive_joint(obs, ell):
    b = JointBelief.uniform(ell.R, ell.C)
    for o in obs:
        b = joint_update(b, o, ell)
    return b


def _recursive_naive(obs, ell):
    m = MarginalBeliefs.uniform(ell.R, ell.C)
    nl = naive_likelihoods(ell)
    for o in obs:
        m = naive_update(m, o, nl)
    return m


def _product_chain_marginals(obs, ell):
    """Joint filter over R^C driven by the product of marginal likelihoods."""
    nl = naive_likelihoods(ell)  # (C, d_o, R)
    C, R = ell.C, ell.R
    log_post = np.zeros((R,) * C)
    for o in obs:
        for c in range(C):
            ll = np.sum(o[:, None] * np.log(nl[c]) + (1 - o[:, None]) * np.log1p(-nl[c]), axis=0)
            shape = [1] * C
            shape[c] = R
            log_post = log_post + ll.reshape(shape)
        log_post -= np.log(np.exp(log_post - log_post.max()).sum()) + log_post.max()
    p = np.exp(log_post)
    return np.stack([p.sum(axis=tuple(a for a in range(C) if a != c)) for c in range(C)])


def test_uninformative_update_keeps_belief():
    ell = LikelihoodTensor(np.full((3, 4, 4), 0.5), R=4, C=2, context=(0, 1), lam=0.0)
    rng = np.random.default_rng(0)
    b0 = JointBelief(np.log(rng.dirichlet(np.ones(16)).reshape(4, 4)))
    b1 = joint_update(b0, np.array([1, 0, 1]), ell)
    assert np.abs(b1.log_post - b0.log_post).max() < 1e-12
    m = naive_update(MarginalBeliefs.uniform(4, 2), np.array([1, 1, 0]), naive_likelihoods(ell))
    assert np.allclose(m.B, 0.25, atol=1e-15)


def test_recursive_equals_batch():
    rng = np.random.default_rng(1)
    for C, R in [(1, 10), (2, 7), (3, 4)]:
        ell = random_tensor(rng, C, R, 5)
        obs = rng.integers(0, 2, size=(30, 5))
        diff = np.abs(_recursive_joint(obs, ell).log_post - batch_log_posterior(obs, ell))
        assert diff.max() < 1e-10


def test_four_cell_hand_calculation():
    # d_o = 1, P(o=1 | r1, r2)
    table = np.array([[0.9, 0.2], [0.4, 0.7]])
    ell = LikelihoodTensor(table[None], R=2, C=2, context=(0, 1), lam=1.0)
    obs = [np.array([1]), np.array([0]), np.array([1])]
    b = _recursive_joint(obs, ell)
    unnorm = {}
    for r1, r2 in itertools.product(range(2), repeat=2):
        p = table[r1, r2]
        unnorm[r1, r2] = 0.25 * p * (1 - p) * p
    Z = sum(unnorm.values())
    for cell, u in unnorm.items():
        assert abs(np.exp(b.log_post[cell]) - u / Z) < 1e-12


def test_goal_marginal_cases():
    u = JointBelief.uniform(4, 3)
    assert np.allclose(joint_goal_marginal(u, 1), 0.25, atol=1e-15)
    point = np.full((4, 4, 4), -np.inf)
    point[1, 3, 2] = 0.0
    assert np.array_equal(joint_goal_marginal(JointBelief(point), 1), np.eye(4)[3])
    rng = np.random.default_rng(2)
    p = rng.dirichlet(np.ones(64)).reshape(4, 4, 4)
    b = JointBelief(np.log(p))
    for g in range(3):
        oracle = np.zeros(4)
        for r in itertools.product(range(4), repeat=3):
            oracle[r[g]] += p[r]
        assert np.abs(joint_goal_marginal(b, g) - oracle).max() < 1e-12
        assert np.abs(b.marginals()[g] - oracle).max() < 1e-12


def test_naive_equals_joint_for_single_variable():
    rng = np.random.default_rng(3)
    ell = random_tensor(rng, 1, 10, 5)
    obs = rng.integers(0, 2, size=(30, 5))
    j, n = _recursive_joint(obs, ell), _recursive_naive(obs, ell)
    assert np.abs(j.marginals() - n.B).max() < 1e-12


def test_naive_equals_factorized_joint_chain():
    rng = np.random.default_rng(4)
    for C, R in [(2, 5), (3, 4)]:
        ell = random_tensor(rng, C, R, 5)
        obs = rng.integers(0, 2, size=(30, 5))
        assert np.abs(_recursive_naive(obs, ell).B - _product_chain_marginals(obs, ell)).max() < 1e-10


def test_flat_likelihood_keeps_naive_uniform():
    ell = LikelihoodTensor(np.full((5, 3, 3, 3), 0.5), R=3, C=3, context=(0, 1, 2), lam=0.0)
    m = _recursive_naive(np.ones((10, 5)), ell)
    assert np.allclose(m.B, 1 / 3, atol=1e-15)


def test_trajectory_lambda_zero_uniform(space):
    ep = make_episode(space, C=2, lam=0.0)
    for kind in ("joint", "naive"):
        assert np.allclose(run_trajectory(ep, kind).marginals, 0.1, atol=1e-12)


def test_trajectory_final_is_batch(space):
    ep = make_episode(space, C=3, index=5)
    tr = run_trajectory(ep, "joint")
    batch = JointBelief(batch_log_posterior(ep.observations, ep.likelihood))
    assert np.abs(tr.marginals[-1] - batch.marginals()).max() < 1e-10
    assert tr.marginals.shape == (31, 3, 10)


def test_trajectories_coincide_at_c1(space):
    ep = make_episode(space, C=1, index=2)
    assert np.abs(run_trajectory(ep, "joint").marginals - run_trajectory(ep, "naive").marginals).max() < 1e-12


def test_unknown_kind(space):
    with pytest.raises(ValueError):
        run_trajectory(make_episode(space), "oracle")


def test_map_action():
    assert map_action(np.eye(10)[3]) == 3
    assert map_action(np.full(10, 0.1)) == 0
    assert map_action([0.1, 0.5, 0.4]) == 1


@settings(max_examples=200, deadline=None)
@given(C=st.integers(1, 3), R=st.integers(2, 6), T=st.integers(1, 30), seed=st.integers(0, 2**31 - 1))
def test_posterior_normalized(C, R, T, seed):
    rng = np.random.default_rng(seed)
    ell = random_tensor(rng, C, R, 3, low=1e-6, high=1 - 1e-6)
    obs = rng.integers(0, 2, size=(T, 3))
    b = _recursive_joint(obs, ell)
    assert abs(np.exp(b.log_post).sum() - 1.0) < 1e-10
    assert np.allclose(_recursive_naive(obs, ell).B.sum(axis=1), 1.0, atol=1e-10)


@settings(max_examples=200, deadline=None)
@given(C=st.integers(1, 3), R=st.integers(2, 6), T=st.integers(2, 30), seed=st.integers(0, 2**31 - 1))
def test_final_beliefs_permutation_invariant(C, R, T, seed):
    rng = np.random.default_rng(seed)
    ell = random_tensor(rng, C, R, 3)
    obs = rng.integers(0, 2, size=(T, 3))
    perm = obs[rng.permutation(T)]
    assert np.abs(_recursive_joint(obs, ell).log_post - _recursive_joint(perm, ell).log_post).max() < 1e-9
    assert np.abs(_recursive_naive(obs, ell).B - _recursive_naive(perm, ell).B).max() < 1e-10


def test_beliefs_csv(tmp_path, space):
    ep = make_episode(space, C=2)
    path = write_beliefs_csv(tmp_path / "b.csv", [(7, run_trajectory(ep, "naive"))])
    lines = path.read_text().splitlines()
    assert lines[0] == "episode_id,t,observer,variable,realization,belief"
    assert len(lines) == 1 + 31 * 2 * 10
    assert lines[1].startswith("7,0,naive,0,0,")

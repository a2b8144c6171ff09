"""Watch an exact and a factorized observer read the same observations.

The Joint observer filters over every joint realization. The Naive observer
updates each variable on its own with likelihoods that average out the
others. Factorization regret is the KL divergence between their beliefs
about the goal variable.

    python demos/02_joint_vs_naive.py
"""
import numpy as np

from cogworld.environment import EnvConfig, sample_episode
from cogworld.generator import naive_likelihoods
from cogworld.metrics import disentanglement, factorization_regret
from cogworld.observers import run_trajectory

cfg = EnvConfig(C=2)
space = cfg.embeddings()
ep = sample_episode(space, cfg, episode_index=3, namespace="demo")
print(f"context {ep.context}, hidden realizations {ep.realizations.tolist()}, goal variable {ep.goal}")
print(f"correct action a* = {ep.optimal_action}\n")

joint = run_trajectory(ep, "joint")
naive = run_trajectory(ep, "naive")
print(" t  joint MAP  P_joint(a*)  naive MAP  P_naive(a*)  regret")
for t in range(0, ep.T + 1, 5):
    pj, pn = joint.goal_marginal[t], naive.goal_marginal[t]
    print(
        f"{t:2d}  {np.argmax(pj):9d}  {pj[ep.optimal_action]:11.3f}"
        f"  {np.argmax(pn):9d}  {pn[ep.optimal_action]:11.3f}  {factorization_regret(pj, pn):6.3f}"
    )

d = disentanglement(joint, naive_likelihoods(ep.likelihood), ep)
print(f"\nmean dis-entanglement over the episode: {d.mean():.3f} (zero would mean Markovian marginals)")

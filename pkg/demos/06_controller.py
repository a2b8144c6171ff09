"""Choosing which world to create from a preference over observations.

A preference vector Omega scores every joint realization by how well the
observations it generates match Omega. A tabular softmax actor with a scalar
critic climbs this landscape, either from exact rewards or from rewards
estimated from sampled observations.

    python demos/06_controller.py
"""
import numpy as np

from cogworld.controller import (
    ControllerConfig,
    build_landscape,
    is_local_max,
    online_reward,
    oracle_reward,
    sample_omega,
    train_controller,
)
from cogworld.environment import EnvConfig, sample_episode

cfg = EnvConfig(C=2)
ep = sample_episode(cfg.embeddings(), cfg, 0, "control")
omega = sample_omega(3, cfg.d_o)
land = build_landscape(omega, ep.likelihood)
print("preferred observation Omega:", omega.omega.astype(int).tolist())
print("best joint realization:", land.argmax(), f"reward {land.reward.max():.3f}")

for name, reward in (("offline-oracle", oracle_reward(land)), ("online", online_reward(omega, ep.likelihood, cfg.T))):
    result = train_controller(ControllerConfig(episodes=1000), reward, land, np.random.default_rng(0))
    path = [cell for _, cell in result.greedy_path[::4]]
    end = result.greedy_path[-1][1]
    print(f"\n{name}: final normalized performance {result.performance[-1]:.3f}")
    print("  greedy path:", " -> ".join(str(c) for c in path))
    print("  ends at a local maximum:", is_local_max(land.reward, end))

"""Confident mistakes of the factorized observer.

Pooling the belief each observer places on the correct action shows a peak
near zero for the Naive observer: it settles on a wrong realization. The
exact observer rarely does.

    python demos/04_hallucination.py [episodes]
"""
import sys

from cogworld.experiments import ExperimentConfig, hallucination_table

episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
cfg = ExperimentConfig.from_dict({"episodes": episodes, "hallucination": {"bins": 10}})
rows, below = hallucination_table(cfg)

T = cfg.env.T
for kind in cfg.observers:
    mass = [r[4] for r in rows if r[0] == kind and r[1] == T]
    bars = "  ".join(f"{m:.2f}" for m in mass)
    print(f"{kind:5s} hit-probability histogram at t={T}: {bars}")
print()
for kind in cfg.observers:
    print(f"{kind:5s} mass below 0.05 at t={T}: {below[kind][-1]:.3f}")

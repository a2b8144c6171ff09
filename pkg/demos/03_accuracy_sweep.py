"""Accuracy of both observers as the context grows.

A scaled-down version of the ``fig2`` subcommand. With one variable the two
observers agree exactly. With more variables the Naive observer loses
accuracy and the regret grows.

    python demos/03_accuracy_sweep.py [episodes]
"""
import sys

from cogworld.experiments import ExperimentConfig, fig2_table

episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 500
cfg = ExperimentConfig.from_dict({"episodes": episodes, "seed": 0})
rows = fig2_table(cfg)

print(f"final-step results over {episodes} episodes per context size")
print(" C  observer  accuracy  +-sem   relative  regret")
for C, t, kind, acc, sem, rel, fr, _ in rows:
    if t == cfg.env.T:
        print(f" {C}  {kind:8s}  {acc:8.3f}  {sem:.3f}  {rel:8.2f}  {fr:6.2f}")

"""A fixed random recurrent network with a trained linear readout.

The reservoir sees observations and interactions. A ridge readout is fitted
to the exact observer's belief increments. With one variable it nearly
matches the exact observer; with two it lands between chance and the Naive
observer.

    python demos/05_echo_state_observer.py [train_episodes]
"""
import sys

from cogworld.experiments import ExperimentConfig, esn_benchmark

train = int(sys.argv[1]) if len(sys.argv) > 1 else 4000
cfg = ExperimentConfig.from_dict(
    {"seed": 0, "esn": {"n_hidden": 300, "train_episodes": train, "test_episodes": 1000}}
)
for C in (1, 2):
    res, readout, hits, ref = esn_benchmark(cfg, C)
    print(
        f"C={C}: reservoir seed {res.seed}, final accuracy"
        f"  esn {hits[:, -1].mean():.3f}"
        f"  joint {ref['hit']['joint'][:, -1].mean():.3f}"
        f"  naive {ref['hit']['naive'][:, -1].mean():.3f}"
    )

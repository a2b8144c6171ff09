"""Cognitive gridworld: latent-variable observation generator, Bayesian and
reservoir observers, information metrics and a tabular actor-critic controller."""

__version__ = "0.1.0"

from .environment import EnvConfig, Episode, sample_episode, set_state_and_observe  # noqa: E402
from .generator import EmbeddingSpace, LikelihoodTensor, create_embeddings  # noqa: E402
from .observers import run_trajectory  # noqa: E402

__all__ = [
    "EmbeddingSpace",
    "EnvConfig",
    "Episode",
    "LikelihoodTensor",
    "create_embeddings",
    "run_trajectory",
    "sample_episode",
    "set_state_and_observe",
]

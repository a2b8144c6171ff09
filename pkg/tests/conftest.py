import pytest

from cogworld.environment import EnvConfig, sample_episode
from cogworld.generator import LikelihoodTensor, create_embeddings


@pytest.fixture(scope="session")
def space():
    return create_embeddings(0, 500, 5, 30)


@pytest.fixture(scope="session")
def small_space():
    return create_embeddings(1, 40, 5, 30)


def random_tensor(rng, C, R, d_o, low=0.02, high=0.98):
    """Likelihood tensor with independent uniform entries."""
    ell = rng.uniform(low, high, size=(d_o,) + (R,) * C)
    return LikelihoodTensor(ell=ell, R=R, C=C, context=tuple(range(C)), lam=1.0)


def make_episode(space, C=2, index=0, namespace="t", **kw):
    cfg = EnvConfig(S=space.S, d_o=space.d_o, d_E=space.d_E, C=C, **kw)
    return sample_episode(space, cfg, index, namespace)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])

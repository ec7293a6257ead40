import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from catfair.latent import LayerRange
from catfair.toy import ToyAttribute, ToyGeneratorSpec

settings.register_profile(
    "ci",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
    print_blob=True,
)
settings.load_profile("ci")


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def toy_spec():
    """Three attributes on separate layers of a 4 x 64 latent."""
    return ToyGeneratorSpec(
        4, 64,
        (
            ToyAttribute("Male", tuple(range(6)), LayerRange(1, 1)),
            ToyAttribute("Blond_Hair", tuple(range(10, 16)), LayerRange(2, 2)),
            ToyAttribute("Smiling", tuple(range(20, 26)), LayerRange(3, 3)),
        ),
        noise=0.1,
        seed=5,
    )


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)

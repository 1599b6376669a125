import numpy as np
import pytest
from hypothesis import settings

from sparsevol import synth
from sparsevol.volume import DenseVolume

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def blobs64():
    return synth.make("blobs", (64, 64, 64), seed=1)


@pytest.fixture(scope="session")
def blobs_odd():
    # non-multiple-of-32 dims exercise clipped boundary bricks
    return DenseVolume.from_array(synth.blobs((70, 45, 33), seed=5, count=5))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys
    lines = [ln for mod in list(sys.modules.values()) for ln in getattr(mod, "ACCEPTANCE_LINES", [])]
    if lines:
        terminalreporter.section("acceptance criteria")
        for ln in sorted(lines, key=lambda s: int(s.split("[")[1].split("]")[0])):
            terminalreporter.write_line(ln)

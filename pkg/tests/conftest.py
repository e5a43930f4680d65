import pytest

from covertsim.signals import make_srrc_pulse


@pytest.fixture(scope="session")
def srrc_pulse():
    """The default pulse used across scenarios: rolloff 0.2, 48 samples/symbol, span 12."""
    return make_srrc_pulse(0.2, 48, 12)


@pytest.fixture(scope="session")
def small_pulse():
    """A cheap pulse for tests that only need the synthesis plumbing."""
    return make_srrc_pulse(0.2, 8, 4)

"""Covert communication over continuous-time AWGN channels with an uninformed jammer.

Simulates pulse-position-randomized covert constructions, the warden's
detectors (waveform-domain and genie-aided count tests), and the matching
closed-form covertness analysis, with a Monte Carlo harness that checks the
two against each other.
"""

from covertsim.scenario import Hypothesis

__version__ = "0.1.0"

__all__ = ["Hypothesis", "__version__"]

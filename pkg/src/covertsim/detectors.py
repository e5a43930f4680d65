"""The warden's detectors.

Each detector reduces an observation to a scalar statistic that is compared
against a threshold (ties decide for the active hypothesis). The waveform
detectors are the radiometer and an interference-cancellation detector that
least-squares-fits the jammer's known-timing pulse dictionary in a single
pass, subtracts the fit, and energy-detects the residual. The genie-aided
count statistics read the pulse count or the in-region level count straight
from the trial's genie record.
"""

from dataclasses import dataclass

import numpy as np

from covertsim.scenario import GenieRecord, Hypothesis
from covertsim.signals import PulseShape, SampledSignal, synth_pulse_train

KIND_POWER = "power"
KIND_ICD = "icd_residual"
KIND_PULSE_COUNT = "pulse_count"
KIND_LEVEL_COUNT = "level_count"

_COUNT_KINDS = (KIND_PULSE_COUNT, KIND_LEVEL_COUNT)


@dataclass
class DetectorStatistic:
    value: float
    kind: str

    def __post_init__(self):
        if self.kind in (KIND_POWER, KIND_ICD) and self.value < 0:
            raise ValueError(f"{self.kind} statistic must be non-negative")
        if self.kind in _COUNT_KINDS:
            if self.value < 0 or self.value != int(self.value):
                raise ValueError(f"{self.kind} statistic must be a non-negative integer")


@dataclass
class SymbolTiming:
    """Known timing of a symbol stream: first pulse centre, period, count."""

    start: float
    period: float
    count: int

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("count must be non-negative")
        if self.period <= 0:
            raise ValueError("period must be positive")

    def slot_times(self) -> np.ndarray:
        return self.start + self.period * np.arange(self.count, dtype=float)


def power_statistic(signal: SampledSignal) -> DetectorStatistic:
    """Radiometer: received energy per unit time per unit rate (mean sample power)."""
    if signal.samples.size == 0:
        raise ValueError("power statistic of an empty signal is undefined")
    return DetectorStatistic(value=signal.mean_power, kind=KIND_POWER)


class JammerCanceller:
    """One-pass least-squares canceller for a known-timing pulse stream.

    The dictionary holds one delayed pulse per jammer symbol slot
    (truncated to the observation window exactly as the synthesizer
    truncates it). The least-squares symbol estimate is computed through a
    QR factorization done once at construction; cancelling a signal costs
    two thin matrix-vector products.
    """

    def __init__(self, timing: SymbolTiming, pulse: PulseShape, rate: float, duration: float,
                 rcond: float = 1e-10):
        self.timing = timing
        n = int(round(duration * rate))
        if timing.count == 0:
            self._q = None
            return
        atoms = np.empty((n, timing.count))
        for k, t in enumerate(timing.slot_times()):
            atoms[:, k] = synth_pulse_train([1.0], [t], pulse, rate, duration).samples.real
        q, r = np.linalg.qr(atoms)
        diag = np.abs(np.diag(r))
        if diag.min() <= rcond * diag.max():
            raise ValueError("jammer dictionary is rank-deficient for this timing")
        self._q = q
        self._atoms = atoms

    def residual(self, samples: np.ndarray) -> np.ndarray:
        """Input minus its projection onto the jammer's pulse subspace."""
        if self._q is None:
            return np.asarray(samples, dtype=complex)
        q = self._q
        coeff = q.T @ samples.real + 1j * (q.T @ samples.imag)
        return samples - (q @ coeff.real + 1j * (q @ coeff.imag))

    def statistic(self, signal: SampledSignal) -> DetectorStatistic:
        res = self.residual(signal.samples)
        return DetectorStatistic(value=float(np.mean(np.abs(res) ** 2)), kind=KIND_ICD)


def icd_statistic(signal: SampledSignal, timing: SymbolTiming, pulse: PulseShape) -> DetectorStatistic:
    """Interference-cancellation detector: energy of the jammer-cancelled residual.

    For repeated trials at fixed timing, build one JammerCanceller and reuse
    it; this convenience wrapper refactorizes the dictionary on every call.
    """
    canceller = JammerCanceller(timing, pulse, signal.rate, signal.duration)
    return canceller.statistic(signal)


def pulse_count_statistic(genie: GenieRecord) -> DetectorStatistic:
    """Genie-aided count of all pulses in the window (equal-path-loss test)."""
    return DetectorStatistic(value=float(genie.pulse_count), kind=KIND_PULSE_COUNT)


def level_count_statistic(genie: GenieRecord) -> DetectorStatistic:
    """Genie-aided count of power levels inside the detection region."""
    if genie.levels_in_region is None:
        raise ValueError("genie record carries no power-level information")
    return DetectorStatistic(value=float(genie.levels_in_region), kind=KIND_LEVEL_COUNT)


def decide(stat: DetectorStatistic, threshold: float) -> Hypothesis:
    """Threshold test; a statistic equal to the threshold decides H1."""
    if not np.isfinite(threshold):
        raise ValueError("threshold must be finite")
    return Hypothesis.H1 if stat.value >= threshold else Hypothesis.H0

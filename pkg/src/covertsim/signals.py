"""Pulse shapes, pulse-train synthesis, and spectral estimation.

Continuous time is represented by an oversampled complex-baseband grid:
a symbol period spans `samples_per_symbol` samples, so a signal of rate
`fs` built from a pulse with `sps` samples per symbol has symbol period
`sps / fs` seconds. Pulse delays are quantized to the sample grid and
pulses crossing the observation boundary are truncated, not wrapped.
"""

from dataclasses import dataclass, field

import numpy as np

ENERGY_TOL = 1e-12
SYMMETRY_TOL = 1e-12


@dataclass
class PulseShape:
    """Unit-energy FIR pulse on an oversampled grid.

    taps has length span_symbols * samples_per_symbol + 1, sums of squares
    equal to one, and is symmetric about the centre tap.
    """

    rolloff: float
    samples_per_symbol: int
    span_symbols: int
    taps: np.ndarray

    def __post_init__(self):
        self.taps = np.asarray(self.taps, dtype=float)
        expected = self.span_symbols * self.samples_per_symbol + 1
        if self.taps.size != expected:
            raise ValueError(f"expected {expected} taps, got {self.taps.size}")
        energy = float(np.sum(self.taps**2))
        if abs(energy - 1.0) > ENERGY_TOL:
            raise ValueError(f"taps are not unit energy: sum of squares = {energy!r}")
        if np.max(np.abs(self.taps - self.taps[::-1])) > SYMMETRY_TOL:
            raise ValueError("taps are not symmetric about the centre")

    @property
    def half_width(self) -> int:
        return (self.taps.size - 1) // 2


@dataclass
class SampledSignal:
    """Complex baseband samples standing in for a continuous-time signal."""

    rate: float
    samples: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("rate must be positive")
        self.samples = np.asarray(self.samples, dtype=complex)

    @property
    def duration(self) -> float:
        return self.samples.size / self.rate

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2))

    @property
    def mean_power(self) -> float:
        return float(np.mean(np.abs(self.samples) ** 2)) if self.samples.size else 0.0


@dataclass
class SpectrumEstimate:
    """Two-sided power spectral density on a frequency grid symmetric about 0."""

    freqs: np.ndarray
    psd: np.ndarray
    resolution: float

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=float)
        self.psd = np.asarray(self.psd, dtype=float)
        if np.any(self.psd < 0):
            raise ValueError("psd values must be non-negative")
        if np.any(np.diff(self.freqs) <= 0):
            raise ValueError("freqs must be strictly increasing")
        if np.max(np.abs(self.freqs + self.freqs[::-1])) > 1e-9 * self.resolution:
            raise ValueError("freqs must be symmetric about 0")

    def integral(self) -> float:
        """Rectangle-rule integral of the psd; equals the average signal power."""
        return float(np.sum(self.psd) * self.resolution)


def make_srrc_pulse(rolloff: float, samples_per_symbol: int, span_symbols: int) -> PulseShape:
    """Square-root raised-cosine pulse, normalized to unit energy in the sample domain.

    The removable singularities of the closed form (t = 0 and
    |t| = T_s/(4*rolloff)) are filled with their analytic limits.
    """
    if not 0.0 <= rolloff <= 1.0:
        raise ValueError(f"rolloff must be in [0, 1], got {rolloff}")
    if samples_per_symbol < 2:
        raise ValueError("samples_per_symbol must be at least 2")
    if span_symbols < 2 or span_symbols % 2:
        raise ValueError("span_symbols must be an even integer >= 2")

    n = span_symbols * samples_per_symbol + 1
    t = (np.arange(n) - (n - 1) / 2) / samples_per_symbol  # in symbol periods
    if rolloff == 0.0:
        h = np.sinc(t)
    else:
        at_zero = np.isclose(t, 0.0, atol=1e-12)
        edge_pos = 1.0 / (4.0 * rolloff)
        at_edge = np.isclose(np.abs(t), edge_pos, rtol=1e-12, atol=1e-12) if np.isfinite(edge_pos) else np.zeros(n, bool)
        general = ~(at_zero | at_edge)
        tg = t[general]
        num = np.sin(np.pi * tg * (1 - rolloff)) + 4 * rolloff * tg * np.cos(np.pi * tg * (1 + rolloff))
        den = np.pi * tg * (1 - (4 * rolloff * tg) ** 2)
        h = np.empty(n)
        h[general] = num / den
        h[at_zero] = 1 - rolloff + 4 * rolloff / np.pi
        if at_edge.any():
            h[at_edge] = (rolloff / np.sqrt(2)) * (
                (1 + 2 / np.pi) * np.sin(np.pi / (4 * rolloff))
                + (1 - 2 / np.pi) * np.cos(np.pi / (4 * rolloff))
            )
    h = h / np.sqrt(np.sum(h**2))
    return PulseShape(rolloff, samples_per_symbol, span_symbols, h)


def synth_pulse_train(symbols, delays, pulse: PulseShape, rate: float, duration: float) -> SampledSignal:
    """Superposition of delayed, symbol-scaled pulse replicas.

    Delays (seconds) are quantized to the nearest sample instant; pulses
    whose support crosses [0, duration] are truncated. Linear in `symbols`.
    """
    symbols = np.asarray(symbols, dtype=complex)
    delays = np.asarray(delays, dtype=float)
    if symbols.shape != delays.shape:
        raise ValueError("symbols and delays must have the same length")
    if symbols.size and (delays.min() < 0 or delays.max() > duration):
        raise ValueError("delays must lie within [0, duration]")

    n = int(round(duration * rate))
    out = np.zeros(n, dtype=complex)
    taps = pulse.taps
    half = pulse.half_width
    centers = np.rint(delays * rate).astype(int)
    for c, a in zip(centers, symbols):
        lo, hi = c - half, c + half + 1
        s0, s1 = max(lo, 0), min(hi, n)
        if s0 < s1:
            out[s0:s1] += a * taps[s0 - lo : taps.size - (hi - s1)]
    return SampledSignal(rate=rate, samples=out)


def estimate_psd(signal: SampledSignal, segment_len: int) -> SpectrumEstimate:
    """Averaged periodogram over non-overlapping rectangular segments.

    The two-sided grid runs from -rate/2 to +rate/2 inclusive; the Nyquist
    bin's power is split between the two edge frequencies so the
    rectangle-rule integral of the psd equals the average signal power
    exactly (trailing samples that do not fill a segment are dropped).
    """
    x = signal.samples
    if x.size == 0:
        raise ValueError("cannot estimate the spectrum of an empty signal")
    if segment_len > x.size:
        raise ValueError("segment_len exceeds the signal length")
    if segment_len < 2 or segment_len & (segment_len - 1):
        raise ValueError("segment_len must be a power of two")

    nseg = x.size // segment_len
    blocks = x[: nseg * segment_len].reshape(nseg, segment_len)
    spectra = np.abs(np.fft.fft(blocks, axis=1)) ** 2
    raw = np.fft.fftshift(spectra.mean(axis=0)) / (segment_len * signal.rate)

    df = signal.rate / segment_len
    freqs = (np.arange(segment_len + 1) - segment_len // 2) * df
    psd = np.empty(segment_len + 1)
    psd[0] = raw[0] / 2
    psd[-1] = raw[0] / 2
    psd[1:-1] = raw[1:]
    return SpectrumEstimate(freqs=freqs, psd=psd, resolution=df)


def rc_power_spectrum(freqs, rolloff: float, symbol_period: float) -> np.ndarray:
    """Analytic squared-magnitude spectrum of the SRRC pulse (raised cosine), unit peak.

    Flat for |f| <= (1-rolloff)/(2 T_s), cosine rolloff out to
    (1+rolloff)/(2 T_s), zero beyond.
    """
    fT = np.abs(np.asarray(freqs, dtype=float)) * symbol_period
    s = np.zeros_like(fT)
    flat = fT <= (1 - rolloff) / 2
    s[flat] = 1.0
    if rolloff > 0:
        roll = (fT > (1 - rolloff) / 2) & (fT <= (1 + rolloff) / 2)
        s[roll] = 0.5 * (1 + np.cos(np.pi / rolloff * (fT[roll] - (1 - rolloff) / 2)))
    return s

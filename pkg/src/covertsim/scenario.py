"""Trial generation for the covert constructions and the warden's channel.

Two constructions are simulated. In the equal-path-loss construction both
senders scatter pulses uniformly over the observation window: the jammer
sends Binomial(n, beta) pulses with beta drawn uniformly from
[mu, mu+delta], and the covert sender adds Binomial(n, alpha) pulses when
active. In the unknown-path-loss construction the jammer draws a Poisson
number of power levels uniformly over its power range and sends a fixed
pulse count per level; the covert sender contributes one extra level that
lands inside the warden's detection region.

Each trial emits the waveform seen by the warden together with a genie
record carrying the side information the optimality analysis grants him
(pulse count, locations, heights, power levels) with sender identity
erased by a random shuffle.
"""

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from covertsim.signals import PulseShape, SampledSignal, make_srrc_pulse, synth_pulse_train


class Hypothesis(enum.Enum):
    H0 = 0  # covert sender silent
    H1 = 1  # covert sender active

    @property
    def active(self) -> bool:
        return self is Hypothesis.H1


@dataclass
class ChannelConfig:
    """Path loss, propagation delay, and AWGN level of one link."""

    distance: float = 1.0
    loss_exponent: float = 2.0
    noise_psd: float = 0.0  # W/Hz; per-sample complex noise variance is noise_psd * rate
    delay: float = 0.0

    def __post_init__(self):
        if self.distance <= 0:
            raise ValueError("distance must be positive")
        if self.loss_exponent < 2:
            raise ValueError("loss exponent must be at least 2")
        if self.noise_psd < 0:
            raise ValueError("noise PSD must be non-negative")


@dataclass
class GenieRecord:
    """Per-trial side information granted to the warden.

    Locations and heights are jointly shuffled so their order carries no
    information about which sender produced each pulse. In the
    unknown-path-loss construction `power_levels` holds the received level
    values (also shuffled) and the in/out counts partition them around the
    detection region.
    """

    hypothesis: Hypothesis
    pulse_count: int
    locations: np.ndarray
    heights: np.ndarray
    beta: float | None = None
    power_levels: np.ndarray | None = None
    levels_in_region: int | None = None
    levels_outside: int | None = None

    def __post_init__(self):
        self.locations = np.asarray(self.locations, dtype=float)
        self.heights = np.asarray(self.heights, dtype=complex)
        if not (self.pulse_count == self.locations.size == self.heights.size):
            raise ValueError("pulse count, locations, and heights disagree")
        if self.power_levels is not None:
            self.power_levels = np.asarray(self.power_levels, dtype=float)
            if self.levels_in_region + self.levels_outside != self.power_levels.size:
                raise ValueError("level counts do not partition the level vector")
            if self.hypothesis.active and self.levels_in_region < 1:
                raise ValueError("an active trial must place one level in the detection region")


def _default_channel(rate: float) -> ChannelConfig:
    # unit per-sample noise power by default
    return ChannelConfig(distance=1.0, loss_exponent=2.0, noise_psd=1.0 / rate, delay=0.0)


def _default_pulse() -> PulseShape:
    return make_srrc_pulse(0.2, 48, 12)


@dataclass
class KnownPathLossConfig:
    """Equal-path-loss construction over a window of n = floor(W*T) symbol slots.

    The symbol period is 1/bandwidth, so the sample rate is
    bandwidth * pulse.samples_per_symbol.
    """

    bandwidth: float
    duration: float
    alpha: float
    mu: float
    delta: float
    sigma_sq: float = 1.0
    pulse: PulseShape = field(default_factory=_default_pulse)
    priors: tuple = (0.5, 0.5)
    channel: ChannelConfig | None = None

    def __post_init__(self):
        if self.bandwidth <= 0 or self.duration <= 0:
            raise ValueError("bandwidth and duration must be positive")
        if not 0 <= self.alpha < 1:
            raise ValueError("alpha must be in [0, 1)")
        if self.mu < 0 or self.delta <= 0 or self.mu + self.delta > 1 + 1e-12:
            raise ValueError("need 0 <= mu < mu + delta <= 1")
        if self.delta < self.alpha:
            raise ValueError("delta must be at least alpha")
        if self.sigma_sq <= 0:
            raise ValueError("sigma_sq must be positive")
        if abs(sum(self.priors) - 1.0) > 1e-9 or min(self.priors) < 0:
            raise ValueError("priors must be non-negative and sum to 1")
        if self.channel is None:
            self.channel = _default_channel(self.rate)

    @property
    def n(self) -> int:
        return int(math.floor(self.bandwidth * self.duration))

    @property
    def rate(self) -> float:
        return self.bandwidth * self.pulse.samples_per_symbol


@dataclass
class UnknownPathLossConfig:
    """Unknown-path-loss construction: Poisson power levels at the jammer.

    The received detection region [alice_power, alice_power+alice_power_width]
    scaled by distance**-loss_exponent must sit inside the jammer's level
    range, and transmit powers stay below the caps.
    """

    bandwidth: float
    duration: float
    alpha: float
    alice_power: float
    alice_power_width: float
    jammer_power: float
    jammer_power_width: float
    mean_levels: float
    distance: float = 1.0
    loss_exponent: float = 2.0
    alice_power_cap: float | None = None
    jammer_power_cap: float | None = None
    pulse: PulseShape = field(default_factory=_default_pulse)
    priors: tuple = (0.5, 0.5)
    channel: ChannelConfig | None = None

    def __post_init__(self):
        if self.bandwidth <= 0 or self.duration <= 0:
            raise ValueError("bandwidth and duration must be positive")
        if not 0 <= self.alpha < 1:
            raise ValueError("alpha must be in [0, 1)")
        if min(self.alice_power, self.alice_power_width, self.jammer_power, self.jammer_power_width) <= 0:
            raise ValueError("powers and power widths must be positive")
        if self.mean_levels <= 0:
            raise ValueError("mean_levels must be positive")
        if self.distance <= 0 or self.loss_exponent < 2:
            raise ValueError("invalid path-loss parameters")
        lo, hi = self.detection_region
        if lo < self.jammer_power - 1e-12 or hi > self.jammer_power + self.jammer_power_width + 1e-12:
            raise ValueError("detection region must lie inside the jammer's power range")
        if self.alice_power_cap is None:
            self.alice_power_cap = self.alice_power + self.alice_power_width
        if self.jammer_power_cap is None:
            self.jammer_power_cap = self.jammer_power + self.jammer_power_width
        if self.alice_power + self.alice_power_width > self.alice_power_cap + 1e-12:
            raise ValueError("covert sender's power range exceeds its cap")
        if self.jammer_power + self.jammer_power_width > self.jammer_power_cap + 1e-12:
            raise ValueError("jammer's power range exceeds its cap")
        if abs(sum(self.priors) - 1.0) > 1e-9 or min(self.priors) < 0:
            raise ValueError("priors must be non-negative and sum to 1")
        if self.channel is None:
            self.channel = _default_channel(self.rate)

    @property
    def n(self) -> int:
        return int(math.floor(self.bandwidth * self.duration))

    @property
    def rate(self) -> float:
        return self.bandwidth * self.pulse.samples_per_symbol

    @property
    def pulses_per_level(self) -> int:
        return int(math.floor(self.alpha * self.n))

    @property
    def detection_region(self) -> tuple:
        scale = self.distance**-self.loss_exponent
        return (self.alice_power * scale, (self.alice_power + self.alice_power_width) * scale)

    @property
    def thinned_mean(self) -> float:
        """Mean number of jammer levels landing inside the detection region."""
        lo, hi = self.detection_region
        return self.mean_levels * (hi - lo) / self.jammer_power_width

    def with_thinned_mean(self, lam: float) -> "UnknownPathLossConfig":
        """Copy of this config whose jammer level intensity yields the given thinned mean."""
        lo, hi = self.detection_region
        return replace(self, mean_levels=lam * self.jammer_power_width / (hi - lo), channel=self.channel)


@dataclass
class TwoStreamConfig:
    """Two full-rate symbol streams with a relative timing offset.

    The jammer and the covert sender each transmit n_symbols i.i.d. complex
    Gaussian symbols at one symbol per period, the streams offset by
    offset_samples. A sender with snr_db None is silent. SNR is the ratio
    of that stream's average sample power to the noise sample power.
    The symbol period is taken as 1 second, so rate = samples_per_symbol.
    """

    n_symbols: int = 200
    rolloff: float = 0.2
    samples_per_symbol: int = 48
    span_symbols: int = 12
    offset_samples: int = 8
    alice_snr_db: float | None = 5.0
    jammer_snr_db: float | None = 20.0
    noise_power: float = 1.0

    def __post_init__(self):
        if self.n_symbols < 1:
            raise ValueError("n_symbols must be positive")
        if self.noise_power <= 0:
            raise ValueError("noise_power must be positive")
        if not 0 <= self.offset_samples < self.samples_per_symbol:
            raise ValueError("offset_samples must lie within one symbol period")

    @property
    def rate(self) -> float:
        return float(self.samples_per_symbol)

    @property
    def duration(self) -> float:
        # one symbol period of padding on each side of the stream
        return float(self.n_symbols + self.span_symbols)

    @property
    def pulse(self) -> PulseShape:
        return make_srrc_pulse(self.rolloff, self.samples_per_symbol, self.span_symbols)

    def symbol_variance(self, snr_db: float | None) -> float:
        if snr_db is None:
            return 0.0
        # unit-energy pulse at one symbol per sps samples: sample power = var/sps
        return 10 ** (snr_db / 10) * self.noise_power * self.samples_per_symbol

    def slot_times(self, offset_samples: int) -> np.ndarray:
        start = self.span_symbols / 2 + offset_samples / self.samples_per_symbol
        return start + np.arange(self.n_symbols, dtype=float)


def complex_awgn(size: int, variance: float, rng: np.random.Generator) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with the given total variance."""
    if variance == 0.0:
        return np.zeros(size, dtype=complex)
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def apply_channel(signal: SampledSignal, ch: ChannelConfig, rng: np.random.Generator) -> SampledSignal:
    """Delay, path-loss amplitude scaling by distance**(-r/2), and AWGN.

    The per-sample complex noise variance is noise_psd * rate (the noise is
    white across the simulated band). The delayed signal is zero-filled at
    the leading edge and truncated at the trailing edge.
    """
    if signal.samples.size == 0:
        raise ValueError("cannot apply a channel to an empty signal")
    shift = int(round(ch.delay * signal.rate))
    gain = ch.distance ** (-ch.loss_exponent / 2.0)
    out = np.zeros_like(signal.samples)
    if shift < signal.samples.size:
        out[shift:] = gain * signal.samples[: signal.samples.size - shift]
    out += complex_awgn(out.size, ch.noise_psd * signal.rate, rng)
    return SampledSignal(rate=signal.rate, samples=out, t0=signal.t0)


def draw_known_counts(cfg: KnownPathLossConfig, hypothesis: Hypothesis, rng: np.random.Generator):
    """(beta, total pulse count) for one equal-path-loss trial.

    Consumes the same leading draws as draw_known_trial, so for a given
    substream the count agrees bit-for-bit with the full trial.
    """
    beta = cfg.mu + cfg.delta * rng.random()
    m_jam = int(rng.binomial(cfg.n, beta))
    m_cov = int(rng.binomial(cfg.n, cfg.alpha)) if hypothesis.active else 0
    return beta, m_cov + m_jam, m_cov, m_jam


def _known_parts(cfg: KnownPathLossConfig, hypothesis: Hypothesis, rng: np.random.Generator):
    beta, total, m_cov, m_jam = draw_known_counts(cfg, hypothesis, rng)
    delays = rng.uniform(0.0, cfg.duration, total)
    heights = complex_awgn(total, cfg.sigma_sq, rng)
    perm = rng.permutation(total)
    sources = np.concatenate([np.zeros(m_cov, dtype=int), np.ones(m_jam, dtype=int)])[perm]
    genie = GenieRecord(
        hypothesis=hypothesis,
        pulse_count=total,
        locations=delays[perm],
        heights=heights[perm],
        beta=beta,
    )
    return genie, sources


def draw_known_trial(cfg: KnownPathLossConfig, hypothesis: Hypothesis, rng: np.random.Generator):
    """One equal-path-loss trial: (warden waveform, genie record).

    All path losses are one in this construction, so both senders'
    superposed pulse trains pass through the single configured channel.
    """
    genie, _ = _known_parts(cfg, hypothesis, rng)
    clean = synth_pulse_train(genie.heights, genie.locations, cfg.pulse, cfg.rate, cfg.duration)
    return apply_channel(clean, cfg.channel, rng), genie


def draw_known_trial_with_sources(cfg: KnownPathLossConfig, hypothesis: Hypothesis, rng: np.random.Generator):
    """draw_known_trial plus the per-pulse sender labels (0 covert, 1 jammer).

    For statistical validation of the identity-erasing shuffle only; the
    detectors never see the labels.
    """
    genie, sources = _known_parts(cfg, hypothesis, rng)
    clean = synth_pulse_train(genie.heights, genie.locations, cfg.pulse, cfg.rate, cfg.duration)
    return apply_channel(clean, cfg.channel, rng), genie, sources


def draw_unknown_levels(cfg: UnknownPathLossConfig, hypothesis: Hypothesis, rng: np.random.Generator):
    """(received level values before shuffling, in-region count, outside count).

    Consumes the same leading draws as draw_unknown_trial. The covert
    sender's level, when present, is first in the returned vector. Region
    membership uses the closed interval.
    """
    k = int(rng.poisson(cfg.mean_levels))
    jam_levels = cfg.jammer_power + cfg.jammer_power_width * rng.random(k)
    levels = jam_levels
    if hypothesis.active:
        tx_level = cfg.alice_power + cfg.alice_power_width * rng.random()
        rx_level = tx_level * cfg.distance**-cfg.loss_exponent
        levels = np.concatenate([[rx_level], jam_levels])
    lo, hi = cfg.detection_region
    inside = int(np.count_nonzero((levels >= lo) & (levels <= hi)))
    return levels, inside, levels.size - inside


def draw_unknown_trial(cfg: UnknownPathLossConfig, hypothesis: Hypothesis, rng: np.random.Generator):
    """One unknown-path-loss trial: (warden waveform, genie record).

    Heights are drawn at their received variance (each sender's path loss
    folded into its level), so the waveform passes through the configured
    noise-only channel. Every level carries pulses_per_level pulses.
    """
    levels, inside, outside = draw_unknown_levels(cfg, hypothesis, rng)
    level_perm = rng.permutation(levels.size)
    m_per = cfg.pulses_per_level
    total = levels.size * m_per
    delays = rng.uniform(0.0, cfg.duration, total)
    heights = np.empty(total, dtype=complex)
    for i, lev in enumerate(levels):
        heights[i * m_per : (i + 1) * m_per] = complex_awgn(m_per, lev, rng)
    pulse_perm = rng.permutation(total)
    genie = GenieRecord(
        hypothesis=hypothesis,
        pulse_count=total,
        locations=delays[pulse_perm],
        heights=heights[pulse_perm],
        power_levels=levels[level_perm],
        levels_in_region=inside,
        levels_outside=outside,
    )
    clean = synth_pulse_train(genie.heights, genie.locations, cfg.pulse, cfg.rate, cfg.duration)
    return apply_channel(clean, cfg.channel, rng), genie


def draw_two_stream_trial(cfg: TwoStreamConfig, hypothesis: Hypothesis, rng: np.random.Generator) -> SampledSignal:
    """One offset-stream trial: jammer stream, covert stream when active, AWGN."""
    pulse = cfg.pulse
    var_jam = cfg.symbol_variance(cfg.jammer_snr_db)
    var_cov = cfg.symbol_variance(cfg.alice_snr_db)
    sig = synth_pulse_train(
        complex_awgn(cfg.n_symbols, var_jam, rng),
        cfg.slot_times(cfg.offset_samples),
        pulse,
        cfg.rate,
        cfg.duration,
    )
    if hypothesis.active and var_cov > 0:
        cov = synth_pulse_train(
            complex_awgn(cfg.n_symbols, var_cov, rng),
            cfg.slot_times(0),
            pulse,
            cfg.rate,
            cfg.duration,
        )
        sig.samples += cov.samples
    sig.samples += complex_awgn(sig.samples.size, cfg.noise_power, rng)
    return sig

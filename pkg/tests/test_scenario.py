"""Trial generation: distributions, identity erasure, channel bookkeeping."""

import numpy as np
import pytest
from scipy import stats as sp_stats

from covertsim.rng import substream
from covertsim.scenario import (
    ChannelConfig,
    GenieRecord,
    Hypothesis,
    KnownPathLossConfig,
    UnknownPathLossConfig,
    apply_channel,
    draw_known_counts,
    draw_known_trial,
    draw_known_trial_with_sources,
    draw_unknown_levels,
    draw_unknown_trial,
)
from covertsim.signals import SampledSignal, make_srrc_pulse


def _lumped_chi2_pvalue(counts, expected):
    """Chi-square GOF p-value, lumping cells with expected count below 5."""
    keep = expected >= 5
    chi2 = ((counts[keep] - expected[keep]) ** 2 / expected[keep]).sum()
    rest_obs, rest_exp = counts[~keep].sum(), expected[~keep].sum()
    dof = keep.sum() - 1
    if rest_exp > 0:
        chi2 += (rest_obs - rest_exp) ** 2 / rest_exp
        dof += 1
    return sp_stats.chi2.sf(chi2, dof)


@pytest.fixture(scope="module")
def known_cfg(srrc_pulse):
    return KnownPathLossConfig(bandwidth=100.0, duration=1.0, alpha=0.1, mu=0.2, delta=0.4,
                               pulse=srrc_pulse)


@pytest.fixture(scope="module")
def unknown_cfg(srrc_pulse):
    return UnknownPathLossConfig(
        bandwidth=100.0, duration=1.0, alpha=0.2,
        alice_power=1.0, alice_power_width=1.0,
        jammer_power=0.5, jammer_power_width=2.0,
        mean_levels=8.0, pulse=srrc_pulse,
    )


class TestConfigValidation:
    def test_known_invariants(self, srrc_pulse):
        with pytest.raises(ValueError):
            KnownPathLossConfig(bandwidth=10, duration=1, alpha=0.5, mu=0.2, delta=0.4, pulse=srrc_pulse)
        with pytest.raises(ValueError):
            KnownPathLossConfig(bandwidth=10, duration=1, alpha=0.1, mu=0.7, delta=0.4, pulse=srrc_pulse)
        with pytest.raises(ValueError):
            KnownPathLossConfig(bandwidth=10, duration=1, alpha=0.1, mu=0.2, delta=0.4,
                                priors=(0.7, 0.7), pulse=srrc_pulse)

    def test_known_slot_count(self, known_cfg):
        assert known_cfg.n == 100
        assert known_cfg.rate == 100.0 * 48

    def test_unknown_region_containment(self, srrc_pulse):
        # received range [1, 2] escapes the jammer's [0.5, 1.5]
        with pytest.raises(ValueError):
            UnknownPathLossConfig(
                bandwidth=10, duration=1, alpha=0.2,
                alice_power=1.0, alice_power_width=1.0,
                jammer_power=0.5, jammer_power_width=1.0,
                mean_levels=4.0, pulse=srrc_pulse,
            )

    def test_unknown_derived_quantities(self, unknown_cfg):
        assert unknown_cfg.detection_region == (1.0, 2.0)
        assert unknown_cfg.thinned_mean == pytest.approx(4.0)
        assert unknown_cfg.pulses_per_level == 20
        lam3 = unknown_cfg.with_thinned_mean(3.0)
        assert lam3.thinned_mean == pytest.approx(3.0)

    def test_genie_requires_active_in_region_level(self):
        with pytest.raises(ValueError):
            GenieRecord(
                hypothesis=Hypothesis.H1, pulse_count=0,
                locations=np.array([]), heights=np.array([]),
                power_levels=np.array([0.3]), levels_in_region=0, levels_outside=1,
            )


class TestDeterminism:
    def test_known_trial_bit_identical(self, known_cfg):
        a_sig, a_gen = draw_known_trial(known_cfg, Hypothesis.H1, substream(7, 3, 1))
        b_sig, b_gen = draw_known_trial(known_cfg, Hypothesis.H1, substream(7, 3, 1))
        assert np.array_equal(a_sig.samples, b_sig.samples)
        assert np.array_equal(a_gen.locations, b_gen.locations)
        assert np.array_equal(a_gen.heights, b_gen.heights)
        assert a_gen.beta == b_gen.beta

    def test_counts_are_a_prefix_of_the_full_trial(self, known_cfg):
        beta, total, _, _ = draw_known_counts(known_cfg, Hypothesis.H1, substream(7, 11, 1))
        _, genie = draw_known_trial(known_cfg, Hypothesis.H1, substream(7, 11, 1))
        assert genie.pulse_count == total
        assert genie.beta == beta

    def test_levels_are_a_prefix_of_the_full_trial(self, unknown_cfg):
        levels, inside, outside = draw_unknown_levels(unknown_cfg, Hypothesis.H1, substream(5, 2, 1))
        _, genie = draw_unknown_trial(unknown_cfg, Hypothesis.H1, substream(5, 2, 1))
        assert genie.levels_in_region == inside
        assert genie.levels_outside == outside
        assert np.array_equal(np.sort(genie.power_levels), np.sort(levels))


class TestKnownConstruction:
    def test_pulse_count_mean(self, srrc_pulse):
        # E[M | H1] = n (alpha + mu + delta/2)
        cfg = KnownPathLossConfig(bandwidth=1000.0, duration=1.0, alpha=0.05, mu=0.2,
                                  delta=0.5, pulse=srrc_pulse)
        trials = 10_000
        totals = np.array([
            draw_known_counts(cfg, Hypothesis.H1, substream(21, i, 1))[1] for i in range(trials)
        ])
        expected = cfg.n * (cfg.alpha + cfg.mu + cfg.delta / 2)
        se = totals.std(ddof=1) / np.sqrt(trials)
        assert abs(totals.mean() - expected) < 3 * se

    def test_conditional_count_is_binomial(self, srrc_pulse):
        # degenerate mixing width pins beta at mu, so M ~ Binomial(n, mu)
        cfg = KnownPathLossConfig(bandwidth=200.0, duration=1.0, alpha=0.0, mu=0.3,
                                  delta=1e-9, pulse=srrc_pulse)
        trials = 20_000
        counts = np.array([
            draw_known_counts(cfg, Hypothesis.H0, substream(33, i, 0))[1] for i in range(trials)
        ])
        ks = np.arange(cfg.n + 1)
        expected = trials * sp_stats.binom.pmf(ks, cfg.n, 0.3)
        hist = np.bincount(counts, minlength=cfg.n + 1).astype(float)
        assert _lumped_chi2_pvalue(hist, expected) > 0.01

    def test_silent_sender_blinds_the_count_test(self, srrc_pulse):
        cfg = KnownPathLossConfig(bandwidth=500.0, duration=1.0, alpha=0.0, mu=0.2,
                                  delta=0.5, pulse=srrc_pulse)
        trials = 4000
        m0 = np.array([draw_known_counts(cfg, Hypothesis.H0, substream(4, i, 0))[1] for i in range(trials)])
        m1 = np.array([draw_known_counts(cfg, Hypothesis.H1, substream(4, i, 1))[1] for i in range(trials)])
        for thr in (50, 150, 250, 350):
            p_fa = (m0 >= thr).mean()
            p_md = (m1 < thr).mean()
            se = np.sqrt(p_fa * (1 - p_fa) / trials + p_md * (1 - p_md) / trials)
            assert abs(p_fa + p_md - 1.0) <= 3 * se + 1e-12

    def test_shuffle_erases_source_identity(self, srrc_pulse):
        # position index within the genie arrays must carry no information
        # about the sender, and location values must be identically
        # distributed across senders
        cfg = KnownPathLossConfig(bandwidth=50.0, duration=1.0, alpha=0.4, mu=0.3,
                                  delta=0.5, pulse=srrc_pulse)
        pos_cov, pos_jam, loc_cov, loc_jam = [], [], [], []
        for i in range(300):
            _, genie, sources = draw_known_trial_with_sources(cfg, Hypothesis.H1, substream(9, i, 1))
            if genie.pulse_count == 0 or sources.min() == sources.max():
                continue
            rel = np.arange(genie.pulse_count) / genie.pulse_count
            pos_cov.extend(rel[sources == 0])
            pos_jam.extend(rel[sources == 1])
            loc_cov.extend(genie.locations[sources == 0])
            loc_jam.extend(genie.locations[sources == 1])
        p_pos = sp_stats.mannwhitneyu(pos_cov, pos_jam).pvalue
        p_loc = sp_stats.mannwhitneyu(loc_cov, loc_jam).pvalue
        assert p_pos > 0.05
        assert p_loc > 0.05

    def test_exchangeability_first_vs_last_location(self, srrc_pulse):
        cfg = KnownPathLossConfig(bandwidth=50.0, duration=1.0, alpha=0.4, mu=0.3,
                                  delta=0.5, pulse=srrc_pulse)
        first, last = [], []
        for i in range(400):
            _, genie = draw_known_trial(cfg, Hypothesis.H1, substream(10, i, 1))
            if genie.pulse_count >= 2:
                first.append(genie.locations[0])
                last.append(genie.locations[-1])
        p = sp_stats.ks_2samp(first, last).pvalue
        assert p > 0.05


class TestUnknownConstruction:
    def test_levels_in_region_poisson_thinning(self, unknown_cfg):
        # thinned mean = mean_levels * width ratio = 8 * 0.5 = 4
        trials = 100_000
        k1 = np.array([
            draw_unknown_levels(unknown_cfg, Hypothesis.H0, substream(14, i, 0))[1]
            for i in range(trials)
        ])
        kmax = k1.max()
        expected = trials * sp_stats.poisson.pmf(np.arange(kmax + 1), 4.0)
        hist = np.bincount(k1, minlength=kmax + 1).astype(float)
        assert _lumped_chi2_pvalue(hist, expected) > 0.01

    def test_active_trial_always_has_region_level(self, unknown_cfg):
        for i in range(500):
            _, inside, _ = draw_unknown_levels(unknown_cfg, Hypothesis.H1, substream(15, i, 1))
            assert inside >= 1

    def test_active_law_is_null_law_shifted_by_one(self, unknown_cfg):
        trials = 100_000
        k0 = np.array([
            draw_unknown_levels(unknown_cfg, Hypothesis.H0, substream(16, i, 0))[1]
            for i in range(trials)
        ])
        k1 = np.array([
            draw_unknown_levels(unknown_cfg, Hypothesis.H1, substream(16, i, 1))[1]
            for i in range(trials)
        ])
        hi = max(k0.max(), k1.max()) + 1
        f0 = np.bincount(k0, minlength=hi + 1) / trials
        f1 = np.bincount(k1 - 1, minlength=hi + 1) / trials
        tv = 0.5 * np.abs(f0 - f1).sum()
        assert tv < 0.01

    def test_out_of_region_count_independent_of_hypothesis(self, unknown_cfg):
        trials = 20_000
        k2_0 = np.array([
            draw_unknown_levels(unknown_cfg, Hypothesis.H0, substream(17, i, 0))[2]
            for i in range(trials)
        ])
        k2_1 = np.array([
            draw_unknown_levels(unknown_cfg, Hypothesis.H1, substream(17, i, 1))[2]
            for i in range(trials)
        ])
        hi = max(k2_0.max(), k2_1.max())
        h0 = np.bincount(k2_0, minlength=hi + 1).astype(float)
        h1 = np.bincount(k2_1, minlength=hi + 1).astype(float)
        keep = (h0 + h1) / 2 >= 5
        lumped0 = np.append(h0[keep], h0[~keep].sum())
        lumped1 = np.append(h1[keep], h1[~keep].sum())
        table = np.vstack([lumped0, lumped1])
        table = table[:, table.sum(axis=0) > 0]
        p = sp_stats.chi2_contingency(table).pvalue
        assert p > 0.01

    def test_trial_pulse_count(self, unknown_cfg):
        _, genie = draw_unknown_trial(unknown_cfg, Hypothesis.H1, substream(18, 0, 1))
        levels = genie.power_levels.size
        assert genie.pulse_count == levels * unknown_cfg.pulses_per_level


class TestApplyChannel:
    def test_identity_channel(self, small_pulse):
        rng = np.random.default_rng(0)
        x = SampledSignal(rate=8.0, samples=rng.standard_normal(64) + 0j)
        y = apply_channel(x, ChannelConfig(distance=1.0, loss_exponent=2.0, noise_psd=0.0), rng)
        np.testing.assert_array_equal(x.samples, y.samples)

    def test_path_loss_scaling(self):
        rng = np.random.default_rng(0)
        x = SampledSignal(rate=8.0, samples=np.ones(32, dtype=complex))
        y = apply_channel(x, ChannelConfig(distance=4.0, loss_exponent=2.0, noise_psd=0.0), rng)
        assert y.energy == pytest.approx(x.energy / 16.0)

    def test_delay_shifts_samples(self):
        rng = np.random.default_rng(0)
        x = SampledSignal(rate=8.0, samples=np.arange(16, dtype=complex))
        y = apply_channel(x, ChannelConfig(noise_psd=0.0, delay=0.25), rng)
        np.testing.assert_array_equal(y.samples[2:], x.samples[:-2])
        assert np.all(y.samples[:2] == 0)

    def test_noise_variance_bookkeeping(self):
        rate, n = 100.0, 200_000
        n0 = 0.03  # per-sample variance = n0 * rate = 3.0
        x = SampledSignal(rate=rate, samples=np.zeros(n, dtype=complex))
        y = apply_channel(x, ChannelConfig(noise_psd=n0), substream(19, 0, 0))
        target = n0 * rate
        se = target / np.sqrt(n)  # var of |CN|^2 equals its squared mean
        assert abs(y.mean_power - target) < 3 * se

    def test_rejects_empty_signal(self):
        with pytest.raises(ValueError):
            apply_channel(SampledSignal(rate=8.0, samples=np.array([], dtype=complex)),
                          ChannelConfig(), np.random.default_rng(0))


class TestModelGap:
    """The construction sums two binomials; the count-law analysis treats the
    total as one binomial at the summed rate. The gap is real conditionally
    (variances differ by 2*alpha*beta*n) but washes out once beta is mixed
    over its range."""

    def test_conditional_variance_matches_sum_not_single(self, srrc_pulse):
        cfg = KnownPathLossConfig(bandwidth=200.0, duration=1.0, alpha=0.25, mu=0.4,
                                  delta=1e-9 + 0.25, pulse=srrc_pulse)
        # wide-enough alpha and a fixed beta window make the gap visible
        trials = 30_000
        n, alpha = cfg.n, cfg.alpha
        totals = np.empty(trials)
        betas = np.empty(trials)
        for i in range(trials):
            beta, total, _, _ = draw_known_counts(cfg, Hypothesis.H1, substream(23, i, 1))
            totals[i] = total
            betas[i] = beta
        # condition on beta by regressing out the mixing component exactly:
        # Var(M) = E[Var(M|beta)] + Var(n beta), with
        # E[Var(M|beta)] = n E[beta](1-...) averaged over the window
        mix_var = np.var(n * (alpha + betas), ddof=1)
        resid_var = totals.var(ddof=1) - mix_var
        eb = betas.mean()
        eb2 = (betas**2).mean()
        construction = n * (alpha * (1 - alpha) + eb - eb2)
        single_binomial = n * ((alpha + eb) - (alpha**2 + 2 * alpha * eb + eb2))
        se = totals.var(ddof=1) * np.sqrt(2.0 / trials)
        assert abs(resid_var - construction) < 4 * se
        assert abs(resid_var - single_binomial) > 4 * se
        # the documented gap: 2 n alpha E[beta]
        assert construction - single_binomial == pytest.approx(2 * n * alpha * eb, rel=1e-9)

"""Exact detection-performance computations for both constructions.

Equal-path-loss side: the warden's count statistic is a uniform mixture of
binomials; the module computes the mixture pmfs by adaptive quadrature, the
likelihood ratio and its closed-form two-point counterpart, and exact error
sums over all integer thresholds. Unknown-path-loss side: the level-count
statistic is Poisson under the null and unit-shifted Poisson under the
alternative; the module computes the exact total-variation distance between
the two, the closed form at integer means, the Stirling bound, and the
jammer-intensity design rules.

All pmf arithmetic runs in the log domain with factorials through loggamma.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from covertsim.scenario import Hypothesis

UNDERFLOW_FLOOR = 1e-300  # below this for both masses, the ratio is undefined
QUAD_ABS_TOL = 1e-12
_TAIL_REFINE_BELOW = 1e-8
_TAIL_REL_TOL = 1e-9


@dataclass
class MixturePmf:
    """Pmf of the warden's pulse count under one hypothesis.

    The count is Binomial(n, q) with q uniform over
    [mu + shift/n, mu + shift/n + delta]; shift is 0 when the covert sender
    is silent and alpha*n when active.
    """

    n: int
    shift: float
    mu: float
    delta: float
    pmf: np.ndarray

    def __post_init__(self):
        self.pmf = np.asarray(self.pmf, dtype=float)
        if self.pmf.size != self.n + 1:
            raise ValueError("pmf must cover counts 0..n")
        if np.any(self.pmf < 0):
            raise ValueError("pmf entries must be non-negative")
        total = float(self.pmf.sum())
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"pmf sums to {total!r}, expected 1 within 1e-10")


def _mass_quad(m: int, n: int, q0: float, q1: float, log_comb: float) -> float:
    """(1/(q1-q0)) * integral over [q0,q1] of the Binomial(n,q) mass at m."""

    def integrand(q):
        if q <= 0.0:
            return 0.0 if m > 0 else math.exp(n * math.log1p(-q))
        if q >= 1.0:
            return 0.0 if m < n else math.exp(m * math.log(q))
        return math.exp(log_comb + m * math.log(q) + (n - m) * math.log1p(-q))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(integrand, q0, q1, epsabs=QUAD_ABS_TOL, epsrel=0.0, limit=300)
        if 0.0 < val < _TAIL_REFINE_BELOW:
            # refine small masses to relative accuracy so ratios stay stable
            val, _ = integrate.quad(integrand, q0, q1, epsabs=0.0, epsrel=_TAIL_REL_TOL, limit=500)
    return max(val, 0.0) / (q1 - q0)


def _range_for(n: int, alpha: float, mu: float, delta: float, hypothesis: Hypothesis):
    if not 0 <= alpha < 1:
        raise ValueError("alpha must be in [0, 1)")
    if mu < 0 or delta <= 0:
        raise ValueError("need mu >= 0 and delta > 0")
    shift = alpha if hypothesis.active else 0.0
    q0, q1 = mu + shift, mu + shift + delta
    if q1 > 1 + 1e-12:
        raise ValueError(f"success-probability range [{q0}, {q1}] escapes [0, 1]")
    return q0, min(q1, 1.0)


def mixture_pmf(n: int, alpha: float, mu: float, delta: float, hypothesis: Hypothesis) -> MixturePmf:
    """Exact pmf of the pulse count under the given hypothesis.

    Each mass point is an adaptive quadrature over the mixing range with
    absolute tolerance 1e-12; masses below 1e-8 are refined to relative
    accuracy so downstream likelihood ratios remain monotone in the tails.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    q0, q1 = _range_for(n, alpha, mu, delta, hypothesis)
    ms = np.arange(n + 1)
    log_comb = gammaln(n + 1) - gammaln(ms + 1) - gammaln(n - ms + 1)
    pmf = np.array([_mass_quad(m, n, q0, q1, log_comb[m]) for m in ms])
    return MixturePmf(n=n, shift=(alpha * n if hypothesis.active else 0.0), mu=mu, delta=delta, pmf=pmf)


def lrt_pulse_count(m: int, n: int, alpha: float, mu: float, delta: float) -> float:
    """Likelihood ratio of the pulse count: active-hypothesis mass over null mass.

    Returns +inf when the null mass underflows while the active one does
    not, and nan when both masses are below the underflow floor (an
    undefined cell, excluded from monotonicity checks).
    """
    if not 0 <= m <= n:
        raise ValueError("m must lie in 0..n")
    log_comb = float(gammaln(n + 1) - gammaln(m + 1) - gammaln(n - m + 1))
    q0, q1 = _range_for(n, alpha, mu, delta, Hypothesis.H0)
    p0 = _mass_quad(m, n, q0, q1, log_comb)
    q0, q1 = _range_for(n, alpha, mu, delta, Hypothesis.H1)
    p1 = _mass_quad(m, n, q0, q1, log_comb)
    if p0 < UNDERFLOW_FLOOR and p1 < UNDERFLOW_FLOOR:
        return math.nan
    if p0 == 0.0:
        return math.inf
    return p1 / p0


def lr_ratio(m: int, n: int, b: float, b_prime: float) -> float:
    """Ratio of Binomial(n, b'/n) to Binomial(n, b/n) masses at m, in closed form.

    Computed in the log domain as (b'/b)^m ((n-b')/(n-b))^(n-m); strictly
    increasing in m whenever b < b'.
    """
    if not (0 < b <= b_prime < n):
        raise ValueError("need 0 < b <= b' < n")
    if not 0 <= m <= n:
        raise ValueError("m must lie in 0..n")
    log_r = m * (math.log(b_prime) - math.log(b)) + (n - m) * (math.log(n - b_prime) - math.log(n - b))
    return math.exp(log_r)


@dataclass
class ErrorSweep:
    """Exact per-threshold error probabilities of the count threshold test.

    Threshold t decides active iff count >= t; thresholds run 0..n+1 so the
    always-accuse and never-accuse rules are both included.
    """

    thresholds: np.ndarray
    p_fa: np.ndarray
    p_md: np.ndarray
    min_error_sum: float
    optimal_threshold: int
    min_weighted_error: float
    priors: tuple

    @property
    def error_sums(self) -> np.ndarray:
        return self.p_fa + self.p_md


def exact_error_known(n: int, alpha: float, mu: float, delta: float,
                      priors: tuple = (0.5, 0.5)) -> ErrorSweep:
    """Exhaustive threshold sweep over the two mixture pmfs (beta integrated out)."""
    pmf0 = mixture_pmf(n, alpha, mu, delta, Hypothesis.H0).pmf
    pmf1 = mixture_pmf(n, alpha, mu, delta, Hypothesis.H1).pmf
    thresholds = np.arange(n + 2)
    # P(count >= t | H0) and P(count < t | H1)
    p_fa = np.concatenate([[1.0], 1.0 - np.cumsum(pmf0)])
    p_md = np.concatenate([[0.0], np.cumsum(pmf1)])
    p_fa = np.clip(p_fa, 0.0, 1.0)
    p_md = np.clip(p_md, 0.0, 1.0)
    sums = p_fa + p_md
    best = int(np.argmin(sums))
    weighted = priors[0] * p_fa + priors[1] * p_md
    return ErrorSweep(
        thresholds=thresholds,
        p_fa=p_fa,
        p_md=p_md,
        min_error_sum=float(sums[best]),
        optimal_threshold=best,
        min_weighted_error=float(weighted.min()),
        priors=tuple(priors),
    )


@dataclass
class CovertDesign:
    """Construction constants guaranteeing covertness in the equal-path-loss limit."""

    alpha: float
    eta: float


def covert_design_known(epsilon: float, delta: float) -> CovertDesign:
    """Pulse-rate constant alpha = eps*delta/2 and concentration margin eta = eps*delta/4."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    return CovertDesign(alpha=epsilon * delta / 2.0, eta=epsilon * delta / 4.0)


def _poisson_pmf(k: np.ndarray, lam: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        logp = k * math.log(lam) - lam - gammaln(k + 1)
    return np.exp(logp)


@dataclass
class TvReport:
    """Total variation between the null and unit-shifted Poisson level counts."""

    lam: float
    tv_exact: float
    tv_closed_form: float | None
    stirling_bound: float
    min_error_sum: float
    optimal_threshold: int
    truncation_bound: float


def tv_poisson_shifted(lam: float) -> TvReport:
    """Exact TV distance between Poisson(lam) and 1 + Poisson(lam).

    tv_exact is a direct summation (log-domain pmf evaluation) truncated
    where both tails fall below 1e-16, with the truncation error bounded
    and reported. The closed form lam^lam e^-lam / lam! is reported only at
    integer lam; min_error_sum = 1 - tv_exact is the optimal test's error
    sum, attained by accusing at count >= ceil(lam).
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    kmax = int(math.ceil(lam + 12.0 * math.sqrt(lam) + 60.0))
    while _poisson_pmf(np.array([kmax - 1.0]), lam)[0] >= 1e-16:
        kmax *= 2
    k = np.arange(kmax + 1, dtype=float)
    p0 = _poisson_pmf(k, lam)
    p1 = np.empty_like(p0)
    p1[0] = 0.0
    p1[1:] = p0[:-1]
    tv = 0.5 * float(np.abs(p0 - p1).sum())
    # both upper tails beyond kmax, each bounded by the last included mass ratio sum
    tail = 1.0 - float(p0.sum())
    truncation = 2.0 * max(tail, 0.0) + float(p0[-1])

    closed = None
    if abs(lam - round(lam)) < 1e-9 and lam >= 1:
        li = round(lam)
        closed = math.exp(li * math.log(li) - li - gammaln(li + 1))
    return TvReport(
        lam=lam,
        tv_exact=tv,
        tv_closed_form=closed,
        stirling_bound=1.0 / math.sqrt(2.0 * math.pi * lam),
        min_error_sum=1.0 - tv,
        optimal_threshold=int(math.ceil(lam)),
        truncation_bound=truncation,
    )


def min_jammer_intensity(jammer_power_width: float, distance: float, loss_exponent: float,
                         alice_power_width: float, epsilon: float) -> float:
    """Smallest mean level count for which the Stirling-bound chain certifies covertness.

    The dual rule (solving for the covert sender's power width at a fixed
    level intensity) is min_alice_power_width.
    """
    _check_design_args(jammer_power_width, distance, loss_exponent, alice_power_width, epsilon)
    return jammer_power_width * distance**loss_exponent / (2.0 * math.pi * alice_power_width * epsilon**2)


def min_alice_power_width(jammer_power_width: float, distance: float, loss_exponent: float,
                          mean_levels: float, epsilon: float) -> float:
    """Smallest covert-sender power width certifying covertness at a fixed level intensity."""
    if mean_levels <= 0:
        raise ValueError("mean_levels must be positive")
    _check_design_args(jammer_power_width, distance, loss_exponent, 1.0, epsilon)
    return jammer_power_width * distance**loss_exponent / (2.0 * math.pi * mean_levels * epsilon**2)


def _check_design_args(jammer_power_width, distance, loss_exponent, alice_power_width, epsilon):
    if jammer_power_width <= 0 or alice_power_width <= 0:
        raise ValueError("power widths must be positive")
    if distance <= 0 or loss_exponent <= 0:
        raise ValueError("distance and loss exponent must be positive")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")

"""Deterministic parallel Monte Carlo: ROC curves, limit sweeps, persistence.

Each trial owns a counter-based substream keyed by (seed, trial index,
stream), where the stream axis separates hypotheses and sweep rows, so
estimates are bit-identical for any worker count. Workers run in a thread
pool; the heavy numpy kernels release the GIL and results are written into
preallocated arrays by trial index, making the reduction order-free.
"""

import json
import math
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from covertsim import analysis, detectors
from covertsim.rng import substream
from covertsim.scenario import (
    Hypothesis,
    KnownPathLossConfig,
    TwoStreamConfig,
    UnknownPathLossConfig,
    draw_known_counts,
    draw_known_trial,
    draw_two_stream_trial,
    draw_unknown_levels,
    draw_unknown_trial,
)

Z_95 = 1.959963984540054


def wilson_halfwidth(successes: int, trials: int, z: float = Z_95) -> float:
    """Half-width of the Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be positive")
    p = successes / trials
    denom = 1.0 + z * z / trials
    return (z / denom) * math.sqrt(p * (1 - p) / trials + z * z / (4.0 * trials * trials))


def mann_whitney_auc(stats0: np.ndarray, stats1: np.ndarray):
    """(AUC, standard error): probability that an active-trial statistic outranks
    a null-trial one, ties counted half, with the Hanley-McNeil error estimate."""
    s0 = np.asarray(stats0, dtype=float)
    s1 = np.asarray(stats1, dtype=float)
    n0, n1 = s0.size, s1.size
    if n0 < 2 or n1 < 2:
        raise ValueError("need at least two trials per hypothesis")
    pooled = np.concatenate([s0, s1])
    order = np.argsort(pooled, kind="mergesort")
    ranks = np.empty(pooled.size)
    ranks[order] = np.arange(1, pooled.size + 1)
    # midranks for ties
    sorted_vals = pooled[order]
    i = 0
    while i < pooled.size:
        j = i
        while j + 1 < pooled.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        if j > i:
            ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    auc = (ranks[n0:].sum() - n1 * (n1 + 1) / 2.0) / (n0 * n1)
    q1 = auc / (2.0 - auc)
    q2 = 2.0 * auc * auc / (1.0 + auc)
    var = (auc * (1 - auc) + (n1 - 1) * (q1 - auc * auc) + (n0 - 1) * (q2 - auc * auc)) / (n0 * n1)
    return float(auc), math.sqrt(max(var, 0.0))


@dataclass
class RocCurve:
    """Per-threshold operating points of one detector on one scenario."""

    thresholds: np.ndarray
    p_fa: np.ndarray
    p_d: np.ndarray
    ci_halfwidth: np.ndarray
    trials: int
    seed: int
    detector: str
    scenario: str
    auc: float
    auc_se: float

    def __post_init__(self):
        self.thresholds = np.asarray(self.thresholds, dtype=float)
        self.p_fa = np.asarray(self.p_fa, dtype=float)
        self.p_d = np.asarray(self.p_d, dtype=float)
        self.ci_halfwidth = np.asarray(self.ci_halfwidth, dtype=float)
        if np.any(np.diff(self.thresholds) <= 0):
            raise ValueError("thresholds must be strictly increasing")
        if np.any(np.diff(self.p_fa) > 1e-12):
            raise ValueError("P_FA must be non-increasing along sorted thresholds")
        if not 0.0 <= self.auc <= 1.0:
            raise ValueError("AUC must lie in [0, 1]")


@dataclass
class SweepRow:
    """One sweep point: empirical vs exact minimum error sum."""

    param: float
    empirical_error_sum: float
    exact_error_sum: float
    stderr: float
    threshold: int


def _run_indexed(fn, trials: int, workers: int) -> np.ndarray:
    """Evaluate fn(trial_index) -> float for all indices, in `workers` threads."""
    out = np.empty(trials)

    def fill(lo, hi):
        for i in range(lo, hi):
            out[i] = fn(i)

    if workers <= 1 or trials < 2 * workers:
        fill(0, trials)
        return out
    chunk = max(1, math.ceil(trials / (workers * 4)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fill, lo, min(lo + chunk, trials)) for lo in range(0, trials, chunk)]
        for f in futures:
            f.result()
    return out


def _statistic_fn(cfg, detector: str, hypothesis: Hypothesis, seed: int, stream: int):
    """Per-trial statistic evaluator for (scenario config, detector kind)."""
    if isinstance(cfg, TwoStreamConfig):
        pulse = cfg.pulse
        if detector == detectors.KIND_ICD:
            count = cfg.n_symbols if cfg.jammer_snr_db is not None else 0
            timing = detectors.SymbolTiming(
                start=cfg.span_symbols / 2 + cfg.offset_samples / cfg.samples_per_symbol,
                period=1.0,
                count=count,
            )
            canceller = detectors.JammerCanceller(timing, pulse, cfg.rate, cfg.duration)

            def fn(i):
                sig = draw_two_stream_trial(cfg, hypothesis, substream(seed, i, stream))
                return canceller.statistic(sig).value

            return fn
        if detector == detectors.KIND_POWER:

            def fn(i):
                sig = draw_two_stream_trial(cfg, hypothesis, substream(seed, i, stream))
                return detectors.power_statistic(sig).value

            return fn
    if isinstance(cfg, KnownPathLossConfig):
        if detector == detectors.KIND_PULSE_COUNT:

            def fn(i):
                _, total, _, _ = draw_known_counts(cfg, hypothesis, substream(seed, i, stream))
                return float(total)

            return fn
        if detector == detectors.KIND_POWER:

            def fn(i):
                sig, _ = draw_known_trial(cfg, hypothesis, substream(seed, i, stream))
                return detectors.power_statistic(sig).value

            return fn
    if isinstance(cfg, UnknownPathLossConfig):
        if detector == detectors.KIND_LEVEL_COUNT:

            def fn(i):
                _, inside, _ = draw_unknown_levels(cfg, hypothesis, substream(seed, i, stream))
                return float(inside)

            return fn
        if detector == detectors.KIND_POWER:

            def fn(i):
                sig, _ = draw_unknown_trial(cfg, hypothesis, substream(seed, i, stream))
                return detectors.power_statistic(sig).value

            return fn
    raise ValueError(f"detector {detector!r} is not defined for {type(cfg).__name__}")


def collect_statistics(cfg, detector: str, hypothesis: Hypothesis, trials: int,
                       seed: int, workers: int = 1, stream_base: int = 0) -> np.ndarray:
    """Statistic samples for `trials` independent trials of one hypothesis.

    The substream index is stream_base + the hypothesis flag, so the two
    hypotheses (and distinct sweep rows via stream_base) never share draws.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    fn = _statistic_fn(cfg, detector, hypothesis, seed, stream_base + hypothesis.value)
    return _run_indexed(fn, trials, workers)


def roc_from_stats(stats0: np.ndarray, stats1: np.ndarray, thresholds=None,
                   grid_points: int = 50, trials: int = 0, seed: int = 0,
                   detector: str = "", scenario: str = "") -> RocCurve:
    """ROC curve from one statistic sample per hypothesis, swept over thresholds.

    With no explicit grid, thresholds are quantile-spaced over the pooled
    sample. The ci_halfwidth column is the larger of the two Wilson
    half-widths at each point.
    """
    s0 = np.asarray(stats0, dtype=float)
    s1 = np.asarray(stats1, dtype=float)
    if thresholds is None:
        pooled = np.concatenate([s0, s1])
        thresholds = np.unique(np.quantile(pooled, np.linspace(0.0, 1.0, grid_points)))
    thresholds = np.asarray(thresholds, dtype=float)
    if thresholds.size == 0:
        raise ValueError("threshold grid is empty")
    p_fa = np.array([(s0 >= t).mean() for t in thresholds])
    p_d = np.array([(s1 >= t).mean() for t in thresholds])
    ci = np.array(
        [
            max(wilson_halfwidth(int(round(a * s0.size)), s0.size),
                wilson_halfwidth(int(round(d * s1.size)), s1.size))
            for a, d in zip(p_fa, p_d)
        ]
    )
    auc, auc_se = mann_whitney_auc(s0, s1)
    return RocCurve(
        thresholds=thresholds,
        p_fa=p_fa,
        p_d=p_d,
        ci_halfwidth=ci,
        trials=trials or s0.size,
        seed=seed,
        detector=detector,
        scenario=scenario,
        auc=auc,
        auc_se=auc_se,
    )


def run_roc(cfg, detector: str, thresholds=None, trials: int = 1000, seed: int = 0,
            workers: int = 1, grid_points: int = 50) -> RocCurve:
    """Monte Carlo ROC: one statistic sample per hypothesis, reused across thresholds."""
    s0 = collect_statistics(cfg, detector, Hypothesis.H0, trials, seed, workers)
    s1 = collect_statistics(cfg, detector, Hypothesis.H1, trials, seed, workers)
    return roc_from_stats(
        s0, s1, thresholds=thresholds, grid_points=grid_points, trials=trials,
        seed=seed, detector=detector, scenario=type(cfg).__name__,
    )


def min_error_sum_integer_sweep(stats0: np.ndarray, stats1: np.ndarray):
    """(min P_FA+P_MD, argmin threshold, stderr at argmin) over all integer thresholds."""
    s0 = np.sort(np.asarray(stats0))
    s1 = np.sort(np.asarray(stats1))
    hi = int(max(s0[-1], s1[-1]))
    ts = np.arange(0, hi + 2)
    p_fa = 1.0 - np.searchsorted(s0, ts, side="left") / s0.size
    p_md = np.searchsorted(s1, ts, side="left") / s1.size
    sums = p_fa + p_md
    best = int(np.argmin(sums))
    se = math.sqrt(p_fa[best] * (1 - p_fa[best]) / s0.size + p_md[best] * (1 - p_md[best]) / s1.size)
    return float(sums[best]), int(ts[best]), se


def sweep_known_limit(base_cfg: KnownPathLossConfig, epsilon: float, n_values,
                      trials: int, seed: int = 0, workers: int = 1,
                      alpha: float | None = None) -> list:
    """Empirical vs exact minimum error sum of the pulse-count test versus n.

    alpha defaults to the covert design rule epsilon*delta/2; pass an
    explicit value (e.g. 0) to override.
    """
    if alpha is None:
        alpha = analysis.covert_design_known(epsilon, base_cfg.delta).alpha
    rows = []
    for row_idx, n in enumerate(n_values):
        cfg = replace(base_cfg, bandwidth=float(n), duration=1.0, alpha=alpha)
        s0 = collect_statistics(cfg, detectors.KIND_PULSE_COUNT, Hypothesis.H0,
                                trials, seed, workers, stream_base=2 * row_idx)
        s1 = collect_statistics(cfg, detectors.KIND_PULSE_COUNT, Hypothesis.H1,
                                trials, seed, workers, stream_base=2 * row_idx)
        emp, thr, se = min_error_sum_integer_sweep(s0, s1)
        exact = analysis.exact_error_known(cfg.n, alpha, cfg.mu, cfg.delta, cfg.priors)
        rows.append(SweepRow(param=float(n), empirical_error_sum=emp,
                             exact_error_sum=exact.min_error_sum, stderr=se, threshold=thr))
    return rows


def sweep_unknown_limit(base_cfg: UnknownPathLossConfig, lambda_values, trials: int,
                        seed: int = 0, workers: int = 1) -> list:
    """Empirical vs exact minimum error sum of the level-count test versus the thinned mean."""
    rows = []
    for row_idx, lam in enumerate(lambda_values):
        cfg = base_cfg.with_thinned_mean(float(lam))
        s0 = collect_statistics(cfg, detectors.KIND_LEVEL_COUNT, Hypothesis.H0,
                                trials, seed, workers, stream_base=2 * row_idx)
        s1 = collect_statistics(cfg, detectors.KIND_LEVEL_COUNT, Hypothesis.H1,
                                trials, seed, workers, stream_base=2 * row_idx)
        emp, thr, se = min_error_sum_integer_sweep(s0, s1)
        exact = analysis.tv_poisson_shifted(float(lam)).min_error_sum
        rows.append(SweepRow(param=float(lam), empirical_error_sum=emp,
                             exact_error_sum=exact, stderr=se, threshold=thr))
    return rows


def _fmt(x) -> str:
    return repr(float(x))


def roc_csv_body(curve: RocCurve) -> str:
    lines = ["threshold,p_fa,p_d,ci_halfwidth"]
    for t, a, d, c in zip(curve.thresholds, curve.p_fa, curve.p_d, curve.ci_halfwidth):
        lines.append(f"{_fmt(t)},{_fmt(a)},{_fmt(d)},{_fmt(c)}")
    return "\n".join(lines) + "\n"


def sweep_csv_body(rows) -> str:
    lines = ["param,empirical_error_sum,exact_error_sum,stderr"]
    for r in rows:
        lines.append(f"{_fmt(r.param)},{_fmt(r.empirical_error_sum)},{_fmt(r.exact_error_sum)},{_fmt(r.stderr)}")
    return "\n".join(lines) + "\n"


def git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=10, cwd=Path(__file__).parent,
        )
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def persist_results(result, path, config: dict | None = None, seed: int | None = None) -> Path:
    """Write a result as CSV plus a JSON sidecar with full provenance.

    The CSV body is a pure function of the result, so reruns with identical
    config and seed are byte-identical; the sidecar carries the config,
    seed, a git-describe string, and the (run-dependent) timestamp.
    """
    path = Path(path)
    if isinstance(result, RocCurve):
        body = roc_csv_body(result)
        meta = {"schema": "threshold,p_fa,p_d,ci_halfwidth", "detector": result.detector,
                "scenario": result.scenario, "trials": result.trials,
                "auc": result.auc, "auc_se": result.auc_se}
        seed = result.seed if seed is None else seed
    elif isinstance(result, (list, tuple)) and all(isinstance(r, SweepRow) for r in result):
        body = sweep_csv_body(result)
        meta = {"schema": "param,empirical_error_sum,exact_error_sum,stderr"}
    else:
        raise TypeError(f"cannot persist a {type(result).__name__}")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(body, newline="\n")
        sidecar = {
            **meta,
            "config": config,
            "seed": seed,
            "git": git_describe(),
            "created_utc": datetime.now(timezone.utc).isoformat(),
        }
        path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"failed to persist results to {path}: {exc}") from exc
    return path

"""Command-line entry point: reproduction recipes and analysis operations.

Subcommands: icd-demo, known-limit, unknown-limit, tv, psd-check. Each takes
its parameters from built-in defaults, overridden by a JSON config file
(--config), overridden in turn by repeated --set key=value flags. Unknown
keys are rejected. Every resolved value is echoed into the JSON outputs.

Exit codes: 0 all verdict gates passed; 2 config/schema error; 3 runtime
error; 4 a verdict gate failed.
"""

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from covertsim import analysis, detectors, harness
from covertsim.rng import substream
from covertsim.scenario import (
    ChannelConfig,
    Hypothesis,
    KnownPathLossConfig,
    TwoStreamConfig,
    UnknownPathLossConfig,
    draw_known_trial,
)
from covertsim.signals import estimate_psd, make_srrc_pulse, rc_power_spectrum

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_RUNTIME = 3
EXIT_VERDICT = 4


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class ConfigKey:
    name: str
    kind: str  # int | float | optfloat | int_list | float_list
    default: object
    unit: str
    help: str


def _coerce(key: ConfigKey, raw):
    """Coerce a JSON value or --set string to the key's type."""
    try:
        if key.kind == "int":
            if isinstance(raw, bool):
                raise ValueError("expected an integer")
            return int(raw)
        if key.kind == "float":
            return float(raw)
        if key.kind == "optfloat":
            if raw is None:
                return None
            if isinstance(raw, str):
                if raw.lower() in ("none", "null"):
                    return None
                val = float(raw)
            else:
                val = float(raw)
            return None if val == -math.inf else val
        if key.kind in ("int_list", "float_list"):
            if isinstance(raw, str):
                raw = [p for p in raw.split(",") if p.strip()]
            if not isinstance(raw, (list, tuple)):
                raise ValueError("expected a list")
            cast = int if key.kind == "int_list" else float
            return [cast(v) for v in raw]
        raise AssertionError(f"unknown kind {key.kind}")
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"config key '{key.name}': {exc}") from exc


SCHEMAS = {
    "icd-demo": [
        ConfigKey("n_symbols", "int", 200, "symbols", "symbols sent by each stream"),
        ConfigKey("rolloff", "float", 0.2, "-", "SRRC excess-bandwidth factor in [0, 1]"),
        ConfigKey("samples_per_symbol", "int", 48, "samples", "oversampling per symbol period"),
        ConfigKey("span_symbols", "int", 12, "symbols", "pulse truncation span (even)"),
        ConfigKey("offset_samples", "int", 8, "samples", "jammer timing offset from the covert stream"),
        ConfigKey("alice_snr_db", "optfloat", 5.0, "dB", "covert stream SNR; none/-inf silences it"),
        ConfigKey("jammer_snr_db", "optfloat", 20.0, "dB", "jammer stream SNR; none/-inf silences it"),
        ConfigKey("noise_power", "float", 1.0, "W", "per-sample noise power"),
        ConfigKey("grid_points", "int", 50, "-", "quantile-spaced ROC threshold grid size"),
        ConfigKey("pfa_lo", "float", 0.05, "-", "low edge of the dominance-check P_FA band"),
        ConfigKey("pfa_hi", "float", 0.5, "-", "high edge of the dominance-check P_FA band"),
    ],
    "known-limit": [
        ConfigKey("epsilon", "float", 0.2, "-", "covertness budget in (0, 1)"),
        ConfigKey("delta", "float", 0.5, "-", "width of the jammer's pulse-rate range"),
        ConfigKey("mu", "float", 0.2, "-", "low edge of the jammer's pulse-rate range"),
        ConfigKey("alpha", "optfloat", None, "-", "covert pulse rate; default epsilon*delta/2"),
        ConfigKey("n_values", "int_list", [100, 1000, 10000], "slots", "symbol-slot counts to sweep"),
    ],
    "unknown-limit": [
        ConfigKey("lambda_values", "float_list", [1.0, 2.0, 4.0, 9.0], "-", "thinned level means to sweep"),
        ConfigKey("epsilon", "float", 0.1, "-", "covertness budget for the design-rule report"),
        ConfigKey("alice_power", "float", 1.0, "W", "low edge of the covert sender's power range"),
        ConfigKey("alice_power_width", "float", 1.0, "W", "width of the covert sender's power range"),
        ConfigKey("jammer_power", "float", 0.5, "W", "low edge of the jammer's level range"),
        ConfigKey("jammer_power_width", "float", 2.0, "W", "width of the jammer's level range"),
        ConfigKey("distance", "float", 1.0, "m", "covert sender to warden distance"),
        ConfigKey("loss_exponent", "float", 2.0, "-", "path-loss exponent (>= 2)"),
        ConfigKey("n_slots", "int", 100, "slots", "symbol slots per window"),
        ConfigKey("alpha", "float", 0.2, "-", "pulse fraction per level"),
    ],
    "tv": [
        ConfigKey("lam", "float", 4.0, "-", "thinned mean level count (> 0)"),
    ],
    "psd-check": [
        ConfigKey("n_slots", "int", 1000, "slots", "symbol slots in the synthesized window"),
        ConfigKey("rolloff", "float", 0.2, "-", "SRRC excess-bandwidth factor in [0, 1]"),
        ConfigKey("samples_per_symbol", "int", 48, "samples", "oversampling per symbol period"),
        ConfigKey("span_symbols", "int", 12, "symbols", "pulse truncation span (even)"),
        ConfigKey("mu", "float", 0.4, "-", "low edge of the jammer's pulse-rate range"),
        ConfigKey("delta", "float", 0.2, "-", "width of the jammer's pulse-rate range"),
        ConfigKey("alpha", "float", 0.05, "-", "covert pulse rate"),
        ConfigKey("segment_len", "int", 1024, "samples", "periodogram segment length (power of two)"),
        ConfigKey("n_realizations", "int", 16, "-", "independent waveforms averaged"),
    ],
}

DEFAULT_TRIALS = {"icd-demo": 1000, "known-limit": 10000, "unknown-limit": 100000, "tv": 0, "psd-check": 0}


def resolve_config(command: str, config_path, set_pairs) -> dict:
    """defaults <- JSON file <- --set overrides; unknown keys are rejected."""
    schema = {k.name: k for k in SCHEMAS[command]}
    values = {k.name: k.default for k in SCHEMAS[command]}
    if config_path:
        try:
            loaded = json.loads(Path(config_path).read_text())
        except OSError as exc:
            raise SchemaError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise SchemaError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise SchemaError("config file must hold a JSON object")
        for name, raw in loaded.items():
            if name not in schema:
                raise SchemaError(f"unknown config key '{name}' for {command}")
            values[name] = _coerce(schema[name], raw)
    for pair in set_pairs or []:
        if "=" not in pair:
            raise SchemaError(f"--set expects key=value, got '{pair}'")
        name, raw = pair.split("=", 1)
        if name not in schema:
            raise SchemaError(f"unknown config key '{name}' for {command}")
        values[name] = _coerce(schema[name], raw)
    _validate(command, values)
    return values


def _validate(command: str, v: dict):
    def need(cond, msg):
        if not cond:
            raise SchemaError(msg)

    if "epsilon" in v:
        need(0 < v["epsilon"] < 1, "epsilon must lie strictly inside (0, 1)")
    if "rolloff" in v:
        need(0 <= v["rolloff"] <= 1, "rolloff must lie in [0, 1]")
    if "samples_per_symbol" in v:
        need(v["samples_per_symbol"] >= 2, "samples_per_symbol must be >= 2")
    if "span_symbols" in v:
        need(v["span_symbols"] >= 2 and v["span_symbols"] % 2 == 0, "span_symbols must be even and >= 2")
    if command == "tv":
        need(v["lam"] > 0, "lam must be positive")
    if "lambda_values" in v:
        need(len(v["lambda_values"]) > 0, "lambda_values must not be empty")
        need(all(x > 0 for x in v["lambda_values"]), "lambda_values must be positive")
    if "n_values" in v:
        need(len(v["n_values"]) > 0, "n_values must not be empty")
        need(all(x >= 1 for x in v["n_values"]), "n_values must be positive integers")
    if "grid_points" in v:
        need(v["grid_points"] >= 2, "grid_points must be at least 2")
    if "pfa_lo" in v and "pfa_hi" in v:
        need(0 <= v["pfa_lo"] < v["pfa_hi"] <= 1, "need 0 <= pfa_lo < pfa_hi <= 1")
    if "segment_len" in v:
        need(v["segment_len"] >= 2 and v["segment_len"] & (v["segment_len"] - 1) == 0,
             "segment_len must be a power of two")
    if "n_realizations" in v:
        need(v["n_realizations"] >= 1, "n_realizations must be positive")


def _write_json(path: Path, payload: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=float) + "\n")


def _dominance_check(pow0, pow1, icd0, icd1, pfa_lo, pfa_hi, grid_points):
    """At each power-detector grid point with P_FA in the band, compare the
    cancellation detector's P_D at a threshold achieving no larger P_FA."""
    icd0_desc = np.sort(icd0)[::-1]
    points = []
    pooled = np.concatenate([pow0, pow1])
    grid = np.unique(np.quantile(pooled, np.linspace(0.0, 1.0, grid_points)))
    for t in grid:
        pfa = float((pow0 >= t).mean())
        if not pfa_lo <= pfa <= pfa_hi:
            continue
        pd_pow = float((pow1 >= t).mean())
        k = int(math.floor(pfa * icd0_desc.size))
        while k > 0 and float((icd0 >= icd0_desc[k - 1]).mean()) > pfa:
            k -= 1
        thr_icd = math.inf if k == 0 else float(icd0_desc[k - 1])
        pd_icd = float((icd1 >= thr_icd).mean())
        points.append({"p_fa": pfa, "p_d_power": pd_pow, "p_d_icd": pd_icd})
    dominated = all(p["p_d_icd"] >= p["p_d_power"] for p in points) and bool(points)
    return dominated, points


def cmd_icd_demo(cfg: dict, args) -> tuple:
    ts = TwoStreamConfig(
        n_symbols=cfg["n_symbols"],
        rolloff=cfg["rolloff"],
        samples_per_symbol=cfg["samples_per_symbol"],
        span_symbols=cfg["span_symbols"],
        offset_samples=cfg["offset_samples"],
        alice_snr_db=cfg["alice_snr_db"],
        jammer_snr_db=cfg["jammer_snr_db"],
        noise_power=cfg["noise_power"],
    )
    t0 = time.monotonic()
    stats = {}
    for det in (detectors.KIND_POWER, detectors.KIND_ICD):
        stats[det] = tuple(
            harness.collect_statistics(ts, det, hyp, args.trials, args.seed, args.workers)
            for hyp in (Hypothesis.H0, Hypothesis.H1)
        )
    curves = {
        det: harness.roc_from_stats(
            s0, s1, grid_points=cfg["grid_points"], trials=args.trials, seed=args.seed,
            detector=det, scenario="TwoStreamConfig",
        )
        for det, (s0, s1) in stats.items()
    }
    out = Path(args.out)
    harness.persist_results(curves[detectors.KIND_POWER], out / "roc_power.csv", config=cfg, seed=args.seed)
    harness.persist_results(curves[detectors.KIND_ICD], out / "roc_icd.csv", config=cfg, seed=args.seed)

    dominated, points = _dominance_check(
        *stats[detectors.KIND_POWER], *stats[detectors.KIND_ICD],
        cfg["pfa_lo"], cfg["pfa_hi"], cfg["grid_points"],
    )
    cp, ci = curves[detectors.KIND_POWER], curves[detectors.KIND_ICD]
    auc_separated = ci.auc - harness.Z_95 * ci.auc_se > cp.auc + harness.Z_95 * cp.auc_se
    # with the jammer silent the two detectors coincide; dominance is then vacuous
    trivial = cfg["jammer_snr_db"] is None
    verdict = (dominated and auc_separated) or (trivial and abs(ci.auc - cp.auc) <= harness.Z_95 * (ci.auc_se + cp.auc_se))
    summary = {
        "config": cfg,
        "seed": args.seed,
        "trials": args.trials,
        "auc_power": cp.auc,
        "auc_power_se": cp.auc_se,
        "auc_icd": ci.auc,
        "auc_icd_se": ci.auc_se,
        "icd_dominates": dominated,
        "auc_ci_separated": auc_separated,
        "dominance_points": points,
        "elapsed_s": time.monotonic() - t0,
        "verdict": verdict,
    }
    _write_json(out / "summary.json", summary)
    if args.plot_data:
        lines = ["detector,threshold,p_fa,p_d,ci_halfwidth"]
        for det, c in curves.items():
            for t, a, d, w in zip(c.thresholds, c.p_fa, c.p_d, c.ci_halfwidth):
                lines.append(f"{det},{t!r},{a!r},{d!r},{w!r}")
        (out / "roc_long.csv").write_text("\n".join(lines) + "\n")
    print(f"icd-demo: AUC(power)={cp.auc:.4f} AUC(icd)={ci.auc:.4f} "
          f"icd_dominates={dominated} verdict={verdict}")
    return verdict, summary


def _known_base(cfg: dict, n: int) -> KnownPathLossConfig:
    alpha = cfg["alpha"]
    if alpha is None:
        alpha = analysis.covert_design_known(cfg["epsilon"], cfg["delta"]).alpha
    return KnownPathLossConfig(
        bandwidth=float(n), duration=1.0, alpha=alpha, mu=cfg["mu"], delta=cfg["delta"],
    )


def cmd_known_limit(cfg: dict, args) -> tuple:
    base = _known_base(cfg, cfg["n_values"][0])
    rows = harness.sweep_known_limit(
        base, cfg["epsilon"], cfg["n_values"], args.trials, seed=args.seed,
        workers=args.workers, alpha=base.alpha,
    )
    out = Path(args.out)
    harness.persist_results(rows, out / "known_limit.csv", config=cfg, seed=args.seed)
    exact = [r.exact_error_sum for r in rows]
    monotone = all(b >= a - 1e-12 for a, b in zip(exact, exact[1:]))
    final_ok = exact[-1] > 1.0 - cfg["epsilon"]
    agree = all(abs(r.empirical_error_sum - r.exact_error_sum) <= 4.0 * r.stderr + 1e-12 for r in rows)
    verdict = monotone and final_ok and agree
    summary = {
        "config": cfg, "seed": args.seed, "trials": args.trials, "alpha": base.alpha,
        "rows": [vars(r) for r in rows], "exact_monotone": monotone,
        "final_exceeds_1_minus_epsilon": final_ok, "rows_within_4_stderr": agree,
        "verdict": verdict,
    }
    _write_json(out / "summary.json", summary)
    print(f"known-limit: alpha={base.alpha} final exact={exact[-1]:.6f} "
          f"(target > {1 - cfg['epsilon']}) verdict={verdict}")
    return verdict, summary


def cmd_unknown_limit(cfg: dict, args) -> tuple:
    base = UnknownPathLossConfig(
        bandwidth=float(cfg["n_slots"]), duration=1.0, alpha=cfg["alpha"],
        alice_power=cfg["alice_power"], alice_power_width=cfg["alice_power_width"],
        jammer_power=cfg["jammer_power"], jammer_power_width=cfg["jammer_power_width"],
        mean_levels=1.0, distance=cfg["distance"], loss_exponent=cfg["loss_exponent"],
    )
    rows = harness.sweep_unknown_limit(base, cfg["lambda_values"], args.trials,
                                       seed=args.seed, workers=args.workers)
    bound = analysis.min_jammer_intensity(
        cfg["jammer_power_width"], cfg["distance"], cfg["loss_exponent"],
        cfg["alice_power_width"], cfg["epsilon"],
    )
    out = Path(args.out)
    harness.persist_results(rows, out / "unknown_limit.csv", config=cfg, seed=args.seed)
    agree = all(abs(r.empirical_error_sum - r.exact_error_sum) <= 4.0 * r.stderr + 1e-12 for r in rows)
    summary = {
        "config": cfg, "seed": args.seed, "trials": args.trials,
        "rows": [vars(r) for r in rows],
        "min_jammer_intensity": bound,
        "rows_within_4_stderr": agree,
        "verdict": agree,
    }
    _write_json(out / "summary.json", summary)
    print(f"unknown-limit: min jammer intensity for epsilon={cfg['epsilon']} is {bound:.4f}; "
          f"rows within 4 stderr: {agree}")
    return agree, summary


def cmd_tv(cfg: dict, args) -> tuple:
    try:
        report = analysis.tv_poisson_shifted(cfg["lam"])
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc
    payload = {"config": cfg, **vars(report)}
    _write_json(Path(args.out) / "tv_report.json", payload)
    print(json.dumps(payload, indent=2, sort_keys=True, default=float))
    return True, payload


def cmd_psd_check(cfg: dict, args) -> tuple:
    pulse = make_srrc_pulse(cfg["rolloff"], cfg["samples_per_symbol"], cfg["span_symbols"])
    known = KnownPathLossConfig(
        bandwidth=float(cfg["n_slots"]), duration=1.0, alpha=cfg["alpha"],
        mu=cfg["mu"], delta=cfg["delta"], pulse=pulse,
        channel=ChannelConfig(noise_psd=0.0),
    )
    acc = None
    for r in range(cfg["n_realizations"]):
        sig, _ = draw_known_trial(known, Hypothesis.H1, substream(args.seed, r, 0))
        est = estimate_psd(sig, cfg["segment_len"])
        acc = est.psd if acc is None else acc + est.psd
    psd = acc / cfg["n_realizations"]
    freqs, df = est.freqs, est.resolution

    w = known.bandwidth  # symbol rate; pulse band edge at (1+rolloff)*w/2
    analytic = rc_power_spectrum(freqs, cfg["rolloff"], 1.0 / w)
    total = float(np.sum(psd) * df)
    if total == 0.0:
        verdict = True
        inband_dev = 0.0
        oob = 0.0
        flat_zero = True
    else:
        flat_zero = False
        inband = np.abs(freqs) <= (1 - cfg["rolloff"]) * w / 2
        scale = psd[inband].mean() / analytic[inband].mean()
        inband_dev = float(np.mean(np.abs(psd[inband] / scale - analytic[inband]) / analytic[inband]))
        oob = float(np.sum(psd[np.abs(freqs) > (1 + cfg["rolloff"]) * w]) * df / total)
        verdict = inband_dev < 0.05 and oob < 1e-2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["freq,psd,analytic"]
    for f, p, a in zip(freqs, psd, analytic):
        lines.append(f"{f!r},{p!r},{a!r}")
    (out / "spectrum.csv").write_text("\n".join(lines) + "\n", newline="\n")
    report = {
        "config": cfg, "seed": args.seed,
        "flat_zero": flat_zero,
        "inband_mean_relative_deviation": inband_dev,
        "out_of_band_fraction_beyond_(1+rolloff)W": oob,
        "out_of_band_fraction_beyond_rc_edge": (
            0.0 if flat_zero else float(np.sum(psd[np.abs(freqs) > (1 + cfg["rolloff"]) * w / 2]) * df / total)
        ),
        "verdict": verdict,
    }
    _write_json(out / "psd_report.json", report)
    print(f"psd-check: in-band deviation={inband_dev:.4f} (gate 0.05), "
          f"out-of-band fraction={oob:.2e} (gate 1e-2), verdict={verdict}")
    return verdict, report


COMMANDS = {
    "icd-demo": cmd_icd_demo,
    "known-limit": cmd_known_limit,
    "unknown-limit": cmd_unknown_limit,
    "tv": cmd_tv,
    "psd-check": cmd_psd_check,
}

DESCRIPTIONS = {
    "icd-demo": "ROC comparison: interference-cancellation detector vs power detector",
    "known-limit": "exact and Monte Carlo covert-limit sweep for the equal-path-loss construction",
    "unknown-limit": "exact and Monte Carlo covert-limit sweep for the power-level construction",
    "tv": "total variation between the null and unit-shifted Poisson level counts",
    "psd-check": "bandwidth check of the pulse-train construction against the analytic spectrum",
}


def _epilog(command: str) -> str:
    lines = ["config keys (JSON file via --config, overridden by --set key=value):"]
    for k in SCHEMAS[command]:
        lines.append(f"  {k.name} ({k.kind}, {k.unit}; default {k.default!r}): {k.help}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="covertsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(
            name, help=DESCRIPTIONS[name], epilog=_epilog(name),
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        p.add_argument("--config", type=str, default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=0, help="master seed (u64)")
        p.add_argument("--trials", type=int, default=DEFAULT_TRIALS[name],
                       help="Monte Carlo trials per hypothesis")
        p.add_argument("--out", type=str, default="results", help="output directory")
        p.add_argument("--workers", type=int, default=1, help="worker threads")
        p.add_argument("--set", action="append", dest="set_pairs", metavar="KEY=VALUE",
                       help="override one config key (repeatable; wins over --config)")
        p.add_argument("--plot-data", action="store_true", help="also emit long-format CSV for plotting")
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.trials < 0 or (args.trials < 1 and args.command in ("icd-demo", "known-limit", "unknown-limit")):
            raise SchemaError("--trials must be at least 1")
        if args.workers < 1:
            raise SchemaError("--workers must be at least 1")
        if args.seed < 0:
            raise SchemaError("--seed must be a non-negative integer")
        cfg = resolve_config(args.command, args.config, args.set_pairs)
    except SchemaError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    try:
        verdict, _ = args.fn(cfg, args)
    except SchemaError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except Exception as exc:  # noqa: BLE001 - partition runtime failures by exit code
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK if verdict else EXIT_VERDICT


if __name__ == "__main__":
    sys.exit(main())

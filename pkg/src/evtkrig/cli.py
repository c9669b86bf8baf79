"""Command-line front end.

Subcommands
-----------
fit-gpd    fit a GPD tail to a CSV column of losses, emit a JSON report
estimate   one CVaR estimate (empirical / pot / spectral) from a CSV column
run        execute an experiment grid from a JSON config, emit result CSVs
predict    evaluate a serialized kriging model at points from a CSV
design     emit a Latin-hypercube or equally spaced design as CSV

Exit codes: 0 success, 1 validation error (arguments, config schema,
malformed input), 2 numerical failure (fit or oracle did not converge).

Flags ``--seed``, ``--threads`` and ``--out-dir`` may also be supplied via
the environment as ``EVTKRIG_SEED``, ``EVTKRIG_THREADS`` and
``EVTKRIG_OUT_DIR``; explicit flags win over the environment.

Config schema (version 1), JSON object with keys:

    version               required, must be 1
    scenarios             required: list from {normal, triangular, pareto, san}
    allocations           catalog ids 1..15; required with benchmark scenarios
    san_budgets           observations per design point; required with "san"
    alphas                optional, default [0.95, 0.99, 0.995]
    macro_replications    optional, default 10
    seed                  optional, default 42
    methods               optional subset of {ORD-KRG, POT-EMP, EMP-EMP, POT-EVT}
    test_points           optional, default 200 (benchmark test-set size)
    threshold_quantile    optional, default 0.9

Unknown keys are rejected; every schema violation is reported before exit.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import evt_risk, harness, kriging, models
from .design import Domain, allocation_by_id, equally_spaced, lhs
from .rng import RngStream

ENV_PREFIX = "EVTKRIG_"
EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2

CONFIG_VERSION = 1
_CONFIG_KEYS = {
    "version", "scenarios", "allocations", "san_budgets", "alphas",
    "macro_replications", "seed", "methods", "test_points", "threshold_quantile",
}
_CONFIG_DEFAULTS = {
    "alphas": [0.95, 0.99, 0.995],
    "macro_replications": 10,
    "seed": 42,
    "methods": None,
    "test_points": 200,
    "threshold_quantile": 0.9,
}


class ValidationFailure(Exception):
    """Bad user input: arguments, config schema, or malformed CSV."""


def _env_default(name: str, cast, fallback):
    raw = os.environ.get(ENV_PREFIX + name)
    if raw is None:
        return fallback
    try:
        return cast(raw)
    except ValueError:
        raise ValidationFailure(f"environment variable {ENV_PREFIX}{name}={raw!r} "
                                f"is not a valid {cast.__name__}")


def read_loss_csv(path: str) -> np.ndarray:
    """Read the first column of a CSV as floats; one header row is allowed."""
    rows = []
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            for idx, row in enumerate(reader):
                if not row or not row[0].strip():
                    continue
                try:
                    rows.append(float(row[0]))
                except ValueError:
                    if idx == 0:
                        continue  # header
                    raise ValidationFailure(
                        f"{path}: non-numeric value {row[0]!r} on line {idx + 1}")
    except OSError as exc:
        raise ValidationFailure(f"cannot read {path}: {exc}")
    if not rows:
        raise ValidationFailure(f"{path}: no numeric observations found")
    return np.asarray(rows, dtype=float)


def read_points_csv(path: str) -> np.ndarray:
    """Read point rows (all columns numeric); one header row is allowed."""
    rows = []
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            for idx, row in enumerate(reader):
                cells = [c for c in row if c.strip()]
                if not cells:
                    continue
                try:
                    rows.append([float(c) for c in cells])
                except ValueError:
                    if idx == 0:
                        continue
                    raise ValidationFailure(
                        f"{path}: non-numeric point row on line {idx + 1}")
    except OSError as exc:
        raise ValidationFailure(f"cannot read {path}: {exc}")
    if not rows:
        raise ValidationFailure(f"{path}: no points found")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValidationFailure(f"{path}: rows have inconsistent column counts")
    return np.asarray(rows, dtype=float)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _fit_report(fit: evt_risk.GpdFit) -> dict:
    return {
        "threshold": fit.u,
        "threshold_quantile": fit.threshold_quantile,
        "n_total": fit.n_total,
        "n_exceed": fit.n_exceed,
        "zeta": fit.zeta,
        "xi": fit.xi,
        "beta": fit.beta,
        "info": [[fit.info[0, 0], fit.info[0, 1]], [fit.info[1, 0], fit.info[1, 1]]],
        "loglik": fit.loglik,
        "boundary": fit.boundary,
    }


def cmd_fit_gpd(args) -> int:
    losses = read_loss_csv(args.input)
    fit = evt_risk.fit_gpd(losses, args.threshold_quantile)
    _emit(json.dumps(_fit_report(fit), indent=2, sort_keys=True), args.out)
    return EXIT_OK


def cmd_estimate(args) -> int:
    losses = read_loss_csv(args.input)
    if not 0.0 < args.alpha < 1.0:
        raise ValidationFailure(f"--alpha must lie in (0, 1), got {args.alpha}")
    payload: dict = {"alpha": args.alpha, "method": args.method, "n": int(losses.size)}
    if args.method == "empirical":
        est = evt_risk.empirical_cvar(losses, args.alpha)
    else:
        fit = evt_risk.fit_gpd(losses, args.threshold_quantile)
        payload["gpd"] = _fit_report(fit)
        if args.method == "pot":
            est = evt_risk.pot_cvar(fit, args.alpha)
        else:  # spectral route through the CVaR spectrum
            est = evt_risk.spectral_pot(fit, evt_risk.SpectralMeasure.cvar(args.alpha))
    payload["value"] = est.value
    payload["variance"] = est.variance
    _emit(json.dumps(payload, indent=2, sort_keys=True), args.out)
    return EXIT_OK


def _load_config(path: str) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ValidationFailure(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ValidationFailure(f"config {path} is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ValidationFailure("config must be a JSON object")

    errors = []
    unknown = sorted(set(raw) - _CONFIG_KEYS)
    for key in unknown:
        errors.append(f"unknown key {key!r}")
    if raw.get("version") != CONFIG_VERSION:
        errors.append(f"version must be {CONFIG_VERSION}, got {raw.get('version')!r}")

    scenarios = raw.get("scenarios")
    if (not isinstance(scenarios, list) or not scenarios
            or any(s not in models.NOISE_SCENARIOS + ("san",) for s in scenarios)):
        errors.append("scenarios must be a non-empty list from "
                      "{normal, triangular, pareto, san}")
        scenarios = []
    benchmark = [s for s in scenarios if s != "san"]

    allocations = raw.get("allocations")
    if benchmark:
        if not isinstance(allocations, list) or not allocations:
            errors.append("allocations (catalog ids) are required with benchmark scenarios")
        else:
            for a in allocations:
                if not isinstance(a, int) or not 1 <= a <= 15:
                    errors.append(f"allocation id {a!r} outside the catalog 1..15")
    elif allocations:
        errors.append("allocations given but no benchmark scenario requested")

    san_budgets = raw.get("san_budgets")
    if "san" in scenarios:
        if not isinstance(san_budgets, list) or not san_budgets:
            errors.append("san_budgets are required with the san scenario")
        else:
            for b in san_budgets:
                if not isinstance(b, int) or b < 100:
                    errors.append(f"san budget {b!r} must be an integer >= 100")
    elif san_budgets:
        errors.append("san_budgets given but the san scenario is not requested")

    alphas = raw.get("alphas", _CONFIG_DEFAULTS["alphas"])
    if (not isinstance(alphas, list) or not alphas
            or any(not isinstance(a, (int, float)) or not 0 < a < 1 for a in alphas)):
        errors.append("alphas must be a non-empty list of numbers in (0, 1)")

    macro = raw.get("macro_replications", _CONFIG_DEFAULTS["macro_replications"])
    if not isinstance(macro, int) or macro < 1:
        errors.append("macro_replications must be an integer >= 1")

    seed = raw.get("seed", _CONFIG_DEFAULTS["seed"])
    if not isinstance(seed, int) or seed < 0:
        errors.append("seed must be a nonnegative integer")

    methods = raw.get("methods", _CONFIG_DEFAULTS["methods"])
    if methods is not None:
        if (not isinstance(methods, list) or not methods
                or any(m not in harness.METHODS for m in methods)):
            errors.append(f"methods must be a non-empty subset of {list(harness.METHODS)}")

    test_points = raw.get("test_points", _CONFIG_DEFAULTS["test_points"])
    if not isinstance(test_points, int) or test_points < 2:
        errors.append("test_points must be an integer >= 2")

    tq = raw.get("threshold_quantile", _CONFIG_DEFAULTS["threshold_quantile"])
    if not isinstance(tq, (int, float)) or not 0 < tq < 1:
        errors.append("threshold_quantile must lie in (0, 1)")

    if errors:
        raise ValidationFailure("invalid config:\n  - " + "\n  - ".join(errors))
    return {"scenarios": scenarios, "allocations": allocations or [],
            "san_budgets": san_budgets or [], "alphas": [float(a) for a in alphas],
            "macro_replications": macro, "seed": seed,
            "methods": tuple(methods) if methods else None,
            "test_points": test_points, "threshold_quantile": float(tq)}


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    seed = args.seed if args.seed is not None else cfg["seed"]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    records = []
    for scenario in cfg["scenarios"]:
        if scenario == "san":
            cells = [harness.ExperimentConfig(
                scenario="san", san_budget=b, alphas=tuple(cfg["alphas"]),
                macro_replications=cfg["macro_replications"], seed=seed,
                methods=cfg["methods"], threshold_quantile=cfg["threshold_quantile"])
                for b in cfg["san_budgets"]]
        else:
            cells = [harness.ExperimentConfig(
                scenario=scenario, allocation=allocation_by_id(a),
                alphas=tuple(cfg["alphas"]),
                macro_replications=cfg["macro_replications"], seed=seed,
                methods=cfg["methods"], n_test=cfg["test_points"],
                threshold_quantile=cfg["threshold_quantile"])
                for a in cfg["allocations"]]
        for cell in cells:
            records.extend(harness.run_experiment(cell, threads=args.threads))

    harness.write_results_csv(records, out_dir / "results.csv")
    harness.write_summary_csv(records, out_dir / "summary.csv")
    harness.write_boxplot_csv(records, out_dir / "boxplot.csv")
    sys.stdout.write(f"wrote {len(records)} records to {out_dir}\n")
    return EXIT_OK


def cmd_predict(args) -> int:
    try:
        model = kriging.KrigingModel.from_json(Path(args.model).read_text())
    except OSError as exc:
        raise ValidationFailure(f"cannot read model {args.model}: {exc}")
    except (ValueError, KeyError) as exc:
        raise ValidationFailure(f"bad model file {args.model}: {exc}")
    points = read_points_csv(args.points)
    if points.shape[1] != model.dim:
        raise ValidationFailure(
            f"points have dimension {points.shape[1]}, model expects {model.dim}")
    means, sds = model.predict_many(points)
    lines = [",".join(f"x{i + 1}" for i in range(model.dim)) + ",mean,extrinsic_sd"]
    for p, m, s in zip(points, means, sds):
        lines.append(",".join(_fmt(c) for c in p) + f",{_fmt(m)},{_fmt(s)}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _parse_bounds(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(c) for c in text.split(","))
    except ValueError:
        raise ValidationFailure(f"cannot parse bounds {text!r} as comma-separated floats")


def cmd_design(args) -> int:
    lower = _parse_bounds(args.lower)
    upper = _parse_bounds(args.upper)
    if len(lower) != len(upper):
        raise ValidationFailure("--lower and --upper must have the same dimension")
    try:
        domain = Domain(lower, upper)
        if args.kind == "lhs":
            pts = lhs(domain, args.count, RngStream(args.seed or 42))
        else:
            pts = equally_spaced(domain, args.count)
    except ValueError as exc:
        raise ValidationFailure(str(exc))
    lines = [",".join(f"x{i + 1}" for i in range(domain.dim))]
    for p in pts:
        lines.append(",".join(_fmt(c) for c in p))
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evtkrig",
        description="Global CVaR estimation: POT tail fits plus stochastic kriging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-gpd", help="fit a GPD tail to a CSV column of losses")
    p.add_argument("--input", required=True, help="CSV with one numeric loss column")
    p.add_argument("--threshold-quantile", type=float, default=0.9)
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_fit_gpd)

    p = sub.add_parser("estimate", help="estimate CVaR from a CSV column of losses")
    p.add_argument("--input", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--method", choices=("empirical", "pot", "spectral"),
                   default="empirical")
    p.add_argument("--threshold-quantile", type=float, default=0.9)
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("run", help="run an experiment grid from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=_env_default("OUT_DIR", str, "results"))
    p.add_argument("--seed", type=int, default=_env_default("SEED", int, None))
    p.add_argument("--threads", type=int, default=_env_default("THREADS", int, 1))
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("predict", help="evaluate a serialized kriging model")
    p.add_argument("--model", required=True, help="model JSON from the library")
    p.add_argument("--points", required=True, help="CSV of query points")
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("design", help="emit an experiment design as CSV")
    p.add_argument("--kind", choices=("lhs", "grid"), default="lhs")
    p.add_argument("--lower", required=True, help="comma-separated lower bounds")
    p.add_argument("--upper", required=True, help="comma-separated upper bounds")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=_env_default("SEED", int, None))
    p.add_argument("--out")
    p.set_defaults(func=cmd_design)
    return parser


def main(argv=None) -> int:
    try:
        parser = build_parser()
    except ValidationFailure as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (ValidationFailure, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except (evt_risk.RiskError, kriging.SingularDesignError, kriging.KrigingFitError,
            models.OracleConvergenceError) as exc:
        sys.stderr.write(f"numerical failure: {type(exc).__name__}: {exc}\n")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: ``ivimpute estimate | simulate | check``.

Exit codes: 0 success, 1 a diagnostic check failed, 2 validation error,
3 estimation error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .checks import CHECKS, run_checks
from .dataio import EstimateReport, experiment_to_json, read_iv_csv, rows_to_csv
from .errors import EstimationError, IVImputeError, SimulationError, ValidationError
from .estimators import tsls_ri
from .inference import wald_test
from .simulation import SimConfig, default_p_grid, default_threads, run_experiment

log = logging.getLogger("ivimpute")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_VALIDATION = 2
EXIT_ESTIMATION = 3
EXIT_IO = 4

SEED_ENV = "IVIMPUTE_SEED"
PRESETS = ("paper-fig1", "paper-fig2")
PRESET_P_MAX = 0.8
PRESET_STEP = 0.005
PRESET_R = 5000


class CLIError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# -- estimate -----------------------------------------------------------------


def cmd_estimate(args) -> int:
    instruments = [c.strip() for c in args.instruments.split(",") if c.strip()]
    if not instruments:
        raise ValidationError("--instruments must name at least one column")
    try:
        data = read_iv_csv(args.data, args.outcome, args.endogenous, instruments)
    except OSError as exc:
        raise CLIError(f"cannot read {args.data}: {exc.strerror or exc}", EXIT_IO) from None
    est = tsls_ri(data)
    test = wald_test(est.beta_hat, est.variance_robust_ri, args.null, args.alpha)
    report = EstimateReport.build(est, test, data.L)
    text = report.to_json() + "\n" if args.format == "json" else report.to_text()
    _emit(text, args.out)
    return EXIT_OK


# -- simulate -----------------------------------------------------------------


def _parse_grid(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise ValidationError(f"--p-grid: cannot parse {text!r} as a comma-separated list of numbers") from None


def _parse_seed(text: str, source: str) -> int:
    try:
        seed = int(text, 0)
    except ValueError:
        raise ValidationError(f"{source}: seed must be an integer (got {text!r})", field="seed") from None
    if not 0 <= seed < 2**64:
        raise ValidationError(f"{source}: seed must be an unsigned 64-bit integer (got {seed})", field="seed")
    return seed


def _load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CLIError(f"cannot read config {path}: {exc.strerror or exc}", EXIT_IO) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None


def preset_configs(name: str, scale: float = 1.0) -> list[SimConfig]:
    """The two-panel design (sigma_uv = +0.3 and -0.3) at a given scale.

    ``scale`` multiplies the replication count and divides the grid step, so
    ``scale=0.1`` gives R=500 on a grid of step 0.05.
    """
    if name not in PRESETS:
        raise ValidationError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    if not scale > 0:
        raise ValidationError(f"--scale must be > 0 (got {scale})", field="scale")
    grid = default_p_grid(PRESET_P_MAX, PRESET_STEP / scale)
    R = max(1, int(round(PRESET_R * scale)))
    return [SimConfig(sigma_uv=s, R=R, p_grid=grid) for s in (0.3, -0.3)]


def resolve_configs(args) -> list[SimConfig]:
    """Apply preset/config file, flag overrides and seed precedence.

    Seed precedence: ``--seed`` > ``IVIMPUTE_SEED`` > config file > 0.
    """
    if args.preset and args.config:
        raise ValidationError("use either --config or --preset, not both")
    if args.preset:
        configs = preset_configs(args.preset, args.scale)
    elif args.config:
        configs = [SimConfig.from_dict(_load_config(args.config), path=args.config)]
    else:
        configs = [SimConfig()]

    overrides = {}
    if args.p_grid is not None:
        overrides["p_grid"] = _parse_grid(args.p_grid)
    for flag, key in (("repl", "R"), ("n", "n"), ("beta", "beta"), ("sigma_uv", "sigma_uv")):
        if getattr(args, flag) is not None:
            overrides[key] = getattr(args, flag)
    if args.homoskedastic:
        overrides["homoskedastic_override"] = True
    if args.seed is not None:
        overrides["seed"] = _parse_seed(args.seed, "--seed")
    elif os.environ.get(SEED_ENV):
        overrides["seed"] = _parse_seed(os.environ[SEED_ENV], SEED_ENV)
    return [replace(c, **overrides) for c in configs]


def output_paths(out: str, configs: list[SimConfig]) -> list[Path]:
    path = Path(out)
    if len(configs) == 1:
        return [path]
    return [path.with_name(f"{path.stem}_sigma_uv{c.sigma_uv:+g}{path.suffix}") for c in configs]


def _render_experiment(path: Path, config: SimConfig, rows) -> dict[Path, str]:
    if path.suffix.lower() == ".json":
        return {path: experiment_to_json(config.to_dict(), rows)}
    sidecar = path.with_name(path.name + ".config.json")
    return {path: rows_to_csv(rows), sidecar: json.dumps(config.to_dict(), indent=2) + "\n"}


def cmd_simulate(args) -> int:
    configs = resolve_configs(args)
    threads = args.threads if args.threads is not None else default_threads()
    if threads < 1:
        raise ValidationError(f"--threads must be >= 1 (got {threads})", field="threads")
    paths = output_paths(args.out, configs)
    for path in paths:
        parent = path.parent if str(path.parent) else Path(".")
        if not parent.is_dir() or not os.access(parent, os.W_OK):
            raise CLIError(f"output directory {parent} does not exist or is not writable", EXIT_IO)
    for config, path in zip(configs, paths):
        log.info("seed=%d sigma_uv=%+g R=%d cells=%d threads=%d -> %s",
                 config.seed, config.sigma_uv, config.R, len(config.p_grid), threads, path)
        progress = (lambda row: log.info("  p=%g rmse=%.5g", row.p, row.rmse)) if args.verbose else None
        rows = run_experiment(config, threads=threads, progress=progress)
        for target, text in _render_experiment(path, config, rows).items():
            _write(target, text)
    return EXIT_OK


# -- check --------------------------------------------------------------------


def cmd_check(args) -> int:
    only = args.only or None
    if only:
        unknown = [n for n in only if n not in CHECKS]
        if unknown:
            raise ValidationError(f"unknown check(s): {', '.join(unknown)}; available: {', '.join(CHECKS)}")
    results = run_checks(only)
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed} passed, {failed} failed")
    return EXIT_CHECK_FAILED if failed else EXIT_OK


# -- plumbing -----------------------------------------------------------------


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as exc:
        raise CLIError(f"cannot write {path}: {exc.strerror or exc}", EXIT_IO) from None


def _emit(text: str, out: str | None) -> None:
    if out:
        _write(Path(out), text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ivimpute", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    e = sub.add_parser("estimate", help="estimate beta from a CSV file")
    e.add_argument("--data", required=True, help="CSV file with a header row")
    e.add_argument("--outcome", required=True)
    e.add_argument("--endogenous", required=True, help="column that may contain empty or NA cells")
    e.add_argument("--instruments", required=True, help="comma-separated column names")
    e.add_argument("--null", type=float, default=0.0, help="null value for the t statistic (default 0)")
    e.add_argument("--alpha", type=float, default=0.05)
    e.add_argument("--format", choices=("json", "text"), default="json")
    e.add_argument("--out", help="write the report here instead of stdout")
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("simulate", help="run the Monte Carlo experiment")
    src = s.add_mutually_exclusive_group()
    src.add_argument("--config", help="JSON file with SimConfig fields")
    src.add_argument("--preset", choices=PRESETS)
    s.add_argument("--scale", type=float, default=1.0, help="preset scale: R*scale, grid step/scale")
    s.add_argument("--seed", help="unsigned 64-bit seed (overrides IVIMPUTE_SEED and the config)")
    s.add_argument("--threads", type=int, help="worker threads (default: CPU count); never changes results")
    s.add_argument("--p-grid", help="comma-separated missing probabilities")
    s.add_argument("--repl", type=int, help="replications per cell")
    s.add_argument("--n", type=int, help="sample size")
    s.add_argument("--beta", type=float)
    s.add_argument("--sigma-uv", type=float, dest="sigma_uv")
    s.add_argument("--homoskedastic", action="store_true", help="use the homoskedastic error design")
    s.add_argument("--out", required=True, help=".csv (with .config.json sidecar) or .json")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("check", help="run the built-in diagnostic suite")
    c.add_argument("--only", action="append", metavar="NAME", help=f"one of: {', '.join(CHECKS)}")
    c.set_defaults(func=cmd_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("ivimpute: %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    log.propagate = False
    try:
        return _dispatch(args)
    finally:
        log.removeHandler(handler)


def _dispatch(args) -> int:
    try:
        return args.func(args)
    except CLIError as exc:
        log.error("%s", exc)
        return exc.code
    except ValidationError as exc:
        log.error("validation error: %s", exc)
        return EXIT_VALIDATION
    except (EstimationError, SimulationError) as exc:
        log.error("estimation error: %s", exc)
        return EXIT_ESTIMATION
    except IVImputeError as exc:
        log.error("error: %s", exc)
        return EXIT_ESTIMATION


if __name__ == "__main__":
    sys.exit(main())

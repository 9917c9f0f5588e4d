"""Command-line front end: ``dynpanel {simulate,estimate,bootstrap,mc}``.

Every command writes its outputs plus a ``<stem>.config.json`` sidecar with
the fully resolved settings into ``--out`` and prints the main output path on
stdout.  Diagnostics go to stderr; verbosity comes from ``DYNPANEL_LOG``.

Exit codes
----------
0  success
1  other estimation error
2  bad arguments or unreadable input
3  no untrimmed switcher window
4  too many failed bootstrap replicates
5  a Monte Carlo cell failed
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .dgp import DESIGNS
from .errors import (
    DomainError,
    DynPanelError,
    FailureRateError,
    NoSwitchersError,
    ParseError,
    SchemaError,
)
from .estimator import fit
from .inference import BootstrapConfig, bootstrap_ci
from .montecarlo import emit_table, run_mc
from .optimizer import DeConfig
from .panel import extract_windows, read_csv, write_csv

log = logging.getLogger("dynpanel")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_ERROR, EXIT_ARGS, EXIT_NO_SWITCHERS, EXIT_FAILURE_RATE, EXIT_MC = 0, 1, 2, 3, 4, 5


class UsageError(Exception):
    pass


def _number(text: str) -> float:
    """Parse ``0.875`` or ``7/8``."""
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _number_list(text: str) -> list:
    return [_number(t) for t in text.split(",") if t.strip()]


def _int_list(text: str) -> list:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}") from None


def _add_trim(p):
    p.add_argument("--c", type=float, default=1.0, help="trimming constant (default 1.0)")
    p.add_argument("--side", choices=("upper", "lower", "both"), default="both")
    p.add_argument("--sigma", type=float, default=None, help="fixed threshold, overrides the schedule")


def _add_de(p):
    p.add_argument("--iota", type=float, default=0.01, help="floor on the z coefficient")
    p.add_argument("--pop-size", type=int, default=None, help="DE population (default 10 * dim)")
    p.add_argument("--generations", type=int, default=400, help="DE generation budget")
    p.add_argument("--patience", type=int, default=60, help="generations without improvement before stopping")


def _add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--threads", type=int, default=None, help="worker processes (default: all cores)")
    p.add_argument("--config", type=Path, default=None, help="JSON file of option defaults")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dynpanel", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a design panel to CSV")
    p.add_argument("--design", required=True, help="d1 or d2")
    p.add_argument("--z", choices=("norm", "lap"), default="norm")
    p.add_argument("--n", type=int, default=5000)
    _add_common(p)

    p = sub.add_parser("estimate", help="point estimate from a panel CSV")
    p.add_argument("--data", type=Path, required=True)
    _add_trim(p)
    _add_de(p)
    _add_common(p)

    p = sub.add_parser("bootstrap", help="m-out-of-n bootstrap intervals")
    p.add_argument("--data", type=Path, required=True)
    _add_trim(p)
    _add_de(p)
    p.add_argument("--B", type=int, default=500)
    p.add_argument("--m-exp", type=_number, default=7 / 8)
    p.add_argument("--rate-exps", type=_number_list, default=[6 / 7, 7 / 8])
    p.add_argument("--levels", type=_number_list, default=[0.90, 0.95])
    p.add_argument("--lambda", dest="lambda_hat", type=float, default=None, help="skip the rate estimate")
    _add_common(p)

    p = sub.add_parser("mc", help="Monte Carlo table for a design")
    p.add_argument("--design", required=True, help="d1 or d2")
    p.add_argument("--z", choices=("norm", "lap"), default="norm")
    p.add_argument("--n", type=_int_list, default=[5000, 10000, 20000], help="comma-separated sample sizes")
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--format", choices=("csv", "text"), default="csv")
    _add_trim(p)
    _add_de(p)
    _add_common(p)
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    """Parse twice: once to find ``--config``, then with its values as defaults."""
    args = parser.parse_args(argv)
    if getattr(args, "config", None) is None:
        return args
    try:
        conf = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from None
    conf = conf.get("args", conf)
    sub = parser._subparsers._group_actions[0].choices[args.command]  # noqa: SLF001
    known = {a.dest for a in sub._actions}  # noqa: SLF001
    unknown = set(conf) - known - {"command", "version", "schema_version"}
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    defaults = {k: v for k, v in conf.items() if k in known and k != "config"}
    for k in ("out", "data"):
        if k in defaults and defaults[k] is not None:
            defaults[k] = Path(defaults[k])
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _resolved(args: argparse.Namespace) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in ("config", "threads"):
            continue  # neither changes results
        out[k] = str(v) if isinstance(v, Path) else v
    return out


def _dump_json(obj, path: Path):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_sidecar(stem: Path, args, extra=None):
    doc = {"schema_version": SCHEMA_VERSION, "version": __version__, "args": _resolved(args)}
    if extra:
        doc.update(extra)
    _dump_json(doc, stem.with_name(stem.name + ".config.json"))


def _de_cfg(args) -> DeConfig:
    try:
        return DeConfig(
            population_size=args.pop_size,
            max_generations=args.generations,
            stagnation_patience=args.patience,
            iota=args.iota,
            seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _threads(args) -> int:
    return args.threads if args.threads else (os.cpu_count() or 1)


def _design(args):
    if args.design not in DESIGNS:
        raise UsageError(f"unknown design {args.design!r}; choose from {', '.join(sorted(DESIGNS))}")
    return DESIGNS[args.design](args.z)


def cmd_simulate(args) -> Path:
    from .dgp import simulate

    spec = _design(args).replace(n=args.n, seed=args.seed)
    stem = args.out / f"panel_{spec.name}_{spec.z_dist}_n{spec.n}_seed{spec.seed}"
    path = write_csv(simulate(spec), stem.with_suffix(".csv"))
    _write_sidecar(stem, args, {"theta_true": dict(zip(spec.coef_labels, map(float, spec.theta_true)))})
    return path


def _load(args):
    ds = read_csv(args.data)
    return extract_windows(ds)


def cmd_estimate(args) -> Path:
    windows = _load(args)
    est = fit(windows, c=args.c, side=args.side, cfg=_de_cfg(args), sigma=args.sigma)
    stem = args.out / f"estimate_{args.data.stem}"
    trace = stem.with_name(stem.name + ".trace.csv")
    trace.write_text(est.optimizer.trace_csv())
    doc = {
        "schema_version": SCHEMA_VERSION,
        "theta": {k: float(v) for k, v in est.theta.as_dict().items()},
        "objective": est.value,
        "diagnostics": est.diagnostics(),
        "trace": trace.name,
        "de_config_hash": _de_cfg(args).config_hash(),
    }
    path = stem.with_suffix(".json")
    _dump_json(doc, path)
    _write_sidecar(stem, args)
    return path


def cmd_bootstrap(args) -> Path:
    if len(args.rate_exps) != 2:
        raise UsageError("--rate-exps takes exactly two values")
    try:
        boot = BootstrapConfig(
            B=args.B,
            m_exponent=args.m_exp,
            rate_exponents=tuple(args.rate_exps),
            levels=tuple(args.levels),
            seed=args.seed,
        )
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    windows = _load(args)
    de = _de_cfg(args)
    est = fit(windows, c=args.c, side=args.side, cfg=de, sigma=args.sigma)
    res = bootstrap_ci(windows, est.theta, est.trim, boot, args.lambda_hat, de, n_jobs=_threads(args))
    stem = args.out / f"bootstrap_{args.data.stem}"
    path = stem.with_suffix(".csv")
    path.write_text(res.to_csv())
    extra = {"n_failed": res.n_failed, "sigma_n": est.trim.sigma_n}
    if res.rate is not None:
        r = res.rate
        extra["rate"] = {"lambda_hat": r.lambda_hat, "lambda_raw": r.lambda_raw, "m1": r.m1, "m2": r.m2,
                         "s1": r.s1, "s2": r.s2, "n_failed": list(r.failed)}
    _write_sidecar(stem, args, extra)
    log.info("lambda_hat=%.4f, %d failed replicates", res.lambda_hat, res.n_failed)
    return path


def cmd_mc(args) -> Path:
    spec = _design(args)
    if args.reps < 2:
        raise UsageError("--reps must be >= 2")
    if args.sigma is not None:
        raise UsageError("mc derives sigma from the schedule; use --c")
    de = _de_cfg(args)
    summaries = run_mc(spec, args.n, args.reps, args.c, args.side, de, args.seed, n_jobs=_threads(args))
    stem = args.out / f"mc_{spec.name}_{spec.z_dist}_c{args.c:g}_seed{args.seed}"
    path = stem.with_suffix(".csv" if args.format == "csv" else ".txt")
    path.write_text(emit_table(summaries, args.format))
    rows = ["schema_version,n,rep," + ",".join(spec.coef_labels)]
    for s in summaries:
        for r, v in enumerate(s.estimates):
            rows.append(f"{SCHEMA_VERSION},{s.n},{r}," + ",".join(repr(float(x)) for x in v))
    stem.with_name(stem.name + ".estimates.csv").write_text("\n".join(rows) + "\n")
    _write_sidecar(stem, args, {"de_config": {k: v for k, v in de.__dict__.items() if k != "seed"},
                                "de_seed": "derived per replication"})
    return path


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "bootstrap": cmd_bootstrap, "mc": cmd_mc}


def _setup_logging():
    level = os.environ.get("DYNPANEL_LOG", "WARNING").upper()
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = _apply_config_file(parser, argv)
    except SystemExit as exc:  # argparse
        return int(exc.code or 0) and EXIT_ARGS
    except UsageError as exc:
        print(f"dynpanel: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        path = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"dynpanel: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except (OSError, ParseError, SchemaError, DomainError) as exc:
        print(f"dynpanel: error: {exc}", file=sys.stderr)
        return EXIT_MC if args.command == "mc" and isinstance(exc, DynPanelError) else EXIT_ARGS
    except NoSwitchersError as exc:
        print(
            f"dynpanel: no switcher survives trimming ({exc}). Lower --c or --sigma, "
            "or check that the panel has choice switches between t-1 and t+1.",
            file=sys.stderr,
        )
        return EXIT_MC if args.command == "mc" else EXIT_NO_SWITCHERS
    except FailureRateError as exc:
        print(f"dynpanel: {exc}", file=sys.stderr)
        return EXIT_FAILURE_RATE
    except DynPanelError as exc:
        print(f"dynpanel: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_MC if args.command == "mc" else EXIT_ERROR
    print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: ``panelcup {estimate,simulate,select-factors}``.

Exit codes: 0 on success, 2 for bad input or configuration, 3 when the
computation itself fails (or every simulated replication failed).
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DataError, NumericalError, PanelCupError
from .estimators import CupConfig, cup, cup_bc, cup_fm, lsdv, pooled_ols, two_step_fm
from .factor_select import select_r
from .lrcov import KernelSpec
from .mc import ESTIMATORS, DgpConfig, run_mc
from .panel import DetrendSpec, read_csv
from .report import SCHEMA_VERSION, dumps

EXIT_OK, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3

_FITTERS = {
    "pooled": pooled_ols,
    "lsdv": lsdv,
    "cup": cup,
    "cupbc": cup_bc,
    "cupfm": cup_fm,
    "2sfm": two_step_fm,
}
_NEEDS_CONFIG = {"cup", "cupbc", "cupfm", "2sfm"}
_DETREND = {"none": "none", "demean": "demean", "trend": "demean_and_trend"}

# Settings that may come from flags or a config file, with their parsers and
# defaults. Flags override the file, which overrides these defaults.
_SETTINGS = {
    "estimator": (str, None),
    "kernel": (str, "bartlett"),
    "bandwidth": (float, 5.0),
    "r": (str, "1"),
    "r_max": (int, 4),
    "detrend": (str, "demean"),
    "max_iter": (int, 20),
    "tol": (float, 1e-8),
    "seed": (int, 0),
    "reps": (int, 1000),
    "n": (int, 40),
    "t": (int, 40),
    "c": (float, 5.0),
    "s21": (float, 0.2),
    "s31": (float, 0.8),
    "s32": (float, 0.4),
    "factor_shocks": (str, "independent"),
    "jobs": (int, None),
}


class UsageError(DataError):
    pass


# -- configuration -------------------------------------------------------------------


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment.

    Keys are the long flag names with dashes or underscores.
    """
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_").lower()
        if key not in _SETTINGS:
            raise UsageError(f"{path}:{lineno}: unknown setting {key!r}")
        out[key] = value
    return out


def resolve_settings(args: argparse.Namespace, defaults: dict | None = None) -> dict:
    """Merge defaults, the optional config file and explicit flags."""
    merged = {k: default for k, (_, default) in _SETTINGS.items()}
    merged.update(defaults or {})
    if getattr(args, "config", None):
        for key, value in read_config(args.config).items():
            conv = _SETTINGS[key][0]
            try:
                merged[key] = conv(value)
            except ValueError as exc:
                raise UsageError(f"config setting {key}: cannot parse {value!r}") from exc
    for key in _SETTINGS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _cup_config(s: dict, r: int = 1) -> CupConfig:
    if s["detrend"] not in _DETREND:
        raise UsageError(f"unknown detrend mode {s['detrend']!r}; choose from {sorted(_DETREND)}")
    try:
        kernel = KernelSpec(s["kernel"], s["bandwidth"])
        return CupConfig(r=r, max_iter=s["max_iter"], tol=s["tol"], kernel=kernel, detrend=DetrendSpec(_DETREND[s["detrend"]]))
    except DataError:
        raise
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _estimators(s: dict, default: str) -> list[str]:
    names = [e.strip().lower() for e in (s["estimator"] or default).split(",") if e.strip()]
    if not names:
        raise UsageError("at least one estimator is required")
    for e in names:
        if e not in ESTIMATORS:
            raise UsageError(f"unknown estimator {e!r}; choose from {', '.join(ESTIMATORS)}")
    return list(dict.fromkeys(names))


def _write(text: str, path) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


# -- commands ------------------------------------------------------------------------


def _result_block(res, cfg: CupConfig | None) -> dict:
    def vec(a):
        return None if a is None else [float(v) for v in np.atleast_1d(a)]

    return {
        "estimator": res.estimator,
        "beta_hat": vec(res.beta_hat),
        "se": vec(res.se),
        "t_stats": vec(res.t_stats),
        "phi_hat": vec(res.phi_hat),
        "r_used": res.r,
        "iterations": int(res.iterations),
        "converged": bool(res.converged),
        "kernel": None if cfg is None else cfg.kernel.kind,
        "bandwidth": None if cfg is None else cfg.kernel.bandwidth,
    }


def _dump_factors(prefix: str, name: str, res, panel) -> None:
    F, Lam = res.factors.F_hat, res.factors.Lambda_hat
    r = F.shape[1]
    with open(f"{prefix}{name}_F.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time"] + [f"f{j + 1}" for j in range(r)])
        for t, row in zip(panel.time_ids, F):
            w.writerow([t] + [repr(float(v)) for v in row])
    with open(f"{prefix}{name}_Lambda.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unit"] + [f"lambda{j + 1}" for j in range(r)])
        for i, row in zip(panel.unit_ids, Lam):
            w.writerow([i] + [repr(float(v)) for v in row])


def cmd_estimate(args) -> int:
    s = resolve_settings(args)
    panel = read_csv(args.input)
    names = _estimators(s, "cupfm,cupbc")
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "estimate",
        "input": str(args.input),
        "n": panel.n,
        "T": panel.T,
        "x_names": list(panel.x_names),
        "detrend": s["detrend"],
    }
    if s["r"] == "auto":
        ic = select_r(panel, r_max=s["r_max"], config=_cup_config(s))
        r = ic.r_hat
        report["factor_selection"] = ic.to_dict()
    else:
        try:
            r = int(s["r"])
        except ValueError as exc:
            raise UsageError(f"--r must be 'auto' or a positive integer, got {s['r']!r}") from exc
        if r < 1:
            raise UsageError(f"--r must be at least 1, got {r}")
    cfg = _cup_config(s, r)
    results = {}
    for name in names:
        if name in _NEEDS_CONFIG:
            res = _FITTERS[name](panel, cfg)
            results[name] = _result_block(res, cfg)
            if args.dump_factors:
                _dump_factors(args.dump_factors, name, res, panel)
        else:
            results[name] = _result_block(_FITTERS[name](panel), None)
    report["results"] = results
    _write(dumps(report), args.output)
    return EXIT_OK


def cmd_simulate(args) -> int:
    # the simulated design has no deterministic terms
    s = resolve_settings(args, {"detrend": "none"})
    names = _estimators(s, "lsdv,2sfm,cupbc,cupfm")
    try:
        dgp = DgpConfig(
            n=s["n"], T=s["t"], c=s["c"], sigma21=s["s21"], sigma31=s["s31"], sigma32=s["s32"],
            seed=s["seed"], factor_shocks=s["factor_shocks"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if s["reps"] < 1:
        raise UsageError("--reps must be at least 1")
    summary = run_mc(dgp, reps=s["reps"], estimators=names, base_seed=s["seed"], cup_config=_cup_config(s), n_jobs=s["jobs"])
    if args.output:
        _write(summary.to_json(), args.output)
        sys.stdout.write(summary.table())
    elif args.table:
        sys.stdout.write(summary.table())
    else:
        sys.stdout.write(summary.to_json())
    if all(est.n_ok == 0 for est in summary.estimators.values()):
        print("error: every replication failed", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_select_factors(args) -> int:
    s = resolve_settings(args)
    panel = read_csv(args.input)
    ic = select_r(panel, r_max=s["r_max"], config=_cup_config(s), fast=args.fast)
    report = {"schema_version": SCHEMA_VERSION, "command": "select-factors", "n": panel.n, "T": panel.T, **ic.to_dict()}
    _write(dumps(report), args.output)
    return EXIT_OK


# -- parser --------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value file; flags take precedence")
    p.add_argument("--kernel", choices=["bartlett", "parzen", "qs"], default=None)
    p.add_argument("--bandwidth", type=float, default=None, help="kernel bandwidth K (default 5)")
    p.add_argument("--detrend", choices=sorted(_DETREND), default=None, help="deterministic terms to remove (estimate/select-factors default demean, simulate none)")
    p.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--output", "-o", default=None, help="write the JSON report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="panelcup", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="fit slope estimators to a panel CSV")
    p.add_argument("input", help="long-format CSV with columns unit,time,y,x1,...")
    p.add_argument("--estimator", default=None, help=f"comma-separated subset of {','.join(ESTIMATORS)} (default cupfm,cupbc)")
    p.add_argument("--r", default=None, help="number of common trends, or 'auto' (default 1)")
    p.add_argument("--r-max", dest="r_max", type=int, default=None, help="largest r tried by --r auto (default 4)")
    p.add_argument("--dump-factors", dest="dump_factors", metavar="PREFIX", default=None, help="write F_hat and Lambda_hat CSVs")
    _common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", help="Monte Carlo study on the built-in design")
    p.add_argument("--estimator", default=None, help="comma-separated estimators (default lsdv,2sfm,cupbc,cupfm)")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--t", "--T", dest="t", type=int, default=None)
    p.add_argument("--c", type=float, default=None, help="scale of the common component (default 5)")
    p.add_argument("--s21", type=float, default=None, help="corr(u, e) (default 0.2)")
    p.add_argument("--s31", type=float, default=None, help="corr(u, h) (default 0.8)")
    p.add_argument("--s32", type=float, default=None, help="corr(e, h) (default 0.4)")
    p.add_argument("--factor-shocks", dest="factor_shocks", choices=["independent", "shared"], default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: PANELCUP_THREADS or 1)")
    p.add_argument("--table", action="store_true", help="print the text table instead of JSON")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("select-factors", help="choose the number of common trends")
    p.add_argument("input")
    p.add_argument("--r-max", dest="r_max", type=int, default=None)
    p.add_argument("--fast", action="store_true", help="reuse one slope fit for every candidate r")
    _common(p)
    p.set_defaults(func=cmd_select_factors)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_DATA
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except PanelCupError as exc:  # pragma: no cover - every error is one of the two kinds
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

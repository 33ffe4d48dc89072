"""Command-line entry point: ``macrosup analyze | sweep | validate``.

Exit codes: 0 ok, 1 validation failure, 2 usage error, 3 size beyond the
dense-mode limits.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__, observables, qindex, report, validation
from .factorize import DEFAULT_TOL
from .qstate import (
    MIXED_FAMILIES,
    PURE_FAMILIES,
    InfeasibleSize,
    StateError,
    is_mixed_family,
    make_mixed,
    make_state,
)
from .scaling import fit_power_law, parse_grid

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2, 3

DEFAULTS = {
    "state": None,
    "n": None,
    "k": None,
    "n_grid": None,
    "measures": "p,entropy,concurrence,census,eb",
    "measure": "p",
    "eps": 0.1,
    "delta": 0.5,
    "threshold": 0.1,
    "tol": DEFAULT_TOL,
    "backaction_tol": 1e-6,
    "sep_constant": qindex.SEP_CONSTANT,
    "le_grid": 8,
    "site": None,
    "seed": 0,
    "starts": qindex.OptimizerSettings.starts,
    "max_iters": qindex.OptimizerSettings.max_iters,
    "opt_tol": qindex.OptimizerSettings.tol,
    "axis_samples": qindex.OptimizerSettings.axis_samples,
    "workers": 1,
    "out": None,
    "csv": None,
    "format": "json",
    "corpus_size": 1000,
    "inject_fault": False,
}

TYPES = {
    "n": int, "k": int, "eps": float, "delta": float, "threshold": float, "tol": float,
    "backaction_tol": float, "sep_constant": float, "le_grid": int, "site": int, "seed": int,
    "starts": int, "max_iters": int, "opt_tol": float, "axis_samples": int, "workers": int,
    "corpus_size": int,
}


class UsageError(Exception):
    pass


def read_config(path: str) -> dict:
    """``key = value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{no}: expected 'key = value'")
        key = key.strip().replace("-", "_")
        if key not in DEFAULTS:
            raise UsageError(f"{path}:{no}: unknown key {key!r}")
        out[key] = value.strip()
    return out


def _coerce(key, value):
    if value is None:
        return None
    if key == "inject_fault" and isinstance(value, str):
        return value.lower() in ("1", "true", "yes", "on")
    try:
        return TYPES[key](value) if key in TYPES else value
    except ValueError as exc:
        raise UsageError(f"bad value for {key}: {value!r}") from exc


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults < config file < command-line flags."""
    merged = dict(DEFAULTS)
    if getattr(args, "config", None):
        merged.update(read_config(args.config))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None and val is not False:
            merged[key] = val
    return {k: _coerce(k, v) for k, v in merged.items()}


def _settings(opts) -> qindex.OptimizerSettings:
    return qindex.OptimizerSettings(opts["starts"], opts["max_iters"], opts["opt_tol"], opts["axis_samples"])


def _params(opts) -> dict:
    return {"k": opts["k"]} if opts["k"] is not None else {}


def _check_family(opts):
    fam = opts["state"]
    if fam is None:
        raise UsageError("--state is required")
    if fam not in PURE_FAMILIES + MIXED_FAMILIES:
        raise UsageError(f"unknown state family {fam!r}; choose from {', '.join(PURE_FAMILIES + MIXED_FAMILIES)}")
    return fam


def _build(fam, n, opts):
    if is_mixed_family(fam):
        return make_mixed(fam, n, _params(opts), opts["seed"])
    return make_state(fam, n, _params(opts), opts["seed"])


def _emit(text: str, path) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _dump(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _flatten(prefix, obj, rows):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else k, v, rows)
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}[{i}]", v, rows)
    else:
        rows.append((prefix, obj))


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def cmd_analyze(opts) -> int:
    fam = _check_family(opts)
    if opts["n"] is None:
        raise UsageError("--n is required")
    if fam == "random" and opts["seed"] is None:
        raise UsageError("--seed is required for random states")
    measures = [m.strip() for m in opts["measures"].split(",") if m.strip()]
    if not measures:
        raise UsageError("--measures is empty")
    bad = [m for m in measures if m not in report.ALL_MEASURES]
    if bad:
        raise UsageError(f"unknown measures {bad}; choose from {', '.join(report.ALL_MEASURES)}")
    n = opts["n"]
    # size refusals come before building a 2**n state
    if n > report.MAX_PURE_SITES and not is_mixed_family(fam):
        raise InfeasibleSize(f"pure states limited to N <= {report.MAX_PURE_SITES}, got {n}")
    if is_mixed_family(fam) and n > qindex.MAX_MIXED_Q:
        raise InfeasibleSize(f"mixed states limited to N <= {qindex.MAX_MIXED_Q}, got {n}")
    state = _build(fam, n, opts)
    ropts = {
        **{k: opts[k] for k in ("eps", "delta", "threshold", "tol", "backaction_tol", "sep_constant", "le_grid", "seed")},
        "optimizer": _settings(opts),
        "params": _params(opts),
        "sites": [opts["site"]] if opts["site"] is not None else None,
    }
    if opts["site"] is not None and not 1 <= opts["site"] <= n:
        raise UsageError(f"--site must lie in 1..{n}")
    doc = report.build_analyze(state, fam, measures, ropts)
    if opts["format"] == "csv":
        rows = []
        _flatten("", doc["results"], rows)
        _emit(_csv(["key", "value"], rows), opts["out"])
    else:
        _emit(_dump(doc), opts["out"])
    return EXIT_OK


def sweep_point(job):
    """Value of one grid point; module-level so a process pool can pickle it."""
    fam, n, measure, params, seed, settings = job
    if measure == "p":
        return observables.max_fluctuation(make_state(fam, n, params, seed)).value, True
    if is_mixed_family(fam):
        state = make_mixed(fam, n, params, seed)
    else:
        state = make_state(fam, n, params, seed)
    res = qindex.max_double_commutator(state, settings, seed)
    return max(float(n), res.value), res.converged


def cmd_sweep(opts) -> int:
    fam = _check_family(opts)
    if opts["n_grid"] is None:
        raise UsageError("--n-grid is required")
    try:
        grid = parse_grid(opts["n_grid"])
    except ValueError as exc:
        raise UsageError(f"bad --n-grid {opts['n_grid']!r}: {exc}") from exc
    if len(grid) < 3:
        raise UsageError("--n-grid needs at least three sizes")
    measure = opts["measure"]
    if measure not in ("p", "q"):
        raise UsageError("--measure must be p or q")
    if measure == "p" and is_mixed_family(fam):
        raise UsageError("index p is defined for pure states only")
    if fam == "random" and opts["seed"] is None:
        raise UsageError("--seed is required for random states")
    for n in grid:
        if measure == "q":
            qindex.check_q_size(fam, n)
        elif n > report.MAX_PURE_SITES:
            raise InfeasibleSize(f"pure states limited to N <= {report.MAX_PURE_SITES}, got {n}")
    settings = _settings(opts)
    jobs = [(fam, n, measure, _params(opts), opts["seed"], settings) for n in grid]
    if opts["workers"] > 1:
        with ProcessPoolExecutor(max_workers=opts["workers"]) as pool:
            points = list(pool.map(sweep_point, jobs))
    else:
        points = [sweep_point(j) for j in jobs]
    values = [v for v, _ in points]
    flags = [f"N={n}: optimizer budget exhausted" for n, (_, ok) in zip(grid, points) if not ok]
    fit = fit_power_law(fam, grid, values, measure, flags)
    table = _csv(["n", "value", "measure"], [(n, repr(float(v)), measure) for n, v in zip(grid, values)])
    if opts["format"] == "csv":
        _emit(table, opts["out"])
    else:
        ropts = {k: opts[k] for k in ("eps", "delta", "threshold", "tol", "backaction_tol", "sep_constant", "le_grid")}
        ropts["optimizer"] = settings
        _emit(_dump(report.build_sweep(fit, opts["seed"], ropts)), opts["out"])
    if opts["csv"]:
        Path(opts["csv"]).write_text(table)
    return EXIT_OK


def cmd_validate(opts) -> int:
    if opts["corpus_size"] < 1:
        raise UsageError("--corpus-size must be positive")
    results = validation.run_all(opts["corpus_size"], opts["seed"], opts["inject_fault"], opts["workers"])
    width = max(len(r.name) for r in results)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status}  {r.name:<{width}}  checked={r.checked:<6d} violations={r.violations:<6d} "
              f"worst_excess={r.worst_excess:.3e}  ({r.seconds:.2f}s)")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} properties passed")
    if opts["out"]:
        doc = report.build_validate(results, opts["corpus_size"], opts["seed"], opts["inject_fault"])
        Path(opts["out"]).write_text(_dump(doc))
    return EXIT_FAIL if failed else EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="file of 'key = value' lines; flags override it")
    p.add_argument("--seed", type=int, help="RNG seed (default 0)")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--workers", type=int, help="process pool size (default 1)")


def _add_state(p: argparse.ArgumentParser) -> None:
    p.add_argument("--state", help=f"family: {', '.join(PURE_FAMILIES + MIXED_FAMILIES)}")
    p.add_argument("--k", type=int, help="Dicke excitation number (default n // 2)")
    p.add_argument("--eps", type=float, help="entropy threshold in bits for E_B (default 0.1)")
    p.add_argument("--delta", type=float, help="S1 size fraction for E_B (default 0.5)")
    p.add_argument("--threshold", type=float, help="census threshold (default 0.1)")
    p.add_argument("--tol", type=float, help="factorization purity tolerance (default 1e-8)")
    p.add_argument("--format", choices=("json", "csv"))
    opt = p.add_argument_group("q optimizer")
    opt.add_argument("--starts", type=int)
    opt.add_argument("--max-iters", type=int)
    opt.add_argument("--opt-tol", type=float)
    opt.add_argument("--axis-samples", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="macrosup", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="measures for one state")
    _add_common(a)
    _add_state(a)
    a.add_argument("--n", type=int, help="number of sites")
    a.add_argument("--measures", help=f"comma list of {', '.join(report.ALL_MEASURES)}")
    a.add_argument("--site", type=int, help="backaction site (default: every site)")
    a.add_argument("--backaction-tol", type=float, help="1-norm change counted as affected (default 1e-6)")
    a.add_argument("--sep-constant", type=float, help="separable double-commutator constant")
    a.add_argument("--le-grid", type=int, help="angular grid for localizable entanglement (>= 8)")

    s = sub.add_parser("sweep", help="index p or q across an N grid")
    _add_common(s)
    _add_state(s)
    s.add_argument("--n-grid", help="start:stop:step (inclusive) or a comma list")
    s.add_argument("--measure", help="p or q")
    s.add_argument("--csv", help="also write the (n, value, measure) table here")

    v = sub.add_parser("validate", help="run the property suite")
    _add_common(v)
    v.add_argument("--corpus-size", type=int, help="random corpus size (default 1000)")
    v.add_argument("--inject-fault", action="store_true", help="skew every tolerance so checks fail")
    return parser


COMMANDS = {"analyze": cmd_analyze, "sweep": cmd_sweep, "validate": cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        opts = resolve(args)
        return COMMANDS[args.command](opts)
    except UsageError as exc:
        print(f"macrosup: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleSize as exc:
        print(f"macrosup: refused: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (StateError, ValueError) as exc:
        print(f"macrosup: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""``compbf`` command line: CCDF curves, efficiency tables, K optimisation, validation.

Exit codes: 0 success, 1 usage error, 2 domain error, 3 validation failure.
Every command writes CSV files plus ``manifest.json`` into ``--out-dir``.
Thresholds are given and reported in dB (``gamma_db = 10 log10 gamma``).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from ._io import atomic_write_text
from .analytic import SERIES_MAX_ORDER, ClusterConfig, analytic_curve, db_to_linear
from .errors import CompbfError
from .montecarlo import McExperiment, ccdf_csv_text, default_gamma_grid_db, run_experiment
from .spectral import optimize_k, table1, table2
from .validation import CHECKS, run_check

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_VALIDATION = 0, 1, 2, 3
CSV_VERSION = "compbf-csv v1"

FIG_PRESETS = {
    # (K, nt, delta1) triples, ccdf mode and curve kinds
    2: ([(1, nt, None) for nt in (1, 2, 3, 4)], "marginal",
        ["exact", "upper_bound", "lower_bound"]),
    3: ([(2, 2, 0.5), (2, 2, 0.8), (4, 4, 0.25), (4, 4, 1 / 3), (1, 2, None)], "conditional",
        ["exact"]),
    4: (None, "marginal", ["approximation", "empirical"]),
    8: (None, "grid", ["empirical"]),
}
FIG_DEFAULT_K = {4: [1, 2, 4, 8], 8: [1, 2, 4]}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _ints(text: str) -> List[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    return vals


def _floats(text: str) -> List[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    return vals


def _words(text: str) -> List[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


class Outputs:
    """Tracks files written by one command so a failure can remove them."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.paths: List[Path] = []

    def write(self, name: str, text: str) -> Path:
        p = atomic_write_text(self.out_dir / name, text)
        self.paths.append(p)
        return p

    def rollback(self):
        for p in self.paths:
            p.unlink(missing_ok=True)
        self.paths.clear()


def _table_csv(header: List[str], rows: List[list], kind: str) -> str:
    lines = [f"# {CSV_VERSION}", f"# table={kind}", ",".join(header)]
    for row in rows:
        lines.append(",".join("" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating))
                                                    else str(v)) for v in row))
    return "\n".join(lines) + "\n"


def _manifest(args, outputs: Outputs, command: str) -> dict:
    params = {k: v for k, v in vars(args).items() if k not in ("func", "command")}
    params["out_dir"] = str(params.get("out_dir"))
    return {
        "command": command,
        "parameters": params,
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "outputs": sorted(p.name for p in outputs.paths),
    }


def _curve_name(K, nt, beta, delta1, mode, kind):
    d = "" if delta1 is None else f"_d{delta1:.4g}"
    return f"ccdf_{mode}_K{K}_nt{nt}_b{beta:g}{d}_{kind}.csv"


def cmd_ccdf(args, out: Outputs) -> int:
    mode, kinds = args.mode, args.kinds
    if args.fig is not None:
        triples, fig_mode, fig_kinds = FIG_PRESETS[args.fig]
        mode = fig_mode
        kinds = kinds or fig_kinds
        if triples is None:
            ks = args.k or FIG_DEFAULT_K[args.fig]
            triples = [(K, K, None) for K in ks]
    else:
        if not args.k:
            raise UsageError("--k is required without --fig")
        mode = mode or "marginal"
        nts = args.nt or [None]
        deltas = args.delta1 or [None]
        triples = [(K, nt if nt is not None else K, d) for K in args.k for nt in nts for d in deltas]
    if mode not in ("marginal", "conditional", "grid"):
        raise UsageError(f"ccdf --mode must be marginal, conditional or grid, got {mode!r}")
    if kinds is None:
        kinds = {"marginal": ["upper_bound", "lower_bound", "approximation", "empirical"],
                 "conditional": ["exact", "upper_bound", "lower_bound", "empirical"],
                 "grid": ["empirical"]}[mode]
    grid_db = default_gamma_grid_db() if args.gamma_db is None else np.asarray(args.gamma_db)
    gamma = db_to_linear(grid_db)
    for i, (K, nt, d) in enumerate(triples):
        if mode == "conditional" and d is None and K > 1:
            raise UsageError("conditional mode needs --delta1")
        cfg = ClusterConfig(K, nt, args.beta, delta1=d if mode == "conditional" else None)
        for kind in kinds:
            if (kind == "exact" and args.kinds is None and args.fig is None
                    and nt - K > SERIES_MAX_ORDER):
                continue
            name = _curve_name(K, nt, args.beta, cfg.delta1 if mode == "conditional" else None,
                               mode, kind)
            if kind == "empirical":
                mc_mode = {"marginal": "ppp", "grid": "grid"}.get(mode, "ppp_conditional_delta1")
                if mc_mode == "ppp_conditional_delta1" and K == 1:
                    mc_mode = "ppp"
                exp = McExperiment(mc_mode, cfg, args.trials, grid_db, lam=args.lam,
                                   seed=args.seed + i,
                                   sampler="ordered" if mc_mode == "ppp_conditional_delta1" else "disc")
                curve = run_experiment(exp)
                out.write(name, ccdf_csv_text(curve))
                out.write(name[:-4] + ".json",
                          json.dumps(exp.to_dict(), indent=2, sort_keys=True) + "\n")
            elif mode == "grid":
                raise UsageError("grid mode only has empirical curves")
            else:
                out.write(name, ccdf_csv_text(analytic_curve(cfg, gamma, kind)))
    return EXIT_OK


def cmd_tables(args, out: Outputs) -> int:
    header = ["row", "K", "delta1", "alpha", "C", "gain_vs_K1_percent", "reference", "rel_err"]
    if args.which == 1:
        rows = table1(args.beta)
    elif args.which == 2:
        rows = table2(args.nt or 4, args.beta)
    else:
        raise UsageError(f"--which must be 1 or 2, got {args.which}")
    data = [[r.label, r.K, r.delta1, r.alpha, r.C, r.gain_vs_K1_percent, r.reference, r.rel_err]
            for r in rows]
    out.write(f"table{args.which}.csv", _table_csv(header, data, f"table{args.which}"))
    for r in rows:
        print(f"{r.label:>14} K={r.K} C={r.C:.4f} ref={r.reference:.4f} rel_err={r.rel_err:.2e}")
    return EXIT_OK


OPT_MODE_NAMES = {"fixed-nt": "fixed_nt", "nt-equals-k": "nt_equals_k",
                  "fixed-geometry": "fixed_geometry"}


def cmd_optimize(args, out: Outputs) -> int:
    if not args.coherence:
        raise UsageError("--coherence needs at least one ratio")
    mode = OPT_MODE_NAMES.get(args.mode or "nt-equals-k")
    if mode is None:
        raise UsageError(f"optimize --mode must be one of {sorted(OPT_MODE_NAMES)}")
    if mode == "fixed_nt" and not args.nt:
        raise UsageError("fixed-nt mode needs --nt")
    if mode == "fixed_geometry" and not args.c:
        raise UsageError("fixed-geometry mode needs --c")
    cs = args.c if mode == "fixed_geometry" else [None]
    nt = args.nt[0] if args.nt else None
    header = ["mode", "c", "ratio", "K", "alpha", "C", "is_k_star"]
    data = []
    for c in cs:
        for ratio in args.coherence:
            res = optimize_k(mode, ratio, nt=nt, beta=args.beta, c=c, k_max=args.kmax)
            for K, v in sorted(res.objective.items()):
                data.append([mode, c, ratio, K, res.alphas[K], v, int(K == res.k_star)])
            tag = "" if c is None else f" c={c:g}"
            print(f"{mode}{tag} Lb/eta={ratio:g}: K*={res.k_star} C={res.best:.4f}")
    out.write("optimize.csv", _table_csv(header, data, "optimize"))
    return EXIT_OK


def cmd_validate(args, out: Outputs) -> int:
    names = args.only or list(CHECKS)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise UsageError(f"unknown checks {unknown}; choose from {sorted(CHECKS)}")
    results = []
    for n in names:
        res = run_check(n)
        print(res.line(), flush=True)
        results.append(res)
    data = [[r.name, int(r.passed), r.detail.replace(",", ";"), r.seconds] for r in results]
    out.write("validation.csv", _table_csv(["check", "passed", "detail", "seconds"], data, "validation"))
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"FAILED: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="compbf", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--beta", type=float, default=4.0, help="pathloss exponent (> 2)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out-dir", type=Path, default=Path("out"))

    sp = sub.add_parser("ccdf", help="SIR CCDF curves")
    common(sp)
    sp.add_argument("--fig", type=int, choices=sorted(FIG_PRESETS))
    sp.add_argument("--k", type=_ints)
    sp.add_argument("--nt", type=_ints)
    sp.add_argument("--delta1", type=_floats)
    sp.add_argument("--mode", help="marginal, conditional or grid")
    sp.add_argument("--kinds", type=_words)
    sp.add_argument("--trials", type=int, default=100_000)
    sp.add_argument("--lambda", dest="lam", type=float, default=1.0)
    sp.add_argument("--gamma-db", type=_floats)
    sp.set_defaults(func=cmd_ccdf)

    sp = sub.add_parser("tables", help="spectral-efficiency tables")
    common(sp)
    sp.add_argument("--which", type=int, required=True)
    sp.add_argument("--nt", type=int)
    sp.set_defaults(func=cmd_tables)

    sp = sub.add_parser("optimize", help="optimal cluster cardinality")
    common(sp)
    sp.add_argument("--mode", help="fixed-nt, nt-equals-k or fixed-geometry")
    sp.add_argument("--coherence", type=_floats, required=True, help="L_b/eta ratios")
    sp.add_argument("--nt", type=_ints)
    sp.add_argument("--c", type=_floats)
    sp.add_argument("--kmax", type=int)
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("validate", help="run the reference checks")
    common(sp)
    sp.add_argument("--only", type=_words)
    sp.set_defaults(func=cmd_validate)
    return p


def argv_from_manifest(manifest: dict) -> List[str]:
    """Command line that reproduces the run recorded in ``manifest``."""
    argv = [manifest["command"]]
    for key, val in sorted(manifest["parameters"].items()):
        if val is None:
            continue
        flag = "--lambda" if key == "lam" else "--" + key.replace("_", "-")
        if isinstance(val, list):
            val = ",".join(repr(v) if isinstance(v, float) else str(v) for v in val)
        elif isinstance(val, float):
            val = repr(val)
        # "--flag=value" keeps negative numbers from parsing as options
        argv.append(f"{flag}={val}")
    return argv


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"compbf: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.command is None:
        print("compbf: usage error: choose a command (ccdf, tables, optimize, validate)",
              file=sys.stderr)
        return EXIT_USAGE
    out = Outputs(args.out_dir)
    try:
        code = args.func(args, out)
        if out.paths:
            manifest = _manifest(args, out, args.command)
            out.write("manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return code
    except UsageError as exc:
        out.rollback()
        print(f"compbf: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CompbfError, ValueError) as exc:
        out.rollback()
        print(f"compbf: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Command-line entry points.

Exit codes: 0 success, 1 usage, 2 parse error, 3 verification failure,
4 size limit exceeded.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench
from .certificates import (
    FIX_THRESHOLD,
    certify,
    extend_to_full,
    fixed_vertices,
    fixed_vertices_by_threshold,
)
from .decomposition import combine
from .energy import evaluate_energy, read_instance, write_instance
from .errors import ParseError, SizeLimitError, TrwError, VerificationError
from .oracle import DEFAULT_LIMIT, brute_solve, constrained_min
from .trw import SolverConfig, run, strong_agreement, wta_local_sets

REPORT_HEADER = "# trwmap solve report v1"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _solver_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--decomp", choices=("chain", "edge"), default="chain")
    p.add_argument("--stall-window", type=int, default=10)
    p.add_argument("--max-passes", type=int, default=1000)
    p.add_argument("--fix-threshold", type=float, default=FIX_THRESHOLD)


def _solver_config(args) -> SolverConfig:
    return SolverConfig(decomposition=args.decomp, stall_window=args.stall_window, max_passes=args.max_passes)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trwmap", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a random instance file")
    p.add_argument("--topology", choices=("grid", "complete"), default="grid")
    p.add_argument("--n", type=int, default=4, help="grid side or complete-graph order")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--sigma-d", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("solve", help="run message passing and write a fixed-point report")
    p.add_argument("instance")
    _solver_args(p)
    p.add_argument("--oracle-limit", type=int, default=DEFAULT_LIMIT)
    p.add_argument("--out", help="report path (default: stdout only)")

    p = sub.add_parser("certify", help="emit a certificate; nonzero exit on any FAIL")
    p.add_argument("instance")
    _solver_args(p)
    p.add_argument("--oracle-limit", type=int, default=16)
    p.add_argument("--out")

    p = sub.add_parser("oracle-check", help="check a solve report against brute force")
    p.add_argument("instance")
    p.add_argument("report")
    p.add_argument("--oracle-limit", type=int, default=DEFAULT_LIMIT)

    p = sub.add_parser("experiment", help="run a p_cor sweep and write CSV")
    p.add_argument("--panel", choices=("a", "b", "c", "d"), help="use the axes of one figure panel")
    p.add_argument("--full-size", action="store_true", help="full-scale sizes (up to 128) for --panel")
    p.add_argument("--topology", choices=("grid", "complete"), default="grid")
    p.add_argument("--n", type=_ints, default=(4, 8, 16), help="comma-separated sizes")
    p.add_argument("--alpha", type=_floats, default=(0.5,), help="comma-separated values")
    p.add_argument("--sigma-d", type=_floats, default=bench.GRID_SIGMA_D, help="comma-separated values")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-timing", action="store_true", help="write wall_ms as 0 for byte-stable output")
    _solver_args(p)
    p.add_argument("--out", required=True)
    return parser


def cmd_generate(args) -> int:
    degree = bench.node_degree(args.topology, args.n)
    cfg = bench.GeneratorConfig(args.topology, args.n, args.alpha, args.sigma_d / degree, args.seed)
    write_instance(bench.generate(cfg), args.out)
    return 0


def _solve_report(path, model, report, partial, labeling) -> str:
    lines = [REPORT_HEADER, f"instance {path}", f"n {model.n}", f"bound {report.bound!r}",
             f"passes {report.passes_run}", f"terminated_by {report.terminated_by}",
             f"wta {int(report.wta_reached)}", f"fixed_count {partial.fixed_count}"]
    lines += [f"fix {s} {j}" for s, j in partial.fixed.items()]
    if labeling is not None:
        lines.append("labeling " + "".join(str(int(v)) for v in labeling))
        lines.append(f"energy {evaluate_energy(model, labeling)!r}")
    return "\n".join(lines) + "\n"


def cmd_solve(args) -> int:
    model = read_instance(args.instance)
    collection, state, report = run(model, config=_solver_config(args))
    d = state.decomposition
    partial = fixed_vertices_by_threshold(combine(collection, d), args.fix_threshold)
    labeling = None
    if report.wta_reached:
        chi = wta_local_sets(collection, d, model.graph)
        labeling = strong_agreement(collection, d, model.graph, chi)
        if labeling is None:
            try:
                labeling = extend_to_full(model, collection, d, fixed_vertices(chi), args.oracle_limit)
            except SizeLimitError as exc:
                logging.getLogger(__name__).info("no full labeling: %s", exc)
    print(f"bound {report.bound!r} passes {report.passes_run} wta {report.wta_reached} "
          f"fixed {partial.fixed_count}/{model.n}")
    text = _solve_report(args.instance, model, report, partial, labeling)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    return 0


def cmd_certify(args) -> int:
    model = read_instance(args.instance)
    collection, state, report = run(model, config=_solver_config(args))
    chi = wta_local_sets(collection, state.decomposition, model.graph) if report.wta_reached else None
    cert = certify(model, collection, state.decomposition, chi, oracle_limit=args.oracle_limit)
    text = cert.report()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0 if cert.ok else VerificationError.exit_code


def read_solve_report(path) -> dict:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != REPORT_HEADER:
        raise ParseError(f"expected '{REPORT_HEADER}'", 1)
    out: dict = {"fixed": {}}
    for lineno, line in enumerate(lines[1:], start=2):
        key, _, value = line.partition(" ")
        try:
            if key == "fix":
                s, j = value.split()
                out["fixed"][int(s)] = int(j)
            elif key in ("bound", "energy"):
                out[key] = float(value)
            elif key in ("n", "passes", "wta", "fixed_count"):
                out[key] = int(value)
            elif key == "labeling":
                out[key] = np.array([int(ch) for ch in value], dtype=np.int64)
            else:
                out[key] = value
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    if "bound" not in out:
        raise ParseError("report has no bound line")
    return out


def cmd_oracle_check(args) -> int:
    model = read_instance(args.instance)
    rep = read_solve_report(args.report)
    oracle = brute_solve(model, args.oracle_limit)
    checks = [("bound below minimum", rep["bound"] <= oracle.min_value + 1e-9)]
    if rep.get("n", model.n) != model.n or any(not 0 <= s < model.n for s in rep["fixed"]):
        checks.append(("report matches instance", False))
    else:
        cmin = constrained_min(model, rep["fixed"], args.oracle_limit)
        checks.append(("fixed labels persistent", cmin <= oracle.min_value + 1e-9))
    if "labeling" in rep:
        x = rep["labeling"]
        ok = len(x) == model.n and evaluate_energy(model, x) <= oracle.min_value + 1e-7
        checks.append(("labeling optimal", ok))
        if "energy" in rep and len(x) == model.n:
            checks.append(("reported energy", abs(rep["energy"] - evaluate_energy(model, x)) <= 1e-9))
    print(f"oracle min {oracle.min_value!r} optima {len(oracle.optima)}")
    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return 0 if all(ok for _, ok in checks) else VerificationError.exit_code


def cmd_experiment(args) -> int:
    if args.panel:
        axes = bench.panel_axes(args.panel, args.full_size, args.trials, args.seed)
    else:
        axes = bench.SweepAxes(args.topology, args.n, args.alpha, args.sigma_d, args.trials, args.seed)

    def progress(cfg, batch):
        logging.getLogger(__name__).info("%s N=%d alpha=%.2f sigma*d=%.2f p_cor=%.4f", cfg.topology,
                                         cfg.N, cfg.alpha, cfg.sigma * cfg.degree, bench.mean_p_cor(batch))

    records = bench.sweep(axes, _solver_config(args), args.fix_threshold, timing=not args.no_timing,
                          progress=progress)
    bench.write_csv(records, args.out)
    print(f"wrote {len(records)} trials to {args.out}")
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "solve": cmd_solve,
    "certify": cmd_certify,
    "oracle-check": cmd_oracle_check,
    "experiment": cmd_experiment,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except TrwError as exc:
        print(f"trwmap: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, OSError) as exc:
        print(f"trwmap: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

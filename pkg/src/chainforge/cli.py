"""Command-line driver: transform, generate, simulate, sweep, report, tables."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .codegen import emit_benchmark_sources
from .harness import CostModel, execute_case, run_case, sweep
from .report import (
    MissingBaseline,
    ResultRow,
    normalize,
    render_instruction_table,
    render_size_table,
    rows_from_csv,
    rows_to_csv,
    rows_to_table,
)
from .rewrite import DEFAULT_SUFFIX, transform_files
from .scenarios import DenseSpec, LinearSpec


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chainforge",
        description="pointerchain directive rewriter and deep-copy transfer simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform", help="rewrite pointerchain pragmas in source files")
    p.add_argument("paths", nargs="+", help="source files or directories")
    p.add_argument("--in-place", action="store_true")
    p.add_argument("--suffix", default=DEFAULT_SUFFIX,
                   help=f"output suffix (default {DEFAULT_SUFFIX})")

    p = sub.add_parser("generate", help="emit the linear benchmark source corpus")
    p.add_argument("--max-k", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("simulate", help="run one benchmark case")
    p.add_argument("--scenario", choices=("linear", "dense"), required=True)
    p.add_argument("--scheme", choices=("uvm", "marshalling", "pointerchain", "naive"),
                   required=True)
    p.add_argument("--layout", choices=("allinit_allused", "allinit_LLused",
                                        "LLinit_LLused"), default="allinit_allused")
    p.add_argument("--k", type=int, help="levels (linear scenario)")
    p.add_argument("--q", type=int, help="children per node (dense scenario)")
    p.add_argument("--n", type=int, required=True, help="elements per array")
    p.add_argument("--depth", type=int, default=3, help="dense tree depth")
    p.add_argument("--config", help="cost-model key=value file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-iters", type=int, default=3)
    p.add_argument("--dump-log", help="write the transfer log to this path")

    p = sub.add_parser("sweep", help="run a grid of cases into a results CSV")
    p.add_argument("--grid", required=True,
                   help="CSV with header scenario,scheme,layout,k_or_q,n")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="cost-model key=value file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-iters", type=int, default=3)

    p = sub.add_parser("report", help="normalize and render a results CSV")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--normalize", choices=("uvm",), default=None,
                   help="attach ratios against this baseline scheme")
    p.add_argument("--format", choices=("csv", "table"), default="table")
    p.add_argument("--out", help="write instead of printing")

    p = sub.add_parser("tables", help="print the size / instruction tables")
    p.add_argument("--which", required=True,
                   choices=("size-linear", "size-dense", "instr-linear", "instr-dense"))
    p.add_argument("--format", choices=("csv", "table"), default="table")

    return parser


def _make_spec(args):
    if args.scenario == "linear":
        if args.k is None:
            raise SystemExit("--k is required for the linear scenario")
        return LinearSpec(args.k, args.n, args.layout)
    if args.q is None:
        raise SystemExit("--q is required for the dense scenario")
    return DenseSpec(args.q, args.n, args.depth)


def _cost_model(args) -> CostModel:
    return CostModel.from_file(args.config) if args.config else CostModel()


def _cmd_transform(args) -> int:
    reports = transform_files(args.paths, in_place=args.in_place, suffix=args.suffix)
    failed = 0
    for r in reports:
        if r.ok:
            print(f"{r.path}: {r.declarations} declarations, {r.regions} regions, "
                  f"{r.replacements} replacements -> {r.out_path}")
        else:
            failed += 1
            print(f"{r.path}: FAILED ({r.error})")
    return 1 if failed else 0


def _cmd_generate(args) -> int:
    manifest = emit_benchmark_sources(args.max_k, args.out)
    for entry in manifest:
        print(entry.line())
    print(f"{len(manifest)} files written to {args.out}", file=sys.stderr)
    return 0


def _parse_grid(path) -> list[tuple]:
    cases = []
    lines = Path(path).read_text().strip().split("\n")
    if not lines or lines[0] != "scenario,scheme,layout,k_or_q,n":
        raise SystemExit("grid file needs header scenario,scheme,layout,k_or_q,n")
    for line in lines[1:]:
        scenario, scheme, layout, k_or_q, n = [f.strip() for f in line.split(",")]
        if scenario == "linear":
            spec = LinearSpec(int(k_or_q), int(n), layout)
        else:
            spec = DenseSpec(int(k_or_q), int(n))
        cases.append((spec, scheme))
    return cases


def _cmd_simulate(args) -> int:
    spec = _make_spec(args)
    cm = _cost_model(args)
    metrics = run_case(spec, args.scheme, cm, seed=args.seed,
                       min_iters=args.min_iters)
    sys.stdout.write(rows_to_csv([ResultRow.from_metrics(metrics)]))
    if args.dump_log:
        _, machine = execute_case(spec, args.scheme, cm, seed=args.seed)
        Path(args.dump_log).write_text(machine.log.dump() + "\n")
    return 0


def _cmd_sweep(args) -> int:
    cases = _parse_grid(args.grid)
    metrics = sweep(cases, _cost_model(args), seed=args.seed,
                    min_iters=args.min_iters)
    rows = normalize([ResultRow.from_metrics(m) for m in metrics], strict=False)
    Path(args.out).write_text(rows_to_csv(rows))
    print(f"{len(rows)} rows written to {args.out}", file=sys.stderr)
    return 0


def _cmd_report(args) -> int:
    rows = rows_from_csv(Path(args.infile).read_text())
    if args.normalize:
        try:
            rows = normalize(rows, strict=True)
        except MissingBaseline as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    text = rows_to_csv(rows) if args.format == "csv" else rows_to_table(rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_tables(args) -> int:
    kind, _, which = args.which.partition("-")
    if kind == "size":
        sys.stdout.write(render_size_table(which, fmt=args.format))
    else:
        sys.stdout.write(render_instruction_table(which, fmt=args.format))
    return 0


_COMMANDS = {
    "transform": _cmd_transform,
    "generate": _cmd_generate,
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "report": _cmd_report,
    "tables": _cmd_tables,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())

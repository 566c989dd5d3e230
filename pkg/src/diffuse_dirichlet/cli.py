"""Command line driver: ``diffuse-dirichlet run --experiment {eps|h-uniform|h-local}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiments as ex
from .analysis import presaturation_window, table_rate
from .layer import DegenerateLayerError
from .linalg import ConvergenceError
from .report import write_csv, write_svg_loglog

EXIT_SOLVER = 2
EXIT_REFINEMENT = 3

RATE_NORMS = ("l2", "h1_semi", "h1_full", "linf_omega", "linf_outside")


def build_spec(args: argparse.Namespace) -> ex.ExperimentSpec:
    kind = ex.ExperimentKind(args.experiment)
    out = Path(args.out)
    if kind is ex.ExperimentKind.EPS_SWEEP:
        exponents = ex.FULL_EPS_EXPONENTS if args.full else ex.DEFAULT_EPS_EXPONENTS
        eps_list = [2.0**-i for i in exponents]
        if args.eps is not None:
            eps_list = [e for e in eps_list if e >= args.eps] or [args.eps]
        base_n = args.base_n or (ex.FULL_EPS_MESH if args.full else ex.DEFAULT_EPS_MESH)
        return ex.ExperimentSpec(
            kind,
            eps_list=eps_list,
            base_n=base_n,
            out_dir=out,
            dump_mesh=args.dump_mesh,
            dump_layer=args.dump_layer,
            dump_solution=args.dump_solution,
        )
    levels = len(ex.FULL_H_MESHES) if args.full else len(ex.DEFAULT_H_MESHES)
    base_n = args.base_n or ex.DEFAULT_H_MESHES[0]
    return ex.ExperimentSpec(
        kind,
        mesh_list=[base_n * 2**k for k in range(levels)],
        base_n=base_n,
        eps=args.eps if args.eps is not None else ex.FIXED_EPS,
        out_dir=out,
        dump_mesh=args.dump_mesh,
        dump_layer=args.dump_layer,
        dump_solution=args.dump_solution,
    )


def summarize(table, kind) -> list[str]:
    lines = []
    header = f"{table.param_name:>12} {'vertices':>9} {'delta':>10} {'kappa':>10} {'l2':>11} {'h1_semi':>11} {'linf':>11}"
    lines.append(header)
    for p, r in zip(table.params, table.reports):
        lines.append(
            f"{p:12.5e} {r.vertices:9d} {r.delta:10.3e} {r.kappa:10.3e} {r.l2:11.4e} {r.h1_semi:11.4e} {r.linf_omega:11.4e}"
        )
    if len(table) >= 2:
        for norm in RATE_NORMS:
            window = presaturation_window(table.column(norm)) if kind is ex.ExperimentKind.EPS_SWEEP else None
            try:
                rate = table_rate(table, norm, window)
            except ValueError:
                continue
            lines.append(f"rate[{norm}] = {rate:.3f}")
    return lines


def cmd_run(args: argparse.Namespace) -> int:
    spec = build_spec(args)
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    try:
        table = ex.run(spec)
    except ConvergenceError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ex.RefinementTargetError as exc:
        print(f"refinement target not reached: {exc}", file=sys.stderr)
        return EXIT_REFINEMENT
    except DegenerateLayerError as exc:
        print(f"invalid layer width: {exc}", file=sys.stderr)
        return 1

    stem = f"rates_{spec.kind.value.replace('-', '_')}"
    write_csv(table, spec.out_dir / f"{stem}.csv")
    if len(table) and all(v > 0 for n in ("l2", "h1_semi", "linf_omega") for v in table.column(n)):
        write_svg_loglog(
            table, ("l2", "h1_semi", "linf_omega"), ex.PREDICTED_RATES[spec.kind], spec.out_dir / f"{stem}.svg"
        )
    for line in summarize(table, spec.kind):
        print(line)
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diffuse-dirichlet", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log every solve")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one convergence study")
    run.add_argument("--experiment", required=True, choices=[k.value for k in ex.ExperimentKind])
    run.add_argument("--full", action="store_true", help="finest meshes and the long eps schedule")
    run.add_argument(
        "--eps",
        type=float,
        default=None,
        help="fixed layer width for h sweeps; smallest width of the 2^-i schedule for the eps sweep",
    )
    run.add_argument("--base-n", type=int, default=None, help="cells per side of the (first) uniform mesh")
    run.add_argument("--out", default="results", help="output directory")
    run.add_argument("--dump-mesh", action="store_true")
    run.add_argument("--dump-layer", action="store_true")
    run.add_argument("--dump-solution", action="store_true")
    run.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

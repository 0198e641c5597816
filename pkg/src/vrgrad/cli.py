"""Command-line front end: ``run``, ``plot`` and ``reference`` subcommands.

Exit codes: 0 success, 2 usage error (argparse), 3 data error,
4 reference-solver failure, 5 divergence, 1 anything else.  The reference
cache directory comes from --cache-dir or the VRGRAD_CACHE_DIR env var.

Config files for ``run --spec`` are flat ``key = value`` text; list values
are comma-separated.  Precedence: CLI flag > spec file > defaults.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .data import LabelError, LibsvmParseError, parse_libsvm, synth_binary
from .harness import (DEFAULT_GRID, DEFAULT_LAMBDAS, DataSourceError,
                      ExperimentSpec, ReferenceError, emit_csv, emit_plots,
                      load_table, run_experiment)
from .losses import LossModel
from .optimizer import METHODS, DivergenceError
from .reference import solve_reference

EXIT_DATA = 3
EXIT_REFERENCE = 4
EXIT_DIVERGENCE = 5


def _parse_floats(text: str) -> tuple:
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _parse_synth(text: str) -> tuple:
    parts = [tok.strip() for tok in text.split(",")]
    if len(parts) not in (3, 4):
        raise argparse.ArgumentTypeError("--synth expects n,d,seed[,separability]")
    n, d, seed = int(parts[0]), int(parts[1]), int(parts[2])
    if len(parts) == 4:
        return (n, d, seed, float(parts[3]))
    return (n, d, seed)


_STEP_FAMILIES = {"constant", "epochbb", "m1", "m2", "m3"}


def _parse_step(token: str) -> tuple[str, float]:
    fam, _, val = token.partition(":")
    fam = fam.lower()
    if fam not in _STEP_FAMILIES or not val:
        raise argparse.ArgumentTypeError(
            "--step expects constant:ETA | epochbb:ETA0 | m1:C1 | m2:C1 | m3:C1")
    return fam, float(val)


def read_spec_file(path) -> dict:
    """Flat key = value config; '#' starts a comment line."""
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"spec file line without '=': {line!r}")
        key, _, val = line.partition("=")
        values[key.strip().lower()] = val.strip()
    return values


def _spec_from_args(args) -> ExperimentSpec:
    file_vals = read_spec_file(args.spec) if args.spec else {}

    def pick(cli_val, key, default, convert=lambda x: x):
        if cli_val is not None:
            return cli_val
        if key in file_vals:
            return convert(file_vals[key])
        return default

    synth = pick(args.synth, "synth", None, _parse_synth)
    data_path = pick(args.data, "data", None)
    if synth is None and data_path is None:
        synth = (1000, 20, 0)

    methods = pick(args.methods, "methods", ("SVRG",),
                   lambda s: tuple(tok.strip() for tok in s.split(",") if tok.strip()))
    grid = pick(args.grid, "grid", DEFAULT_GRID, _parse_floats)
    if args.step:
        grid = tuple(val for _, val in args.step)

    return ExperimentSpec(
        data_path=data_path,
        synth=synth,
        model=pick(args.model, "model", "logistic"),
        lambdas=pick(args.lambdas, "lambda", DEFAULT_LAMBDAS, _parse_floats),
        methods=methods,
        grid=grid,
        epochs=pick(args.epochs, "epochs", 30, int),
        m=pick(args.m, "m", None, lambda s: None if s.strip() in ("2n", "") else int(s)),
        seeds=pick(args.seeds, "seeds", (0,), lambda s: tuple(int(t) for t in s.split(","))),
        out_dir=pick(args.out, "out", "results"),
        scale_features=bool(pick(None, "scale", False, lambda s: s.lower() in ("1", "true", "yes"))
                            or args.scale),
        subsample=pick(args.subsample, "subsample", None, int),
    )


def cmd_run(args) -> int:
    spec = _spec_from_args(args)
    table = run_experiment(spec, cache_dir=args.cache_dir)
    paths = emit_csv(table, spec.out_dir)
    if args.plots:
        paths += emit_plots(table, spec.out_dir)
    print(f"wrote {len(paths)} files to {spec.out_dir}")
    for (method, lam), step in sorted(table.winners.items()):
        rows = table.winner_rows(method, lam)
        gap = min(r.final_gap() for r in rows)
        print(f"  {method:>12s} lambda={lam:g}: best step {step:g}, final gap {gap:.3e}")
    return 0


def cmd_plot(args) -> int:
    table = load_table(args.from_dir)
    out = args.out or args.from_dir
    paths = emit_plots(table, out)
    print(f"wrote {len(paths)} figures to {out}")
    return 0


def cmd_reference(args) -> int:
    if args.data:
        with open(args.data) as fh:
            dataset = parse_libsvm(fh)
    else:
        dataset = synth_binary(*args.synth)
    model = LossModel(dataset, args.lam, args.model)
    sol = solve_reference(model, tol=args.tol)
    if not sol.converged:
        print(f"reference did not converge: ||grad||={sol.grad_norm:.3e} "
              f"after {sol.iterations} iterations", file=sys.stderr)
        return EXIT_REFERENCE
    print(f"f_star={sol.f_star!r} ||grad||={sol.grad_norm:.3e} "
          f"iterations={sol.iterations}")
    if args.out:
        from .reference import save_reference
        save_reference(args.out, sol)
        print(f"saved to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vrgrad",
        description="Variance-reduced stochastic gradient experiment driver")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a grid-search experiment")
    run_p.add_argument("--spec", help="flat key=value spec file")
    run_p.add_argument("--data", help="LIBSVM text file")
    run_p.add_argument("--synth", type=_parse_synth, help="n,d,seed[,separability]")
    run_p.add_argument("--model", choices=("logistic", "svm"))
    run_p.add_argument("--lambda", dest="lambdas", type=_parse_floats,
                       help="comma-separated regularization weights")
    run_p.add_argument("--methods", type=lambda s: tuple(s.split(",")),
                       help=f"comma-separated from {', '.join(METHODS)}")
    run_p.add_argument("--epochs", type=int)
    run_p.add_argument("--m", help="inner length (integer or '2n')")
    run_p.add_argument("--seeds", type=lambda s: tuple(int(t) for t in s.split(",")))
    run_p.add_argument("--grid", type=_parse_floats, help="step-parameter grid")
    run_p.add_argument("--step", action="append", type=_parse_step,
                       help="pin a single step parameter, e.g. constant:0.1, "
                            "epochbb:0.1, m1:0.01 (repeatable)")
    run_p.add_argument("--out", help="output directory")
    run_p.add_argument("--scale", action="store_true",
                       help="per-feature max-abs scaling")
    run_p.add_argument("--subsample", type=int, help="random subsample size")
    run_p.add_argument("--plots", action="store_true", help="also write SVG figures")
    run_p.add_argument("--cache-dir", help="reference cache directory")
    run_p.set_defaults(func=cmd_run)

    plot_p = sub.add_parser("plot", help="regenerate figures from emitted CSVs")
    plot_p.add_argument("--from", dest="from_dir", required=True,
                        help="directory with run CSVs + metadata.json")
    plot_p.add_argument("--out", help="figure directory (default: same)")
    plot_p.set_defaults(func=cmd_plot)

    ref_p = sub.add_parser("reference", help="solve one reference minimizer")
    ref_p.add_argument("--data", help="LIBSVM text file")
    ref_p.add_argument("--synth", type=_parse_synth, help="n,d,seed[,separability]")
    ref_p.add_argument("--model", choices=("logistic", "svm"), default="logistic")
    ref_p.add_argument("--lambda", dest="lam", type=float, required=True)
    ref_p.add_argument("--tol", type=float, default=1e-10)
    ref_p.add_argument("--out", help="write the solution cache file here")
    ref_p.set_defaults(func=cmd_reference)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (LibsvmParseError, LabelError, DataSourceError, FileNotFoundError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except ReferenceError as err:
        print(f"reference error: {err}", file=sys.stderr)
        return EXIT_REFERENCE
    except DivergenceError as err:
        print(f"divergence: {err}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``toeplab <command> [options]``.

Exit status is 0 on success, 1 when a checked contract fails (for example a
sandwich violation) and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from toeplab import __version__
from toeplab import concentration as conc
from toeplab.harness import ExperimentConfig, emit_report, run_experiment, write_tail_curves

EXIT_OK, EXIT_CONTRACT, EXIT_USAGE = 0, 1, 2

_EXPERIMENT_COMMANDS = {
    "growth": "growth",
    "mean-case": "mean_case",
    "noniid": "noniid_limsup",
    "concentration": "concentration",
    "hankel": "hankel_check",
    "sandwich": "sandwich_audit",
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--n", type=int, help="single dimension (shorthand for --n-grid N)")
    p.add_argument("--n-grid", type=_int_list, help="comma-separated dimensions")
    p.add_argument("--samples", type=int, help="samples per dimension")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--dist", help="ensemble, e.g. rademacher, gaussian:1,1, constant:3")
    p.add_argument("--workers", type=int, help="worker processes (default: $TOEPLAB_WORKERS or 1)")
    p.add_argument("--tol", type=float, help="relative tolerance of the norm estimate")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), help="csv records or json summary")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="toeplab", description="Norms and tail bounds of random Toeplitz matrices.")
    parser.add_argument("--version", action="version", version=f"toeplab {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    for cmd in _EXPERIMENT_COMMANDS:
        p = sub.add_parser(cmd, help=f"run the {cmd} experiment")
        _common(p)
        p.add_argument("--timing", action="store_true", default=None, help="record per-task time (breaks byte-identity)")
        if cmd == "growth":
            p.add_argument("--symbols", action="store_true", default=None, help="also certify both symbol sups")
        if cmd == "noniid":
            p.add_argument("--no-norms", dest="norms", action="store_false", default=None,
                           help="track exceedances only")
            p.add_argument("--exceed-c", type=float, help="exceedance constant c in c*sqrt(i log i)")
        if cmd == "concentration":
            p.add_argument("--conf-alpha", type=float, help="Clopper-Pearson level is 1 - alpha")
            p.add_argument("--t-points", type=int, help="number of thresholds")
            p.add_argument("--curves-dir", help="write one tail CSV per (n, side) here")

    p = sub.add_parser("norm", help="operator norm of one symmetric Toeplitz matrix")
    _common(p)
    p.add_argument("--coeffs", type=_float_list, help="first row x_0,...,x_{n-1}; otherwise sampled")
    p.add_argument("--sample-index", type=int, default=0)
    p.add_argument("--dense", action="store_true", help="use the dense Jacobi oracle")
    p.add_argument("--sandwich", action="store_true", help="also certify the symbol bounds")

    p = sub.add_parser("bounds", help="evaluate tail-bound formulas")
    p.add_argument("--t", type=_float_list, required=True, help="comma-separated thresholds")
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--M", type=float, default=1.0)
    p.add_argument("--EZ", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--Emax-p", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--psi-max", type=float, default=1.0)
    p.add_argument("--sum-psi2-sq", type=float, default=1.0)
    p.add_argument("--Sigma2", type=float, default=1.0)
    p.add_argument("--K", type=float, default=1.0)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--K-alpha", type=float, default=1.0)
    p.add_argument("--alpha-power", action="store_true", help="raise t/psi to alpha in the psi_alpha Toeplitz bound")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    return parser


def _overrides(args, experiment: str) -> dict:
    grid = args.n_grid
    if args.n is not None:
        if grid is not None:
            raise _UsageError("give --n or --n-grid, not both")
        grid = [args.n]
    ov = {
        "experiment": experiment,
        "n_grid": grid,
        "samples_per_n": args.samples,
        "master_seed": args.seed,
        "ensemble": args.dist,
        "workers": args.workers,
        "tol": args.tol,
        "out_path": args.out,
        "format": args.format,
    }
    for name in ("timing", "symbols", "norms", "exceed_c", "conf_alpha", "t_points"):
        ov[name] = getattr(args, name, None)
    return ov


def _write(text: str, out) -> None:
    if out:
        try:
            with open(out, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write {out}: {exc}") from exc
    else:
        sys.stdout.write(text)


def _cmd_experiment(args) -> int:
    experiment = _EXPERIMENT_COMMANDS[args.command]
    config = ExperimentConfig.load(args.config, _overrides(args, experiment))
    if experiment == "growth" and config.ensemble.mean() != 0:
        raise _UsageError("growth needs a mean-zero ensemble; use mean-case")
    result = run_experiment(config)
    text = emit_report(result.records, result.summary, config)
    if config.out_path is None:
        sys.stdout.write(text)
    if getattr(args, "curves_dir", None) and hasattr(result, "curves"):
        write_tail_curves(result.curves, args.curves_dir)
    if not result.contract_ok:
        print("contract violation: see summary", file=sys.stderr)
        return EXIT_CONTRACT
    return EXIT_OK


def _cmd_norm(args) -> int:
    from toeplab.ensembles import sample_array
    from toeplab.matrix_core import operator_norm_dense, operator_norm_iterative, toeplitz_from_coeffs
    from toeplab.symbols import SandwichViolation, sandwich

    config = ExperimentConfig.load(args.config, {
        "ensemble": args.dist, "master_seed": args.seed, "tol": args.tol,
    })
    if args.coeffs is not None:
        x = np.asarray(args.coeffs, dtype=float)
    else:
        n = args.n if args.n is not None else (args.n_grid[0] if args.n_grid else None)
        if n is None:
            raise _UsageError("norm needs --coeffs or --n")
        x = sample_array(config.ensemble, n, args.sample_index)
    if x.size == 0:
        raise _UsageError("empty coefficient sequence")
    T = toeplitz_from_coeffs(x)
    est = operator_norm_dense(T) if args.dense else operator_norm_iterative(T, tol=config.tol)
    doc = {
        "n": int(x.size), "norm": est.value, "rayleigh_lower": est.rayleigh_lower,
        "upper_cert": est.upper_cert, "converged": est.converged, "iterations": est.iterations,
        "residual": est.residual, "method": est.method,
    }
    status = EXIT_OK
    if args.sandwich:
        try:
            rep = sandwich(x, strict=True)
        except SandwichViolation as exc:
            print(f"sandwich violation: {exc}", file=sys.stderr)
            status = EXIT_CONTRACT
        else:
            doc.update(sup_fejer=rep.lower, sup_laurent=rep.upper)
    if args.format == "csv":
        text = ",".join(doc) + "\n" + ",".join(repr(v) if isinstance(v, float) else str(v) for v in doc.values()) + "\n"
    else:
        text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    _write(text, args.out)
    if not est.converged:
        print("norm estimate did not converge", file=sys.stderr)
        status = EXIT_CONTRACT
    return status


def _cmd_bounds(args) -> int:
    rows = []
    for t in args.t:
        if t < 0 or not math.isfinite(t):
            raise _UsageError("thresholds must be finite and nonnegative")
        rows.append({
            "t": t,
            "klein_rio": conc.klein_rio_bound(t, args.sigma2, args.M, args.EZ),
            "corollary2": conc.corollary2_bound(t, args.sigma2, args.delta, args.M, args.K),
            "fuk_nagaev": conc.fuk_nagaev_bound(t, args.sigma2, args.delta, args.p, args.Emax_p, args.C),
            "psi_alpha_sum": conc.psi_alpha_sum_bound(t, args.sigma2, args.delta, args.alpha, args.psi_max, args.C),
            "psi2_toeplitz": conc.psi2_toeplitz_bound(t, args.sum_psi2_sq, args.K),
            "psi_alpha_toeplitz": conc.psi_alpha_toeplitz_bound(
                t, args.Sigma2, args.psi_max, args.alpha, args.K_alpha, args.alpha_power),
        })
    if args.format == "csv":
        keys = list(rows[0])
        text = ",".join(keys) + "\n" + "".join(",".join(repr(r[k]) for k in keys) + "\n" for r in rows)
    else:
        text = json.dumps({"hj_truncation_level": conc.hj_truncation_level(args.p, args.Emax_p), "rows": rows},
                          sort_keys=True, indent=2) + "\n"
    _write(text, args.out)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command in _EXPERIMENT_COMMANDS:
            return _cmd_experiment(args)
        if args.command == "norm":
            return _cmd_norm(args)
        return _cmd_bounds(args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"toeplab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"toeplab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Exit codes: 0 success, 1 domain/config error, 2 internal invariant
violation.  The last stdout line is ``OK`` or ``ERROR <code>``; logs go to
stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .asclt import (AscltTrajectory, expected_average_iid, indicator_stream, no_exceedance_prob_iid,
                    prefix_max, write_checkpoints)
from .conditions import berman_sum, block_parameters, evaluate_conditions, trend_verdict
from .covariance import IIDModel, check_decay_condition, choi_gamma_1d, correlation, model_from_spec
from .errors import ConfigError, DomainError, FieldmaxError, InvariantViolation
from .experiments import (OUTPUT_ENV, THREADS_ENV, format_summary, load_config, parse_grid, run_experiment,
                          write_outputs)
from .fieldsim import load_field, make_sampler, save_field
from .kernels import bivariate_upper_orthant, normal_comparison_term, std_normal_cdf, std_normal_quantile
from .levels import (asymptotic_level, boundary_level, export_schedule_summary, lambda_min, level_schedule,
                     load_offsets)

log = logging.getLogger("fieldmax")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        print("ERROR 1")
        sys.exit(1)


def _grid(text, flag):
    try:
        return parse_grid(text, flag)
    except ConfigError as exc:
        raise DomainError(str(exc)) from None


def _ladder(text):
    return [_grid(p, "--ladder") for p in text.split(",") if p.strip()]


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_simulate(args):
    n = _grid(args.n, "--n")
    if args.seed < 0:
        raise DomainError("--seed must be nonnegative")
    model = model_from_spec(args.model)
    sampler = make_sampler(model, n, args.method, pad=args.pad)
    field = sampler.sample(args.seed)
    field.model_id = model.name
    if args.out:
        save_field(args.out, field)
    print(f"model={model.name} n={n[0]}x{n[1]} seed={args.seed} method={field.method}"
          + (f" out={args.out}" if args.out else ""))


def cmd_levels(args):
    n = _grid(args.n, "--n")
    offsets = load_offsets(args.offsets, shape=n) if args.offsets else None
    sched = level_schedule(n, args.tau, offsets)
    print(f"base_level={sched.base_level(n)!r}")
    print(f"lambda_n={lambda_min(sched, n)!r}")
    print(f"mass={sched.mass(n)!r}")
    if n[0] * n[1] >= 2:
        print(f"asymptotic_level={asymptotic_level(*n)!r}")
    if args.out:
        export_schedule_summary(args.out, sched)


def cmd_asclt(args):
    if args.field:
        field = load_field(args.field)
        n = field.values.shape
        values = field.values
        model = None
    else:
        n = _grid(args.n, "--n")
        model = model_from_spec(args.model)
        values = make_sampler(model, n, args.method).sample_values(args.seed)
    offsets = load_offsets(args.offsets, shape=n) if args.offsets else None
    sched = level_schedule(n, args.tau, offsets)
    traj = AscltTrajectory.from_bits(indicator_stream(values, sched))
    for norm in ("paper_log", "harmonic"):
        if norm == "paper_log" and min(n) < 3:
            continue
        print(f"A_n[{norm}]={traj.average(n, norm)!r}")
    if isinstance(model, IIDModel) and offsets is None:
        print(f"E_iid[harmonic]={expected_average_iid(n, args.tau, 'harmonic')!r}")
    print(f"indicator_Mn={int(traj.bits[-1, -1])}")
    if args.trajectory:
        traj.to_csv(args.trajectory)
    if args.summary:
        cps = _ladder(args.checkpoints) if args.checkpoints else [n]
        norms = ("paper_log", "harmonic") if min(min(c) for c in cps) >= 3 else ("harmonic",)
        write_checkpoints(args.summary, traj, cps, norms)


def cmd_check(args):
    model = model_from_spec(args.model)
    sizes = _ladder(args.ladder) if args.ladder else [_grid(args.n, "--n")]
    if not (args.berman or args.dprime or args.gap):
        args.berman = args.dprime = True
    reports = []
    for n in sizes:
        sched = level_schedule(n, args.tau)
        rep = evaluate_conditions(model, sched, n, args.epsilon, args.berman, args.dprime, args.gap,
                                  args.gap_reps, args.seed, subsample=args.subsample)
        reports.append(rep.to_dict())
    out = {"model": model.name, "tau": args.tau, "epsilon": args.epsilon, "reports": reports}
    if len(sizes) >= 2:
        out["trends"] = {key: trend_verdict([r[key] for r in reports])
                         for key in ("berman_sup", "berman_scaled", "dprime_value") if reports[0][key] is not None}
    out["decay"] = check_decay_condition(model, args.epsilon, args.probe_max).to_dict() if model.has_dominating else None
    text = json.dumps(out, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)


def cmd_experiment(args):
    config, raw = load_config(args.config)
    outdir = args.out_dir or os.environ.get(OUTPUT_ENV) or config.output_dir
    if not os.path.isabs(outdir) and not args.out_dir and not os.environ.get(OUTPUT_ENV):
        outdir = os.path.join(os.path.dirname(os.path.abspath(args.config)), outdir)
    workers = args.workers if args.workers is not None else int(os.environ.get(THREADS_ENV, "1") or 1)
    result = run_experiment(config, workers=workers)
    paths = write_outputs(result, outdir, raw)
    log.info("wrote %s", ", ".join(str(p) for p in paths.values()))
    print(format_summary(result.summary))


# --------------------------------------------------------------------------
# selftest
# --------------------------------------------------------------------------

def _expect(cond, what):
    if not cond:
        raise InvariantViolation(what)


def _selftests():
    def cdf():
        _expect(std_normal_cdf(0.0) == 0.5, "Phi(0) = 1/2")
        _expect(abs(1.0 - std_normal_cdf(38.0)) <= 1e-16, "Phi(38) ~ 1")

    def quantile():
        _expect(std_normal_quantile(0.5) == 0.0, "median is 0")

    def orthant():
        q = 1.0 - std_normal_cdf(2.0)
        _expect(abs(bivariate_upper_orthant(2, 2, 0) - q * q) <= 1e-10, "independent orthant")
        _expect(abs(bivariate_upper_orthant(2, 2, 1) - q) <= 1e-10, "comonotone orthant")

    def comparison():
        _expect(normal_comparison_term(3, 3, 0) == 0.0, "zero correlation term")
        _expect(normal_comparison_term(0, 0, 0.5) == 0.5, "zero-level term")

    def covariance():
        _expect(correlation(IIDModel(), (0, 0), (1, 0)) == 0.0, "iid off-diagonal")
        _expect(correlation(model_from_spec("choi"), (2, 3), (2, 3)) == 1.0, "unit diagonal")
        _expect(choi_gamma_1d(0) == 1.0, "gamma_0 = 1")

    def levels():
        _expect(boundary_level(1, 1, 0.5) == 0.0, "boundary level at tau = 1/2")

    def prefix():
        m = prefix_max(np.array([[1.0, 3.0], [2.0, 0.0]]))
        _expect(np.array_equal(m, [[1.0, 3.0], [2.0, 3.0]]), "prefix max of 2x2")

    def estimator():
        traj = AscltTrajectory.from_bits(np.ones((5, 7), bool))
        _expect(abs(traj.average((5, 7), "harmonic") - 1.0) < 1e-12, "all-ones harmonic average")
        _expect(AscltTrajectory.from_bits(np.zeros((5, 7), bool)).average((5, 7), "harmonic") == 0.0,
                "all-zeros average")

    def iid_laws():
        _expect(no_exceedance_prob_iid((10, 10), 0.0) == 1.0, "tau = 0 law")
        _expect(berman_sum(IIDModel(), level_schedule((6, 6), 1.0), (6, 6), (6, 6)) == 0.0, "iid Berman sum")

    def blocks():
        _expect(block_parameters((3, 3)).k_n == (1, 1), "block parameters at n = 3")

    return [("cdf", cdf), ("quantile", quantile), ("orthant", orthant), ("comparison", comparison),
            ("covariance", covariance), ("levels", levels), ("prefix_max", prefix),
            ("estimator", estimator), ("iid_laws", iid_laws), ("blocks", blocks)]


def cmd_selftest(args):
    for name, fn in _selftests():
        fn()
        print(f"PASS {name}")


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="fieldmax", description="Maxima of 2-D Gaussian random fields: "
                "simulation, logarithmic-average estimator and condition checks.")
    p.add_argument("--version", action="version", version=f"fieldmax {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="sample one field realization")
    s.add_argument("--model", default="iid", help="iid | choi | expdecay:<q> | csv:<path>")
    s.add_argument("--n", required=True, help="grid size N1xN2")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--method", default="auto", choices=["auto", "iid", "cholesky", "circulant"])
    s.add_argument("--pad", type=int, default=1, help="initial circulant pad factor")
    s.add_argument("--out", help="output file (.csv for CSV, anything else for binary)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("levels", help="level schedule summary")
    s.add_argument("--n", required=True)
    s.add_argument("--tau", type=float, default=1.0)
    s.add_argument("--offsets", help="CSV i1,i2,delta")
    s.add_argument("--out", help="write k1,k2,base_level,mass for every k")
    s.set_defaults(func=cmd_levels)

    s = sub.add_parser("asclt", help="estimator on one simulated or loaded field")
    s.add_argument("--n", default="64x64")
    s.add_argument("--model", default="iid")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--method", default="auto", choices=["auto", "iid", "cholesky", "circulant"])
    s.add_argument("--field", help="load a field file instead of simulating")
    s.add_argument("--tau", type=float, default=1.0)
    s.add_argument("--offsets", help="CSV i1,i2,delta")
    s.add_argument("--trajectory", help="write k1,k2,bit,weight,partial_sum")
    s.add_argument("--summary", help="write n1,n2,normalization,A_n at --checkpoints")
    s.add_argument("--checkpoints", help="comma-separated sizes, e.g. 8x8,16x16")
    s.set_defaults(func=cmd_asclt)

    s = sub.add_parser("check", help="dependence-condition diagnostics")
    s.add_argument("--model", default="iid")
    s.add_argument("--tau", type=float, default=1.0)
    s.add_argument("--n", default="32x32")
    s.add_argument("--ladder", help="comma-separated sizes; overrides --n")
    s.add_argument("--epsilon", type=float, default=0.5)
    s.add_argument("--berman", action="store_true")
    s.add_argument("--dprime", action="store_true")
    s.add_argument("--gap", action="store_true")
    s.add_argument("--gap-reps", type=int, default=500)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--probe-max", type=int, default=1024)
    s.add_argument("--subsample", action="store_true", help="stratified subsampling above the pair cap")
    s.add_argument("--out", help="write the JSON report here")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("experiment", help="run a TOML experiment config")
    s.add_argument("--config", required=True)
    s.add_argument("--out-dir", help=f"output directory (else ${OUTPUT_ENV}, else the config's outputs.dir)")
    s.add_argument("--workers", type=int, help=f"thread count (else ${THREADS_ENV}, else 1)")
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("selftest", help="run the built-in golden checks")
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (FieldmaxError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("ERROR 1")
        return 1
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error: %s", exc)
        print("ERROR 2")
        return 2
    print("OK")
    return 0


if __name__ == "__main__":
    sys.exit(main())

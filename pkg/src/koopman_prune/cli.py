"""Command-line interface: ``koopman-prune {generate,prune,predict,bench,verify}``.

Exit status is 0 on success, 1 when the computation ran but produced a
failure result (pruning reached dimension 0, a rollout diverged, a verify
suite failed, naive/fast benchmark runs disagreed), and 2 on usage or input
errors.

File formats
------------
Snapshot CSV
    Header ``x0..x{n-1},xp0..xp{n-1}``, one snapshot pair per row.
Dictionary JSON
    ``{"state_dim": n, "observables": [{"kind": ..., "params": {...}}, ...]}``.
    Observable kinds: ``constant``, ``coordinate`` (``index``), ``monomial``
    (``exponents``), ``gaussian_rbf`` (``center``, ``width``) and ``wendland``
    (``center``, ``support_radius``). Generator kinds expanded at load:
    ``monomials_upto`` (``max_degree``), ``gaussian_grid`` (``domain``,
    ``spacing``, ``width``) and ``wendland_grid`` (``domain``, ``spacing``,
    ``support_radius``). See ``docs/schemas.md`` for complete examples.
Experiment config JSON
    Fields of :class:`~koopman_prune.systems.ExperimentConfig`; ``dictionary``
    may be an inline dictionary document or a path relative to the config.

The environment variable ``KOOPMAN_PRUNE_THREADS`` caps BLAS threads
(default 1).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import io
from .bench import MODES, BenchmarkDisagreement, timing_harness, write_timing_csv
from .dictionary import Dictionary, precondition
from .errors import DimensionMismatch, KoopmanPruneError
from .koopman import lift
from .model import LiftedModel, build_model, choose_dimension, predict
from .pruning import DEFAULT_EPS_COARSE, PruneConfig, prune
from .systems import ExperimentConfig, SystemSpec, generate_data
from .verify import run_all


class UsageError(Exception):
    pass


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _domain(text: str) -> tuple:
    """``"lo,hi;lo,hi"`` -> box."""
    box = tuple(_floats(part) for part in text.split(";"))
    if any(len(b) != 2 for b in box):
        raise argparse.ArgumentTypeError("domain must look like 'lo,hi;lo,hi'")
    return box


def _require(path, what):
    if not Path(path).exists():
        raise UsageError(f"{what} file {path} does not exist")
    return Path(path)


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args) -> int:
    if args.config is not None:
        cfg = ExperimentConfig.load(_require(args.config, "config"))
    else:
        sys_kw = {"kind": args.system, "seed": args.seed, "dt": args.dt}
        if args.domain is not None:
            sys_kw["domain"] = args.domain
        elif args.system == "van_der_pol":
            sys_kw["domain"] = ((-4.0, 4.0), (-4.0, 4.0))
        cfg = ExperimentConfig(system=SystemSpec(**sys_kw), n_traj=args.n_traj,
                               traj_len=args.traj_len)
    snaps = generate_data(cfg)
    io.write_snapshots(args.out, snaps)
    if args.dict_out is not None:
        cfg.build_dictionary().save(args.dict_out)
    print(f"wrote {len(snaps)} snapshot pairs to {args.out}")
    return 0


def _lifted(data_path, dict_path, tol):
    snaps = io.read_snapshots(_require(data_path, "data"))
    dictionary = Dictionary.load(_require(dict_path, "dictionary"))
    if dictionary.state_dim != snaps.state_dim:
        raise UsageError(f"dictionary state_dim {dictionary.state_dim} does not match data ({snaps.state_dim})")
    coeff, retained = precondition(dictionary, snaps.x, tol)
    return snaps, dictionary, lift(dictionary, coeff, snaps.x, snaps.x_plus), retained


def _trace_path(out: Path) -> Path:
    return out.with_name(out.stem + "_trace.csv")


def cmd_prune(args) -> int:
    eps_coarse = args.eps_coarse
    if eps_coarse is None and args.algo == "hybrid":
        eps_coarse = DEFAULT_EPS_COARSE
    cfg = PruneConfig(eps=args.eps, eps_coarse=eps_coarse if args.algo == "hybrid" else None,
                      use_fast_path=not args.naive, oracle_check_period=args.oracle_period,
                      record_bases=args.record_bases)
    _, dictionary, data, retained = _lifted(args.data, args.dict, args.precondition_tol)
    report = prune(data, args.algo, cfg)
    out = Path(args.out)
    data_ref = os.path.relpath(Path(args.data).resolve(), out.resolve().parent)
    io.write_report(out, report, dictionary, data_ref, timings=args.timings)
    trace_csv = Path(args.trace_csv) if args.trace_csv else _trace_path(out)
    io.write_trace_csv(trace_csv, report.trace)
    if report.success:
        print(f"{report.mode}: {len(dictionary.observables)} functions, {retained} retained, "
              f"final dim {report.final_dim}, delta {report.final_delta:.3e}")
        return 0
    print(f"{report.mode}: pruning reached dimension 0 without meeting eps={args.eps}")
    return 1


def cmd_predict(args) -> int:
    if (args.report is None) == (args.model is None):
        raise UsageError("give exactly one of --report or --model")
    if args.model is not None:
        model = LiftedModel.load(_require(args.model, "model"))
        dim = model.dim
    else:
        report = io.read_report(_require(args.report, "report"))
        if report.dictionary is None:
            raise UsageError("report carries no dictionary")
        data_path = args.data or report.data_path
        if data_path is None:
            raise UsageError("report names no data file; pass --data")
        snaps = io.read_snapshots(_require(data_path, "data"))
        dim = args.pick_dim if args.pick_dim is not None else choose_dimension(
            report, snaps, report.dictionary)
        basis = report.basis_for_dim(dim)
        if basis is None:
            dims = [e.dim for e in report.trace if e.basis_coeff is not None]
            raise UsageError(f"report has no basis for dimension {dim} (available: {dims})")
        model = build_model(basis, snaps, report.dictionary)
    if model.state_dim != len(args.x0):
        raise UsageError(f"--x0 has {len(args.x0)} entries, model state has {model.state_dim}")
    truth = None
    if args.system is not None:
        spec = SystemSpec(kind=args.system, dt=args.dt,
                          domain=tuple((-1.0, 1.0) for _ in args.x0))
        try:
            truth = spec.trajectory(np.asarray(args.x0), args.horizon)
        except KoopmanPruneError as exc:
            raise UsageError(f"true trajectory from x0 is undefined: {exc}")
    trace = predict(model, args.x0, args.horizon, truth)
    trace.write_csv(args.out)
    if args.model_out is not None:
        model.save(args.model_out)
    msg = f"dim {dim}, spectral radius {model.spectral_radius():.6f}"
    if truth is not None:
        msg += f", final state error {trace.e_state[-1]:.3e}"
    print(msg)
    if trace.diverged_at is not None:
        print(f"rollout diverged at step {trace.diverged_at}", file=sys.stderr)
        return 1
    return 0


def cmd_bench(args) -> int:
    unknown = set(args.modes) - set(MODES)
    if unknown:
        raise UsageError(f"unknown modes {sorted(unknown)}; choose from {sorted(MODES)}")
    try:
        rows = timing_harness(args.sizes, args.modes, eps=args.eps, repeats=args.repeats,
                              threads=args.threads)
    except BenchmarkDisagreement as exc:
        print(f"benchmark aborted: {exc}", file=sys.stderr)
        return 1
    write_timing_csv(args.out, rows)
    for r in rows:
        print(f"{r.dim:5d} {r.mode:12s} {r.wall_seconds:9.3f}s  first {r.first_svd_seconds:.3f}s")
    return 0


def cmd_verify(args) -> int:
    results = run_all(args.seed, args.s)
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} suites passed")
    return 1 if failed else 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="koopman-prune",
                                description="Koopman-invariant subspace pruning toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a snapshot CSV")
    g.add_argument("--config", help="experiment config JSON (overrides the flags below)")
    g.add_argument("--system", choices=("benchmark2d", "van_der_pol"), default="benchmark2d")
    g.add_argument("--n-traj", type=int, default=100)
    g.add_argument("--traj-len", type=int, default=50)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--dt", type=float, default=0.025)
    g.add_argument("--domain", type=_domain, help="sampling box, e.g. '0,2;0,2'")
    g.add_argument("--out", required=True)
    g.add_argument("--dict-out", help="also write the config's dictionary JSON here")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("prune", help="prune a dictionary, write report JSON and trace CSV")
    r.add_argument("--data", required=True)
    r.add_argument("--dict", required=True)
    r.add_argument("--algo", choices=("spv", "mpv", "hybrid"), default="hybrid")
    r.add_argument("--eps", type=float, default=1e-3)
    r.add_argument("--eps-coarse", type=float)
    r.add_argument("--naive", action="store_true", help="recompute angles from scratch each generation")
    r.add_argument("--oracle-period", type=int, default=0)
    r.add_argument("--precondition-tol", type=float, default=1e-10)
    r.add_argument("--no-record-bases", dest="record_bases", action="store_false",
                   help="store only the final basis (predict can then only use the final dim)")
    r.add_argument("--timings", action="store_true", help="include wall-clock fields in the report")
    r.add_argument("--out", required=True)
    r.add_argument("--trace-csv", help="default: <out stem>_trace.csv")
    r.set_defaults(func=cmd_prune)

    q = sub.add_parser("predict", help="roll out a lifted linear model")
    q.add_argument("--report")
    q.add_argument("--model")
    q.add_argument("--data", help="training data (default: the file named in the report)")
    q.add_argument("--pick-dim", type=int, help="subspace dimension (default: automatic choice)")
    q.add_argument("--x0", type=_floats, default=(2.97, -3.76))
    q.add_argument("--horizon", type=int, default=3000)
    q.add_argument("--system", choices=("benchmark2d", "van_der_pol"),
                   help="simulate the true trajectory to fill e_state and e_lifted")
    q.add_argument("--dt", type=float, default=0.025)
    q.add_argument("--out", required=True)
    q.add_argument("--model-out")
    q.set_defaults(func=cmd_predict)

    b = sub.add_parser("bench", help="time naive vs. fast pruning")
    b.add_argument("--sizes", type=_ints, default=(53, 128))
    b.add_argument("--modes", type=lambda s: tuple(s.split(",")), default=tuple(MODES))
    b.add_argument("--repeats", type=int, default=3)
    b.add_argument("--eps", type=float, default=1e-3)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)

    v = sub.add_parser("verify", help="run the oracle-equivalence and bound-check suites")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--s", type=int, default=20)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    threads = os.environ.get("KOOPMAN_PRUNE_THREADS", "1")
    try:
        threads = int(threads)
    except ValueError:
        print(f"KOOPMAN_PRUNE_THREADS must be an integer, got {threads!r}", file=sys.stderr)
        return 2
    args.threads = threads
    try:
        with threadpool_limits(limits=threads):
            return args.func(args)
    except (UsageError, DimensionMismatch, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KoopmanPruneError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

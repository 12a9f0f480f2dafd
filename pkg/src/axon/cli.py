"""Command line entry point: ``axon {train,eval,experiment,yarotsky}``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.

Seeds for sampling, the greedy solver and the baseline restarts are split
off the single ``--seed`` by hashing ``"<seed>/<label>"`` with SHA-256 and
keeping the first 8 bytes (little endian, top bit cleared), so adding a
method never perturbs another method's stream.
"""

import argparse
import csv
import hashlib
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import core, plotting, problems, yarotsky
from .baseline import BaselineConfig, train_random_init
from .errors import AxonError, SchemaError
from .inner_opt import CRITERIA, SolverConfig

METHODS = ("axon", "baseline", "yarotsky")
N_BASIS = 6
BASIS_GRID = {1: 1001, 2: 101}


class UsageError(Exception):
    pass


def derive_seed(seed, label):
    digest = hashlib.sha256(f"{seed}/{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little") & (2**63 - 1)


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {v}")
    return v


def _pos_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def _pos_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def _methods(text):
    items = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in items if m not in METHODS]
    if bad or not items:
        raise argparse.ArgumentTypeError(f"methods must be a comma list from {', '.join(METHODS)}")
    return list(dict.fromkeys(items))


def _int_list(text):
    return [_nonneg_int(t) for t in text.split(",") if t.strip()]


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _solver_cfg(args, seed):
    return SolverConfig(
        restarts=args.solver_restarts,
        max_iters=args.max_iters,
        seed=seed,
        tol=args.tol,
        criterion=args.criterion,
    )


def _add_problem_flags(p):
    p.add_argument("--problem", required=True, choices=problems.problem_names())
    p.add_argument("--n", type=_pos_int, default=None, help="training points (default 1000 in 1D, 64^2 in 2D)")
    p.add_argument("--scheme", choices=("grid", "random"), default="grid")
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--eval-grid", type=_pos_int, default=None, help="evaluation points per axis")


def _add_solver_flags(p):
    g = p.add_argument_group("greedy solver")
    g.add_argument("--solver-restarts", type=_pos_int, default=SolverConfig.restarts)
    g.add_argument("--max-iters", type=_nonneg_int, default=SolverConfig.max_iters)
    g.add_argument("--tol", type=_pos_float, default=SolverConfig.tol)
    g.add_argument("--criterion", choices=CRITERIA, default=SolverConfig.criterion)


def _add_baseline_flags(p):
    g = p.add_argument_group("random-init baseline")
    g.add_argument("--restarts", type=_pos_int, default=BaselineConfig.restarts)
    g.add_argument("--epochs", type=_nonneg_int, default=BaselineConfig.epochs)
    g.add_argument("--lr", type=_pos_float, default=BaselineConfig.learning_rate)
    g.add_argument("--optimizer", choices=("adam", "gd"), default=BaselineConfig.optimizer)
    g.add_argument("--init-scale", type=_pos_float, default=BaselineConfig.init_scale)
    g.add_argument("--batch-size", type=_pos_int, default=None)
    g.add_argument("--baseline-ks", type=_int_list, default=None, help="K values for the baseline (default 1..kmax)")


def build_parser():
    parser = argparse.ArgumentParser(prog="axon", description="Greedy growth of deep ReLU approximants.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a greedy model and save it")
    _add_problem_flags(p)
    p.add_argument("--k", type=_nonneg_int, required=True, help="number of neurons to grow")
    p.add_argument("--out", required=True, help="model file (JSON)")
    p.add_argument("--report", default=None, help="per-iteration CSV (default <out>.report.csv)")
    _add_solver_flags(p)

    p = sub.add_parser("eval", help="evaluate a saved model on a problem")
    p.add_argument("--model", required=True)
    p.add_argument("--problem", required=True, choices=problems.problem_names())
    p.add_argument("--grid", type=_pos_int, default=None, help="evaluation points per axis")
    p.add_argument("--dump", default=None, help="write x, f(x), f_K(x) to this CSV")

    p = sub.add_parser("experiment", help="error-vs-K comparison of methods")
    _add_problem_flags(p)
    p.add_argument("--kmax", type=_pos_int, required=True)
    p.add_argument("--methods", type=_methods, default=["axon", "baseline"])
    p.add_argument("--out-dir", required=True)
    _add_solver_flags(p)
    _add_baseline_flags(p)

    p = sub.add_parser("yarotsky", help="check the sawtooth construction's error bound")
    p.add_argument("--mmax", type=_pos_int, default=12)
    p.add_argument("--grid", type=_pos_int, default=2**17 + 1)
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.add_argument("--plot", default=None, help="optional SVG path")
    return parser


def _eval_error(model, problem, grid):
    return problems.rel_l2_error(lambda X: core.infer(model, X), problem, grid)


def cmd_train(args):
    problem = problems.get_problem(args.problem)
    data = problems.sample(problem, args.n, args.scheme, derive_seed(args.seed, "sample"))
    cfg = _solver_cfg(args, derive_seed(args.seed, "axon"))
    ev = problems.eval_set(problem, args.eval_grid)
    model, report = core.train(data, args.k, cfg=cfg, eval_set=ev)
    core.save(model, args.out)
    report_path = args.report or str(Path(args.out).with_suffix("")) + ".report.csv"
    rows = [(0, "", "", _fmt(report.initial_train_rel_l2), _fmt(report.initial_eval_rel_l2))]
    rows += [
        (r.k + 1, _fmt(r.objective_value), _fmt(r.beta), _fmt(r.train_rel_l2), _fmt(r.eval_rel_l2))
        for r in report.records
    ]
    _write_csv(report_path, ["K", "objective_value", "beta", "train_rel_l2", "eval_rel_l2"], rows)
    print(f"stop_reason {report.stop_reason}")
    print(f"neurons {model.K}")
    print(f"final_rel_l2 {_eval_error(model, problem, args.eval_grid)!r}")
    return 0


def cmd_eval(args):
    problem = problems.get_problem(args.problem)
    try:
        model = core.load(args.model)
    except SchemaError as exc:
        print(f"error: invalid model file {args.model}: {exc}", file=sys.stderr)
        return 1
    if model.d != problem.d:
        raise UsageError(f"model has d={model.d} but problem {problem.name} has d={problem.d}")
    print(f"rel_l2 {_eval_error(model, problem, args.grid)!r}")
    if args.dump:
        ev = problems.eval_set(problem, args.grid)
        pred = core.infer(model, ev.X)
        header = [f"x{i + 1}" for i in range(problem.d)] + ["f", "f_K"]
        _write_csv(args.dump, header, ([*map(repr, x), repr(f), repr(p)] for x, f, p in zip(ev.X.tolist(), ev.y.tolist(), pred.tolist())))
    return 0


def _basis_rows(model, problem):
    X = problems.grid_points(problem, BASIS_GRID[problem.d])
    Phi = core.neuron_activations(model, X)[:, :N_BASIS]
    header = [f"x{i + 1}" for i in range(problem.d)] + [f"phi_{j + 1}" for j in range(Phi.shape[1])]
    rows = [[repr(v) for v in row] for row in np.column_stack([X, Phi]).tolist()]
    return X, Phi, header, rows


def cmd_experiment(args):
    problem = problems.get_problem(args.problem)
    if "yarotsky" in args.methods and problem.name != "x2":
        raise UsageError("the yarotsky method only applies to --problem x2")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = problems.sample(problem, args.n, args.scheme, derive_seed(args.seed, "sample"))
    ev = problems.eval_set(problem, args.eval_grid)
    baseline_ks = args.baseline_ks if args.baseline_ks is not None else list(range(1, args.kmax + 1))
    solver_cfg = _solver_cfg(args, derive_seed(args.seed, "axon"))
    base_cfg = BaselineConfig(
        restarts=args.restarts,
        epochs=args.epochs,
        learning_rate=args.lr,
        optimizer=args.optimizer,
        init_scale=args.init_scale,
        seed=derive_seed(args.seed, "baseline"),
        batch_size=args.batch_size,
    )
    config = {
        "problem": problem.name,
        "kmax": args.kmax,
        "methods": args.methods,
        "seed": args.seed,
        "n_train": data.n,
        "scheme": args.scheme,
        "eval_points": ev.n,
        "solver": asdict(solver_cfg),
        "baseline": asdict(base_cfg),
        "baseline_ks": baseline_ks,
    }
    (out / "config.json").write_text(json.dumps(config, indent=1) + "\n")

    errors, timing, restarts_rows = [], [], []
    failure = None

    def flush():
        _write_csv(out / "errors.csv", ["method", "K", "rel_l2"], [(m, k, _fmt(e)) for m, k, e in errors])
        _write_csv(out / "timing.csv", ["method", "K", "wall_time_ms", "seed"], timing)
        if restarts_rows:
            _write_csv(out / "baseline_restarts.csv", ["K", "restart", "final_loss", "diverged"], restarts_rows)

    try:
        for method in args.methods:
            if method == "axon":
                t0 = time.perf_counter()
                model, report = core.train(data, args.kmax, cfg=solver_cfg, eval_set=ev)
                ms = (time.perf_counter() - t0) * 1e3
                for k, e in enumerate(report.eval_errors()):
                    errors.append(("axon", k, e))
                timing.append(("axon", model.K, f"{ms:.1f}", solver_cfg.seed))
                X, Phi, header, rows = _basis_rows(model, problem)
                _write_csv(out / "basis.csv", header, rows)
                plotting.plot_basis(X, Phi, out / "basis.svg", title=f"first {Phi.shape[1]} neurons, {problem.label}")
                print(f"axon: K={model.K} stop_reason={report.stop_reason} rel_l2={report.eval_errors()[-1]:.3e}")
            elif method == "baseline":
                for k in baseline_ks:
                    t0 = time.perf_counter()
                    res = train_random_init(data, k, base_cfg)
                    ms = (time.perf_counter() - t0) * 1e3
                    e = problems.rel_l2_error(lambda X: core.infer(res.best_model, X), problem, args.eval_grid)
                    errors.append(("baseline", k, e))
                    timing.append(("baseline", k, f"{ms:.1f}", base_cfg.seed))
                    for i, loss in enumerate(res.per_restart_losses):
                        restarts_rows.append((k, i, _fmt(loss), int(i in res.diverged)))
                    print(f"baseline: K={k} rel_l2={e:.3e} diverged={len(res.diverged)}/{base_cfg.restarts}")
                    flush()
            else:
                for m in range(1, args.kmax + 1):
                    approx = yarotsky.YarotskyApproximant(m)
                    e = problems.rel_l2_error(lambda X: approx(X[:, 0]), problem, args.eval_grid)
                    errors.append(("yarotsky", m, e))
            flush()
    except AxonError as exc:
        failure = exc
    flush()
    if errors:
        plotting.plot_errors(errors, out / "errors.svg", title=problem.label)
    _compare(errors, out)
    if failure is not None:
        print(f"error: {failure}", file=sys.stderr)
        return 1
    return 0


def _compare(errors, out):
    """Flag K values where the baseline is not worse than the greedy model."""
    axon = {k: e for m, k, e in errors if m == "axon"}
    base = {k: e for m, k, e in errors if m == "baseline"}
    common = sorted(set(axon) & set(base))
    if not common:
        return
    rows = [(k, _fmt(axon[k]), _fmt(base[k]), str(base[k] > axon[k]).lower()) for k in common]
    _write_csv(out / "comparison.csv", ["K", "axon_rel_l2", "baseline_rel_l2", "baseline_worse"], rows)
    failed = [k for k in common if not base[k] > axon[k]]
    if failed:
        print(f"WARNING: baseline not worse than axon at K={failed}")
    else:
        print(f"expectation met: baseline worse than axon at all K={common}")


def cmd_yarotsky(args):
    if args.grid < 2 ** (args.mmax + 2) + 1:
        raise UsageError(f"--grid must be at least 2**(mmax+2)+1 = {2 ** (args.mmax + 2) + 1}")
    table = yarotsky.verify_bound(args.mmax, args.grid)
    header = ["m", "bound", "max_error", "ratio"]
    rows = [(m, repr(b), repr(e), repr(r)) for m, b, e, r in table]
    if args.out:
        _write_csv(args.out, header, rows)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    if args.plot:
        plotting.plot_yarotsky(table, args.plot)
    return 0 if all(r <= 1.0 + 1e-12 / b for _, b, _, r in table) else 1


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "experiment": cmd_experiment, "yarotsky": cmd_yarotsky}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"axon {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (AxonError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

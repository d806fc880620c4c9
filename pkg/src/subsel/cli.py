"""Command-line entry point: ``subsel <command> [flags]``.

Commands write plot-ready CSV plus a ``summary.json`` run record into
``--out``. Identical flags and seed give byte-identical files; wall-clock
timings are only recorded with ``--timings``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .active import (
    ARMS,
    MEASURES,
    FassConfig,
    knn_predict_proba,
    run_arm,
)
from .data import STREAM_EVAL_RANDOM, make_rng, partition_by_label
from .errors import BadBudget, ConfigInvalid, SubselError, ValidationError
from .io import read_features, write_features, write_matrix_csv
from .objectives import (
    Dispersion,
    FacilityLocation,
    LabelAware,
    Mixture,
    SparseFacilityLocation,
)
from .optimizer import GreedyStats, dispersion_greedy, lazy_greedy, naive_greedy
from .synth import CLASS_RULES, LAYOUTS, SyntheticSpec, generate, generate_with_holdout


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _finite_or_none(v):
    v = float(v)
    return v if math.isfinite(v) else None


def _fmt(v):
    v = float(v)
    return repr(v) if math.isfinite(v) else ("inf" if v > 0 else "-inf")


def _write_text(path, text):
    Path(path).write_bytes(text.encode("utf-8"))


def _write_summary(out, args, timings=None, **fields):
    # the output directory is where results go, not what they are
    config = {
        k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")
    }
    summary = {
        "command": args.command,
        "version": __version__,
        "config": config,
        "rng_seed": args.rng_seed,
        "kernel": None,
        "objective": None,
        "budget": None,
        "selected_ids": [],
        "metrics": {},
        "label_names": None,
        "timings": timings if args.timings else None,
    }
    summary.update(fields)
    _write_text(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _kernel_desc(args, gamma=None):
    desc = {"name": args.kernel}
    if args.kernel == "rbf":
        desc["gamma"] = gamma
        desc["gamma_rule"] = "explicit" if args.gamma is not None else "median_heuristic"
    return desc


def _similarity(features, args):
    budget = args.memory_budget
    if args.kernel == "rbf":
        dist = kernels.euclidean_distance(features, args.threads, budget)
        gamma = args.gamma if args.gamma is not None else kernels.median_heuristic_gamma(dist)
        return kernels.rbf_similarity(dist, gamma), gamma
    return kernels.cosine_similarity(features, args.threads, budget), None


def _parse_fractions(text):
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigInvalid(f"fraction range must be start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or start <= 0 or stop > 100 or start > stop:
            raise ConfigInvalid(f"bad fraction range {text!r}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        fr = [round(start + i * step, 10) for i in range(count)]
    else:
        fr = [float(p) for p in text.split(",") if p.strip()]
    for f in fr:
        if not 0 < f <= 100:
            raise ConfigInvalid(f"fractions must be in (0, 100], got {f}")
    return fr


def _csv_list(text, allowed, what):
    items = [t.strip() for t in text.split(",") if t.strip()]
    for t in items:
        if t not in allowed:
            raise ConfigInvalid(f"unknown {what} {t!r}; choose from {', '.join(allowed)}")
    if not items:
        raise ConfigInvalid(f"no {what}s given")
    return items


# ---------------------------------------------------------------------------
# select
# ---------------------------------------------------------------------------


def build_selector(dataset, args, k):
    """Return (run(k) -> Selection, objective name, kernel description)."""
    partition = partition_by_label(dataset) if args.label_aware else None
    name = args.objective
    kernel = None

    def wrap(f):
        return LabelAware(f, partition) if partition is not None else f

    if name in ("fl", "fl-sparse", "mixture"):
        sim, gamma = _similarity(dataset, args)
        kernel = _kernel_desc(args, gamma)
        if name == "fl-sparse":
            g = args.neighbors if args.neighbors is not None else min(10, dataset.n - 1)
            graph = kernels.knn_sparsify(sim, g)
            if partition is not None:
                raise ConfigInvalid("label-aware mode is not available for fl-sparse")
            rep = SparseFacilityLocation(graph)
            kernel["neighbors"] = g
        else:
            rep = FacilityLocation(sim)
    if name in ("dispersion", "mixture"):
        dist = kernels.euclidean_distance(dataset, args.threads, args.memory_budget)
        disp = Dispersion(dist)

    if name == "dispersion":
        kernel = {"name": "euclidean"}
        if partition is None:
            return (
                lambda kk: dispersion_greedy(dist, kk, seed=args.dispersion_seed),
                "dispersion",
                kernel,
            )
        objective = wrap(disp)
    elif name == "mixture":
        objective = Mixture(wrap(rep), wrap(disp), args.lambda1, args.lambda2)
    else:
        objective = wrap(rep)

    def run(kk):
        if objective.submodular and args.optimizer == "lazy":
            return lazy_greedy(objective, kk)
        return naive_greedy(objective, kk)

    return run, objective.name, kernel


def cmd_select(args):
    out = _out_dir(args)
    t0 = time.perf_counter()
    ds = read_features(args.features)
    if args.k < 0 or args.k > ds.n:
        raise BadBudget(f"--k must be in [0, {ds.n}], got {args.k}")
    run, obj_name, kernel = build_selector(ds, args, args.k)
    sel = run(args.k)

    ids = [ds.ids[j] for j in sel.order]
    _write_text(out / "selected_ids.txt", "".join(f"{i}\n" for i in ids))
    lines = ["step,id,gain,value", f"0,,,{_fmt(sel.empty_value)}"]
    for t, (j, g, v) in enumerate(zip(sel.order, sel.gains, sel.values), start=1):
        lines.append(f"{t},{ds.ids[j]},{_fmt(g)},{_fmt(v)}")
    _write_text(out / "trace.csv", "\n".join(lines) + "\n")

    stats = sel.stats or GreedyStats()
    _write_summary(
        out,
        args,
        timings={"total_seconds": time.perf_counter() - t0},
        kernel=kernel,
        objective=obj_name,
        budget=args.k,
        selected_ids=ids,
        metrics={
            "objective_value": _finite_or_none(sel.value),
            "gain_evaluations": int(stats.gain_evaluations),
            "mean_resorts": float(stats.mean_resorts),
        },
        label_names=list(ds.label_names) if ds.label_names else None,
    )
    return 0


# ---------------------------------------------------------------------------
# eval-knn
# ---------------------------------------------------------------------------


def _knn_accuracy(train, idx, holdout, k):
    idx = np.sort(np.asarray(idx, dtype=np.int64))
    sub = train.subset(idx)
    P = knn_predict_proba(sub, holdout.features, min(k, sub.n))
    return float(np.mean(np.argmax(P, axis=1) == holdout.labels))


def cmd_eval_knn(args):
    out = _out_dir(args)
    t0 = time.perf_counter()
    train = read_features(args.train)
    holdout = read_features(args.holdout)
    if train.labels is None or holdout.labels is None:
        raise ConfigInvalid("eval-knn needs labeled train and holdout files")
    fractions = _parse_fractions(args.fractions)
    methods = _csv_list(args.methods, ("fl", "dispersion", "random"), "method")
    n = train.n
    sizes = [max(1, int(math.floor(f * n / 100 + 1e-9))) for f in fractions]
    kmax = max(sizes)

    orders = {}
    for m in methods:
        if m == "random":
            continue
        sel_args = argparse.Namespace(**{**vars(args), "objective": m})
        run, _, _ = build_selector(train, sel_args, kmax)
        if m == "dispersion" and kmax < 2:
            raise BadBudget("dispersion needs subsets of at least 2 items")
        # greedy selections are nested: the size-s answer is the first s picks
        orders[m] = list(run(kmax).order)

    rows = ["fraction,method,size,accuracy"]
    metrics = {}
    for f, s in zip(fractions, sizes):
        for m in methods:
            if m == "random":
                accs = [
                    _knn_accuracy(
                        train,
                        make_rng(args.rng_seed, STREAM_EVAL_RANDOM, r).choice(n, s, replace=False),
                        holdout,
                        args.knn_k,
                    )
                    for r in range(args.random_repeats)
                ]
                acc = float(np.mean(accs))
            else:
                acc = _knn_accuracy(train, orders[m][: max(s, 2 if m == "dispersion" else 1)],
                                    holdout, args.knn_k)
            rows.append(f"{_fmt(f)},{m},{s},{_fmt(acc)}")
            metrics.setdefault(m, {})[_fmt(f)] = acc
    _write_text(out / "curve.csv", "\n".join(rows) + "\n")
    _write_summary(
        out,
        args,
        timings={"total_seconds": time.perf_counter() - t0},
        kernel={"name": args.kernel},
        objective=",".join(methods),
        budget=None,
        selected_ids={m: [train.ids[j] for j in o] for m, o in orders.items()},
        metrics={"accuracy": metrics},
        label_names=list(train.label_names) if train.label_names else None,
    )
    return 0


# ---------------------------------------------------------------------------
# fass
# ---------------------------------------------------------------------------


def fass_config_from_args(args) -> FassConfig:
    return FassConfig(
        budget_pct=args.budget,
        beta_pct=args.beta,
        rounds=args.rounds,
        seed_size=args.seed_size,
        measure=args.measure,
        classifier=args.classifier,
        kernel=args.kernel,
        gamma=args.gamma,
        knn_k=args.knn_k,
        epochs=args.epochs,
        l2=args.l2,
        seed=args.rng_seed,
    )


def cmd_fass(args):
    out = _out_dir(args)
    pool = read_features(args.features)
    holdout = read_features(args.holdout)
    arms = _csv_list(args.arms, ARMS, "arm")
    config = fass_config_from_args(args)
    config.validate(pool.n, pool.n_classes)

    rows = ["arm,round,labeled_count,accuracy"]
    metrics, timings, selected = {}, {}, {}
    for arm in arms:
        t0 = time.perf_counter()
        run = run_arm(arm, pool, holdout, config)
        timings[arm] = {
            "total_seconds": time.perf_counter() - t0,
            "round_seconds": [r.wall_time for r in run.rounds],
        }
        for r in run.rounds:
            rows.append(f"{arm},{r.round},{r.labeled_count},{_fmt(r.accuracy)}")
        metrics[arm] = {
            "initial_labeled": len(run.seed_indices),
            "initial_accuracy": run.initial_accuracy,
            "final_accuracy": run.final_accuracy,
            "auc": run.area_under_curve(),
            "filtered_sizes": [r.filtered_size for r in run.rounds],
            "warnings": [w for r in run.rounds for w in r.warnings],
        }
        selected[arm] = {
            "seed": [pool.ids[i] for i in run.seed_indices],
            "rounds": [[pool.ids[i] for i in r.selected] for r in run.rounds],
        }
    _write_text(out / "curves.csv", "\n".join(rows) + "\n")
    _write_summary(
        out,
        args,
        timings=timings,
        kernel={"name": args.kernel},
        objective=",".join(arms),
        budget=args.budget,
        selected_ids=selected,
        metrics=metrics,
        label_names=list(pool.label_names) if pool.label_names else None,
    )
    return 0


# ---------------------------------------------------------------------------
# synth / kernel
# ---------------------------------------------------------------------------


def cmd_synth(args):
    out = _out_dir(args)
    spec = SyntheticSpec(
        clusters=args.clusters,
        per_cluster=args.per_cluster,
        dim=args.dim,
        sigma=args.sigma,
        n_classes=args.n_classes,
        class_rule=args.class_rule,
        redundancy=args.redundancy,
        center_scale=args.center_scale,
        layout=args.layout,
    )
    ext = "bin" if args.format == "bin" else "csv"
    path = Path(args.output) if args.output else out / f"synth.{ext}"
    if args.holdout_per_cluster:
        pool, holdout = generate_with_holdout(spec, args.rng_seed, args.holdout_per_cluster)
        hpath = Path(args.holdout_output) if args.holdout_output else out / f"holdout.{ext}"
        write_features(holdout, hpath, args.format)
    else:
        pool = generate(spec, args.rng_seed)
    write_features(pool, path, args.format)
    _write_summary(
        out,
        args,
        metrics={"rows": pool.n, "dim": pool.d},
    )
    return 0


def cmd_kernel(args):
    out = _out_dir(args)
    ds = read_features(args.features)
    if args.kind == "euclidean":
        M = kernels.euclidean_distance(ds, args.threads, args.memory_budget).d
        desc = {"name": "euclidean"}
    else:
        kargs = argparse.Namespace(**{**vars(args), "kernel": args.kind})
        sim, gamma = _similarity(ds, kargs)
        desc = _kernel_desc(kargs, gamma)
        M = sim.s
        if args.neighbors is not None:
            graph = kernels.knn_sparsify(sim, args.neighbors)
            lines = ["row,col,similarity"]
            for i in range(graph.n):
                for j, s in graph.row(i):
                    lines.append(f"{ds.ids[i]},{ds.ids[j]},{_fmt(s)}")
            _write_text(out / "graph.csv", "\n".join(lines) + "\n")
            desc["neighbors"] = args.neighbors
            _write_summary(out, args, kernel=desc, metrics={"n": ds.n})
            return 0
    if args.format == "bin":
        np.save(out / "kernel.npy", np.ascontiguousarray(M, dtype="<f8"))
    else:
        write_matrix_csv(M, out / "kernel.csv")
    _write_summary(out, args, kernel=desc, metrics={"n": ds.n})
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_global(p, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--rng-seed", type=int, default=d(0), help="unsigned 64-bit seed")
    p.add_argument("--format", choices=("csv", "bin"), default=d("csv"),
                   help="format of feature/matrix outputs")
    p.add_argument("--out", default=d("."), help="output directory")
    p.add_argument("--threads", type=int, default=d(1), help="worker threads (speed only)")
    p.add_argument("--timings", action="store_true", default=d(False),
                   help="record wall-clock timings in summary.json")
    p.add_argument("--memory-budget", type=int, default=d(kernels.DEFAULT_MEMORY_BUDGET),
                   help="max bytes for one dense n x n matrix")


def _add_kernel(p):
    p.add_argument("--kernel", choices=("cosine", "rbf"), default="cosine")
    p.add_argument("--gamma", type=float, default=None,
                   help="RBF width; default 1/median squared distance")


def build_parser():
    parser = _Parser(prog="subsel", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    _add_global(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("select", help="select a subset maximizing an objective")
    _add_global(p, suppress=True)
    p.add_argument("--features", required=True)
    _add_kernel(p)
    p.add_argument("--objective", choices=("fl", "fl-sparse", "dispersion", "mixture"),
                   default="fl")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--label-aware", action="store_true")
    p.add_argument("--optimizer", choices=("lazy", "naive"), default="lazy")
    p.add_argument("--neighbors", type=int, default=None, help="g for fl-sparse")
    p.add_argument("--lambda1", type=float, default=1.0)
    p.add_argument("--lambda2", type=float, default=1.0)
    p.add_argument("--dispersion-seed", choices=("pair", "single"), default="pair")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("eval-knn", help="kNN accuracy of selected subsets vs fraction")
    _add_global(p, suppress=True)
    p.add_argument("--train", required=True)
    p.add_argument("--holdout", required=True)
    p.add_argument("--fractions", default="5:100:5", help="start:stop:step or a,b,c")
    p.add_argument("--methods", default="fl,dispersion,random")
    p.add_argument("--random-repeats", type=int, default=5)
    p.add_argument("--knn-k", type=int, default=5)
    _add_kernel(p)
    p.add_argument("--label-aware", action="store_true")
    p.add_argument("--optimizer", choices=("lazy", "naive"), default="lazy")
    p.add_argument("--neighbors", type=int, default=None)
    p.add_argument("--lambda1", type=float, default=1.0)
    p.add_argument("--lambda2", type=float, default=1.0)
    p.add_argument("--dispersion-seed", choices=("pair", "single"), default="pair")
    p.set_defaults(func=cmd_eval_knn)

    p = sub.add_parser("fass", help="filtered submodular active learning")
    _add_global(p, suppress=True)
    p.add_argument("--features", required=True)
    p.add_argument("--holdout", required=True)
    p.add_argument("--arms", default=",".join(ARMS))
    p.add_argument("--budget", type=float, default=1.0, help="B: percent of pool per round")
    p.add_argument("--beta", type=float, default=10.0, help="beta: percent of unlabeled kept")
    p.add_argument("--rounds", type=int, default=10)
    p.add_argument("--seed-size", type=int, default=10)
    p.add_argument("--measure", choices=MEASURES, default="entropy")
    p.add_argument("--classifier", choices=("logreg", "knn"), default="logreg")
    _add_kernel(p)
    p.add_argument("--knn-k", type=int, default=5)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--l2", type=float, default=1e-3)
    p.set_defaults(func=cmd_fass)

    p = sub.add_parser("synth", help="generate a Gaussian-mixture feature file")
    _add_global(p, suppress=True)
    p.add_argument("--clusters", type=int, default=2)
    p.add_argument("--per-cluster", type=int, default=50)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--n-classes", type=int, default=2)
    p.add_argument("--class-rule", choices=CLASS_RULES, default="alternate")
    p.add_argument("--redundancy", type=int, default=1)
    p.add_argument("--center-scale", type=float, default=5.0)
    p.add_argument("--layout", choices=LAYOUTS, default="random")
    p.add_argument("--holdout-per-cluster", type=int, default=0)
    p.add_argument("--output", default=None)
    p.add_argument("--holdout-output", default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("kernel", help="dump a similarity or distance matrix")
    _add_global(p, suppress=True)
    p.add_argument("--features", required=True)
    p.add_argument("--kind", choices=("cosine", "rbf", "euclidean"), default="cosine")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--neighbors", type=int, default=None,
                   help="dump the top-g neighbor graph instead of the dense matrix")
    p.set_defaults(func=cmd_kernel)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if not 0 <= args.rng_seed < 2**64:
            raise ConfigInvalid(f"--rng-seed must be an unsigned 64-bit integer")
        if args.threads < 1:
            raise ConfigInvalid("--threads must be >= 1")
        return args.func(args)
    except SubselError as e:
        print(json.dumps(e.to_dict(), sort_keys=True), file=sys.stderr)
        return e.exit_code
    except (OSError, ValueError) as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

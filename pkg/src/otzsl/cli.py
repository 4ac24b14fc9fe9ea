"""Command-line interface: dataset generation, training, evaluation,
standalone transport solves, solver comparison curves, and feature export.

A JSON config file is the source of truth; flags override individual keys and
the fully resolved config is echoed into the output directory as config.json.
Exit codes: 0 success, 1 runtime failure, 2 usage or config error. The
OTZSL_THREADS environment variable is validated and echoed; every code path
is single-threaded, so any value keeps runs bit-reproducible.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import checkpoint as ckpt
from . import data as dataio
from . import ot
from .errors import ConfigError, DataFormatError, OtzslError
from .evaluate import ClassifierConfig, EvalConfig, evaluate, save_report
from .rng import SeededRng
from .training import TrainConfig, synthesize_class_features, train, write_trace_csv

GEN_DATA_DEFAULTS = {
    "seen_classes": 8,
    "unseen_classes": 4,
    "attr_dim": 16,
    "feature_dim": 32,
    "samples_per_class": 60,
    "noise_sigma": 0.3,
    "seed": 0,
}

TRAIN_DEFAULTS = {
    "data": None,
    "ot_prob": 0.9,
    "reg_weight": 1.0,
    "nca_scale": 0.5,
    "batch_size": 32,
    "learning_rate": 0.001,
    "epochs": 30,
    "seed": 0,
    "mode": "standard",
    "hidden_dim": 128,
    "ipot_reg": 0.5,
    "ipot_inner_iters": 1,
    "ipot_max_outer_iters": 200,
    "ipot_stop_tol": 1e-7,
}

EVAL_DEFAULTS = {
    "data": None,
    "checkpoint": None,
    "mode": "standard",
    "n_synth_per_class": 100,
    "seed": 0,
    "top_k": None,
    "include_real_seen": True,
    "classifier_learning_rate": 0.001,
    "classifier_epochs": 50,
    "classifier_batch_size": 128,
}

SOLVE_OT_DEFAULTS = {
    "cost": None,
    "solver": "ipot",
    "lambda": None,
    "iters": None,
    "stop_tol": 1e-9,
}

COMPARE_DEFAULTS = {
    "size": 32,
    "instances": 20,
    "iters": 500,
    "seed": 0,
}

EXPORT_DEFAULTS = {
    "data": None,
    "checkpoint": None,
    "classes": "unseen",
    "per_class": 100,
    "seed": 0,
}


def resolve_config(defaults: dict, config_path: str | None, overrides: dict) -> dict:
    cfg = dict(defaults)
    if config_path is not None:
        try:
            with open(config_path, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{config_path}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError(f"{config_path}: top level must be a JSON object")
        unknown = set(loaded) - set(defaults)
        if unknown:
            raise ConfigError(f"{config_path}: unknown keys {sorted(unknown)}")
        cfg.update(loaded)
    for key, value in overrides.items():
        if value is not None:
            cfg[key] = value
    return cfg


def thread_cap() -> int:
    raw = os.environ.get("OTZSL_THREADS", "1")
    try:
        cap = int(raw)
    except ValueError:
        raise ConfigError(f"OTZSL_THREADS must be an integer, got {raw!r}") from None
    if cap < 1:
        raise ConfigError(f"OTZSL_THREADS must be positive, got {cap}")
    return cap


def echo_config(cfg: dict, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    resolved = dict(cfg)
    resolved["threads"] = thread_cap()
    with open(os.path.join(out_dir, "config.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(resolved, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _require(cfg: dict, key: str, what: str) -> str:
    if not cfg.get(key):
        raise ConfigError(f"{what} is required (config key {key!r} or the matching flag)")
    return cfg[key]


def cmd_gen_data(args) -> int:
    cfg = resolve_config(GEN_DATA_DEFAULTS, args.config, {"seed": args.seed})
    try:
        spec = dataio.SyntheticSpec(**cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    attrs, dataset, _ = dataio.make_synthetic_dataset(spec)
    echo_config(cfg, args.out)
    dataio.save_dataset(args.out, attrs, dataset)
    n = sum(s[0].shape[0] for s in (dataset.seen_train, dataset.seen_test, dataset.unseen_test))
    print(f"wrote dataset to {args.out}: {attrs.n_classes} classes, {n} samples")
    return 0


def _train_config(cfg: dict) -> TrainConfig:
    ipot = ot.IpotConfig(
        reg=cfg["ipot_reg"],
        inner_iters=cfg["ipot_inner_iters"],
        max_outer_iters=cfg["ipot_max_outer_iters"],
        stop_tol=cfg["ipot_stop_tol"],
    )
    return TrainConfig(
        ot_prob=cfg["ot_prob"], reg_weight=cfg["reg_weight"], nca_scale=cfg["nca_scale"],
        ipot=ipot, batch_size=cfg["batch_size"], learning_rate=cfg["learning_rate"],
        epochs=cfg["epochs"], seed=cfg["seed"], mode=cfg["mode"], hidden_dim=cfg["hidden_dim"],
    )


def cmd_train(args) -> int:
    overrides = {
        "data": args.data, "seed": args.seed, "mode": args.mode,
        "epochs": args.epochs, "batch_size": args.batch_size,
    }
    cfg = resolve_config(TRAIN_DEFAULTS, args.config, overrides)
    data_dir = _require(cfg, "data", "dataset directory")
    attrs, dataset = dataio.load_dataset(data_dir)
    try:
        tc = _train_config(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    echo_config(cfg, args.out)
    result = train(dataset, attrs, tc)
    ckpt.save_checkpoint(os.path.join(args.out, "checkpoint.bin"), result.g, result.f,
                         result.adam)
    write_trace_csv(result.trace, os.path.join(args.out, "trace.csv"))
    tr = result.trace
    print(f"trained {len(tr)} iterations ({tc.epochs} epochs, mode {tc.mode})")
    print(f"final transport_cost {tr.transport_cost[-1]:.6g} "
          f"reg_loss {tr.reg_loss[-1]:.6g} total_loss {tr.total_loss[-1]:.6g}")
    print(f"wrote {os.path.join(args.out, 'checkpoint.bin')} and trace.csv")
    return 0


def cmd_eval(args) -> int:
    overrides = {
        "data": args.data, "checkpoint": args.checkpoint, "mode": args.mode,
        "seed": args.seed, "n_synth_per_class": args.n_synth_per_class,
        "top_k": args.top_k,
    }
    cfg = resolve_config(EVAL_DEFAULTS, args.config, overrides)
    data_dir = _require(cfg, "data", "dataset directory")
    ckpt_path = _require(cfg, "checkpoint", "checkpoint path")
    attrs, dataset = dataio.load_dataset(data_dir)
    g, _, _ = ckpt.load_checkpoint(ckpt_path)
    try:
        ec = EvalConfig(
            n_synth_per_class=cfg["n_synth_per_class"], seed=cfg["seed"],
            top_k=cfg["top_k"], include_real_seen=cfg["include_real_seen"],
            classifier=ClassifierConfig(
                learning_rate=cfg["classifier_learning_rate"],
                epochs=cfg["classifier_epochs"],
                batch_size=cfg["classifier_batch_size"],
            ),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    echo_config(cfg, args.out)
    report = evaluate(cfg["mode"], g, attrs, dataset, ec)
    save_report(report, os.path.join(args.out, "report.json"))
    if report.A_s is not None:
        print(f"A_s  {report.A_s:.4f}")
    print(f"A_u  {report.A_u:.4f}")
    if report.H is not None:
        print(f"H    {report.H:.4f}")
    if report.top_k is not None:
        print(f"top{cfg['top_k']} {report.top_k:.4f}")
    print(f"wrote {os.path.join(args.out, 'report.json')}")
    return 0


def cmd_solve_ot(args) -> int:
    overrides = {"cost": args.cost, "solver": args.solver,
                 "lambda": getattr(args, "lambda"), "iters": args.iters}
    cfg = resolve_config(SOLVE_OT_DEFAULTS, args.config, overrides)
    cost_path = _require(cfg, "cost", "cost matrix CSV")
    cost = dataio.load_matrix_csv(cost_path)
    solver = cfg["solver"]
    if solver not in ("ipot", "sinkhorn"):
        raise ConfigError(f"solver must be 'ipot' or 'sinkhorn', got {solver!r}")
    echo_config(cfg, args.out)
    marg = ot.Marginals.uniform(*cost.shape)
    if solver == "ipot":
        reg = cfg["lambda"] if cfg["lambda"] is not None else 0.5
        iters = cfg["iters"] if cfg["iters"] is not None else 100_000
        try:
            ipot_cfg = ot.IpotConfig(reg=reg, max_outer_iters=iters, stop_tol=cfg["stop_tol"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        plan = ot.ipot_solve(cost, marg, ipot_cfg, record_trace=True)
    else:
        reg = cfg["lambda"] if cfg["lambda"] is not None else 0.1
        iters = cfg["iters"] if cfg["iters"] is not None else 200
        if reg <= 0 or iters < 1:
            raise ConfigError("sinkhorn needs lambda > 0 and iters >= 1")
        plan = ot.sinkhorn_solve(cost, marg, reg=reg, iterations=iters, record_trace=True)
    dataio.save_matrix_csv(plan.values, os.path.join(args.out, "plan.csv"))
    if plan.trace is not None:
        dataio.save_matrix_csv(plan.trace, os.path.join(args.out, "solver_trace.csv"))
    report = ot.check_marginals(plan, marg)
    print(f"solver {solver}: cost {ot.transport_cost(plan, cost):.10g} "
          f"iterations {plan.iterations_used} converged {plan.converged}")
    print(f"feasibility: max row dev {report.max_row_dev:.3e}, "
          f"max col dev {report.max_col_dev:.3e}, min entry {report.min_entry:.3e}")
    return 0


def cmd_compare_solvers(args) -> int:
    overrides = {"size": args.size, "instances": args.instances,
                 "iters": args.iters, "seed": args.seed}
    cfg = resolve_config(COMPARE_DEFAULTS, args.config, overrides)
    if cfg["size"] < 2 or cfg["instances"] < 1 or cfg["iters"] < 1:
        raise ConfigError("size must be >= 2 and instances/iters >= 1")
    echo_config(cfg, args.out)
    rng = SeededRng(cfg["seed"])
    n = cfg["size"]
    rows = ["solver,lambda,instance,iteration,transport_cost,feasibility_error"]
    finals = {}
    for inst in range(cfg["instances"]):
        feat_rng = rng.split(inst + 1)
        real = feat_rng.gaussian(n * 16).reshape(n, 16)
        synth = feat_rng.gaussian(n * 16).reshape(n, 16)
        cost = ot.cosine_cost_matrix(real, synth)
        runs = [
            ("ipot", 0.5, ot.ipot_solve(
                cost, cfg=ot.IpotConfig(reg=0.5, max_outer_iters=cfg["iters"], stop_tol=0.0),
                record_trace=True)),
            ("sinkhorn", 0.1, ot.sinkhorn_solve(
                cost, reg=0.1, iterations=cfg["iters"], record_trace=True)),
            ("sinkhorn", 0.5, ot.sinkhorn_solve(
                cost, reg=0.5, iterations=cfg["iters"], record_trace=True)),
        ]
        for name, reg, plan in runs:
            for it, tc, feas in plan.trace:
                rows.append(f"{name},{reg},{inst},{int(it)},{tc:.17g},{feas:.17g}")
            finals.setdefault((name, reg), []).append(plan.trace[-1, 1])
    out_path = os.path.join(args.out, "curves.csv")
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")
    for (name, reg), costs in sorted(finals.items()):
        print(f"{name} (lambda={reg}): mean final cost {float(np.mean(costs)):.6f}")
    print(f"wrote {out_path}")
    return 0


def cmd_export(args) -> int:
    overrides = {
        "data": args.data, "checkpoint": args.checkpoint, "classes": args.classes,
        "per_class": args.per_class, "seed": args.seed,
    }
    cfg = resolve_config(EXPORT_DEFAULTS, args.config, overrides)
    data_dir = _require(cfg, "data", "dataset directory")
    ckpt_path = _require(cfg, "checkpoint", "checkpoint path")
    if cfg["classes"] not in ("seen", "unseen", "all"):
        raise ConfigError(f"classes must be seen, unseen, or all, got {cfg['classes']!r}")
    if cfg["per_class"] < 1:
        raise ConfigError(f"per_class must be positive, got {cfg['per_class']}")
    attrs, _ = dataio.load_dataset(data_dir)
    g, _, _ = ckpt.load_checkpoint(ckpt_path)
    pool = {"seen": attrs.seen_ids, "unseen": attrs.unseen_ids,
            "all": tuple(range(attrs.n_classes))}[cfg["classes"]]
    echo_config(cfg, args.out)
    feats, labels = synthesize_class_features(g, attrs, pool, cfg["per_class"],
                                              SeededRng(cfg["seed"]))
    out_path = os.path.join(args.out, "generated_features.csv")
    dataio.export_features_csv(feats, labels, out_path)
    print(f"wrote {feats.shape[0]} generated features to {out_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otzsl",
        description="Zero-shot recognition via primal optimal transport",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("gen-data", help="write a synthetic dataset directory")
    common(p)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train the feature generator")
    common(p)
    p.add_argument("--data", help="dataset directory")
    p.add_argument("--mode", choices=["standard", "generalized", "transductive"])
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained generator")
    common(p)
    p.add_argument("--data", help="dataset directory")
    p.add_argument("--checkpoint", help="checkpoint file from train")
    p.add_argument("--mode", choices=["standard", "generalized", "transductive"])
    p.add_argument("--n-synth-per-class", dest="n_synth_per_class", type=int)
    p.add_argument("--top-k", dest="top_k", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("solve-ot", help="solve one transport instance from a cost CSV")
    common(p)
    p.add_argument("--cost", help="cost matrix CSV path")
    p.add_argument("--solver", choices=["ipot", "sinkhorn"])
    p.add_argument("--lambda", type=float, help="solver regularization weight")
    p.add_argument("--iters", type=int, help="iteration budget")
    p.set_defaults(func=cmd_solve_ot)

    p = sub.add_parser("compare-solvers", help="record convergence curves on random instances")
    common(p)
    p.add_argument("--size", type=int, help="instance size N (square problems)")
    p.add_argument("--instances", type=int, help="number of random instances")
    p.add_argument("--iters", type=int, help="iterations per solver")
    p.set_defaults(func=cmd_compare_solvers)

    p = sub.add_parser("export", help="export generated features for external plotting")
    common(p)
    p.add_argument("--data", help="dataset directory")
    p.add_argument("--checkpoint", help="checkpoint file from train")
    p.add_argument("--classes", choices=["seen", "unseen", "all"])
    p.add_argument("--per-class", dest="per_class", type=int)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        thread_cap()
        return args.func(args)
    except (ConfigError, DataFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OtzslError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"unexpected error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

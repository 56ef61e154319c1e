"""Command-line entry point.

Subcommands cover the full pipeline: synthetic dataset generation,
pooled/single-action training, zero-shot evaluation, fine-tuning and a
gradient self-check.  Precedence is flags > config file > built-in
defaults; the fully-resolved configuration is written to
``config.resolved`` next to the outputs so any run can be reproduced.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from . import data as dataio
from . import figures, metrics, model, optim, protocols, synth
from .errors import AqaError, ArgumentError
from .numerics import Rng

TRAIN_DEFAULTS = {
    "actions": "all",
    "batch_videos": 15,
    "iterations": 20000,
    "lr0": 0.001,
    "anneal_every": 3000,
    "anneal_factor": 2.0,
    "init_std": 0.1,
    "steps": 6,
    "feature_dim": 64,
    "hidden": model.DEFAULT_HIDDEN,
    "augmentation_copies": 6,
    "eval_every": 100,
}

SYNTH_DEFAULTS = {
    "num_classes": 6,
    "latent_dim": 4,
    "feature_dim": 64,
    "steps": 6,
    "train_per_class": 200,
    "test_per_class": 50,
    "noise_std": 0.1,
    "distractor_dim": 8,
    "class_mean_scale": 1.0,
    "copies": 6,
    "matched_pairs": [],
}

FINETUNE_DEFAULTS = {
    "sizes": {25: [100, 500], 75: [300, 1200], 125: [500, 2000]},
}

TOP_DEFAULTS = {
    "seed": 0,
    "validate_scores": True,
}


def _merge_section(defaults: dict, overrides: dict, section: str) -> dict:
    merged = dict(defaults)
    for key, value in overrides.items():
        if key not in defaults:
            raise ArgumentError(
                f"unknown config key {section}.{key!r}; "
                f"valid: {sorted(defaults)}"
            )
        merged[key] = value
    return merged


def load_config(path: str | None) -> dict:
    """Config file merged over defaults; unknown keys rejected."""
    doc = {}
    if path:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh) or {}
        if not isinstance(doc, dict):
            raise ArgumentError(f"{path}: config must be a mapping")
    sections = {"train", "synth", "finetune"}
    resolved = _merge_section(
        TOP_DEFAULTS,
        {k: v for k, v in doc.items() if k not in sections},
        "top-level",
    )
    resolved["train"] = _merge_section(
        TRAIN_DEFAULTS, doc.get("train", {}), "train"
    )
    resolved["synth"] = _merge_section(
        SYNTH_DEFAULTS, doc.get("synth", {}), "synth"
    )
    resolved["finetune"] = _merge_section(
        FINETUNE_DEFAULTS, doc.get("finetune", {}), "finetune"
    )
    return resolved


def _write_resolved(cfg: dict, out_dir: Path) -> None:
    with open(out_dir / "config.resolved", "w", encoding="utf-8") as fh:
        yaml.safe_dump(cfg, fh, sort_keys=True)


def _train_config(cfg: dict, actions: list[str]) -> protocols.TrainConfig:
    t = cfg["train"]
    return protocols.TrainConfig(
        actions_included=actions,
        batch_videos=t["batch_videos"],
        iterations=t["iterations"],
        sched=optim.LrSchedule(t["lr0"], t["anneal_every"], t["anneal_factor"]),
        init_std=t["init_std"],
        seed=cfg["seed"],
        steps=t["steps"],
        feature_dim=t["feature_dim"],
        hidden=t["hidden"],
        augmentation_copies=t["augmentation_copies"],
        eval_every=t["eval_every"],
    )


def _open_dataset(cfg: dict, data_dir: str) -> dataio.Dataset:
    return dataio.Dataset(
        data_dir,
        validate_range=cfg["validate_scores"],
        steps=cfg["train"]["steps"],
        dim=cfg["train"]["feature_dim"],
    )


def _resolve_actions(spec: str, dataset: dataio.Dataset) -> list[str]:
    available = dataset.action_names()
    if spec == "all":
        return available
    actions = [a.strip() for a in spec.split(",") if a.strip()]
    for a in actions:
        if a not in available:
            raise ArgumentError(
                f"unknown action {a!r}; dataset has {available}"
            )
    return actions


def _synth_spec(cfg: dict) -> synth.SynthSpec:
    s = cfg["synth"]
    classes = synth._default_classes()[: s["num_classes"]]
    if len(classes) < s["num_classes"]:
        raise ArgumentError(
            f"num_classes is at most {len(synth._default_classes())}"
        )
    return synth.SynthSpec(
        classes=classes,
        latent_dim=s["latent_dim"],
        feature_dim=s["feature_dim"],
        steps=s["steps"],
        train_per_class=s["train_per_class"],
        test_per_class=s["test_per_class"],
        noise_std=s["noise_std"],
        distractor_dim=s["distractor_dim"],
        class_mean_scale=s["class_mean_scale"],
        copies=s["copies"],
        seed=cfg["seed"],
        matched_pairs=[tuple(p) for p in s["matched_pairs"]],
    )


def _finetune_schedule(cfg: dict) -> protocols.FinetuneSchedule:
    table = {
        int(k): (int(v[0]), int(v[1]))
        for k, v in cfg["finetune"]["sizes"].items()
    }
    return protocols.FinetuneSchedule(table)


def _write_eval_outputs(report, history, out: Path) -> None:
    metrics.write_report_csv(report, out / "report.csv")
    metrics.write_report_json(report, out / "report.json")
    if history is not None:
        history.write_csv(out / "history.csv")
        figures.plot_history(history, out / "history.png")


def cmd_gen_synth(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"error: output directory {out} not writable: {exc}",
              file=sys.stderr)
        return 1
    spec = _synth_spec(cfg)
    counts = synth.generate(spec, out)
    _write_resolved(cfg, out)
    total = 0
    for name, by_split in counts.items():
        print(f"{name}: train={by_split['train']} test={by_split['test']}")
        total += sum(by_split.values())
    print(f"total: {total} samples x {spec.copies} copies")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.actions is not None:
        cfg["train"]["actions"] = args.actions
    if args.iterations is not None:
        cfg["train"]["iterations"] = args.iterations
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = _open_dataset(cfg, args.data)
    actions = _resolve_actions(cfg["train"]["actions"], dataset)
    config = _train_config(cfg, actions)
    stats = dataio.compute_norm_stats(dataset.train_records(actions))
    params, history = train_with_log(config, dataset, stats, out)
    report = _final_report(params, dataset, actions, stats)
    _write_resolved(cfg, out)
    _write_eval_outputs(report, history, out)
    print(f"final avg rho: {report.avg_rho:.4f}")
    return 0


def train_with_log(config, dataset, stats, out: Path):
    print(
        f"training on {config.actions_included} "
        f"({len(dataset.train_records(config.actions_included))} samples, "
        f"{config.iterations} iterations)",
        file=sys.stderr,
    )
    return protocols.train(config, dataset, stats, checkpoint_dir=out)


def _final_report(params, dataset, actions, stats) -> metrics.EvalReport:
    by_action = {}
    for action in actions:
        recs = dataset.test_records([action])
        seqs = np.stack([dataset.features(r, 0) for r in recs])
        preds = model.predict(params, seqs)
        preds = [dataio.denormalize_score(p, action, stats) for p in preds]
        by_action[action] = (preds, [r.raw_score for r in recs])
    return metrics.build_report(by_action)


def cmd_zero_shot(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.iterations is not None:
        cfg["train"]["iterations"] = args.iterations
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = _open_dataset(cfg, args.data)
    available = dataset.action_names()
    if args.holdout not in available:
        print(
            f"error: unknown action {args.holdout!r}; valid: {available}",
            file=sys.stderr,
        )
        return 1
    trained_actions = [a for a in available if a != args.holdout]
    config = _train_config(cfg, trained_actions)
    holdout_stats = dataio.compute_norm_stats(
        dataset.train_records([args.holdout])
    )
    history = None
    if args.baseline == "random":
        rng = Rng(cfg["seed"]).spawn()
        params = model.init_params(
            config.hidden, config.feature_dim, config.init_std, rng
        )
        print("evaluating random initialization (no training)",
              file=sys.stderr)
    else:
        stats = dataio.compute_norm_stats(
            dataset.train_records(trained_actions)
        )
        params, history = train_with_log(config, dataset, stats, out)
    rho = protocols.zero_shot_eval(
        params, trained_actions, args.holdout, dataset, holdout_stats
    )
    report = _final_report(params, dataset, [args.holdout], holdout_stats)
    _write_resolved(cfg, out)
    _write_eval_outputs(report, history, out)
    model.save_params(out / "final.aqam", params)
    print(f"held-out {args.holdout} rho: {rho:.4f}")
    return 0


def cmd_finetune(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = _open_dataset(cfg, args.data)
    available = dataset.action_names()
    if args.novel not in available:
        print(
            f"error: unknown action {args.novel!r}; valid: {available}",
            file=sys.stderr,
        )
        return 1
    pretrained = (
        None if args.source == "random" else model.load_params(args.source)
    )
    schedule = _finetune_schedule(cfg)
    config = _train_config(cfg, [args.novel])
    params, history = protocols.finetune(
        pretrained,
        args.novel,
        args.train_size,
        dataset,
        schedule,
        cfg["seed"],
        config=config,
        checkpoint_dir=out,
    )
    stats = dataio.compute_norm_stats(dataset.train_records([args.novel]))
    report = _final_report(params, dataset, [args.novel], stats)
    _write_resolved(cfg, out)
    _write_eval_outputs(report, history, out)
    print(f"final {args.novel} rho: {report.rho_by_action[args.novel]:.4f}")
    return 0


def cmd_grad_check(args) -> int:
    if args.trials < 1:
        print("error: --trials must be >= 1", file=sys.stderr)
        return 1
    rng = Rng(args.seed)
    worst = 0.0
    for _ in range(args.trials):
        params = model.init_params(args.hidden, args.dim, 0.3, rng.spawn())
        seq = rng.normal_block(args.steps * args.dim).reshape(
            args.steps, args.dim
        )
        target = rng.normal()
        report = model.grad_check(
            params, seq, target, h=1e-5, perturb=args.inject_fault
        )
        worst = max(worst, report.max_rel_error)
    print(f"max relative error over {args.trials} trials: {worst:.3e}")
    return 0 if worst < args.tol else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aqa",
        description="Action-quality score regression and transfer protocols",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_data=True):
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", required=True, help="output directory")
        if needs_data:
            p.add_argument("--data", required=True, help="dataset directory")

    p = sub.add_parser("gen-synth", help="generate a synthetic dataset")
    common(p, needs_data=False)
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("train", help="train on one or more actions")
    common(p)
    p.add_argument("--actions", default=None,
                   help="'all' or comma-separated action names")
    p.add_argument("--iterations", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("zero-shot", help="train minus one action, eval on it")
    common(p)
    p.add_argument("--holdout", required=True)
    p.add_argument("--baseline", choices=["random"], default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.set_defaults(func=cmd_zero_shot)

    p = sub.add_parser("finetune", help="adapt to a novel action")
    common(p)
    p.add_argument("--novel", required=True)
    p.add_argument("--train-size", type=int, required=True)
    p.add_argument("--from", dest="source", required=True,
                   help="checkpoint path or 'random'")
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("grad-check", help="verify gradients numerically")
    p.add_argument("--hidden", type=int, default=8)
    p.add_argument("--dim", type=int, default=5)
    p.add_argument("--steps", type=int, default=6)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--inject-fault", type=float, default=0.0,
                   help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_grad_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AqaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Experiment procedures: pooled or single-action training, zero-shot
evaluation on an unseen action, and small-sample fine-tuning.

Training draws epoch-shuffled batches over every (sample, augmentation
copy) pair of the included actions; a batch may span an epoch boundary so
no pair repeats before all are visited.  Everything is deterministic
given the seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import data as dataio
from . import metrics, model, optim
from .errors import ArgumentError, DimensionMismatchError
from .numerics import Rng


@dataclass
class TrainConfig:
    actions_included: list[str] = field(
        default_factory=lambda: list(dataio.EXPERIMENT_ACTIONS)
    )
    batch_videos: int = 15
    iterations: int = 20000
    sched: optim.LrSchedule = field(default_factory=optim.LrSchedule)
    init_std: float = 0.1
    seed: int = 0
    steps: int = 6
    feature_dim: int = 64
    hidden: int = model.DEFAULT_HIDDEN
    augmentation_copies: int = 6
    eval_every: int = 100

    def __post_init__(self):
        if self.batch_videos < 1:
            raise ArgumentError("batch_videos must be >= 1")
        if not self.actions_included:
            raise ArgumentError("actions_included must be non-empty")


@dataclass
class HistoryPoint:
    iteration: int
    train_loss: float
    rho_by_action: dict[str, float]


@dataclass
class RunHistory:
    points: list[HistoryPoint] = field(default_factory=list)
    # training samples consumed per action, for hygiene assertions
    samples_seen: dict[str, int] = field(default_factory=dict)

    def best_rho(self, action: str) -> float:
        return max(p.rho_by_action[action] for p in self.points)

    def rho_at(self, iteration: int, action: str) -> float:
        for p in self.points:
            if p.iteration == iteration:
                return p.rho_by_action[action]
        raise KeyError(f"no checkpoint at iteration {iteration}")

    def write_csv(self, path: str | Path) -> None:
        actions = (
            list(self.points[0].rho_by_action) if self.points else []
        )
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["iteration", "loss"] + [f"{a}_rho" for a in actions]
            )
            for p in self.points:
                writer.writerow(
                    [p.iteration, f"{p.train_loss:.17g}"]
                    + [f"{p.rho_by_action[a]:.17g}" for a in actions]
                )


def _batch_stream(pool: list, batch_size: int, rng: Rng):
    """Endless batches over epoch-shuffled copies of the pool."""
    epoch: list = []
    while True:
        batch = []
        while len(batch) < batch_size:
            if not epoch:
                epoch = list(pool)
                rng.shuffle(epoch)
            batch.append(epoch.pop())
        yield batch


def _evaluate(
    params: model.ModelParams,
    dataset: dataio.Dataset,
    actions: list[str],
    stats: dataio.NormStats,
) -> dict[str, float]:
    """Test-set Spearman per action, copy 0, denormalized predictions."""
    rho = {}
    for action in actions:
        recs = dataset.test_records([action])
        seqs = np.stack([dataset.features(r, 0) for r in recs])
        preds = model.predict(params, seqs)
        preds = np.array(
            [dataio.denormalize_score(p, action, stats) for p in preds]
        )
        truth = [r.raw_score for r in recs]
        rho[action] = metrics.spearman(preds, truth)
    return rho


def train(
    config: TrainConfig,
    dataset: dataio.Dataset,
    stats: dataio.NormStats,
    init: model.ModelParams | None = None,
    checkpoint_dir: str | Path | None = None,
) -> tuple[model.ModelParams, RunHistory]:
    """Run the optimization loop and record checkpoints every eval_every
    iterations.  The recorded loss is the mean training loss since the
    previous checkpoint."""
    train_recs = dataset.train_records(config.actions_included)
    if not train_recs:
        raise ArgumentError(
            f"no training samples for actions {config.actions_included}"
        )
    for rec in train_recs:
        seq = dataset.features(rec, 0)
        if seq.shape != (config.steps, config.feature_dim):
            raise DimensionMismatchError(
                f"{rec.sample_id}: features {seq.shape}, expected "
                f"({config.steps}, {config.feature_dim})"
            )

    rng = Rng(config.seed)
    init_rng = rng.spawn()
    shuffle_rng = rng.spawn()
    params = (
        init.copy()
        if init is not None
        else model.init_params(
            config.hidden, config.feature_dim, config.init_std, init_rng
        )
    )
    state = optim.AdamState.for_params(params)
    history = RunHistory()

    pool = [
        (rec, copy)
        for rec in train_recs
        for copy in range(config.augmentation_copies)
    ]
    batches = _batch_stream(pool, config.batch_videos, shuffle_rng)

    window_losses: list[float] = []
    for iteration in range(1, config.iterations + 1):
        batch = next(batches)
        seqs = np.stack([dataset.features(rec, copy) for rec, copy in batch])
        targets = np.array(
            [
                dataio.normalize_score(rec.raw_score, rec.action.name, stats)
                for rec, _ in batch
            ]
        )
        for rec, _ in batch:
            history.samples_seen[rec.action.name] = (
                history.samples_seen.get(rec.action.name, 0) + 1
            )
        grads = model.backward(params, seqs, targets)
        window_losses.append(grads.loss)
        optim.adam_step(
            params, grads, state, optim.lr_at(config.sched, iteration - 1)
        )
        if iteration % config.eval_every == 0 or iteration == config.iterations:
            rho = _evaluate(params, dataset, config.actions_included, stats)
            history.points.append(
                HistoryPoint(
                    iteration, float(np.mean(window_losses)), rho
                )
            )
            window_losses = []
            if checkpoint_dir is not None:
                model.save_params(
                    Path(checkpoint_dir) / f"ckpt_{iteration}.aqam", params
                )
    return params, history


def zero_shot_eval(
    params: model.ModelParams,
    trained_actions: list[str],
    held_out: str,
    dataset: dataio.Dataset,
    stats: dataio.NormStats,
) -> float:
    """Spearman on the held-out class's test split, copy 0.

    stats must contain the held-out class's training-split std; it is used
    only to denormalize predictions (rank correlation is unaffected).
    """
    if held_out in trained_actions:
        raise ArgumentError(
            f"held-out action {held_out!r} is among the trained actions"
        )
    recs = dataset.test_records([held_out])
    if not recs:
        raise ArgumentError(f"no test samples for action {held_out!r}")
    rho = _evaluate(params, dataset, [held_out], stats)
    return rho[held_out]


def single_action_transfer_matrix(
    dataset: dataio.Dataset,
    config: TrainConfig,
    actions: list[str] | None = None,
) -> tuple[list[str], np.ndarray]:
    """Entry (i, j): Spearman of the model trained only on action i,
    evaluated on action j's test split.  Diagonal is matched train/test."""
    actions = list(actions if actions is not None else config.actions_included)
    n = len(actions)
    mat = np.zeros((n, n))
    for i, src in enumerate(actions):
        cfg = replace(config, actions_included=[src])
        stats = dataio.compute_norm_stats(dataset.train_records([src]))
        params, _ = train(cfg, dataset, stats)
        # each target class denormalizes with its own training std
        all_stats = dataio.compute_norm_stats(dataset.train_records(actions))
        rho = _evaluate(params, dataset, actions, all_stats)
        for j, dst in enumerate(actions):
            mat[i, j] = rho[dst]
    return actions, mat


@dataclass
class FinetuneSchedule:
    """train_size -> (anneal_every, iterations), linearly interpolated
    (and extrapolated) between the anchor sizes."""

    table: dict[int, tuple[int, int]] = field(
        default_factory=lambda: {25: (100, 500), 75: (300, 1200), 125: (500, 2000)}
    )

    def lookup(self, train_size: int) -> tuple[int, int]:
        if train_size < 1:
            raise ArgumentError("train_size must be >= 1")
        sizes = sorted(self.table)
        if train_size in self.table:
            return self.table[train_size]
        if train_size <= sizes[0]:
            lo, hi = sizes[0], sizes[1]
        elif train_size >= sizes[-1]:
            lo, hi = sizes[-2], sizes[-1]
        else:
            lo = max(s for s in sizes if s < train_size)
            hi = min(s for s in sizes if s > train_size)
        frac = (train_size - lo) / (hi - lo)
        out = []
        for k in range(2):
            v = self.table[lo][k] + frac * (self.table[hi][k] - self.table[lo][k])
            out.append(max(1, round(v)))
        return out[0], out[1]


def finetune(
    pretrained: model.ModelParams | None,
    novel: str,
    train_size: int,
    dataset: dataio.Dataset,
    schedule: FinetuneSchedule,
    seed: int,
    config: TrainConfig | None = None,
    checkpoint_dir: str | Path | None = None,
) -> tuple[model.ModelParams, RunHistory]:
    """Adapt to a novel action with few samples and scaled hyperparameters.

    pretrained=None starts from a fresh random initialization (the
    from-scratch baseline).  The training subset is a seeded draw of
    train_size samples from the novel class's train split.
    """
    base = config or TrainConfig()
    all_train = dataset.train_records([novel])
    if len(all_train) < train_size:
        raise ArgumentError(
            f"action {novel!r} has {len(all_train)} train samples, "
            f"need {train_size}"
        )
    if not dataset.test_records([novel]):
        raise ArgumentError(f"no test samples for action {novel!r}")
    anneal_every, iterations = schedule.lookup(train_size)

    picker = Rng(seed).spawn()
    picked = list(all_train)
    picker.shuffle(picked)
    picked = picked[:train_size]
    picked_ids = {r.sample_id for r in picked}

    subset = _SubsetView(dataset, novel, picked_ids)
    stats = dataio.compute_norm_stats(picked)
    cfg = replace(
        base,
        actions_included=[novel],
        iterations=iterations,
        sched=optim.LrSchedule(0.001, anneal_every, base.sched.anneal_factor),
        seed=seed,
    )
    return train(cfg, subset, stats, init=pretrained, checkpoint_dir=checkpoint_dir)


class _SubsetView:
    """Dataset facade restricting one action's train split to chosen ids."""

    def __init__(self, dataset: dataio.Dataset, action: str, train_ids: set):
        self._dataset = dataset
        self._action = action
        self._train_ids = train_ids

    def train_records(self, actions=None):
        return [
            r
            for r in self._dataset.train_records(actions)
            if r.sample_id in self._train_ids
        ]

    def test_records(self, actions=None):
        return self._dataset.test_records(actions)

    def features(self, record, copy=0):
        return self._dataset.features(record, copy)

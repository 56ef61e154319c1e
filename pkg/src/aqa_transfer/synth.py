"""Synthetic multi-action datasets with a shared latent quality factor.

Every class scores the same scalar quality g = w . q through its own
affine map (offset, scale), so quality concepts transfer across classes
by construction.  Clip-step features mix the latent through a shared
matrix with a temporal ramp, plus a class-specific distractor subspace
and isotropic noise:

    x_t = (t / T) * U q + m_c + V_c z + eps_t

The per-class mean signature m_c mirrors how differently the sports look
on screen: it lets a pooled model identify the class and absorb the
class-specific offset of the normalized score target.  Augmentation
copies share q and z and differ only in the noise draw.
A closed-form ridge regression on time-averaged features provides an
independent achievability reference for the trained model.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import data as dataio
from .errors import ArgumentError
from .numerics import Rng


@dataclass(frozen=True)
class ClassSpec:
    name: str
    offset: float  # score map: raw = offset + scale * g
    scale: float

    def __post_init__(self):
        if self.scale <= 0:
            raise ArgumentError(f"scale must be > 0 for class {self.name}")


def _default_classes() -> list[ClassSpec]:
    # offsets/scales echo the disparate judged score ranges so the
    # normalization paths see realistic magnitudes
    return [
        ClassSpec("Diving", 62.1, 8.1),
        ClassSpec("Gymvault", 14.585, 0.457),
        ClassSpec("Skiing", 29.0, 4.2),
        ClassSpec("Snowboard", 29.0, 4.2),
        ClassSpec("SyncDive3m", 75.54, 5.868),
        ClassSpec("SyncDive10m", 74.58, 4.956),
    ]


@dataclass
class SynthSpec:
    classes: list[ClassSpec] = field(default_factory=_default_classes)
    latent_dim: int = 4
    feature_dim: int = 64
    steps: int = 6
    train_per_class: int = 200
    test_per_class: int = 50
    noise_std: float = 0.1
    distractor_dim: int = 8
    class_mean_scale: float = 1.0
    copies: int = 6
    seed: int = 0
    # class-name pairs that share distractor mixing and mean signature
    # (similar actions whose idiosyncrasies overlap)
    matched_pairs: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        if min(self.latent_dim, self.feature_dim, self.steps) < 1:
            raise ArgumentError("latent_dim, feature_dim, steps must be >= 1")
        if self.distractor_dim < 0 or self.noise_std < 0:
            raise ArgumentError("distractor_dim and noise_std must be >= 0")
        if not self.classes:
            raise ArgumentError("need at least one class")


def generate(spec: SynthSpec, out_dir: str | Path) -> dict[str, dict[str, int]]:
    """Write manifest.csv, per-copy .aqaf files and truth.csv.

    Byte-identical output for identical specs.  Returns per-class sample
    counts by split.
    """
    out = Path(out_dir)
    (out / "features").mkdir(parents=True, exist_ok=True)
    rng = Rng(spec.seed)
    ld, fd, kd = spec.latent_dim, spec.feature_dim, spec.distractor_dim

    w = rng.normal_block(ld)
    w = w / np.linalg.norm(w)
    mix = rng.normal_block(fd * ld).reshape(fd, ld) / np.sqrt(ld)
    distractors: dict[str, np.ndarray] = {}
    means: dict[str, np.ndarray] = {}
    pair_of = {}
    for a, b in spec.matched_pairs:
        pair_of[b] = a
    for cls in spec.classes:
        if cls.name in pair_of and pair_of[cls.name] in distractors:
            distractors[cls.name] = distractors[pair_of[cls.name]]
            means[cls.name] = means[pair_of[cls.name]]
            continue
        if kd == 0:
            distractors[cls.name] = np.zeros((fd, 0))
        else:
            distractors[cls.name] = (
                rng.normal_block(fd * kd).reshape(fd, kd) / np.sqrt(kd)
            )
        means[cls.name] = spec.class_mean_scale * rng.normal_block(fd)

    ramp = (np.arange(1, spec.steps + 1) / spec.steps)[:, None]
    manifest_rows = []
    truth_rows = []
    counts: dict[str, dict[str, int]] = {}
    for cls in spec.classes:
        counts[cls.name] = {"train": 0, "test": 0}
        v_c = distractors[cls.name]
        m_c = means[cls.name]
        for split, n_split in (
            ("train", spec.train_per_class),
            ("test", spec.test_per_class),
        ):
            for idx in range(n_split):
                sample_id = f"{cls.name.lower()}_{split}_{idx:04d}"
                q = rng.normal_block(ld)
                z = rng.normal_block(kd)
                g = float(w @ q)
                raw = cls.offset + cls.scale * g
                signal = ramp * (mix @ q)[None, :] + (m_c + v_c @ z)[None, :]
                for copy in range(spec.copies):
                    eps = spec.noise_std * rng.normal_block(
                        spec.steps * fd
                    ).reshape(spec.steps, fd)
                    dataio.write_features(
                        out / "features" / f"{sample_id}_c{copy}.aqaf",
                        signal + eps,
                    )
                manifest_rows.append(
                    [sample_id, cls.name, f"{raw:.17g}", split,
                     f"features/{sample_id}"]
                )
                truth_rows.append([sample_id, f"{g:.17g}"])
                counts[cls.name][split] += 1

    with open(out / "manifest.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "action", "raw_score", "split",
                         "feature_path"])
        writer.writerows(manifest_rows)
    with open(out / "truth.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "quality"])
        writer.writerows(truth_rows)
    return counts


def oracle_fit(
    dataset: dataio.Dataset,
    train_actions: list[str] | None = None,
    eval_actions: list[str] | None = None,
    ridge: float = 1e-3,
) -> dict[str, float]:
    """Ridge regression from time-averaged copy-0 features to normalized
    scores; per-class test Spearman.  Serves as the achievability
    reference the LSTM is judged against."""
    if ridge <= 0:
        raise ArgumentError("ridge must be > 0")
    from .metrics import spearman

    train_actions = train_actions or dataset.action_names()
    eval_actions = eval_actions or dataset.action_names()
    train_recs = dataset.train_records(train_actions)
    stats = dataio.compute_norm_stats(train_recs)

    def design(recs):
        x = np.stack([dataset.features(r, 0).mean(axis=0) for r in recs])
        return np.hstack([x, np.ones((len(recs), 1))])

    x = design(train_recs)
    y = np.array(
        [
            dataio.normalize_score(r.raw_score, r.action.name, stats)
            for r in train_recs
        ]
    )
    gram = x.T @ x + ridge * np.eye(x.shape[1])
    beta = np.linalg.solve(gram, x.T @ y)

    rho = {}
    for action in eval_actions:
        recs = dataset.test_records([action])
        preds = design(recs) @ beta
        rho[action] = spearman(preds, [r.raw_score for r in recs])
    return rho

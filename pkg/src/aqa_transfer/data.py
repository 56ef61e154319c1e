"""Sample manifests, clip planning, score normalization and the binary
clip-feature file format.

Feature files hold one augmentation copy each; the manifest stores a path
stem and the loader resolves ``<stem>_c<copy>.aqaf``.  Evaluation always
reads copy 0; the shifted copies exist only for training.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ArgumentError,
    DegenerateActionError,
    DimensionMismatchError,
    FormatError,
    InsufficientFramesError,
    ManifestError,
    SampleTooLongError,
    UnknownActionError,
)

AQAF_MAGIC = b"AQAF"
AQAF_VERSION = 1

PAD_TARGET_FRAMES = 103
CLIP_LEN = 16
CLIP_STRIDE = 16
AUGMENTATION_COPIES = 6


@dataclass(frozen=True)
class ActionClass:
    name: str
    score_min: float
    score_max: float

    def __post_init__(self):
        if not self.score_min < self.score_max:
            raise ArgumentError(
                f"score range must satisfy min < max, got "
                f"[{self.score_min}, {self.score_max}] for {self.name}"
            )


# Score ranges of the seven judged actions.  Trampoline is kept in
# the registry so manifests naming it fail with a length error rather than an
# unknown-action error, but it never takes part in experiments.
DEFAULT_ACTIONS: dict[str, ActionClass] = {
    a.name: a
    for a in [
        ActionClass("Diving", 21.60, 102.60),
        ActionClass("Gymvault", 12.30, 16.87),
        ActionClass("Skiing", 8.0, 50.0),
        ActionClass("Snowboard", 8.0, 50.0),
        ActionClass("SyncDive3m", 46.20, 104.88),
        ActionClass("SyncDive10m", 49.80, 99.36),
        ActionClass("Trampoline", 6.72, 62.99),
    ]
}

EXPERIMENT_ACTIONS = [
    "Diving",
    "Gymvault",
    "Skiing",
    "Snowboard",
    "SyncDive3m",
    "SyncDive10m",
]


@dataclass(frozen=True)
class SampleRecord:
    sample_id: str
    action: ActionClass
    raw_score: float
    split: str  # "train" | "test"
    feature_path: str  # stem relative to the manifest directory


@dataclass(frozen=True)
class ClipPlan:
    num_frames: int
    clip_len: int
    stride: int
    copies: tuple[tuple[int, ...], ...]  # copy k -> clip start frames

    @property
    def clips_per_copy(self) -> int:
        return len(self.copies[0])


@dataclass(frozen=True)
class NormStats:
    """Per-action training-set standard deviation, judge units."""

    std_by_action: dict[str, float]

    def std(self, action: str) -> float:
        try:
            return self.std_by_action[action]
        except KeyError:
            raise UnknownActionError(f"no normalization stats for action {action!r}")


def pad_length(raw_frames: int, target: int = PAD_TARGET_FRAMES) -> int:
    """Zero frames to prepend so the video reaches the fixed length."""
    if raw_frames > target:
        raise SampleTooLongError(
            f"sample has {raw_frames} frames, exceeds target {target}"
        )
    return target - raw_frames


def plan_clips(
    num_frames: int,
    clip_len: int = CLIP_LEN,
    stride: int = CLIP_STRIDE,
    copies: int = AUGMENTATION_COPIES,
) -> ClipPlan:
    """Windows for every augmentation copy, one-frame offset apart.

    All copies carry the same clip count: the maximal n with
    (copies-1) + (n-1)*stride + clip_len <= num_frames, so the sequence
    length the model sees is constant across augmentation.
    """
    if clip_len <= 0 or stride <= 0 or copies < 1:
        raise ArgumentError("clip_len, stride must be > 0 and copies >= 1")
    max_offset = copies - 1
    span = num_frames - max_offset - clip_len
    if span < 0:
        raise InsufficientFramesError(
            f"{num_frames} frames cannot fit one {clip_len}-frame clip "
            f"at offset {max_offset}"
        )
    n = span // stride + 1
    starts = tuple(
        tuple(k + i * stride for i in range(n)) for k in range(copies)
    )
    return ClipPlan(num_frames, clip_len, stride, starts)


def compute_norm_stats(train: list[SampleRecord]) -> NormStats:
    """Population standard deviation of raw train scores, per action."""
    by_action: dict[str, list[float]] = {}
    for rec in train:
        by_action.setdefault(rec.action.name, []).append(rec.raw_score)
    stats = {}
    for name, scores in by_action.items():
        if len(scores) < 2:
            raise DegenerateActionError(
                f"action {name!r} has only {len(scores)} training sample(s)"
            )
        std = float(np.std(np.asarray(scores)))
        if std == 0.0:
            raise DegenerateActionError(
                f"action {name!r} has zero training score variance"
            )
        stats[name] = std
    return NormStats(stats)


def normalize_score(raw: float, action: str, stats: NormStats) -> float:
    return raw / stats.std(action)


def denormalize_score(pred: float, action: str, stats: NormStats) -> float:
    return pred * stats.std(action)


def load_manifest(
    path: str | Path,
    actions: dict[str, ActionClass] = DEFAULT_ACTIONS,
    validate_range: bool = True,
) -> list[SampleRecord]:
    """Parse and validate a manifest CSV.

    Any malformed line aborts the load with a diagnostic naming the line;
    a partial dataset is never returned.
    """
    path = Path(path)
    expected = ["sample_id", "action", "raw_score", "split", "feature_path"]
    records: list[SampleRecord] = []
    seen: set[str] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestError(f"{path}: empty manifest")
        if header != expected:
            raise ManifestError(
                f"{path}:1: bad header {header!r}, expected {expected!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected):
                raise ManifestError(
                    f"{path}:{lineno}: expected {len(expected)} fields, got {len(row)}"
                )
            sample_id, action_name, score_str, split, feature_path = row
            if sample_id in seen:
                raise ManifestError(
                    f"{path}:{lineno}: duplicate sample_id {sample_id!r}"
                )
            seen.add(sample_id)
            if action_name not in actions:
                raise ManifestError(
                    f"{path}:{lineno}: unknown action {action_name!r}; "
                    f"valid: {sorted(actions)}"
                )
            action = actions[action_name]
            try:
                raw_score = float(score_str)
            except ValueError:
                raise ManifestError(
                    f"{path}:{lineno}: raw_score {score_str!r} is not a number"
                )
            if split not in ("train", "test"):
                raise ManifestError(
                    f"{path}:{lineno}: split must be 'train' or 'test', got {split!r}"
                )
            if validate_range and not (
                action.score_min <= raw_score <= action.score_max
            ):
                raise ManifestError(
                    f"{path}:{lineno}: score {raw_score} outside "
                    f"[{action.score_min}, {action.score_max}] for {action_name}"
                )
            records.append(
                SampleRecord(sample_id, action, raw_score, split, feature_path)
            )
    return records


def write_features(path: str | Path, values: np.ndarray) -> None:
    """Write one T x D feature matrix as an .aqaf file (f32 little-endian)."""
    values = np.asarray(values)
    if values.ndim != 2:
        raise ArgumentError(f"feature matrix must be 2-D, got shape {values.shape}")
    t, d = values.shape
    with open(path, "wb") as fh:
        fh.write(AQAF_MAGIC)
        fh.write(bytes([AQAF_VERSION]))
        fh.write(struct.pack("<II", t, d))
        fh.write(values.astype("<f4").tobytes())


def load_features(
    path: str | Path,
    steps: int | None = None,
    dim: int | None = None,
) -> np.ndarray:
    """Read an .aqaf file, widening f32 payload to float64.

    steps/dim, when given, are enforced against the file header.
    """
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 13:
        raise FormatError(f"{path}: truncated header")
    if blob[:4] != AQAF_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}")
    if blob[4] != AQAF_VERSION:
        raise FormatError(f"{path}: unsupported version {blob[4]}")
    t, d = struct.unpack("<II", blob[5:13])
    payload = blob[13:]
    expected_bytes = 4 * t * d
    if len(payload) != expected_bytes:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes, expected {expected_bytes}"
        )
    if steps is not None and t != steps:
        raise DimensionMismatchError(f"{path}: file has T={t}, configured T={steps}")
    if dim is not None and d != dim:
        raise DimensionMismatchError(f"{path}: file has D={d}, configured D={dim}")
    values = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(t, d)
    if not np.all(np.isfinite(values)):
        raise FormatError(f"{path}: non-finite feature values")
    return values


def feature_file(root: Path, record: SampleRecord, copy: int) -> Path:
    return root / f"{record.feature_path}_c{copy}.aqaf"


class Dataset:
    """Manifest plus lazily-cached feature matrices."""

    def __init__(
        self,
        root: str | Path,
        actions: dict[str, ActionClass] = DEFAULT_ACTIONS,
        validate_range: bool = True,
        steps: int | None = None,
        dim: int | None = None,
    ):
        self.root = Path(root)
        self.records = load_manifest(
            self.root / "manifest.csv", actions, validate_range
        )
        self.steps = steps
        self.dim = dim
        self._cache: dict[tuple[str, int], np.ndarray] = {}

    def _subset(self, split: str, actions) -> list[SampleRecord]:
        names = None if actions is None else set(actions)
        return [
            r
            for r in self.records
            if r.split == split and (names is None or r.action.name in names)
        ]

    def train_records(self, actions=None) -> list[SampleRecord]:
        return self._subset("train", actions)

    def test_records(self, actions=None) -> list[SampleRecord]:
        return self._subset("test", actions)

    def action_names(self) -> list[str]:
        seen: dict[str, None] = {}
        for r in self.records:
            seen.setdefault(r.action.name)
        return list(seen)

    def features(self, record: SampleRecord, copy: int = 0) -> np.ndarray:
        key = (record.sample_id, copy)
        if key not in self._cache:
            self._cache[key] = load_features(
                feature_file(self.root, record, copy), self.steps, self.dim
            )
        return self._cache[key]

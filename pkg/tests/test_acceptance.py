"""End-to-end acceptance suite.

Each test states its criterion in one line and asserts it directly;
heavyweight artifacts (datasets, pretrained models) are module-scoped
and shared. Training sizes are chosen so the whole file runs in a few
minutes on one core.
"""

import itertools
import math
import time

import numpy as np
import pytest

from aqa_transfer import data as dataio
from aqa_transfer import model, protocols, synth
from aqa_transfer.cli import main
from aqa_transfer.metrics import fisher_avg, spearman
from aqa_transfer.model import grad_check, init_params, load_params, save_params
from aqa_transfer.numerics import Rng
from aqa_transfer.protocols import FinetuneSchedule, TrainConfig
from aqa_transfer.synth import SynthSpec

# hardness used for the transfer experiments: the default task is too
# easy for 25-sample single-action models to be data-starved, so these
# runs raise the latent dimension and noise. The pooled-advantage run
# additionally strengthens the per-class mean signatures so the pooled
# model can absorb class offsets cheaply.
HARD = dict(latent_dim=8, noise_std=1.0, class_mean_scale=2.0)
HARD_POOLED = dict(latent_dim=8, noise_std=1.0, class_mean_scale=4.0)
HIDDEN = 64


def make_dataset(tmp_factory, tag, **kw):
    root = tmp_factory.mktemp(tag)
    spec = SynthSpec(**kw)
    synth.generate(spec, root)
    ds = dataio.Dataset(root, steps=spec.steps, dim=spec.feature_dim)
    return root, spec, ds


def train_quick(ds, actions, spec, seed, iterations, eval_every=None):
    cfg = TrainConfig(
        actions_included=actions,
        iterations=iterations,
        hidden=HIDDEN,
        feature_dim=spec.feature_dim,
        seed=seed,
        eval_every=eval_every or iterations,
    )
    stats = dataio.compute_norm_stats(ds.train_records(actions))
    return protocols.train(cfg, ds, stats) + (stats,)


class TestCriterion1GradientCorrectness:
    def test_grad_check_cli(self, capsys):
        # H=8, D=5, T=6, 20 trials: max rel error < 1e-4 in under 10 s
        start = time.time()
        code = main(["grad-check", "--hidden", "8", "--dim", "5",
                     "--steps", "6", "--trials", "20", "--tol", "1e-4"])
        elapsed = time.time() - start
        out = capsys.readouterr().out
        assert code == 0, out
        assert elapsed < 10.0
        worst = float(out.rsplit(":", 1)[1])
        assert worst < 1e-4


class TestCriterion2MetricOracles:
    @staticmethod
    def brute_force(pred, truth):
        def ranks(values):
            return [
                sum(1 for u in values if u < v)
                + (sum(1 for u in values if u == v) + 1) / 2.0
                for v in values
            ]

        rx, ry = ranks(pred), ranks(truth)
        n = len(rx)
        mx, my = sum(rx) / n, sum(ry) / n
        num = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
        den = math.sqrt(
            sum((a - mx) ** 2 for a in rx)
            * sum((b - my) ** 2 for b in ry)
        )
        return num / den

    def test_spearman_all_permutations(self):
        for n in range(2, 7):
            truth = list(range(n))
            for perm in itertools.permutations(range(n)):
                got = spearman(list(perm), truth)
                assert abs(got - self.brute_force(list(perm), truth)) < 1e-12

    def test_spearman_tied_inputs(self):
        rng = Rng(2024)
        checked = 0
        while checked < 100:
            n = 3 + rng.randbelow(7)
            pred = [float(rng.randbelow(4)) for _ in range(n)]
            truth = [float(rng.randbelow(4)) for _ in range(n)]
            if len(set(pred)) < 2 or len(set(truth)) < 2:
                continue
            got = spearman(pred, truth)
            assert abs(got - self.brute_force(pred, truth)) < 1e-12
            checked += 1

    def test_fisher_avg_reference_row(self):
        rhos = [0.6177, 0.6746, 0.4955, 0.3648, 0.8410, 0.7343]
        assert fisher_avg(rhos) == pytest.approx(0.6478, abs=0.002)


class TestCriterion3Learnability:
    def test_single_action_matches_oracle(self, tmp_path_factory):
        start = time.time()
        _, spec, ds = make_dataset(
            tmp_path_factory, "c3",
            classes=synth._default_classes()[:1],
            train_per_class=200, test_per_class=50, seed=42, **HARD,
        )
        action = ds.action_names()[0]
        _, hist, _ = train_quick(ds, [action], spec, seed=7, iterations=2000)
        rho = hist.points[-1].rho_by_action[action]
        oracle = synth.oracle_fit(ds, [action], [action])[action]
        elapsed = time.time() - start
        assert rho >= 0.85, (rho, oracle)
        assert rho >= oracle - 0.1, (rho, oracle)
        assert elapsed < 60.0


class TestCriterion4AllActionAdvantage:
    def test_pooled_beats_single_action_mean(self, tmp_path_factory):
        diffs = []
        for seed in range(5):
            _, spec, ds = make_dataset(
                tmp_path_factory, f"c4s{seed}",
                train_per_class=25, test_per_class=50,
                seed=100 + seed, **HARD_POOLED,
            )
            names = ds.action_names()
            _, hist, _ = train_quick(
                ds, names, spec, seed=500 + seed, iterations=4000
            )
            aa = fisher_avg(list(hist.points[-1].rho_by_action.values()))
            sa_rhos = []
            for name in names:
                _, h1, _ = train_quick(
                    ds, [name], spec, seed=500 + seed, iterations=4000
                )
                sa_rhos.append(h1.points[-1].rho_by_action[name])
            diffs.append(aa - sum(sa_rhos) / len(sa_rhos))
        mean_diff = sum(diffs) / len(diffs)
        assert mean_diff >= 0.03, diffs


@pytest.fixture(scope="module")
def transfer_bundle(tmp_path_factory):
    """Three datasets with, per held-out class, a model trained on the
    other five. Shared by the zero-shot and fine-tune criteria."""
    bundle = []
    for seed in range(3):
        _, spec, ds = make_dataset(
            tmp_path_factory, f"zs{seed}",
            train_per_class=100, test_per_class=50,
            seed=300 + seed, **HARD,
        )
        names = ds.action_names()
        models = {}
        for holdout in names:
            rest = [n for n in names if n != holdout]
            params, _, _ = train_quick(
                ds, rest, spec, seed=900 + seed, iterations=3000
            )
            models[holdout] = params
        bundle.append((ds, spec, models))
    return bundle


class TestCriterion5ZeroShot:
    def test_transfer_beats_random(self, transfer_bundle):
        zs, rand = [], []
        for seed, (ds, spec, models) in enumerate(transfer_bundle):
            names = ds.action_names()
            for holdout in names:
                rest = [n for n in names if n != holdout]
                stats = dataio.compute_norm_stats(
                    ds.train_records([holdout])
                )
                zs.append(protocols.zero_shot_eval(
                    models[holdout], rest, holdout, ds, stats
                ))
                baseline = init_params(
                    HIDDEN, spec.feature_dim, 0.1, Rng(900 + seed).spawn()
                )
                rand.append(protocols.zero_shot_eval(
                    baseline, rest, holdout, ds, stats
                ))
        assert sum(zs) / len(zs) >= 0.15, zs
        assert abs(sum(rand) / len(rand)) <= 0.10, rand


class TestCriterion6FinetuneInitialization:
    def finetune_pair(self, ds, spec, pretrained, holdout, seed):
        cfg = TrainConfig(
            hidden=HIDDEN, feature_dim=spec.feature_dim, eval_every=100
        )
        sched = FinetuneSchedule()
        _, h_pre = protocols.finetune(
            pretrained, holdout, 25, ds, sched, seed=seed, config=cfg
        )
        _, h_rnd = protocols.finetune(
            None, holdout, 25, ds, sched, seed=seed, config=cfg
        )
        return h_pre, h_rnd

    def test_gap_at_iteration_100(self, transfer_bundle):
        ds, spec, models = transfer_bundle[0]
        holdout = ds.action_names()[0]
        gaps = []
        for seed in range(5):
            h_pre, h_rnd = self.finetune_pair(
                ds, spec, models[holdout], holdout, 700 + seed
            )
            gaps.append(
                h_pre.rho_at(100, holdout) - h_rnd.rho_at(100, holdout)
            )
        assert sum(gaps) / len(gaps) >= 0.1, gaps

    def test_best_rho_wins_most_classes(self, transfer_bundle):
        ds, spec, models = transfer_bundle[0]
        wins = 0
        for holdout in ds.action_names():
            h_pre, h_rnd = self.finetune_pair(
                ds, spec, models[holdout], holdout, 700
            )
            wins += h_pre.best_rho(holdout) >= h_rnd.best_rho(holdout)
        assert wins >= 4, wins


class TestCriterion7Determinism:
    def test_byte_identical_cli_reruns(self, tmp_path):
        import yaml

        cfg = tmp_path / "config.yaml"
        cfg.write_text(yaml.safe_dump({
            "train": {"feature_dim": 16, "hidden": 8, "batch_videos": 5,
                      "iterations": 30, "eval_every": 10,
                      "augmentation_copies": 2},
            "synth": {"num_classes": 2, "train_per_class": 10,
                      "test_per_class": 6, "feature_dim": 16, "copies": 2},
        }))
        outs = []
        for tag in ("a", "b"):
            data = tmp_path / f"data_{tag}"
            run = tmp_path / f"run_{tag}"
            assert main(["gen-synth", "--config", str(cfg),
                         "--out", str(data), "--seed", "5"]) == 0
            assert main(["train", "--config", str(cfg),
                         "--data", str(data), "--out", str(run),
                         "--seed", "5"]) == 0
            outs.append((data, run))
        (data_a, run_a), (data_b, run_b) = outs
        assert (data_a / "manifest.csv").read_bytes() == (
            data_b / "manifest.csv"
        ).read_bytes()
        for name in ("report.csv", "history.csv", "ckpt_10.aqam",
                     "ckpt_20.aqam", "ckpt_30.aqam"):
            assert (run_a / name).read_bytes() == (
                run_b / name
            ).read_bytes(), name


class TestCriterion8FormatRoundTrips:
    def test_feature_file_roundtrip_exact(self, tmp_path):
        rng = Rng(1)
        values = rng.normal_block(6 * 9).reshape(6, 9).astype(np.float32)
        path = tmp_path / "x.aqaf"
        dataio.write_features(path, values)
        assert np.array_equal(dataio.load_features(path), values)

    def test_checkpoint_roundtrip_exact(self, tmp_path):
        params = init_params(12, 7, 0.3, Rng(2))
        path = tmp_path / "m.aqam"
        save_params(path, params)
        loaded = load_params(path)
        assert np.array_equal(loaded.flat(), params.flat())

    def test_malformed_headers_rejected(self, tmp_path):
        from aqa_transfer.errors import FormatError

        bad_feat = tmp_path / "bad.aqaf"
        bad_feat.write_bytes(b"NOPE" + bytes(12))
        with pytest.raises(FormatError):
            dataio.load_features(bad_feat)
        bad_ckpt = tmp_path / "bad.aqam"
        bad_ckpt.write_bytes(b"NOPE" + bytes(12))
        with pytest.raises(FormatError):
            load_params(bad_ckpt)


class TestCriterion9PipelineInvariants:
    def test_clip_plan(self):
        plan = dataio.plan_clips(103, 16, 16, 6)
        assert len(plan.copies) == 6
        assert plan.clips_per_copy == 6
        for copy, starts in enumerate(plan.copies):
            assert starts == tuple(
                s + copy for s in (0, 16, 32, 48, 64, 80)
            )

    def test_pad_length(self):
        assert dataio.pad_length(97, 103) == 6

    def test_normalize_roundtrip(self):
        recs_scores = [72.0, 81.5, 64.25, 90.0]
        std = float(np.std(recs_scores))
        stats = dataio.NormStats({"Diving": std})
        for score in recs_scores:
            z = dataio.normalize_score(score, "Diving", stats)
            back = dataio.denormalize_score(z, "Diving", stats)
            assert abs(back - score) < 1e-12

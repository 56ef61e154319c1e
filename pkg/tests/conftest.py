import pytest

from aqa_transfer import data as dataio
from aqa_transfer import synth
from aqa_transfer.synth import SynthSpec

SMALL_SPEC = SynthSpec(
    classes=synth._default_classes()[:3],
    train_per_class=20,
    test_per_class=12,
    feature_dim=12,
    copies=2,
    seed=11,
)


@pytest.fixture(scope="session")
def small_root(tmp_path_factory):
    """A small three-class synthetic dataset shared across the session."""
    root = tmp_path_factory.mktemp("small_synth")
    synth.generate(SMALL_SPEC, root)
    return root


@pytest.fixture(scope="session")
def small_dataset(small_root):
    return dataio.Dataset(
        small_root, steps=SMALL_SPEC.steps, dim=SMALL_SPEC.feature_dim
    )

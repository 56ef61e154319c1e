import numpy as np

from aqa_transfer import figures
from aqa_transfer.protocols import HistoryPoint, RunHistory


def fake_history(actions, n=5):
    points = [
        HistoryPoint(
            (i + 1) * 100,
            1.0 / (i + 1),
            {a: 0.1 * i + 0.05 * j for j, a in enumerate(actions)},
        )
        for i in range(n)
    ]
    return RunHistory(points=points)


def test_plot_history_writes_png(tmp_path):
    path = tmp_path / "history.png"
    figures.plot_history(fake_history(["Diving", "Skiing"]), path)
    assert path.stat().st_size > 0
    assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_plot_transfer_matrix_writes_png(tmp_path):
    actions = ["Diving", "Gymvault", "Skiing"]
    mat = np.array([[0.9, 0.2, -0.1], [0.1, 0.8, 0.0], [-0.2, 0.3, 0.7]])
    path = tmp_path / "matrix.png"
    figures.plot_transfer_matrix(actions, mat, path)
    assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_plot_finetune_comparison_writes_png(tmp_path):
    pre = fake_history(["Diving"])
    rnd = fake_history(["Diving"])
    path = tmp_path / "finetune.png"
    figures.plot_finetune_comparison(pre, rnd, "Diving", path)
    assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

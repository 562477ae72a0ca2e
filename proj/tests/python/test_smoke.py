import numpy as np
import pytest

mmreg = pytest.importorskip("mmreg")


def test_offset_table():
    table = mmreg.generate_offsets()
    assert table[0] == (0, 0, 0)
    assert table[1] == (1, 11, -11)
    assert len({(dx, dy) for _, dx, dy in table}) == 9


def test_offsets_reject_tiny_axes():
    with pytest.raises(ValueError):
        mmreg.generate_offsets(9, 1.0, 1.0, 0.0)


def test_flow_recovers_blob_shift():
    yy, xx = np.mgrid[0:64, 0:64].astype(np.float32)
    blob = lambda cx: np.exp(-((xx - cx) ** 2 + (yy - 32) ** 2) / 32.0).astype(np.float32)
    a, b = blob(30), blob(32)
    u, v = mmreg.estimate_flow(a, b)
    support = (a > 0.1) | (b > 0.1)
    epe = np.hypot(u[support] - 2.0, v[support]).mean()
    assert epe < 0.5


def test_sequence_and_frame_round_trip(tmp_path):
    frames = mmreg.generate_sequence(seed=3, frames=2, width=96, height=64, objects=3)
    assert list(frames[0]) == ["R", "G", "B", "L"]
    full = mmreg.add_flow_channels(frames)
    assert set(full[1]) == {"R", "G", "B", "L", "Gr", "U", "V"}
    np.testing.assert_array_equal(full[0]["U"], 0.5)
    path = tmp_path / "frame_0000.mmf"
    mmreg.write_frame(full[1], path)
    back = mmreg.read_frame(path)
    assert list(back) == list(full[1])
    for name in back:
        np.testing.assert_array_equal(back[name], full[1][name])


def test_metric():
    assert mmreg.mean_diagonal_accuracy(np.eye(9, dtype=np.int64) * 5) == pytest.approx(100.0)
    assert mmreg.mean_diagonal_accuracy(np.ones((9, 9), dtype=np.int64)) == pytest.approx(100.0 / 9)

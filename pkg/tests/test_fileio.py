import numpy as np
import pytest

from matchkit import CorrespondenceSet
from matchkit.fileio import (
    DESC_MAGIC,
    GRID_MAGIC,
    read_correspondences_csv,
    read_descriptors,
    read_grid,
    read_steering,
    warp_to_rgb,
    write_correspondences_csv,
    write_descriptors,
    write_grid,
    write_pgm,
    write_ppm,
    write_steering,
)


def test_grid_round_trip_various_ranks(tmp_path):
    rng = np.random.default_rng(90)
    for shape in ((7,), (3, 5), (2, 3, 4), (2, 2, 2, 2)):
        arr = rng.normal(size=shape).astype(np.float32)
        path = tmp_path / "t.rmgrid"
        write_grid(path, arr)
        back = read_grid(path)
        assert back.shape == shape
        assert np.array_equal(back.astype(np.float32), arr)


def test_grid_layout_bytes(tmp_path):
    path = tmp_path / "g.rmgrid"
    write_grid(path, np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32))
    raw = path.read_bytes()
    assert raw[:7] == GRID_MAGIC
    assert raw[7:11] == (2).to_bytes(4, "little")  # rank
    assert raw[11:15] == (2).to_bytes(4, "little")  # dims
    assert raw[15:19] == (2).to_bytes(4, "little")
    assert np.frombuffer(raw[19:], dtype="<f4").tolist() == [1.0, 2.0, 3.0, 4.0]


def test_grid_bad_magic(tmp_path):
    path = tmp_path / "bad.rmgrid"
    path.write_bytes(b"NOTGRID" + b"\x00" * 16)
    with pytest.raises(ValueError, match="magic"):
        read_grid(path)


def test_grid_truncated(tmp_path):
    path = tmp_path / "g.rmgrid"
    write_grid(path, np.ones((4, 4), dtype=np.float32))
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ValueError, match="truncated"):
        read_grid(path)


def test_descriptor_round_trip(tmp_path):
    rng = np.random.default_rng(91)
    coords = rng.uniform(-1, 1, (9, 2)).astype(np.float32)
    descs = rng.normal(size=(9, 16)).astype(np.float32)
    path = tmp_path / "d.rmdesc"
    write_descriptors(path, coords, descs)
    raw = path.read_bytes()
    assert raw[:7] == DESC_MAGIC
    assert raw[7:11] == (9).to_bytes(4, "little")
    assert raw[11:15] == (16).to_bytes(4, "little")
    c, d = read_descriptors(path)
    assert np.array_equal(c.astype(np.float32), coords)
    assert np.array_equal(d.astype(np.float32), descs)


def test_steering_round_trip(tmp_path):
    rng = np.random.default_rng(92)
    w = rng.normal(size=(12, 12)).astype(np.float32)
    path = tmp_path / "w.rmsteer"
    write_steering(path, w)
    assert np.array_equal(read_steering(path).astype(np.float32), w)
    with pytest.raises(ValueError):
        write_steering(path, np.ones((3, 4)))


def test_support_set_round_trip(tmp_path):
    from matchkit.fileio import read_support_set, write_support_set

    rng = np.random.default_rng(94)
    feats = rng.normal(size=(12, 6)).astype(np.float32)
    emb = rng.normal(size=(12, 2)).astype(np.float32)
    write_support_set(tmp_path / "sup", feats, emb)
    f, e = read_support_set(tmp_path / "sup")
    assert np.array_equal(f.astype(np.float32), feats)
    assert np.array_equal(e.astype(np.float32), emb)


def test_correspondence_csv_round_trip(tmp_path):
    rng = np.random.default_rng(93)
    cs = CorrespondenceSet(
        rng.uniform(-1, 1, (20, 2)), rng.uniform(-1, 1, (20, 2)), rng.uniform(0, 2, 20)
    )
    path = tmp_path / "m.csv"
    write_correspondences_csv(path, cs)
    assert path.read_text().splitlines()[0] == "xa,ya,xb,yb,weight"
    back = read_correspondences_csv(path)
    assert np.array_equal(back.xa, cs.xa)
    assert np.array_equal(back.xb, cs.xb)
    assert np.array_equal(back.weights, cs.weights)


def test_correspondence_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError, match="header"):
        read_correspondences_csv(path)


def test_pgm_ppm_headers(tmp_path):
    pgm = tmp_path / "im.pgm"
    write_pgm(pgm, np.linspace(0, 1, 12).reshape(3, 4))
    raw = pgm.read_bytes()
    assert raw.startswith(b"P5\n4 3\n255\n")
    assert len(raw) == len(b"P5\n4 3\n255\n") + 12

    ppm = tmp_path / "im.ppm"
    write_ppm(ppm, np.zeros((2, 2, 3)))
    raw = ppm.read_bytes()
    assert raw.startswith(b"P6\n2 2\n255\n")
    assert len(raw) == len(b"P6\n2 2\n255\n") + 12


def test_warp_to_rgb_ranges():
    coords = np.array([[[-1.0, -1.0], [1.0, 1.0]]])
    cert = np.array([[0.0, 1.0]])
    rgb = warp_to_rgb(coords, cert)
    assert rgb.shape == (1, 2, 3)
    assert rgb.min() >= 0.0 and rgb.max() <= 1.0
    assert np.allclose(rgb[0, 0], [0, 0, 0])
    assert np.allclose(rgb[0, 1], [1, 1, 1])

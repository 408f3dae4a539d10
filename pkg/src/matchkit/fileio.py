"""Binary and text formats used by the CLI.

Grid tensors travel as "RMGRID1" files: a 7-byte ASCII magic, a little-endian
u32 rank, ``rank`` little-endian u32 dims, then the float32 payload in
row-major order. Descriptor sets use "RMDESC1" (magic, u32 N, u32 D, then N
rows of 2 + D float32: coordinates first, then the descriptor). Steering
matrices use "RMSTEER1" (magic, u32 D, D*D float32). Correspondences are
plain CSV with header ``xa,ya,xb,yb,weight``.

Images are emitted as binary PGM (P5) / PPM (P6) with maxval 255, which keeps
visualization dependency-free.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .grids import CorrespondenceSet

GRID_MAGIC = b"RMGRID1"
DESC_MAGIC = b"RMDESC1"
STEER_MAGIC = b"RMSTEER1"


def write_grid(path, array: np.ndarray) -> None:
    array = np.asarray(array, dtype=np.float32)
    with open(path, "wb") as fh:
        fh.write(GRID_MAGIC)
        fh.write(struct.pack("<I", array.ndim))
        for d in array.shape:
            fh.write(struct.pack("<I", d))
        fh.write(array.astype("<f4").tobytes(order="C"))


def read_grid(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(len(GRID_MAGIC))
        if magic != GRID_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {GRID_MAGIC!r}")
        (rank,) = struct.unpack("<I", fh.read(4))
        dims = struct.unpack(f"<{rank}I", fh.read(4 * rank))
        count = int(np.prod(dims)) if rank else 1
        payload = fh.read(4 * count)
        if len(payload) != 4 * count:
            raise ValueError(f"{path}: truncated payload")
        return np.frombuffer(payload, dtype="<f4").reshape(dims).astype(float)


def write_descriptors(path, coords: np.ndarray, descs: np.ndarray) -> None:
    coords = np.asarray(coords, dtype=np.float32)
    descs = np.asarray(descs, dtype=np.float32)
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise ValueError("coords must have shape (N, 2)")
    if descs.ndim != 2 or descs.shape[0] != coords.shape[0]:
        raise ValueError("descs must have shape (N, D) matching coords")
    n, d = descs.shape
    rows = np.concatenate([coords, descs], axis=1).astype("<f4")
    with open(path, "wb") as fh:
        fh.write(DESC_MAGIC)
        fh.write(struct.pack("<II", n, d))
        fh.write(rows.tobytes(order="C"))


def read_descriptors(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, "rb") as fh:
        magic = fh.read(len(DESC_MAGIC))
        if magic != DESC_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {DESC_MAGIC!r}")
        n, d = struct.unpack("<II", fh.read(8))
        payload = fh.read(4 * n * (2 + d))
        if len(payload) != 4 * n * (2 + d):
            raise ValueError(f"{path}: truncated payload")
        rows = np.frombuffer(payload, dtype="<f4").reshape(n, 2 + d).astype(float)
    return rows[:, :2], rows[:, 2:]


def write_support_set(prefix, features: np.ndarray, embeddings: np.ndarray) -> None:
    """Serialize a GP support set as a pair of RMGRID1 tensors."""
    write_grid(str(prefix) + ".features.rmgrid", features)
    write_grid(str(prefix) + ".embeddings.rmgrid", embeddings)


def read_support_set(prefix) -> tuple[np.ndarray, np.ndarray]:
    return (
        read_grid(str(prefix) + ".features.rmgrid"),
        read_grid(str(prefix) + ".embeddings.rmgrid"),
    )


def write_steering(path, w: np.ndarray) -> None:
    w = np.asarray(w, dtype=np.float32)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError("steering matrix must be square")
    with open(path, "wb") as fh:
        fh.write(STEER_MAGIC)
        fh.write(struct.pack("<I", w.shape[0]))
        fh.write(w.astype("<f4").tobytes(order="C"))


def read_steering(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(len(STEER_MAGIC))
        if magic != STEER_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {STEER_MAGIC!r}")
        (d,) = struct.unpack("<I", fh.read(4))
        payload = fh.read(4 * d * d)
        if len(payload) != 4 * d * d:
            raise ValueError(f"{path}: truncated payload")
        return np.frombuffer(payload, dtype="<f4").reshape(d, d).astype(float)


def write_correspondences_csv(path, cs: CorrespondenceSet) -> None:
    lines = ["xa,ya,xb,yb,weight"]
    for i in range(len(cs)):
        vals = (cs.xa[i, 0], cs.xa[i, 1], cs.xb[i, 0], cs.xb[i, 1], cs.weights[i])
        lines.append(",".join(repr(float(v)) for v in vals))
    Path(path).write_text("\n".join(lines) + "\n")


def read_correspondences_csv(path) -> CorrespondenceSet:
    text = Path(path).read_text().strip().splitlines()
    if not text or text[0].strip() != "xa,ya,xb,yb,weight":
        raise ValueError(f"{path}: expected header 'xa,ya,xb,yb,weight'")
    vals = []
    for line in text[1:]:
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise ValueError(f"{path}: malformed row {line!r}")
        vals.append([float(p) for p in parts])
    if not vals:
        raise ValueError(f"{path}: no correspondences")
    arr = np.array(vals)
    return CorrespondenceSet(arr[:, 0:2], arr[:, 2:4], arr[:, 4])


def _quantize(channel: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.clip(channel, 0.0, 1.0) * 255.0), 0, 255).astype(np.uint8)


def write_pgm(path, values: np.ndarray) -> None:
    """Write a 2D array of [0, 1] values as a binary PGM image."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ValueError("PGM payload must be 2D")
    h, w = values.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(_quantize(values).tobytes())


def write_ppm(path, rgb: np.ndarray) -> None:
    """Write an (H, W, 3) array of [0, 1] values as a binary PPM image."""
    rgb = np.asarray(rgb, dtype=float)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("PPM payload must have shape (H, W, 3)")
    h, w, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(_quantize(rgb).tobytes())


def warp_to_rgb(target_coords: np.ndarray, certainty: np.ndarray) -> np.ndarray:
    """Color-code a warp: target x -> red, target y -> green, certainty -> blue."""
    r = (np.asarray(target_coords)[..., 0] + 1.0) / 2.0
    g = (np.asarray(target_coords)[..., 1] + 1.0) / 2.0
    b = np.asarray(certainty, dtype=float)
    return np.stack([r, g, b], axis=-1)

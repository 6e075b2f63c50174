"""Grid file formats: binary PGM (P5), CSV and a lossless ``.npz`` container."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .grid import Grid2D


def probability_to_bytes(values) -> np.ndarray:
    """``round(p * 255)`` with halves rounded up, as uint8."""
    v = np.asarray(values, dtype=float)
    return np.floor(v * 255.0 + 0.5).clip(0, 255).astype(np.uint8)


def grid_to_image(grid: Grid2D) -> np.ndarray:
    """Byte image with row 0 at the top (largest y index)."""
    return probability_to_bytes(grid.values)[::-1, :]


def pgm_bytes(image: np.ndarray) -> bytes:
    image = np.asarray(image, dtype=np.uint8)
    h, w = image.shape
    return b"P5\n%d %d\n255\n" % (w, h) + image.tobytes()


def write_pgm(path, grid: Grid2D) -> None:
    Path(path).write_bytes(pgm_bytes(grid_to_image(grid)))


def _read_pgm_image(data: bytes) -> np.ndarray:
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise ValueError("not a binary PGM (P5) file")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise ValueError(f"unsupported PGM maxval {maxval}")
    pos += 1
    pixels = np.frombuffer(data[pos : pos + w * h], dtype=np.uint8)
    if pixels.size != w * h:
        raise ValueError("truncated PGM file")
    return pixels.reshape(h, w)


def read_pgm(path, resolution: float = 1.0, origin=(0.0, 0.0, 0.0)) -> Grid2D:
    """Inverse of :func:`write_pgm`; PGM carries no geometry, so pass it in."""
    image = _read_pgm_image(Path(path).read_bytes())
    values = image[::-1, :].astype(float) / 255.0
    h, w = values.shape
    return Grid2D(w, h, resolution, origin, values)


def write_csv(path, grid: Grid2D) -> None:
    """Probabilities with the same row order as the PGM (top row first)."""
    np.savetxt(path, grid.values[::-1, :], delimiter=",", fmt="%.9f")


def save_grid(path, grid: Grid2D) -> None:
    """Lossless grid file: values plus geometry."""
    with open(path, "wb") as fh:
        np.savez(
            fh,
            values=grid.values,
            resolution=np.float64(grid.resolution),
            origin=np.asarray(grid.origin, dtype=float),
        )


def load_grid(path, resolution: float | None = None, origin=None) -> Grid2D:
    """Load a ``.npz`` grid, or a ``.pgm`` with caller-supplied geometry."""
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return read_pgm(path, resolution or 1.0, origin or (0.0, 0.0, 0.0))
    if path.suffix.lower() == ".csv":
        values = np.loadtxt(path, delimiter=",", ndmin=2)[::-1, :]
        h, w = values.shape
        return Grid2D(w, h, resolution or 1.0, origin or (0.0, 0.0, 0.0), values)
    with np.load(path) as data:
        values = data["values"]
        h, w = values.shape
        return Grid2D(w, h, float(data["resolution"]), tuple(data["origin"]), values)


def dump_json(path, obj) -> None:
    """Stable JSON (sorted keys) so repeated runs are byte-identical."""
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")

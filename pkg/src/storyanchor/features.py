"""Image-feature file I/O (the "SAFV" binary format) and synthetic features.

Format: magic b"SAFV", u16 version (=1), u32 count, u32 dim, then
count x dim little-endian 32-bit floats in row order. A sibling JSON
manifest ``<prefix>.manifest.json`` maps image_id -> row index. Values
are upcast to float64 on load.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"SAFV"
VERSION = 1
HEADER_SIZE = 14


def write_features(prefix, matrix: np.ndarray, image_ids: list[str],
                   extra_manifest: dict | None = None) -> tuple[Path, Path]:
    """Write ``matrix`` (count x dim) and its id manifest; returns both paths."""
    matrix = np.asarray(matrix, dtype=np.float32)
    if matrix.ndim != 2:
        raise FormatError(f"feature matrix must be 2-D, got shape {matrix.shape}")
    count, dim = matrix.shape
    if len(image_ids) != count:
        raise FormatError(f"{len(image_ids)} image ids for {count} rows")
    prefix = Path(prefix)
    bin_path = prefix.with_suffix(".safv")
    with open(bin_path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<HII", VERSION, count, dim))
        f.write(matrix.astype("<f4").tobytes())
    manifest = {"rows": {image_id: i for i, image_id in enumerate(image_ids)},
                "dim": dim, "count": count}
    if extra_manifest:
        manifest.update(extra_manifest)
    man_path = prefix.with_suffix(".manifest.json")
    with open(man_path, "w") as f:
        json.dump(manifest, f, sort_keys=True, indent=1)
    return bin_path, man_path


def read_features(path) -> np.ndarray:
    """Read a SAFV file into a float64 (count, dim) array."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < HEADER_SIZE:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    if raw[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r} (expected SAFV)")
    version, count, dim = struct.unpack("<HII", raw[4:HEADER_SIZE])
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    expected = HEADER_SIZE + 4 * count * dim
    if len(raw) != expected:
        raise FormatError(f"{path}: size {len(raw)} != expected {expected} "
                          f"for count={count} dim={dim}")
    values = np.frombuffer(raw, dtype="<f4", offset=HEADER_SIZE)
    return values.reshape(count, dim).astype(np.float64)


def read_manifest(path) -> dict:
    with open(path) as f:
        return json.load(f)


def synth_features(prefix, count: int, dim: int, seed: int) -> tuple[Path, Path]:
    """Seeded standard-normal features in SAFV format (CI stand-in)."""
    rng = np.random.default_rng(seed)
    matrix = rng.standard_normal((count, dim)).astype(np.float32)
    ids = [f"synth_{i:06d}" for i in range(count)]
    return write_features(prefix, matrix, ids, {"source": "synth", "seed": seed})

"""
On-disk formats.

Cube: a text header `<stem>.hdr` and a payload `<stem>.bin` of little-endian
float32 values in band-interleaved-by-pixel order (rows, then columns, band
fastest). Grids and endmembers are comma-separated text written with 17
significant digits, class maps are integer grids, probability and decision
maps are binary PGM images and traces hold one value per line.
"""

import hashlib
import os
from typing import Any, Dict, Optional, Tuple

import numpy as np
import yaml

from grca.errors import FormatError
from grca.logger import Logger
from grca.models import EndmemberSet, HyperCube

CUBE_MAGIC = "grca-cube"
CUBE_VERSION = 1
_PAYLOAD_DTYPE = np.dtype("<f4")
_CSV_FORMAT = "%.17g"
PGM_MAXVAL = 255


def _stem(path: str) -> str:
    root, ext = os.path.splitext(path)
    return root if ext in (".hdr", ".bin") else path


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)


def write_cube(path: str, cube: HyperCube) -> Tuple[str, str]:
    """Write header and payload; returns both paths."""
    stem = _stem(path)
    _ensure_parent(stem)
    header_path, payload_path = f"{stem}.hdr", f"{stem}.bin"
    header = {
        "format": CUBE_MAGIC,
        "version": CUBE_VERSION,
        "bands": cube.n_bands,
        "rows": cube.n_row,
        "cols": cube.n_col,
        "interleave": "bip",
        "byte_order": "little",
        "data_type": "float32",
    }
    with open(header_path, "w", encoding="utf-8") as f:
        for key, value in header.items():
            f.write(f"{key} = {value}\n")
    cube.data.transpose(1, 2, 0).astype(_PAYLOAD_DTYPE).tofile(payload_path)
    Logger.debug(f"Wrote cube {cube.data.shape} to {payload_path}")
    return header_path, payload_path


def read_cube_header(path: str) -> Dict[str, str]:
    header_path = f"{_stem(path)}.hdr"
    if not os.path.exists(header_path):
        raise FormatError(f"Cube header not found: {header_path}")
    header = {}
    with open(header_path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError(f"{header_path}:{number}: expected 'key = value'")
            key, value = line.split("=", 1)
            header[key.strip()] = value.strip()
    return header


def read_cube(path: str) -> HyperCube:
    stem = _stem(path)
    header = read_cube_header(stem)
    if header.get("format") != CUBE_MAGIC:
        raise FormatError(f"{stem}.hdr is not a {CUBE_MAGIC} header")
    if (header.get("interleave"), header.get("byte_order"), header.get("data_type")) != (
        "bip",
        "little",
        "float32",
    ):
        raise FormatError(f"{stem}.hdr: only little-endian float32 BIP cubes are supported")
    try:
        L, n_row, n_col = (int(header[k]) for k in ("bands", "rows", "cols"))
    except (KeyError, ValueError) as e:
        raise FormatError(f"{stem}.hdr: missing or malformed dimension: {e}") from e

    payload_path = f"{stem}.bin"
    if not os.path.exists(payload_path):
        raise FormatError(f"Cube payload not found: {payload_path}")
    expected = _PAYLOAD_DTYPE.itemsize * L * n_row * n_col
    actual = os.path.getsize(payload_path)
    if actual != expected:
        raise FormatError(f"{payload_path} holds {actual} bytes, header implies {expected}")
    values = np.fromfile(payload_path, dtype=_PAYLOAD_DTYPE).astype(np.float64)
    return HyperCube(values.reshape(n_row, n_col, L).transpose(2, 0, 1))


def write_grid(path: str, grid: np.ndarray) -> None:
    """2-D float array as CSV."""
    _ensure_parent(path)
    np.savetxt(path, np.atleast_2d(grid), fmt=_CSV_FORMAT, delimiter=",")
    Logger.debug(f"Wrote {path}")


def read_grid(path: str) -> np.ndarray:
    if not os.path.exists(path):
        raise FormatError(f"File not found: {path}")
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except ValueError as e:
        raise FormatError(f"{path}: {e}") from e


def write_endmembers(path: str, endmembers: EndmemberSet) -> None:
    """L rows by R columns."""
    write_grid(path, endmembers.M)


def read_endmembers(path: str) -> EndmemberSet:
    return EndmemberSet(read_grid(path))


def write_int_grid(path: str, grid: np.ndarray) -> None:
    _ensure_parent(path)
    np.savetxt(path, np.asarray(grid, dtype=np.int64), fmt="%d", delimiter=" ")
    Logger.debug(f"Wrote {path}")


def read_int_grid(path: str) -> np.ndarray:
    if not os.path.exists(path):
        raise FormatError(f"File not found: {path}")
    try:
        return np.loadtxt(path, ndmin=2, dtype=np.int64)
    except ValueError as e:
        raise FormatError(f"{path}: {e}") from e


def write_pgm(path: str, values: np.ndarray) -> None:
    """Values in [0, 1] scaled to 0..255 in a binary (P5) PGM."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise FormatError(f"PGM needs a 2-D map, got shape {values.shape}")
    if np.any(values < 0) or np.any(values > 1):
        raise FormatError("PGM values must lie in [0, 1]")
    pixels = np.rint(values * PGM_MAXVAL).astype(np.uint8)
    _ensure_parent(path)
    with open(path, "wb") as f:
        f.write(f"P5\n{values.shape[1]} {values.shape[0]}\n{PGM_MAXVAL}\n".encode("ascii"))
        f.write(pixels.tobytes())
    Logger.debug(f"Wrote {path}")


def read_pgm(path: str) -> np.ndarray:
    """Map in [0, 1] from a binary PGM with maxval 255."""
    if not os.path.exists(path):
        raise FormatError(f"File not found: {path}")
    with open(path, "rb") as f:
        raw = f.read()
    tokens = []
    position = 0
    while len(tokens) < 4:
        while position < len(raw) and raw[position : position + 1].isspace():
            position += 1
        start = position
        while position < len(raw) and not raw[position : position + 1].isspace():
            position += 1
        if start == position:
            raise FormatError(f"{path}: truncated PGM header")
        tokens.append(raw[start:position].decode("ascii"))
    position += 1
    if tokens[0] != "P5" or int(tokens[3]) != PGM_MAXVAL:
        raise FormatError(f"{path}: expected a P5 PGM with maxval {PGM_MAXVAL}")
    n_col, n_row = int(tokens[1]), int(tokens[2])
    body = raw[position : position + n_row * n_col]
    if len(body) != n_row * n_col:
        raise FormatError(f"{path}: payload holds {len(body)} bytes, expected {n_row * n_col}")
    return np.frombuffer(body, dtype=np.uint8).reshape(n_row, n_col) / PGM_MAXVAL


def write_trace(path: str, values: np.ndarray) -> None:
    _ensure_parent(path)
    np.savetxt(path, np.asarray(values, dtype=np.float64).ravel(), fmt=_CSV_FORMAT)
    Logger.debug(f"Wrote {path}")


def read_trace(path: str) -> np.ndarray:
    if not os.path.exists(path):
        raise FormatError(f"File not found: {path}")
    return np.loadtxt(path, ndmin=1, dtype=np.float64)


def config_hash(config: Dict[str, Any]) -> str:
    """sha256 of the canonical YAML dump of a configuration."""
    canonical = yaml.safe_dump(config, sort_keys=True, default_flow_style=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_manifest(
    path: str,
    config: Dict[str, Any],
    seed: int,
    wall_time: float,
    extra: Optional[Dict[str, Any]] = None,
) -> None:
    """Run record; its `config` entry can be passed back as --config."""
    manifest = {
        "config_sha256": config_hash(config),
        "seed": seed,
        "wall_time": round(float(wall_time), 3),
        "config": config,
    }
    if extra:
        manifest.update(extra)
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(manifest, f, sort_keys=False, default_flow_style=False)
    Logger.debug(f"Wrote {path}")


def read_manifest(path: str) -> Dict[str, Any]:
    if not os.path.exists(path):
        raise FormatError(f"File not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            manifest = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise FormatError(f"Cannot parse {path}: {e}") from e
    if not isinstance(manifest, dict) or "config" not in manifest:
        raise FormatError(f"{path} is not a run manifest")
    return manifest

"""Matrix file I/O.

Two interchange formats:

* text: first line ``"<rows> <cols>"``, then one whitespace-separated line
  per row (commas tolerated on read).  Floats are written with ``repr`` so
  a read/write round trip is exact.
* binary: magic ``RMEQ1`` (5 bytes), u8 version=1, u16 flags (0 real,
  1 complex), u64 little-endian rows, u64 little-endian cols, then
  rows*cols float64 little-endian values in row-major order.  Complex
  entries are stored interleaved (re, im), doubling the payload.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ConfigError

MAGIC = b"RMEQ1"
_HEADER = struct.Struct("<5sBHQQ")

FLAG_REAL = 0
FLAG_COMPLEX = 1


def write_matrix_text(path, matrix) -> None:
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ConfigError(f"expected a 2-d array, got shape {m.shape}")
    rows, cols = m.shape
    lines = [f"{rows} {cols}"]
    for r in range(rows):
        lines.append(" ".join(repr(float(v)) for v in m[r]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix_text(path) -> np.ndarray:
    raw = Path(path).read_text().strip().splitlines()
    if not raw:
        raise ConfigError(f"{path}: empty matrix file")
    header = raw[0].replace(",", " ").split()
    if len(header) != 2:
        raise ConfigError(f"{path}: first line must be '<rows> <cols>'")
    rows, cols = int(header[0]), int(header[1])
    if len(raw) - 1 != rows:
        raise ConfigError(f"{path}: expected {rows} data rows, found {len(raw) - 1}")
    out = np.empty((rows, cols), dtype=np.float64)
    for r, line in enumerate(raw[1:]):
        vals = line.replace(",", " ").split()
        if len(vals) != cols:
            raise ConfigError(f"{path}: row {r} has {len(vals)} values, expected {cols}")
        out[r] = [float(v) for v in vals]
    return out


def write_matrix_binary(path, matrix) -> None:
    m = np.asarray(matrix)
    if m.ndim != 2:
        raise ConfigError(f"expected a 2-d array, got shape {m.shape}")
    rows, cols = m.shape
    if np.iscomplexobj(m):
        flags = FLAG_COMPLEX
        payload = np.empty((rows, 2 * cols), dtype="<f8")
        payload[:, 0::2] = m.real
        payload[:, 1::2] = m.imag
    else:
        flags = FLAG_REAL
        payload = np.ascontiguousarray(m, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, 1, flags, rows, cols))
        fh.write(payload.tobytes())


def read_matrix_binary(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ConfigError(f"{path}: truncated header")
    magic, version, flags, rows, cols = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ConfigError(f"{path}: bad magic {magic!r}")
    if version != 1:
        raise ConfigError(f"{path}: unsupported version {version}")
    if flags not in (FLAG_REAL, FLAG_COMPLEX):
        raise ConfigError(f"{path}: unsupported flags {flags}")
    per_entry = 2 if flags == FLAG_COMPLEX else 1
    expected = rows * cols * per_entry * 8
    body = data[_HEADER.size:]
    if len(body) != expected:
        raise ConfigError(f"{path}: payload is {len(body)} bytes, expected {expected}")
    flat = np.frombuffer(body, dtype="<f8")
    if flags == FLAG_COMPLEX:
        re = flat[0::2].reshape(rows, cols)
        im = flat[1::2].reshape(rows, cols)
        return re + 1j * im
    return flat.reshape(rows, cols).copy()


def write_matrix(path, matrix) -> None:
    """Dispatch on extension: ``.bin`` binary, anything else text."""
    if str(path).endswith(".bin"):
        write_matrix_binary(path, matrix)
    else:
        write_matrix_text(path, matrix)


def read_matrix(path) -> np.ndarray:
    if str(path).endswith(".bin"):
        return read_matrix_binary(path)
    return read_matrix_text(path)

"""Model weights file format and plain-text manifests.

Weights file layout (all little-endian):
  bytes 0-5   magic "TSCRL1"
  u32         number of layer widths D
  u32 * D     widths: input, hidden..., output
  f64 blocks  per layer: weight matrix row-major (fan_in x fan_out),
              then the bias vector

Manifests are flat ``key = value`` text with ``#`` comments; values are
written verbatim and read back as strings.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .network import NetworkParams, NetworkSpec

MAGIC = b"TSCRL1"
ARTIFACT_VERSION = "1"


def save_model(path: str | Path, params: NetworkParams) -> None:
    dims = params.spec.dims
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(dims)))
        fh.write(struct.pack(f"<{len(dims)}I", *dims))
        for w, b in zip(params.weights, params.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def read_model_dims(path: str | Path) -> tuple[int, ...]:
    """Read only the header widths (cheap compatibility checks)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: not a model file (bad magic {magic!r})")
        (n,) = struct.unpack("<I", fh.read(4))
        return struct.unpack(f"<{n}I", fh.read(4 * n))


def load_model(path: str | Path) -> NetworkParams:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: not a model file (bad magic {magic!r})")
        (n,) = struct.unpack("<I", fh.read(4))
        dims = struct.unpack(f"<{n}I", fh.read(4 * n))
        if n < 2:
            raise ValueError(f"{path}: header needs at least input and output widths")
        spec = NetworkSpec(dims[0], dims[-1], tuple(dims[1:-1]))
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            w = np.frombuffer(fh.read(8 * fan_in * fan_out), dtype="<f8")
            if w.size != fan_in * fan_out:
                raise ValueError(f"{path}: truncated weights")
            weights.append(w.reshape(fan_in, fan_out).astype(np.float64))
            b = np.frombuffer(fh.read(8 * fan_out), dtype="<f8")
            if b.size != fan_out:
                raise ValueError(f"{path}: truncated biases")
            biases.append(b.astype(np.float64))
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes after parameters")
    return NetworkParams(spec, weights, biases)


def file_checksum(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(path: str | Path, entries: dict[str, str]) -> None:
    lines = [f"{k} = {v}" for k, v in entries.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path: str | Path) -> dict[str, str]:
    entries: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}: malformed manifest line {raw!r}")
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    return entries

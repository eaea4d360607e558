"""File formats: the named-tensor container, its manifest, and spectrogram files.

The container is binary and little-endian: a 4-byte magic, a u32 format
version, a u32 entry count, then per entry a u16-length UTF-8 name, a u8
rank, u32 dims, and raw float64 data in row-major order.  Every container is
written together with a human-readable `<path>.manifest` listing names and
shapes.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"MGT1"
VERSION = 1


def manifest_path(path) -> Path:
    return Path(str(path) + ".manifest")


def save_tensors(path, named: dict[str, np.ndarray]) -> None:
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(named)))
        for name, values in named.items():
            arr = np.ascontiguousarray(np.asarray(values, dtype=np.float64))
            if arr.ndim == 0:
                arr = arr.reshape(1)
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.astype("<f8").tobytes())
    lines = [f"melgraph tensor container v{VERSION}"]
    for name, values in named.items():
        shape = np.asarray(values).shape or (1,)
        lines.append(f"{name}  {'x'.join(str(d) for d in shape)}")
    manifest_path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_exact(fh, count: int) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise ValueError("tensor container truncated")
    return data


def load_tensors(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        if _read_exact(fh, 4) != MAGIC:
            raise ValueError(f"not a tensor container: {path}")
        version, count = struct.unpack("<II", _read_exact(fh, 8))
        if version != VERSION:
            raise ValueError(f"unsupported container version {version}")
        named: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2))
            name = _read_exact(fh, name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", _read_exact(fh, 1))
            shape = struct.unpack(f"<{ndim}I", _read_exact(fh, 4 * ndim))
            size = int(np.prod(shape, dtype=np.int64))
            data = np.frombuffer(_read_exact(fh, 8 * size), dtype="<f8")
            named[name] = data.reshape(shape).astype(np.float64)
    return named


def save_mel_csv(path, frames: np.ndarray) -> None:
    """One spectrogram frame per line, comma-delimited mel bins."""
    frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    np.savetxt(path, frames, fmt="%.10g", delimiter=",")


def load_mel_csv(path) -> np.ndarray:
    frames = np.loadtxt(path, delimiter=",", dtype=np.float64)
    return np.atleast_2d(frames)


def save_mel_binary(path, frames: np.ndarray, stop: np.ndarray) -> None:
    """Binary twin of the CSV, in the tensor-container format."""
    save_tensors(path, {"frames": np.asarray(frames), "stop": np.asarray(stop)})


def load_mel_binary(path) -> tuple[np.ndarray, np.ndarray]:
    named = load_tensors(path)
    return named["frames"], named["stop"]

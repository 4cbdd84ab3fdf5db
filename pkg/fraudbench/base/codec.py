"""
Versioned binary container for fitted models.

Layout (all integers little-endian):

    magic        4 bytes, one per model family (b"FBTF" for the transformer)
    version      u32
    hyper        u32 length + UTF-8 JSON object
    n_tensors    u32
    per tensor   u16 name length + UTF-8 name, u32 ndim, ndim x u32 dims,
                 prod(dims) float64 values

Tensors are written in the order of the mapping handed to `write_model`.
"""

import json
import struct
from collections import OrderedDict
from pathlib import Path
from typing import Any, Dict, Mapping, Tuple, Union

import numpy as np

from fraudbench.errors import ModelFormatError

FORMAT_VERSION = 1


def encode_model(magic: bytes, hyper: Mapping[str, Any], tensors: Mapping[str, np.ndarray]) -> bytes:
    if len(magic) != 4:
        raise ValueError(f"magic must be 4 bytes, got {magic!r}")
    chunks = [magic, struct.pack("<I", FORMAT_VERSION)]
    blob = json.dumps(dict(hyper), sort_keys=True).encode("utf-8")
    chunks.append(struct.pack("<I", len(blob)))
    chunks.append(blob)
    chunks.append(struct.pack("<I", len(tensors)))
    for name, tensor in tensors.items():
        arr = np.ascontiguousarray(tensor, dtype="<f8")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes(order="C"))
    return b"".join(chunks)


class _Reader:
    def __init__(self, data: bytes, source: str):
        self.data = data
        self.pos = 0
        self.source = source

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise ModelFormatError(f"{self.source}: truncated file while reading {what}")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode_model(
    data: bytes, magic: bytes, source: str = "<bytes>"
) -> Tuple[Dict[str, Any], "OrderedDict[str, np.ndarray]"]:
    reader = _Reader(data, source)
    found = reader.take(4, "magic")
    if found != magic:
        raise ModelFormatError(
            f"{source}: bad magic {found!r}, expected {magic!r} (not a model file of this kind)"
        )
    (version,) = reader.unpack("<I", "format version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(
            f"{source}: unsupported format version {version}, this build reads {FORMAT_VERSION}"
        )
    (hyper_len,) = reader.unpack("<I", "hyperparameter length")
    try:
        hyper = json.loads(reader.take(hyper_len, "hyperparameters").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"{source}: corrupt hyperparameter block: {exc}") from None

    (count,) = reader.unpack("<I", "tensor count")
    tensors: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for _ in range(count):
        (name_len,) = reader.unpack("<H", "tensor name length")
        name = reader.take(name_len, "tensor name").decode("utf-8", errors="replace")
        (ndim,) = reader.unpack("<I", f"rank of {name}")
        shape = reader.unpack(f"<{ndim}I", f"shape of {name}") if ndim else ()
        size = int(np.prod(shape, dtype=np.int64))
        raw = reader.take(8 * size, f"values of {name}")
        tensors[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
    if reader.pos != len(data):
        raise ModelFormatError(f"{source}: {len(data) - reader.pos} trailing bytes after last tensor")
    return hyper, tensors


def write_model(
    path: Union[str, Path], magic: bytes, hyper: Mapping[str, Any], tensors: Mapping[str, np.ndarray]
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_model(magic, hyper, tensors))
    return path


def read_model(path: Union[str, Path], magic: bytes):
    path = Path(path)
    if not path.is_file():
        raise ModelFormatError(f"{path}: model file not found")
    return decode_model(path.read_bytes(), magic, str(path))


def read_magic(path: Union[str, Path]) -> bytes:
    with open(path, "rb") as f:
        return f.read(4)


def check_shapes(tensors: Mapping[str, np.ndarray], expected: Mapping[str, Tuple[int, ...]], source: str = "model"):
    """Every expected tensor must be present with exactly the expected shape."""
    for name, shape in expected.items():
        if name not in tensors:
            raise ModelFormatError(f"{source}: missing tensor '{name}'")
        if tuple(tensors[name].shape) != tuple(shape):
            raise ModelFormatError(
                f"{source}: tensor '{name}' has shape {tuple(tensors[name].shape)}, expected {tuple(shape)}"
            )
    extra = [name for name in tensors if name not in expected]
    if extra:
        raise ModelFormatError(f"{source}: unexpected tensor(s) {extra}")

"""Binary tensor files and checkpoints.

Tensor record layout (all little-endian)::

    b"STEK" | version u16 | dtype u8 (0=f32, 1=f64) | rank u8 |
    rank x extent u64 | raw data

A checkpoint is ``b"STEKCKPT" | version u16 | header length u32 | JSON header``
followed by one tensor record per name listed in ``header["tensors"]``.
"""

from __future__ import annotations

import io
import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .tensor import Tensor

MAGIC = b"STEK"
CKPT_MAGIC = b"STEKCKPT"
VERSION = 1
DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
CODE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_HEAD = struct.Struct("<4sHBB")


def encode_tensor(t) -> bytes:
    arr = t.data if isinstance(t, Tensor) else np.asarray(t)
    if arr.dtype not in DTYPE_CODES:
        raise FormatError(f"unsupported dtype {arr.dtype}")
    if arr.ndim > 255:
        raise FormatError(f"rank {arr.ndim} exceeds 255")
    code = DTYPE_CODES[arr.dtype]
    head = _HEAD.pack(MAGIC, VERSION, code, arr.ndim)
    extents = struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return head + extents + arr.astype(CODE_DTYPES[code], copy=False).tobytes()


def _read_exact(buf, n, what, source):
    chunk = buf.read(n)
    if len(chunk) != n:
        raise FormatError(f"{source}: truncated {what}: expected {n} bytes, "
                          f"got {len(chunk)}")
    return chunk


def decode_tensor(buf, source="<bytes>") -> Tensor:
    """Read one record from a binary stream positioned at its magic."""
    magic, version, code, rank = _HEAD.unpack(
        _read_exact(buf, _HEAD.size, "header", source))
    if magic != MAGIC:
        raise FormatError(f"{source}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"{source}: unsupported version {version}")
    if code not in CODE_DTYPES:
        raise FormatError(f"{source}: unknown dtype code {code}")
    shape = struct.unpack(f"<{rank}Q",
                          _read_exact(buf, 8 * rank, "extents", source))
    dtype = CODE_DTYPES[code]
    nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    raw = _read_exact(buf, nbytes, "data", source)
    arr = np.frombuffer(raw, dtype=dtype).reshape(shape)
    return Tensor(arr.astype(dtype.newbyteorder("="), copy=False))


def write_tensor(path, t) -> None:
    Path(path).write_bytes(encode_tensor(t))


def read_tensor(path) -> Tensor:
    data = Path(path).read_bytes()
    buf = io.BytesIO(data)
    t = decode_tensor(buf, source=str(path))
    if buf.tell() != len(data):
        raise FormatError(f"{path}: {len(data) - buf.tell()} trailing bytes")
    return t


def save_checkpoint(path, tensors: dict, header: dict | None = None) -> None:
    """Write named tensors with a JSON header (insertion order kept)."""
    head = dict(header or {})
    head["tensors"] = list(tensors)
    text = json.dumps(head, sort_keys=True).encode("utf-8")
    parts = [CKPT_MAGIC, struct.pack("<HI", VERSION, len(text)), text]
    parts += [encode_tensor(t) for t in tensors.values()]
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path):
    """Return ``(header, {name: Tensor})``."""
    data = Path(path).read_bytes()
    buf = io.BytesIO(data)
    src = str(path)
    if _read_exact(buf, len(CKPT_MAGIC), "magic", src) != CKPT_MAGIC:
        raise FormatError(f"{src}: not a checkpoint (bad magic)")
    version, n = struct.unpack("<HI", _read_exact(buf, 6, "header", src))
    if version != VERSION:
        raise FormatError(f"{src}: unsupported checkpoint version {version}")
    try:
        header = json.loads(_read_exact(buf, n, "JSON header", src))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{src}: unreadable JSON header: {exc}") from None
    tensors = {}
    for name in header.get("tensors", []):
        tensors[name] = decode_tensor(buf, source=f"{src}[{name}]")
    if buf.tell() != len(data):
        raise FormatError(f"{src}: {len(data) - buf.tell()} trailing bytes")
    return header, tensors

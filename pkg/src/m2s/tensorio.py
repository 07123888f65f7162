"""Deterministic binary containers for tensors and checkpoints.

Two formats, both little-endian and byte-reproducible:

* single-tensor files (embedding / unit caches): a fixed-size header
  ``magic, version, dtype code, rows, cols, frame_rate`` followed by the
  row-major payload;
* bundle files (model / vocoder checkpoints): a JSON header describing
  metadata and the named tensor blocks that follow, sorted by name.

Byte reproducibility matters: pipeline reruns with unchanged inputs must
rewrite identical artifacts, which rules out pickle-based containers.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ValidationError

TENSOR_MAGIC = b"M2SB"
BUNDLE_MAGIC = b"M2SC"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sIIQQd")

_DTYPE_CODES = {
    np.dtype("<f4"): 1,
    np.dtype("<f8"): 2,
    np.dtype("<i4"): 3,
    np.dtype("<i8"): 4,
}
_CODE_DTYPES = {code: dt for dt, code in _DTYPE_CODES.items()}


def _canonical(array: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(array)
    if arr.dtype not in _DTYPE_CODES:
        if np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype("<f8")
        elif np.issubdtype(arr.dtype, np.integer):
            arr = arr.astype("<i8")
        else:
            raise ValidationError(f"unsupported tensor dtype: {arr.dtype}")
    return arr


def write_tensor(path: str | Path, array: np.ndarray, frame_rate: float = 0.0) -> None:
    """Write a 1-D or 2-D array; 1-D arrays are stored as a single column."""
    arr = _canonical(np.asarray(array))
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValidationError(f"expected 1-D or 2-D tensor, got shape {arr.shape}")
    header = _HEADER.pack(
        TENSOR_MAGIC,
        FORMAT_VERSION,
        _DTYPE_CODES[arr.dtype],
        arr.shape[0],
        arr.shape[1],
        float(frame_rate),
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.tobytes(order="C"))


def read_tensor(path: str | Path) -> tuple[np.ndarray, float]:
    """Return (array, frame_rate). Raises OSError on a corrupt container."""
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise OSError(f"truncated tensor file: {path}")
        magic, version, dtype_code, rows, cols, frame_rate = _HEADER.unpack(raw)
        if magic != TENSOR_MAGIC:
            raise OSError(f"not a tensor container: {path}")
        if version != FORMAT_VERSION:
            raise OSError(f"unsupported container version {version}: {path}")
        dtype = _CODE_DTYPES.get(dtype_code)
        if dtype is None:
            raise OSError(f"unknown dtype code {dtype_code}: {path}")
        payload = fh.read(rows * cols * dtype.itemsize)
        if len(payload) != rows * cols * dtype.itemsize:
            raise OSError(f"truncated tensor payload: {path}")
    arr = np.frombuffer(payload, dtype=dtype).reshape(rows, cols).copy()
    return arr, frame_rate


def write_bundle(path: str | Path, meta: dict, tensors: dict[str, np.ndarray]) -> None:
    """Write a named-tensor bundle with a JSON metadata header.

    ``meta`` must be JSON-serializable. Tensor blocks are emitted in sorted
    name order so identical contents always produce identical bytes.
    """
    blocks = []
    arrays = []
    for name in sorted(tensors):
        arr = _canonical(np.asarray(tensors[name]))
        blocks.append(
            {
                "name": name,
                "dtype": _DTYPE_CODES[arr.dtype],
                "shape": list(arr.shape),
                "nbytes": arr.nbytes,
            }
        )
        arrays.append(arr)
    header = json.dumps(
        {"version": FORMAT_VERSION, "meta": meta, "tensors": blocks},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(BUNDLE_MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for arr in arrays:
            fh.write(arr.tobytes(order="C"))


def read_bundle(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    """Return (meta, tensors by name)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != BUNDLE_MAGIC:
            raise OSError(f"not a bundle container: {path}")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        if header.get("version") != FORMAT_VERSION:
            raise OSError(f"unsupported bundle version: {path}")
        tensors = {}
        for block in header["tensors"]:
            dtype = _CODE_DTYPES[block["dtype"]]
            shape = tuple(block["shape"])
            payload = fh.read(block["nbytes"])
            if len(payload) != block["nbytes"]:
                raise OSError(f"truncated bundle payload: {path}")
            tensors[block["name"]] = (
                np.frombuffer(payload, dtype=dtype).reshape(shape).copy()
            )
    return header["meta"], tensors

"""Versioned binary checkpoint format.

AIDEV-NOTE: Layout is
    MAGIC (8 bytes) | format version (uint32 LE) | header length (uint64 LE)
    | JSON header | raw little-endian tensor bytes in header order.
The header echoes the model spec, the training config and every tensor's
name/shape/dtype. Output bytes depend only on the parameters and echoes,
so identical runs write identical files.
"""

import json
import logging
import struct
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import ValidationError

from pdmrec.errors import CheckpointError
from pdmrec.model.params import ModelParams, ModelSpec

logger = logging.getLogger(__name__)

MAGIC = b"PDMRCKPT"
CHECKPOINT_VERSION = 1
_PREFIX = struct.Struct("<8sIQ")


def save_checkpoint(
    path: str | Path,
    params: ModelParams,
    config: dict[str, Any] | None = None,
    extra: dict[str, Any] | None = None,
) -> None:
    """Write params plus config echo to `path`."""
    arrays = params.arrays()
    header = {
        "format_version": CHECKPOINT_VERSION,
        "spec": params.spec.model_dump(mode="json"),
        "config": config or {},
        "extra": extra or {},
        "tensors": [
            {"name": name, "shape": list(a.shape), "dtype": a.dtype.str.lstrip("<>|=")}
            for name, a in arrays.items()
        ],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with Path(path).open("wb") as handle:
        handle.write(_PREFIX.pack(MAGIC, CHECKPOINT_VERSION, len(header_bytes)))
        handle.write(header_bytes)
        for a in arrays.values():
            handle.write(np.ascontiguousarray(a, dtype=a.dtype.newbyteorder("<")).tobytes())
    logger.debug("Wrote checkpoint %s (%d tensors)", path, len(arrays))


def load_checkpoint(
    path: str | Path, expected_spec: ModelSpec | None = None
) -> tuple[ModelParams, dict[str, Any]]:
    """Read a checkpoint; returns the params and the decoded header."""
    blob = Path(path).read_bytes()
    if len(blob) < _PREFIX.size:
        raise CheckpointError(f"{path}: file too short for a checkpoint")
    magic, version, header_len = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: not a pdmrec checkpoint")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    start = _PREFIX.size
    try:
        header = json.loads(blob[start : start + header_len].decode("utf-8"))
        spec = ModelSpec.model_validate(header["spec"])
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValidationError) as exc:
        raise CheckpointError(f"{path}: corrupt header: {exc}") from exc
    if expected_spec is not None and spec != expected_spec:
        raise CheckpointError(
            f"{path}: checkpoint architecture {spec.model_dump()} does not match "
            f"configuration {expected_spec.model_dump()}"
        )

    try:
        table = [
            (
                str(entry["name"]),
                np.dtype(entry["dtype"]).newbyteorder("<"),
                tuple(int(n) for n in entry["shape"]),
            )
            for entry in header["tensors"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: corrupt tensor table: {exc}") from exc

    offset = start + header_len
    arrays: dict[str, np.ndarray] = {}
    for name, dtype, shape in table:
        size = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        if offset + size > len(blob):
            raise CheckpointError(f"{path}: truncated tensor {name}")
        arrays[name] = (
            np.frombuffer(blob, dtype=dtype, count=size // dtype.itemsize, offset=offset)
            .reshape(shape)
            .astype(dtype.newbyteorder("="))
        )
        offset += size
    if offset != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - offset} trailing bytes")
    return ModelParams.from_arrays(spec, arrays), header

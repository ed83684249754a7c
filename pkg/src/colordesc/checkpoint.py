"""Binary model container.

Layout (all integers little-endian):

    8 bytes   magic ``COLORDSC``
    4 bytes   format version (uint32)
    8 bytes   header length L (uint64)
    L bytes   UTF-8 JSON header, canonical form (sorted keys, no spaces)
    ...       tensor payloads, raw values in header-manifest order
    4 bytes   CRC32 of everything above (uint32)

The header carries the model family tag, featurizer scheme and its
constants, training config, vocabulary or description inventory, the
tensor manifest (name, dtype, shape), and run metadata. It deliberately
contains no timestamp: two runs with the same seed must produce
byte-identical files.

Tensor values are 32-bit (``f4`` or ``i4``); scoring after a roundtrip
is bit-identical because models already hold float32 parameters.
"""

from __future__ import annotations

import json
import struct
import zlib

import numpy as np

from .errors import CheckpointError

MAGIC = b"COLORDSC"
FORMAT_VERSION = 1

_DTYPES = {"f4": np.dtype("<f4"), "i4": np.dtype("<i4")}


def _storage_dtype(arr: np.ndarray) -> str:
    if arr.dtype == np.float32:
        return "f4"
    if arr.dtype == np.int32:
        return "i4"
    if np.issubdtype(arr.dtype, np.integer):
        if arr.size and (arr.max() > np.iinfo(np.int32).max or arr.min() < np.iinfo(np.int32).min):
            raise CheckpointError("integer tensor exceeds 32-bit range")
        return "i4"
    if np.issubdtype(arr.dtype, np.floating):
        raise CheckpointError(
            f"refusing to narrow {arr.dtype} tensor to float32 implicitly")
    raise CheckpointError(f"unsupported tensor dtype {arr.dtype}")


def write_checkpoint(path, header: dict, tensors: dict) -> None:
    """Serialize header + tensors. ``header`` must be JSON-ready except
    for the tensor manifest, which is generated here."""
    manifest = []
    blobs = []
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name])
        code = _storage_dtype(arr)
        manifest.append({"name": name, "dtype": code, "shape": list(arr.shape)})
        blobs.append(arr.astype(_DTYPES[code], copy=False).tobytes())
    full = dict(header)
    full["tensors"] = manifest
    head = json.dumps(full, sort_keys=True, separators=(",", ":")).encode("utf-8")

    body = bytearray()
    body += MAGIC
    body += struct.pack("<I", FORMAT_VERSION)
    body += struct.pack("<Q", len(head))
    body += head
    for blob in blobs:
        body += blob
    crc = zlib.crc32(bytes(body)) & 0xFFFFFFFF
    body += struct.pack("<I", crc)
    with open(path, "wb") as fh:
        fh.write(bytes(body))


def read_checkpoint(path):
    """Returns (header dict, {name: array}). Tensors come back in their
    declared shapes with dtype float32 or int32."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc

    def need(offset, n, what):
        if offset + n > len(raw):
            raise CheckpointError(
                f"truncated checkpoint: need {n} bytes for {what} at offset "
                f"{offset}, file has {len(raw)}")
        return raw[offset : offset + n]

    pos = 0
    magic = need(pos, len(MAGIC), "magic")
    pos += len(MAGIC)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}: not a model checkpoint")
    (version,) = struct.unpack("<I", need(pos, 4, "version"))
    pos += 4
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint format version {version} "
            f"(this build reads version {FORMAT_VERSION})")
    (head_len,) = struct.unpack("<Q", need(pos, 8, "header length"))
    pos += 8
    head_raw = need(pos, head_len, "header")
    pos += head_len
    try:
        header = json.loads(head_raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from exc

    manifest = header.get("tensors")
    if not isinstance(manifest, list):
        raise CheckpointError("checkpoint header missing tensor manifest")
    tensors = {}
    for entry in manifest:
        name, code, shape = entry["name"], entry["dtype"], tuple(entry["shape"])
        if code not in _DTYPES:
            raise CheckpointError(f"tensor {name!r} has unknown dtype {code!r}")
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * 4
        blob = need(pos, nbytes, f"tensor {name!r}")
        pos += nbytes
        tensors[name] = np.frombuffer(blob, dtype=_DTYPES[code]).reshape(shape).copy()

    trailer = need(pos, 4, "checksum")
    (stored_crc,) = struct.unpack("<I", trailer)
    actual_crc = zlib.crc32(raw[:pos]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise CheckpointError(
            f"checksum mismatch: stored {stored_crc:#010x}, "
            f"computed {actual_crc:#010x}")
    if pos + 4 != len(raw):
        raise CheckpointError(
            f"{len(raw) - pos - 4} trailing bytes after checksum")
    return header, tensors

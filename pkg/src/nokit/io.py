"""Single-file array container shared by datasets and checkpoints.

Layout (all integers little-endian)::

    b"NOPK" | u32 version | u64 header_length | header (UTF-8 JSON) | payload | u64 CRC-64/XZ(payload)

The header is ``{"entries": [{name, dtype, shape, byte_offset}, ...], "metadata": {...}}``
with ``dtype`` either ``f64`` or ``c128`` and ``byte_offset`` relative to the
start of the payload.  Complex values are stored as (re, im) pairs.
"""
from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass, field

import numpy as np
from fastcrc import crc64

from .errors import ChecksumError, FormatError, InvalidArgument, MagicError, VersionError

MAGIC = b"NOPK"
VERSION = 1
_DTYPES = {"f64": np.dtype("<f8"), "c128": np.dtype("<c16")}
_PREFIX = struct.Struct("<4sIQ")
_CRC = struct.Struct("<Q")


def checksum(payload: bytes) -> int:
    """CRC-64/XZ of ``payload``."""
    return crc64.xz(payload)


@dataclass
class Container:
    """Named arrays plus a JSON-serializable metadata dictionary."""

    arrays: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.arrays[name]

    def __contains__(self, name):
        return name in self.arrays

    def names(self) -> list:
        return list(self.arrays)


def _dtype_tag(arr: np.ndarray) -> str:
    if np.iscomplexobj(arr):
        return "c128"
    if arr.dtype.kind in "fiub":
        return "f64"
    raise InvalidArgument(f"cannot store arrays of dtype {arr.dtype}")


def encode(entries, metadata: dict | None = None) -> bytes:
    """Serialize ``entries`` (a mapping or ``(name, array)`` pairs) to container bytes."""
    items = list(entries.items()) if isinstance(entries, dict) else list(entries)
    names = [name for name, _ in items]
    if len(set(names)) != len(names):
        dup = next(n for n in names if names.count(n) > 1)
        raise InvalidArgument(f"duplicate container entry {dup!r}")
    header_entries, chunks, offset = [], [], 0
    for name, arr in items:
        if not isinstance(name, str) or not name:
            raise InvalidArgument(f"entry names must be non-empty strings, got {name!r}")
        arr = np.asarray(arr)
        tag = _dtype_tag(arr)
        data = np.ascontiguousarray(arr, dtype=_DTYPES[tag]).tobytes()
        header_entries.append({"name": name, "dtype": tag, "shape": list(arr.shape), "byte_offset": offset})
        chunks.append(data)
        offset += len(data)
    header = {"entries": header_entries, "metadata": metadata or {}}
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")
    payload = b"".join(chunks)
    return b"".join([_PREFIX.pack(MAGIC, VERSION, len(hbytes)), hbytes, payload, _CRC.pack(checksum(payload))])


def decode(blob: bytes, source: str = "<bytes>") -> Container:
    """Parse container bytes, validating magic, version and checksum before anything else."""
    if len(blob) < _PREFIX.size or blob[:4] != MAGIC:
        raise MagicError(f"{source}: not a container file (bad magic)")
    _, version, hlen = _PREFIX.unpack_from(blob, 0)
    if version != VERSION:
        raise VersionError(f"{source}: container version {version}, this build reads version {VERSION}")
    start = _PREFIX.size + hlen
    if start + _CRC.size > len(blob):
        raise FormatError(f"{source}: truncated file")
    payload = blob[start:-_CRC.size]
    (stored,) = _CRC.unpack_from(blob, len(blob) - _CRC.size)
    if stored != checksum(payload):
        raise ChecksumError(f"{source}: payload checksum mismatch")
    try:
        header = json.loads(blob[_PREFIX.size:start].decode("utf-8"))
        entries, metadata = header["entries"], header["metadata"]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"{source}: unreadable header ({exc})") from None
    arrays, spans = {}, []
    for e in entries:
        try:
            name, tag, shape, off = e["name"], e["dtype"], tuple(e["shape"]), int(e["byte_offset"])
            dt = _DTYPES[tag]
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{source}: malformed entry {e!r} ({exc})") from None
        if name in arrays:
            raise FormatError(f"{source}: duplicate entry {name!r}")
        count = int(np.prod(shape, dtype=np.int64))
        size = count * dt.itemsize
        if off < 0 or off + size > len(payload):
            raise FormatError(f"{source}: entry {name!r} lies outside the payload")
        if size:
            spans.append((off, off + size, name))
        arr = np.frombuffer(payload, dtype=dt, count=count, offset=off).reshape(shape)
        arrays[name] = arr.astype(np.complex128 if tag == "c128" else np.float64)
    spans.sort()
    for (a0, a1, an), (b0, b1, bn) in zip(spans, spans[1:]):
        if b0 < a1:
            raise FormatError(f"{source}: entries {an!r} and {bn!r} overlap")
    return Container(arrays, metadata)


def container_write(path, entries, metadata: dict | None = None) -> None:
    """Write atomically: a temporary file in the target directory is renamed into place."""
    blob = encode(entries, metadata)
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp = tempfile.mkstemp(prefix=".nopk-", dir=directory)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def container_read(path) -> Container:
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return decode(blob, path)

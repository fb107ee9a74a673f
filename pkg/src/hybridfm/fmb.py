"""FMB1 binary container for named float64 / int64 arrays.

Layout, all integers little-endian::

    b"FMB1"
    uint32  entry count
    per entry:
        uint32  name length, then the UTF-8 name
        uint8   dtype code (1 = float64, 2 = int64)
        uint32  ndim
        uint64  dims[ndim]
        payload, row-major little-endian
    uint32  CRC32 of every preceding byte
"""

from __future__ import annotations

import os
import struct
import tempfile
import zlib

import numpy as np

from .errors import ChecksumError, ParseError

MAGIC = b"FMB1"
_DTYPES = {1: np.dtype("<f8"), 2: np.dtype("<i8")}
_CODES = {"f": 1, "i": 2, "u": 2, "b": 2}


def _encode_entry(name, arr) -> bytes:
    arr = np.asarray(arr)
    if arr.dtype.kind not in _CODES:
        raise TypeError(f"{name}: unsupported dtype {arr.dtype}")
    code = _CODES[arr.dtype.kind]
    if code == 2 and arr.dtype.kind == "u" and arr.size and arr.max() > np.iinfo(np.int64).max:
        raise OverflowError(f"{name}: values do not fit in int64")
    data = np.array(arr, dtype=_DTYPES[code], order="C")
    raw = name.encode("utf-8")
    head = struct.pack("<I", len(raw)) + raw + struct.pack("<BI", code, data.ndim)
    head += struct.pack(f"<{data.ndim}Q", *data.shape)
    return head + data.tobytes(order="C")


def dumps(tensors) -> bytes:
    """Serialize a mapping of name to array."""
    parts = [MAGIC, struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        parts.append(_encode_entry(str(name), arr))
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def loads(buf: bytes) -> dict:
    """Parse a container, verifying the checksum first."""
    if len(buf) < 12 or buf[:4] != MAGIC:
        raise ParseError("not an FMB1 container")
    body, (crc,) = buf[:-4], struct.unpack("<I", buf[-4:])
    if zlib.crc32(body) != crc:
        raise ChecksumError("FMB1 checksum mismatch; file is corrupt")
    (count,) = struct.unpack_from("<I", body, 4)
    pos, out = 8, {}
    try:
        for _ in range(count):
            (nlen,) = struct.unpack_from("<I", body, pos)
            pos += 4
            name = body[pos : pos + nlen].decode("utf-8")
            pos += nlen
            code, ndim = struct.unpack_from("<BI", body, pos)
            pos += 5
            shape = struct.unpack_from(f"<{ndim}Q", body, pos)
            pos += 8 * ndim
            if code not in _DTYPES:
                raise ParseError(f"{name}: unknown dtype code {code}")
            if name in out:
                raise ParseError(f"duplicate entry {name!r}")
            dtype = _DTYPES[code]
            nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
            if pos + nbytes > len(body):
                raise ParseError(f"{name}: payload truncated")
            out[name] = np.frombuffer(body, dtype, count=nbytes // dtype.itemsize, offset=pos).reshape(shape).copy()
            pos += nbytes
    except (struct.error, UnicodeDecodeError) as exc:
        raise ParseError(f"malformed FMB1 container: {exc}") from None
    if pos != len(body):
        raise ParseError("trailing bytes after last entry")
    return out


def write_fmb(path, tensors) -> None:
    """Atomically write ``tensors`` to ``path`` (temp file in the same directory, then rename)."""
    data = dumps(tensors)
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)), suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_fmb(path) -> dict:
    with open(path, "rb") as fh:
        return loads(fh.read())

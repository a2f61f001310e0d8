"""Binary checkpoint format for named float32 parameters.

Layout: magic ``SVTN``, version u32, config-JSON length u32 + bytes,
then one record per parameter (name length u32, utf-8 name, rank u32,
dims u32 each, little-endian f32 payload), and a trailing CRC32 over
everything before it. All integers are little-endian.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from ..errors import CheckpointError

__all__ = ["save_checkpoint", "load_checkpoint", "MAGIC", "VERSION"]

MAGIC = b"SVTN"
VERSION = 1


def save_checkpoint(path, params, config):
    """Write named f32 arrays plus a JSON config blob to ``path``."""
    chunks = [MAGIC, struct.pack("<I", VERSION)]
    blob = json.dumps(config, sort_keys=True).encode("utf-8")
    chunks.append(struct.pack("<I", len(blob)))
    chunks.append(blob)
    for name, arr in params.items():
        data = np.ascontiguousarray(np.asarray(arr, dtype="<f4"))
        nb = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(nb)))
        chunks.append(nb)
        chunks.append(struct.pack("<I", data.ndim))
        chunks.append(struct.pack("<%dI" % data.ndim, *data.shape))
        chunks.append(data.tobytes())
    payload = b"".join(chunks)
    payload += struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)
    Path(path).write_bytes(payload)


def load_checkpoint(path):
    """Read a checkpoint, returning (params dict, config dict)."""
    raw = Path(path).read_bytes()
    if len(raw) < 16:
        raise CheckpointError("%s: file too short to be a checkpoint" % path)
    body, crc_stored = raw[:-4], struct.unpack("<I", raw[-4:])[0]
    if zlib.crc32(body) & 0xFFFFFFFF != crc_stored:
        raise CheckpointError("%s: CRC32 mismatch, file corrupted" % path)
    if body[:4] != MAGIC:
        raise CheckpointError("%s: bad magic %r" % (path, body[:4]))
    (version,) = struct.unpack("<I", body[4:8])
    if version != VERSION:
        raise CheckpointError("%s: unsupported version %d" % (path, version))
    off = 8
    (blob_len,) = struct.unpack("<I", body[off:off + 4])
    off += 4
    try:
        config = json.loads(body[off:off + blob_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError("%s: bad config blob: %s" % (path, e))
    off += blob_len

    params = {}
    while off < len(body):
        if off + 4 > len(body):
            raise CheckpointError("%s: truncated parameter record" % path)
        (name_len,) = struct.unpack("<I", body[off:off + 4])
        off += 4
        name = body[off:off + name_len].decode("utf-8")
        off += name_len
        (rank,) = struct.unpack("<I", body[off:off + 4])
        off += 4
        dims = struct.unpack("<%dI" % rank, body[off:off + 4 * rank])
        off += 4 * rank
        count = int(np.prod(dims)) if rank else 1
        nbytes = 4 * count
        if off + nbytes > len(body):
            raise CheckpointError("%s: truncated payload for %r" % (path, name))
        arr = np.frombuffer(body[off:off + nbytes], dtype="<f4").reshape(dims)
        off += nbytes
        params[name] = arr.astype(np.float32)
    return params, config

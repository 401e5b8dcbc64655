"""Standalone QUSD reader.

Implements the published container layout directly so this package depends
only on the on-disk contract, not on the generator library:

    magic "QUSD" | u32 version=1 | u32 metadata bytes | UTF-8 JSON metadata
    | u32 tensor count | per tensor: u16 name bytes, name, u8 dtype code
    (0 = float32, 1 = uint8), u8 ndim, ndim * u32 dims, row-major payload

All integers little-endian. The dataset manifest is JSON with SHA-256
digests per sample file.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"QUSD"
SUPPORTED_VERSION = 1


class QusdError(Exception):
    """Malformed QUSD file or manifest."""


class DigestError(QusdError):
    """Sample bytes do not match the manifest digest."""


@dataclass(frozen=True)
class Sample:
    tensors: dict
    meta: dict


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.blob):
            raise QusdError("truncated QUSD payload")
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]


def parse_sample(blob: bytes) -> Sample:
    r = _Reader(blob)
    if r.take(4) != MAGIC:
        raise QusdError("bad magic; not a QUSD file")
    version = r.u32()
    if version != SUPPORTED_VERSION:
        raise QusdError(f"unsupported QUSD version {version}")
    try:
        meta = json.loads(r.take(r.u32()).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise QusdError(f"corrupt metadata: {e}") from e
    tensors = {}
    for _ in range(r.u32()):
        name_len = struct.unpack("<H", r.take(2))[0]
        name = r.take(name_len).decode("utf-8")
        code, ndim = struct.unpack("<BB", r.take(2))
        dims = struct.unpack(f"<{ndim}I", r.take(4 * ndim))
        if code == 0:
            dtype, itemsize = np.dtype("<f4"), 4
        elif code == 1:
            dtype, itemsize = np.dtype(np.uint8), 1
        else:
            raise QusdError(f"unknown dtype code {code}")
        count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
        tensors[name] = np.frombuffer(r.take(count * itemsize), dtype=dtype).reshape(dims).copy()
    if r.pos != len(blob):
        raise QusdError("trailing bytes after last tensor")
    return Sample(tensors=tensors, meta=meta)


def read_sample(path) -> Sample:
    return parse_sample(Path(path).read_bytes())


def load_manifest(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise QusdError(f"corrupt manifest: {e}") from e
    for key in ("format_version", "n_samples", "samples"):
        if key not in doc:
            raise QusdError(f"manifest lacks {key!r}")
    return doc


def iter_split(manifest_path, split: str, verify: bool = True):
    """Yield Samples of one split in index order, checking digests."""
    manifest_path = Path(manifest_path)
    doc = load_manifest(manifest_path)
    base = manifest_path.parent
    entries = [e for e in doc["samples"] if e["split"] == split]
    for entry in sorted(entries, key=lambda e: e["index"]):
        blob = (base / entry["file"]).read_bytes()
        if verify and hashlib.sha256(blob).hexdigest() != entry["sha256"]:
            raise DigestError(f"digest mismatch for {entry['file']}")
        yield parse_sample(blob)

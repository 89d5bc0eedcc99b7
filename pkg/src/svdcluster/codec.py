"""Binary containers for raw collections (``.mcol``) and compressed stores (``.msvd``).

Layout (all integers little-endian, all reals IEEE-754 float64 LE, column-major)::

    .mcol  "MCOL" | u32 version=1 | u64 m | u64 block_count
           | per block: u32 id_len, id (UTF-8), u64 cols
           | payloads in header order, m*cols f64 each

    .msvd  "MSVD" | u32 version=1 | u64 m | u64 cluster_count
           | per cluster: u32 id_len, id, u64 r_c, u64 member_count,
                          per member: u32 id_len, id, u64 cols
           | per cluster in order: U_tilde (m*r_c f64) then V (N_c*r_c f64)

There is no compression layer and no padding.
"""

from __future__ import annotations

import io
import os
import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .collection import Block, Collection
from .store import CompressedCluster, CompressedStore

MCOL_MAGIC = b"MCOL"
MSVD_MAGIC = b"MSVD"
VERSION = 1

_F8 = np.dtype("<f8")


class FormatError(ValueError):
    """Malformed, truncated or unsupported container."""


# ---------------------------------------------------------------------------
# low-level helpers
# ---------------------------------------------------------------------------


def _write_id(buf: BinaryIO, s: str) -> None:
    raw = s.encode("utf-8")
    buf.write(struct.pack("<I", len(raw)))
    buf.write(raw)


def _write_matrix(buf: BinaryIO, M: np.ndarray) -> None:
    buf.write(np.asarray(M, dtype=_F8).tobytes(order="F"))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        end = self.pos + n
        if end > len(self.data):
            raise FormatError(f"truncated payload: need {n} bytes at offset {self.pos}, file has {len(self.data)}")
        out = self.data[self.pos : end]
        self.pos = end
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def ident(self) -> str:
        n = self.u32()
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError("identifier is not valid UTF-8") from exc

    def matrix(self, rows: int, cols: int) -> np.ndarray:
        nbytes = rows * cols * 8
        M = np.frombuffer(self.take(nbytes), dtype=_F8).reshape((rows, cols), order="F")
        if not np.all(np.isfinite(M)):
            raise FormatError("payload contains non-finite values")
        return np.array(M, dtype=np.float64, order="F")

    def header(self, magic: bytes) -> None:
        got = self.take(4)
        if got != magic:
            raise FormatError(f"bad magic {got!r}, expected {magic!r}")
        version = self.u32()
        if version != VERSION:
            raise FormatError(f"unsupported version {version}")

    def finish(self) -> None:
        if self.pos != len(self.data):
            raise FormatError(f"{len(self.data) - self.pos} trailing bytes after payload")


def _atomic_write(path: str | os.PathLike, payload: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# .mcol
# ---------------------------------------------------------------------------


def encode_collection(coll: Collection) -> bytes:
    buf = io.BytesIO()
    buf.write(MCOL_MAGIC)
    buf.write(struct.pack("<IQQ", VERSION, coll.m, len(coll)))
    for b in coll:
        _write_id(buf, b.block_id)
        buf.write(struct.pack("<Q", b.cols))
    for b in coll:
        _write_matrix(buf, b.data)
    return buf.getvalue()


def decode_collection(data: bytes) -> Collection:
    rd = _Reader(data)
    rd.header(MCOL_MAGIC)
    m = rd.u64()
    count = rd.u64()
    if m < 1:
        raise FormatError("row count must be positive")
    heads = []
    seen = set()
    for _ in range(count):
        bid = rd.ident()
        if bid in seen:
            raise FormatError(f"duplicate block id {bid!r}")
        seen.add(bid)
        heads.append((bid, rd.u64()))
    try:
        blocks = [Block(bid, rd.matrix(m, cols)) for bid, cols in heads]
        rd.finish()
        return Collection(blocks, m=m)
    except FormatError:
        raise
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def write_collection(coll: Collection, path) -> None:
    _atomic_write(path, encode_collection(coll))


def read_collection(path) -> Collection:
    return decode_collection(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# .msvd
# ---------------------------------------------------------------------------


def encode_store(store: CompressedStore) -> bytes:
    buf = io.BytesIO()
    buf.write(MSVD_MAGIC)
    buf.write(struct.pack("<IQQ", VERSION, store.m, len(store.clusters)))
    for c in store.clusters:
        _write_id(buf, c.cluster_id)
        buf.write(struct.pack("<QQ", c.rank, len(c.members)))
        for bid, cols in c.members:
            _write_id(buf, bid)
            buf.write(struct.pack("<Q", cols))
    for c in store.clusters:
        _write_matrix(buf, c.U_tilde)
        _write_matrix(buf, c.V)
    return buf.getvalue()


def decode_store(data: bytes) -> CompressedStore:
    rd = _Reader(data)
    rd.header(MSVD_MAGIC)
    m = rd.u64()
    count = rd.u64()
    if m < 1:
        raise FormatError("row count must be positive")
    heads = []
    seen_clusters, seen_blocks = set(), set()
    for _ in range(count):
        cid = rd.ident()
        if cid in seen_clusters:
            raise FormatError(f"duplicate cluster id {cid!r}")
        seen_clusters.add(cid)
        rank = rd.u64()
        if rank < 1:
            raise FormatError(f"cluster {cid!r} has rank 0")
        n_members = rd.u64()
        members = []
        for _ in range(n_members):
            bid = rd.ident()
            if bid in seen_blocks:
                raise FormatError(f"duplicate block id {bid!r}")
            seen_blocks.add(bid)
            members.append((bid, rd.u64()))
        heads.append((cid, rank, tuple(members)))
    clusters = []
    for cid, rank, members in heads:
        width = sum(c for _, c in members)
        U = rd.matrix(m, rank)
        V = rd.matrix(width, rank)
        try:
            clusters.append(CompressedCluster(cid, rank, U, members, V))
        except ValueError as exc:
            raise FormatError(str(exc)) from exc
    rd.finish()
    return CompressedStore(m, tuple(clusters), VERSION)


def write_store(store: CompressedStore, path) -> None:
    _atomic_write(path, encode_store(store))


def read_store(path) -> CompressedStore:
    return decode_store(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# raw reconstructed matrices
# ---------------------------------------------------------------------------


def encode_matrix(M: np.ndarray) -> bytes:
    M = np.asarray(M, dtype=np.float64)
    return struct.pack("<QQ", *M.shape) + M.astype(_F8).tobytes(order="F")


def decode_matrix(data: bytes) -> np.ndarray:
    rd = _Reader(data)
    rows, cols = rd.u64(), rd.u64()
    M = rd.matrix(rows, cols)
    rd.finish()
    return M

"""Embedding tables and the UFEB binary file format.

Layout (little-endian throughout):

    magic    4 bytes  b"UFEB"
    version  u16      1
    dtype    u8       0 (IEEE-754 binary32)
    reserved u8       0
    rows     u64
    dim      u64
    ids_len  u64
    ids      ids_len bytes, UTF-8 JSON array of `rows` id strings
    data     rows * dim float32 values, row-major

Round-trips are bit-exact: vectors are stored and kept as float32.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import EmbeddingFormatError, InvalidInputError

MAGIC = b"UFEB"
VERSION = 1
DTYPE_FLOAT32 = 0

_HEADER = struct.Struct("<4sHBBQQQ")


@dataclass(frozen=True)
class EmbeddingTable:
    """Dense float32 matrix with one row per item id."""

    ids: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self) -> None:
        ids = tuple(self.ids)
        vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if vectors.ndim != 2:
            raise InvalidInputError("vectors must be a 2-d matrix")
        if vectors.shape[0] == 0 or vectors.shape[1] == 0:
            raise InvalidInputError("embedding table must have at least one row and one dimension")
        if len(ids) != vectors.shape[0]:
            raise InvalidInputError(f"id count {len(ids)} does not match row count {vectors.shape[0]}")
        if not all(isinstance(i, str) and i for i in ids):
            raise InvalidInputError("ids must be non-empty strings")
        if len(set(ids)) != len(ids):
            raise InvalidInputError("ids must be unique")
        if not np.all(np.isfinite(vectors)):
            raise InvalidInputError("vectors must be finite")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "vectors", vectors)

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def select(self, ids: Sequence[str]) -> "EmbeddingTable":
        """New table with rows reordered/subset to the given ids."""
        index = {item_id: row for row, item_id in enumerate(self.ids)}
        try:
            rows = [index[i] for i in ids]
        except KeyError as exc:
            raise InvalidInputError(f"unknown id {exc.args[0]!r} not present in embedding table") from exc
        return EmbeddingTable(ids=tuple(ids), vectors=self.vectors[rows])


def write_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    """Serialize a table to the UFEB binary format."""
    ids_blob = json.dumps(list(table.ids), ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    header = _HEADER.pack(
        MAGIC, VERSION, DTYPE_FLOAT32, 0, len(table), table.dim, len(ids_blob)
    )
    payload = np.ascontiguousarray(table.vectors, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(ids_blob)
        fh.write(payload)


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Read a UFEB file, validating header, ids, and payload."""
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise EmbeddingFormatError(f"truncated file: {len(blob)} bytes is smaller than the header")
    magic, version, dtype, reserved, rows, dim, ids_len = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise EmbeddingFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise EmbeddingFormatError(f"unsupported version {version}, expected {VERSION}")
    if dtype != DTYPE_FLOAT32:
        raise EmbeddingFormatError(f"unsupported dtype code {dtype}")
    if reserved != 0:
        raise EmbeddingFormatError(f"reserved header byte must be 0, got {reserved}")
    if rows == 0:
        raise EmbeddingFormatError("header declares an empty table (0 rows)")
    if dim == 0:
        raise EmbeddingFormatError("header declares dimension 0")

    ids_start = _HEADER.size
    ids_end = ids_start + ids_len
    if len(blob) < ids_end:
        raise EmbeddingFormatError("truncated file: id block is incomplete")
    try:
        ids = json.loads(blob[ids_start:ids_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise EmbeddingFormatError(f"id block is not valid UTF-8 JSON: {exc}") from exc
    if not isinstance(ids, list) or not all(isinstance(i, str) for i in ids):
        raise EmbeddingFormatError("id block must be a JSON array of strings")
    if len(ids) != rows:
        raise EmbeddingFormatError(f"id count {len(ids)} does not match declared rows {rows}")

    expected_payload = rows * dim * 4
    payload = blob[ids_end:]
    if len(payload) < expected_payload:
        raise EmbeddingFormatError(
            f"truncated payload: expected {expected_payload} bytes, found {len(payload)}"
        )
    if len(payload) > expected_payload:
        raise EmbeddingFormatError(f"trailing data: {len(payload) - expected_payload} extra bytes")
    vectors = np.frombuffer(payload, dtype="<f4").reshape(rows, dim).copy()
    if not np.all(np.isfinite(vectors)):
        raise EmbeddingFormatError("payload contains non-finite values")
    return EmbeddingTable(ids=tuple(ids), vectors=vectors)


def write_embeddings_npz(table: EmbeddingTable, path: str | Path) -> None:
    """Write a table as a NumPy .npz archive (arrays 'ids' and 'vectors')."""
    np.savez(path, ids=np.array(table.ids), vectors=table.vectors)


def load_embeddings_npz(path: str | Path) -> EmbeddingTable:
    """Read a table from a .npz archive produced by write_embeddings_npz."""
    try:
        with np.load(path, allow_pickle=False) as npz:
            if "ids" not in npz or "vectors" not in npz:
                raise EmbeddingFormatError("npz archive must contain 'ids' and 'vectors' arrays")
            ids = tuple(str(i) for i in npz["ids"])
            vectors = npz["vectors"]
    except (ValueError, OSError) as exc:
        raise EmbeddingFormatError(f"cannot read npz archive: {exc}") from exc
    if not np.issubdtype(vectors.dtype, np.floating):
        raise EmbeddingFormatError("'vectors' array must be floating point")
    return EmbeddingTable(ids=ids, vectors=vectors.astype(np.float32))

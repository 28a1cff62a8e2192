"""
Binary cache records and atomic file writes.

Layout (all integers little-endian):
    magic      4 bytes  b"GCNN"
    version    uint32   FORMAT_VERSION
    kind       uint8    RecordKind
    ndim       uint64
    dims       ndim x uint64
    meta_len   uint64
    metadata   meta_len bytes of UTF-8 JSON (sorted keys)
    payload    kind-specific, float64 / uint64 arrays
"""
import json
import logging
import os
import struct
import tempfile
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np
from scipy import sparse

from app.core.errors import CacheFormatError

logger = logging.getLogger(__name__)

MAGIC = b"GCNN"
FORMAT_VERSION = 1

_F64 = np.dtype("<f8")
_U64 = np.dtype("<u8")


class RecordKind(IntEnum):
    DENSE = 0
    SPARSE = 1
    MODEL = 2
    EIGENSYS = 3


@dataclass(frozen=True)
class CacheRecord:
    kind: RecordKind
    dims: Tuple[int, ...]
    payload: bytes
    metadata: Dict[str, Any] = field(default_factory=dict)


def encode_record(record: CacheRecord) -> bytes:
    meta = json.dumps(record.metadata, sort_keys=True, separators=(",", ":")).encode("utf-8")
    header = MAGIC + struct.pack("<IBQ", FORMAT_VERSION, int(record.kind), len(record.dims))
    header += struct.pack(f"<{len(record.dims)}Q", *record.dims)
    header += struct.pack("<Q", len(meta)) + meta
    return header + record.payload


def decode_record(data: bytes, source: str = "<bytes>") -> CacheRecord:
    if len(data) < 17 or data[:4] != MAGIC:
        raise CacheFormatError(f"{source}: not a GCNN cache record")
    version, kind, ndim = struct.unpack_from("<IBQ", data, 4)
    if version != FORMAT_VERSION:
        raise CacheFormatError(f"{source}: format version {version}, expected {FORMAT_VERSION}")
    try:
        kind = RecordKind(kind)
    except ValueError:
        raise CacheFormatError(f"{source}: unknown record kind {kind}")
    offset = 17
    try:
        dims = struct.unpack_from(f"<{ndim}Q", data, offset)
        offset += 8 * ndim
        (meta_len,) = struct.unpack_from("<Q", data, offset)
        offset += 8
        metadata = json.loads(data[offset : offset + meta_len].decode("utf-8"))
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CacheFormatError(f"{source}: corrupt header ({e})")
    offset += meta_len
    return CacheRecord(kind=kind, dims=tuple(int(d) for d in dims), payload=data[offset:], metadata=metadata)


def _expect(record: CacheRecord, kind: RecordKind) -> None:
    if record.kind is not kind:
        raise CacheFormatError(f"expected a {kind.name} record, found {record.kind.name}")


def _floats(buffer: bytes, offset: int, count: int) -> np.ndarray:
    out = np.frombuffer(buffer, dtype=_F64, count=count, offset=offset)
    return out.astype(np.float64)


def dense_record(array: np.ndarray, metadata: Dict[str, Any] = None) -> CacheRecord:
    array = np.ascontiguousarray(array, dtype=np.float64)
    return CacheRecord(RecordKind.DENSE, tuple(array.shape), array.astype(_F64).tobytes(), metadata or {})


def read_dense(record: CacheRecord) -> np.ndarray:
    _expect(record, RecordKind.DENSE)
    count = int(np.prod(record.dims)) if record.dims else 1
    if len(record.payload) != 8 * count:
        raise CacheFormatError(f"dense payload holds {len(record.payload)} bytes, dims need {8 * count}")
    return _floats(record.payload, 0, count).reshape(record.dims)


def sparse_record(matrix: sparse.spmatrix, metadata: Dict[str, Any] = None) -> CacheRecord:
    coo = sparse.csr_matrix(matrix).tocoo()
    payload = (
        struct.pack("<Q", coo.nnz)
        + coo.row.astype(_U64).tobytes()
        + coo.col.astype(_U64).tobytes()
        + coo.data.astype(_F64).tobytes()
    )
    return CacheRecord(RecordKind.SPARSE, tuple(int(d) for d in coo.shape), payload, metadata or {})


def read_sparse(record: CacheRecord) -> sparse.csr_matrix:
    _expect(record, RecordKind.SPARSE)
    if len(record.dims) != 2:
        raise CacheFormatError(f"sparse record needs 2 dims, found {len(record.dims)}")
    (nnz,) = struct.unpack_from("<Q", record.payload, 0)
    if len(record.payload) != 8 + 24 * nnz:
        raise CacheFormatError(f"sparse payload size does not match {nnz} nonzeros")
    rows = np.frombuffer(record.payload, dtype=_U64, count=nnz, offset=8).astype(np.int64)
    cols = np.frombuffer(record.payload, dtype=_U64, count=nnz, offset=8 + 8 * nnz).astype(np.int64)
    vals = _floats(record.payload, 8 + 16 * nnz, nnz)
    matrix = sparse.csr_matrix((vals, (rows, cols)), shape=record.dims)
    matrix.sort_indices()
    return matrix


def model_record(values: np.ndarray, metadata: Dict[str, Any]) -> CacheRecord:
    values = np.asarray(values, dtype=np.float64).ravel()
    return CacheRecord(RecordKind.MODEL, (len(values),), values.astype(_F64).tobytes(), metadata)


def read_model(record: CacheRecord) -> Tuple[np.ndarray, Dict[str, Any]]:
    _expect(record, RecordKind.MODEL)
    (size,) = record.dims
    if len(record.payload) != 8 * size:
        raise CacheFormatError(f"model payload does not hold {size} parameters")
    return _floats(record.payload, 0, size), record.metadata


def eigensystem_record(
    eigenvalues: np.ndarray, eigenfunctions: np.ndarray, areas: np.ndarray, metadata: Dict[str, Any] = None
) -> CacheRecord:
    """Payload: K eigenvalues, N x K eigenfunctions row-major, N vertex areas."""
    n, k = eigenfunctions.shape
    payload = b"".join(
        np.ascontiguousarray(a, dtype=np.float64).astype(_F64).tobytes()
        for a in (eigenvalues, eigenfunctions, areas)
    )
    return CacheRecord(RecordKind.EIGENSYS, (n, k), payload, metadata or {})


def read_eigensystem(record: CacheRecord) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    _expect(record, RecordKind.EIGENSYS)
    n, k = record.dims
    if len(record.payload) != 8 * (k + n * k + n):
        raise CacheFormatError(f"eigensystem payload does not match dims ({n}, {k})")
    eigenvalues = _floats(record.payload, 0, k)
    eigenfunctions = _floats(record.payload, 8 * k, n * k).reshape(n, k)
    areas = _floats(record.payload, 8 * (k + n * k), n)
    return eigenvalues, eigenfunctions, areas


def atomic_write_bytes(path: Union[str, Path], data: bytes) -> Path:
    """Write to a temp file in the target directory, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path: Union[str, Path], text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def write_record(path: Union[str, Path], record: CacheRecord) -> Path:
    path = atomic_write_bytes(path, encode_record(record))
    logger.debug("Wrote %s record %s to %s", record.kind.name, record.dims, path)
    return path


def read_record(path: Union[str, Path]) -> CacheRecord:
    path = Path(path)
    return decode_record(path.read_bytes(), str(path))

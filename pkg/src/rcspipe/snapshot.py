"""On-disk snapshot of a statevector (format version 1).

Layout, all integers little-endian::

    offset  size  field
    0       4     magic b"RCSS"
    4       4     format_version (u32) = 1
    8       4     n_qubits (u32)
    12      8     payload_bytes (u64) = 16 * 2**n_qubits
    20      32    SHA-256 of the payload
    52      ...   payload: amplitudes in index order, (re, im) float64 pairs

Writers go through a temporary file in the target directory followed by
``os.replace``, so a snapshot path either does not exist or is complete.
"""
from __future__ import annotations

import hashlib
import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from .engine import StateVector

MAGIC = b"RCSS"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sIIQ32s")
LOAD_NORM_TOLERANCE = 1e-6


class SnapshotError(ValueError):
    pass


class DigestMismatch(SnapshotError):
    pass


@dataclass(frozen=True)
class SnapshotHeader:
    n_qubits: int
    payload_bytes: int
    digest: bytes
    format_version: int = FORMAT_VERSION

    @property
    def digest_hex(self) -> str:
        return self.digest.hex()


def _payload(state: StateVector) -> bytes:
    return state.amps.astype("<c16", copy=False).tobytes()


def dumps(state: StateVector) -> bytes:
    payload = _payload(state)
    digest = hashlib.sha256(payload).digest()
    return HEADER.pack(MAGIC, FORMAT_VERSION, state.n_qubits, len(payload), digest) + payload


def _parse_header(raw: bytes) -> SnapshotHeader:
    if len(raw) < HEADER.size:
        raise SnapshotError(f"truncated header: {len(raw)} of {HEADER.size} bytes")
    magic, version, n_qubits, payload_bytes, digest = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    if n_qubits > 62 or payload_bytes != 16 << n_qubits:
        raise SnapshotError(f"payload size {payload_bytes} inconsistent with {n_qubits} qubits")
    return SnapshotHeader(n_qubits, payload_bytes, digest, version)


def loads(raw: bytes) -> StateVector:
    header = _parse_header(raw)
    payload = memoryview(raw)[HEADER.size:]
    if len(payload) != header.payload_bytes:
        raise SnapshotError(
            f"payload is {len(payload)} bytes, header declares {header.payload_bytes}"
        )
    if hashlib.sha256(payload).digest() != header.digest:
        raise DigestMismatch("payload digest does not match header (corrupt snapshot)")
    amps = np.frombuffer(payload, dtype="<c16").astype(np.complex128)
    state = StateVector(header.n_qubits, amps)
    if abs(state.norm_sq() - 1.0) > LOAD_NORM_TOLERANCE:
        raise SnapshotError(f"snapshot state norm^2 is {state.norm_sq()!r}")
    return state


def save_snapshot(state: StateVector, path, fsync: bool = True) -> str:
    """Atomically write ``state`` to ``path``; returns the payload digest as hex."""
    path = os.fspath(path)
    blob = dumps(state)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".snapshot-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
            if fsync:
                fh.flush()
                os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return blob[20:52].hex()


def load_snapshot(path) -> StateVector:
    with open(path, "rb") as fh:
        return loads(fh.read())


def read_header(path) -> SnapshotHeader:
    with open(path, "rb") as fh:
        return _parse_header(fh.read(HEADER.size))


def snapshot_info(path) -> dict:
    header = read_header(path)
    return {
        "n_qubits": header.n_qubits,
        "payload_bytes": header.payload_bytes,
        "digest": header.digest_hex,
        "format_version": header.format_version,
    }

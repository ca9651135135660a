import hashlib
import struct
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_state
from rcspipe.engine import StateVector
from rcspipe.snapshot import (HEADER, DigestMismatch, SnapshotError, dumps, load_snapshot, loads,
                              save_snapshot, snapshot_info)


def test_single_qubit_payload_layout(tmp_path):
    path = tmp_path / "s.rcss"
    digest = save_snapshot(StateVector.zero(1), path)
    raw = path.read_bytes()
    payload = raw[HEADER.size:]
    assert payload == struct.pack("<4d", 1.0, 0.0, 0.0, 0.0)
    assert raw[:4] == b"RCSS"
    assert struct.unpack_from("<IIQ", raw, 4) == (1, 1, 32)
    assert digest == hashlib.sha256(payload).hexdigest()


def test_payload_bytes_n20():
    assert HEADER.size == 52
    assert 16 * 2**20 == 16_777_216
    raw = dumps(StateVector.zero(20))
    assert struct.unpack_from("<Q", raw, 12)[0] == 16_777_216
    assert len(raw) == 52 + 16_777_216


def test_round_trip_bit_identical(tmp_path):
    rng = np.random.default_rng(0)
    s = StateVector(9, random_state(rng, 9))
    save_snapshot(s, tmp_path / "a")
    assert load_snapshot(tmp_path / "a").amps.tobytes() == s.amps.tobytes()


def test_flipped_byte_detected(tmp_path):
    rng = np.random.default_rng(1)
    path = tmp_path / "a"
    save_snapshot(StateVector(4, random_state(rng, 4)), path)
    raw = bytearray(path.read_bytes())
    raw[HEADER.size + 17] ^= 0x01
    path.write_bytes(raw)
    with pytest.raises(DigestMismatch):
        load_snapshot(path)


def test_header_errors(tmp_path):
    raw = bytearray(dumps(StateVector.zero(3)))
    bad_magic = bytearray(raw)
    bad_magic[0:4] = b"XXXX"
    with pytest.raises(SnapshotError, match="magic"):
        loads(bytes(bad_magic))
    bad_version = bytearray(raw)
    struct.pack_into("<I", bad_version, 4, 2)
    with pytest.raises(SnapshotError, match="version"):
        loads(bytes(bad_version))
    with pytest.raises(SnapshotError, match="payload is"):
        loads(bytes(raw[:-5]))
    with pytest.raises(SnapshotError, match="truncated header"):
        loads(bytes(raw[:10]))
    p = tmp_path / "m"
    p.write_bytes(bad_magic)
    with pytest.raises(SnapshotError):
        snapshot_info(p)


def test_unnormalized_snapshot_rejected():
    s = StateVector(2, np.array([1, 1, 0, 0], dtype=complex))
    with pytest.raises(SnapshotError, match="norm"):
        loads(dumps(s))


def test_info_reads_header_only(tmp_path):
    path = tmp_path / "ten"
    digest = save_snapshot(StateVector.zero(10), path)
    info = snapshot_info(path)
    assert info["n_qubits"] == 10
    assert info["payload_bytes"] == 16_384
    assert info["digest"] == digest
    # truncating the payload does not affect header-only reads
    path.write_bytes(path.read_bytes()[:HEADER.size])
    assert snapshot_info(path)["digest"] == digest


def test_atomic_write_leaves_no_temp_files(tmp_path):
    save_snapshot(StateVector.zero(3), tmp_path / "x")
    save_snapshot(StateVector.zero(4), tmp_path / "x")
    assert [p.name for p in tmp_path.iterdir()] == ["x"]
    assert snapshot_info(tmp_path / "x")["n_qubits"] == 4


def test_load_does_not_modify_file(tmp_path):
    rng = np.random.default_rng(2)
    path = tmp_path / "x"
    save_snapshot(StateVector(6, random_state(rng, 6)), path)
    before = hashlib.sha256(path.read_bytes()).digest()
    load_snapshot(path)
    assert hashlib.sha256(path.read_bytes()).digest() == before


def test_concurrent_loads_agree(tmp_path):
    rng = np.random.default_rng(3)
    path = tmp_path / "x"
    s = StateVector(12, random_state(rng, 12))
    save_snapshot(s, path)
    out = [None] * 8

    def load(i):
        out[i] = load_snapshot(path).amps.tobytes()

    threads = [threading.Thread(target=load, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(b == s.amps.tobytes() for b in out)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 16), seed=st.integers(0, 2**32 - 1))
def test_round_trip_property(n, seed):
    s = StateVector(n, random_state(np.random.default_rng(seed), n))
    assert loads(dumps(s)).amps.tobytes() == s.amps.tobytes()


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), data=st.data())
def test_any_payload_mutation_detected(seed, data):
    s = StateVector(5, random_state(np.random.default_rng(seed), 5))
    raw = bytearray(dumps(s))
    offset = data.draw(st.integers(HEADER.size, len(raw) - 1))
    raw[offset] ^= data.draw(st.integers(1, 255))
    with pytest.raises(DigestMismatch):
        loads(bytes(raw))

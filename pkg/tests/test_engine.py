import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_state, random_unitary
from oracles import dense_gate_unitary, oracle_state
from rcspipe.circuit import Circuit, FSim, GateOp, Rz, SqrtX, SqrtY, Unitary1Q, generate_rcs_circuit
from rcspipe.engine import (Bitstring, StateTooLarge, StateVector, apply_gate, build_state,
                            ideal_probability, probability_table)


def test_empty_circuit_is_zero_state(backend):
    s = build_state(Circuit(3))
    assert np.array_equal(s.amps, np.eye(8)[0])


def test_sqrt_x_on_zero(backend):
    s = build_state(Circuit(1, ((GateOp(SqrtX(), (0,)),),)))
    assert np.allclose(s.amps, [(1 + 1j) / 2, (1 - 1j) / 2], atol=1e-15)
    assert np.allclose(probability_table(s), [0.5, 0.5])


def test_qubit_zero_is_least_significant(backend):
    x = Unitary1Q.from_matrix([[0, 1], [1, 0]])
    s = build_state(Circuit(3, ((GateOp(x, (1,)),),)))
    assert s.amps[2] == 1
    assert str(Bitstring(3, 2)) == "010"


def test_generated_circuit_matches_dense_oracle(backend):
    c = generate_rcs_circuit(2, 3, 8, "ABCDCDAB", 5)
    assert np.max(np.abs(build_state(c).amps - oracle_state(c))) <= 1e-10


def test_rz_keeps_basis_state(backend):
    s = StateVector(2, np.eye(4)[3].astype(complex))
    out = apply_gate(s, GateOp(Rz(0.9), (1,)))
    assert np.allclose(probability_table(out), probability_table(s))
    assert abs(out.amps[3]) == pytest.approx(1.0)


def test_fsim_leaves_00_alone(backend):
    rng = np.random.default_rng(4)
    s = StateVector(2, random_state(rng, 2))
    out = apply_gate(s, GateOp(FSim(0.4, 1.1), (0, 1)))
    assert out.amps[0] == s.amps[0]


def test_apply_gate_does_not_mutate_input(backend):
    s = StateVector.zero(2)
    apply_gate(s, GateOp(SqrtX(), (0,)))
    assert np.array_equal(s.amps, np.eye(4)[0])


def test_apply_gate_index_error(backend):
    with pytest.raises(IndexError):
        apply_gate(StateVector.zero(2), GateOp(SqrtX(), (2,)))


@pytest.mark.parametrize("seed", range(20))
def test_random_gate_matches_kronecker_oracle(backend, seed):
    rng = np.random.default_rng(seed)
    n = 4
    s = StateVector(n, random_state(rng, n))
    if seed % 2:
        qubits = tuple(int(q) for q in rng.choice(n, 2, replace=False))
        kind = FSim(*rng.uniform(-3, 3, size=2))
        m = kind.matrix()
    else:
        qubits = (int(rng.integers(n)),)
        m = random_unitary(rng, 2)
        kind = Unitary1Q.from_matrix(m)
    out = apply_gate(s, GateOp(kind, qubits))
    expected = dense_gate_unitary(n, qubits, m) @ s.amps
    assert np.max(np.abs(out.amps - expected)) <= 1e-12
    assert abs(out.norm_sq() - 1) <= 1e-12


def test_kronecker_oracle_agrees_with_numpy_kron():
    # the enumeration oracle against np.kron for a single-qubit gate
    m = SqrtY().matrix()
    n, q = 3, 1
    expected = np.kron(np.eye(2), np.kron(m, np.eye(2)))
    assert np.allclose(dense_gate_unitary(n, (q,), m), expected)


def test_ideal_probability():
    s = StateVector.zero(2)
    assert ideal_probability(s, Bitstring(2, 0)) == 1.0
    assert ideal_probability(s, Bitstring(2, 1)) == 0.0
    with pytest.raises(ValueError):
        ideal_probability(s, Bitstring(3, 0))


def test_probability_table_against_oracle(backend):
    c = generate_rcs_circuit(2, 3, 10, "EFGH", 9)
    table = probability_table(build_state(c))
    ref = np.abs(oracle_state(c)) ** 2
    assert np.max(np.abs(table - ref)) <= 1e-12
    assert abs(table.sum() - 1) <= 1e-9
    for x in range(64):
        assert ideal_probability(build_state(c), Bitstring(6, x)) == pytest.approx(ref[x], abs=1e-12)


def test_probability_table_trivial():
    assert list(probability_table(StateVector.zero(1))) == [1.0, 0.0]


def test_memory_cap():
    with pytest.raises(StateTooLarge) as info:
        build_state(Circuit(31))
    assert info.value.required_bytes == 16 * 2**31
    with pytest.raises(StateTooLarge):
        build_state(Circuit(5), max_qubits=4)


def test_norm_conserved_over_many_gates(backend):
    n = 8
    rng = np.random.default_rng(1)
    s = StateVector.zero(n)
    amps = s.amps
    from rcspipe.engine import _apply_inplace
    for k in range(10_000):
        if k % 3:
            op = GateOp((SqrtX(), SqrtY())[k % 2], (int(rng.integers(n)),))
        else:
            q = rng.choice(n, 2, replace=False)
            op = GateOp(FSim(1.2, 0.4), (int(q[0]), int(q[1])))
        _apply_inplace(amps, n, op)
    assert abs(s.norm_sq() - 1) <= 1e-9


def test_build_state_deterministic(backend):
    c = generate_rcs_circuit(3, 4, 10, "ABCDCDAB", 2)
    assert build_state(c).amps.tobytes() == build_state(c).amps.tobytes()


def test_backends_agree():
    from rcspipe import kernels
    backends = kernels.available_backends()
    if len(backends) < 2:
        pytest.skip("compiled backend not built")
    rng = np.random.default_rng(3)
    base = random_state(rng, 10)
    m2, m4 = random_unitary(rng, 2), random_unitary(rng, 4)
    outs = []
    for impl in backends.values():
        a = base.copy()
        for q in range(10):
            impl.apply_1q(a, q, m2)
        for q0 in range(10):
            for q1 in range(10):
                if q0 != q1:
                    impl.apply_2q(a, q0, q1, m4)
        outs.append(a)
    assert np.max(np.abs(outs[0] - outs[1])) <= 1e-12


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(3, 6))
def test_disjoint_gates_commute(seed, n):
    rng = np.random.default_rng(seed)
    s = StateVector(n, random_state(rng, n))
    qs = [int(q) for q in rng.choice(n, 3, replace=False)]
    a = GateOp(Unitary1Q.from_matrix(random_unitary(rng, 2)), (qs[0],))
    b = GateOp(FSim(*rng.uniform(-3, 3, 2)), (qs[1], qs[2]))
    ab = apply_gate(apply_gate(s, a), b)
    ba = apply_gate(apply_gate(s, b), a)
    assert np.max(np.abs(ab.amps - ba.amps)) <= 1e-12


def test_state_vector_shape_checked():
    with pytest.raises(ValueError):
        StateVector(2, np.zeros(3))


def test_backend_override_env():
    import os
    import subprocess
    import sys
    env = dict(os.environ, RCSPIPE_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", "import rcspipe; print(rcspipe.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True).stdout
    assert out.strip() == "python"

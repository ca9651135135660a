"""Exact statevector construction.

Amplitudes are complex128 in basis-index order, qubit 0 least significant.
Kernels run single-threaded, so every result is bit-reproducible for a given
backend.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .circuit import Circuit, GateOp

DEFAULT_MAX_QUBITS = 30
BYTES_PER_AMPLITUDE = 16


class StateTooLarge(MemoryError):
    def __init__(self, n_qubits: int, max_qubits: int):
        self.required_bytes = BYTES_PER_AMPLITUDE << n_qubits
        super().__init__(
            f"{n_qubits} qubits needs {self.required_bytes} bytes of amplitudes; "
            f"limit is {max_qubits} qubits"
        )


@dataclass(eq=False)
class StateVector:
    n_qubits: int
    amps: np.ndarray

    def __post_init__(self):
        amps = np.ascontiguousarray(self.amps, dtype=np.complex128)
        if amps.ndim != 1 or amps.shape[0] != 1 << self.n_qubits:
            raise ValueError(
                f"expected {1 << self.n_qubits} amplitudes for {self.n_qubits} qubits, "
                f"got shape {amps.shape}"
            )
        self.amps = amps

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        amps = np.zeros(1 << n_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amps.copy())

    def norm_sq(self) -> float:
        # np.sum uses a fixed pairwise order, so this is reproducible
        return float(np.sum(self.amps.real ** 2 + self.amps.imag ** 2))


@dataclass(frozen=True)
class Bitstring:
    n_bits: int
    value: int

    def __post_init__(self):
        if not 0 <= self.value < (1 << self.n_bits):
            raise ValueError(f"value {self.value} does not fit in {self.n_bits} bits")

    @classmethod
    def parse(cls, text: str) -> "Bitstring":
        if not text or set(text) - {"0", "1"}:
            raise ValueError(f"not a bitstring: {text!r}")
        return cls(len(text), int(text, 2))

    def __str__(self):
        return format(self.value, f"0{self.n_bits}b")


def _apply_inplace(amps: np.ndarray, n_qubits: int, op: GateOp) -> None:
    if any(q >= n_qubits for q in op.qubits):
        raise IndexError(f"gate on qubits {op.qubits} outside {n_qubits}-qubit state")
    m = op.kind.matrix()
    if len(op.qubits) == 1:
        kernels.apply_1q(amps, op.qubits[0], m)
    else:
        kernels.apply_2q(amps, op.qubits[0], op.qubits[1], m)


def apply_gate(state: StateVector, op: GateOp) -> StateVector:
    """Return a new state with ``op`` applied; ``state`` is left untouched."""
    out = state.copy()
    _apply_inplace(out.amps, out.n_qubits, op)
    return out


def build_state(circuit: Circuit, max_qubits: int = DEFAULT_MAX_QUBITS) -> StateVector:
    if circuit.n_qubits > max_qubits:
        raise StateTooLarge(circuit.n_qubits, max_qubits)
    state = StateVector.zero(circuit.n_qubits)
    for moment in circuit.moments:
        for op in moment:
            _apply_inplace(state.amps, state.n_qubits, op)
    return state


def ideal_probability(state: StateVector, x: Bitstring) -> float:
    if x.n_bits != state.n_qubits:
        raise ValueError(f"{x.n_bits}-bit string for a {state.n_qubits}-qubit state")
    a = state.amps[x.value]
    return float(a.real * a.real + a.imag * a.imag)


def probability_table(state: StateVector) -> np.ndarray:
    amps = state.amps
    return amps.real ** 2 + amps.imag ** 2

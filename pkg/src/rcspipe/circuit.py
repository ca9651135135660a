"""Gate-level circuit representation and Sycamore-style random circuit generation.

Qubit 0 is the least-significant bit of a basis index everywhere in this
package. Two-qubit matrices act on the local index ``b(q0) + 2*b(q1)``.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

_SQRT2 = math.sqrt(2.0)

# fSim angles applied by the generator on every active coupler.
SYCAMORE_THETA = math.pi / 2
SYCAMORE_PHI = math.pi / 6


def _pauli_sqrt(pauli: np.ndarray) -> np.ndarray:
    # principal root of an involution P: ((1+i) I + (1-i) P) / 2
    return ((1 + 1j) * np.eye(2) + (1 - 1j) * pauli) / 2


_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_W = (_X + _Y) / _SQRT2

_SQRT_X = _pauli_sqrt(_X)
_SQRT_Y = _pauli_sqrt(_Y)
_SQRT_W = _pauli_sqrt(_W)
for _m in (_SQRT_X, _SQRT_Y, _SQRT_W):
    _m.setflags(write=False)


class GateKind:
    """Base class for gate variants. Subclasses are frozen dataclasses."""

    arity = 1
    name = ""

    def matrix(self) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class SqrtX(GateKind):
    name = "sqrt_x"

    def matrix(self):
        return _SQRT_X.copy()


@dataclass(frozen=True)
class SqrtY(GateKind):
    name = "sqrt_y"

    def matrix(self):
        return _SQRT_Y.copy()


@dataclass(frozen=True)
class SqrtW(GateKind):
    name = "sqrt_w"

    def matrix(self):
        return _SQRT_W.copy()


@dataclass(frozen=True)
class Rz(GateKind):
    phi: float
    name = "rz"

    def __post_init__(self):
        if not math.isfinite(self.phi):
            raise ValueError(f"Rz angle must be finite, got {self.phi!r}")

    def matrix(self):
        h = self.phi / 2
        return np.array([[np.exp(-1j * h), 0], [0, np.exp(1j * h)]], dtype=complex)


@dataclass(frozen=True)
class FSim(GateKind):
    theta: float
    phi: float
    arity = 2
    name = "fsim"

    def __post_init__(self):
        if not (math.isfinite(self.theta) and math.isfinite(self.phi)):
            raise ValueError(f"FSim angles must be finite, got {self.theta!r}, {self.phi!r}")

    def matrix(self):
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array(
            [
                [1, 0, 0, 0],
                [0, c, -1j * s, 0],
                [0, -1j * s, c, 0],
                [0, 0, 0, np.exp(-1j * self.phi)],
            ],
            dtype=complex,
        )


@dataclass(frozen=True)
class Unitary1Q(GateKind):
    """Arbitrary single-qubit unitary, stored as a nested tuple so it hashes."""

    entries: tuple
    name = "unitary"

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError(f"Unitary1Q needs a 2x2 matrix, got shape {m.shape}")
        if np.max(np.abs(m.conj().T @ m - np.eye(2))) > 1e-10:
            raise ValueError("Unitary1Q matrix is not unitary")

    @classmethod
    def from_matrix(cls, m) -> "Unitary1Q":
        m = np.asarray(m, dtype=complex)
        return cls(tuple(tuple(complex(v) for v in row) for row in m))

    def matrix(self):
        return np.array(self.entries, dtype=complex)


def gate_matrix(kind: GateKind) -> np.ndarray:
    """Return the 2x2 or 4x4 unitary of ``kind`` in the computational basis."""
    return kind.matrix()


@dataclass(frozen=True)
class GateOp:
    kind: GateKind
    qubits: tuple[int, ...]

    def __post_init__(self):
        qubits = tuple(int(q) for q in self.qubits)
        object.__setattr__(self, "qubits", qubits)
        if len(qubits) != self.kind.arity:
            raise ValueError(
                f"{self.kind.name} acts on {self.kind.arity} qubit(s), got {len(qubits)}"
            )
        if len(set(qubits)) != len(qubits):
            raise ValueError(f"repeated qubit in {qubits}")
        if any(q < 0 for q in qubits):
            raise ValueError(f"negative qubit index in {qubits}")


@dataclass(frozen=True)
class Circuit:
    """``n_qubits`` plus an ordered tuple of moments, each a tuple of GateOps.

    ``measured`` lists qubits named by ``measure`` statements. The engine
    ignores it; sampling always measures every qubit.
    """

    n_qubits: int
    moments: tuple[tuple[GateOp, ...], ...] = ()
    measured: tuple[int, ...] = field(default=(), compare=True)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("a circuit needs at least one qubit")
        moments = tuple(tuple(m) for m in self.moments)
        object.__setattr__(self, "moments", moments)
        object.__setattr__(self, "measured", tuple(self.measured))
        for i, moment in enumerate(moments):
            seen: set[int] = set()
            for op in moment:
                for q in op.qubits:
                    if q >= self.n_qubits:
                        raise ValueError(
                            f"qubit {q} out of range for {self.n_qubits}-qubit circuit"
                        )
                    if q in seen:
                        raise ValueError(f"qubit {q} used twice in moment {i}")
                    seen.add(q)

    def all_operations(self):
        for moment in self.moments:
            yield from moment

    @property
    def n_ops(self) -> int:
        return sum(len(m) for m in self.moments)


def circuit_stats(circuit: Circuit) -> dict:
    counts = Counter(op.kind.name for op in circuit.all_operations())
    kinds = ("sqrt_x", "sqrt_y", "sqrt_w", "rz", "fsim", "unitary")
    return {
        "n_qubits": circuit.n_qubits,
        "n_moments": len(circuit.moments),
        "n_ops": circuit.n_ops,
        "gate_counts": {k: counts.get(k, 0) for k in kinds},
    }


# --- pattern and coupler classes -------------------------------------------

PATTERN_LETTERS = "ABCDEFGH"
# E..H reuse the A..D geometry under distinct labels.
_LETTER_GEOMETRY = {
    "A": ("h", 0), "B": ("h", 1), "C": ("v", 0), "D": ("v", 1),
    "E": ("v", 0), "F": ("v", 1), "G": ("h", 0), "H": ("h", 1),
}


@dataclass(frozen=True)
class PatternSpec:
    letters: str
    rows: int
    cols: int

    def __post_init__(self):
        if not self.letters:
            raise ValueError("pattern must be non-empty")
        bad = sorted(set(self.letters) - set(PATTERN_LETTERS))
        if bad:
            raise ValueError(f"pattern letters must be in A..H, got {''.join(bad)!r}")
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid dimensions must be positive")


def coupler_pairs(letter: str, rows: int, cols: int) -> list[tuple[int, int]]:
    """Qubit pairs activated by one coupler class on a ``rows x cols`` grid.

    Qubit ``(r, c)`` has index ``r * cols + c``. Horizontal classes pair
    ``(r, c)-(r, c+1)`` for ``c`` of the given parity; vertical classes pair
    ``(r, c)-(r+1, c)`` for ``r`` of the given parity. May be empty.
    """
    try:
        axis, parity = _LETTER_GEOMETRY[letter]
    except KeyError:
        raise ValueError(f"unknown coupler class {letter!r}") from None
    pairs = []
    if axis == "h":
        for r in range(rows):
            for c in range(parity, cols - 1, 2):
                pairs.append((r * cols + c, r * cols + c + 1))
    else:
        for r in range(parity, rows - 1, 2):
            for c in range(cols):
                pairs.append((r * cols + c, (r + 1) * cols + c))
    return pairs


SINGLE_QUBIT_CYCLE = (SqrtX(), SqrtY(), SqrtW())


def generator_rng(seed: int) -> np.random.Generator:
    """Counter-based stream used by :func:`generate_rcs_circuit`."""
    return np.random.Generator(np.random.Philox(key=int(seed) % (1 << 64)))


def generate_rcs_circuit(rows: int, cols: int, cycles: int, pattern, seed: int,
                         theta: float = SYCAMORE_THETA, phi: float = SYCAMORE_PHI) -> Circuit:
    """Random Sycamore-style circuit on a ``rows x cols`` grid.

    Every cycle contributes two moments: one single-qubit gate per qubit,
    then fSim on the coupler class ``pattern[cycle % len(pattern)]``.

    Stream order per cycle: one integer draw per qubit, ascending index. The
    first cycle draws from ``[0, 3)`` into ``(SqrtX, SqrtY, SqrtW)``; later
    cycles draw ``k`` from ``[0, 2)`` and pick ``(prev + 1 + k) % 3`` so a qubit
    never repeats its previous gate.
    """
    if isinstance(pattern, str):
        pattern = PatternSpec(pattern, rows, cols)
    if rows * cols < 2:
        raise ValueError("grid needs at least two qubits")
    if cycles < 1:
        raise ValueError("cycles must be >= 1")
    n = rows * cols
    rng = generator_rng(seed)
    fsim = FSim(theta, phi)
    moments = []
    prev = None
    for cycle in range(cycles):
        if prev is None:
            choice = rng.integers(0, 3, size=n)
        else:
            choice = (prev + 1 + rng.integers(0, 2, size=n)) % 3
        prev = choice
        moments.append(tuple(GateOp(SINGLE_QUBIT_CYCLE[k], (q,)) for q, k in enumerate(choice)))
        letter = pattern.letters[cycle % len(pattern.letters)]
        moments.append(tuple(GateOp(fsim, pair) for pair in coupler_pairs(letter, rows, cols)))
    return Circuit(n, tuple(moments))

"""Reader and writer for the OpenQASM 2.0 subset used by Sycamore-class circuits.

Accepted statements::

    OPENQASM 2.0;
    include "qelib1.inc";             (ignored)
    qreg q[N];                         (exactly one)
    creg c[N];                         (optional)
    x_1_2 q[i];   sx q[i];             sqrt(X)
    y_1_2 q[i];   sy q[i];             sqrt(Y)
    hz_1_2 q[i];  sw q[i];             sqrt(W)
    rz(expr) q[i];
    fsim(expr, expr) q[i], q[j];
    barrier ...;                       ends the current moment
    measure q[i] -> c[j];              recorded, not simulated

Without barriers, moments are packed greedily: a gate touching a qubit already
used in the current moment opens a new one. Angle expressions accept decimal
literals, ``pi``, unary minus, ``+ - * /`` and parentheses.
"""
from __future__ import annotations

import math
import re

from .circuit import Circuit, FSim, GateOp, Rz, SqrtW, SqrtX, SqrtY

SINGLE_QUBIT_ALIASES = {
    "x_1_2": SqrtX, "sx": SqrtX,
    "y_1_2": SqrtY, "sy": SqrtY,
    "hz_1_2": SqrtW, "sw": SqrtW,
}
_CANONICAL_NAME = {"sqrt_x": "x_1_2", "sqrt_y": "y_1_2", "sqrt_w": "hz_1_2"}


class QasmError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<string>"[^"\n]*")
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<arrow>->)
  | (?P<sym>[;,\[\]()+\-*/])
    """,
    re.VERBOSE,
)


class _Tok:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind, self.text, self.line, self.col = kind, text, line, col


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise QasmError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, chunk, line, pos - line_start + 1))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.qreg: tuple[str, int] | None = None
        self.cregs: dict[str, int] = {}

    # token helpers
    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        return QasmError(msg, tok.line, tok.col)

    def expect(self, text=None, kind=None) -> _Tok:
        tok = self.next()
        if (text is not None and tok.text != text) or (kind is not None and tok.kind != kind):
            want = repr(text) if text is not None else kind
            got = tok.text or "end of input"
            raise self.error(f"expected {want}, got {got!r}", tok)
        return tok

    # grammar
    def parse(self) -> Circuit:
        self.expect("OPENQASM")
        ver = self.expect(kind="number")
        if not ver.text.startswith("2"):
            raise self.error(f"unsupported OpenQASM version {ver.text}", ver)
        self.expect(";")

        moments: list[tuple[GateOp, ...]] = []
        current: list[GateOp] = []
        used: set[int] = set()
        measured: list[int] = []

        while self.peek().kind != "eof":
            tok = self.next()
            if tok.kind != "ident":
                raise self.error(f"expected a statement, got {tok.text!r}", tok)
            word = tok.text
            if word == "include":
                self.expect(kind="string")
                self.expect(";")
            elif word == "qreg":
                if self.qreg is not None:
                    raise self.error("only one qreg is supported", tok)
                name, size = self.declaration()
                if size < 1:
                    raise self.error("qreg size must be positive", tok)
                self.qreg = (name, size)
            elif word == "creg":
                name, size = self.declaration()
                self.cregs[name] = size
            elif word == "barrier":
                self.require_qreg(tok)
                while self.peek().text != ";":
                    if self.peek().kind == "eof":
                        raise self.error("unterminated barrier")
                    self.next()
                self.expect(";")
                moments.append(tuple(current))
                current, used = [], set()
            elif word == "measure":
                self.require_qreg(tok)
                q = self.qubit_ref()
                self.expect("->")
                self.creg_ref()
                self.expect(";")
                measured.append(q)
            else:
                op = self.gate_call(tok)
                if used.intersection(op.qubits):
                    moments.append(tuple(current))
                    current, used = [], set()
                current.append(op)
                used.update(op.qubits)
        if current:
            moments.append(tuple(current))
        if self.qreg is None:
            raise self.error("missing qreg declaration")
        return Circuit(self.qreg[1], tuple(moments), tuple(measured))

    def require_qreg(self, tok):
        if self.qreg is None:
            raise self.error("qreg must be declared before use", tok)

    def index(self) -> tuple[int, _Tok]:
        self.expect("[")
        tok = self.expect(kind="number")
        if not tok.text.isdigit():
            raise self.error(f"index must be a non-negative integer, got {tok.text!r}", tok)
        self.expect("]")
        return int(tok.text), tok

    def declaration(self) -> tuple[str, int]:
        name = self.expect(kind="ident").text
        size, _ = self.index()
        self.expect(";")
        return name, size

    def qubit_ref(self) -> int:
        tok = self.expect(kind="ident")
        name, size = self.qreg
        if tok.text != name:
            raise self.error(f"unknown quantum register {tok.text!r}", tok)
        idx, idx_tok = self.index()
        if idx >= size:
            raise self.error(f"qubit index {idx} out of range for {name}[{size}]", idx_tok)
        return idx

    def creg_ref(self):
        tok = self.expect(kind="ident")
        if tok.text not in self.cregs:
            raise self.error(f"unknown classical register {tok.text!r}", tok)
        idx, idx_tok = self.index()
        if idx >= self.cregs[tok.text]:
            raise self.error("classical bit index out of range", idx_tok)

    def gate_call(self, tok: _Tok) -> GateOp:
        name = tok.text
        if name not in SINGLE_QUBIT_ALIASES and name not in ("rz", "fsim"):
            raise self.error(f"unknown gate {name!r}", tok)
        self.require_qreg(tok)
        params: list[float] = []
        if self.peek().text == "(":
            self.next()
            params.append(self.expr())
            while self.peek().text == ",":
                self.next()
                params.append(self.expr())
            self.expect(")")
        qubits = [self.qubit_ref()]
        while self.peek().text == ",":
            self.next()
            qubits.append(self.qubit_ref())
        self.expect(";")

        if name in SINGLE_QUBIT_ALIASES:
            kind, n_params, n_qubits = SINGLE_QUBIT_ALIASES[name](), 0, 1
        elif name == "rz":
            n_params, n_qubits = 1, 1
        else:
            n_params, n_qubits = 2, 2
        if len(params) != n_params:
            raise self.error(f"{name} takes {n_params} parameter(s), got {len(params)}", tok)
        if len(qubits) != n_qubits:
            raise self.error(f"{name} acts on {n_qubits} qubit(s), got {len(qubits)}", tok)
        if len(set(qubits)) != len(qubits):
            raise self.error(f"{name} applied to repeated qubit", tok)
        if name == "rz":
            kind = Rz(params[0])
        elif name == "fsim":
            kind = FSim(params[0], params[1])
        return GateOp(kind, tuple(qubits))

    # expr := term (('+'|'-') term)*
    def expr(self) -> float:
        value = self.term()
        while self.peek().text in ("+", "-"):
            op = self.next().text
            rhs = self.term()
            value = value + rhs if op == "+" else value - rhs
        return value

    def term(self) -> float:
        value = self.unary()
        while self.peek().text in ("*", "/"):
            op = self.next()
            rhs = self.unary()
            if op.text == "*":
                value *= rhs
            else:
                if rhs == 0:
                    raise self.error("division by zero", op)
                value /= rhs
        return value

    def unary(self) -> float:
        if self.peek().text == "-":
            self.next()
            return -self.unary()
        if self.peek().text == "+":
            self.next()
            return self.unary()
        tok = self.next()
        if tok.kind == "number":
            return float(tok.text)
        if tok.text == "pi":
            return math.pi
        if tok.text == "(":
            value = self.expr()
            self.expect(")")
            return value
        raise self.error(f"bad angle expression at {tok.text!r}", tok)


def parse_qasm(text: str) -> Circuit:
    return _Parser(text).parse()


def emit_qasm(circuit: Circuit, register: str = "q") -> str:
    """Canonical text for ``circuit``: every moment is closed by a barrier."""
    n = circuit.n_qubits
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg {register}[{n}];"]
    if circuit.measured:
        lines.append(f"creg c[{len(circuit.measured)}];")
    for moment in circuit.moments:
        for op in moment:
            args = ", ".join(f"{register}[{q}]" for q in op.qubits)
            kind = op.kind
            if kind.name in _CANONICAL_NAME:
                lines.append(f"{_CANONICAL_NAME[kind.name]} {args};")
            elif kind.name == "rz":
                lines.append(f"rz({kind.phi!r}) {args};")
            elif kind.name == "fsim":
                lines.append(f"fsim({kind.theta!r}, {kind.phi!r}) {args};")
            else:
                raise ValueError(f"gate {kind.name!r} has no QASM spelling")
        lines.append(f"barrier {register};")
    for i, q in enumerate(circuit.measured):
        lines.append(f"measure {register}[{q}] -> c[{i}];")
    return "\n".join(lines) + "\n"

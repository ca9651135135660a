"""Compare the compiled and NumPy kernel backends.

    python benchmarks/bench_kernels.py [--qubits 20] [--repeat 5] [--json]
"""
import argparse
import json
import time

import numpy as np

from rcspipe import kernels
from rcspipe.circuit import FSim, SqrtW, generate_rcs_circuit


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(impl, n, repeat):
    rng = np.random.default_rng(0)
    amps = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    amps /= np.linalg.norm(amps)
    m1 = SqrtW().matrix()
    m2 = FSim(np.pi / 2, np.pi / 6).matrix()
    circuit = generate_rcs_circuit(4, n // 4, 4, "ABCDCDAB", 1) if n % 4 == 0 else None

    def all_1q():
        for q in range(n):
            impl.apply_1q(amps, q, m1)

    def all_2q():
        for q in range(n - 1):
            impl.apply_2q(amps, q, q + 1, m2)

    def circuit_run():
        a = np.zeros(1 << n, dtype=complex)
        a[0] = 1
        for op in circuit.all_operations():
            if len(op.qubits) == 1:
                impl.apply_1q(a, op.qubits[0], op.kind.matrix())
            else:
                impl.apply_2q(a, op.qubits[0], op.qubits[1], op.kind.matrix())

    probs = np.abs(amps) ** 2
    probs /= probs.sum()
    uniforms = rng.random(25_000)

    out = {
        f"1q gate x{n}": _best(all_1q, repeat),
        f"2q gate x{n - 1}": _best(all_2q, repeat),
        "cdf build": _best(lambda: impl.cumulative(probs), repeat),
        "25k cdf searches": _best(lambda: impl.search_cdf(impl.cumulative(probs), uniforms), repeat),
    }
    if circuit is not None:
        out[f"4-cycle circuit ({circuit.n_ops} ops)"] = _best(circuit_run, max(1, repeat // 2))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--qubits", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args()

    results = {name: bench(impl, args.qubits, args.repeat)
               for name, impl in kernels.available_backends().items()}
    if args.json:
        print(json.dumps(results, indent=2))
        return
    names = list(results)
    rows = list(results[names[0]])
    print(f"n = {args.qubits}, best of {args.repeat}, seconds")
    print(f"{'kernel':<28}" + "".join(f"{b:>12}" for b in names)
          + ("   speedup" if len(names) == 2 else ""))
    for row in rows:
        vals = [results[b][row] for b in names]
        line = f"{row:<28}" + "".join(f"{v:>12.5f}" for v in vals)
        if len(vals) == 2:
            line += f"{vals[0] / vals[1]:>9.2f}x"
        print(line)


if __name__ == "__main__":
    main()

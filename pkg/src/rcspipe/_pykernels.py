"""NumPy implementations of the hot kernels; used when the compiled module is absent.

All kernels mutate ``amps`` (contiguous complex128, length 2**n) in place.
"""
import numpy as np


def apply_1q(amps, qubit, m):
    view = amps.reshape(-1, 2, 1 << qubit)
    a0 = view[:, 0, :].copy()
    a1 = view[:, 1, :]
    view[:, 0, :] = m[0, 0] * a0 + m[0, 1] * a1
    view[:, 1, :] = m[1, 0] * a0 + m[1, 1] * a1


def apply_2q(amps, q0, q1, m):
    lo, hi = (q0, q1) if q0 < q1 else (q1, q0)
    view = amps.reshape(-1, 2, 1 << (hi - lo - 1), 2, 1 << lo)
    # blocks[k] holds the amplitudes whose local index b(q0) + 2*b(q1) is k
    blocks = []
    for k in range(4):
        b0, b1 = k & 1, k >> 1
        b_lo, b_hi = (b0, b1) if q0 < q1 else (b1, b0)
        blocks.append(view[:, b_hi, :, b_lo, :])
    old = [b.copy() for b in blocks]
    for r in range(4):
        row = m[r]
        blocks[r][...] = row[0] * old[0] + row[1] * old[1] + row[2] * old[2] + row[3] * old[3]


def cumulative(probs):
    return np.cumsum(probs)


def search_cdf(cdf, uniforms):
    """Index of the first cdf entry strictly above ``u * cdf[-1]`` for each u."""
    targets = uniforms * cdf[-1]
    idx = np.searchsorted(cdf, targets, side="right")
    # u * total can round up to total; fall back to the last outcome with mass
    last = np.searchsorted(cdf, cdf[-1], side="left")
    return np.minimum(idx, last).astype(np.int64)

"""Desk-scale random circuit sampling pipeline.

State construction, snapshot persistence, sharded sampling workers and
XEB/telemetry analysis, with local and SLURM orchestration.
"""
from .circuit import (Circuit, FSim, GateKind, GateOp, PatternSpec, Rz, SqrtW, SqrtX, SqrtY,
                      Unitary1Q, circuit_stats, coupler_pairs, gate_matrix, generate_rcs_circuit)
from .engine import (Bitstring, StateTooLarge, StateVector, apply_gate, build_state,
                     ideal_probability, probability_table)
from .kernels import BACKEND
from .qasm import QasmError, emit_qasm, parse_qasm
from .snapshot import SnapshotError, load_snapshot, save_snapshot, snapshot_info
from .worker import (JobResult, SamplerConfig, mix_seed, read_result, run_worker,
                     sample_bitstrings, shard_shots)

__version__ = "0.1.0"

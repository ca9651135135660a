"""One sampling job: reload the snapshot, draw a seeded shard of shots, write a result file.

Result files are JSON lines. Line 1 is the header::

    {"type": "header", "schema_version": 1, "job_id": ..., "seed": ...,
     "n_qubits": ..., "shots": ..., "snapshot_digest": "...",
     "timings": {"queue_s": ..., "load_s": ..., "sample_s": ..., "total_s": ...},
     "queue_source": "...", "scheduler_job_id": ...}

followed by one ``{"bitstring": "0110", "count": 3, "p_ideal": 0.0123}`` line
per distinct sampled bitstring, in ascending basis-index order. Bitstrings are
big-endian text with qubit 0 rightmost.
"""
from __future__ import annotations

import json
import os
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .engine import StateVector, probability_table
from .snapshot import load_snapshot, read_header

SCHEMA_VERSION = 1
SAMPLE_NORM_TOLERANCE = 1e-6
_MASK64 = (1 << 64) - 1


class OutputCollision(FileExistsError):
    pass


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def mix_seed(base_seed: int, job_id: int) -> int:
    """Per-job 64-bit seed: ``splitmix64(splitmix64(base) ^ job_id)`` (mod 2**64 inputs)."""
    return _splitmix64(_splitmix64(base_seed & _MASK64) ^ (job_id & _MASK64))


def sampling_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed & _MASK64))


def shard_shots(total: int, n_jobs: int) -> list[int]:
    if n_jobs < 1:
        raise ValueError("n_jobs must be >= 1")
    if total < 0:
        raise ValueError("total shots must be >= 0")
    base, extra = divmod(total, n_jobs)
    return [base + 1 if i < extra else base for i in range(n_jobs)]


def sample_indices(probs: np.ndarray, shots: int, seed: int) -> np.ndarray:
    """Basis indices of ``shots`` inverse-CDF draws from ``probs``."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    cdf = kernels.cumulative(np.ascontiguousarray(probs, dtype=np.float64))
    if abs(cdf[-1] - 1.0) > SAMPLE_NORM_TOLERANCE:
        raise ValueError(f"refusing to sample: total probability is {cdf[-1]!r}")
    uniforms = sampling_rng(seed).random(shots)
    return kernels.search_cdf(cdf, uniforms)


def _format_bits(index: int, n: int) -> str:
    return format(index, f"0{n}b")


def sample_bitstrings(state: StateVector, shots: int, seed: int) -> dict[str, int]:
    idx = sample_indices(probability_table(state), shots, seed)
    values, counts = np.unique(idx, return_counts=True)
    n = state.n_qubits
    return {_format_bits(int(v), n): int(c) for v, c in zip(values, counts)}


@dataclass
class SamplerConfig:
    snapshot_path: str
    shots: int
    base_seed: int
    job_id: int
    output_dir: str
    queue_s: float | None = None
    queue_source: str = "local-default"
    scheduler_job_id: str | None = None

    def __post_init__(self):
        if self.shots < 1:
            raise ValueError("shots must be >= 1")


@dataclass
class JobResult:
    job_id: int
    seed_used: int
    n_qubits: int
    shots: int
    counts: dict[str, int]
    p_ideal: dict[str, float]
    timings: dict[str, float]
    snapshot_digest: str
    queue_source: str = "local-default"
    scheduler_job_id: str | None = None
    path: str | None = field(default=None, compare=False)

    def header(self) -> dict:
        return {
            "type": "header",
            "schema_version": SCHEMA_VERSION,
            "job_id": self.job_id,
            "seed": self.seed_used,
            "n_qubits": self.n_qubits,
            "shots": self.shots,
            "snapshot_digest": self.snapshot_digest,
            "timings": self.timings,
            "queue_source": self.queue_source,
            "scheduler_job_id": self.scheduler_job_id,
        }

    def to_jsonl(self) -> str:
        lines = [json.dumps(self.header())]
        for bits in sorted(self.counts, key=lambda b: int(b, 2)):
            lines.append(json.dumps(
                {"bitstring": bits, "count": self.counts[bits], "p_ideal": self.p_ideal[bits]}
            ))
        return "\n".join(lines) + "\n"


def result_filename(job_id: int) -> str:
    return f"result_{job_id}.jsonl"


def _write_exclusive(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".result-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        try:
            os.link(tmp, path)
        except FileExistsError:
            raise OutputCollision(f"{path} already exists; jobs never overwrite results") from None
    finally:
        os.unlink(tmp)


def run_worker(config: SamplerConfig) -> JobResult:
    started = time.perf_counter()
    out_path = os.path.join(config.output_dir, result_filename(config.job_id))
    if os.path.exists(out_path):
        raise OutputCollision(f"{out_path} already exists; jobs never overwrite results")
    digest = read_header(config.snapshot_path).digest_hex
    state = load_snapshot(config.snapshot_path)
    loaded = time.perf_counter()

    seed = mix_seed(config.base_seed, config.job_id)
    probs = probability_table(state)
    idx = sample_indices(probs, config.shots, seed)
    values, occurrences = np.unique(idx, return_counts=True)
    n = state.n_qubits
    counts, p_ideal = {}, {}
    for v, c in zip(values.tolist(), occurrences.tolist()):
        bits = _format_bits(v, n)
        counts[bits] = c
        p_ideal[bits] = float(probs[v])
    sampled = time.perf_counter()

    result = JobResult(
        job_id=config.job_id,
        seed_used=seed,
        n_qubits=n,
        shots=config.shots,
        counts=counts,
        p_ideal=p_ideal,
        timings={
            "queue_s": float(config.queue_s or 0.0),
            "load_s": loaded - started,
            "sample_s": sampled - loaded,
            "total_s": time.perf_counter() - started,
        },
        snapshot_digest=digest,
        queue_source=config.queue_source if config.queue_s is not None else "local-default",
        scheduler_job_id=config.scheduler_job_id,
        path=out_path,
    )
    os.makedirs(config.output_dir, exist_ok=True)
    _write_exclusive(out_path, result.to_jsonl())
    return result


class ResultFormatError(ValueError):
    pass


def read_result(path) -> JobResult:
    path = os.fspath(path)
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise ResultFormatError(f"{path}: empty result file")
    try:
        header = json.loads(lines[0])
        records = [json.loads(ln) for ln in lines[1:]]
    except json.JSONDecodeError as exc:
        raise ResultFormatError(f"{path}: {exc}") from None
    if header.get("type") != "header" or header.get("schema_version") != SCHEMA_VERSION:
        raise ResultFormatError(f"{path}: missing or unsupported header")
    counts, p_ideal = {}, {}
    try:
        for rec in records:
            bits = rec["bitstring"]
            counts[bits] = int(rec["count"])
            p_ideal[bits] = float(rec["p_ideal"])
        result = JobResult(
            job_id=int(header["job_id"]),
            seed_used=int(header["seed"]),
            n_qubits=int(header["n_qubits"]),
            shots=int(header["shots"]),
            counts=counts,
            p_ideal=p_ideal,
            timings={k: float(v) for k, v in header["timings"].items()},
            snapshot_digest=header["snapshot_digest"],
            queue_source=header.get("queue_source", "local-default"),
            scheduler_job_id=header.get("scheduler_job_id"),
            path=path,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ResultFormatError(f"{path}: bad field ({exc})") from None
    if sum(counts.values()) != result.shots:
        raise ResultFormatError(f"{path}: counts sum to {sum(counts.values())}, header says {result.shots}")
    if any(not 0.0 <= p <= 1.0 for p in p_ideal.values()):
        raise ResultFormatError(f"{path}: p_ideal outside [0, 1]")
    return result


def resolve_job_id(explicit: int | None, environ=os.environ) -> int:
    """Explicit id wins, then the array task index, then the scheduler job id."""
    if explicit is not None:
        return explicit
    for var in ("SLURM_ARRAY_TASK_ID", "SLURM_JOB_ID"):
        if environ.get(var):
            return int(environ[var])
    raise ValueError("no --job-id given and no SLURM_ARRAY_TASK_ID/SLURM_JOB_ID in environment")


def queue_from_environment(environ=os.environ, now: float | None = None):
    """Queue wait from the submit timestamp exported by the emitted submit script.

    Returns ``(seconds, source)`` or ``(None, "local-default")``.
    """
    submitted = environ.get("RCS_SUBMIT_EPOCH")
    if not submitted:
        return None, "local-default"
    now = time.time() if now is None else now
    return max(0.0, now - float(submitted)), "submit-epoch"

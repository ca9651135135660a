"""Merging job results, linear XEB, timing summaries and runtime scaling models."""
from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from .worker import JobResult, ResultFormatError, read_result

log = logging.getLogger(__name__)

P_IDEAL_TOLERANCE = 1e-12

# Named baselines, in seconds, for speedup ratios.
BASELINES = {
    "google-classical-estimate": 3.1536e11,  # 10,000 years of 365 days
    "prior-cpu-only": 2.16e5,  # 2.5 days
}

QUEUE_CAVEAT = "queue wait excluded; add observed scheduler queue time separately"


class AggregationError(ValueError):
    pass


@dataclass
class MergedSample:
    n_qubits: int
    total_shots: int
    counts: dict[str, int]
    p_ideal: dict[str, float]
    job_ids: list[int]
    partial: bool = False
    missing_job_ids: list[int] = field(default_factory=list)
    snapshot_digest: str = ""


def _as_result(item) -> JobResult:
    return item if isinstance(item, JobResult) else read_result(item)


def load_results(result_files: Iterable, lenient: bool = False) -> list[JobResult]:
    results = []
    for item in result_files:
        try:
            results.append(_as_result(item))
        except (ResultFormatError, OSError) as exc:
            if not lenient:
                raise
            log.warning("skipping unreadable result %s: %s", item, exc)
    return results


def aggregate(result_files: Iterable, expected_job_ids: Iterable[int] | None = None,
              lenient: bool = False) -> MergedSample:
    """Merge worker outputs (paths or JobResult objects) into one sample."""
    results = load_results(result_files, lenient=lenient)
    if not results:
        raise AggregationError("no readable result files")
    first = results[0]
    counts: dict[str, int] = {}
    p_ideal: dict[str, float] = {}
    seen: set[int] = set()
    for res in results:
        if res.job_id in seen:
            raise AggregationError(f"duplicate job_id {res.job_id}")
        seen.add(res.job_id)
        if res.snapshot_digest != first.snapshot_digest:
            raise AggregationError(
                f"job {res.job_id} sampled snapshot {res.snapshot_digest[:12]}, "
                f"job {first.job_id} sampled {first.snapshot_digest[:12]}"
            )
        if res.n_qubits != first.n_qubits:
            raise AggregationError(f"job {res.job_id} has {res.n_qubits} qubits, expected {first.n_qubits}")
        for bits, c in res.counts.items():
            p = res.p_ideal[bits]
            if bits in p_ideal and abs(p_ideal[bits] - p) > P_IDEAL_TOLERANCE:
                raise AggregationError(f"p_ideal for {bits} disagrees across jobs (snapshot mismatch)")
            p_ideal.setdefault(bits, p)
            counts[bits] = counts.get(bits, 0) + c
    job_ids = sorted(seen)
    missing = []
    if expected_job_ids is not None:
        missing = sorted(set(expected_job_ids) - seen)
    return MergedSample(
        n_qubits=first.n_qubits,
        total_shots=sum(counts.values()),
        counts=counts,
        p_ideal=p_ideal,
        job_ids=job_ids,
        partial=bool(missing),
        missing_job_ids=missing,
        snapshot_digest=first.snapshot_digest,
    )


@dataclass
class XebReport:
    n_qubits: int
    total_shots: int
    xeb: float
    std_error: float
    partial: bool = False
    probability_source: str = "worker"


def load_reference_amplitudes(path) -> dict[str, float]:
    """Read ``bitstring re im`` lines into ideal probabilities. ``#`` starts a comment."""
    probs = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'bitstring re im'")
            bits, re_, im = parts[0], float(parts[1]), float(parts[2])
            probs[bits] = re_ * re_ + im * im
    return probs


def xeb_score(merged: MergedSample, reference: dict[str, float] | None = None) -> XebReport:
    """Linear cross-entropy estimate ``2**n * mean(p_ideal(x)) - 1`` over all shots.

    ``std_error`` is ``2**n`` times the sample standard deviation of the
    per-shot ideal probabilities, divided by ``sqrt(shots)``.
    """
    shots = merged.total_shots
    if shots < 1:
        raise ValueError("cannot score an empty sample")
    table = merged.p_ideal if reference is None else reference
    s1 = s2 = 0.0
    for bits, c in merged.counts.items():
        try:
            p = table[bits]
        except KeyError:
            raise ValueError(f"no ideal probability for sampled bitstring {bits}") from None
        s1 += c * p
        s2 += c * p * p
    dim = 2.0 ** merged.n_qubits
    mean = s1 / shots
    var = max(0.0, (s2 - shots * mean * mean) / (shots - 1)) if shots > 1 else 0.0
    return XebReport(
        n_qubits=merged.n_qubits,
        total_shots=shots,
        xeb=dim * mean - 1.0,
        std_error=dim * math.sqrt(var) / math.sqrt(shots),
        partial=merged.partial,
        probability_source="worker" if reference is None else "reference",
    )


@dataclass
class PhaseStats:
    min: float
    max: float
    avg: float


@dataclass
class TimingSummary:
    state_calc: PhaseStats
    sampling: PhaseStats
    queue: PhaseStats | None = None
    n_jobs: int = 0

    def to_dict(self) -> dict:
        out = {"n_jobs": self.n_jobs, "state_calc": asdict(self.state_calc)}
        if self.queue is not None:
            out["queue"] = asdict(self.queue)
        out["sampling"] = asdict(self.sampling)
        return out

    def to_table(self) -> str:
        rows = [("State Calc", self.state_calc)]
        if self.queue is not None:
            rows.append(("Queue", self.queue))
        rows.append(("Sampling", self.sampling))
        lines = [f"{'Metric':<12}{'Min (sec)':>12}{'Max (sec)':>12}{'Avg (sec)':>12}"]
        for name, s in rows:
            lines.append(f"{name:<12}{s.min:>12,.0f}{s.max:>12,.0f}{s.avg:>12,.0f}")
        return "\n".join(lines)


def _stats(values: Sequence[float]) -> PhaseStats:
    return PhaseStats(min(values), max(values), sum(values) / len(values))


def timing_summary(result_files: Iterable, state_calc_s: float) -> TimingSummary:
    """Min/max/avg of per-job phases. Queue appears only when some job measured it."""
    results = [_as_result(r) for r in result_files]
    if not results:
        raise ValueError("timing_summary needs at least one result")
    sampling = [r.timings["sample_s"] for r in results]
    queue = [r.timings["queue_s"] for r in results if r.queue_source != "local-default"]
    return TimingSummary(
        state_calc=PhaseStats(state_calc_s, state_calc_s, state_calc_s),
        sampling=_stats(sampling),
        queue=_stats(queue) if queue else None,
        n_jobs=len(results),
    )


@dataclass
class ScalingModel:
    """``seconds = rate * shots + intercept`` for one sampling job."""

    rate: float
    intercept: float
    residual: float = 0.0
    r_squared: float = 1.0

    @classmethod
    def through_point(cls, shots: int, seconds: float) -> "ScalingModel":
        """Proportional model anchored on one observed job."""
        return cls(rate=seconds / shots, intercept=0.0)

    def predict(self, shots: float) -> float:
        return self.rate * shots + self.intercept


def fit_scaling(points: Iterable[tuple[float, float]]) -> ScalingModel:
    """Ordinary least squares over ``(shots_per_job, seconds)`` pairs."""
    pts = [(float(x), float(y)) for x, y in points]
    if len({x for x, _ in pts}) < 2:
        raise ValueError("need at least two distinct shot counts to fit a line")
    n = len(pts)
    mx = sum(x for x, _ in pts) / n
    my = sum(y for _, y in pts) / n
    sxx = sum((x - mx) ** 2 for x, _ in pts)
    sxy = sum((x - mx) * (y - my) for x, y in pts)
    rate = sxy / sxx
    intercept = my - rate * mx
    sse = sum((y - (rate * x + intercept)) ** 2 for x, y in pts)
    syy = sum((y - my) ** 2 for _, y in pts)
    return ScalingModel(
        rate=rate,
        intercept=intercept,
        residual=math.sqrt(sse / n),
        r_squared=1.0 - sse / syy if syy > 0 else 1.0,
    )


def estimate_runtime(model: ScalingModel, state_calc_s: float, total_shots: int, n_jobs: int) -> float:
    """State construction plus the slowest shard's predicted sampling time.

    Queue wait is not included; see :data:`QUEUE_CAVEAT`.
    """
    if n_jobs < 1:
        raise ValueError("n_jobs must be >= 1")
    shots_per_job = math.ceil(total_shots / n_jobs)
    return state_calc_s + model.predict(shots_per_job)


def extrapolate(model: ScalingModel, state_calc_s: float, total_shots: int,
                job_counts: Iterable[int]) -> list[dict]:
    return [
        {
            "n_jobs": n,
            "shots_per_job": math.ceil(total_shots / n),
            "estimated_s": estimate_runtime(model, state_calc_s, total_shots, n),
            "caveat": QUEUE_CAVEAT,
        }
        for n in job_counts
    ]


def speedup_report(total_s: float, baselines: dict[str, float] | None = None) -> dict[str, float]:
    if total_s <= 0:
        raise ValueError("total_s must be positive")
    baselines = BASELINES if baselines is None else baselines
    return {name: seconds / total_s for name, seconds in baselines.items()}


def write_json(path, payload) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)

"""Four-stage pipeline driver: local process fan-out or SLURM script emission.

Work directory layout::

    circuit.qasm          stage 1 input, canonical form
    state.rcss            stage 2 snapshot
    state_meta.json       stage 1+2 timings and digest
    results/result_<j>.jsonl
    logs/
    manifest.json         local runs only
    xeb_report.json, timing_summary.json, scaling_model.json
"""
from __future__ import annotations

import json
import logging
import os
import shlex
import subprocess
import sys
import time
from dataclasses import asdict, dataclass, field

from . import analysis
from .circuit import Circuit, generate_rcs_circuit
from .engine import DEFAULT_MAX_QUBITS, build_state
from .qasm import emit_qasm, parse_qasm
from .snapshot import save_snapshot
from .worker import read_result, result_filename, shard_shots

log = logging.getLogger(__name__)

SNAPSHOT_NAME = "state.rcss"
STATE_META_NAME = "state_meta.json"
MANIFEST_NAME = "manifest.json"
RESULTS_DIR = "results"
LOGS_DIR = "logs"


class PipelineError(RuntimeError):
    pass


@dataclass
class GeneratorParams:
    rows: int
    cols: int
    cycles: int
    pattern: str = "ABCDCDAB"
    seed: int = 0

    def cli_args(self) -> list[str]:
        return [
            "--rows", str(self.rows), "--cols", str(self.cols), "--cycles", str(self.cycles),
            "--pattern", self.pattern, "--circuit-seed", str(self.seed),
        ]


@dataclass
class PipelineConfig:
    work_dir: str
    total_shots: int
    n_jobs: int
    base_seed: int = 0
    qasm_path: str | None = None
    generator: GeneratorParams | None = None
    mode: str = "local"
    cpus_per_task: int = 8
    mem: str = "16G"
    state_gres: str | None = None
    max_procs: int | None = None
    max_qubits: int = DEFAULT_MAX_QUBITS
    worker_cmd: list[str] | None = None
    python: str = "python3"

    def __post_init__(self):
        if self.n_jobs < 1 or self.total_shots < self.n_jobs:
            raise ValueError(f"need total_shots >= n_jobs >= 1, got {self.total_shots}, {self.n_jobs}")
        if (self.qasm_path is None) == (self.generator is None):
            raise ValueError("give exactly one circuit source: qasm_path or generator")
        if self.mode not in ("local", "slurm-emit"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if isinstance(self.generator, dict):
            self.generator = GeneratorParams(**self.generator)

    def echo(self) -> dict:
        out = asdict(self)
        out.pop("worker_cmd")
        return out


def load_circuit(qasm_path: str | None = None, generator: GeneratorParams | None = None) -> Circuit:
    if qasm_path is not None:
        with open(qasm_path, encoding="utf-8") as fh:
            return parse_qasm(fh.read())
    g = generator
    return generate_rcs_circuit(g.rows, g.cols, g.cycles, g.pattern, g.seed)


def construct_and_persist(circuit: Circuit, work_dir: str, max_qubits: int = DEFAULT_MAX_QUBITS) -> dict:
    """Stages 1 and 2. Writes the snapshot and ``state_meta.json``; returns the metadata."""
    os.makedirs(work_dir, exist_ok=True)
    with open(os.path.join(work_dir, "circuit.qasm"), "w", encoding="utf-8") as fh:
        fh.write(emit_qasm(circuit))
    t0 = time.time()
    state = build_state(circuit, max_qubits=max_qubits)
    t1 = time.time()
    snap = os.path.join(work_dir, SNAPSHOT_NAME)
    digest = save_snapshot(state, snap)
    t2 = time.time()
    meta = {
        "snapshot_path": snap,
        "snapshot_digest": digest,
        "n_qubits": circuit.n_qubits,
        "state_calc": {"start": t0, "end": t1},
        "persist": {"start": t1, "end": t2},
        "snapshot_ready": t2,
    }
    analysis.write_json(os.path.join(work_dir, STATE_META_NAME), meta)
    return meta


@dataclass
class RunManifest:
    work_dir: str
    snapshot_path: str = ""
    snapshot_digest: str = ""
    result_files: list[str] = field(default_factory=list)
    stages: dict[str, dict] = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    completed_jobs: list[int] = field(default_factory=list)
    failed_jobs: dict[int, int] = field(default_factory=dict)
    partial: bool = False
    error: str | None = None
    queue_provenance: str = "local-default: no scheduler queue, queue fields omitted"

    @property
    def path(self) -> str:
        return os.path.join(self.work_dir, MANIFEST_NAME)

    def save(self) -> None:
        payload = asdict(self)
        payload["failed_jobs"] = {str(k): v for k, v in self.failed_jobs.items()}
        analysis.write_json(self.path, payload)

    @classmethod
    def load(cls, path) -> "RunManifest":
        path = os.fspath(path)
        if os.path.isdir(path):
            path = os.path.join(path, MANIFEST_NAME)
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        payload["failed_jobs"] = {int(k): v for k, v in payload.get("failed_jobs", {}).items()}
        return cls(**payload)


def _worker_argv(config: PipelineConfig, snapshot: str, job_id: int, shots: int, out_dir: str) -> list[str]:
    base = config.worker_cmd or [sys.executable, "-m", "rcspipe"]
    return base + [
        "sample", "--snapshot", snapshot, "--shots", str(shots), "--seed", str(config.base_seed),
        "--job-id", str(job_id), "--output-dir", out_dir,
    ]


def _fan_out(config: PipelineConfig, snapshot: str, shards: list[int], out_dir: str,
             log_dir: str) -> dict[int, int]:
    """Run one worker process per shard, at most ``max_procs`` at once. Returns exit codes."""
    limit = config.max_procs or os.cpu_count() or 1
    pending = list(enumerate(shards))
    running: dict[int, tuple[subprocess.Popen, object]] = {}
    codes: dict[int, int] = {}
    while pending or running:
        while pending and len(running) < limit:
            job_id, shots = pending.pop(0)
            logf = open(os.path.join(log_dir, f"worker_{job_id}.log"), "wb")
            argv = _worker_argv(config, snapshot, job_id, shots, out_dir)
            proc = subprocess.Popen(argv, stdout=logf, stderr=subprocess.STDOUT)
            running[job_id] = (proc, logf)
        for job_id in list(running):
            proc, logf = running[job_id]
            rc = proc.poll()
            if rc is not None:
                logf.close()
                codes[job_id] = rc
                del running[job_id]
        if running:
            time.sleep(0.01)
    return codes


def run_local(config: PipelineConfig) -> RunManifest:
    work = os.path.abspath(config.work_dir)
    results_dir = os.path.join(work, RESULTS_DIR)
    log_dir = os.path.join(work, LOGS_DIR)
    os.makedirs(results_dir, exist_ok=True)
    os.makedirs(log_dir, exist_ok=True)
    manifest = RunManifest(
        work_dir=work,
        result_files=[os.path.join(results_dir, result_filename(j)) for j in range(config.n_jobs)],
        config=config.echo(),
    )

    try:
        circuit = load_circuit(config.qasm_path, config.generator)
        meta = construct_and_persist(circuit, work, config.max_qubits)
    except Exception as exc:
        manifest.error = f"state construction failed: {exc}"
        manifest.save()
        raise PipelineError(manifest.error) from exc
    manifest.snapshot_path = meta["snapshot_path"]
    manifest.snapshot_digest = meta["snapshot_digest"]
    manifest.stages["state_calc"] = meta["state_calc"]
    manifest.stages["persist"] = meta["persist"]
    manifest.save()

    shards = shard_shots(config.total_shots, config.n_jobs)
    t0 = time.time()
    codes = _fan_out(config, manifest.snapshot_path, shards, results_dir, log_dir)
    manifest.stages["sampling"] = {"start": t0, "end": time.time()}
    for job_id, path in enumerate(manifest.result_files):
        if codes.get(job_id) == 0 and os.path.exists(path):
            manifest.completed_jobs.append(job_id)
        else:
            manifest.failed_jobs[job_id] = codes.get(job_id, -1)
    manifest.partial = bool(manifest.failed_jobs)
    if manifest.failed_jobs:
        log.warning("shard(s) failed: %s", sorted(manifest.failed_jobs))
    manifest.save()

    if not manifest.completed_jobs:
        manifest.error = "every sampling shard failed; aggregation skipped"
        manifest.save()
        raise PipelineError(manifest.error)

    t0 = time.time()
    analyze_directory(work, expected_jobs=config.n_jobs)
    manifest.stages["aggregate"] = {"start": t0, "end": time.time()}
    manifest.save()
    return manifest


def analyze_directory(work_dir: str, expected_jobs: int | None = None, reference=None,
                      lenient: bool = False, results_dir: str | None = None,
                      state_calc_s: float | None = None) -> dict:
    """Stage 4 over a work directory. Writes the three report files and returns them."""
    results_dir = results_dir or os.path.join(work_dir, RESULTS_DIR)
    paths = sorted(
        os.path.join(results_dir, f) for f in os.listdir(results_dir)
        if f.startswith("result_") and f.endswith(".jsonl")
    )
    results = analysis.load_results(paths, lenient=lenient)
    expected = range(expected_jobs) if expected_jobs is not None else None
    merged = analysis.aggregate(results, expected_job_ids=expected)
    report = analysis.xeb_score(merged, reference=reference)

    if state_calc_s is None:
        meta_path = os.path.join(work_dir, STATE_META_NAME)
        state_calc_s = 0.0
        if os.path.exists(meta_path):
            with open(meta_path, encoding="utf-8") as fh:
                span = json.load(fh)["state_calc"]
            state_calc_s = span["end"] - span["start"]
    timing = analysis.timing_summary(results, state_calc_s)

    points = [(r.shots, r.timings["sample_s"]) for r in results]
    if len({x for x, _ in points}) >= 2:
        model = analysis.fit_scaling(points)
        method = "least-squares"
    else:
        shots = sum(x for x, _ in points)
        model = analysis.ScalingModel.through_point(shots, sum(y for _, y in points))
        method = "proportional"
    total = sum(r.shots for r in results)
    scaling = {
        "method": method,
        "model": asdict(model),
        "points": points,
        "extrapolation": analysis.extrapolate(
            model, state_calc_s, total, sorted({1, len(results), 10, 100, 1000})
        ),
    }

    xeb_payload = asdict(report) | {
        "job_ids": merged.job_ids,
        "missing_job_ids": merged.missing_job_ids,
        "snapshot_digest": merged.snapshot_digest,
    }
    analysis.write_json(os.path.join(work_dir, "xeb_report.json"), xeb_payload)
    analysis.write_json(os.path.join(work_dir, "timing_summary.json"), timing.to_dict())
    analysis.write_json(os.path.join(work_dir, "scaling_model.json"), scaling)
    return {"xeb": xeb_payload, "timing": timing.to_dict(), "scaling": scaling}


def stage_timings(manifest: RunManifest) -> dict:
    """Per-stage spans in seconds, plus per-job phases from whichever result files exist."""
    out: dict = {}
    starts, ends = [], []
    for stage, span in manifest.stages.items():
        out[f"{stage}_s"] = span["end"] - span["start"]
        starts.append(span["start"])
        ends.append(span["end"])
    if starts:
        out["total_s"] = max(ends) - min(starts)
    jobs = {}
    for path in manifest.result_files:
        if not os.path.exists(path):
            continue
        res = read_result(path)
        entry = {"load_s": res.timings["load_s"], "sample_s": res.timings["sample_s"],
                 "total_s": res.timings["total_s"]}
        if res.queue_source != "local-default":
            entry["queue_s"] = res.timings["queue_s"]
        jobs[res.job_id] = entry
    out["jobs"] = jobs
    return out


# --- SLURM emission ---------------------------------------------------------

def _sbatch_header(name: str, cpus: int, mem: str, output: str, extra=()) -> list[str]:
    lines = [
        "#!/bin/bash",
        f"#SBATCH --job-name={name}",
        "#SBATCH --nodes=1",
        "#SBATCH --ntasks=1",
        f"#SBATCH --cpus-per-task={cpus}",
        f"#SBATCH --mem={mem}",
        f"#SBATCH --output={output}",
    ]
    lines += [f"#SBATCH {e}" for e in extra]
    lines += ["", "set -euo pipefail", ""]
    return lines


def emit_slurm(config: PipelineConfig) -> list[str]:
    """Write the three sbatch scripts and ``submit.sh``; returns their paths.

    Dependencies are attached in ``submit.sh`` from captured job ids, since an
    ``#SBATCH`` line cannot refer to a job that has not been submitted yet.
    """
    work = os.path.abspath(config.work_dir)
    os.makedirs(os.path.join(work, LOGS_DIR), exist_ok=True)
    os.makedirs(os.path.join(work, RESULTS_DIR), exist_ok=True)
    q = shlex.quote
    py = f"{q(config.python)} -m rcspipe"
    logs = os.path.join(work, LOGS_DIR)
    if config.qasm_path is not None:
        source = ["--qasm", os.path.abspath(config.qasm_path)]
    else:
        source = config.generator.cli_args()
    n = config.n_jobs

    state_extra = [f"--gres={config.state_gres}"] if config.state_gres else []
    state = _sbatch_header("rcs-state", config.cpus_per_task, config.mem,
                           f"{logs}/state_%j.out", state_extra)
    state.append(f"{py} build-state {' '.join(q(a) for a in source)} "
                 f"--max-qubits {config.max_qubits} --work-dir {q(work)}")

    sample = _sbatch_header("rcs-sample", config.cpus_per_task, config.mem,
                            f"{logs}/sample_%A_%a.out", [f"--array=0-{n - 1}"])
    sample.append(
        f"{py} sample --snapshot {q(os.path.join(work, SNAPSHOT_NAME))} "
        f"--total-shots {config.total_shots} --n-jobs {n} --seed {config.base_seed} "
        f'--job-id "${{SLURM_ARRAY_TASK_ID}}" --output-dir {q(os.path.join(work, RESULTS_DIR))} '
        f"--work-dir {q(work)}"
    )

    agg = _sbatch_header("rcs-aggregate", 1, "4G", f"{logs}/aggregate_%j.out")
    agg.append(f"{py} analyze --expected-jobs {n} --work-dir {q(work)}")

    submit = [
        "#!/bin/bash",
        "set -euo pipefail",
        'cd "$(dirname "$0")"',
        "",
        "state_id=$(sbatch --parsable 01_state.sbatch)",
        "sample_id=$(sbatch --parsable --dependency=afterok:${state_id} "
        "--export=ALL,RCS_SUBMIT_EPOCH=$(date +%s) 02_sample.sbatch)",
        "agg_id=$(sbatch --parsable --dependency=afterok:${sample_id} 03_aggregate.sbatch)",
        'echo "state=${state_id} sample=${sample_id} aggregate=${agg_id}"',
    ]

    scripts = {
        "01_state.sbatch": state, "02_sample.sbatch": sample,
        "03_aggregate.sbatch": agg, "submit.sh": submit,
    }
    paths = []
    for name, lines in scripts.items():
        path = os.path.join(work, name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        os.chmod(path, 0o755)
        paths.append(path)
    return paths

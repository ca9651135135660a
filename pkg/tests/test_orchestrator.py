import json
import os
import re
import sys
import time

import pytest

from rcspipe import orchestrator
from rcspipe.orchestrator import (GeneratorParams, PipelineConfig, PipelineError, RunManifest,
                                  emit_slurm, run_local, stage_timings)
from oracles import lint_slurm
from rcspipe.worker import read_result

GEN = GeneratorParams(rows=3, cols=4, cycles=6, pattern="ABCDCDAB", seed=3)

KILLER = """
import os, signal, sys
from rcspipe.cli import main
argv = sys.argv[1:]
if argv[argv.index("--job-id") + 1] == "{victim}":
    os.kill(os.getpid(), signal.SIGKILL)
sys.exit(main(argv))
"""


def _config(tmp_path, **kw):
    kw.setdefault("total_shots", 10_000)
    kw.setdefault("n_jobs", 4)
    return PipelineConfig(work_dir=str(tmp_path / "work"), base_seed=17, generator=GEN, **kw)


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        PipelineConfig(work_dir=str(tmp_path), total_shots=3, n_jobs=4, generator=GEN)
    with pytest.raises(ValueError):
        PipelineConfig(work_dir=str(tmp_path), total_shots=4, n_jobs=4)
    with pytest.raises(ValueError):
        PipelineConfig(work_dir=str(tmp_path), total_shots=4, n_jobs=4, generator=GEN, mode="cloud")


def test_run_local_bookkeeping(tmp_path):
    manifest = run_local(_config(tmp_path))
    assert len(manifest.result_files) == 4
    assert all(os.path.exists(p) for p in manifest.result_files)
    assert sum(read_result(p).shots for p in manifest.result_files) == 10_000
    assert not manifest.partial and manifest.completed_jobs == [0, 1, 2, 3]
    work = manifest.work_dir
    with open(os.path.join(work, "xeb_report.json")) as fh:
        xeb = json.load(fh)
    assert xeb["total_shots"] == 10_000 and not xeb["partial"]
    for name in ("timing_summary.json", "scaling_model.json", "manifest.json", "state.rcss"):
        assert os.path.exists(os.path.join(work, name))
    loaded = RunManifest.load(work)
    assert loaded.snapshot_digest == manifest.snapshot_digest
    assert loaded.stages.keys() == {"state_calc", "persist", "sampling", "aggregate"}


def test_stage_timings_of_local_run(tmp_path):
    manifest = run_local(_config(tmp_path, n_jobs=2, total_shots=1000))
    t = stage_timings(manifest)
    spans = sum(t[f"{s}_s"] for s in ("state_calc", "persist", "sampling", "aggregate"))
    assert abs(t["total_s"] - spans) <= 1.0
    assert set(t["jobs"]) == {0, 1}
    assert all("queue_s" not in j for j in t["jobs"].values())


def test_stage_timings_constructed_fixture(tmp_path):
    m = RunManifest(work_dir=str(tmp_path), stages={
        "state_calc": {"start": 100.0, "end": 848.0},
        "persist": {"start": 848.0, "end": 850.0},
        "sampling": {"start": 850.0, "end": 4600.0},
        "aggregate": {"start": 4600.0, "end": 4636.0},
    })
    t = stage_timings(m)
    assert t == {"state_calc_s": 748.0, "persist_s": 2.0, "sampling_s": 3750.0,
                 "aggregate_s": 36.0, "total_s": 4536.0, "jobs": {}}


def test_single_job_rerun_deterministic(tmp_path):
    reports = []
    for name in ("a", "b"):
        cfg = PipelineConfig(work_dir=str(tmp_path / name), total_shots=2000, n_jobs=1,
                             base_seed=4, generator=GEN)
        run_local(cfg)
        with open(tmp_path / name / "xeb_report.json") as fh:
            reports.append(json.load(fh))
    assert reports[0] == reports[1]


def test_killed_worker_gives_partial_report(tmp_path):
    wrapper = tmp_path / "killer.py"
    wrapper.write_text(KILLER.format(victim=2))
    cfg = _config(tmp_path, worker_cmd=[sys.executable, str(wrapper)])
    manifest = run_local(cfg)
    assert manifest.partial
    assert list(manifest.failed_jobs) == [2]
    assert manifest.completed_jobs == [0, 1, 3]
    with open(os.path.join(manifest.work_dir, "xeb_report.json")) as fh:
        xeb = json.load(fh)
    assert xeb["partial"] and xeb["missing_job_ids"] == [2]
    assert xeb["total_shots"] == 7_500
    saved = RunManifest.load(manifest.work_dir)
    assert saved.failed_jobs == manifest.failed_jobs


def test_all_workers_fail(tmp_path):
    wrapper = tmp_path / "fail.py"
    wrapper.write_text("import sys; sys.exit(5)\n")
    with pytest.raises(PipelineError, match="every sampling shard failed"):
        run_local(_config(tmp_path, n_jobs=2, worker_cmd=[sys.executable, str(wrapper)]))
    saved = RunManifest.load(tmp_path / "work")
    assert saved.failed_jobs == {0: 5, 1: 5}
    assert "sampling" in saved.stages and "aggregate" not in saved.stages


def test_stage1_failure_aborts(tmp_path):
    cfg = PipelineConfig(work_dir=str(tmp_path / "w"), total_shots=4, n_jobs=1, generator=GEN,
                         max_qubits=4)
    with pytest.raises(PipelineError, match="state construction"):
        run_local(cfg)
    assert not os.path.exists(tmp_path / "w" / "results" / "result_0.jsonl")


def test_workers_start_after_snapshot_ready(tmp_path, monkeypatch):
    real = orchestrator.build_state

    def slow(circuit, max_qubits):
        time.sleep(0.5)
        return real(circuit, max_qubits=max_qubits)

    monkeypatch.setattr(orchestrator, "build_state", slow)
    manifest = run_local(_config(tmp_path, n_jobs=2, total_shots=200))
    assert manifest.stages["sampling"]["start"] >= manifest.stages["persist"]["end"]
    assert manifest.stages["state_calc"]["end"] - manifest.stages["state_calc"]["start"] >= 0.5
    digests = {read_result(p).snapshot_digest for p in manifest.result_files}
    assert digests == {manifest.snapshot_digest}


def test_process_limit_respected(tmp_path):
    manifest = run_local(_config(tmp_path, n_jobs=3, total_shots=300, max_procs=1))
    assert manifest.completed_jobs == [0, 1, 2]


# --- SLURM emission ---------------------------------------------------------

REQUIRED_SAMPLE = [
    r"^#!/bin/bash$",
    r"^#SBATCH --array=0-99$",
    r"^#SBATCH --cpus-per-task=8$",
    r"^#SBATCH --mem=16G$",
    r"--job-id \"\$\{SLURM_ARRAY_TASK_ID\}\"",
]


def test_emit_slurm_hundred_jobs(tmp_path):
    cfg = PipelineConfig(work_dir=str(tmp_path / "w"), total_shots=2_500_000, n_jobs=100,
                         generator=GEN, mode="slurm-emit", cpus_per_task=8, mem="16G")
    paths = emit_slurm(cfg)
    assert [os.path.basename(p) for p in paths] == [
        "01_state.sbatch", "02_sample.sbatch", "03_aggregate.sbatch", "submit.sh"]
    assert lint_slurm(cfg.work_dir, 100, 8, "16G") == []
    sample = open(paths[1]).read()
    for pattern in REQUIRED_SAMPLE:
        assert re.search(pattern, sample, re.M), pattern
    assert "--total-shots 2500000 --n-jobs 100" in sample


def test_emit_slurm_single_task(tmp_path):
    cfg = PipelineConfig(work_dir=str(tmp_path / "w"), total_shots=10, n_jobs=1, generator=GEN,
                         mode="slurm-emit")
    emit_slurm(cfg)
    assert "#SBATCH --array=0-0" in open(tmp_path / "w" / "02_sample.sbatch").read()
    assert lint_slurm(cfg.work_dir, 1, 8, "16G") == []


def test_emit_slurm_idempotent(tmp_path):
    cfg = PipelineConfig(work_dir=str(tmp_path / "w"), total_shots=1000, n_jobs=10,
                         qasm_path=str(tmp_path / "c.qasm"), mode="slurm-emit", state_gres="gpu:1")
    first = {p: open(p).read() for p in emit_slurm(cfg)}
    second = {p: open(p).read() for p in emit_slurm(cfg)}
    assert first == second
    assert "#SBATCH --gres=gpu:1" in first[os.path.join(cfg.work_dir, "01_state.sbatch")]


def test_lint_oracle_catches_broken_script(tmp_path):
    cfg = PipelineConfig(work_dir=str(tmp_path / "w"), total_shots=1000, n_jobs=10, generator=GEN,
                         mode="slurm-emit")
    emit_slurm(cfg)
    path = tmp_path / "w" / "submit.sh"
    path.write_text(path.read_text().replace("afterok:${sample_id}", "afterany:${sample_id}"))
    assert lint_slurm(cfg.work_dir, 10, 8, "16G") == ["dependency chain is ['state_id']"]

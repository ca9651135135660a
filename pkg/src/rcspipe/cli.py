"""Command-line entry point: ``rcspipe <subcommand>`` or ``python -m rcspipe``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict

from . import analysis, orchestrator
from .circuit import circuit_stats, generate_rcs_circuit
from .engine import DEFAULT_MAX_QUBITS
from .qasm import emit_qasm
from .snapshot import snapshot_info
from .worker import (SamplerConfig, queue_from_environment, resolve_job_id, run_worker,
                     shard_shots)

EXIT_PARTIAL = 3


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--work-dir", default=".", help="pipeline working directory (default: .)")
    p.add_argument("--json", action="store_true", help="machine-readable output")


def _circuit_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--qasm", help="QASM circuit file")
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--cycles", type=int)
    p.add_argument("--pattern", default="ABCDCDAB")
    p.add_argument("--circuit-seed", type=int, default=0)


def _generator_from(args) -> orchestrator.GeneratorParams | None:
    if args.qasm:
        return None
    if None in (args.rows, args.cols, args.cycles):
        raise SystemExit("error: give --qasm or all of --rows --cols --cycles")
    return orchestrator.GeneratorParams(args.rows, args.cols, args.cycles, args.pattern, args.circuit_seed)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rcspipe", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a random Sycamore-style circuit as QASM")
    _common(p)
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--cycles", type=int, required=True)
    p.add_argument("--pattern", default="ABCDCDAB")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", help="output file (default: stdout)")

    p = sub.add_parser("build-state", help="construct the state and write the snapshot")
    _common(p)
    _circuit_source(p)
    p.add_argument("--max-qubits", type=int, default=DEFAULT_MAX_QUBITS)

    p = sub.add_parser("sample", help="run one sampling job against a snapshot")
    _common(p)
    p.add_argument("--snapshot", help="snapshot path (default: <work-dir>/state.rcss)")
    p.add_argument("--shots", type=int, help="shots for this job")
    p.add_argument("--total-shots", type=int, help="with --n-jobs, derive this job's shard")
    p.add_argument("--n-jobs", type=int)
    p.add_argument("--seed", type=int, default=0, help="base seed, mixed with the job id")
    p.add_argument("--job-id", type=int, help="default: $SLURM_ARRAY_TASK_ID, then $SLURM_JOB_ID")
    p.add_argument("--output-dir", help="default: <work-dir>/results")
    p.add_argument("--queue-s", type=float, help="observed queue wait to record")

    p = sub.add_parser("run-local", help="run all four stages on this machine")
    _common(p)
    _circuit_source(p)
    p.add_argument("--jobs", type=int, required=True)
    p.add_argument("--shots", type=int, required=True, help="total shots across all jobs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-procs", type=int)
    p.add_argument("--max-qubits", type=int, default=DEFAULT_MAX_QUBITS)

    p = sub.add_parser("emit-slurm", help="write sbatch scripts and submit.sh")
    _common(p)
    _circuit_source(p)
    p.add_argument("--jobs", type=int, required=True)
    p.add_argument("--shots", type=int, required=True, help="total shots across all jobs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cpus", type=int, default=8)
    p.add_argument("--mem", default="16G")
    p.add_argument("--gres", help="generic resource request for the state job, e.g. gpu:1")
    p.add_argument("--python", default="python3")
    p.add_argument("--max-qubits", type=int, default=DEFAULT_MAX_QUBITS)

    p = sub.add_parser("analyze", help="merge results and write XEB/timing/scaling reports")
    _common(p)
    p.add_argument("--results-dir")
    p.add_argument("--expected-jobs", type=int)
    p.add_argument("--reference", help="amplitude table: 'bitstring re im' per line")
    p.add_argument("--state-calc-s", type=float)
    p.add_argument("--lenient", action="store_true", help="skip malformed result files")

    p = sub.add_parser("snapshot-info", help="print a snapshot header")
    _common(p)
    p.add_argument("path")
    return parser


def _emit(args, payload, text: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True, default=str))
    else:
        print(text)


def cmd_generate(args) -> int:
    circuit = generate_rcs_circuit(args.rows, args.cols, args.cycles, args.pattern, args.seed)
    text = emit_qasm(circuit)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
        _emit(args, circuit_stats(circuit), f"wrote {args.output}")
    elif args.json:
        _emit(args, circuit_stats(circuit) | {"qasm": text}, "")
    else:
        sys.stdout.write(text)
    return 0


def cmd_build_state(args) -> int:
    circuit = orchestrator.load_circuit(args.qasm, _generator_from(args))
    meta = orchestrator.construct_and_persist(circuit, args.work_dir, args.max_qubits)
    build_s = meta["state_calc"]["end"] - meta["state_calc"]["start"]
    _emit(args, meta, f"{meta['snapshot_path']}: {meta['n_qubits']} qubits, "
                      f"built in {build_s:.3f} s, sha256 {meta['snapshot_digest']}")
    return 0


def cmd_sample(args) -> int:
    started = time.time()
    job_id = resolve_job_id(args.job_id)
    if args.shots is not None:
        shots = args.shots
    elif args.total_shots is not None and args.n_jobs is not None:
        shots = shard_shots(args.total_shots, args.n_jobs)[job_id]
    else:
        raise SystemExit("error: give --shots or --total-shots with --n-jobs")
    if args.queue_s is not None:
        queue_s, source = args.queue_s, "external"
    else:
        queue_s, source = queue_from_environment(now=started)
    config = SamplerConfig(
        snapshot_path=args.snapshot or os.path.join(args.work_dir, orchestrator.SNAPSHOT_NAME),
        shots=shots,
        base_seed=args.seed,
        job_id=job_id,
        output_dir=args.output_dir or os.path.join(args.work_dir, orchestrator.RESULTS_DIR),
        queue_s=queue_s,
        queue_source=source,
        scheduler_job_id=os.environ.get("SLURM_JOB_ID"),
    )
    result = run_worker(config)
    _emit(args, result.header() | {"path": result.path},
          f"job {job_id}: {shots} shots, {len(result.counts)} distinct -> {result.path}")
    return 0


def cmd_run_local(args) -> int:
    config = orchestrator.PipelineConfig(
        work_dir=args.work_dir, total_shots=args.shots, n_jobs=args.jobs, base_seed=args.seed,
        qasm_path=args.qasm, generator=_generator_from(args), max_procs=args.max_procs,
        max_qubits=args.max_qubits,
    )
    manifest = orchestrator.run_local(config)
    with open(os.path.join(manifest.work_dir, "xeb_report.json"), encoding="utf-8") as fh:
        xeb = json.load(fh)
    timings = orchestrator.stage_timings(manifest)
    text = (f"XEB {xeb['xeb']:.4f} +/- {xeb['std_error']:.4f} over {xeb['total_shots']} shots; "
            f"total {timings['total_s']:.2f} s")
    if manifest.partial:
        text += f" (PARTIAL: failed jobs {sorted(manifest.failed_jobs)})"
    _emit(args, {"xeb": xeb, "timings": timings, "partial": manifest.partial,
                 "failed_jobs": sorted(manifest.failed_jobs)}, text)
    return EXIT_PARTIAL if manifest.partial else 0


def cmd_emit_slurm(args) -> int:
    config = orchestrator.PipelineConfig(
        work_dir=args.work_dir, total_shots=args.shots, n_jobs=args.jobs, base_seed=args.seed,
        qasm_path=args.qasm, generator=_generator_from(args), mode="slurm-emit",
        cpus_per_task=args.cpus, mem=args.mem, state_gres=args.gres, python=args.python,
        max_qubits=args.max_qubits,
    )
    paths = orchestrator.emit_slurm(config)
    _emit(args, {"scripts": paths}, "\n".join(paths))
    return 0


def cmd_analyze(args) -> int:
    reference = analysis.load_reference_amplitudes(args.reference) if args.reference else None
    out = orchestrator.analyze_directory(
        args.work_dir, expected_jobs=args.expected_jobs, reference=reference,
        lenient=args.lenient, results_dir=args.results_dir, state_calc_s=args.state_calc_s,
    )
    xeb = out["xeb"]
    summary = analysis.TimingSummary(
        state_calc=analysis.PhaseStats(**out["timing"]["state_calc"]),
        sampling=analysis.PhaseStats(**out["timing"]["sampling"]),
        queue=analysis.PhaseStats(**out["timing"]["queue"]) if "queue" in out["timing"] else None,
    )
    text = (f"XEB {xeb['xeb']:.4f} +/- {xeb['std_error']:.4f} over {xeb['total_shots']} shots"
            + (f" (PARTIAL: missing jobs {xeb['missing_job_ids']})" if xeb["partial"] else "")
            + "\n" + summary.to_table())
    _emit(args, out, text)
    return EXIT_PARTIAL if xeb["partial"] else 0


def cmd_snapshot_info(args) -> int:
    info = snapshot_info(args.path)
    _emit(args, info, "\n".join(f"{k}: {v}" for k, v in info.items()))
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "build-state": cmd_build_state,
    "sample": cmd_sample,
    "run-local": cmd_run_local,
    "emit-slurm": cmd_emit_slurm,
    "analyze": cmd_analyze,
    "snapshot-info": cmd_snapshot_info,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError, orchestrator.PipelineError) as exc:
        print(f"rcspipe {args.command}: error: {exc}", file=sys.stderr)
        return 1

"""``equihybrid`` command line: ``run``, ``bench`` and ``validate``.

Exit codes: 0 success, 1 validation found a failing check, 2 bad
configuration, 3 the solve stopped on an infeasible cut, 4 traces differed
across worker counts.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import platform
import statistics
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import RunConfig, load_config
from .core import ConfigurationError, validate_problem
from .solvers import SOLVERS, SolveResult, TraceRecord, solve_vi

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_DETERMINISM = 4

TRACE_COLUMNS = ("n", "step_residual", "u_residual", "max_z_residual", "max_fixed_point_residual",
                 "dist_to_known", "wall_time_ms")
BENCH_COLUMNS = ("tol", "workers", "T_s", "T_p", "S_p", "E_p", "iterations", "hardware")


class DeterminismError(RuntimeError):
    pass


def solve(rc: RunConfig) -> SolveResult:
    if rc.algorithm == "vi":
        vi = rc.vi
        return solve_vi(vi.fields, vi.lipschitz, vi.C, rc.solver, vi.x0, vi.known_solution)
    return SOLVERS[rc.algorithm](rc.problem, rc.solver)


# --------------------------------------------------------------------------
# trace and summary files


def _num(v) -> str:
    return "" if v is None else repr(float(v))


def write_trace(path, trace: Sequence[TraceRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in trace:
            w.writerow([r.n] + [_num(getattr(r, c)) for c in TRACE_COLUMNS[1:]])


def read_trace(path) -> list[dict]:
    """Rows of a trace CSV as dicts; ``dist_to_known`` is ``None`` when blank."""
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
            raise ValueError(f"unexpected trace header {reader.fieldnames}")
        for raw in reader:
            row = {"n": int(raw["n"])}
            for c in TRACE_COLUMNS[1:]:
                row[c] = None if raw[c] == "" else float(raw[c])
            rows.append(row)
    return rows


def trace_rows(trace: Sequence[TraceRecord]) -> list[dict]:
    return [{c: getattr(r, c) for c in TRACE_COLUMNS} for r in trace]


def summary_doc(rc: RunConfig, res: SolveResult) -> dict:
    return {
        "problem": rc.problem.name,
        "algorithm": res.algorithm,
        "solution": [float(v) for v in res.solution],
        "iterations": res.iterations,
        "stop_reason": res.stop_reason,
        "rho": res.rho,
        "elapsed_s": res.elapsed_s,
        "workers": rc.solver.workers,
        "warnings": list(res.warnings),
    }


# --------------------------------------------------------------------------
# benchmark


@dataclass(frozen=True)
class BenchRow:
    tol: float
    workers: int
    T_s: float
    T_p: float
    iterations: int

    @property
    def S_p(self) -> float:
        return self.T_s / self.T_p

    @property
    def E_p(self) -> float:
        return self.S_p / self.workers


@dataclass(frozen=True)
class BenchReport:
    rows: tuple[BenchRow, ...]
    repeats: int
    hardware: str

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(BENCH_COLUMNS)
            for r in self.rows:
                w.writerow([repr(r.tol), r.workers, repr(r.T_s), repr(r.T_p), repr(r.S_p),
                            repr(r.E_p), r.iterations, self.hardware])

    def text(self) -> str:
        lines = [f"hardware: {self.hardware}", f"median of {self.repeats} repeats (solver time only)",
                 f"{'tol':>8} {'workers':>7} {'T_s [s]':>10} {'T_p [s]':>10} {'S_p':>7} {'E_p':>7} {'iters':>6}"]
        for r in self.rows:
            lines.append(f"{r.tol:>8.0e} {r.workers:>7d} {r.T_s:>10.4f} {r.T_p:>10.4f} "
                         f"{r.S_p:>7.3f} {r.E_p:>7.3f} {r.iterations:>6d}")
        return "\n".join(lines)


def hardware_note() -> str:
    try:
        avail = len(os.sched_getaffinity(0))
    except AttributeError:
        avail = os.cpu_count() or 1
    return (f"{platform.machine()} {os.cpu_count()} logical CPUs ({avail} usable); "
            f"Python {platform.python_version()}; numpy {np.__version__}")


def _timed(rc: RunConfig, repeats: int) -> tuple[float, SolveResult]:
    times, res = [], None
    for _ in range(repeats):
        res = solve(rc)
        times.append(res.elapsed_s)
    return statistics.median(times), res


def run_bench(rc: RunConfig, workers: Optional[Sequence[int]] = None,
              tolerances: Optional[Sequence[float]] = None,
              repeats: Optional[int] = None) -> BenchReport:
    """Sequential and parallel timings per tolerance; raises :class:`DeterminismError`."""
    workers = tuple(workers or rc.bench_workers)
    tolerances = tuple(tolerances or rc.bench_tolerances)
    repeats = repeats or rc.bench_repeats
    if any(w < 1 for w in workers):
        raise ConfigurationError("worker counts must be positive")
    rows = []
    for tol in tolerances:
        base = replace(rc, solver=replace(rc.solver, tol_step=tol, workers=1))
        T_s, ref = _timed(base, repeats)
        stamp = ref.trace_fingerprint()
        for w in workers:
            if w == 1:
                rows.append(BenchRow(tol, 1, T_s, T_s, ref.iterations))
                continue
            T_p, res = _timed(base.with_workers(w), repeats)
            if res.trace_fingerprint() != stamp:
                raise DeterminismError(f"trace with {w} workers differs from the sequential trace "
                                       f"at tol {tol!r}")
            rows.append(BenchRow(tol, w, T_s, T_p, res.iterations))
    return BenchReport(tuple(rows), repeats, hardware_note())


# --------------------------------------------------------------------------
# commands


def _err(msg: str) -> None:
    print(f"equihybrid: {msg}", file=sys.stderr)


def cmd_run(config_path, trace_path=None, summary_path=None, env=None) -> int:
    try:
        rc = load_config(config_path, env)
        res = solve(rc)
    except ConfigurationError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    trace_path = trace_path or rc.outputs.get("trace")
    summary_path = summary_path or rc.outputs.get("summary")
    doc = summary_doc(rc, res)
    if trace_path:
        write_trace(trace_path, res.trace)
    text = json.dumps(doc, indent=1)
    if summary_path:
        Path(summary_path).write_text(text + "\n", encoding="utf-8")
    print(text)
    if res.stop_reason == "infeasible_cut":
        _err("solve stopped on an infeasible cut: " + "; ".join(res.warnings))
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_bench(config_path, workers=None, tolerances=None, repeats=None, csv_path=None,
              text_path=None, env=None) -> int:
    try:
        rc = load_config(config_path, env)
        report = run_bench(rc, workers, tolerances, repeats)
    except ConfigurationError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except DeterminismError as exc:
        _err(f"determinism violation: {exc}")
        return EXIT_DETERMINISM
    csv_path = csv_path or rc.outputs.get("bench_csv")
    text_path = text_path or rc.outputs.get("bench_text")
    if csv_path:
        report.write_csv(csv_path)
    text = report.text()
    if text_path:
        Path(text_path).write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


def cmd_validate(config_path, samples=64, seed=0, as_json=False, env=None) -> int:
    try:
        rc = load_config(config_path, env)
        if rc.algorithm == "vi" and rc.solver.rho is not None \
                and not rc.solver.rho < 1.0 / rc.vi.lipschitz:
            raise ConfigurationError(f"rho={rc.solver.rho!r} violates rho < 1/L = "
                                     f"{1.0 / rc.vi.lipschitz!r}")
        report = validate_problem(rc.problem, rc.solver, samples=samples, seed=seed)
    except ConfigurationError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    if as_json:
        print(report.to_json())
    else:
        print("\n".join(report.summary_lines()))
        print("PASS" if report.passed else "FAIL")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _float_list(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="equihybrid", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve and write a trace and summary")
    run.add_argument("config")
    run.add_argument("--trace", help="trace CSV path (overrides [output] trace)")
    run.add_argument("--summary", help="summary JSON path (overrides [output] summary)")

    bench = sub.add_parser("bench", help="time sequential against parallel solves")
    bench.add_argument("config")
    bench.add_argument("--workers", type=_int_list, help="comma list, e.g. 1,2,4")
    bench.add_argument("--tolerances", type=_float_list, help="comma list, e.g. 1e-5,1e-6")
    bench.add_argument("--repeats", type=int)
    bench.add_argument("--csv", help="report CSV path")
    bench.add_argument("--text", help="report text path")

    val = sub.add_parser("validate", help="spot-check the problem assumptions")
    val.add_argument("config")
    val.add_argument("--samples", type=int, default=64)
    val.add_argument("--seed", type=int, default=0)
    val.add_argument("--json", action="store_true")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.trace, args.summary)
    if args.command == "bench":
        return cmd_bench(args.config, args.workers, args.tolerances, args.repeats, args.csv, args.text)
    return cmd_validate(args.config, args.samples, args.seed, args.json)


if __name__ == "__main__":
    sys.exit(main())

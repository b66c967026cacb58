"""Benchmark harness: sweep paradigm x worker count over the ln(1 + x) series.

For each worker count a fresh pool is created; each paradigm gets one
untimed warm-up run and then ``--reps`` timed runs, and the fastest is kept.
Every run's value is checked against the sequential reference first, so a
wrong answer is never timed.

Results go to ``<out>/<paradigm>.csv`` as headerless ``cores,seconds``
lines (column 0 cores, column 1 seconds; GFlop/s = flops / seconds).

Exit codes: 0 success, 1 usage error, 2 value-check failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from . import algorithms as alg
from .errors import TaskError
from .runtime import RuntimeConfig, WorkerPool
from .taylor import PARADIGMS, TaylorParams, WorkloadResult, reference_sum, run_paradigm

log = logging.getLogger(__name__)

VALUE_CHECK_RTOL = 1e-9
CHUNK_KINDS = ("static", "auto", "dynamic")


class UsageError(Exception):
    pass


class ValueCheckError(TaskError):
    def __init__(self, paradigm: str, workers: int, value: float, expected: float):
        super().__init__(
            f"{paradigm} with {workers} workers computed {value!r}, reference is {expected!r}",
            origin="bench",
        )
        self.paradigm = paradigm
        self.workers = workers


@dataclass(frozen=True)
class BenchConfig:
    paradigms: tuple[str, ...] = PARADIGMS
    n: int = 10**7
    x: float = 0.1
    worker_counts: tuple[int, ...] = field(default_factory=lambda: tuple(range(1, (os.cpu_count() or 1) + 1)))
    repetitions: int = 3
    flops_total: int | None = None
    chunk: str = "static"
    chunk_size: int | None = None
    out: Path = Path(".")

    def __post_init__(self):
        if self.repetitions < 1:
            raise UsageError("--reps must be >= 1")
        if not self.worker_counts:
            raise UsageError("--workers must list at least one worker count")
        if any(w < 1 for w in self.worker_counts):
            raise UsageError("worker counts must be positive")
        if any(a >= b for a, b in zip(self.worker_counts, self.worker_counts[1:])):
            raise UsageError("worker counts must be strictly increasing")
        if self.n < 1:
            raise UsageError("--n must be >= 1")
        if not (math.isfinite(self.x) and abs(self.x) < 1):
            raise UsageError(f"--x must lie in (-1, 1), got {self.x}")
        if self.flops_total is not None and self.flops_total < 0:
            raise UsageError("--flops must be non-negative")
        if self.chunk not in CHUNK_KINDS:
            raise UsageError(f"--chunk must be one of {', '.join(CHUNK_KINDS)}")
        if self.chunk_size is not None:
            if self.chunk_size < 1:
                raise UsageError("--chunk-size must be >= 1")
            if self.chunk == "auto":
                raise UsageError("--chunk-size does not apply to --chunk auto")

    def chunker(self) -> alg.ChunkPolicy | None:
        if self.chunk == "auto":
            return alg.AutoChunkSize()
        if self.chunk_size is None:
            return None if self.chunk == "static" else alg.DynamicChunkSize(max(1, self.n // 1000))
        if self.chunk == "static":
            return alg.StaticChunkSize(self.chunk_size)
        return alg.DynamicChunkSize(self.chunk_size)


@dataclass(frozen=True)
class BenchRecord:
    cores: int
    seconds: float
    value: float
    paradigm: str


@dataclass(frozen=True)
class ThroughputRow:
    cores: int
    gflops: float
    paradigm: str = ""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _worker_list(text: str) -> tuple[int, ...]:
    try:
        counts = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of ints: {text!r}") from None
    if not counts:
        raise argparse.ArgumentTypeError("empty worker list")
    return counts


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="taskrt-bench",
        description="Time the ln(1+x) series across paradigms and worker counts.",
        allow_abbrev=False,
    )
    p.add_argument("--paradigm", choices=(*PARADIGMS, "all"), default="all")
    p.add_argument("--n", type=int, default=10**7, help="number of series terms (default 10^7)")
    p.add_argument("--x", type=float, default=0.1, help="series argument, |x| < 1 (default 0.1)")
    p.add_argument("--workers", type=_worker_list, default=None,
                   help="comma-separated, strictly increasing worker counts (default 1..#cpus)")
    p.add_argument("--reps", type=int, default=3, help="timed repetitions per point (default 3)")
    p.add_argument("--flops", type=int, default=None, help="total flop count, enables GFlop/s report")
    p.add_argument("--chunk", choices=CHUNK_KINDS, default="static")
    p.add_argument("--chunk-size", type=int, default=None)
    p.add_argument("--out", type=Path, default=Path("."), help="directory for <paradigm>.csv files")
    return p


def parse_args(argv: Sequence[str] | None = None) -> BenchConfig:
    parser = build_parser()
    args = parser.parse_args(argv)
    kwargs = {}
    if args.workers is not None:
        kwargs["worker_counts"] = args.workers
    try:
        return BenchConfig(
            paradigms=PARADIGMS if args.paradigm == "all" else (args.paradigm,),
            n=args.n,
            x=args.x,
            repetitions=args.reps,
            flops_total=args.flops,
            chunk=args.chunk,
            chunk_size=args.chunk_size,
            out=args.out,
            **kwargs,
        )
    except UsageError as exc:
        parser.error(str(exc))


Workload = Callable[[str, WorkerPool, TaylorParams, "alg.ChunkPolicy | None"], WorkloadResult]


def _check(paradigm: str, workers: int, value: float, expected: float) -> None:
    if not (math.isfinite(value) and abs(value - expected) <= VALUE_CHECK_RTOL * max(abs(expected), 1e-300)):
        raise ValueCheckError(paradigm, workers, value, expected)


def run_benchmark(
    config: BenchConfig,
    *,
    timer: Callable[[], float] = time.perf_counter,
    workload: Workload = run_paradigm,
) -> list[BenchRecord]:
    expected = reference_sum(TaylorParams(config.n, 1, config.x))
    chunker = config.chunker()
    records = []
    for workers in config.worker_counts:
        params = TaylorParams(config.n, min(workers, config.n), config.x)
        with WorkerPool(RuntimeConfig(workers), name=f"bench{workers}") as pool:
            for paradigm in config.paradigms:
                warm = workload(paradigm, pool, params, chunker)
                _check(paradigm, workers, warm.value, expected)
                samples = []
                for _ in range(config.repetitions):
                    start = timer()
                    result = workload(paradigm, pool, params, chunker)
                    elapsed = timer() - start
                    _check(paradigm, workers, result.value, expected)
                    samples.append(elapsed)
                best = min(samples)
                log.info("%s workers=%d best=%.6fs", paradigm, workers, best)
                records.append(BenchRecord(workers, best, result.value, paradigm))
    return records


def emit_csv(records: Iterable[BenchRecord], out: Path | str) -> list[Path]:
    """Write one headerless ``cores,seconds`` file per paradigm, sorted by cores."""
    records = list(records)
    if not records:
        raise TaskError("no benchmark records to write", origin="bench")
    out = Path(out)
    by_paradigm: dict[str, list[BenchRecord]] = {}
    for r in records:
        by_paradigm.setdefault(r.paradigm, []).append(r)
    paths = []
    for paradigm, rows in by_paradigm.items():
        path = out / f"{paradigm}.csv"
        body = "".join(f"{r.cores},{r.seconds!r}\n" for r in sorted(rows, key=lambda r: r.cores))
        try:
            out.mkdir(parents=True, exist_ok=True)
            with open(path, "w", newline="\n") as fh:
                fh.write(body)
        except OSError as exc:
            raise TaskError(f"cannot write {path}: {exc.strerror or exc}", origin="bench") from exc
        paths.append(path)
    return paths


def read_csv(path: Path | str) -> list[tuple[int, float]]:
    """Read a ``cores,seconds`` file (column 0 cores, column 1 seconds)."""
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            cores, seconds = line.split(",")
            rows.append((int(cores), float(seconds)))
    return rows


def report_throughput(records: Iterable[BenchRecord], flops_total: int | None) -> list[ThroughputRow]:
    if not flops_total:
        log.warning("no flop count supplied; skipping GFlop/s report")
        return []
    return [ThroughputRow(r.cores, flops_total / r.seconds / 1e9, r.paradigm) for r in records]


def format_records(records: Sequence[BenchRecord]) -> str:
    base = {}
    for r in records:
        base.setdefault(r.paradigm, r.seconds)
    lines = [f"{'paradigm':<9} {'cores':>5} {'seconds':>12} {'speedup':>8} {'value':>22}"]
    for r in records:
        lines.append(
            f"{r.paradigm:<9} {r.cores:>5} {r.seconds:>12.6f} {base[r.paradigm] / r.seconds:>8.2f} {r.value:>22.17g}"
        )
    return "\n".join(lines)


def format_throughput(rows: Sequence[ThroughputRow]) -> str:
    lines = [f"{'paradigm':<9} {'cores':>5} {'GFlop/s':>14}"]
    lines += [f"{r.paradigm:<9} {r.cores:>5} {r.gflops:>14.6f}" for r in rows]
    return "\n".join(lines)


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(message)s")
    try:
        config = parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    try:
        records = run_benchmark(config)
    except ValueCheckError as exc:
        print(f"value check failed: {exc}", file=sys.stderr)
        return 2
    print(format_records(records))
    for path in emit_csv(records, config.out):
        print(f"wrote {path}")
    rows = report_throughput(records, config.flops_total)
    if rows:
        print(format_throughput(rows))
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

    rebacktrack solve --problem vc --workers 4 graph.clq
    rebacktrack verify --problem vc graph.clq cover.txt

Exit codes: 0 ok, 1 invalid certificate, 2 unreadable input, 3 bad
configuration, 4 internal invariant violated.
"""

from __future__ import annotations

import argparse
import csv
import os
import re
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

from .engine import ExploreLog, MalformedTaskError, serial_solve
from .problems import PROBLEMS, ParseError, load_graph, make_problem, verify_certificate
from .runtime import BACKENDS, ProtocolError, WorkerFailed, WorkerStats, solve_parallel
from .transport import ConfigurationError, SimSchedule, SimulationError

EXIT_INVALID = 1
EXIT_PARSE = 2
EXIT_CONFIG = 3
EXIT_INVARIANT = 4

STATS_HEADER = ["graph", "c", "time_ms", "ts_avg", "tr_avg", "optimum"]
RANK_STATS_HEADER = ["rank", "tasks_solved", "tasks_requested", "nodes_explored", "wall_time_ms"]
THREADS_ENV = "REBACKTRACK_THREADS"


@dataclass
class RunConfig:
    problem: str
    input: Path
    format: str = "auto"
    workers: int = 1
    backend: str = "threads"
    seed: int = 0
    poll_interval: int = 1
    passes_threshold: int = 3
    no_prune: bool = False
    trace: Optional[Path] = None
    stats_out: Optional[Path] = None
    rank_stats_out: Optional[Path] = None
    certificate_out: Optional[Path] = None
    timeout: Optional[float] = None

    def validate(self) -> None:
        if self.problem not in PROBLEMS:
            raise ConfigurationError(f"unknown problem {self.problem!r}")
        if self.workers < 1:
            raise ConfigurationError("--workers must be at least 1")
        if self.backend not in BACKENDS:
            raise ConfigurationError(f"unknown backend {self.backend!r}")
        if self.poll_interval < 1:
            raise ConfigurationError("--poll-interval must be at least 1")
        if self.passes_threshold < 1:
            raise ConfigurationError("--passes-threshold must be at least 1")
        if self.trace is not None and self.backend != "sim":
            raise ConfigurationError("--trace needs --backend sim")


def default_workers() -> int:
    return os.cpu_count() or 1


def _env_workers() -> Optional[int]:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV}={raw!r} is not an integer") from None


def write_stats(path: Path, row: dict) -> None:
    """Append one row, writing the header first if the file is new."""
    fresh = not path.exists() or path.stat().st_size == 0
    with open(path, "a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=STATS_HEADER)
        if fresh:
            w.writeheader()
        w.writerow(row)


def write_rank_stats(path: Path, stats: List[WorkerStats]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RANK_STATS_HEADER)
        for s in stats:
            w.writerow([s.rank, s.tasks_solved, s.tasks_requested, s.nodes_explored, f"{s.wall_time_ms:.3f}"])


def read_certificate(path: Path) -> List[int]:
    text = Path(path).read_text()
    text = "\n".join(line.split("#", 1)[0] for line in text.splitlines())
    tokens = [t for t in re.split(r"[\s,]+", text) if t]
    try:
        return [int(t) for t in tokens]
    except ValueError as exc:
        raise ParseError(f"certificate {path}: {exc}") from None


def cmd_solve(cfg: RunConfig) -> int:
    cfg.validate()
    graph = load_graph(cfg.input, cfg.format)
    prune = not cfg.no_prune

    def factory():
        return make_problem(cfg.problem, graph)

    if cfg.workers == 1 and cfg.backend != "sim":
        log = ExploreLog()
        t0 = time.perf_counter()
        inc = serial_solve(factory(), prune=prune, log=log)
        wall = (time.perf_counter() - t0) * 1000.0
        value, certificate = inc.best_value, inc.best_certificate
        stats = [WorkerStats(0, nodes_explored=log.nodes, wall_time_ms=wall)]
        ts_avg = tr_avg = 0.0
        trace = None
    else:
        schedule = SimSchedule.randomized(cfg.seed, cfg.workers) if cfg.backend == "sim" else None
        res = solve_parallel(
            factory,
            cfg.workers,
            backend=cfg.backend,
            schedule=schedule,
            prune=prune,
            poll_interval=cfg.poll_interval,
            passes_threshold=cfg.passes_threshold,
            timeout=cfg.timeout,
        )
        value, certificate, stats = res.best_value, res.certificate, res.stats
        wall, ts_avg, tr_avg, trace = res.wall_time_ms, res.ts_avg, res.tr_avg, res.trace

    if value is None:
        raise ProtocolError("search finished without any solution")
    if not verify_certificate(cfg.problem, graph, certificate) or len(certificate) != value:
        raise ProtocolError(f"solver produced an invalid certificate {certificate!r}")

    print(f"optimum {value}")
    if cfg.certificate_out is not None:
        cfg.certificate_out.write_text("".join(f"{v}\n" for v in sorted(certificate)))
    if cfg.trace is not None and trace is not None:
        cfg.trace.write_text("\n".join(trace) + "\n")
    if cfg.stats_out is not None:
        write_stats(
            cfg.stats_out,
            {
                "graph": cfg.input.name,
                "c": cfg.workers,
                "time_ms": f"{wall:.3f}",
                "ts_avg": f"{ts_avg:.3f}",
                "tr_avg": f"{tr_avg:.3f}",
                "optimum": value,
            },
        )
    if cfg.rank_stats_out is not None:
        write_rank_stats(cfg.rank_stats_out, stats)
    return 0


def cmd_verify(problem: str, instance: Path, certificate: Path, fmt: str = "auto") -> int:
    if problem not in PROBLEMS:
        raise ConfigurationError(f"unknown problem {problem!r}")
    graph = load_graph(instance, fmt)
    vertices = read_certificate(certificate)
    if len(set(vertices)) != len(vertices):
        print("invalid: repeated vertex")
        return EXIT_INVALID
    if not verify_certificate(problem, graph, vertices):
        print(f"invalid: not a {'vertex cover' if problem == 'vc' else 'dominating set'}")
        return EXIT_INVALID
    print(f"valid size {len(vertices)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rebacktrack", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="find an optimum vertex cover or dominating set")
    s.add_argument("input", type=Path)
    s.add_argument("--problem", choices=sorted(PROBLEMS), required=True)
    s.add_argument("--format", choices=["auto", "dimacs", "edgelist"], default="auto")
    s.add_argument(
        "--workers", type=int, default=None, help=f"default: CPU count; {THREADS_ENV} overrides"
    )
    s.add_argument("--backend", choices=BACKENDS, default="threads")
    s.add_argument("--seed", type=int, default=0, help="simulator schedule seed")
    s.add_argument("--poll-interval", type=int, default=1, help="nodes between message polls")
    s.add_argument("--passes-threshold", type=int, default=3)
    s.add_argument("--no-prune", action="store_true", help="disable bound pruning")
    s.add_argument("--timeout", type=float, default=None, help="seconds before aborting workers")
    s.add_argument("--trace", type=Path, help="write the simulator trace here")
    s.add_argument("--stats-out", type=Path, help="append a CSV summary row")
    s.add_argument("--rank-stats-out", type=Path, help="write per-rank statistics as CSV")
    s.add_argument("--certificate-out", type=Path)

    v = sub.add_parser("verify", help="check a certificate against an instance")
    v.add_argument("instance", type=Path)
    v.add_argument("certificate", type=Path)
    v.add_argument("--problem", choices=sorted(PROBLEMS), required=True)
    v.add_argument("--format", choices=["auto", "dimacs", "edgelist"], default="auto")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return cmd_verify(args.problem, args.instance, args.certificate, args.format)
        workers = _env_workers()
        if workers is None:
            workers = args.workers if args.workers is not None else default_workers()
        cfg = RunConfig(
            problem=args.problem,
            input=args.input,
            format=args.format,
            workers=workers,
            backend=args.backend,
            seed=args.seed,
            poll_interval=args.poll_interval,
            passes_threshold=args.passes_threshold,
            no_prune=args.no_prune,
            trace=args.trace,
            stats_out=args.stats_out,
            rank_stats_out=args.rank_stats_out,
            certificate_out=args.certificate_out,
            timeout=args.timeout,
        )
        return cmd_solve(cfg)
    except (ParseError, OSError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ProtocolError, MalformedTaskError, SimulationError, WorkerFailed) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())

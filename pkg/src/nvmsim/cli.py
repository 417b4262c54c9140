"""Command-line driver.

Exit codes: 0 success, 2 config error, 3 trace or program error,
4 cycle limit reached, 5 internal timing violation.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from typing import Dict, List, Optional, Sequence

from .cache import HybridCache, run_cache, sweep_csv, sweep_ratio
from .cim import CiMState, Opcode, parse_program, run_program
from .config import SimConfig, load_config, resolve
from .controller import MemorySystem, Policy, RunReport
from .errors import (
    CiMError,
    ConfigError,
    SinkUnavailable,
    TimingViolation,
    TraceError,
)
from .report import FORMATS, emit_stats
from .trace import MemoryRequest, Op, make_writer, read_trace

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_MAX_CYCLES = 4
EXIT_TIMING = 5

log = logging.getLogger("nvmsim")


def cache_front_end(requests: Sequence[MemoryRequest], cfg: SimConfig) -> List[MemoryRequest]:
    """Filter word accesses through the cache; misses become block READs and
    dirty victims become block WRITEs, both at the access's arrival cycle."""
    cache = HybridCache(cfg.cache_config())
    block = cfg.geometry.block_size_bytes
    out = []
    for req in requests:
        if req.op is Op.ROWCLONE:
            out.append(req)
            continue
        res = cache.access(req.address, req.op, req.arrival_cycle)
        if res.writeback is not None:
            out.append(MemoryRequest(req.arrival_cycle, Op.WRITE, res.writeback,
                                     thread_id=req.thread_id))
        if not res.hit:
            out.append(MemoryRequest(req.arrival_cycle, Op.READ, req.address - req.address % block,
                                     thread_id=req.thread_id))
    return out


def run_trace(cfg: SimConfig, trace_path: str, max_cycles: Optional[int] = None,
              policy: Optional[Policy] = None) -> RunReport:
    access = cfg.cache_access_size if cfg.cache_enabled else cfg.geometry.block_size_bytes
    requests = read_trace(resolve(trace_path), access)
    if cfg.cache_enabled:
        requests = cache_front_end(requests, cfg)
    ctl = cfg.controller if policy is None else replace(cfg.controller, policy=policy)
    writer = None
    if cfg.writer.enabled:
        kw: Dict[str, object] = {"block_size": cfg.geometry.block_size_bytes}
        if cfg.writer.writer_name == "BitFlipWriter":
            kw.update(dcw=cfg.dcw, read_wear=cfg.read_wear)
        elif cfg.writer.writer_name == "BlockAccessWriter":
            kw["count_block"] = cfg.writer_block_size
        writer = make_writer(cfg.writer.writer_name, cfg.writer.out_path, **kw)
    system = MemorySystem(cfg.geometry, cfg.profiles, ctl,
                          payload=cfg.payload_simulation, writer=writer)
    try:
        limit = max_cycles if max_cycles is not None else cfg.max_cycles
        return system.run(requests, limit)
    finally:
        if writer is not None:
            writer.finalize()


def _emit(stats, args) -> None:
    emit_stats(stats, args.format, args.out)


def cmd_run_trace(args) -> int:
    cfg = load_config(args.config)
    try:
        policy = Policy.parse(args.policy) if args.policy else None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    report = run_trace(cfg, args.trace, args.max_cycles, policy)
    _emit(report.as_dict(), args)
    if report.exceeded:
        log.error("cycle limit reached before the trace drained")
        return EXIT_MAX_CYCLES
    return EXIT_OK


def cmd_run_cache(args) -> int:
    cfg = load_config(args.config)
    cc = cfg.cache_config()
    if args.ratio is not None:
        cc = replace(cc, nv_block_ratio=args.ratio)
    requests = read_trace(resolve(args.trace), cfg.cache_access_size)
    stats = run_cache(requests, cc).as_dict()
    stats["nvBlockRatio"] = cc.nv_block_ratio
    _emit(stats, args)
    return EXIT_OK


def cmd_sweep_ratio(args) -> int:
    cfg = load_config(args.config)
    ratios = [float(r) for r in args.ratios.split(",") if r.strip()]
    requests = read_trace(resolve(args.trace), cfg.cache_access_size)
    points = sweep_ratio(requests, cfg.cache_config(), ratios, jobs=args.jobs)
    text = sweep_csv(points)
    if args.out is None or args.out == "-":
        sys.stdout.write(text)
    else:
        try:
            with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as exc:
            raise SinkUnavailable(f"cannot write {args.out}: {exc}") from exc
    return EXIT_OK


def cmd_run_cim(args) -> int:
    row_size, row_count, transfer = 64, 1024, None
    if args.config:
        cfg = load_config(args.config)
        row_size, row_count, transfer = cfg.cim_row_size, cfg.cim_row_count, cfg.cim_transfer_latency
    path = resolve(args.program)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CiMError(f"cannot read program {path}: {exc}") from exc
    program = parse_program(text, row_size)
    state = CiMState(row_size=row_size, row_count=row_count, transfer_latency=transfer)
    result = run_program(state, program)
    lines = []
    for kind, value in result.outputs:
        if kind == "CTH":
            lines.append(f"CTH {value.hex()}")
        else:
            lines.append("MAC " + " ".join(str(v) for v in value))
    stats: Dict[str, object] = {"total_cycles": result.total_cycles,
                                "total_energy_nJ": result.total_energy,
                                "instructions": len(program)}
    for op in Opcode:
        if op in result.per_op:
            n, cyc, nj = result.per_op[op]
            stats[f"{op.name}.count"] = n
            stats[f"{op.name}.cycles"] = cyc
            stats[f"{op.name}.energy_nJ"] = nj
    sys.stdout.write("".join(line + "\n" for line in lines))
    _emit(stats, args)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nvmsim", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, trace=True):
        p.add_argument("--config", required=True, help="config file or bundled config name")
        if trace:
            p.add_argument("--trace", required=True, help="trace file or bundled trace name")
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--format", choices=FORMATS, default="text")

    p = sub.add_parser("run-trace", help="simulate a memory trace")
    common(p)
    p.add_argument("--max-cycles", type=int, default=None)
    p.add_argument("--policy", default=None, help="override MEM_CTL")
    p.set_defaults(func=cmd_run_trace)

    p = sub.add_parser("run-cache", help="run a trace through the hybrid cache")
    common(p)
    p.add_argument("--ratio", type=float, default=None, help="override NV_BLOCK_RATIO")
    p.set_defaults(func=cmd_run_cache)

    p = sub.add_parser("sweep-ratio", help="sweep the non-volatile way ratio, CSV out")
    p.add_argument("--config", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--ratios", default="0,25,50,75,100")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sweep_ratio)

    p = sub.add_parser("run-cim", help="execute a compute-in-memory program")
    p.add_argument("--program", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=FORMATS, default="text")
    p.set_defaults(func=cmd_run_cim)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (TraceError, CiMError, FileNotFoundError) as exc:
        log.error("input error: %s", exc)
        return EXIT_INPUT
    except TimingViolation as exc:
        log.error("internal timing violation: %s", exc)
        return EXIT_TIMING
    except SinkUnavailable as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())

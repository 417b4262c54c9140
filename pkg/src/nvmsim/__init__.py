"""Trace-driven simulator for DRAM / non-volatile memory systems.

Bank timing, controller scheduling, in-memory row copy, hybrid SRAM/STT-RAM
caches, trace writers with wear accounting and a compute-in-memory engine.
"""

from .cache import HybridCache, HybridCacheConfig, nv_ways_per_set, run_cache, sweep_ratio
from .cim import CiMInstruction, CiMState, Opcode, parse_program, run_program
from .config import SimConfig, load_config
from .controller import ControllerConfig, MemorySystem, Policy, RunReport
from .memory import AddressCodec, Geometry, MemKind, TimingProfile, rowclone_fpm, rowclone_zero
from .trace import MemoryRequest, Op, make_writer, read_trace
from .wear import EnergyLedger, data_comparison_write

__version__ = "0.1.0"

__all__ = [
    "AddressCodec", "CiMInstruction", "CiMState", "ControllerConfig", "EnergyLedger",
    "Geometry", "HybridCache", "HybridCacheConfig", "MemKind", "MemoryRequest",
    "MemorySystem", "Op", "Opcode", "Policy", "RunReport", "SimConfig", "TimingProfile",
    "data_comparison_write", "load_config", "make_writer", "nv_ways_per_set",
    "parse_program", "read_trace", "rowclone_fpm", "rowclone_zero", "run_cache",
    "run_program", "sweep_ratio",
]

"""Set-associative cache with per-set SRAM / STT-RAM way partitioning.

In every set the first ``n1 = floor(nvBlockRatio/100 * assoc)`` ways are
non-volatile, the remainder volatile. Replacement is plain LRU over the whole
set; a filled line inherits the section of the way it lands in.
Writes are posted: the front side sees the SRAM latency for a write hit in
either section, but the line stays busy for the section's full write latency
and a later access to the same line waits out the remainder.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple

from .errors import ValidationError
from .trace import MemoryRequest, Op
from .wear import EnergyEvent


def nv_ways_per_set(nv_block_ratio: float, assoc: int) -> int:
    """Number of STT-RAM ways per set, floor(ratio/100 * assoc), computed exactly."""
    if not 0 <= nv_block_ratio <= 100:
        raise ValueError(f"nvBlockRatio {nv_block_ratio} outside [0, 100]")
    return int(Fraction(nv_block_ratio) * assoc // 100)


@dataclass(frozen=True)
class HybridCacheConfig:
    size_bytes: int = 32 * 1024
    assoc: int = 4
    block_bytes: int = 64
    nv_block_ratio: float = 0
    data_latency: int = 2          # SRAM read and write
    nv_read_latency: int = 2
    nv_write_latency: int = 8
    vol_read_energy: float = 0.009
    vol_write_energy: float = 0.009
    non_vol_read_energy: float = 0.007
    non_vol_write_energy: float = 0.056
    miss_penalty: int = 20

    def __post_init__(self):
        if self.assoc < 1 or self.block_bytes < 1 or self.size_bytes < 1:
            raise ValidationError("cache size, associativity and block size must be positive")
        if self.size_bytes % (self.assoc * self.block_bytes):
            raise ValidationError(
                f"cache size {self.size_bytes} not divisible by assoc*block ({self.assoc}*{self.block_bytes})")
        if self.block_bytes & (self.block_bytes - 1):
            raise ValidationError("cache block size must be a power of two")
        if not 0 <= self.nv_block_ratio <= 100:
            raise ValidationError(f"nvBlockRatio {self.nv_block_ratio} outside [0, 100]")
        if min(self.data_latency, self.nv_read_latency, self.nv_write_latency, self.miss_penalty) < 0:
            raise ValidationError("cache latencies must be >= 0")

    @property
    def num_sets(self) -> int:
        return self.size_bytes // (self.assoc * self.block_bytes)

    @property
    def nv_ways(self) -> int:
        return nv_ways_per_set(self.nv_block_ratio, self.assoc)


@dataclass
class CacheLine:
    valid: bool = False
    dirty: bool = False
    tag: int = 0
    is_volatile: bool = True
    lru_stamp: int = 0
    busy_until: int = 0


@dataclass
class HybridStats:
    noOfVolReads: int = 0
    noOfNonVolReads: int = 0
    noOfVolWrites: int = 0
    noOfNonVolWrites: int = 0
    dynEnergy: float = 0.0
    hits: int = 0
    misses: int = 0
    writebacks: int = 0
    stall_cycles: int = 0
    latency_cycles: int = 0

    def as_dict(self):
        return dict(self.__dict__)


class AccessResult(NamedTuple):
    hit: bool
    latency: int
    writeback: Optional[int]  # block address of a dirty victim


class HybridCache:
    def __init__(self, config: HybridCacheConfig):
        self.config = config
        self.sets = init_sets(config)
        self.stats = HybridStats()
        self._clock = 0
        self._offset_bits = config.block_bytes.bit_length() - 1

    def _locate(self, addr: int) -> Tuple[int, int]:
        blk = addr >> self._offset_bits
        n = self.config.num_sets
        return blk % n, blk // n

    def access(self, addr: int, op: Op, now: int) -> AccessResult:
        """One front-side access; returns hit flag, reported latency, writeback."""
        cfg = self.config
        s, tag = self._locate(addr)
        ways = self.sets[s]
        line = next((w for w in ways if w.valid and w.tag == tag), None)
        hit = line is not None
        writeback = None
        latency = 0
        if hit:
            self.stats.hits += 1
            if now < line.busy_until:
                stall = line.busy_until - now
                self.stats.stall_cycles += stall
                latency += stall
        else:
            self.stats.misses += 1
            # invalid ways carry stamp 0, so they go first; ties pick the lowest way
            line = min(ways, key=lambda w: (w.valid, w.lru_stamp))
            if line.valid and line.dirty:
                writeback = ((line.tag * cfg.num_sets) + s) << self._offset_bits
                self.stats.writebacks += 1
            line.valid, line.dirty, line.tag, line.busy_until = True, False, tag, 0
            latency += cfg.miss_penalty

        self._clock += 1
        line.lru_stamp = self._clock
        start = now + latency
        if op is Op.WRITE:
            line.dirty = True
            if line.is_volatile:
                self.stats.noOfVolWrites += 1
                self.stats.dynEnergy += cfg.vol_write_energy
                line.busy_until = start + cfg.data_latency
            else:
                self.stats.noOfNonVolWrites += 1
                self.stats.dynEnergy += cfg.non_vol_write_energy
                line.busy_until = start + cfg.nv_write_latency
            latency += cfg.data_latency  # posted
        else:
            if line.is_volatile:
                self.stats.noOfVolReads += 1
                self.stats.dynEnergy += cfg.vol_read_energy
                latency += cfg.data_latency
            else:
                self.stats.noOfNonVolReads += 1
                self.stats.dynEnergy += cfg.non_vol_read_energy
                latency += cfg.nv_read_latency
        self.stats.latency_cycles += latency
        return AccessResult(hit, latency, writeback)

    def energy_event(self) -> EnergyEvent:
        return EnergyEvent("cache", self.stats.dynEnergy)

    def ledger_energy(self) -> float:
        """dynEnergy recomputed from the section counters."""
        c, s = self.config, self.stats
        return (c.vol_read_energy * s.noOfVolReads + c.vol_write_energy * s.noOfVolWrites
                + c.non_vol_read_energy * s.noOfNonVolReads
                + c.non_vol_write_energy * s.noOfNonVolWrites)


def init_sets(config: HybridCacheConfig) -> List[List[CacheLine]]:
    n1 = config.nv_ways
    return [[CacheLine(is_volatile=w >= n1) for w in range(config.assoc)]
            for _ in range(config.num_sets)]


def run_cache(requests: Iterable[MemoryRequest], config: HybridCacheConfig) -> HybridStats:
    cache = HybridCache(config)
    for req in requests:
        if req.op is Op.ROWCLONE:
            continue
        cache.access(req.address, req.op, req.arrival_cycle)
    return cache.stats


class SweepPoint(NamedTuple):
    ratio: float
    stats: HybridStats

    @property
    def latency_cycles(self) -> int:
        return self.stats.latency_cycles

    @property
    def dyn_energy(self) -> float:
        return self.stats.dynEnergy


def _sweep_one(args):
    requests, config = args
    return run_cache(requests, config)


def sweep_ratio(requests: Sequence[MemoryRequest], config: HybridCacheConfig,
                ratios: Sequence[float], jobs: int = 1) -> List[SweepPoint]:
    """Run the same trace once per ratio; results come back ordered by ratio."""
    for r in ratios:
        if not 0 <= r <= 100:
            raise ValueError(f"ratio {r} outside [0, 100]")
    ordered = sorted(ratios)
    work = [(list(requests), replace(config, nv_block_ratio=r)) for r in ordered]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_one, work))
    else:
        results = [_sweep_one(w) for w in work]
    return [SweepPoint(r, s) for r, s in zip(ordered, results)]


def sweep_csv(points: Sequence[SweepPoint]) -> str:
    lines = ["ratio,latency_cycles,dyn_energy_nJ"]
    for p in points:
        ratio = int(p.ratio) if float(p.ratio).is_integer() else p.ratio
        lines.append(f"{ratio},{p.latency_cycles},{p.dyn_energy:.6f}")
    return "\n".join(lines) + "\n"

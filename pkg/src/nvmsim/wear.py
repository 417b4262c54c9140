"""Data-comparison writes, per-bit wear counters and the global energy ledger.

Cells are single bits. A cell id is ``(block_index, bit_offset)`` where
``bit_offset = 8 * byte_index + bit`` and bit 0 is the least significant bit
of the byte.
"""

from __future__ import annotations

import statistics
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

from .errors import LengthMismatch

Cell = Tuple[int, int]


def data_comparison_write(old: bytes, new: bytes) -> Tuple[int, List[int]]:
    """Return ``(cells_written, flipped_bit_positions)`` for overwriting old with new.

    Only cells whose value differs are written, so the count is the Hamming
    distance of the two payloads.
    """
    if len(old) != len(new):
        raise LengthMismatch(f"payload lengths differ: {len(old)} != {len(new)}")
    positions = []
    for i, (a, b) in enumerate(zip(old, new)):
        diff = a ^ b
        while diff:
            low = diff & -diff
            positions.append(8 * i + low.bit_length() - 1)
            diff ^= low
    return len(positions), positions


class ShadowMemory:
    """Last-written payload per block; blocks never written read as zeros."""

    def __init__(self, block_size: int):
        self.block_size = block_size
        self._blocks: Dict[int, bytes] = {}

    def get(self, block: int) -> bytes:
        return self._blocks.get(block, bytes(self.block_size))

    def put(self, block: int, payload: bytes) -> None:
        if len(payload) != self.block_size:
            raise LengthMismatch(f"payload is {len(payload)} bytes, block is {self.block_size}")
        self._blocks[block] = bytes(payload)

    def __contains__(self, block: int) -> bool:
        return block in self._blocks

    def __len__(self) -> int:
        return len(self._blocks)


@dataclass
class WearCounters:
    """Sparse per-bit flip counts plus write-operation counts.

    With ``dcw`` on, a bit is only written when it flips, so its write count
    equals its flip count. With ``dcw`` off every bit of a written block is
    rewritten; that is tracked per block to keep the map small.
    """

    dcw: bool = True
    read_wear: bool = False
    flips: Dict[Cell, int] = field(default_factory=lambda: defaultdict(int))
    block_writes: Dict[int, int] = field(default_factory=lambda: defaultdict(int))
    block_reads: Dict[int, int] = field(default_factory=lambda: defaultdict(int))

    def cell_writes(self, cell: Cell) -> int:
        if self.dcw:
            return self.flips.get(cell, 0)
        return self.block_writes.get(cell[0], 0)

    def record_read(self, block: int) -> None:
        # flip-free wear for technologies such as FeRAM
        if self.read_wear:
            self.block_reads[block] += 1

    def total_flips(self) -> int:
        return sum(self.flips.values())

    def dump_lines(self) -> List[str]:
        return [f"{b}:{bit} | {n}" for (b, bit), n in sorted(self.flips.items())]

    def dump_csv(self) -> str:
        rows = ["block,bit,flips,writes"]
        rows += [f"{b},{bit},{n},{self.cell_writes((b, bit))}"
                 for (b, bit), n in sorted(self.flips.items())]
        return "\n".join(rows) + "\n"


def record_write(shadow: ShadowMemory, counters: WearCounters, block: int,
                 new_payload: bytes) -> int:
    """Account one block write against the shadow copy; returns the flip count."""
    if len(new_payload) != shadow.block_size:
        raise LengthMismatch(
            f"payload is {len(new_payload)} bytes, block is {shadow.block_size}")
    n, positions = data_comparison_write(shadow.get(block), new_payload)
    for pos in positions:
        counters.flips[(block, pos)] += 1
    counters.block_writes[block] += 1
    shadow.put(block, new_payload)
    return n


@dataclass(frozen=True)
class WearMetrics:
    touched_cells: int
    max_flips: int
    mean_flips: float
    cv: float

    def lines(self) -> List[str]:
        return [
            f"; touched_cells {self.touched_cells}",
            f"; max_flips {self.max_flips}",
            f"; mean_flips {self.mean_flips:.6f}",
            f"; cv {self.cv:.6f}",
        ]


def wear_metrics(counters: WearCounters) -> WearMetrics:
    """Max, mean and coefficient of variation over touched cells only."""
    values = [v for v in counters.flips.values() if v > 0]
    if not values:
        return WearMetrics(0, 0, 0.0, 0.0)
    mean = statistics.fmean(values)
    cv = statistics.pstdev(values) / mean
    return WearMetrics(len(values), max(values), mean, cv)


@dataclass(frozen=True)
class EnergyEvent:
    source: str
    nj: float


class EnergyLedger:
    SOURCES = ("memory", "rowclone", "cache", "cim")

    def __init__(self):
        self.by_source: Dict[str, float] = {s: 0.0 for s in self.SOURCES}
        self.events = 0

    def add(self, event: Optional[EnergyEvent]) -> None:
        if event is None:
            return
        if event.source not in self.by_source:
            raise KeyError(f"unknown energy source {event.source!r}")
        self.by_source[event.source] += event.nj
        self.events += 1

    def extend(self, events: Iterable[EnergyEvent]) -> None:
        for e in events:
            self.add(e)

    @property
    def total(self) -> float:
        return sum(self.by_source.values())

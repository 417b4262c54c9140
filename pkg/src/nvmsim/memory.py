"""Channel/rank/bank geometry, address decoding and the per-bank timing model.

All times are controller cycles. The checker enforces:

* ACT -> READ/WRITE >= tRCD (same bank)
* ACT -> PRE >= tRAS (same bank)
* PRE -> ACT >= tRP (same bank)
* ACT -> ACT >= tRC (same bank)
* ACT -> ACT >= tRRD (same rank)
* at most four ACTs per rank in any tFAW window
* READ/WRITE occupy the channel data bus for tBURST; a PRE may not cut a burst
* NVM only, rank scope: WRITE end -> WRITE >= tWWD, WRITE end -> ACT >= tWAD,
  ACT -> WRITE >= tAWD

A RowClone FPM is ACT(src), RC_ACT(dst) no earlier than tRCD later, then PRE
no earlier than tRCD after RC_ACT. RC_ACT counts as an activation for the
rank-level rules (tRRD, tFAW, tWAD) but not for the same-bank tRC/tRAS rules.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, Optional, Tuple

from .errors import (
    AddressOutOfRange,
    CrossSubarrayClone,
    IllegalCommandForState,
    TimingViolation,
    ValidationError,
)
from .wear import EnergyEvent

NEVER = -(1 << 60)


def _is_pow2(n: int) -> bool:
    return n >= 1 and not n & (n - 1)


@dataclass(frozen=True)
class Geometry:
    channels: int = 1
    ranks_per_channel: int = 1
    banks_per_rank: int = 8
    subarrays_per_bank: int = 8
    rows_per_subarray: int = 1024
    columns_per_row: int = 512
    device_width_bits: int = 64
    burst_length: int = 8
    block_size_bytes: int = 64

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not isinstance(value, int) or value < 1:
                raise ValidationError(f"geometry {name} must be a positive integer, got {value!r}")
            if not _is_pow2(value):
                raise ValidationError(f"geometry {name}={value} is not a power of two")
        if self.device_width_bits % 8:
            raise ValidationError("device_width_bits must be a multiple of 8")
        if self.row_bytes < self.block_size_bytes:
            raise ValidationError(
                f"row capacity {self.row_bytes} B is smaller than block size {self.block_size_bytes} B")

    @property
    def row_bytes(self) -> int:
        return self.columns_per_row * self.device_width_bits // 8

    @property
    def blocks_per_row(self) -> int:
        return self.row_bytes // self.block_size_bytes

    @property
    def rows_per_bank(self) -> int:
        return self.subarrays_per_bank * self.rows_per_subarray

    @property
    def channel_bytes(self) -> int:
        return (self.ranks_per_channel * self.banks_per_rank
                * self.rows_per_bank * self.row_bytes)

    @property
    def capacity(self) -> int:
        return self.channels * self.channel_bytes

    def single_channel(self) -> "Geometry":
        return Geometry(**{**self.__dict__, "channels": 1})


class MemKind(enum.Enum):
    DRAM = "DRAM"
    NVM = "NVM"


@dataclass(frozen=True)
class TimingProfile:
    kind: MemKind
    tRCD: int
    tRAS: int
    tRP: int
    tRC: int
    tBURST: int
    tFAW: int
    tRRD: int
    tWWD: int = 0
    tWAD: int = 0
    tAWD: int = 0
    clock_period_ns: float = 1.0
    E_act: float = 0.0
    E_read_burst: float = 0.0
    E_write_burst: float = 0.0
    E_rowclone: Optional[float] = None
    E_rowzero: Optional[float] = None
    name: str = "default"

    def __post_init__(self):
        for key in ("tRCD", "tRAS", "tRP", "tRC", "tBURST", "tFAW", "tRRD",
                    "tWWD", "tWAD", "tAWD"):
            if getattr(self, key) < 0:
                raise ValidationError(f"{key} must be >= 0")
        if self.tFAW < self.tRRD:
            raise ValidationError("tFAW must be >= tRRD")
        if self.clock_period_ns <= 0:
            raise ValidationError("clock period must be positive")
        if self.kind is MemKind.DRAM:
            if self.tRC != self.tRAS + self.tRP:
                raise ValidationError(
                    f"DRAM requires tRC == tRAS + tRP ({self.tRC} != {self.tRAS}+{self.tRP})")
            if self.tRAS < self.tRCD:
                raise ValidationError("DRAM requires tRAS >= tRCD")
            if self.tWWD or self.tWAD or self.tAWD:
                raise ValidationError("tWWD/tWAD/tAWD apply to NVM profiles only")

    @property
    def rowclone_energy(self) -> float:
        return 2 * self.E_act if self.E_rowclone is None else self.E_rowclone

    @property
    def rowzero_energy(self) -> float:
        return self.rowclone_energy if self.E_rowzero is None else self.E_rowzero

    def ns(self, cycles: float) -> float:
        return cycles * self.clock_period_ns


def read_cycle_cycles(profile: TimingProfile) -> int:
    """Row cycle for a read: tRC for DRAM (destructive read), tRCD + tBURST for NVM."""
    if profile.kind is MemKind.DRAM:
        return profile.tRC
    return profile.tRCD + profile.tBURST


# ---------------------------------------------------------------------------
# address mapping


@dataclass(frozen=True)
class DecodedAddress:
    channel: int = 0
    rank: int = 0
    bank: int = 0
    subarray: int = 0
    row: int = 0
    column: int = 0
    offset: int = 0

    @property
    def bank_row(self) -> int:
        return self.row


class AddressCodec:
    """RoRaBaCoCh mapping: from the least significant end the fields are
    byte offset within a block, channel, column (in blocks), bank, rank, row.

    ``row`` in the decoded address is the row within its subarray; the
    subarray index sits directly above it, so subarray-major row numbering
    inside a bank is ``subarray * rows_per_subarray + row``.
    """

    SCHEMES = ("RoRaBaCoCh",)

    def __init__(self, geometry: Geometry, scheme: str = "RoRaBaCoCh"):
        if scheme not in self.SCHEMES:
            raise ValidationError(f"unsupported address mapping {scheme!r}")
        g = geometry
        self.geometry = g
        widths = [
            ("offset", g.block_size_bytes),
            ("channel", g.channels),
            ("column", g.blocks_per_row),
            ("bank", g.banks_per_rank),
            ("rank", g.ranks_per_channel),
            ("row", g.rows_per_subarray),
            ("subarray", g.subarrays_per_bank),
        ]
        self._fields = []
        shift = 0
        for name, count in widths:
            bits = count.bit_length() - 1
            self._fields.append((name, shift, count - 1))
            shift += bits
        self.capacity = 1 << shift
        assert self.capacity == g.capacity

    def decode(self, addr: int) -> DecodedAddress:
        if not 0 <= addr < self.capacity:
            raise AddressOutOfRange(f"address {addr:#x} outside capacity {self.capacity:#x}")
        return DecodedAddress(**{n: (addr >> s) & m for n, s, m in self._fields})

    def encode(self, d: DecodedAddress) -> int:
        addr = 0
        for name, shift, mask in self._fields:
            v = getattr(d, name)
            if not 0 <= v <= mask:
                raise AddressOutOfRange(f"{name}={v} out of range")
            addr |= v << shift
        return addr


def decode_address(addr: int, geometry: Geometry, scheme: str = "RoRaBaCoCh") -> DecodedAddress:
    return AddressCodec(geometry, scheme).decode(addr)


# ---------------------------------------------------------------------------
# bank / rank state machines


class Cmd(enum.Enum):
    ACT = "ACT"
    READ = "READ"
    WRITE = "WRITE"
    PRE = "PRE"
    RC_ACT = "RC_ACT"


@dataclass
class BankState:
    open_row: Optional[int] = None
    busy_until: int = 0
    last_activate: int = NEVER
    last_precharge: int = NEVER
    last_rc_act: int = NEVER
    last_column_end: int = NEVER
    last_write_end: int = NEVER
    clone_pending: bool = False


@dataclass
class RankState:
    activate_history: Deque[int] = field(default_factory=lambda: deque(maxlen=4))
    last_activate: int = NEVER
    last_write_end: int = NEVER


@dataclass
class BusState:
    free_at: int = 0


def earliest_issue(bank: BankState, rank: RankState, cmd: Cmd, now: int,
                   profile: TimingProfile, bus: Optional[BusState] = None) -> int:
    """Smallest cycle >= now at which ``cmd`` satisfies every timing rule."""
    p = profile
    nvm = p.kind is MemKind.NVM
    t = now
    if cmd is Cmd.ACT or cmd is Cmd.RC_ACT:
        if cmd is Cmd.ACT:
            if bank.open_row is not None:
                raise IllegalCommandForState("ACT to a bank with an open row")
            t = max(t, bank.last_precharge + p.tRP, bank.last_activate + p.tRC)
        else:
            if not bank.clone_pending:
                raise IllegalCommandForState("RC_ACT without a preceding clone ACT")
            t = max(t, bank.last_activate + p.tRCD)
        t = max(t, rank.last_activate + p.tRRD)
        if len(rank.activate_history) == 4:
            t = max(t, rank.activate_history[0] + p.tFAW)
        if nvm:
            t = max(t, rank.last_write_end + p.tWAD)
    elif cmd is Cmd.READ or cmd is Cmd.WRITE:
        if bank.open_row is None or bank.clone_pending:
            raise IllegalCommandForState(f"{cmd.value} needs an open row")
        t = max(t, bank.last_activate + p.tRCD, bank.last_rc_act + p.tRCD)
        if bus is not None:
            t = max(t, bus.free_at)
        if cmd is Cmd.WRITE and nvm:
            t = max(t, rank.last_write_end + p.tWWD, rank.last_activate + p.tAWD)
    elif cmd is Cmd.PRE:
        if bank.open_row is None or bank.clone_pending:
            raise IllegalCommandForState("PRE needs an open row and no clone in flight")
        t = max(t, bank.last_activate + p.tRAS, bank.last_rc_act + p.tRCD,
                bank.last_column_end)
    return t


def issue_command(bank: BankState, rank: RankState, cmd: Cmd, cycle: int,
                  profile: TimingProfile, bus: Optional[BusState] = None, *,
                  row: Optional[int] = None, clone: bool = False,
                  zero: bool = False) -> Optional[EnergyEvent]:
    """Apply ``cmd`` at ``cycle`` and return its energy event.

    ``clone`` marks an ACT as the source activation of a RowClone (its energy
    is folded into the RC_ACT). ``zero`` selects the bulk-zero energy for RC_ACT.
    """
    earliest = earliest_issue(bank, rank, cmd, cycle, profile, bus)
    if earliest > cycle:
        raise TimingViolation(f"{cmd.value} at {cycle}, earliest legal {earliest}")
    p = profile
    event = None
    if cmd is Cmd.ACT:
        if row is None:
            raise IllegalCommandForState("ACT needs a row")
        bank.open_row = row
        bank.last_activate = cycle
        bank.clone_pending = clone
        rank.last_activate = cycle
        rank.activate_history.append(cycle)
        bank.busy_until = max(bank.busy_until, cycle + p.tRCD)
        if not clone:
            event = EnergyEvent("memory", p.E_act)
    elif cmd is Cmd.RC_ACT:
        if row is not None:
            bank.open_row = row
        bank.clone_pending = False
        bank.last_rc_act = cycle
        rank.last_activate = cycle
        rank.activate_history.append(cycle)
        bank.busy_until = max(bank.busy_until, cycle + p.tRCD)
        event = EnergyEvent("rowclone", p.rowzero_energy if zero else p.rowclone_energy)
    elif cmd is Cmd.READ or cmd is Cmd.WRITE:
        end = cycle + p.tBURST
        bank.last_column_end = end
        bank.busy_until = max(bank.busy_until, end)
        if bus is not None:
            bus.free_at = end
        if cmd is Cmd.WRITE:
            bank.last_write_end = end
            rank.last_write_end = end
            event = EnergyEvent("memory", p.E_write_burst)
        else:
            event = EnergyEvent("memory", p.E_read_burst)
    elif cmd is Cmd.PRE:
        bank.open_row = None
        bank.last_precharge = cycle
        bank.busy_until = max(bank.busy_until, cycle + p.tRP)
    return event


# ---------------------------------------------------------------------------
# RowClone


def _same_subarray(a: DecodedAddress, b: DecodedAddress) -> bool:
    return (a.channel, a.rank, a.bank, a.subarray) == (b.channel, b.rank, b.bank, b.subarray)


def rowclone_fpm(src: DecodedAddress, dst: DecodedAddress, now: int,
                 profile: TimingProfile, *, zero: bool = False,
                 storage: Optional["RowStorage"] = None) -> Tuple[int, EnergyEvent]:
    """Fast Parallel Mode copy of one row on an idle, precharged bank.

    Replays ACT(src), RC_ACT(dst), PRE through the bank model and returns the
    cycles until the bank is precharged again, plus the clone's energy. On a
    profile where tRAS <= 2*tRCD this is exactly ``2*tRCD + tRP``.
    """
    if not _same_subarray(src, dst):
        raise CrossSubarrayClone(
            "source and destination rows must share channel, rank, bank and subarray")
    bank, rank = BankState(), RankState()
    issue_command(bank, rank, Cmd.ACT, now, profile, row=src.row, clone=True)
    t = earliest_issue(bank, rank, Cmd.RC_ACT, now, profile)
    event = issue_command(bank, rank, Cmd.RC_ACT, t, profile, row=dst.row, zero=zero)
    t = earliest_issue(bank, rank, Cmd.PRE, t, profile)
    issue_command(bank, rank, Cmd.PRE, t, profile)
    if storage is not None:
        if zero:
            storage.zero_row(dst)
        else:
            storage.copy_row(src, dst)
    return t + profile.tRP - now, event


def zero_row_of(dst: DecodedAddress) -> DecodedAddress:
    """The reserved all-zero row (row 0) of ``dst``'s subarray."""
    return DecodedAddress(dst.channel, dst.rank, dst.bank, dst.subarray, 0, 0, 0)


def rowclone_zero(dst: DecodedAddress, now: int, profile: TimingProfile, *,
                  storage: Optional["RowStorage"] = None) -> Tuple[int, EnergyEvent]:
    return rowclone_fpm(zero_row_of(dst), dst, now, profile, zero=True, storage=storage)


class RowStorage:
    """Sparse payload store keyed by (channel, rank, bank, subarray, row, column).

    Row 0 of every subarray is the reserved zero row; writes to it are ignored.
    """

    def __init__(self, geometry: Geometry):
        self.geometry = geometry
        self.block = geometry.block_size_bytes
        self._rows: Dict[Tuple[int, ...], Dict[int, bytes]] = {}
        self.ignored_zero_row_writes = 0

    @staticmethod
    def _key(d: DecodedAddress):
        return (d.channel, d.rank, d.bank, d.subarray, d.row)

    def write(self, d: DecodedAddress, payload: bytes) -> None:
        if d.row == 0:
            self.ignored_zero_row_writes += 1
            return
        if len(payload) != self.block:
            raise ValueError(f"payload is {len(payload)} bytes, block is {self.block}")
        self._rows.setdefault(self._key(d), {})[d.column] = bytes(payload)

    def read(self, d: DecodedAddress) -> bytes:
        return self._rows.get(self._key(d), {}).get(d.column, bytes(self.block))

    def read_row(self, d: DecodedAddress) -> bytes:
        cols = self._rows.get(self._key(d), {})
        zero = bytes(self.block)
        return b"".join(cols.get(c, zero) for c in range(self.geometry.blocks_per_row))

    def copy_row(self, src: DecodedAddress, dst: DecodedAddress) -> None:
        if dst.row == 0:
            return
        if src.row == 0:
            self._rows.pop(self._key(dst), None)
        else:
            self._rows[self._key(dst)] = dict(self._rows.get(self._key(src), {}))

    def zero_row(self, dst: DecodedAddress) -> None:
        self._rows.pop(self._key(dst), None)

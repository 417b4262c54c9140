"""Memory controller: transaction queues, scheduling policies and statistics.

One :class:`ChannelController` per channel. :class:`MemorySystem` routes
requests to channels by address range, drives all channels from one global
clock and skips idle cycles by jumping to the next cycle at which any
command could become issuable.

Policies:

``FCFS``
    Only the oldest transaction may issue commands. Banks are run closed-page
    (precharged right after each access), so no row-buffer hit or miss is
    ever recorded.
``FRFCFS``
    Open-page. Among transactions whose next command can issue this cycle,
    row hits (column commands) win, ties broken by age; otherwise the oldest
    issuable command goes.
``FRFCFS_WQF``
    Separate read and write queues. Reads are served while any are queued;
    writes go when the read queue is empty or while draining. Draining starts
    when write occupancy reaches the high watermark and stops at the low one.
"""

from __future__ import annotations

import bisect
import enum
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .errors import CrossSubarrayClone, QueueFull, UnmappedAddress, ValidationError
from .memory import (
    AddressCodec,
    BankState,
    BusState,
    Cmd,
    DecodedAddress,
    Geometry,
    MemKind,
    RankState,
    RowStorage,
    TimingProfile,
    earliest_issue,
    issue_command,
)
from .trace import MemoryRequest, Op
from .wear import EnergyLedger

log = logging.getLogger(__name__)

INF = float("inf")


class Policy(enum.Enum):
    FCFS = "FCFS"
    FRFCFS = "FRFCFS"
    FRFCFS_WQF = "FRFCFS-WQF"

    @classmethod
    def parse(cls, text: str) -> "Policy":
        norm = text.strip().upper().replace("_", "-")
        for p in cls:
            if p.value == norm:
                return p
        raise ValueError(f"unknown scheduling policy {text!r}")


@dataclass(frozen=True)
class ChannelRange:
    start: int
    end: int
    channel: int
    profile: str = "default"

    def __contains__(self, addr: int) -> bool:
        return self.start <= addr < self.end


@dataclass
class ControllerConfig:
    policy: Policy = Policy.FRFCFS
    read_queue_capacity: int = 32
    write_queue_capacity: int = 32
    wq_high_watermark: Optional[int] = None
    wq_low_watermark: Optional[int] = None
    channel_ranges: List[ChannelRange] = field(default_factory=list)
    dram_rowclone: bool = False

    def __post_init__(self):
        if self.wq_high_watermark is None:
            self.wq_high_watermark = max(1, (self.write_queue_capacity * 4) // 5)
        if self.wq_low_watermark is None:
            self.wq_low_watermark = self.write_queue_capacity // 5
        self.validate()

    def validate(self) -> None:
        if self.read_queue_capacity < 1 or self.write_queue_capacity < 1:
            raise ValidationError("queue capacities must be >= 1")
        if not 0 <= self.wq_low_watermark < self.wq_high_watermark <= self.write_queue_capacity:
            raise ValidationError(
                "watermarks must satisfy 0 <= low < high <= write queue capacity "
                f"(low={self.wq_low_watermark}, high={self.wq_high_watermark}, "
                f"capacity={self.write_queue_capacity})")
        ranges = sorted(self.channel_ranges, key=lambda r: r.start)
        expected = 0
        for r in ranges:
            if r.end <= r.start:
                raise ValidationError(f"empty channel range [{r.start:#x}, {r.end:#x})")
            if r.start != expected:
                raise ValidationError(
                    f"channel ranges must be disjoint and contiguous from 0; gap or overlap at {r.start:#x}")
            expected = r.end
        if len({r.channel for r in ranges}) != len(ranges):
            raise ValidationError("each channel may own only one address range")


_COUNTERS = ("rb_hits", "rb_miss", "reads", "writes", "rowclones", "dropped_rowclones")


@dataclass
class ControllerStats:
    rb_hits: int = 0
    rb_miss: int = 0
    reads: int = 0
    writes: int = 0
    rowclones: int = 0
    dropped_rowclones: int = 0
    latency_sum: int = 0
    total_latency_sum: int = 0

    @property
    def completions(self) -> int:
        return self.reads + self.writes + self.rowclones

    @property
    def averageLatency(self) -> float:
        return self.latency_sum / self.completions if self.completions else 0.0

    @property
    def averageTotalLatency(self) -> float:
        return self.total_latency_sum / self.completions if self.completions else 0.0

    def complete(self, op: Op, arrival: int, first_issue: int, completion: int) -> None:
        if op is Op.READ:
            self.reads += 1
        elif op is Op.WRITE:
            self.writes += 1
        else:
            self.rowclones += 1
        self.latency_sum += completion - first_issue
        self.total_latency_sum += completion - arrival

    def __iadd__(self, other: "ControllerStats"):
        for name in _COUNTERS + ("latency_sum", "total_latency_sum"):
            setattr(self, name, getattr(self, name) + getattr(other, name))
        return self

    def as_dict(self) -> Dict[str, float]:
        d: Dict[str, float] = {k: getattr(self, k) for k in _COUNTERS}
        d["averageLatency"] = self.averageLatency
        d["averageTotalLatency"] = self.averageTotalLatency
        return d


@dataclass(frozen=True)
class Command:
    cycle: int
    channel: int
    rank: int
    bank: int
    cmd: Cmd
    row: Optional[int]


@dataclass(eq=False)
class Transaction:
    req: MemoryRequest
    seq: int
    addr: DecodedAddress
    row: int
    dst: Optional[DecodedAddress] = None
    dst_row: Optional[int] = None
    zero: bool = False
    arrival: int = 0
    first_issue: Optional[int] = None
    activated: bool = False
    stage: int = 0  # RowClone progress: 0 idle, 1 src open, 2 dst open
    bi: int = 0     # bank index within the channel

    def __post_init__(self):
        self.op: Op = self.req.op


class ChannelController:
    def __init__(self, channel: int, geometry: Geometry, profile: TimingProfile,
                 config: ControllerConfig, ledger: Optional[EnergyLedger] = None,
                 storage: Optional[RowStorage] = None,
                 on_command: Optional[Callable[[Command], None]] = None):
        self.channel = channel
        self.geometry = geometry
        self.profile = profile
        self.config = config
        self.policy = config.policy
        self.ledger = ledger if ledger is not None else EnergyLedger()
        self.storage = storage
        self.on_command = on_command
        self.ranks = [RankState() for _ in range(geometry.ranks_per_channel)]
        self.banks = [BankState() for _ in range(geometry.ranks_per_channel * geometry.banks_per_rank)]
        self.bus = BusState()
        self.claims: List[Optional[Transaction]] = [None] * len(self.banks)
        self.auto_pre = [False] * len(self.banks)
        self.read_q: List[Transaction] = []
        self.write_q: List[Transaction] = []
        self.draining = False
        self.stats = ControllerStats()
        self.energy_nj = 0.0
        self.last_completion = 0
        self._next = INF

    # -- queues -------------------------------------------------------------

    def _queue_for(self, op: Op) -> Tuple[List[Transaction], int]:
        if op is Op.WRITE and self.policy is Policy.FRFCFS_WQF:
            return self.write_q, self.config.write_queue_capacity
        return self.read_q, self.config.read_queue_capacity

    def can_accept(self, op: Op) -> bool:
        q, cap = self._queue_for(op)
        return len(q) < cap

    def enqueue(self, txn: Transaction, now: int) -> None:
        q, cap = self._queue_for(txn.op)
        if len(q) >= cap:
            raise QueueFull(f"channel {self.channel} queue full ({cap})")
        txn.arrival = now
        txn.bi = txn.addr.rank * self.geometry.banks_per_rank + txn.addr.bank
        q.append(txn)
        self._next = min(self._next, now)

    @property
    def pending(self) -> int:
        return len(self.read_q) + len(self.write_q)

    def idle(self) -> bool:
        return not self.read_q and not self.write_q and not any(self.auto_pre)

    # -- scheduling ---------------------------------------------------------

    def _bank_index(self, txn: Transaction) -> int:
        return txn.addr.rank * self.geometry.banks_per_rank + txn.addr.bank

    def _next_cmd(self, txn: Transaction, bi: int) -> Optional[Cmd]:
        bank = self.banks[bi]
        claim = self.claims[bi]
        if txn.op is Op.ROWCLONE:
            if txn.stage == 1:
                return Cmd.RC_ACT
            if txn.stage == 2:
                return Cmd.PRE
            if claim is not None:
                return None
            return Cmd.ACT if bank.open_row is None else Cmd.PRE
        if claim is not None and claim is not txn and claim.op is Op.ROWCLONE:
            return None
        if bank.open_row is None:
            return Cmd.ACT
        if bank.open_row == txn.row:
            if self.policy is Policy.FCFS and claim is not txn:
                # closed page: never reuse a row someone else opened
                return Cmd.PRE if claim is None else None
            return Cmd.READ if txn.op is Op.READ else Cmd.WRITE
        return Cmd.PRE if claim is None else None

    def _candidates(self) -> List[Transaction]:
        claimed = [c for c in self.claims if c is not None]
        if self.policy is Policy.FCFS:
            head = self.read_q[:1]
            return head + [c for c in claimed if c not in head]
        if self.policy is Policy.FRFCFS:
            return self.read_q
        w = len(self.write_q)
        if self.draining and w <= self.config.wq_low_watermark:
            self.draining = False
        elif not self.draining and w >= self.config.wq_high_watermark:
            self.draining = True
        if self.draining or not self.read_q:
            pool = self.write_q
        else:
            pool = self.read_q
        extra = [c for c in claimed if c not in pool]
        if not extra:
            return pool
        return sorted(pool + extra, key=lambda t: t.seq)

    def tick(self, now: int) -> List[Command]:
        """Issue at most one command at ``now`` and return it."""
        if now < self._next:
            return []
        p = self.profile
        cache: Dict[Tuple[int, Cmd], int] = {}
        next_cmd = self._next_cmd
        nxt = INF

        def when(bi: int, cmd: Cmd) -> int:
            key = (bi, cmd)
            t = cache.get(key)
            if t is None:
                bank = self.banks[bi]
                t = earliest_issue(bank, self.ranks[bi // self.geometry.banks_per_rank],
                                   cmd, now, p, self.bus)
                cache[key] = t
            return t

        chosen: Optional[Tuple[Transaction, int, Cmd]] = None
        fallback: Optional[Tuple[Transaction, int, Cmd]] = None
        banks = self.banks
        for txn in self._candidates():
            bi = txn.bi
            if fallback is not None and txn.stage == 0 and (
                    txn.op is Op.ROWCLONE or banks[bi].open_row != txn.row):
                # only a column or clone-stage command could still beat the fallback
                continue
            cmd = next_cmd(txn, bi)
            if cmd is None:
                continue
            t = when(bi, cmd)
            if t > now:
                nxt = min(nxt, t)
                continue
            if cmd is Cmd.ACT or (cmd is Cmd.PRE and txn.stage != 2):
                if fallback is None:
                    fallback = (txn, bi, cmd)
                if self.policy is Policy.FCFS:
                    break
                continue
            chosen = (txn, bi, cmd)
            break
        if chosen is None:
            chosen = fallback

        if chosen is None and self.policy is Policy.FCFS:
            for bi, pending in enumerate(self.auto_pre):
                if pending and self.claims[bi] is None:
                    t = when(bi, Cmd.PRE)
                    if t == now:
                        self._next = now + 1
                        return [self._issue(None, bi, Cmd.PRE, now)]
                    nxt = min(nxt, t)

        if chosen is None:
            self._next = nxt
            return []
        txn, bi, cmd = chosen
        self._next = now + 1
        return [self._issue(txn, bi, cmd, now)]

    def next_event(self) -> float:
        return self._next

    # -- issue / retire -----------------------------------------------------

    def _issue(self, txn: Optional[Transaction], bi: int, cmd: Cmd, now: int) -> Command:
        bank = self.banks[bi]
        rank = self.ranks[bi // self.geometry.banks_per_rank]
        p = self.profile
        row = None
        kwargs = {}
        if cmd is Cmd.ACT:
            row = txn.row
            if txn.op is Op.ROWCLONE:
                kwargs["clone"] = True
        elif cmd is Cmd.RC_ACT:
            row = txn.dst_row
            kwargs["zero"] = txn.zero
        event = issue_command(bank, rank, cmd, now, p, self.bus, row=row, **kwargs)
        if cmd is Cmd.PRE:
            self.auto_pre[bi] = False
        if event is not None:
            self.ledger.add(event)
            self.energy_nj += event.nj

        if txn is not None:
            if txn.first_issue is None:
                txn.first_issue = now
            if cmd is Cmd.ACT:
                self.claims[bi] = txn
                txn.activated = True
                if txn.op is Op.ROWCLONE:
                    txn.stage = 1
            elif cmd is Cmd.RC_ACT:
                txn.stage = 2
            elif cmd is Cmd.PRE and txn.stage == 2:
                self.claims[bi] = None
                self._retire(txn, now + p.tRP)
            elif cmd is Cmd.READ or cmd is Cmd.WRITE:
                if self.claims[bi] is txn:
                    self.claims[bi] = None
                if self.policy is Policy.FCFS:
                    self.auto_pre[bi] = True
                elif txn.activated:
                    self.stats.rb_miss += 1
                else:
                    self.stats.rb_hits += 1
                self._retire(txn, now + p.tBURST)

        c = Command(now, self.channel, bi // self.geometry.banks_per_rank,
                    bi % self.geometry.banks_per_rank, cmd, row)
        if self.on_command is not None:
            self.on_command(c)
        return c

    def _retire(self, txn: Transaction, completion: int) -> None:
        q = self.write_q if txn in self.write_q else self.read_q
        q.remove(txn)
        self.stats.complete(txn.op, txn.arrival, txn.first_issue, completion)
        self.last_completion = max(self.last_completion, completion)
        if self.storage is not None:
            if txn.op is Op.WRITE:
                self.storage.write(txn.addr, txn.req.payload(self.geometry.block_size_bytes))
            elif txn.op is Op.ROWCLONE:
                if txn.zero:
                    self.storage.zero_row(txn.dst)
                else:
                    self.storage.copy_row(txn.addr, txn.dst)


# ---------------------------------------------------------------------------


@dataclass
class RunReport:
    stats: ControllerStats
    channel_stats: Dict[int, ControllerStats]
    cycles: int
    energy: EnergyLedger
    channel_energy: Dict[int, float]
    exceeded: bool = False
    requests: int = 0
    profiles: Dict[int, str] = field(default_factory=dict)

    def as_dict(self) -> Dict[str, float]:
        d = self.stats.as_dict()
        d["simCycles"] = self.cycles
        d["requests"] = self.requests
        d["completed"] = self.stats.completions
        d["maxCyclesExceeded"] = int(self.exceeded)
        d["totalEnergy_nJ"] = self.energy.total
        d["memoryEnergy_nJ"] = self.energy.by_source["memory"]
        d["rowcloneEnergy_nJ"] = self.energy.by_source["rowclone"]
        for ch in sorted(self.channel_stats):
            for k, v in self.channel_stats[ch].as_dict().items():
                d[f"channel{ch}.{k}"] = v
            d[f"channel{ch}.energy_nJ"] = self.channel_energy[ch]
        return d


class MemorySystem:
    """All channels of one simulated memory, fed from a request stream."""

    def __init__(self, geometry: Geometry, profiles: Dict[str, TimingProfile],
                 config: ControllerConfig, *, payload: bool = False,
                 writer=None, on_command: Optional[Callable[[Command], None]] = None):
        self.geometry = geometry
        self.profiles = profiles
        self.config = config
        self.writer = writer
        self.ledger = EnergyLedger()
        self.storage = RowStorage(geometry) if payload else None
        self._seq = 0
        self.dropped = ControllerStats()
        self.ranges = sorted(config.channel_ranges, key=lambda r: r.start)
        self._starts = [r.start for r in self.ranges]
        if self.ranges:
            local = geometry.single_channel()
            self.codec = AddressCodec(local)
            for r in self.ranges:
                if r.profile not in profiles:
                    raise ValidationError(f"channel range names unknown profile {r.profile!r}")
                if r.end - r.start > local.capacity:
                    raise ValidationError(
                        f"range [{r.start:#x}, {r.end:#x}) exceeds per-channel capacity {local.capacity:#x}")
            chan_profiles = {r.channel: r.profile for r in self.ranges}
        else:
            self.codec = AddressCodec(geometry)
            if "default" not in profiles:
                raise ValidationError("no default timing profile")
            chan_profiles = {c: "default" for c in range(geometry.channels)}
        self.channel_profiles = chan_profiles
        self.channels: Dict[int, ChannelController] = {
            ch: ChannelController(ch, geometry, profiles[name], config, self.ledger,
                                  self.storage, on_command)
            for ch, name in sorted(chan_profiles.items())
        }

    # -- routing ------------------------------------------------------------

    def route(self, addr: int) -> Tuple[int, str]:
        if not self.ranges:
            d = self.codec.decode(addr)
            return d.channel, "default"
        i = bisect.bisect_right(self._starts, addr) - 1
        if i < 0 or addr not in self.ranges[i]:
            raise UnmappedAddress(f"address {addr:#x} is not in any channel range")
        r = self.ranges[i]
        return r.channel, r.profile

    def locate(self, addr: int) -> DecodedAddress:
        ch, _ = self.route(addr)
        if not self.ranges:
            return self.codec.decode(addr)
        r = self.ranges[bisect.bisect_right(self._starts, addr) - 1]
        d = self.codec.decode(addr - r.start)
        return DecodedAddress(ch, d.rank, d.bank, d.subarray, d.row, d.column, d.offset)

    def bank_row(self, d: DecodedAddress) -> int:
        return d.subarray * self.geometry.rows_per_subarray + d.row

    def read_block(self, addr: int) -> bytes:
        if self.storage is None:
            raise RuntimeError("payload simulation is disabled")
        return self.storage.read(self.locate(addr))

    def _make_txn(self, req: MemoryRequest) -> Optional[Transaction]:
        """Build a transaction, or return None for a RowClone that must be dropped."""
        d = self.locate(req.address)
        txn = Transaction(req, self._seq, d, self.bank_row(d))
        self._seq += 1
        if req.op is Op.ROWCLONE:
            dst = self.locate(req.address2)
            ch = self.channels[d.channel]
            if ch.profile.kind is MemKind.DRAM and not self.config.dram_rowclone:
                log.debug("dropping RowClone on DRAM channel %d", d.channel)
                return None
            if (d.channel, d.rank, d.bank, d.subarray) != (dst.channel, dst.rank, dst.bank, dst.subarray):
                log.debug("dropping cross-subarray RowClone %#x -> %#x", req.address, req.address2)
                return None
            txn.dst = dst
            txn.dst_row = self.bank_row(dst)
            txn.zero = d.row == 0
        return txn

    # -- main loop ----------------------------------------------------------

    def run(self, requests: Sequence[MemoryRequest], max_cycles: Optional[int] = None) -> RunReport:
        pending = list(requests)
        head = 0
        now = 0
        exceeded = False
        limit = INF if max_cycles is None else max_cycles
        blocked_txn: Optional[Transaction] = None
        while True:
            while head < len(pending) and pending[head].arrival_cycle <= now:
                req = pending[head]
                txn = blocked_txn or self._make_txn(req)
                if txn is None:
                    self.dropped.dropped_rowclones += 1
                    ch = self.locate(req.address).channel
                    self.channels[ch].stats.dropped_rowclones += 1
                    self._feed_writer(req)
                    head += 1
                    continue
                ch = self.channels[txn.addr.channel]
                if not ch.can_accept(txn.op):
                    blocked_txn = txn
                    break
                blocked_txn = None
                ch.enqueue(txn, now)
                self._feed_writer(req)
                head += 1

            nxt = INF
            for ch in self.channels.values():
                ch.tick(now)
                nxt = min(nxt, ch.next_event())
            if head < len(pending) and blocked_txn is None:
                nxt = min(nxt, max(pending[head].arrival_cycle, now + 1))
            if nxt == INF:
                if head >= len(pending):
                    break
                # blocked on a full queue with nothing schedulable cannot happen
                raise RuntimeError("controller deadlock")
            if nxt > limit:
                exceeded = True
                break
            now = int(nxt)
        return self._report(requests, exceeded, now)

    def _feed_writer(self, req: MemoryRequest) -> None:
        if self.writer is not None:
            accepted = self.writer.on_access(req)
            if not accepted:
                raise RuntimeError("trace writer rejected an access")

    def _report(self, requests, exceeded: bool, now: int) -> RunReport:
        total = ControllerStats()
        for ch in self.channels.values():
            total += ch.stats
        cycles = max([ch.last_completion for ch in self.channels.values()] + [0])
        if exceeded:
            cycles = max(cycles, now)
        return RunReport(
            stats=total,
            channel_stats={c: ch.stats for c, ch in self.channels.items()},
            cycles=cycles,
            energy=self.ledger,
            channel_energy={c: ch.energy_nj for c, ch in self.channels.items()},
            exceeded=exceeded,
            requests=len(requests),
            profiles=dict(self.channel_profiles),
        )

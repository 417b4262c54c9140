"""Trace file format and the pluggable trace-writer framework.

Line grammar (whitespace separated)::

    cycle op address [address2] [data] thread_id [pc]

``op`` is ``R``, ``W`` or ``RC``. Addresses and the optional program counter
are hex with a ``0x`` prefix; ``data`` is contiguous hex without prefix;
``thread_id`` is decimal. ``address2`` appears only for ``RC``, ``data``
never does. Lines starting with ``;`` are comments.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, TextIO, Type

from .errors import (
    DataLengthMismatch,
    MalformedLine,
    MisalignedAddress,
    SinkUnavailable,
    TraceError,
    ZeroBlockSize,
)
from .wear import ShadowMemory, WearCounters, record_write, wear_metrics

log = logging.getLogger(__name__)


class Op(enum.Enum):
    READ = "R"
    WRITE = "W"
    ROWCLONE = "RC"


@dataclass(frozen=True)
class MemoryRequest:
    arrival_cycle: int
    op: Op
    address: int
    address2: Optional[int] = None
    data: Optional[bytes] = None
    thread_id: int = 0
    program_counter: Optional[int] = None

    def payload(self, block_size: int) -> bytes:
        """The data bytes, defaulting to zeros when the trace omitted them."""
        return self.data if self.data is not None else bytes(block_size)


def block_index(address: int, block_bytes: int) -> int:
    if block_bytes <= 0:
        raise ZeroBlockSize("block size must be positive")
    if block_bytes & (block_bytes - 1):
        raise ValueError(f"block size {block_bytes} is not a power of two")
    return address // block_bytes


def _hex(token: str, what: str) -> int:
    if not token.lower().startswith("0x"):
        raise MalformedLine(f"{what} {token!r} lacks 0x prefix")
    try:
        return int(token, 16)
    except ValueError:
        raise MalformedLine(f"{what} {token!r} is not hex") from None


def _dec(token: str, what: str) -> int:
    if not token.isdigit():
        raise MalformedLine(f"{what} {token!r} is not a decimal integer")
    return int(token)


def _data(token: str, block_size: int) -> bytes:
    if len(token) % 2:
        raise MalformedLine(f"data token has odd length {len(token)}")
    try:
        data = bytes.fromhex(token)
    except ValueError:
        raise MalformedLine("data token is not hex") from None
    if len(data) != block_size:
        raise DataLengthMismatch(f"data is {len(data)} bytes, expected {block_size}")
    return data


def _aligned(addr: int, block_size: int) -> int:
    if addr % block_size:
        raise MisalignedAddress(f"address {addr:#x} not aligned to {block_size}")
    return addr


def parse_trace_line(line: str, block_size: int) -> MemoryRequest:
    tokens = line.split()
    if not tokens or tokens[0].startswith(";"):
        raise MalformedLine("empty or comment line")
    if len(tokens) < 4:
        raise MalformedLine(f"expected at least 4 tokens, got {len(tokens)}")
    cycle = _dec(tokens[0], "cycle")
    try:
        op = Op(tokens[1].upper())
    except ValueError:
        raise MalformedLine(f"unknown op {tokens[1]!r}") from None
    address = _aligned(_hex(tokens[2], "address"), block_size)
    rest = tokens[3:]

    address2 = data = pc = None
    if op is Op.ROWCLONE:
        address2 = _aligned(_hex(rest[0], "address2"), block_size)
        rest = rest[1:]
    elif len(rest) == 3 or (len(rest) == 2 and not rest[1].lower().startswith("0x")):
        data = _data(rest[0], block_size)
        rest = rest[1:]

    if len(rest) == 2:
        pc = _hex(rest[1], "program counter")
    elif len(rest) != 1:
        raise MalformedLine(f"wrong token count {len(tokens)} for {op.value}")
    thread = _dec(rest[0], "thread id")
    return MemoryRequest(cycle, op, address, address2, data, thread, pc)


def format_trace_line(req: MemoryRequest) -> str:
    parts = [str(req.arrival_cycle), req.op.value, f"{req.address:#x}"]
    if req.op is Op.ROWCLONE:
        parts.append(f"{req.address2:#x}")
    elif req.data is not None:
        parts.append(req.data.hex())
    parts.append(str(req.thread_id))
    if req.program_counter is not None:
        parts.append(f"{req.program_counter:#x}")
    return " ".join(parts)


def iter_trace(lines, block_size: int, path: str = "<trace>") -> Iterator[MemoryRequest]:
    """Parse an iterable of lines, skipping blanks and comments.

    Errors are re-raised with ``path:lineno`` context.
    """
    for lineno, line in enumerate(lines, 1):
        stripped = line.strip()
        if not stripped or stripped.startswith(";"):
            continue
        try:
            yield parse_trace_line(stripped, block_size)
        except TraceError as exc:
            raise type(exc)(f"{path}:{lineno}: {exc}") from exc


def read_trace(path, block_size: int) -> List[MemoryRequest]:
    with open(path, encoding="utf-8") as fh:
        return list(iter_trace(fh, block_size, str(path)))


def write_trace(path, requests) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in requests:
            fh.write(format_trace_line(r) + "\n")


# ---------------------------------------------------------------------------
# trace writers


class TraceWriter:
    """Base for writers fed with every memory access.

    Subclasses override :meth:`on_access` and, if they aggregate, :meth:`body`.
    ``sink`` may be a path or an already open text stream.
    """

    def __init__(self, sink, block_size: int = 64):
        self.block_size = block_size
        self._owns = False
        if isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__"):
            try:
                self._fh: TextIO = open(sink, "w", encoding="utf-8", newline="\n")
            except OSError as exc:
                raise SinkUnavailable(f"cannot open {sink}: {exc}") from exc
            self._owns = True
            self.path = str(sink)
        else:
            self._fh = sink
            self.path = getattr(sink, "name", "<stream>")
        self.accesses = 0
        self.closed = False

    def _emit(self, text: str) -> None:
        try:
            self._fh.write(text + "\n")
        except (OSError, ValueError) as exc:
            raise SinkUnavailable(f"cannot write {self.path}: {exc}") from exc

    def on_access(self, access: MemoryRequest) -> bool:
        self.accesses += 1
        return True

    def body(self) -> List[str]:
        return []

    def finalize(self) -> None:
        if self.closed:
            return
        for line in self.body():
            self._emit(line)
        try:
            self._fh.flush()
            if self._owns:
                self._fh.close()
        except OSError as exc:
            raise SinkUnavailable(f"cannot flush {self.path}: {exc}") from exc
        self.closed = True

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.finalize()


_OP_NAMES = {Op.READ: "READ", Op.WRITE: "WRITE"}


class RawWriter(TraceWriter):
    """Logs ``address | operation | first data byte`` for every access."""

    def on_access(self, access):
        super().on_access(access)
        op = _OP_NAMES.get(access.op, "OTHER")
        first = access.data[0] if access.data else 0
        self._emit(f"{access.address:x} | {op} | {first}")
        return True


class BlockAccessWriter(TraceWriter):
    """Counts writes per block (4 KiB by default); emits ``index | accesses``."""

    def __init__(self, sink, block_size: int = 64, count_block: int = 4096):
        super().__init__(sink, block_size)
        block_index(0, count_block)
        self.count_block = count_block
        self.counts: Dict[int, int] = {}

    def on_access(self, access):
        super().on_access(access)
        if access.op is Op.WRITE:
            idx = block_index(access.address, self.count_block)
            self.counts[idx] = self.counts.get(idx, 0) + 1
        return True

    def body(self):
        return [f"{idx} | {n}" for idx, n in sorted(self.counts.items())]


class BitFlipWriter(TraceWriter):
    """Per-bit flip histogram under data-comparison-write semantics."""

    def __init__(self, sink, block_size: int = 64, dcw: bool = True,
                 read_wear: bool = False):
        super().__init__(sink, block_size)
        self.shadow = ShadowMemory(block_size)
        self.counters = WearCounters(dcw=dcw, read_wear=read_wear)

    def on_access(self, access):
        super().on_access(access)
        block = block_index(access.address, self.block_size)
        if access.op is Op.WRITE:
            record_write(self.shadow, self.counters, block, access.payload(self.block_size))
        elif access.op is Op.READ:
            self.counters.record_read(block)
        return True

    def body(self):
        return self.counters.dump_lines() + wear_metrics(self.counters).lines()


WRITERS: Dict[str, Type[TraceWriter]] = {
    "RawWriter": RawWriter,
    "BlockAccessWriter": BlockAccessWriter,
    "BitFlipWriter": BitFlipWriter,
}


def make_writer(name: str, sink, **kwargs) -> TraceWriter:
    try:
        cls = WRITERS[name]
    except KeyError:
        raise KeyError(f"unknown trace writer {name!r}; known: {sorted(WRITERS)}") from None
    return cls(sink, **kwargs)

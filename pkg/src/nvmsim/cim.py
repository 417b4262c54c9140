"""Compute-in-memory chip model: row registers, a sense-amplifier latch,
multi-row bitwise ops and CMOS periphery ops, plus a small program format.

Program file, one instruction per line (``;`` starts a comment)::

    CTC <row> <hexdata>|<hexbyte>*      copy_to_cim
    CTH <row>                           copy_to_cpu (output recorded)
    AND|OR|XOR r<i> r<j> ...            result into the SA latch
    NOTC <dst> [r<src>|SA] [NOT|MASK]   NOT_COND
    COPY <dst> [r<src>|SA] [rot=<k>]    COPY with optional rotation
    MAC r<i>,r<j>,... r<in>             binarized MAC (output recorded)
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import (
    CiMError,
    CiMProgramError,
    RotationOutOfRange,
    RowOutOfRange,
    TooFewOperands,
)

SA = "SA"
Source = Union[int, str]


class Opcode(enum.Enum):
    AND = "AND"
    OR = "OR"
    XOR = "XOR"
    NOT_COND = "NOTC"
    COPY = "COPY"
    COPY_TO_CIM = "CTC"
    COPY_TO_CPU = "CTH"
    MAC = "MAC"


# placeholder per-op (latency cycles, energy nJ); override through CiMState.op_timing
DEFAULT_OP_TIMING: Dict[Opcode, Tuple[int, float]] = {
    Opcode.AND: (12, 0.30),
    Opcode.OR: (12, 0.30),
    Opcode.XOR: (14, 0.35),
    Opcode.NOT_COND: (4, 0.05),
    Opcode.COPY: (6, 0.10),
    Opcode.COPY_TO_CIM: (40, 0.60),
    Opcode.COPY_TO_CPU: (40, 0.60),
    Opcode.MAC: (20, 0.50),
}


@dataclass
class CiMState:
    row_size: int = 64
    row_count: int = 1024
    op_timing: Dict[Opcode, Tuple[int, float]] = field(
        default_factory=lambda: dict(DEFAULT_OP_TIMING))
    transfer_latency: Optional[int] = None

    def __post_init__(self):
        if self.row_size < 1 or self.row_count < 1:
            raise CiMError("row size and row count must be positive")
        self.rows = np.zeros((self.row_count, self.row_size), dtype=np.uint8)
        self.sa_latch = np.zeros(self.row_size, dtype=np.uint8)
        self.stats: Dict[Opcode, int] = {op: 0 for op in Opcode}
        if self.transfer_latency is not None:
            for op in (Opcode.COPY_TO_CIM, Opcode.COPY_TO_CPU):
                self.op_timing[op] = (self.transfer_latency, self.op_timing[op][1])

    def _row(self, index: int) -> int:
        if not isinstance(index, (int, np.integer)) or not 0 <= index < self.row_count:
            raise RowOutOfRange(f"row {index} outside 0..{self.row_count - 1}")
        return int(index)

    def _source(self, src: Source) -> np.ndarray:
        if isinstance(src, str):
            if src.upper() != SA:
                raise CiMError(f"unknown source {src!r}")
            return self.sa_latch
        return self.rows[self._row(src)]

    def _bytes(self, data) -> np.ndarray:
        arr = np.frombuffer(bytes(data), dtype=np.uint8)
        if arr.size != self.row_size:
            raise CiMError(f"row data is {arr.size} bytes, row size is {self.row_size}")
        return arr


def copy_to_cim(state: CiMState, row: int, data) -> None:
    state.rows[state._row(row)] = state._bytes(data)


def copy_to_cpu(state: CiMState, row: int) -> bytes:
    return state.rows[state._row(row)].tobytes()


_FOLD = {Opcode.AND: np.bitwise_and, Opcode.OR: np.bitwise_or, Opcode.XOR: np.bitwise_xor}


def bitwise_multi(state: CiMState, op: Opcode, rows: Sequence[int]) -> None:
    """Activate ``rows`` together and latch the folded result at the sense amplifiers."""
    if op not in _FOLD:
        raise CiMError(f"{op} is not a multi-row bitwise op")
    idx = [state._row(r) for r in rows]
    if len(set(idx)) < 2:
        raise TooFewOperands(f"{op.value} needs at least two distinct rows")
    state.sa_latch = _FOLD[op].reduce(state.rows[idx], axis=0)


def not_cond(state: CiMState, dst: int, src: Source = SA, bitwise_not: bool = True,
             zero_mask: bool = False) -> None:
    """Bitwise NOT of ``src`` into ``dst``, or with ``zero_mask`` a per-byte mask
    that is 0xFF where the source byte is zero and 0x00 elsewhere."""
    d = state._row(dst)
    s = state._source(src)
    if zero_mask:
        state.rows[d] = np.where(s == 0, 0xFF, 0x00).astype(np.uint8)
    elif bitwise_not:
        state.rows[d] = ~s
    else:
        state.rows[d] = s


def copy(state: CiMState, dst: int, src: Source = SA, rotate_bits: int = 0) -> None:
    """Copy ``src`` into ``dst``, rotating the whole row left by ``rotate_bits``.

    The row is read as one big-endian bit string, so byte 0 holds the most
    significant bits. Negative values rotate right.
    """
    d = state._row(dst)
    s = state._source(src)
    nbits = 8 * state.row_size
    if abs(rotate_bits) >= nbits:
        raise RotationOutOfRange(f"|{rotate_bits}| >= {nbits} bits")
    if rotate_bits == 0:
        state.rows[d] = s
        return
    bits = np.unpackbits(s)
    state.rows[d] = np.packbits(np.roll(bits, -rotate_bits))


def mac_binary(state: CiMState, weight_rows: Sequence[int], input_row: int) -> List[int]:
    inp = state.rows[state._row(input_row)]
    w = state.rows[[state._row(r) for r in weight_rows]]
    return np.unpackbits(w & inp, axis=1).sum(axis=1).astype(int).tolist()


# ---------------------------------------------------------------------------
# programs


@dataclass(frozen=True)
class CiMInstruction:
    opcode: Opcode
    args: tuple = ()

    _ARITY = {
        Opcode.COPY_TO_CIM: (2, 2),
        Opcode.COPY_TO_CPU: (1, 1),
        Opcode.AND: (2, None), Opcode.OR: (2, None), Opcode.XOR: (2, None),
        Opcode.NOT_COND: (1, 4),
        Opcode.COPY: (1, 3),
        Opcode.MAC: (2, 2),
    }

    def __post_init__(self):
        lo, hi = self._ARITY[self.opcode]
        n = len(self.args)
        if n < lo or (hi is not None and n > hi):
            raise CiMError(f"{self.opcode.value} takes {lo}..{hi or 'n'} operands, got {n}")


@dataclass
class ProgramResult:
    state: CiMState
    total_cycles: int
    total_energy: float
    outputs: List[Tuple[str, object]]
    per_op: Dict[Opcode, Tuple[int, int, float]]


def execute(state: CiMState, ins: CiMInstruction):
    op, a = ins.opcode, ins.args
    if op is Opcode.COPY_TO_CIM:
        copy_to_cim(state, a[0], a[1])
    elif op is Opcode.COPY_TO_CPU:
        return ("CTH", copy_to_cpu(state, a[0]))
    elif op in _FOLD:
        bitwise_multi(state, op, a)
    elif op is Opcode.NOT_COND:
        not_cond(state, *a)
    elif op is Opcode.COPY:
        copy(state, *a)
    elif op is Opcode.MAC:
        return ("MAC", mac_binary(state, a[0], a[1]))
    return None


def run_program(state: CiMState, program: Sequence[CiMInstruction]) -> ProgramResult:
    """Execute sequentially; the first failing instruction aborts with its index."""
    cycles = 0
    energy = 0.0
    outputs = []
    per_op: Dict[Opcode, List] = {}
    for pc, ins in enumerate(program):
        try:
            out = execute(state, ins)
        except CiMError as exc:
            raise CiMProgramError(pc, exc) from exc
        lat, nj = state.op_timing[ins.opcode]
        cycles += lat
        energy += nj
        state.stats[ins.opcode] += 1
        acc = per_op.setdefault(ins.opcode, [0, 0, 0.0])
        acc[0] += 1
        acc[1] += lat
        acc[2] += nj
        if out is not None:
            outputs.append(out)
    return ProgramResult(state, cycles, energy, outputs,
                         {k: tuple(v) for k, v in per_op.items()})


def _reg(token: str) -> int:
    t = token.lower()
    if not t.startswith("r") or not t[1:].isdigit():
        raise CiMError(f"expected a row register like r3, got {token!r}")
    return int(t[1:])


def _src(token: str) -> Source:
    return SA if token.upper() == SA else _reg(token)


def _row_data(token: str, row_size: int) -> bytes:
    if token.endswith("*"):
        return bytes.fromhex(token[:-1]) * row_size
    data = bytes.fromhex(token)
    if len(data) != row_size:
        raise CiMError(f"row data is {len(data)} bytes, row size is {row_size}")
    return data


def parse_instruction(line: str, row_size: int = 64) -> CiMInstruction:
    tokens = line.split()
    name = tokens[0].upper()
    try:
        op = Opcode(name)
    except ValueError:
        raise CiMError(f"unknown opcode {tokens[0]!r}") from None
    rest = tokens[1:]
    try:
        if op is Opcode.COPY_TO_CIM:
            if len(rest) != 2:
                raise CiMError("CTC takes a row and data")
            return CiMInstruction(op, (int(rest[0]), _row_data(rest[1], row_size)))
        if op is Opcode.COPY_TO_CPU:
            return CiMInstruction(op, tuple(int(t) for t in rest))
        if op in _FOLD:
            return CiMInstruction(op, tuple(_reg(t) for t in rest))
        if op is Opcode.NOT_COND:
            args: list = [int(rest[0])] if rest else []
            args.append(_src(rest[1]) if len(rest) > 1 else SA)
            mode = rest[2].upper() if len(rest) > 2 else "NOT"
            if mode not in ("NOT", "MASK") or len(rest) > 3:
                raise CiMError(f"bad NOTC operands {rest}")
            args += [mode == "NOT", mode == "MASK"]
            return CiMInstruction(op, tuple(args))
        if op is Opcode.COPY:
            args = [int(rest[0])] if rest else []
            rot = 0
            for t in rest[1:]:
                if t.lower().startswith("rot="):
                    rot = int(t[4:])
                else:
                    args.append(_src(t))
            if len(args) == 1:
                args.append(SA)
            return CiMInstruction(op, (*args, rot))
        if len(rest) != 2:
            raise CiMError("MAC takes a weight row list and an input row")
        weights = tuple(_reg(t) for t in rest[0].split(",") if t)
        return CiMInstruction(op, (weights, _reg(rest[1])))
    except ValueError as exc:
        raise CiMError(str(exc)) from exc


def parse_program(text: str, row_size: int = 64) -> List[CiMInstruction]:
    program = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        try:
            program.append(parse_instruction(line, row_size))
        except CiMError as exc:
            raise CiMError(f"line {lineno}: {exc}") from exc
    return program

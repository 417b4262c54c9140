import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nvmsim.cim import (
    SA,
    CiMInstruction,
    CiMState,
    Opcode,
    bitwise_multi,
    copy,
    copy_to_cim,
    copy_to_cpu,
    mac_binary,
    not_cond,
    parse_instruction,
    parse_program,
    run_program,
)
from nvmsim.config import bundled_path
from nvmsim.errors import CiMError, CiMProgramError, RotationOutOfRange, RowOutOfRange, TooFewOperands
from oracles import fold_oracle, mac_oracle, nand_oracle, rotate_oracle, ternary_oracle

RS = 64


def load_program(name):
    return parse_program(bundled_path(name).read_text(), RS)


def with_rows(program, rows):
    """Replace the data of CTC instructions whose row is in ``rows``."""
    out = []
    for ins in program:
        if ins.opcode is Opcode.COPY_TO_CIM and ins.args[0] in rows:
            ins = CiMInstruction(ins.opcode, (ins.args[0], rows[ins.args[0]]))
        out.append(ins)
    return out


def run_nand(a, c):
    res = run_program(CiMState(), with_rows(load_program("nand.cim"), {2: a, 3: c}))
    return res.outputs[-1][1]


def run_ternary(b, c, d):
    res = run_program(CiMState(), with_rows(load_program("ternary.cim"), {1: b, 2: c, 3: d}))
    return res.outputs[-1][1]


def biased_row(rng):
    return bytes(0x12 if rng.random() < 0.4 else rng.randrange(256) for _ in range(RS))


def test_and_example():
    s = CiMState()
    copy_to_cim(s, 0, b"\xff" * RS)
    copy_to_cim(s, 1, b"\x0f" * RS)
    bitwise_multi(s, Opcode.AND, [0, 1])
    assert s.sa_latch.tobytes() == b"\x0f" * RS


def test_xor_self_needs_two_distinct_rows():
    s = CiMState()
    with pytest.raises(TooFewOperands):
        bitwise_multi(s, Opcode.XOR, [3, 3])
    copy_to_cim(s, 3, bytes(range(RS)))
    copy_to_cim(s, 4, bytes(range(RS)))
    bitwise_multi(s, Opcode.XOR, [3, 4])
    assert not s.sa_latch.any()


@given(st.data())
@settings(max_examples=50, deadline=None)
def test_fold_matches_oracle_and_is_order_independent(data):
    op = data.draw(st.sampled_from(["AND", "OR", "XOR"]))
    k = data.draw(st.integers(2, 5))
    rows = [data.draw(st.binary(min_size=RS, max_size=RS)) for _ in range(k)]
    s = CiMState()
    for i, r in enumerate(rows):
        copy_to_cim(s, 10 + i, r)
    idx = list(range(10, 10 + k))
    bitwise_multi(s, Opcode[op], idx)
    first = s.sa_latch.tobytes()
    assert first == fold_oracle(op, rows)
    bitwise_multi(s, Opcode[op], data.draw(st.permutations(idx)))
    assert s.sa_latch.tobytes() == first


def test_not_cond_mask_and_complement():
    s = CiMState(row_size=4)
    s.sa_latch = np.array([0x00, 0x07, 0x00, 0x80], dtype=np.uint8)
    not_cond(s, 1, SA, bitwise_not=False, zero_mask=True)
    assert copy_to_cpu(s, 1) == bytes([0xFF, 0x00, 0xFF, 0x00])
    not_cond(s, 2, 1)
    not_cond(s, 3, 2)
    assert copy_to_cpu(s, 3) == copy_to_cpu(s, 1)
    assert copy_to_cpu(s, 2) == bytes([0x00, 0xFF, 0x00, 0xFF])


def test_periphery_ops_leave_latch_alone():
    s = CiMState(row_size=8)
    copy_to_cim(s, 0, bytes(range(8)))
    copy_to_cim(s, 1, bytes(range(8, 16)))
    bitwise_multi(s, Opcode.OR, [0, 1])
    latch = s.sa_latch.copy()
    not_cond(s, 2)
    not_cond(s, 3, 0, zero_mask=True)
    copy(s, 4, rotate_bits=3)
    copy(s, 5, 1, rotate_bits=-9)
    mac_binary(s, [0, 1], 2)
    assert np.array_equal(s.sa_latch, latch)


def test_rotation_wraps_across_the_row():
    s = CiMState()
    copy_to_cim(s, 0, b"\x01" + bytes(RS - 1))
    copy(s, 1, 0, rotate_bits=8)
    assert copy_to_cpu(s, 1) == bytes(RS - 1) + b"\x01"


@given(st.binary(min_size=RS, max_size=RS), st.integers(-(8 * RS - 1), 8 * RS - 1))
def test_rotation_matches_bigint_oracle(row, k):
    s = CiMState()
    copy_to_cim(s, 0, row)
    copy(s, 1, 0, rotate_bits=k)
    assert copy_to_cpu(s, 1) == rotate_oracle(row, k)
    copy(s, 2, 1, rotate_bits=-k)
    assert copy_to_cpu(s, 2) == row


def test_rotation_out_of_range():
    with pytest.raises(RotationOutOfRange):
        copy(CiMState(), 0, 1, rotate_bits=8 * RS)


def test_mac_examples():
    s = CiMState()
    assert mac_binary(s, [1, 2], 0) == [0, 0]
    copy_to_cim(s, 0, b"\xff" * RS)
    copy_to_cim(s, 1, b"\xff" * RS)
    assert mac_binary(s, [1], 0) == [8 * RS]


@given(st.lists(st.binary(min_size=RS, max_size=RS), min_size=1, max_size=6),
       st.binary(min_size=RS, max_size=RS))
@settings(max_examples=50)
def test_mac_matches_popcount_oracle(weights, inp):
    s = CiMState()
    for i, w in enumerate(weights):
        copy_to_cim(s, 1 + i, w)
    copy_to_cim(s, 0, inp)
    assert mac_binary(s, list(range(1, 1 + len(weights))), 0) == mac_oracle(weights, inp)


def test_row_bounds():
    s = CiMState(row_count=4)
    with pytest.raises(RowOutOfRange):
        copy_to_cim(s, 4, bytes(RS))
    with pytest.raises(RowOutOfRange):
        not_cond(s, -1)


def test_nand_program_random_rows():
    rng = random.Random(7)
    for _ in range(50):
        a, c = rng.randbytes(RS), rng.randbytes(RS)
        assert run_nand(a, c) == nand_oracle(a, c)


def test_ternary_program_random_rows():
    rng = random.Random(8)
    for _ in range(50):
        b, c, d = biased_row(rng), rng.randbytes(RS), rng.randbytes(RS)
        assert run_ternary(b, c, d) == ternary_oracle(b, c, d)


def test_bundled_ternary_output():
    prog = load_program("ternary.cim")
    b = prog[0].args[1]
    res = run_program(CiMState(), prog)
    assert res.outputs[-1][1] == ternary_oracle(b, b"\xc0" * RS, b"\xd0" * RS)


def test_empty_program():
    res = run_program(CiMState(), [])
    assert (res.total_cycles, res.total_energy, res.outputs) == (0, 0.0, [])


def test_timing_is_additive():
    s = CiMState(transfer_latency=7)
    prog = load_program("ternary.cim")
    res = run_program(s, prog)
    assert res.total_cycles == sum(s.op_timing[i.opcode][0] for i in prog)
    assert res.total_energy == pytest.approx(sum(s.op_timing[i.opcode][1] for i in prog))
    assert s.op_timing[Opcode.COPY_TO_CIM][0] == 7
    assert sum(n for n, _, _ in res.per_op.values()) == len(prog)


def test_program_error_reports_pc():
    prog = [CiMInstruction(Opcode.COPY_TO_CIM, (0, bytes(RS))),
            CiMInstruction(Opcode.AND, (0, 2000))]
    with pytest.raises(CiMProgramError) as ei:
        run_program(CiMState(), prog)
    assert ei.value.pc == 1 and isinstance(ei.value.cause, RowOutOfRange)


def test_parse_instruction_forms():
    assert parse_instruction("NOTC 5 SA MASK").args == (5, SA, False, True)
    assert parse_instruction("NOTC 6 r5 NOT").args == (6, 5, True, False)
    assert parse_instruction("NOTC 1").args == (1, SA, True, False)
    assert parse_instruction("COPY 7").args == (7, SA, 0)
    assert parse_instruction("COPY 2 r3 rot=-5").args == (2, 3, -5)
    assert parse_instruction("MAC r1,r2 r0").args == ((1, 2), 0)
    assert parse_instruction("CTC 1 ab*", 4).args == (1, b"\xab" * 4)
    for bad in ("FOO 1", "AND r1", "CTC 1 abcd", "NOTC 1 SA BOTH", "AND x1 r2"):
        with pytest.raises(CiMError):
            parse_instruction(bad, RS)


def test_parse_program_line_numbers():
    with pytest.raises(CiMError, match="line 2"):
        parse_program("; ok\nAND r1\n")

"""Deterministic generators for the bundled sample traces.

``python -m nvmsim.synth DIR`` regenerates every bundled trace into DIR.
All generators take an explicit seed and use their own ``random.Random``.
"""

from __future__ import annotations

import argparse
import random
from pathlib import Path
from typing import List, Optional

from .memory import AddressCodec, DecodedAddress, Geometry
from .trace import MemoryRequest, Op, write_trace

# spacing between cache accesses; longer than a miss plus an STT-RAM write,
# so no access ever waits on a posted write to the same line
CACHE_GAP = 32
WORD = 4


def row_local_trace(n: int = 12000, seed: int = 1, geometry: Optional[Geometry] = None,
                    streams: int = 4, write_frac: float = 0.3,
                    payload: bool = False) -> List[MemoryRequest]:
    """Interleaved sequential runs, each confined to one row of one bank.

    Several streams are live at once and may collide on a bank, which is
    where a row-hit-first scheduler gains over strict arrival order.
    """
    g = geometry or Geometry()
    codec = AddressCodec(g)
    rng = random.Random(seed)

    def new_stream():
        d = DecodedAddress(
            channel=rng.randrange(g.channels), rank=rng.randrange(g.ranks_per_channel),
            bank=rng.randrange(g.banks_per_rank), subarray=rng.randrange(g.subarrays_per_bank),
            row=rng.randrange(1, g.rows_per_subarray))
        return [d, rng.randrange(g.blocks_per_row), rng.randint(8, 32)]

    live = [new_stream() for _ in range(streams)]
    out = []
    cycle = 0
    for _ in range(n):
        i = rng.randrange(streams)
        d, col, left = live[i]
        addr = codec.encode(DecodedAddress(d.channel, d.rank, d.bank, d.subarray, d.row, col))
        if rng.random() < write_frac:
            data = rng.randbytes(g.block_size_bytes) if payload else None
            out.append(MemoryRequest(cycle, Op.WRITE, addr, data=data, thread_id=i))
        else:
            out.append(MemoryRequest(cycle, Op.READ, addr, thread_id=i))
        left -= 1
        live[i] = new_stream() if left == 0 else [d, (col + 1) % g.blocks_per_row, left]
        cycle += rng.randint(1, 4)
    return out


def random_trace(n: int = 2000, seed: int = 2, geometry: Optional[Geometry] = None,
                 write_frac: float = 0.4, rowclone_frac: float = 0.0,
                 payload: bool = False, gap: int = 6) -> List[MemoryRequest]:
    """Uniformly random block addresses; optional same-subarray RowClones."""
    g = geometry or Geometry()
    codec = AddressCodec(g)
    rng = random.Random(seed)
    blocks = g.capacity // g.block_size_bytes
    out = []
    cycle = 0
    for _ in range(n):
        addr = rng.randrange(blocks) * g.block_size_bytes
        r = rng.random()
        if r < rowclone_frac:
            d = codec.decode(addr)
            src_row = rng.randrange(g.rows_per_subarray)
            dst_row = rng.randrange(1, g.rows_per_subarray)
            src = codec.encode(DecodedAddress(d.channel, d.rank, d.bank, d.subarray, src_row))
            dst = codec.encode(DecodedAddress(d.channel, d.rank, d.bank, d.subarray, dst_row))
            out.append(MemoryRequest(cycle, Op.ROWCLONE, src, dst, thread_id=0))
        elif r < rowclone_frac + write_frac:
            data = rng.randbytes(g.block_size_bytes) if payload else None
            out.append(MemoryRequest(cycle, Op.WRITE, addr, data=data))
        else:
            out.append(MemoryRequest(cycle, Op.READ, addr))
        cycle += rng.randint(0, gap)
    return out


def rowclone_trace(geometry: Optional[Geometry] = None) -> List[MemoryRequest]:
    """A short scripted trace: writes, in-subarray copies, a bulk zero, a
    cross-subarray copy that gets dropped, and reads of the destinations."""
    g = geometry or Geometry()
    codec = AddressCodec(g)

    def at(bank, sub, row, col=0):
        return codec.encode(DecodedAddress(0, 0, bank, sub, row, col))

    pattern = bytes(range(g.block_size_bytes))
    out = [
        MemoryRequest(0, Op.WRITE, at(0, 1, 5), data=pattern),
        MemoryRequest(2, Op.WRITE, at(0, 1, 5, 1), data=pattern[::-1]),
        MemoryRequest(10, Op.ROWCLONE, at(0, 1, 5), at(0, 1, 9)),
        MemoryRequest(12, Op.ROWCLONE, at(1, 0, 3), at(1, 0, 4)),
        MemoryRequest(14, Op.ROWCLONE, at(0, 1, 0), at(0, 1, 7)),      # bulk zero
        MemoryRequest(16, Op.ROWCLONE, at(0, 1, 5), at(0, 2, 9)),      # cross-subarray, dropped
        MemoryRequest(200, Op.READ, at(0, 1, 9)),
        MemoryRequest(202, Op.READ, at(0, 1, 9, 1)),
        MemoryRequest(204, Op.READ, at(0, 1, 7)),
    ]
    return out


def merge_sort_trace(n: int = 4096, seed: int = 3, base: int = 0x100000,
                     gap: int = CACHE_GAP) -> List[MemoryRequest]:
    """Word accesses of a bottom-up merge sort over ``n`` random ints."""
    rng = random.Random(seed)
    a = [rng.randrange(1 << 30) for _ in range(n)]
    buf = [0] * n
    src_base, dst_base = base, base + n * WORD
    out: List[MemoryRequest] = []

    def rd(b, i):
        out.append(MemoryRequest(len(out) * gap, Op.READ, b + i * WORD))

    def wr(b, i):
        out.append(MemoryRequest(len(out) * gap, Op.WRITE, b + i * WORD))

    width = 1
    while width < n:
        for lo in range(0, n, 2 * width):
            mid, hi = min(lo + width, n), min(lo + 2 * width, n)
            i, j = lo, mid
            for k in range(lo, hi):
                if i < mid and (j >= hi or a[i] <= a[j]):
                    rd(src_base, i)
                    buf[k] = a[i]
                    i += 1
                else:
                    rd(src_base, j)
                    buf[k] = a[j]
                    j += 1
                wr(dst_base, k)
        a, buf = buf, a
        src_base, dst_base = dst_base, src_base
        width *= 2
    assert a == sorted(a)
    return out


def convolution_trace(n: int = 2048, k: int = 16, base: int = 0x200000,
                      gap: int = CACHE_GAP, align: int = 0x8000) -> List[MemoryRequest]:
    """Word accesses of a 1-D convolution: the kernel is read first and
    stays hot, each output reads ``k`` inputs and ``k`` weights.

    The output array starts on a ``align`` boundary past the input, so each
    output line shares a cache set with an input line touched earlier; the
    first way of every set then holds only read-mostly data.
    """
    kern, inp = base, base + 0x1000
    outp = inp + -(-(n + k) * WORD // align) * align
    out: List[MemoryRequest] = []

    def add(op, addr):
        out.append(MemoryRequest(len(out) * gap, op, addr))

    for j in range(k):
        add(Op.READ, kern + j * WORD)
    for i in range(n):
        for j in range(k):
            add(Op.READ, kern + j * WORD)
            add(Op.READ, inp + (i + j) * WORD)
        add(Op.WRITE, outp + i * WORD)
    return out


def write_bundled(outdir) -> None:
    d = Path(outdir)
    d.mkdir(parents=True, exist_ok=True)
    write_trace(d / "row_local.trace", row_local_trace())
    write_trace(d / "random.trace", random_trace(payload=True, rowclone_frac=0.02))
    write_trace(d / "rowclone.trace", rowclone_trace())
    write_trace(d / "hybrid.trace", random_trace(seed=4, geometry=Geometry(channels=2),
                                                 rowclone_frac=0.02))
    write_trace(d / "mergesort_cache.trace", merge_sort_trace())
    write_trace(d / "convolution_cache.trace", convolution_trace())


def main(argv=None):
    ap = argparse.ArgumentParser(description="Regenerate the bundled sample traces.")
    ap.add_argument("outdir")
    args = ap.parse_args(argv)
    write_bundled(args.outdir)


if __name__ == "__main__":
    main()

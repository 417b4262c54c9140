import random

import pytest
from hypothesis import given, strategies as st

from nvmsim.errors import LengthMismatch
from nvmsim.wear import (
    EnergyEvent,
    EnergyLedger,
    ShadowMemory,
    WearCounters,
    data_comparison_write,
    record_write,
    wear_metrics,
)
from oracles import hamming, popcount_replay


def test_dcw_single_bit():
    assert data_comparison_write(b"\x00\x00", b"\x00\x01") == (1, [8])


def test_dcw_identical_writes_nothing():
    assert data_comparison_write(b"\xab" * 8, b"\xab" * 8) == (0, [])


def test_dcw_length_mismatch():
    with pytest.raises(LengthMismatch):
        data_comparison_write(b"\x00", b"\x00\x00")


@given(st.integers(1, 32).flatmap(lambda n: st.tuples(st.binary(min_size=n, max_size=n),
                                                      st.binary(min_size=n, max_size=n))))
def test_dcw_equals_hamming(pair):
    old, new = pair
    n, positions = data_comparison_write(old, new)
    assert n == hamming(old, new) == len(positions)
    assert positions == sorted(set(positions))


def test_shadow_defaults_to_zero_and_tracks_written_blocks():
    s = ShadowMemory(4)
    assert s.get(9) == bytes(4)
    assert 9 not in s
    s.put(9, b"\x01\x02\x03\x04")
    assert s.get(9) == b"\x01\x02\x03\x04" and len(s) == 1
    with pytest.raises(LengthMismatch):
        s.put(1, b"\x00")


def test_record_write_matches_replay():
    rng = random.Random(5)
    shadow, counters = ShadowMemory(8), WearCounters()
    writes = [(rng.randrange(4), rng.randbytes(8)) for _ in range(300)]
    for b, d in writes:
        record_write(shadow, counters, b, d)
    assert dict(counters.flips) == popcount_replay(writes, 8)
    assert counters.total_flips() == sum(popcount_replay(writes, 8).values())


def test_dcw_off_counts_every_bit_of_a_write():
    shadow, counters = ShadowMemory(2), WearCounters(dcw=False)
    record_write(shadow, counters, 0, b"\x00\x00")
    record_write(shadow, counters, 0, b"\x00\x00")
    assert counters.cell_writes((0, 15)) == 2
    assert counters.total_flips() == 0


def test_read_wear_is_opt_in():
    c = WearCounters()
    c.record_read(3)
    assert not c.block_reads
    c = WearCounters(read_wear=True)
    c.record_read(3)
    assert c.block_reads[3] == 1


def test_wear_metrics_over_touched_cells():
    c = WearCounters()
    c.flips[(0, 0)] = 1
    c.flips[(0, 1)] = 3
    m = wear_metrics(c)
    assert (m.touched_cells, m.max_flips, m.mean_flips) == (2, 3, 2.0)
    assert m.cv == pytest.approx(0.5)
    assert wear_metrics(WearCounters()).touched_cells == 0


def test_energy_ledger_sums_by_source():
    led = EnergyLedger()
    led.extend([EnergyEvent("memory", 1.5), EnergyEvent("rowclone", 40.0), None])
    led.add(EnergyEvent("cim", 0.5))
    assert led.total == pytest.approx(42.0)
    assert led.by_source["rowclone"] == 40.0 and led.events == 3
    with pytest.raises(KeyError):
        led.add(EnergyEvent("disk", 1.0))


def test_dump_formats():
    shadow, counters = ShadowMemory(1), WearCounters()
    record_write(shadow, counters, 2, b"\x05")
    assert counters.dump_lines() == ["2:0 | 1", "2:2 | 1"]
    assert counters.dump_csv() == "block,bit,flips,writes\n2,0,1,1\n2,2,1,1\n"

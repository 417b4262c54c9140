"""Frozen outputs of the bundled configs and traces.

The golden files were produced by the first run that passed the acceptance
suite; any change in them means simulator behaviour changed.
"""

from pathlib import Path

import pytest

from nvmsim.cli import main
from nvmsim.config import bundled_path
from nvmsim.synth import write_bundled

GOLDEN = Path(__file__).parent / "golden"

CASES = [
    ("pcm_rowclone.txt", ["run-trace", "--config", "pcm_default.config", "--trace", "rowclone.trace"]),
    ("pcm_random.txt", ["run-trace", "--config", "pcm_default.config", "--trace", "random.trace"]),
    ("dram_random_wqf.txt", ["run-trace", "--config", "dram_default.config", "--trace", "random.trace",
                             "--policy", "FRFCFS-WQF"]),
    ("hybrid.csv", ["run-trace", "--config", "hybrid.config", "--trace", "hybrid.trace",
                    "--format", "csv"]),
    ("mergesort_sweep.csv", ["sweep-ratio", "--config", "hybrid_cache.config",
                             "--trace", "mergesort_cache.trace"]),
]


@pytest.mark.parametrize("golden, argv", CASES, ids=[c[0] for c in CASES])
def test_matches_golden(tmp_path, golden, argv):
    out = tmp_path / golden
    assert main(argv + ["--out", str(out)]) == 0
    assert out.read_text() == (GOLDEN / golden).read_text()


def test_cim_golden(capsys):
    assert main(["run-cim", "--program", "ternary.cim"]) == 0
    assert capsys.readouterr().out == (GOLDEN / "ternary_cim.txt").read_text()


def test_bundled_traces_regenerate_identically(tmp_path):
    write_bundled(tmp_path)
    for f in sorted(tmp_path.iterdir()):
        assert f.read_bytes() == bundled_path(f.name).read_bytes(), f.name

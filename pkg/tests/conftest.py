import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nvmsim.config import bundled_path, load_config  # noqa: E402
from nvmsim.memory import Geometry  # noqa: E402

DATA = bundled_path("")


@pytest.fixture(scope="session")
def pcm_cfg():
    return load_config("pcm_default.config")


@pytest.fixture(scope="session")
def dram_cfg():
    return load_config("dram_default.config")


@pytest.fixture(scope="session")
def pcm(pcm_cfg):
    return pcm_cfg.profile


@pytest.fixture(scope="session")
def dram(dram_cfg):
    return dram_cfg.profile


@pytest.fixture
def small_geometry():
    """Few banks and rows so random traces collide often."""
    return Geometry(channels=1, ranks_per_channel=2, banks_per_rank=2, subarrays_per_bank=2,
                    rows_per_subarray=8, columns_per_row=16, device_width_bits=32,
                    burst_length=8, block_size_bytes=16)


ACCEPTANCE = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    """Store an acceptance outcome; printed in the terminal summary."""
    ACCEPTANCE[criterion] = (ok, detail)
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")

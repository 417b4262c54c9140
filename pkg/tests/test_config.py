import pytest

from nvmsim.config import bundled_path, load_config, parse_config
from nvmsim.controller import Policy
from nvmsim.errors import ConfigError, ParseError, UnknownKey, ValidationError
from nvmsim.memory import MemKind

BASE = bundled_path("pcm_default.config").read_text()


def with_line(extra, drop=()):
    lines = [l for l in BASE.splitlines() if l.split()[:1] not in [[d] for d in drop]]
    return "\n".join(lines + extra.splitlines()) + "\n"


def test_bundled_pcm_loads():
    cfg = load_config("pcm_default.config")
    assert cfg.profile.kind is MemKind.NVM
    assert cfg.controller.policy is Policy.FRFCFS
    assert cfg.geometry.row_bytes == 4096


def test_bundled_dram_and_hybrid_load():
    assert load_config("dram_default.config").profile.kind is MemKind.DRAM
    h = load_config("hybrid.config")
    assert set(h.profiles) == {"dram", "pcm"}
    assert [r.channel for r in h.controller.channel_ranges] == [0, 1]
    assert load_config("hybrid_cache.config").cache.nv_block_ratio == 25


def test_policy_key_selects_wqf():
    cfg = parse_config(with_line("MEM_CTL FRFCFS-WQF", drop=["MEM_CTL"]))
    assert cfg.controller.policy is Policy.FRFCFS_WQF


def test_missing_trcd():
    with pytest.raises(ValidationError, match="tRCD"):
        parse_config(with_line("", drop=["tRCD"]))


def test_unknown_key_has_line_number():
    text = "CHANNELS 1\nBOGUS 3\n"
    with pytest.raises(UnknownKey) as ei:
        parse_config(text, "x.config")
    assert ei.value.lineno == 2 and "x.config:2" in str(ei.value)


def test_bad_value_is_parse_error_with_line():
    with pytest.raises(ParseError) as ei:
        parse_config("; c\nBANKS eight\n")
    assert ei.value.lineno == 2


def test_duplicate_key():
    with pytest.raises(ParseError):
        parse_config(with_line("tRCD 20"))


@pytest.mark.parametrize("extra, drop", [
    ("BANKS 6", ["BANKS"]),
    ("WQ_HIGH 40", ["WQ_HIGH"]),
    ("WQ_LOW 30", ["WQ_LOW"]),
    ("PreTraceWriter FancyWriter", ["PreTraceWriter"]),
    ("MAX_CYCLES 0", ["MAX_CYCLES"]),
    ("ADDR_MAPPING ChRaBaRoCo", ["ADDR_MAPPING"]),
    ("NV_BLOCK_RATIO 150", []),
    ("CHANNEL_RANGE 0x0 0x1000 0 nosuch", []),
    ("CHANNEL_RANGE 0x0 0x40000000 0 default", []),
])
def test_invariant_violations_are_line_numbered(extra, drop):
    text = with_line(extra, drop)
    with pytest.raises(ValidationError) as ei:
        parse_config(text)
    assert ei.value.lineno is not None


def test_dram_trc_mismatch_rejected():
    text = bundled_path("dram_default.config").read_text().replace("tRC             39", "tRC 40")
    with pytest.raises(ValidationError):
        parse_config(text)


def test_prefixed_unknown_profile_key():
    with pytest.raises(UnknownKey):
        parse_config("pcm.tFOO 3\n")


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/x.config")


def test_comments_and_blank_lines():
    cfg = parse_config(with_line("  ; indented comment\n\nRNG_SEED 9 ; trailing", drop=["RNG_SEED"]))
    assert cfg.rng_seed == 9

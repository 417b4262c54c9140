"""``KEY value`` configuration files.

``;`` starts a comment, keys are case sensitive, unknown keys are errors.
Timing keys may carry a profile prefix (``nvm.tRCD 30``); unprefixed timing
keys define the profile named ``default``. ``CHANNEL_RANGE start end channel
profile`` may repeat and switches routing to explicit address ranges.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, Optional, Tuple

from .cache import HybridCacheConfig
from .controller import ChannelRange, ControllerConfig, Policy
from .errors import ConfigError, ParseError, UnknownKey, ValidationError
from .memory import Geometry, MemKind, TimingProfile
from .trace import WRITERS


def _int(v: str) -> int:
    return int(v, 0)


def _bool(v: str) -> bool:
    low = v.lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


GEOMETRY_KEYS = {
    "CHANNELS": "channels",
    "RANKS": "ranks_per_channel",
    "BANKS": "banks_per_rank",
    "SUBARRAYS": "subarrays_per_bank",
    "ROWS": "rows_per_subarray",
    "COLS": "columns_per_row",
    "DEVICE_WIDTH": "device_width_bits",
    "BURST_LENGTH": "burst_length",
    "BLOCK_SIZE": "block_size_bytes",
}

PROFILE_KEYS = {
    "MEM_TYPE": ("kind", lambda v: MemKind(v.upper())),
    "CLK_PERIOD_NS": ("clock_period_ns", float),
    "tRCD": ("tRCD", _int), "tRAS": ("tRAS", _int), "tRP": ("tRP", _int),
    "tRC": ("tRC", _int), "tBURST": ("tBURST", _int), "tFAW": ("tFAW", _int),
    "tRRD": ("tRRD", _int), "tWWD": ("tWWD", _int), "tWAD": ("tWAD", _int),
    "tAWD": ("tAWD", _int),
    "E_ACT": ("E_act", float), "E_READ": ("E_read_burst", float),
    "E_WRITE": ("E_write_burst", float), "E_ROWCLONE": ("E_rowclone", float),
    "E_ROWZERO": ("E_rowzero", float),
}
REQUIRED_PROFILE = ("MEM_TYPE", "tRCD", "tRAS", "tRP", "tRC", "tBURST", "tFAW", "tRRD")

CONTROLLER_KEYS = {
    "MEM_CTL": ("policy", Policy.parse),
    "READ_QUEUE_SIZE": ("read_queue_capacity", _int),
    "WRITE_QUEUE_SIZE": ("write_queue_capacity", _int),
    "WQ_HIGH": ("wq_high_watermark", _int),
    "WQ_LOW": ("wq_low_watermark", _int),
    "DRAM_ROWCLONE": ("dram_rowclone", _bool),
}

CACHE_KEYS = {
    "CACHE_SIZE": ("size_bytes", _int),
    "CACHE_ASSOC": ("assoc", _int),
    "CACHE_BLOCK": ("block_bytes", _int),
    "NV_BLOCK_RATIO": ("nv_block_ratio", float),
    "DATA_LATENCY": ("data_latency", _int),
    "NV_READ_LATENCY": ("nv_read_latency", _int),
    "NV_WRITE_LATENCY": ("nv_write_latency", _int),
    "VOL_READ_ENERGY": ("vol_read_energy", float),
    "VOL_WRITE_ENERGY": ("vol_write_energy", float),
    "NON_VOL_READ_ENERGY": ("non_vol_read_energy", float),
    "NON_VOL_WRITE_ENERGY": ("non_vol_write_energy", float),
    "CACHE_MISS_PENALTY": ("miss_penalty", _int),
}

RUN_KEYS = {
    "MAX_CYCLES": ("max_cycles", _int),
    "PAYLOAD_SIM": ("payload_simulation", _bool),
    "RNG_SEED": ("rng_seed", _int),
    "DCW": ("dcw", _bool),
    "READ_WEAR": ("read_wear", _bool),
    "CACHE_ENABLE": ("cache_enabled", _bool),
    "CACHE_ACCESS_SIZE": ("cache_access_size", _int),
    "CIM_ROW_SIZE": ("cim_row_size", _int),
    "CIM_ROW_COUNT": ("cim_row_count", _int),
    "CIM_TRANSFER_LATENCY": ("cim_transfer_latency", _int),
    "WRITER_BLOCK_SIZE": ("writer_block_size", _int),
}

WRITER_KEYS = ("PrintPreTrace", "PreTraceFile", "PreTraceWriter")
OTHER_KEYS = ("ADDR_MAPPING", "CHANNEL_RANGE")


@dataclass
class TraceWriterConfig:
    enabled: bool = False
    out_path: str = "trace.out"
    writer_name: str = "RawWriter"


@dataclass
class SimConfig:
    geometry: Geometry
    profiles: Dict[str, TimingProfile]
    controller: ControllerConfig
    cache: Optional[HybridCacheConfig] = None
    writer: TraceWriterConfig = field(default_factory=TraceWriterConfig)
    addr_mapping: str = "RoRaBaCoCh"
    max_cycles: Optional[int] = None
    payload_simulation: bool = False
    rng_seed: int = 0
    dcw: bool = True
    read_wear: bool = False
    cache_enabled: bool = False
    cache_access_size: int = 8
    cim_row_size: int = 64
    cim_row_count: int = 1024
    cim_transfer_latency: Optional[int] = None
    writer_block_size: int = 4096
    path: Optional[str] = None

    @property
    def profile(self) -> TimingProfile:
        """The default profile, or the only one when there is exactly one."""
        if "default" in self.profiles:
            return self.profiles["default"]
        if len(self.profiles) == 1:
            return next(iter(self.profiles.values()))
        raise KeyError("config defines several profiles and none is 'default'")

    def cache_config(self) -> HybridCacheConfig:
        return self.cache if self.cache is not None else HybridCacheConfig()


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("nvmsim") / "data" / name))


def resolve(path) -> Path:
    """A filesystem path, falling back to a bundled data file of that name."""
    p = Path(path)
    if p.exists():
        return p
    b = bundled_path(str(path))
    if b.exists():
        return b
    return p


def load_config(path) -> SimConfig:
    p = resolve(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", path=str(path)) from exc
    return parse_config(text, str(p))


def parse_config(text: str, path: str = "<config>") -> SimConfig:
    seen: Dict[str, Tuple[str, int]] = {}
    ranges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        key, values = parts[0], parts[1:]
        if not values:
            raise ParseError(f"key {key!r} has no value", lineno, path)
        if key == "CHANNEL_RANGE":
            if len(values) not in (3, 4):
                raise ParseError("CHANNEL_RANGE takes start end channel [profile]", lineno, path)
            ranges.append((values, lineno))
            continue
        if len(values) != 1:
            raise ParseError(f"key {key!r} takes exactly one value", lineno, path)
        base = key.split(".", 1)[1] if "." in key else key
        if "." in key and base not in PROFILE_KEYS:
            raise UnknownKey(f"unknown profile key {key!r}", lineno, path)
        known = (base in PROFILE_KEYS or key in GEOMETRY_KEYS or key in CONTROLLER_KEYS
                 or key in CACHE_KEYS or key in RUN_KEYS or key in WRITER_KEYS
                 or key in OTHER_KEYS)
        if not known:
            raise UnknownKey(f"unknown key {key!r}", lineno, path)
        if key in seen:
            raise ParseError(f"duplicate key {key!r} (first on line {seen[key][1]})", lineno, path)
        seen[key] = (values[0], lineno)
    return _build(seen, ranges, path)


def _conv(seen, key, fn, path):
    value, lineno = seen[key]
    try:
        return fn(value)
    except (ValueError, KeyError) as exc:
        raise ParseError(f"bad value {value!r} for {key}: {exc}", lineno, path) from None


def _build(seen, ranges, path) -> SimConfig:
    def line_of(*keys):
        for k in keys:
            if k in seen:
                return seen[k][1]
        return None

    # geometry
    gkw = {attr: _conv(seen, k, _int, path) for k, attr in GEOMETRY_KEYS.items() if k in seen}
    try:
        geometry = Geometry(**gkw)
    except ValidationError as exc:
        raise ValidationError(str(exc), line_of(*GEOMETRY_KEYS), path) from None

    # profiles
    grouped: Dict[str, Dict[str, str]] = {}
    for key in seen:
        name, base = key.split(".", 1) if "." in key else ("default", key)
        if base in PROFILE_KEYS:
            grouped.setdefault(name, {})[base] = key
    profiles = {}
    for name, keys in grouped.items():
        missing = [k for k in REQUIRED_PROFILE if k not in keys]
        if missing:
            raise ValidationError(f"profile {name!r} is missing {', '.join(missing)}",
                                  max(seen[k][1] for k in keys.values()), path)
        kw = {}
        for base, key in keys.items():
            attr, fn = PROFILE_KEYS[base]
            kw[attr] = _conv(seen, key, fn, path)
        try:
            profiles[name] = TimingProfile(name=name, **kw)
        except ValidationError as exc:
            raise ValidationError(f"profile {name!r}: {exc}",
                                  max(seen[k][1] for k in keys.values()), path) from None
    if not profiles:
        raise ValidationError("no timing profile defined (need MEM_TYPE, tRCD, ...)", None, path)

    # controller
    ckw = {attr: _conv(seen, k, fn, path) for k, (attr, fn) in CONTROLLER_KEYS.items() if k in seen}
    chan_ranges = []
    for values, lineno in ranges:
        try:
            start, end, chan = _int(values[0]), _int(values[1]), _int(values[2])
        except ValueError as exc:
            raise ParseError(f"bad CHANNEL_RANGE: {exc}", lineno, path) from None
        prof = values[3] if len(values) == 4 else "default"
        if prof not in profiles:
            raise ValidationError(f"CHANNEL_RANGE names unknown profile {prof!r}", lineno, path)
        chan_ranges.append(ChannelRange(start, end, chan, prof))
    try:
        controller = ControllerConfig(channel_ranges=chan_ranges, **ckw)
    except ValidationError as exc:
        lineno = line_of("WQ_LOW", "WQ_HIGH", "WRITE_QUEUE_SIZE", "READ_QUEUE_SIZE")
        if chan_ranges and "range" in str(exc):
            lineno = ranges[-1][1]
        raise ValidationError(str(exc), lineno, path) from None
    if chan_ranges:
        local = geometry.single_channel().capacity
        for r, (_, lineno) in zip(chan_ranges, ranges):
            if r.end - r.start > local:
                raise ValidationError(
                    f"range [{r.start:#x}, {r.end:#x}) exceeds per-channel capacity {local:#x}",
                    lineno, path)
    elif "default" not in profiles:
        raise ValidationError("without CHANNEL_RANGE entries a default profile is required",
                              None, path)

    # cache
    cache = None
    cache_keys = [k for k in CACHE_KEYS if k in seen]
    if cache_keys:
        kw = {CACHE_KEYS[k][0]: _conv(seen, k, CACHE_KEYS[k][1], path) for k in cache_keys}
        try:
            cache = HybridCacheConfig(**kw)
        except ValidationError as exc:
            raise ValidationError(str(exc), max(seen[k][1] for k in cache_keys), path) from None

    # writer
    writer = TraceWriterConfig()
    if "PrintPreTrace" in seen:
        writer.enabled = _conv(seen, "PrintPreTrace", _bool, path)
    if "PreTraceFile" in seen:
        writer.out_path = seen["PreTraceFile"][0]
    if "PreTraceWriter" in seen:
        writer.writer_name = seen["PreTraceWriter"][0]
        if writer.writer_name not in WRITERS:
            raise ValidationError(
                f"unknown trace writer {writer.writer_name!r}; known: {', '.join(sorted(WRITERS))}",
                seen["PreTraceWriter"][1], path)

    run = {attr: _conv(seen, k, fn, path) for k, (attr, fn) in RUN_KEYS.items() if k in seen}
    if run.get("max_cycles", 1) < 1:
        raise ValidationError("MAX_CYCLES must be >= 1", seen["MAX_CYCLES"][1], path)
    if run.get("cache_enabled") and cache is not None and cache.block_bytes != geometry.block_size_bytes:
        raise ValidationError("CACHE_BLOCK must equal BLOCK_SIZE when the cache fronts memory",
                              seen["CACHE_ENABLE"][1], path)
    mapping = seen.get("ADDR_MAPPING", ("RoRaBaCoCh", None))
    if mapping[0] != "RoRaBaCoCh":
        raise ValidationError(f"unsupported ADDR_MAPPING {mapping[0]!r}", mapping[1], path)

    return SimConfig(geometry=geometry, profiles=profiles, controller=controller,
                     cache=cache, writer=writer, addr_mapping=mapping[0], path=path, **run)

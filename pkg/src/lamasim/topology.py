"""HBM2 hierarchy model: capacity arithmetic and the coordinate system.

Everything else in the package addresses memory through the types defined
here. The stack is modeled in pseudo-channel mode only: each 128-bit channel
is split into two independent 64-bit pseudo-channels (pch), each with its own
bank groups, banks, subarrays and mats. A 1 KB pch row spans 16 mats; one
internal column access (ICA) moves 8 bits per mat, so two ICAs form the
32-byte DRAM atom.

Instances are immutable after construction and safe to share across
concurrent simulations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict, replace


@dataclass(frozen=True)
class HbmConfig:
    """Architectural constants of the modeled HBM2 stack."""

    channels_per_die: int = 2
    dies: int = 4
    pseudo_channels_per_channel: int = 2
    bank_groups_per_pch: int = 2
    banks_per_group: int = 4
    subarrays_per_bank: int = 64
    rows_per_subarray: int = 512
    mats_per_subarray: int = 16
    mat_rows: int = 512            # bits (cells per bitline segment)
    mat_cols: int = 512            # bits (cells per wordline segment)
    row_buffer_bytes_per_pch: int = 1024
    atom_bytes: int = 32
    dq_bits: int = 64              # per pseudo-channel

    @property
    def banks_per_pch(self) -> int:
        return self.bank_groups_per_pch * self.banks_per_group

    @property
    def pch_count(self) -> int:
        return self.dies * self.channels_per_die * self.pseudo_channels_per_channel

    @property
    def channel_count(self) -> int:
        return self.dies * self.channels_per_die

    @property
    def rows_per_bank(self) -> int:
        return self.subarrays_per_bank * self.rows_per_subarray

    @property
    def mat_segment_bytes(self) -> int:
        """Bytes of one row held by a single mat (64 for the default config)."""
        return self.row_buffer_bytes_per_pch // self.mats_per_subarray

    @property
    def ica_bytes(self) -> int:
        """Bytes moved by one internal column access: 8 bits from each mat."""
        return self.mats_per_subarray  # 8 bits per mat

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "HbmConfig":
        return cls(**json.loads(text))


@dataclass(frozen=True)
class Location:
    """Coordinates of a byte inside the stack.

    Indexing is strictly hierarchical: pch, bank group, bank, subarray, row,
    mat, byte column within that mat's 64-byte row segment.
    """

    pch: int = 0
    bank_group: int = 0
    bank: int = 0
    subarray: int = 0
    row: int = 0
    mat: int = 0
    byte_col: int = 0

    def with_(self, **kw) -> "Location":
        return replace(self, **kw)


def default_config() -> HbmConfig:
    """The stock configuration: 4-die stack, 2 channels/die, 8 banks/pch,
    64 subarrays/bank, 512 rows/subarray, 16 mats, 1 KB pch row."""
    return HbmConfig()


def validate_config(cfg: HbmConfig) -> list[str]:
    """Check structural invariants. Returns the violated ones; [] means valid.

    Violations are data, not exceptions: callers running design-space sweeps
    want the full list.
    """
    violations = []
    if cfg.mats_per_subarray * cfg.mat_cols // 8 != cfg.row_buffer_bytes_per_pch:
        violations.append(
            "row width mismatch: mats_per_subarray * mat_cols / 8 = "
            f"{cfg.mats_per_subarray * cfg.mat_cols // 8} B "
            f"!= row_buffer_bytes_per_pch = {cfg.row_buffer_bytes_per_pch} B"
        )
    # One ICA moves 8 bits per mat; two ICAs must equal the DRAM atom.
    if cfg.atom_bytes != 2 * cfg.mats_per_subarray:
        violations.append(
            f"atom mismatch: 2 ICAs * {cfg.mats_per_subarray} mats * 1 B "
            f"!= atom_bytes = {cfg.atom_bytes}"
        )
    if cfg.pseudo_channels_per_channel != 2:
        violations.append(
            "only pseudo-channel mode is modeled: "
            "pseudo_channels_per_channel must be 2 (legacy 128-bit mode rejected)"
        )
    if cfg.dq_bits * cfg.pseudo_channels_per_channel != 128:
        violations.append(
            f"dq width mismatch: {cfg.dq_bits} bits/pch * "
            f"{cfg.pseudo_channels_per_channel} pch != 128 bits/channel"
        )
    for name in (
        "channels_per_die",
        "pseudo_channels_per_channel",
        "bank_groups_per_pch",
        "banks_per_group",
        "subarrays_per_bank",
        "rows_per_subarray",
        "mats_per_subarray",
        "mat_rows",
        "mat_cols",
        "row_buffer_bytes_per_pch",
    ):
        if getattr(cfg, name) < 1:
            violations.append(f"{name} must be >= 1, got {getattr(cfg, name)}")
    if cfg.dies < 0:
        violations.append(f"dies must be >= 0, got {cfg.dies}")
    return violations


def capacity_bytes(cfg: HbmConfig) -> int:
    """Total stack capacity as the product of hierarchy counts and row bytes.

    For the default config this is 4 GiB (128 banks of 32 MiB). Vendor
    datasheets for same-generation parts quote 8 GB for a 4-high stack; that
    figure assumes double-density dies and is not derivable from the
    row/bank counts modeled here, so the product arithmetic governs.
    """
    return (
        cfg.pch_count
        * cfg.banks_per_pch
        * cfg.subarrays_per_bank
        * cfg.rows_per_subarray
        * cfg.row_buffer_bytes_per_pch
    )


def bank_capacity_bytes(cfg: HbmConfig) -> int:
    return cfg.subarrays_per_bank * cfg.rows_per_subarray * cfg.row_buffer_bytes_per_pch


def validate_location(loc: Location, cfg: HbmConfig) -> list[str]:
    """Bound-check every coordinate against the config."""
    bounds = (
        ("pch", loc.pch, cfg.pch_count),
        ("bank_group", loc.bank_group, cfg.bank_groups_per_pch),
        ("bank", loc.bank, cfg.banks_per_group),
        ("subarray", loc.subarray, cfg.subarrays_per_bank),
        ("row", loc.row, cfg.rows_per_subarray),
        ("mat", loc.mat, cfg.mats_per_subarray),
        ("byte_col", loc.byte_col, cfg.mat_segment_bytes),
    )
    return [
        f"{name} = {value} out of range [0, {limit})"
        for name, value, limit in bounds
        if not 0 <= value < limit
    ]


def flat_offset(loc: Location, cfg: HbmConfig) -> int:
    """Map a Location to its unique flat byte offset.

    Bit order is row-major over pch, bank_group, bank, subarray, row, mat,
    byte_col. The hardware address map is not architecturally defined; this
    order is fixed here so traces and tests are deterministic.
    """
    off = loc.pch
    off = off * cfg.bank_groups_per_pch + loc.bank_group
    off = off * cfg.banks_per_group + loc.bank
    off = off * cfg.subarrays_per_bank + loc.subarray
    off = off * cfg.rows_per_subarray + loc.row
    off = off * cfg.mats_per_subarray + loc.mat
    off = off * cfg.mat_segment_bytes + loc.byte_col
    return off


def location_from_offset(offset: int, cfg: HbmConfig) -> Location:
    """Inverse of flat_offset."""
    if offset < 0 or offset >= capacity_bytes(cfg):
        raise ValueError(f"offset {offset} outside capacity {capacity_bytes(cfg)}")
    offset, byte_col = divmod(offset, cfg.mat_segment_bytes)
    offset, mat = divmod(offset, cfg.mats_per_subarray)
    offset, row = divmod(offset, cfg.rows_per_subarray)
    offset, subarray = divmod(offset, cfg.subarrays_per_bank)
    offset, bank = divmod(offset, cfg.banks_per_group)
    pch, bank_group = divmod(offset, cfg.bank_groups_per_pch)
    return Location(pch, bank_group, bank, subarray, row, mat, byte_col)

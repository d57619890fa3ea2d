"""DRAM command streams: scheduling, validation, latency.

The scheduler assigns each command of an ordered list the earliest time that
satisfies the timing rules below, in list order (the command bus is in-order,
so issue times are non-decreasing):

  ACT -> column same subarray   >= tRCD
  ACT -> PRE  same subarray     >= tRAS
  ACT -> ACT  same bank         >= tRC
  ACT -> ACT  same pch          >= tRRD
  column -> column              >= slots * tCCD_L within a bank group,
                                >= slots * tCCD_S across groups of a pch
  WRITE -> PRE same bank        >= tWR
  at most acts_per_faw ACTs in any rolling tFAW window (per pch by default;
  per channel when TimingParams.faw_scope == "channel")

Column occupancy: an INTERNAL_READ moves a 32-byte atom through two internal
column accesses and occupies two column slots. A LUT_RETRIEVAL occupies one
slot regardless of how many ICAs the result needs; the per-mat column
counters auto-increment for the second access, the controller issues a
single command. When the mask logic is active (parallelism < 16) a retrieval
additionally holds its bank for mask_cycles cycles of the 500 MHz bank clock.

Open-page policy: a column command must target the row currently open in its
subarray, otherwise scheduling raises OpenPageViolationError. Several
subarrays of one bank may hold rows open simultaneously (tri-state isolation
of the local buffers); the scheduler serializes their column traffic through
the shared bank group path.

Refresh, power-down states and bus turnaround beyond tCCD/tWR are out of
scope. tRP is not modeled separately; tRC covers bank reopen spacing.

schedule() is a pure function of its inputs; separate streams may be
scheduled concurrently.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

import numpy as np

from .topology import HbmConfig, Location, default_config

from . import _sched_ref

if os.environ.get("LAMASIM_FORCE_PURE"):
    _sched_core = None
else:
    try:
        from . import _sched_core  # type: ignore[attr-defined]
    except ImportError:
        _sched_core = None

#: Name of the kernel actually in use ("compiled" or "pure").
KERNEL = "compiled" if _sched_core is not None else "pure"

_kernel = _sched_core.schedule_kernel if _sched_core is not None else _sched_ref.schedule_kernel


class CommandKind(IntEnum):
    ACT = 0
    PRE = 1
    INTERNAL_READ = 2    # 2 ICAs, source row -> temporary buffer, no I/O bus
    LUT_RETRIEVAL = 3    # 1 column slot + optional mask latency
    OUTPUT_XFER = 4      # buffered results to host
    WRITE = 5
    COUNT_UPDATE = 6     # counter fetch into the column counter latches


_COLUMN_KINDS = frozenset({
    CommandKind.INTERNAL_READ,
    CommandKind.LUT_RETRIEVAL,
    CommandKind.OUTPUT_XFER,
    CommandKind.WRITE,
    CommandKind.COUNT_UPDATE,
})

_DEFAULT_ICAS = {
    CommandKind.ACT: 0,
    CommandKind.PRE: 0,
    CommandKind.INTERNAL_READ: 2,
    CommandKind.LUT_RETRIEVAL: 1,
    CommandKind.OUTPUT_XFER: 1,
    CommandKind.WRITE: 1,
    CommandKind.COUNT_UPDATE: 1,
}


class TimingError(Exception):
    pass


class OpenPageViolationError(TimingError):
    """A command hit a subarray whose open-row state does not allow it."""

    def __init__(self, index: int, message: str):
        super().__init__(f"command {index}: {message}")
        self.index = index


@dataclass(frozen=True)
class TimingParams:
    """HBM2 timing constants, nanoseconds."""

    tRC: float = 45.0
    tRCD: float = 16.0
    tRAS: float = 29.0
    tCL: float = 16.0
    tRRD: float = 2.0
    tWR: float = 16.0
    tCCD_S: float = 2.0
    tCCD_L: float = 4.0
    tFAW: float = 12.0
    acts_per_faw: int = 8
    mask_cycle_ns: float = 2.0   # bank logic clocked at 500 MHz
    faw_scope: str = "pch"       # "pch" or "channel"

    def validate(self) -> list[str]:
        violations = []
        if self.tRC < self.tRAS:
            violations.append(f"tRC ({self.tRC}) < tRAS ({self.tRAS})")
        if self.tCCD_L < self.tCCD_S:
            violations.append(f"tCCD_L ({self.tCCD_L}) < tCCD_S ({self.tCCD_S})")
        for name in ("tRC", "tRCD", "tRAS", "tCL", "tRRD", "tWR",
                     "tCCD_S", "tCCD_L", "tFAW", "mask_cycle_ns"):
            if getattr(self, name) <= 0:
                violations.append(f"{name} must be > 0")
        if self.acts_per_faw < 1:
            violations.append("acts_per_faw must be >= 1")
        if self.faw_scope not in ("pch", "channel"):
            violations.append(f"unknown faw_scope {self.faw_scope!r}")
        return violations


@dataclass(frozen=True)
class Command:
    """One DRAM command before scheduling.

    mask_cycles must be 0 when the full 16-mat parallelism is in use; the
    engines set it to the parallelism degree p when p < 16.
    """

    kind: CommandKind
    target: Location
    icas: int = -1           # -1: kind default
    mask_cycles: int = 0
    data_bits: int = 0       # payload bits for energy attribution

    def resolved_icas(self) -> int:
        return _DEFAULT_ICAS[self.kind] if self.icas < 0 else self.icas

    def slots(self) -> int:
        """Column slots occupied on the bank group path."""
        if self.kind == CommandKind.INTERNAL_READ:
            return self.resolved_icas()
        if self.kind in _COLUMN_KINDS:
            return 1
        return 0


@dataclass
class Violation:
    index: int
    rule: str
    detail: str

    def __str__(self) -> str:
        return f"[{self.index}] {self.rule}: {self.detail}"


class CommandStream:
    """A scheduled command list stored as parallel numpy arrays."""

    _FIELDS = ("kind", "pch", "bank_group", "bank", "subarray", "row", "col",
               "icas", "slots", "mask_cycles", "data_bits")

    def __init__(self, cfg: HbmConfig, arrays: dict[str, np.ndarray]):
        self.cfg = cfg
        self.kind = arrays["kind"]
        self.pch = arrays["pch"]
        self.bank_group = arrays["bank_group"]
        self.bank = arrays["bank"]
        self.subarray = arrays["subarray"]
        self.row = arrays["row"]
        self.col = arrays["col"]
        self.icas = arrays["icas"]
        self.slots = arrays["slots"]
        self.mask_cycles = arrays["mask_cycles"]
        self.data_bits = arrays["data_bits"]
        self.issue_ns = arrays["issue_ns"]
        self.completion_ns = arrays["completion_ns"]
        self.faw_stall_ns = arrays["faw_stall_ns"]

    def __len__(self) -> int:
        return len(self.kind)

    # linear resource ids
    def group_ids(self) -> np.ndarray:
        return self.pch * self.cfg.bank_groups_per_pch + self.bank_group

    def bank_ids(self) -> np.ndarray:
        return self.group_ids() * self.cfg.banks_per_group + self.bank

    def sub_ids(self) -> np.ndarray:
        return self.bank_ids() * self.cfg.subarrays_per_bank + self.subarray

    def count(self, kind: CommandKind) -> int:
        return int(np.count_nonzero(self.kind == int(kind)))

    def total_faw_stall_ns(self) -> float:
        return float(self.faw_stall_ns.sum())

    def commands(self) -> list[Command]:
        out = []
        for i in range(len(self)):
            out.append(Command(
                kind=CommandKind(int(self.kind[i])),
                target=Location(int(self.pch[i]), int(self.bank_group[i]),
                                int(self.bank[i]), int(self.subarray[i]),
                                int(self.row[i]), 0, int(self.col[i])),
                icas=int(self.icas[i]),
                mask_cycles=int(self.mask_cycles[i]),
                data_bits=int(self.data_bits[i]),
            ))
        return out

    def open_row_trace(self) -> list[tuple[int, int, int | None]]:
        """Per-bank open-row state changes: (command index, subarray id, row)."""
        trace = []
        subs = self.sub_ids()
        for i in range(len(self)):
            k = self.kind[i]
            if k == CommandKind.ACT:
                trace.append((i, int(subs[i]), int(self.row[i])))
            elif k == CommandKind.PRE:
                trace.append((i, int(subs[i]), None))
        return trace


_IR = int(CommandKind.INTERNAL_READ)
_NONCOL = (int(CommandKind.ACT), int(CommandKind.PRE))


def _to_arrays(cmds: Sequence[Command], cfg: HbmConfig) -> dict[str, np.ndarray]:
    kinds = [int(c.kind) for c in cmds]
    icas = [(_DEFAULT_ICAS[c.kind] if c.icas < 0 else c.icas) for c in cmds]
    slots = [ic if k == _IR else (0 if k in _NONCOL else 1)
             for k, ic in zip(kinds, icas)]
    locs = [c.target for c in cmds]
    return {
        "kind": np.array(kinds, dtype=np.int8),
        "pch": np.array([l.pch for l in locs], dtype=np.int32),
        "bank_group": np.array([l.bank_group for l in locs], dtype=np.int32),
        "bank": np.array([l.bank for l in locs], dtype=np.int32),
        "subarray": np.array([l.subarray for l in locs], dtype=np.int32),
        "row": np.array([l.row for l in locs], dtype=np.int32),
        "col": np.array([l.byte_col for l in locs], dtype=np.int32),
        "icas": np.array(icas, dtype=np.int8),
        "slots": np.array(slots, dtype=np.int8),
        "mask_cycles": np.array([c.mask_cycles for c in cmds], dtype=np.int8),
        "data_bits": np.array([c.data_bits for c in cmds], dtype=np.int64),
    }


_ERR_MESSAGES = {
    1: "ACT to a subarray that already has an open row",
    2: "column command to a closed subarray",
    3: "column command to a row that is not the open row",
    4: "PRE to a closed subarray",
}


def schedule_arrays(arrays: dict[str, np.ndarray], timing: TimingParams,
                    cfg: HbmConfig) -> CommandStream:
    """Schedule commands given as parallel arrays (engine fast path)."""
    n_pch = cfg.pch_count
    n_group = n_pch * cfg.bank_groups_per_pch
    n_bank = n_group * cfg.banks_per_group
    n_sub = n_bank * cfg.subarrays_per_bank

    pch = arrays["pch"].astype(np.int32)
    group = pch * cfg.bank_groups_per_pch + arrays["bank_group"]
    bank = group * cfg.banks_per_group + arrays["bank"]
    sub = bank * cfg.subarrays_per_bank + arrays["subarray"]

    issue, completion, stall, err_index, err_code = _kernel(
        arrays["kind"].astype(np.int8),
        pch,
        group.astype(np.int32),
        bank.astype(np.int32),
        sub.astype(np.int32),
        arrays["row"].astype(np.int32),
        arrays["slots"].astype(np.int8),
        arrays["mask_cycles"].astype(np.int8),
        n_pch, n_group, n_bank, n_sub,
        timing.tRC, timing.tRCD, timing.tRAS, timing.tCL, timing.tRRD,
        timing.tWR, timing.tCCD_S, timing.tCCD_L, timing.tFAW,
        timing.acts_per_faw, timing.mask_cycle_ns,
        timing.faw_scope == "channel",
    )
    if err_code != 0:
        raise OpenPageViolationError(int(err_index), _ERR_MESSAGES[int(err_code)])

    out = dict(arrays)
    out["issue_ns"] = issue
    out["completion_ns"] = completion
    out["faw_stall_ns"] = stall
    return CommandStream(cfg, out)


def _check_bounds(arrays: dict[str, np.ndarray], cfg: HbmConfig) -> None:
    limits = (
        ("pch", cfg.pch_count),
        ("bank_group", cfg.bank_groups_per_pch),
        ("bank", cfg.banks_per_group),
        ("subarray", cfg.subarrays_per_bank),
        ("row", cfg.rows_per_subarray),
        ("col", cfg.mat_segment_bytes),
    )
    for name, limit in limits:
        a = arrays[name]
        bad = (a < 0) | (a >= limit)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise ValueError(
                f"command {i}: {name} = {int(a[i])} out of range [0, {limit})")


def schedule(cmds: Sequence[Command], timing: TimingParams,
             cfg: HbmConfig | None = None) -> CommandStream:
    """Assign earliest legal issue times to an ordered command list.

    Raises OpenPageViolationError when a column command targets a closed or
    wrong row (open-page discipline is a precondition, not a repairable
    state). Location bound errors raise ValueError.
    """
    cfg = cfg or default_config()
    arrays = _to_arrays(cmds, cfg)
    _check_bounds(arrays, cfg)
    return schedule_arrays(arrays, timing, cfg)


def elapsed_ns(stream: CommandStream) -> float:
    """Last completion minus first issue; 0 for an empty stream."""
    if len(stream) == 0:
        return 0.0
    return float(stream.completion_ns.max() - stream.issue_ns.min())


def validate(stream: CommandStream, timing: TimingParams) -> list[Violation]:
    """Re-check every scheduling rule against the stream's timestamps.

    Independent of the scheduler: commands are replayed in timestamp order
    and each rule is checked as an explicit pairwise or sliding-window
    condition. Violations are returned as data, never raised.
    """
    eps = 1e-9
    violations: list[Violation] = []
    n = len(stream)
    if n == 0:
        return violations

    order = np.argsort(stream.issue_ns, kind="stable")
    kind = stream.kind
    issue = stream.issue_ns
    rows = stream.row
    pchs = stream.pch
    groups = stream.group_ids()
    banks = stream.bank_ids()
    subs = stream.sub_ids()
    slots = stream.slots
    masks = stream.mask_cycles

    # tFAW: sliding window count per scope unit over sorted ACT times.
    act_idx = [int(i) for i in order if kind[i] == CommandKind.ACT]
    by_unit: dict[int, list[float]] = {}
    unit_of = {}
    for i in act_idx:
        unit = int(pchs[i]) // 2 if timing.faw_scope == "channel" else int(pchs[i])
        by_unit.setdefault(unit, []).append(float(issue[i]))
        unit_of.setdefault(unit, []).append(i)
    k = timing.acts_per_faw
    for unit, times in by_unit.items():
        for j in range(len(times) - k):
            if times[j + k] - times[j] < timing.tFAW - eps:
                violations.append(Violation(
                    unit_of[unit][j + k], "tFAW",
                    f"{k + 1} ACTs within {times[j + k] - times[j]:.3f} ns "
                    f"< tFAW {timing.tFAW}"))

    # per-resource replay in time order
    open_row: dict[int, int] = {}
    act_time: dict[int, float] = {}
    last_act_bank: dict[int, float] = {}
    last_act_pch: dict[int, float] = {}
    last_write_bank: dict[int, float] = {}
    group_free: dict[int, float] = {}
    pch_free: dict[int, float] = {}
    bank_free: dict[int, float] = {}

    for i in order:
        i = int(i)
        t = float(issue[i])
        kd = int(kind[i])
        p, g, b, s = int(pchs[i]), int(groups[i]), int(banks[i]), int(subs[i])
        if kd == CommandKind.ACT:
            if b in last_act_bank and t - last_act_bank[b] < timing.tRC - eps:
                violations.append(Violation(
                    i, "tRC", f"ACT {t - last_act_bank[b]:.3f} ns after previous "
                    f"ACT to bank {b}, needs {timing.tRC}"))
            if p in last_act_pch and t - last_act_pch[p] < timing.tRRD - eps:
                violations.append(Violation(
                    i, "tRRD", f"ACT {t - last_act_pch[p]:.3f} ns after previous "
                    f"ACT in pch {p}, needs {timing.tRRD}"))
            if s in open_row:
                violations.append(Violation(
                    i, "open-page", f"ACT while row {open_row[s]} open in subarray {s}"))
            last_act_bank[b] = t
            last_act_pch[p] = t
            open_row[s] = int(rows[i])
            act_time[s] = t
        elif kd == CommandKind.PRE:
            if s not in open_row:
                violations.append(Violation(i, "open-page", f"PRE to closed subarray {s}"))
            else:
                if t - act_time[s] < timing.tRAS - eps:
                    violations.append(Violation(
                        i, "tRAS", f"PRE {t - act_time[s]:.3f} ns after ACT, "
                        f"needs {timing.tRAS}"))
                del open_row[s]
            if b in last_write_bank and t - last_write_bank[b] < timing.tWR - eps:
                violations.append(Violation(
                    i, "tWR", f"PRE {t - last_write_bank[b]:.3f} ns after WRITE, "
                    f"needs {timing.tWR}"))
        else:
            if s not in open_row:
                violations.append(Violation(
                    i, "open-page", f"column command to closed subarray {s}"))
            elif open_row[s] != int(rows[i]):
                violations.append(Violation(
                    i, "open-page", f"column command to row {int(rows[i])} but row "
                    f"{open_row[s]} is open"))
            else:
                if t - act_time[s] < timing.tRCD - eps:
                    violations.append(Violation(
                        i, "tRCD", f"column {t - act_time[s]:.3f} ns after ACT, "
                        f"needs {timing.tRCD}"))
            if g in group_free and t < group_free[g] - eps:
                violations.append(Violation(
                    i, "tCCD_L", f"column at {t:.3f} ns while group {g} busy "
                    f"until {group_free[g]:.3f}"))
            if p in pch_free and t < pch_free[p] - eps:
                violations.append(Violation(
                    i, "tCCD_S", f"column at {t:.3f} ns while pch {p} busy "
                    f"until {pch_free[p]:.3f}"))
            if b in bank_free and t < bank_free[b] - eps:
                violations.append(Violation(
                    i, "mask-busy", f"column at {t:.3f} ns while bank {b} logic "
                    f"busy until {bank_free[b]:.3f}"))
            sl = int(slots[i])
            group_free[g] = t + sl * timing.tCCD_L
            pch_free[p] = t + sl * timing.tCCD_S
            bank_free[b] = t + sl * timing.tCCD_L + int(masks[i]) * timing.mask_cycle_ns
            if kd == CommandKind.WRITE:
                last_write_bank[b] = t

    return violations


_KIND_NAMES = {k: k.name for k in CommandKind}
_KIND_BY_NAME = {k.name: k for k in CommandKind}


def export_trace(stream: CommandStream) -> str:
    """Command trace as line-oriented text:

        <t_ns> <kind> <pch>.<bg>.<bank>.<sub>.<row>.<col>
    """
    lines = []
    for i in range(len(stream)):
        lines.append(
            f"{stream.issue_ns[i]:.3f} {_KIND_NAMES[CommandKind(int(stream.kind[i]))]} "
            f"{stream.pch[i]}.{stream.bank_group[i]}.{stream.bank[i]}."
            f"{stream.subarray[i]}.{stream.row[i]}.{stream.col[i]}"
        )
    return "\n".join(lines) + ("\n" if lines else "")


def import_trace(text: str, cfg: HbmConfig | None = None) -> CommandStream:
    """Rebuild a stream from trace text.

    The trace format carries no ICA/mask fields, so kind defaults apply;
    completion times are reconstructed as issue + tCL for column commands
    with the default timing. Intended for validate-trace style checks.
    """
    cfg = cfg or default_config()
    timing = TimingParams()
    recs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            t_str, kind_str, coord = line.split()
            parts = [int(x) for x in coord.split(".")]
            pch, bg, bank, sub, row, col = parts
            recs.append((float(t_str), _KIND_BY_NAME[kind_str], pch, bg, bank, sub, row, col))
        except (ValueError, KeyError) as exc:
            raise ValueError(f"trace line {lineno}: cannot parse {line!r}") from exc

    n = len(recs)
    arrays = {
        "kind": np.array([int(r[1]) for r in recs], dtype=np.int8),
        "pch": np.array([r[2] for r in recs], dtype=np.int32),
        "bank_group": np.array([r[3] for r in recs], dtype=np.int32),
        "bank": np.array([r[4] for r in recs], dtype=np.int32),
        "subarray": np.array([r[5] for r in recs], dtype=np.int32),
        "row": np.array([r[6] for r in recs], dtype=np.int32),
        "col": np.array([r[7] for r in recs], dtype=np.int32),
        "icas": np.array([_DEFAULT_ICAS[r[1]] for r in recs], dtype=np.int8),
        "slots": np.array(
            [_DEFAULT_ICAS[r[1]] if r[1] == CommandKind.INTERNAL_READ
             else (1 if r[1] in _COLUMN_KINDS else 0) for r in recs],
            dtype=np.int8),
        "mask_cycles": np.zeros(n, dtype=np.int8),
        "data_bits": np.zeros(n, dtype=np.int64),
        "issue_ns": np.array([r[0] for r in recs], dtype=np.float64),
        "faw_stall_ns": np.zeros(n, dtype=np.float64),
    }
    completion = arrays["issue_ns"].copy()
    for i, r in enumerate(recs):
        if r[1] in _COLUMN_KINDS:
            completion[i] += timing.tWR if r[1] == CommandKind.WRITE else timing.tCL
        elif r[1] == CommandKind.ACT:
            completion[i] += timing.tRCD
    arrays["completion_ns"] = completion
    return CommandStream(cfg, arrays)


def concat_streams(a: CommandStream, b: CommandStream) -> CommandStream:
    """Concatenate two scheduled streams without rescheduling."""
    if a.cfg != b.cfg:
        raise ValueError("streams use different configs")
    arrays = {}
    for name in (*CommandStream._FIELDS, "issue_ns", "completion_ns", "faw_stall_ns"):
        arrays[name] = np.concatenate([getattr(a, name), getattr(b, name)])
    return CommandStream(a.cfg, arrays)

"""LUT-based bulk arithmetic over operand-coalesced batches.

A batch applies f(a, b_i) to a scalar a and a vector b. The source subarray
holds b zero-padded to one byte per element (1024 elements per 1 KB row);
the compute subarray holds the function table so that activating row a and
column-addressing by b_i retrieves f(a, b_i) directly:

  result bytes for (a, b) live in mat  replica_base + (b >> 5)  of the
  element's replica, at byte address {b[4:0], 0} (low byte) and {b[4:0], 1}
  (high byte) for 16-bit results, or byte b for the single-byte 4-bit case.

Parallelism per retrieval (p), column addressing bits and ICAs per result
for multiplication-style tables:

  bits   p   col LSBs  mask MSBs  ICAs/result
   4    16      4          0           1
   5    16      5          0           2
   6     8      5          1           2
   7     4      5          2           2
   8     2      5          3           2

When p < 16 the mask logic picks the valid mat per element group and
concatenates results in a 16-byte buffer; the mask costs p cycles of the
500 MHz bank clock per retrieval. With p == 16 the mask is bypassed and
mask_cycles is 0.

Command stream per batch and bank: one ACT per touched source row, one
INTERNAL_READ per 32 elements (two ICAs into the temporary buffer), one ACT
of the compute row a, one LUT_RETRIEVAL per p results, and one PRE per
opened row at the end. The retrieval's second ICA for 16-bit results is
performed by the auto-incrementing column counters inside the same command
slot, so it never appears as a separate command. Buffered mask output rides
the retrievals' bus slots and is not a separate command either; the
OUTPUT_XFER kind is reserved for flows that drain bank-side buffers (see
the accelerator module).

Engines hold no shared mutable state; one instance per simulated bank may
run concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .topology import HbmConfig, Location, default_config
from .timing import Command, CommandKind, CommandStream, TimingParams, schedule

_PRECISION_TABLE = {
    # bits: (p, col_lsbs, mask_msbs, icas_per_result)
    4: (16, 4, 0, 1),
    5: (16, 5, 0, 2),
    6: (8, 5, 1, 2),
    7: (4, 5, 2, 2),
    8: (2, 5, 3, 2),
}

TEMP_BUFFER_BYTES = 64
OUTPUT_BUFFER_BYTES = 16
ELEMENTS_PER_INTERNAL_READ = 32  # one 32-byte atom of zero-padded elements


class LutEngineError(Exception):
    pass


@dataclass(frozen=True)
class LutLayout:
    """Placement of one function table in a compute subarray."""

    op_bitwidth: int
    result_bits: int
    mats_per_lut: int
    p: int
    lut_rows: int
    replicas_per_subarray: int
    col_lsbs: int
    mask_msb_count: int
    icas_per_result: int

    @property
    def result_bytes(self) -> int:
        return self.result_bits // 8

    @property
    def mask_cycles(self) -> int:
        return self.p if self.p < 16 else 0


@dataclass(frozen=True)
class CoalescedBatch:
    """f(a, b_i) for one scalar a; positional_index addresses the source row."""

    scalar_a: int
    vector_b: np.ndarray
    positional_index: int = 0


@dataclass
class TemporaryBuffer:
    """64-byte staging buffer for zero-padded b elements."""

    capacity: int = TEMP_BUFFER_BYTES

    def load(self, elements: np.ndarray) -> np.ndarray:
        if elements.size > self.capacity:
            raise LutEngineError(
                f"temporary buffer overflow: {elements.size} B > {self.capacity} B")
        return elements.astype(np.uint8)


class OutputBuffer:
    """Mask-logic concatenation buffer: flushes at exactly 16 bytes, plus one
    final partial flush when the batch ends."""

    def __init__(self):
        self._pending = 0
        self.flushes: list[int] = []

    def push(self, nbytes: int) -> None:
        self._pending += nbytes
        while self._pending >= OUTPUT_BUFFER_BYTES:
            self.flushes.append(OUTPUT_BUFFER_BYTES)
            self._pending -= OUTPUT_BUFFER_BYTES

    def finish(self) -> None:
        if self._pending:
            self.flushes.append(self._pending)
            self._pending = 0


def build_layout(
    f: Callable[[int, int], int],
    op_bitwidth: int,
    cfg: HbmConfig | None = None,
) -> tuple[LutLayout, np.ndarray]:
    """Materialize the table for f and its placement.

    Returns (layout, image) where image[row, mat, byte] are the compute
    subarray bytes: 2^bits rows, 16 mats, 64 bytes each. Row r holds f(r, b)
    for every b, result bytes little-endian, replicated across the full row
    width. Results are 8-bit only at 4-bit operands; wider operands store
    word-aligned 16-bit results.
    """
    cfg = cfg or default_config()
    if not 4 <= op_bitwidth <= 8:
        raise LutEngineError(f"op_bitwidth must be in 4..8, got {op_bitwidth}")
    p, col_lsbs, mask_msbs, icas = _PRECISION_TABLE[op_bitwidth]
    lut_rows = 1 << op_bitwidth
    result_bits = 8 if op_bitwidth == 4 else 16
    mats_per_lut = cfg.mats_per_subarray // p
    layout = LutLayout(
        op_bitwidth=op_bitwidth,
        result_bits=result_bits,
        mats_per_lut=mats_per_lut,
        p=p,
        lut_rows=lut_rows,
        replicas_per_subarray=p,
        col_lsbs=col_lsbs,
        mask_msb_count=mask_msbs,
        icas_per_result=icas,
    )
    if lut_rows > cfg.rows_per_subarray:
        raise LutEngineError(f"{lut_rows} LUT rows exceed subarray rows")

    domain = np.arange(lut_rows, dtype=np.int64)
    seg = cfg.mat_segment_bytes
    image = np.zeros((lut_rows, cfg.mats_per_subarray, seg), dtype=np.uint8)
    max_result = (1 << result_bits) - 1
    lut_mat = domain >> col_lsbs                       # mat within one replica
    lut_off = (domain & ((1 << col_lsbs) - 1)) * layout.result_bytes
    for r in range(lut_rows):
        values = np.array([f(r, int(b)) for b in domain], dtype=np.int64)
        if np.any(values < 0) or np.any(values > max_result):
            raise LutEngineError(
                f"f({r}, .) leaves the {result_bits}-bit result range")
        for replica in range(p):
            mats = replica * mats_per_lut + lut_mat
            image[r, mats, lut_off] = values & 0xFF
            if layout.result_bytes == 2:
                image[r, mats, lut_off + 1] = (values >> 8) & 0xFF
    return layout, image


def export_lut_image(image: np.ndarray, row: int | None = None) -> bytes:
    """Raw bytes of the materialized table, one subarray row at a time."""
    if row is not None:
        return image[row].tobytes()
    return image.tobytes()


def column_addresses(b_i: int, layout: LutLayout) -> tuple[int, int | None, int]:
    """Column addressing for one element: (ica1, ica2 or None, mask select).

    16-bit results: ica1 = {b[4:0], 0}, ica2 = {b[4:0], 1}; the mask select
    is the element's top mask_msb_count bits. The 4-bit case is a single ICA
    at address b."""
    if not 0 <= b_i < (1 << layout.op_bitwidth):
        raise LutEngineError(
            f"b element {b_i} outside {layout.op_bitwidth}-bit domain")
    if layout.op_bitwidth == 4:
        return b_i, None, 0
    low = b_i & 0x1F
    mask_select = b_i >> layout.col_lsbs if layout.mask_msb_count else 0
    return (low << 1), (low << 1) | 1, mask_select


def mask_select(fetched: np.ndarray, selects: Sequence[int],
                layout: LutLayout) -> np.ndarray:
    """Filter one 16-byte ICA: keep, per element group, the byte from the
    mat its mask select names. Identity passthrough at p == 16."""
    fetched = np.asarray(fetched, dtype=np.uint8)
    if fetched.size != 16:
        raise LutEngineError(f"expected 16 fetched bytes, got {fetched.size}")
    if layout.p == 16:
        return fetched.copy()
    if len(selects) != layout.p:
        raise LutEngineError(
            f"expected {layout.p} mask selects, got {len(selects)}")
    out = np.empty(layout.p, dtype=np.uint8)
    for group, sel in enumerate(selects):
        out[group] = fetched[group * layout.mats_per_lut + sel]
    return out


@dataclass
class BatchExecution:
    """Command structure for one batch on one bank.

    row_segments holds one self-contained command run per touched source
    row ([ACT, ACT, columns..., PRE, PRE]); commands is the flattened list."""

    row_segments: list[list[Command]]
    output_flushes: list[int]

    @property
    def commands(self) -> list[Command]:
        return [c for seg in self.row_segments for c in seg]


def _source_rows_needed(n_elements: int, cfg: HbmConfig) -> int:
    per_row = cfg.row_buffer_bytes_per_pch  # zero-padded, one byte each
    return max(1, -(-n_elements // per_row))


def build_batch_commands(
    batch: CoalescedBatch,
    layout: LutLayout,
    cfg: HbmConfig,
    bank_loc: Location,
    source_subarray: int = 0,
    compute_subarray: int = 1,
) -> BatchExecution:
    """Emit the per-bank command list for one batch and compute its results.

    Functional results are read back from the materialized layout by the
    caller (execute_batch); here the command structure is produced along
    with the mask buffer flush bookkeeping.
    """
    b = np.asarray(batch.vector_b, dtype=np.int64)
    if b.ndim != 1 or b.size == 0:
        raise LutEngineError("vector_b must be a non-empty 1-d array")
    if np.any(b < 0) or np.any(b >= (1 << layout.op_bitwidth)):
        raise LutEngineError("b element outside the operand domain")
    if not 0 <= batch.scalar_a < (1 << layout.op_bitwidth):
        raise LutEngineError("scalar a outside the operand domain")
    per_row = cfg.row_buffer_bytes_per_pch
    rows_needed = _source_rows_needed(b.size, cfg)
    if batch.positional_index + rows_needed > cfg.rows_per_subarray:
        raise LutEngineError("batch does not fit the source subarray rows")

    src = bank_loc.with_(subarray=source_subarray)
    cmp_ = bank_loc.with_(subarray=compute_subarray)
    read_bits = ELEMENTS_PER_INTERNAL_READ * 8
    result_bytes = layout.result_bytes
    mask_cycles = layout.mask_cycles
    out_buffer = OutputBuffer()

    # Each source row is a full open/compute/close cycle: rows beyond the
    # first reopen the compute row too, so ACT count is 2 per touched source
    # row at every bitwidth.
    segments: list[list[Command]] = []
    for row_i in range(rows_needed):
        row_elems = b[row_i * per_row:(row_i + 1) * per_row]
        seg: list[Command] = []
        seg.append(Command(CommandKind.ACT,
                           src.with_(row=batch.positional_index + row_i)))
        seg.append(Command(CommandKind.ACT, cmp_.with_(row=batch.scalar_a)))
        chunks = -(-row_elems.size // ELEMENTS_PER_INTERNAL_READ)
        for c in range(chunks):
            chunk = row_elems[c * ELEMENTS_PER_INTERNAL_READ:
                              (c + 1) * ELEMENTS_PER_INTERNAL_READ]
            seg.append(Command(
                CommandKind.INTERNAL_READ,
                src.with_(row=batch.positional_index + row_i,
                          byte_col=(c * ELEMENTS_PER_INTERNAL_READ) % cfg.mat_segment_bytes),
                data_bits=read_bits))
            groups = -(-chunk.size // layout.p)
            for g in range(groups):
                group = chunk[g * layout.p:(g + 1) * layout.p]
                ica1, _, _ = column_addresses(int(group[0]), layout)
                valid_bytes = group.size * result_bytes
                seg.append(Command(
                    CommandKind.LUT_RETRIEVAL,
                    cmp_.with_(row=batch.scalar_a, byte_col=ica1),
                    icas=layout.icas_per_result,
                    mask_cycles=mask_cycles,
                    data_bits=valid_bytes * 8))
                if layout.p < 16:
                    out_buffer.push(valid_bytes)
        seg.append(Command(CommandKind.PRE,
                           src.with_(row=batch.positional_index + row_i)))
        seg.append(Command(CommandKind.PRE, cmp_.with_(row=batch.scalar_a)))
        segments.append(seg)
    out_buffer.finish()

    return BatchExecution(row_segments=segments, output_flushes=out_buffer.flushes)


def lookup_results(batch: CoalescedBatch, layout: LutLayout,
                   image: np.ndarray) -> np.ndarray:
    """Read f(a, b_i) for the whole batch out of the materialized bytes,
    through the column addressing and mask paths."""
    b = np.asarray(batch.vector_b, dtype=np.int64)
    a = batch.scalar_a
    p = layout.p
    mpl = layout.mats_per_lut
    n = b.size
    replica = np.arange(n, dtype=np.int64) % p          # element slot in its group
    if layout.op_bitwidth == 4:
        mat = replica * mpl
        low = image[a, mat, b]
        return low.astype(np.int64)
    lsb = b & 0x1F
    sel = (b >> layout.col_lsbs) if layout.mask_msb_count else np.zeros(n, dtype=np.int64)
    mat = replica * mpl + sel
    low = image[a, mat, lsb * 2].astype(np.int64)
    high = image[a, mat, lsb * 2 + 1].astype(np.int64)
    return low | (high << 8)


def execute_batch(
    batch: CoalescedBatch,
    layout: LutLayout,
    image: np.ndarray,
    cfg: HbmConfig | None = None,
    timing: TimingParams | None = None,
    bank_loc: Location | None = None,
    run_scheduler: bool = True,
) -> tuple[np.ndarray, CommandStream | list[Command]]:
    """Run one operand-coalesced batch on one bank.

    Returns the bit-exact results and the command stream (scheduled when
    run_scheduler, otherwise the raw command list)."""
    cfg = cfg or default_config()
    timing = timing or TimingParams()
    bank_loc = bank_loc or Location()
    execution = build_batch_commands(batch, layout, cfg, bank_loc)
    results = lookup_results(batch, layout, image)
    if not run_scheduler:
        return results, execution.commands
    return results, schedule(execution.commands, timing, cfg)


def interleave_round_robin(per_bank: list[list[list[Command]]]) -> list[Command]:
    """Merge per-bank row segments for one shared command bus.

    Segment by segment: every bank's ACTs round-robin, then column traffic
    alternating across banks one command at a time, then the PREs. This is
    the issue order a controller driving one batch per bank would produce
    and is what the reference comparison assumes; keeping each source row's
    open/close cycle inside its segment preserves open-page legality for
    batches spanning several rows."""
    merged: list[Command] = []
    n_segments = max(len(segs) for segs in per_bank)
    for si in range(n_segments):
        acts, cols, pres = [], [], []
        for segs in per_bank:
            if si >= len(segs):
                continue
            seg = segs[si]
            acts.append([c for c in seg if c.kind == CommandKind.ACT])
            cols.append([c for c in seg if c.kind not in
                         (CommandKind.ACT, CommandKind.PRE)])
            pres.append([c for c in seg if c.kind == CommandKind.PRE])
        for slot in range(max(len(a) for a in acts)):
            for bank_acts in acts:
                if slot < len(bank_acts):
                    merged.append(bank_acts[slot])
        cursors = [0] * len(cols)
        remaining = sum(len(c) for c in cols)
        while remaining:
            for bi, cmds in enumerate(cols):
                if cursors[bi] < len(cmds):
                    merged.append(cmds[cursors[bi]])
                    cursors[bi] += 1
                    remaining -= 1
        for bank_pres in pres:
            merged.extend(bank_pres)
    return merged


#: Channel-level activations per tFAW window used by the stall sizing
#: analysis. The window's namesake is four activates; the per-pch scheduler
#: budget follows the parameter table instead (acts_per_faw = 8 per 12 ns),
#: and the two conventions disagree in the source material. The sizing
#: analysis below reproduces the channel-scope arithmetic: a full channel
#: round of 2 ACTs x 16 banks needs ceil(32 / 4) = 8 windows.
FAW_ANALYSIS_ACTS_PER_WINDOW = 4


@dataclass(frozen=True)
class StallAnalysis:
    """Outcome of the all-banks-busy activation-budget comparison."""

    stalls: bool
    compute_window_ns: float
    act_budget_ns: float
    batch_elems: int
    banks_per_channel: int


def faw_stall_analysis(
    batch_elems: int,
    op_bits: int = 4,
    banks_per_channel: int = 16,
    cfg: HbmConfig | None = None,
    timing: TimingParams | None = None,
) -> StallAnalysis:
    """Does a steady stream of coalesced batches outrun the ACT budget?

    With every bank of a channel running batches back to back, each round
    issues two ACTs per bank. Those activations can only be buried under the
    batch's own column activity if that activity lasts at least as long as
    the channel needs to issue the whole round of ACTs under the rolling
    window (ceil(2 * banks / acts_per_window) windows). The compute window
    is measured on a real scheduled single-bank batch as the span from the
    first column command issue to the last column completion; the head
    (row activation and tRCD) overlaps the previous round and is excluded.

    Stalls therefore appear exactly when the window is shorter than the
    budget; at the default constants and 4-bit operands the crossover sits
    between 128 and 129 elements.
    """
    cfg = cfg or default_config()
    timing = timing or TimingParams()
    layout, image = build_layout(lambda a, b: a * b, op_bits, cfg)
    b = np.arange(batch_elems, dtype=np.int64) % (1 << op_bits)
    batch = CoalescedBatch(scalar_a=3, vector_b=b, positional_index=0)
    execution = build_batch_commands(batch, layout, cfg, Location())
    stream = schedule(execution.commands, timing, cfg)

    col_mask = ~np.isin(stream.kind, (int(CommandKind.ACT), int(CommandKind.PRE)))
    window = float(stream.completion_ns[col_mask].max()
                   - stream.issue_ns[col_mask].min())
    round_acts = 2 * banks_per_channel
    windows_needed = -(-round_acts // FAW_ANALYSIS_ACTS_PER_WINDOW)
    budget = windows_needed * timing.tFAW
    return StallAnalysis(
        stalls=window < budget,
        compute_window_ns=window,
        act_budget_ns=budget,
        batch_elems=batch_elems,
        banks_per_channel=banks_per_channel,
    )


def run_bulk_mul(
    op_bits: int,
    ops: int,
    parallelism: int,
    cfg: HbmConfig | None = None,
    timing: TimingParams | None = None,
    f: Callable[[int, int], int] | None = None,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, CommandStream]:
    """The reference bulk workload: ops applications of f split into
    operand-coalesced batches over `parallelism` banks of one bank group.

    Returns (a_values, b_values, results, scheduled stream). Results order
    matches the flattened (batch, element) order."""
    cfg = cfg or default_config()
    timing = timing or TimingParams()
    f = f or (lambda a, b: a * b)
    if ops < 1:
        raise LutEngineError("ops must be >= 1")
    if parallelism < 1:
        raise LutEngineError("parallelism must be >= 1")

    layout, image = build_layout(f, op_bits, cfg)
    rng = np.random.default_rng(seed)
    per_bank_ops = -(-ops // parallelism)
    scalars = rng.integers(0, 1 << op_bits, size=parallelism)
    banks_per_pch = cfg.banks_per_pch

    per_bank_segments: list[list[list[Command]]] = []
    all_a, all_b, all_results = [], [], []
    for bank_i in range(parallelism):
        n_here = min(per_bank_ops, ops - bank_i * per_bank_ops)
        if n_here <= 0:
            break
        flat = bank_i % banks_per_pch
        loc = Location(pch=bank_i // banks_per_pch,
                       bank_group=flat // cfg.banks_per_group,
                       bank=flat % cfg.banks_per_group)
        b_vec = rng.integers(0, 1 << op_bits, size=n_here)
        batch = CoalescedBatch(scalar_a=int(scalars[bank_i]), vector_b=b_vec,
                               positional_index=bank_i)
        execution = build_batch_commands(batch, layout, cfg, loc)
        per_bank_segments.append(execution.row_segments)
        all_a.append(np.full(n_here, scalars[bank_i]))
        all_b.append(b_vec)
        all_results.append(lookup_results(batch, layout, image))

    merged = interleave_round_robin(per_bank_segments)
    stream = schedule(merged, timing, cfg)
    return (np.concatenate(all_a), np.concatenate(all_b),
            np.concatenate(all_results), stream)

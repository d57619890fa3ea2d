"""Accelerator flow: exponentially quantized layers on the LUT substrate.

A fully-connected layer maps onto one or more banks, each using three
subarray roles:

  source    encoded weights, one row per input index, 1024 one-byte
            {sign, padded exponent} codes across the row (input-stationary:
            row i feeds all output neurons for input i)
  compute   the exponent-sum table: row eA holds the padded 8-bit sums
            eA + eW for every eW (one mat per table below 7-bit exponents,
            two mats at 7-bit)
  counters  per output neuron three signed 8-bit occurrence arrays, for the
            activation exponent, the weight exponent and their sum

Per input activation (broadcast to the bank's activation buffer) the flow
is: fetch 16 weights per internal column access from the open source row;
retrieve their exponent sums from the open compute row; then fetch, adjust
by the XNOR of the signs, and write back the occurrence counters. Rows stay
open across the whole neuron sweep, so each input costs one ACT per touched
subarray row; counter rows are precharged when their neuron set completes.

Counters are held in 16-bit latches here purely so overflow is *detected*:
any count leaving [-128, 127] raises CounterOverflowError instead of
silently wrapping the stored byte.

Parallelism per step follows the layer's exponent width n:

  weights fetch  p = 16 always
  exponent sums  p = 16 (n <= 6), 8 (n = 7, table spans two mats)
  counter update p = 16 (n <= 4: all three arrays of a neuron fit one mat;
                 n = 5: still 16, arrays split over two subarrays),
                 8 (n = 6), 4 (n = 7)

Counter array sizes: 2^n for each single-exponent array and 2^(n+1)-1 for
the sum array (exponent sums span [2*emin, 2*emax]).

One engine instance owns its counter state; separate pseudo-channel runs
are independent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .topology import HbmConfig, Location, default_config
from .timing import (Command, CommandKind, CommandStream, TimingParams,
                     schedule, elapsed_ns)
from .energy import EnergyParams, energy
from .teq import (TeqParams, TeqTensor, TermAccumulators, empty_accumulators,
                  combine_terms, encode, decode)

SRC_SUB = 0   # weights; inputs beyond one subarray spill into 4, 5, ...
CMP_SUB = 1   # exponent-sum table
CT1_SUB = 2   # single-exponent counter arrays (and everything for n <= 4)
CT2_SUB = 3   # sum counter arrays for n >= 5

WEIGHTS_PER_ROW = 1024
WEIGHTS_PER_FETCH = 16


def _source_place(input_index: int, rows_per_subarray: int) -> tuple[int, int]:
    """Source subarray and row for one input index."""
    block, row = divmod(input_index, rows_per_subarray)
    return (SRC_SUB if block == 0 else CT2_SUB + block), row


class AccelError(Exception):
    pass


class CounterOverflowError(AccelError):
    """An occurrence count left the signed 8-bit range."""


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    precision_n: int
    kind: str = "fc"   # fc | attention_score | attention_output
    w_params: TeqParams | None = None
    a_params: TeqParams | None = None
    weights: np.ndarray | None = None   # real values, shape (in_dim, out_dim)

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise AccelError("layer dims must be positive")
        if not 3 <= self.precision_n <= 7:
            raise AccelError(f"precision must be 3..7 bits, got {self.precision_n}")
        if self.kind not in ("fc", "attention_score", "attention_output"):
            raise AccelError(f"unknown layer kind {self.kind!r}")

    def resolved_params(self) -> tuple[TeqParams, TeqParams]:
        default = TeqParams(alpha=1.0, beta=0.0,
                            base=2.0 ** (2.0 ** (4 - self.precision_n)),
                            n=self.precision_n)
        return self.w_params or default, self.a_params or default


def _counter_geometry(n: int) -> tuple[int, int, bool]:
    """(p_count, mats_per_neuron, sum array in its own subarray)."""
    single = 1 << n                 # bytes for the A and the W array
    pair = 2 * single               # A and W arrays together
    sum_bytes = 2 * single - 1      # the A+W array
    if n <= 4:
        return 16, 1, False         # pair + sum <= 64 B
    mats_pair = -(-pair // 64)
    mats_sum = -(-sum_bytes // 64)
    p = 16 // max(mats_pair, mats_sum)
    return p, mats_pair + mats_sum, True


@dataclass(frozen=True)
class SubarrayPlan:
    """Bank-level placement for one layer."""

    layer: LayerSpec
    banks: int
    neurons_per_bank: int
    source_rows: int
    p_weights: int
    p_sum: int
    sum_icas: int
    sum_mask_cycles: int
    p_count: int
    split_counters: bool            # sum array lives in CT2_SUB
    source_image: np.ndarray        # (banks, source_rows, 1024) uint8
    compute_image: np.ndarray       # (2^n rows, 2^n sums) uint8, padded bytes
    w_encoded: TeqTensor            # encoded weights, row-major (in, out)

    @property
    def n(self) -> int:
        return self.layer.precision_n


def _encode_byte(signs: np.ndarray, exps: np.ndarray) -> np.ndarray:
    return (((signs < 0).astype(np.uint8) << 7)
            | (exps.astype(np.int16) & 0x7F).astype(np.uint8))


def layout_layer(layer: LayerSpec, cfg: HbmConfig | None = None,
                 bank_budget: int | None = None, seed: int = 0) -> SubarrayPlan:
    """Materialize the source and compute images and fix step parallelism.

    Synthetic unit-variance weights are generated when the layer carries
    none (cost estimation does not need real values)."""
    cfg = cfg or default_config()
    bank_budget = bank_budget or cfg.banks_per_pch
    n = layer.precision_n
    w_params, _ = layer.resolved_params()

    banks = -(-layer.out_dim // WEIGHTS_PER_ROW)
    if banks > bank_budget:
        raise AccelError(
            f"layer needs {banks} banks for {layer.out_dim} neurons, "
            f"budget is {bank_budget}")
    neurons_per_bank = -(-layer.out_dim // banks)
    src_subarrays = -(-layer.in_dim // cfg.rows_per_subarray)
    if CT2_SUB + src_subarrays > cfg.subarrays_per_bank:
        raise AccelError(
            f"{layer.in_dim} input rows exceed the bank's source subarrays")

    weights = layer.weights
    if weights is None:
        rng = np.random.default_rng(seed)
        weights = rng.normal(size=(layer.in_dim, layer.out_dim))
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (layer.in_dim, layer.out_dim):
        raise AccelError(f"weights shape {weights.shape} does not match layer dims")

    w_enc = encode(weights.ravel(), w_params)
    signs = w_enc.signs.reshape(layer.in_dim, layer.out_dim)
    exps = w_enc.exponents.reshape(layer.in_dim, layer.out_dim)

    source = np.zeros((banks, layer.in_dim, WEIGHTS_PER_ROW), dtype=np.uint8)
    for bk in range(banks):
        lo = bk * neurons_per_bank
        hi = min(lo + neurons_per_bank, layer.out_dim)
        source[bk, :, :hi - lo] = _encode_byte(signs[:, lo:hi], exps[:, lo:hi])

    # exponent-sum table: row (eA - emin), column (eW - emin), padded 8-bit sum
    size = 1 << n
    emin = -(1 << (n - 1))
    ea = np.arange(size)[:, None] + emin
    ew = np.arange(size)[None, :] + emin
    compute = ((ea + ew) & 0xFF).astype(np.uint8)

    p_sum = 8 if n == 7 else 16
    p_count, _, split = _counter_geometry(n)
    return SubarrayPlan(
        layer=layer,
        banks=banks,
        neurons_per_bank=neurons_per_bank,
        source_rows=layer.in_dim,
        p_weights=16,
        p_sum=p_sum,
        sum_icas=2 if n == 7 else 1,
        sum_mask_cycles=p_sum if p_sum < 16 else 0,
        p_count=p_count,
        split_counters=split,
        source_image=source,
        compute_image=compute,
        w_encoded=w_enc,
    )


@dataclass
class CounterBank:
    """Per-output-neuron signed occurrence counters, overflow-checked."""

    n: int
    out_dim: int
    sum_counts: np.ndarray   # (out, 2^(n+1)-1)
    w_counts: np.ndarray     # (out, 2^n)
    a_counts: np.ndarray     # (out, 2^n)

    @classmethod
    def zeros(cls, n: int, out_dim: int) -> "CounterBank":
        size = 1 << n
        return cls(n=n, out_dim=out_dim,
                   sum_counts=np.zeros((out_dim, 2 * size - 1), dtype=np.int16),
                   w_counts=np.zeros((out_dim, size), dtype=np.int16),
                   a_counts=np.zeros((out_dim, size), dtype=np.int16))

    def check_overflow(self) -> None:
        for name, arr in (("sum", self.sum_counts), ("weight", self.w_counts),
                          ("activation", self.a_counts)):
            if arr.max(initial=0) > 127 or arr.min(initial=0) < -128:
                raise CounterOverflowError(
                    f"{name}-exponent counter left the signed 8-bit range")

    def accumulators(self, neuron: int) -> TermAccumulators:
        acc = empty_accumulators(self.n)
        acc.t1 = self.sum_counts[neuron].astype(np.int64)
        acc.t2 = self.w_counts[neuron].astype(np.int64)
        acc.t3 = self.a_counts[neuron].astype(np.int64)
        acc.t4 = int(self.w_counts[neuron].sum())
        return acc


def _bank_location(cfg: HbmConfig, bank_index: int, pch: int = 0) -> Location:
    group, bank = divmod(bank_index % cfg.banks_per_pch, cfg.banks_per_group)
    return Location(pch=pch, bank_group=group, bank=bank)


def run_layer(
    layer: LayerSpec,
    activations: TeqTensor,
    plan: SubarrayPlan,
    cfg: HbmConfig | None = None,
    timing: TimingParams | None = None,
    pch: int = 0,
    run_scheduler: bool = True,
) -> tuple[CounterBank, CommandStream | list[Command]]:
    """Counting sweep of one layer for one input activation vector.

    Zero-flagged activations are skipped by the controller and emit no
    commands. The returned counters aggregate, per output neuron, exactly
    what dot_terms_by_counting produces for (activations, weight column)."""
    cfg = cfg or default_config()
    timing = timing or TimingParams()
    if len(activations) != layer.in_dim:
        raise AccelError(
            f"{len(activations)} activations for in_dim {layer.in_dim}")
    if activations.params.n != layer.precision_n:
        raise AccelError("activation exponent width does not match the layer")

    n = layer.precision_n
    emin = -(1 << (n - 1))
    counters = CounterBank.zeros(n, layer.out_dim)

    w_signs = plan.w_encoded.signs.reshape(layer.in_dim, layer.out_dim)
    w_exps = plan.w_encoded.exponents.reshape(layer.in_dim, layer.out_dim)
    w_zero = plan.w_encoded.zero_flags.reshape(layer.in_dim, layer.out_dim)

    fetch_bits = WEIGHTS_PER_FETCH * 8
    groups_per_fetch = -(-WEIGHTS_PER_FETCH // plan.p_count)
    cmds: list[Command] = []

    for bk in range(plan.banks):
        loc = _bank_location(cfg, bk, pch)
        lo = bk * plan.neurons_per_bank
        hi = min(lo + plan.neurons_per_bank, layer.out_dim)
        n_sets = -(-(hi - lo) // WEIGHTS_PER_FETCH)
        cmp_ = loc.with_(subarray=CMP_SUB)
        ct1 = loc.with_(subarray=CT1_SUB)
        ct2 = loc.with_(subarray=CT2_SUB)

        for i in range(layer.in_dim):
            if activations.zero_flags[i]:
                continue
            e_a = int(activations.exponents[i])
            s_a = int(activations.signs[i])
            row_a = e_a - emin
            src_sub, src_row = _source_place(i, cfg.rows_per_subarray)
            src = loc.with_(subarray=src_sub)

            cmds.append(Command(CommandKind.ACT, src.with_(row=src_row)))
            cmds.append(Command(CommandKind.ACT, cmp_.with_(row=row_a)))

            for st in range(n_sets):
                set_lo = lo + st * WEIGHTS_PER_FETCH
                set_hi = min(set_lo + WEIGHTS_PER_FETCH, hi)
                col = (st * WEIGHTS_PER_FETCH) % cfg.mat_segment_bytes

                # Step 1: one ICA pulls 16 weights into the temporary buffer
                cmds.append(Command(CommandKind.INTERNAL_READ,
                                    src.with_(row=src_row, byte_col=col),
                                    icas=1, data_bits=fetch_bits))
                # mechanical read-back from the materialized source bytes
                raw = plan.source_image[bk, i,
                                        st * WEIGHTS_PER_FETCH:
                                        st * WEIGHTS_PER_FETCH + (set_hi - set_lo)]
                exps = (raw & 0x7F).astype(np.int16)
                exps[exps >= 64] -= 128
                signs = np.where(raw & 0x80, -1, 1).astype(np.int8)

                # Step 2: exponent sums from the open compute row
                for _ in range(-(-WEIGHTS_PER_FETCH // plan.p_sum)):
                    cmds.append(Command(
                        CommandKind.LUT_RETRIEVAL,
                        cmp_.with_(row=row_a),
                        icas=plan.sum_icas,
                        mask_cycles=plan.sum_mask_cycles,
                        data_bits=plan.p_sum * 8))
                sums_raw = plan.compute_image[row_a, exps - emin]
                sums = sums_raw.astype(np.int16)
                sums[sums >= 128] -= 256   # stored as padded 8-bit two's complement

                # Step 3: fetch-adjust-writeback per counter row group
                zero_w = w_zero[i, set_lo:set_hi]
                s_pair = np.where(zero_w, 0, s_a * signs).astype(np.int16)
                for g in range(groups_per_fetch):
                    row_ct = st * groups_per_fetch + g
                    cmds.append(Command(CommandKind.ACT, ct1.with_(row=row_ct)))
                    if plan.split_counters:
                        cmds.append(Command(CommandKind.ACT, ct2.with_(row=row_ct)))
                    # sum-exponent, weight-exponent, activation-exponent terms
                    sum_target = ct2 if plan.split_counters else ct1
                    for target in (sum_target, ct1, ct1):
                        cmds.append(Command(CommandKind.COUNT_UPDATE,
                                            target.with_(row=row_ct),
                                            data_bits=plan.p_count * 8))
                        cmds.append(Command(CommandKind.WRITE,
                                            target.with_(row=row_ct),
                                            data_bits=plan.p_count * 8))
                    cmds.append(Command(CommandKind.PRE, ct1.with_(row=row_ct)))
                    if plan.split_counters:
                        cmds.append(Command(CommandKind.PRE, ct2.with_(row=row_ct)))

                neuron_idx = np.arange(set_lo, set_hi)
                live = s_pair != 0
                np.add.at(counters.sum_counts,
                          (neuron_idx[live], (sums[live] - 2 * emin)), s_pair[live])
                np.add.at(counters.w_counts,
                          (neuron_idx[live], (exps[live] - emin)), s_pair[live])
                np.add.at(counters.a_counts,
                          (neuron_idx[live], np.full(int(live.sum()), e_a - emin)),
                          s_pair[live])
                counters.check_overflow()

            cmds.append(Command(CommandKind.PRE, src.with_(row=src_row)))
            cmds.append(Command(CommandKind.PRE, cmp_.with_(row=row_a)))

    if layer.kind in ("attention_score", "attention_output"):
        cmds = _runtime_weight_writes(plan, cfg, pch) + cmds

    if not run_scheduler:
        return counters, cmds
    return counters, schedule(cmds, timing, cfg)


def _runtime_weight_writes(plan: SubarrayPlan, cfg: HbmConfig,
                           pch: int) -> list[Command]:
    """Attention operands are staged into the source subarray at runtime:
    one ACT per row, WRITEs at 32-byte granularity, then PRE."""
    cmds: list[Command] = []
    writes_per_row = -(-min(plan.neurons_per_bank, WEIGHTS_PER_ROW) // 32)
    for bk in range(plan.banks):
        base = _bank_location(cfg, bk, pch)
        for i in range(plan.source_rows):
            sub, row = _source_place(i, cfg.rows_per_subarray)
            src = base.with_(subarray=sub)
            cmds.append(Command(CommandKind.ACT, src.with_(row=row)))
            for w in range(writes_per_row):
                cmds.append(Command(CommandKind.WRITE,
                                    src.with_(row=row, byte_col=(w * 32) % 64),
                                    icas=2, data_bits=32 * 8))
            cmds.append(Command(CommandKind.PRE, src.with_(row=row)))
    return cmds


def postprocess_layer(
    counters: CounterBank,
    a_params: TeqParams,
    w_params: TeqParams,
    next_params: TeqParams,
) -> TeqTensor:
    """Combine the four terms per neuron on the logic die and re-quantize
    into the next layer's activation format."""
    if a_params.base != w_params.base:
        raise AccelError(f"base mismatch: {a_params.base} vs {w_params.base}")
    emin = -(1 << (counters.n - 1))
    b = a_params.base
    pow_sum = b ** np.arange(2 * emin, -2 * emin - 1, dtype=np.float64)
    pow_one = b ** np.arange(emin, -emin, dtype=np.float64)
    t4 = counters.w_counts.sum(axis=1)
    values = (a_params.alpha * w_params.alpha * (counters.sum_counts @ pow_sum)
              + w_params.alpha * a_params.beta * (counters.w_counts @ pow_one)
              + a_params.alpha * w_params.beta * (counters.a_counts @ pow_one)
              + a_params.beta * w_params.beta * t4)
    return encode(values, next_params)


# -- model mapping and pipelined inference ----------------------------------

@dataclass(frozen=True)
class Block:
    kind: str                 # "encoder" or "decoder"
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        if self.kind not in ("encoder", "decoder"):
            raise AccelError(f"unknown block kind {self.kind!r}")


@dataclass(frozen=True)
class ModelSpec:
    blocks: tuple[Block, ...]
    max_seq_len: int

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        doc = json.loads(text)
        blocks = []
        for b in doc["blocks"]:
            layers = []
            for l in b["layers"]:
                params = {}
                for side in ("w", "a"):
                    key = f"{side}_params"
                    if key in l:
                        params[key] = TeqParams(n=l["precision_n"], **l[key])
                layers.append(LayerSpec(
                    in_dim=l["in_dim"], out_dim=l["out_dim"],
                    precision_n=l["precision_n"],
                    kind=l.get("kind", "fc"), **params))
            blocks.append(Block(kind=b["kind"], layers=tuple(layers)))
        return cls(blocks=tuple(blocks), max_seq_len=doc["max_seq_len"])


@dataclass(frozen=True)
class Stage:
    block_indices: tuple[int, ...]
    pch_count: int
    time_ns: float


@dataclass(frozen=True)
class MappingPlan:
    stages: tuple[Stage, ...]

    @property
    def pch_used(self) -> int:
        return sum(s.pch_count for s in self.stages)

    def max_stage_ns(self) -> float:
        return max(s.time_ns / s.pch_count for s in self.stages)


@dataclass(frozen=True)
class AccelReport:
    latency_ns: float
    energy_nj: float
    stage_latency_ns: tuple[float, ...]
    stage_energy_nj: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "latency_ns": self.latency_ns,
            "energy_nj": self.energy_nj,
            "stage_latency_ns": list(self.stage_latency_ns),
            "stage_energy_nj": list(self.stage_energy_nj),
        }


def _token_factor(block: Block, layer: LayerSpec, seq_len: int) -> float:
    """Per-token cost multiplier over the sequence. Decoder attention grows
    linearly with the KV cache: token t attends over t positions, so the
    total is seq_len * (seq_len + 1) / 2 token-equivalents."""
    if block.kind == "decoder" and layer.kind in ("attention_score",
                                                  "attention_output"):
        return seq_len * (seq_len + 1) / 2.0
    return float(seq_len)


def _block_time_estimate(model: ModelSpec, index: int, cfg: HbmConfig,
                         timing: TimingParams, cache: dict) -> float:
    """Single-pch execution time of one block for a full sequence."""
    block = model.blocks[index]
    total = 0.0
    for layer in block.layers:
        key = (layer.in_dim, layer.out_dim, layer.precision_n, layer.kind)
        if key not in cache:
            plan = layout_layer(layer, cfg, seed=1)
            acts = encode(np.random.default_rng(2).normal(size=layer.in_dim),
                          layer.resolved_params()[1])
            _, stream = run_layer(layer, acts, plan, cfg, timing)
            cache[key] = elapsed_ns(stream)
        total += cache[key] * _token_factor(block, layer, model.max_seq_len)
    return total


def map_model(model: ModelSpec, cfg: HbmConfig | None = None,
              timing: TimingParams | None = None) -> MappingPlan:
    """Assign blocks to pipeline stages over the available pseudo-channels.

    Each block gets its own stage while channels last, and leftover channels
    go greedily to the slowest stage (decoder blocks, with their serialized
    token loop, attract them first). With more blocks than channels,
    contiguous blocks are packed into stages by exact dynamic-programming
    partition minimizing the maximum stage time."""
    cfg = cfg or default_config()
    timing = timing or TimingParams()
    n_pch = cfg.pch_count
    n_blocks = len(model.blocks)
    if n_blocks == 0:
        raise AccelError("model has no blocks")
    if n_pch < 1:
        raise AccelError("no pseudo-channels available")

    cache: dict = {}
    times = [_block_time_estimate(model, i, cfg, timing, cache)
             for i in range(n_blocks)]

    if n_blocks <= n_pch:
        counts = [1] * n_blocks
        spare = n_pch - n_blocks
        eps = 1e-9
        # one channel per block by default; spares flow only to decoder
        # blocks (their serialized token loop is what slows the pipeline)
        while spare > 0:
            per = [times[i] / counts[i] for i in range(n_blocks)]
            mx = max(per)
            slowest = [i for i in range(n_blocks) if per[i] > mx - eps]
            if any(model.blocks[i].kind != "decoder" for i in slowest):
                break
            if spare < len(slowest):
                break
            # the whole slowest tier must be sped up for the bound to move
            after = max(
                max(times[i] / (counts[i] + 1) for i in slowest),
                max((per[i] for i in range(n_blocks) if i not in slowest),
                    default=0.0),
            )
            if after >= mx - eps:
                break
            for i in slowest:
                counts[i] += 1
            spare -= len(slowest)
        stages = tuple(Stage((i,), counts[i], times[i]) for i in range(n_blocks))
        return MappingPlan(stages=stages)

    # contiguous partition of blocks into n_pch single-channel stages
    k = n_pch
    prefix = np.concatenate([[0.0], np.cumsum(times)])
    inf = float("inf")
    best = np.full((n_blocks + 1, k + 1), inf)
    cut = np.zeros((n_blocks + 1, k + 1), dtype=int)
    best[0, 0] = 0.0
    for j in range(1, k + 1):
        for i in range(1, n_blocks + 1):
            for m in range(j - 1, i):
                cost = max(best[m, j - 1], prefix[i] - prefix[m])
                if cost < best[i, j]:
                    best[i, j] = cost
                    cut[i, j] = m
    bounds = []
    i = n_blocks
    for j in range(k, 0, -1):
        m = cut[i, j]
        bounds.append((m, i))
        i = m
    bounds.reverse()
    stages = tuple(
        Stage(tuple(range(lo, hi)), 1, float(prefix[hi] - prefix[lo]))
        for lo, hi in bounds if hi > lo)
    return MappingPlan(stages=stages)


def estimate_inference(
    model: ModelSpec,
    plan: MappingPlan,
    timing: TimingParams | None = None,
    energy_params: EnergyParams | None = None,
    inferences: int = 1,
    cfg: HbmConfig | None = None,
    postproc_tail_ns: float = 0.0,
    logic_die_nj_per_element: float = 0.0,
) -> AccelReport:
    """Pipeline cost over the mapped stages.

    Latency is pipeline fill plus steady state: sum of stage times plus
    (inferences - 1) times the slowest stage. Post-processing overlaps the
    next stage and only its tail shows up, as a configurable constant."""
    cfg = cfg or default_config()
    timing = timing or TimingParams()
    energy_params = energy_params or EnergyParams()

    stage_lat = []
    stage_en = []
    cache: dict = {}
    for stage in plan.stages:
        lat = 0.0
        en = 0.0
        for bi in stage.block_indices:
            block = model.blocks[bi]
            for layer in block.layers:
                key = (layer.in_dim, layer.out_dim, layer.precision_n, layer.kind)
                if key not in cache:
                    lplan = layout_layer(layer, cfg, seed=1)
                    acts = encode(
                        np.random.default_rng(2).normal(size=layer.in_dim),
                        layer.resolved_params()[1])
                    _, stream = run_layer(layer, acts, lplan, cfg, timing)
                    rep = energy(stream, energy_params, active_banks=lplan.banks)
                    cache[key] = (elapsed_ns(stream), rep.total_nj, lplan.banks)
                per_tok_ns, per_tok_nj, _ = cache[key]
                factor = _token_factor(block, layer, model.max_seq_len)
                lat += per_tok_ns * factor
                en += per_tok_nj * factor
                en += logic_die_nj_per_element * layer.out_dim * model.max_seq_len / 1e3
        stage_lat.append(lat / stage.pch_count)
        stage_en.append(en)

    fill = sum(stage_lat)
    steady = (inferences - 1) * max(stage_lat) if stage_lat else 0.0
    return AccelReport(
        latency_ns=fill + steady + postproc_tail_ns,
        energy_nj=sum(stage_en) * inferences,
        stage_latency_ns=tuple(stage_lat),
        stage_energy_nj=tuple(stage_en),
    )

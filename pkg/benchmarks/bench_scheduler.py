"""Benchmark: compiled scheduler kernel vs the pure-Python twin.

Builds realistic workloads (bulk multiplication streams and an accelerator
layer sweep), schedules each with both kernels and prints the timing table.

Run: python3 benchmarks/bench_scheduler.py
"""

from __future__ import annotations

import time

import numpy as np

from lamasim import _sched_ref, timing
from lamasim.accel import LayerSpec, layout_layer, run_layer
from lamasim.lut_engine import (CoalescedBatch, build_batch_commands,
                                build_layout, interleave_round_robin)
from lamasim.teq import TeqParams, encode
from lamasim.timing import TimingParams, schedule
from lamasim.topology import Location, default_config

try:
    from lamasim import _sched_core
except ImportError:
    _sched_core = None


def bulk_mul_commands(op_bits: int, ops: int, banks: int):
    cfg = default_config()
    layout, _ = build_layout(lambda a, b: a * b, op_bits, cfg)
    rng = np.random.default_rng(0)
    per_bank = ops // banks
    cmd_lists = []
    for bk in range(banks):
        loc = Location(pch=bk // cfg.banks_per_pch,
                       bank_group=(bk % cfg.banks_per_pch) // cfg.banks_per_group,
                       bank=bk % cfg.banks_per_group)
        batch = CoalescedBatch(
            scalar_a=int(rng.integers(0, 1 << op_bits)),
            vector_b=rng.integers(0, 1 << op_bits, size=per_bank),
            positional_index=bk)
        cmd_lists.append(build_batch_commands(batch, layout, cfg, loc).row_segments)
    return interleave_round_robin(cmd_lists)


def accel_commands(dim: int, n: int):
    cfg = default_config()
    params = TeqParams(alpha=1.0, beta=0.0, base=1.4, n=n)
    layer = LayerSpec(in_dim=dim, out_dim=dim, precision_n=n,
                      w_params=params, a_params=params)
    plan = layout_layer(layer, cfg)
    acts = encode(np.random.default_rng(1).normal(size=dim), params)
    _, cmds = run_layer(layer, acts, plan, cfg, run_scheduler=False)
    return cmds


def bench(name: str, cmds, repeats: int = 5):
    """Times the bare kernels on prebuilt arrays (the compiled/pure
    comparison) and the end-to-end schedule() call for context."""
    cfg = default_config()
    tp = TimingParams()
    arrays = timing._to_arrays(cmds, cfg)
    n_pch = cfg.pch_count
    n_group = n_pch * cfg.bank_groups_per_pch
    n_bank = n_group * cfg.banks_per_group
    n_sub = n_bank * cfg.subarrays_per_bank
    pch = arrays["pch"].astype(np.int32)
    group = (pch * cfg.bank_groups_per_pch + arrays["bank_group"]).astype(np.int32)
    bank = (group * cfg.banks_per_group + arrays["bank"]).astype(np.int32)
    sub = (bank * cfg.subarrays_per_bank + arrays["subarray"]).astype(np.int32)
    args = (arrays["kind"], pch, group, bank, sub,
            arrays["row"].astype(np.int32), arrays["slots"],
            arrays["mask_cycles"], n_pch, n_group, n_bank, n_sub,
            tp.tRC, tp.tRCD, tp.tRAS, tp.tCL, tp.tRRD, tp.tWR,
            tp.tCCD_S, tp.tCCD_L, tp.tFAW, tp.acts_per_faw,
            tp.mask_cycle_ns, False)

    kernels = {"pure": _sched_ref.schedule_kernel}
    if _sched_core is not None:
        kernels["compiled"] = _sched_core.schedule_kernel
    kernel_times = {}
    for kname, kernel in kernels.items():
        best = float("inf")
        for _ in range(repeats):
            t0 = time.perf_counter()
            kernel(*args)
            best = min(best, time.perf_counter() - t0)
        kernel_times[kname] = best

    t0 = time.perf_counter()
    schedule(cmds, tp, cfg)
    end_to_end = time.perf_counter() - t0

    line = f"{name:34s} {len(cmds):8d} cmds"
    for kname in ("pure", "compiled"):
        if kname in kernel_times:
            rate = len(cmds) / kernel_times[kname] / 1e6
            line += f"  {kname}: {kernel_times[kname] * 1e3:8.2f} ms ({rate:6.2f} Mcmd/s)"
    if "compiled" in kernel_times:
        line += f"  kernel speedup: {kernel_times['pure'] / kernel_times['compiled']:5.1f}x"
    line += f"  [schedule() total {end_to_end * 1e3:.2f} ms]"
    print(line)


def main():
    if _sched_core is None:
        print("compiled kernel not built; benchmarking the pure kernel only")
    bench("bulk-mul 4-bit, 64k ops, 16 banks", bulk_mul_commands(4, 65536, 16))
    bench("bulk-mul 8-bit, 64k ops, 16 banks", bulk_mul_commands(8, 65536, 16))
    bench("accel layer 128x128 n=4", accel_commands(128, 4))
    bench("accel layer 128x128 n=7", accel_commands(128, 7))


if __name__ == "__main__":
    main()

"""Pure-Python scheduler kernel.

Reference twin of the Cython extension lamasim._sched_core. Both implement
the same earliest-legal-issue algorithm over flat command arrays; the package
selects the compiled one at import when available. Keep the two in lockstep:
tests assert bit-identical output.

Command kinds (shared encoding):
    0 ACT, 1 PRE, 2 INTERNAL_READ, 3 LUT_RETRIEVAL, 4 OUTPUT_XFER,
    5 WRITE, 6 COUNT_UPDATE

Error codes returned as (err_index, err_code); err_code 0 means success:
    1 ACT to a subarray with an open row
    2 column command to a closed subarray
    3 column command to the wrong open row
    4 PRE to a closed subarray
"""

from __future__ import annotations

import numpy as np

NEG_INF = float("-inf")


def schedule_kernel(
    kind,
    pch_id,
    group_id,
    bank_id,
    sub_id,
    row,
    slots,
    mask_cycles,
    n_pch: int,
    n_group: int,
    n_bank: int,
    n_sub: int,
    trc: float,
    trcd: float,
    tras: float,
    tcl: float,
    trrd: float,
    twr: float,
    tccd_s: float,
    tccd_l: float,
    tfaw: float,
    acts_per_faw: int,
    mask_ns: float,
    faw_channel_scope: bool,
):
    """Assign earliest legal issue times to an ordered command list.

    Issue times are non-decreasing along the list (in-order command bus).
    Returns (issue, completion, faw_stall, err_index, err_code); the two
    error fields are (-1, 0) on success.
    """
    n = len(kind)
    issue = np.zeros(n, dtype=np.float64)
    completion = np.zeros(n, dtype=np.float64)
    faw_stall = np.zeros(n, dtype=np.float64)
    if n == 0:
        return issue, completion, faw_stall, -1, 0

    kind_l = [int(x) for x in kind]
    pch_l = [int(x) for x in pch_id]
    group_l = [int(x) for x in group_id]
    bank_l = [int(x) for x in bank_id]
    sub_l = [int(x) for x in sub_id]
    row_l = [int(x) for x in row]
    slots_l = [int(x) for x in slots]
    mask_l = [int(x) for x in mask_cycles]

    n_faw_units = (n_pch + 1) // 2 if faw_channel_scope else n_pch

    open_row = [-1] * n_sub
    act_time = [NEG_INF] * n_sub
    last_act_bank = [NEG_INF] * n_bank
    last_act_pch = [NEG_INF] * n_pch
    last_write_bank = [NEG_INF] * n_bank
    bank_busy = [NEG_INF] * n_bank
    col_group_next = [NEG_INF] * n_group
    col_pch_next = [NEG_INF] * n_pch
    faw_ring = [[NEG_INF] * acts_per_faw for _ in range(n_faw_units)]
    faw_pos = [0] * n_faw_units

    prev_issue = 0.0
    for i in range(n):
        k = kind_l[i]
        p = pch_l[i]
        g = group_l[i]
        b = bank_l[i]
        s = sub_l[i]

        if k == 0:  # ACT
            if open_row[s] != -1:
                return issue, completion, faw_stall, i, 1
            unit = p // 2 if faw_channel_scope else p
            base = prev_issue
            if last_act_bank[b] + trc > base:
                base = last_act_bank[b] + trc
            if last_act_pch[p] + trrd > base:
                base = last_act_pch[p] + trrd
            faw_bound = faw_ring[unit][faw_pos[unit]] + tfaw
            t = base if base > faw_bound else faw_bound
            if faw_bound > base:
                faw_stall[i] = faw_bound - base
            last_act_bank[b] = t
            last_act_pch[p] = t
            faw_ring[unit][faw_pos[unit]] = t
            faw_pos[unit] = (faw_pos[unit] + 1) % acts_per_faw
            open_row[s] = row_l[i]
            act_time[s] = t
            completion[i] = t + trcd
        elif k == 1:  # PRE
            if open_row[s] == -1:
                return issue, completion, faw_stall, i, 4
            t = prev_issue
            if act_time[s] + tras > t:
                t = act_time[s] + tras
            if last_write_bank[b] + twr > t:
                t = last_write_bank[b] + twr
            open_row[s] = -1
            completion[i] = t
        else:  # column command
            if open_row[s] == -1:
                return issue, completion, faw_stall, i, 2
            if open_row[s] != row_l[i]:
                return issue, completion, faw_stall, i, 3
            t = prev_issue
            if act_time[s] + trcd > t:
                t = act_time[s] + trcd
            if col_group_next[g] > t:
                t = col_group_next[g]
            if col_pch_next[p] > t:
                t = col_pch_next[p]
            if bank_busy[b] > t:
                t = bank_busy[b]
            sl = slots_l[i]
            mask_time = mask_l[i] * mask_ns
            col_group_next[g] = t + sl * tccd_l
            col_pch_next[p] = t + sl * tccd_s
            bank_busy[b] = t + sl * tccd_l + mask_time
            if k == 5:  # WRITE
                last_write_bank[b] = t
                completion[i] = t + twr
            else:
                completion[i] = t + tcl + mask_time

        issue[i] = t
        prev_issue = t

    return issue, completion, faw_stall, -1, 0

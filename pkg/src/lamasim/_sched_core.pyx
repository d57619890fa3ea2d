# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scheduler kernel.

Twin of lamasim._sched_ref.schedule_kernel; see that module for the
algorithm and the shared kind/error encodings. Outputs must stay
bit-identical to the reference (asserted by the parity tests).
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef double NEG_INF = float("-inf")


def schedule_kernel(
    kind_in,
    pch_in,
    group_in,
    bank_in,
    sub_in,
    row_in,
    slots_in,
    mask_in,
    int n_pch,
    int n_group,
    int n_bank,
    int n_sub,
    double trc,
    double trcd,
    double tras,
    double tcl,
    double trrd,
    double twr,
    double tccd_s,
    double tccd_l,
    double tfaw,
    int acts_per_faw,
    double mask_ns,
    bint faw_channel_scope,
):
    cdef cnp.int8_t[::1] kind = np.ascontiguousarray(kind_in, dtype=np.int8)
    cdef cnp.int32_t[::1] pch = np.ascontiguousarray(pch_in, dtype=np.int32)
    cdef cnp.int32_t[::1] group = np.ascontiguousarray(group_in, dtype=np.int32)
    cdef cnp.int32_t[::1] bank = np.ascontiguousarray(bank_in, dtype=np.int32)
    cdef cnp.int32_t[::1] sub = np.ascontiguousarray(sub_in, dtype=np.int32)
    cdef cnp.int32_t[::1] row = np.ascontiguousarray(row_in, dtype=np.int32)
    cdef cnp.int8_t[::1] slots = np.ascontiguousarray(slots_in, dtype=np.int8)
    cdef cnp.int8_t[::1] mask = np.ascontiguousarray(mask_in, dtype=np.int8)

    cdef Py_ssize_t n = kind.shape[0]
    issue_arr = np.zeros(n, dtype=np.float64)
    completion_arr = np.zeros(n, dtype=np.float64)
    stall_arr = np.zeros(n, dtype=np.float64)
    if n == 0:
        return issue_arr, completion_arr, stall_arr, -1, 0
    cdef double[::1] issue = issue_arr
    cdef double[::1] completion = completion_arr
    cdef double[::1] stall = stall_arr

    cdef int n_faw_units = (n_pch + 1) // 2 if faw_channel_scope else n_pch

    open_row_arr = np.full(n_sub, -1, dtype=np.int32)
    act_time_arr = np.full(n_sub, NEG_INF, dtype=np.float64)
    last_act_bank_arr = np.full(n_bank, NEG_INF, dtype=np.float64)
    last_act_pch_arr = np.full(n_pch, NEG_INF, dtype=np.float64)
    last_write_bank_arr = np.full(n_bank, NEG_INF, dtype=np.float64)
    bank_busy_arr = np.full(n_bank, NEG_INF, dtype=np.float64)
    col_group_next_arr = np.full(n_group, NEG_INF, dtype=np.float64)
    col_pch_next_arr = np.full(n_pch, NEG_INF, dtype=np.float64)
    faw_ring_arr = np.full((n_faw_units, acts_per_faw), NEG_INF, dtype=np.float64)
    faw_pos_arr = np.zeros(n_faw_units, dtype=np.int32)

    cdef cnp.int32_t[::1] open_row = open_row_arr
    cdef double[::1] act_time = act_time_arr
    cdef double[::1] last_act_bank = last_act_bank_arr
    cdef double[::1] last_act_pch = last_act_pch_arr
    cdef double[::1] last_write_bank = last_write_bank_arr
    cdef double[::1] bank_busy = bank_busy_arr
    cdef double[::1] col_group_next = col_group_next_arr
    cdef double[::1] col_pch_next = col_pch_next_arr
    cdef double[:, ::1] faw_ring = faw_ring_arr
    cdef cnp.int32_t[::1] faw_pos = faw_pos_arr

    cdef double prev_issue = 0.0
    cdef double t, base, faw_bound, mask_time
    cdef Py_ssize_t i
    cdef int k, p, g, b, s, unit, sl

    for i in range(n):
        k = kind[i]
        p = pch[i]
        g = group[i]
        b = bank[i]
        s = sub[i]

        if k == 0:  # ACT
            if open_row[s] != -1:
                return issue_arr, completion_arr, stall_arr, i, 1
            unit = p // 2 if faw_channel_scope else p
            base = prev_issue
            if last_act_bank[b] + trc > base:
                base = last_act_bank[b] + trc
            if last_act_pch[p] + trrd > base:
                base = last_act_pch[p] + trrd
            faw_bound = faw_ring[unit, faw_pos[unit]] + tfaw
            t = base if base > faw_bound else faw_bound
            if faw_bound > base:
                stall[i] = faw_bound - base
            last_act_bank[b] = t
            last_act_pch[p] = t
            faw_ring[unit, faw_pos[unit]] = t
            faw_pos[unit] = (faw_pos[unit] + 1) % acts_per_faw
            open_row[s] = row[i]
            act_time[s] = t
            completion[i] = t + trcd
        elif k == 1:  # PRE
            if open_row[s] == -1:
                return issue_arr, completion_arr, stall_arr, i, 4
            t = prev_issue
            if act_time[s] + tras > t:
                t = act_time[s] + tras
            if last_write_bank[b] + twr > t:
                t = last_write_bank[b] + twr
            open_row[s] = -1
            completion[i] = t
        else:  # column command
            if open_row[s] == -1:
                return issue_arr, completion_arr, stall_arr, i, 2
            if open_row[s] != row[i]:
                return issue_arr, completion_arr, stall_arr, i, 3
            t = prev_issue
            if act_time[s] + trcd > t:
                t = act_time[s] + trcd
            if col_group_next[g] > t:
                t = col_group_next[g]
            if col_pch_next[p] > t:
                t = col_pch_next[p]
            if bank_busy[b] > t:
                t = bank_busy[b]
            sl = slots[i]
            mask_time = mask[i] * mask_ns
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

    return issue_arr, completion_arr, stall_arr, -1, 0

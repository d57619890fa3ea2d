"""Scheduler and validator behavior, kernel parity, trace round trips."""

import dataclasses
import os
import subprocess
import sys

import numpy as np
import pytest

from lamasim.timing import (Command, CommandKind, OpenPageViolationError,
                            TimingParams, concat_streams, elapsed_ns,
                            export_trace, import_trace, schedule, validate)
from lamasim.topology import Location, default_config
from lamasim import _sched_ref

from conftest import copy_stream, mutate_stream, random_legal_commands

TP = TimingParams()


def loc(pch=0, bg=0, bank=0, sub=0, row=0, col=0):
    return Location(pch=pch, bank_group=bg, bank=bank, subarray=sub,
                    row=row, byte_col=col)


class TestTimingParams:
    def test_defaults_valid(self):
        assert TP.validate() == []

    def test_invariants(self):
        assert TimingParams(tRC=10.0, tRAS=29.0).validate()
        assert TimingParams(tCCD_L=1.0).validate()


class TestSchedule:
    def test_empty(self):
        stream = schedule([], TP)
        assert len(stream) == 0
        assert elapsed_ns(stream) == 0.0

    def test_back_to_back_acts_same_bank_wait_trc(self):
        cmds = [Command(CommandKind.ACT, loc(sub=0, row=1)),
                Command(CommandKind.ACT, loc(sub=1, row=2))]
        stream = schedule(cmds, TP)
        assert stream.issue_ns[0] == 0.0
        assert stream.issue_ns[1] == 45.0

    def test_act_then_read_elapsed(self):
        cmds = [Command(CommandKind.ACT, loc(row=3)),
                Command(CommandKind.LUT_RETRIEVAL, loc(row=3), data_bits=128)]
        stream = schedule(cmds, TP)
        assert stream.issue_ns[1] == 16.0      # tRCD
        assert elapsed_ns(stream) == 32.0      # tRCD + tCL

    def test_ninth_act_waits_for_faw_window(self):
        # 9 banks of one pch: widen the config and race ACTs with tRRD = 1
        cfg = dataclasses.replace(default_config(), bank_groups_per_pch=3)
        tp = dataclasses.replace(TP, tRRD=1.0)
        cmds = [Command(CommandKind.ACT,
                        loc(bg=i // 4, bank=i % 4, row=1))
                for i in range(9)]
        stream = schedule(cmds, tp, cfg)
        assert stream.issue_ns[7] == 7.0
        assert stream.issue_ns[8] >= 12.0
        assert stream.faw_stall_ns[8] > 0.0

    def test_trrd_paces_same_pch(self):
        cmds = [Command(CommandKind.ACT, loc(bank=0, row=1)),
                Command(CommandKind.ACT, loc(bank=1, row=1))]
        stream = schedule(cmds, TP)
        assert stream.issue_ns[1] == 2.0

    def test_closed_row_column_raises(self):
        with pytest.raises(OpenPageViolationError):
            schedule([Command(CommandKind.INTERNAL_READ, loc(row=5),
                              data_bits=128)], TP)

    def test_wrong_row_column_raises(self):
        cmds = [Command(CommandKind.ACT, loc(row=1)),
                Command(CommandKind.INTERNAL_READ, loc(row=2), data_bits=128)]
        with pytest.raises(OpenPageViolationError):
            schedule(cmds, TP)

    def test_act_on_open_subarray_raises(self):
        cmds = [Command(CommandKind.ACT, loc(row=1)),
                Command(CommandKind.ACT, loc(row=2))]
        with pytest.raises(OpenPageViolationError):
            schedule(cmds, TP)

    def test_mask_cycles_hold_the_bank(self):
        cmds = [Command(CommandKind.ACT, loc(row=1)),
                Command(CommandKind.LUT_RETRIEVAL, loc(row=1),
                        mask_cycles=2, data_bits=32),
                Command(CommandKind.LUT_RETRIEVAL, loc(row=1),
                        mask_cycles=2, data_bits=32)]
        stream = schedule(cmds, TP)
        # 1 slot (4 ns) + 2 mask cycles (4 ns) before the bank frees
        assert stream.issue_ns[2] - stream.issue_ns[1] == 8.0

    def test_two_banks_overlap(self):
        one_bank = [Command(CommandKind.ACT, loc(bank=0, row=1)),
                    Command(CommandKind.INTERNAL_READ, loc(bank=0, row=1),
                            data_bits=256)]
        other = [Command(CommandKind.ACT, loc(bank=1, row=1)),
                 Command(CommandKind.INTERNAL_READ, loc(bank=1, row=1),
                         data_bits=256)]
        both = schedule(one_bank + other, TP)
        t_single = elapsed_ns(schedule(one_bank, TP))
        assert elapsed_ns(both) < 2 * t_single

    def test_bounds_error(self):
        with pytest.raises(ValueError):
            schedule([Command(CommandKind.ACT, Location(pch=99, row=1))], TP)


class TestValidate:
    def test_scheduler_output_clean(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            cmds = random_legal_commands(rng, default_config())
            stream = schedule(cmds, TP)
            assert validate(stream, TP) == []

    def test_trcd_violation_detected(self):
        cmds = [Command(CommandKind.ACT, loc(row=4)),
                Command(CommandKind.INTERNAL_READ, loc(row=4), data_bits=128)]
        stream = schedule(cmds, TP)
        bad = copy_stream(stream)
        bad.issue_ns[1] = 10.0
        violations = validate(bad, TP)
        assert any(v.rule == "tRCD" for v in violations)

    def test_faw_window_sliding_count(self):
        # hand-built ACT times across 9 banks: 8 inside 12 ns is legal,
        # a 9th inside the same window is not
        cfg = dataclasses.replace(default_config(), bank_groups_per_pch=3)
        cmds = [Command(CommandKind.ACT, loc(bg=i // 4, bank=i % 4, row=1))
                for i in range(9)]
        stream = schedule(cmds, dataclasses.replace(TP, tRRD=1.0), cfg)
        ok = copy_stream(stream)
        ok.issue_ns[:] = [0, 1, 2, 3, 4, 5, 6, 11, 12]
        assert not any(v.rule == "tFAW" for v in validate(ok, TP))
        bad = copy_stream(stream)
        bad.issue_ns[:] = [0, 1, 2, 3, 4, 5, 6, 7, 11.5]
        assert any(v.rule == "tFAW" for v in validate(bad, TP))

    def test_mutations_always_detected(self):
        rng = np.random.default_rng(11)
        produced = 0
        for _ in range(40):
            cmds = random_legal_commands(rng, default_config())
            stream = schedule(cmds, TP)
            mutated = mutate_stream(stream, rng, TP)
            if mutated is None:
                continue
            produced += 1
            assert validate(mutated, TP), "mutation escaped the validator"
        assert produced >= 20


class TestElapsed:
    def test_monotone_under_append(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            cmds = random_legal_commands(rng, default_config())
            full = schedule(cmds, TP)
            for cut in range(1, len(cmds)):
                partial = schedule(cmds[:cut], TP)
                assert elapsed_ns(partial) <= elapsed_ns(full) + 1e-9


class TestKernelParity:
    def test_pure_matches_active_kernel(self):
        rng = np.random.default_rng(23)
        from lamasim import timing as timing_mod
        for _ in range(30):
            cmds = random_legal_commands(rng, default_config())
            arrays = timing_mod._to_arrays(cmds, default_config())
            stream = schedule(cmds, TP)
            saved = timing_mod._kernel
            try:
                timing_mod._kernel = _sched_ref.schedule_kernel
                ref = timing_mod.schedule_arrays(arrays, TP, default_config())
            finally:
                timing_mod._kernel = saved
            np.testing.assert_array_equal(stream.issue_ns, ref.issue_ns)
            np.testing.assert_array_equal(stream.completion_ns, ref.completion_ns)
            np.testing.assert_array_equal(stream.faw_stall_ns, ref.faw_stall_ns)

    def test_forced_pure_env(self):
        code = ("import lamasim, os; "
                "assert lamasim.KERNEL == 'pure', lamasim.KERNEL")
        env = dict(os.environ, LAMASIM_FORCE_PURE="1")
        subprocess.run([sys.executable, "-c", code], check=True, env=env)


class TestTrace:
    def test_export_import_round_trip(self):
        rng = np.random.default_rng(5)
        cmds = random_legal_commands(rng, default_config())
        stream = schedule(cmds, TP)
        text = export_trace(stream)
        again = import_trace(text)
        np.testing.assert_allclose(again.issue_ns, stream.issue_ns, atol=1e-3)
        np.testing.assert_array_equal(again.kind, stream.kind)
        np.testing.assert_array_equal(again.row, stream.row)
        assert validate(again, TP) == []

    def test_line_format(self):
        stream = schedule([Command(CommandKind.ACT, loc(row=7))], TP)
        assert export_trace(stream) == "0.000 ACT 0.0.0.0.7.0\n"

    def test_golden_trace_regression(self):
        from lamasim.lut_engine import run_bulk_mul
        _, _, _, stream = run_bulk_mul(4, 64, 2, seed=42)
        golden_path = os.path.join(os.path.dirname(__file__), "data",
                                   "golden_bulkmul_4bit.trace")
        with open(golden_path) as fh:
            assert export_trace(stream) == fh.read()


class TestConcat:
    def test_concat_preserves_counts(self):
        rng = np.random.default_rng(9)
        a = schedule(random_legal_commands(rng, default_config()), TP)
        b = schedule(random_legal_commands(rng, default_config()), TP)
        c = concat_streams(a, b)
        assert len(c) == len(a) + len(b)
        assert c.count(CommandKind.ACT) == (a.count(CommandKind.ACT)
                                            + b.count(CommandKind.ACT))

"""LUT layout, column addressing, mask logic, batch execution."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lamasim.lut_engine import (CoalescedBatch, LutEngineError, OutputBuffer,
                                TemporaryBuffer, build_batch_commands,
                                build_layout, column_addresses, execute_batch,
                                faw_stall_analysis, lookup_results, mask_select,
                                run_bulk_mul, export_lut_image)
from lamasim.timing import CommandKind, TimingParams, validate
from lamasim.topology import Location, default_config

CFG = default_config()
TP = TimingParams()


def mul(a, b):
    return a * b


class TestBuildLayout:
    def test_4bit(self):
        layout, image = build_layout(mul, 4)
        assert (layout.p, layout.mats_per_lut, layout.replicas_per_subarray,
                layout.lut_rows, layout.result_bits) == (16, 1, 16, 16, 8)
        assert layout.icas_per_result == 1
        assert layout.mask_msb_count == 0
        assert image.shape == (16, 16, 64)

    def test_8bit(self):
        layout, _ = build_layout(mul, 8)
        assert (layout.p, layout.mats_per_lut, layout.replicas_per_subarray,
                layout.lut_rows) == (2, 8, 2, 256)
        assert layout.result_bits == 16

    def test_6bit_row_spans_two_mats(self):
        layout, _ = build_layout(mul, 6)
        assert (layout.p, layout.mats_per_lut) == (8, 2)
        # 64 results x 2 B = 128 B = two 64-byte mat segments
        assert layout.lut_rows * layout.result_bytes == 128

    def test_parameter_table(self):
        expect = {4: (16, 4, 0, 1), 5: (16, 5, 0, 2), 6: (8, 5, 1, 2),
                  7: (4, 5, 2, 2), 8: (2, 5, 3, 2)}
        for bits, (p, lsbs, msbs, icas) in expect.items():
            layout, _ = build_layout(mul, bits)
            assert (layout.p, layout.col_lsbs, layout.mask_msb_count,
                    layout.icas_per_result) == (p, lsbs, msbs, icas)
            assert layout.mats_per_lut * layout.p == 16

    def test_bitwidth_range(self):
        with pytest.raises(LutEngineError):
            build_layout(mul, 3)
        with pytest.raises(LutEngineError):
            build_layout(mul, 9)

    def test_row_width_fully_occupied(self):
        for bits in range(4, 9):
            layout, image = build_layout(mul, bits)
            used = layout.replicas_per_subarray * layout.mats_per_lut
            assert used == CFG.mats_per_subarray

    def test_image_export(self):
        layout, image = build_layout(mul, 4)
        assert len(export_lut_image(image, row=0)) == 1024
        assert len(export_lut_image(image)) == 16 * 1024


class TestColumnAddresses:
    def test_8bit_example(self):
        layout, _ = build_layout(mul, 8)
        ica1, ica2, sel = column_addresses(0b10110101, layout)
        assert (ica1, ica2, sel) == (42, 43, 0b101)

    def test_4bit_single_ica(self):
        layout, _ = build_layout(mul, 4)
        assert column_addresses(0, layout) == (0, None, 0)
        assert column_addresses(9, layout) == (9, None, 0)

    def test_6bit_example(self):
        layout, _ = build_layout(mul, 6)
        ica1, ica2, sel = column_addresses(0b100001, layout)
        assert (ica1, ica2, sel) == (2, 3, 1)

    @given(bits=st.integers(5, 8), data=st.data())
    @settings(max_examples=120, deadline=None)
    def test_bit_rule(self, bits, data):
        layout, _ = build_layout(mul, bits)
        b = data.draw(st.integers(0, (1 << bits) - 1))
        ica1, ica2, sel = column_addresses(b, layout)
        assert ica1 == ((b & 0x1F) << 1)
        assert ica2 == ica1 | 1
        assert sel == (b >> 5 if layout.mask_msb_count else 0)

    def test_domain_checked(self):
        layout, _ = build_layout(mul, 4)
        with pytest.raises(LutEngineError):
            column_addresses(16, layout)

    @given(bits=st.integers(4, 8), data=st.data())
    @settings(max_examples=60, deadline=None)
    def test_readback_oracle(self, bits, data):
        """Byte read-back at the computed addresses recovers f(a, b)."""
        layout, image = build_layout(mul, bits)
        a = data.draw(st.integers(0, (1 << bits) - 1))
        b = data.draw(st.integers(0, (1 << bits) - 1))
        ica1, ica2, sel = column_addresses(b, layout)
        mat = sel  # first replica
        if bits == 4:
            value = int(image[a, mat, ica1])
        else:
            value = int(image[a, mat, ica1]) | (int(image[a, mat, ica2]) << 8)
        assert value == a * b


class TestMaskSelect:
    def test_p16_passthrough(self):
        layout, _ = build_layout(mul, 4)
        data = np.arange(16, dtype=np.uint8)
        np.testing.assert_array_equal(mask_select(data, [], layout), data)

    def test_p2_examples(self):
        layout, _ = build_layout(mul, 8)
        data = np.arange(16, dtype=np.uint8)
        out = mask_select(data, [0, 7], layout)
        np.testing.assert_array_equal(out, [0, 15])

    def test_p8_odd_bytes(self):
        layout, _ = build_layout(mul, 6)
        data = np.arange(16, dtype=np.uint8)
        out = mask_select(data, [1] * 8, layout)
        np.testing.assert_array_equal(out, np.arange(1, 16, 2))

    def test_select_count_enforced(self):
        layout, _ = build_layout(mul, 8)
        with pytest.raises(LutEngineError):
            mask_select(np.zeros(16, dtype=np.uint8), [0], layout)


class TestExecuteBatch:
    def test_4bit_all_values(self):
        layout, image = build_layout(mul, 4)
        batch = CoalescedBatch(scalar_a=3,
                               vector_b=np.arange(256) % 16,
                               positional_index=0)
        results, stream = execute_batch(batch, layout, image)
        np.testing.assert_array_equal(results, 3 * (np.arange(256) % 16))
        # 2 ACT + 8 INTERNAL_READ + 16 LUT_RETRIEVAL + 2 PRE
        assert len(stream) == 28
        assert stream.count(CommandKind.ACT) == 2
        assert stream.count(CommandKind.INTERNAL_READ) == 8
        assert stream.count(CommandKind.LUT_RETRIEVAL) == 16
        assert stream.count(CommandKind.PRE) == 2
        assert validate(stream, TP) == []

    def test_zero_scalar(self):
        layout, image = build_layout(mul, 5)
        batch = CoalescedBatch(0, np.arange(32))
        results, _ = execute_batch(batch, layout, image)
        assert not results.any()

    def test_8bit_max_operands(self):
        layout, image = build_layout(mul, 8)
        results, stream = execute_batch(
            CoalescedBatch(255, np.array([255])), layout, image)
        assert results[0] == 65025
        _, _, sel = column_addresses(255, layout)
        assert sel == 0b111

    def test_mask_cycles_set_when_masking(self):
        layout, image = build_layout(mul, 8)
        _, stream = execute_batch(CoalescedBatch(7, np.arange(4)), layout, image)
        ret = stream.mask_cycles[stream.kind == int(CommandKind.LUT_RETRIEVAL)]
        assert (ret == 2).all()
        layout4, image4 = build_layout(mul, 4)
        _, stream4 = execute_batch(CoalescedBatch(7, np.arange(4)), layout4, image4)
        ret4 = stream4.mask_cycles[stream4.kind == int(CommandKind.LUT_RETRIEVAL)]
        assert (ret4 == 0).all()

    def test_act_count_law(self):
        """2 ACTs per touched source row, at every bitwidth."""
        for bits in (4, 8):
            layout, image = build_layout(mul, bits)
            for n_elems, rows in ((256, 1), (1024, 1), (1500, 2), (2048, 2)):
                batch = CoalescedBatch(1, np.arange(n_elems) % (1 << bits))
                _, stream = execute_batch(batch, layout, image)
                assert stream.count(CommandKind.ACT) == 2 * rows, (bits, n_elems)
                assert stream.count(CommandKind.PRE) == 2 * rows

    def test_domain_errors(self):
        layout, image = build_layout(mul, 4)
        with pytest.raises(LutEngineError):
            execute_batch(CoalescedBatch(1, np.array([16])), layout, image)
        with pytest.raises(LutEngineError):
            execute_batch(CoalescedBatch(16, np.array([1])), layout, image)
        with pytest.raises(LutEngineError):
            execute_batch(CoalescedBatch(1, np.array([1]),
                                         positional_index=512), layout, image)

    @given(bits=st.integers(4, 8), seed=st.integers(0, 2 ** 16))
    @settings(max_examples=25, deadline=None)
    def test_arbitrary_function_tables(self, bits, seed):
        """The mechanism works for any two-operand table, not only multiply."""
        mask = (1 << bits) - 1
        tables = {
            "add": lambda a, b: (a + b) & ((1 << (8 if bits == 4 else 16)) - 1),
            "sat_sub": lambda a, b: max(a - b, 0),
        }
        rng = np.random.default_rng(seed)
        b_vec = rng.integers(0, mask + 1, size=64)
        a = int(rng.integers(0, mask + 1))
        for name, f in tables.items():
            layout, image = build_layout(f, bits)
            results, stream = execute_batch(
                CoalescedBatch(a, b_vec), layout, image, run_scheduler=False)
            expected = np.array([f(a, int(b)) for b in b_vec])
            np.testing.assert_array_equal(results, expected, err_msg=name)


class TestBuffers:
    def test_temporary_buffer_capacity(self):
        buf = TemporaryBuffer()
        buf.load(np.zeros(64, dtype=np.uint8))
        with pytest.raises(LutEngineError):
            buf.load(np.zeros(65, dtype=np.uint8))

    def test_output_buffer_flushes_at_16(self):
        buf = OutputBuffer()
        for _ in range(9):
            buf.push(4)   # 36 bytes total
        buf.finish()
        assert buf.flushes == [16, 16, 4]

    def test_8bit_batch_flush_trail(self):
        layout, image = build_layout(mul, 8)
        execution = build_batch_commands(
            CoalescedBatch(3, np.arange(100) % 256), layout, CFG, Location())
        # 100 results x 2 B = 200 B: twelve full flushes and an 8 B tail
        assert execution.output_flushes == [16] * 12 + [8]

    def test_4bit_bypasses_the_buffer(self):
        layout, image = build_layout(mul, 4)
        execution = build_batch_commands(
            CoalescedBatch(3, np.arange(64) % 16), layout, CFG, Location())
        assert execution.output_flushes == []


class TestBulkRun:
    def test_streams_validate(self):
        for bits in (4, 5, 6, 7, 8):
            _, _, results, stream = run_bulk_mul(bits, 512, 4, seed=1)
            assert validate(stream, TP) == []

    def test_results_match_native(self):
        for bits in (4, 6, 8):
            a, b, results, _ = run_bulk_mul(bits, 777, 3, seed=2)
            np.testing.assert_array_equal(results, a * b)


class TestFawAnalysis:
    def test_threshold_at_128(self):
        for s in (16, 64, 96, 127, 128):
            assert faw_stall_analysis(s).stalls, s
        for s in (129, 130, 160, 256, 1024):
            assert not faw_stall_analysis(s).stalls, s

    def test_budget_is_eight_windows(self):
        r = faw_stall_analysis(64)
        assert r.act_budget_ns == pytest.approx(8 * TP.tFAW)

"""Shared fixtures and stream generators for the suite."""

from __future__ import annotations

import numpy as np
import pytest

from lamasim.timing import Command, CommandKind, CommandStream, TimingParams
from lamasim.topology import HbmConfig, Location, default_config

COLUMN_KINDS = (CommandKind.INTERNAL_READ, CommandKind.LUT_RETRIEVAL,
                CommandKind.OUTPUT_XFER, CommandKind.WRITE,
                CommandKind.COUNT_UPDATE)


@pytest.fixture
def cfg() -> HbmConfig:
    return default_config()


@pytest.fixture
def timing_params() -> TimingParams:
    return TimingParams()


def random_legal_commands(rng: np.random.Generator,
                          cfg: HbmConfig,
                          max_cmds: int = 30) -> list[Command]:
    """A command list satisfying the scheduler preconditions: every column
    command follows an ACT to its row, no double opens, PRE only on open
    rows."""
    n_places = rng.integers(1, 5)
    seen = set()
    places = []
    while len(places) < n_places:
        p = Location(
            pch=int(rng.integers(0, 2)),
            bank_group=int(rng.integers(0, cfg.bank_groups_per_pch)),
            bank=int(rng.integers(0, cfg.banks_per_group)),
            subarray=int(rng.integers(0, 4)),
        )
        key = (p.pch, p.bank_group, p.bank, p.subarray)
        if key not in seen:
            seen.add(key)
            places.append(p)
    open_rows: dict[int, int] = {}
    cmds: list[Command] = []
    target_len = int(rng.integers(3, max_cmds))
    while len(cmds) < target_len:
        pi = int(rng.integers(0, len(places)))
        loc = places[pi]
        if pi not in open_rows:
            row = int(rng.integers(0, cfg.rows_per_subarray))
            open_rows[pi] = row
            cmds.append(Command(CommandKind.ACT, loc.with_(row=row)))
        else:
            roll = rng.random()
            row = open_rows[pi]
            if roll < 0.2:
                cmds.append(Command(CommandKind.PRE, loc.with_(row=row)))
                del open_rows[pi]
            else:
                kind = COLUMN_KINDS[int(rng.integers(0, len(COLUMN_KINDS)))]
                mask = int(rng.choice([0, 2, 4, 8])) \
                    if kind == CommandKind.LUT_RETRIEVAL else 0
                cmds.append(Command(
                    kind,
                    loc.with_(row=row,
                              byte_col=int(rng.integers(0, cfg.mat_segment_bytes))),
                    mask_cycles=mask,
                    data_bits=128))
    # close everything still open so streams are self-contained
    for pi, row in open_rows.items():
        cmds.append(Command(CommandKind.PRE, places[pi].with_(row=row)))
    return cmds


def copy_stream(stream: CommandStream) -> CommandStream:
    names = (*CommandStream._FIELDS, "issue_ns", "completion_ns", "faw_stall_ns")
    return CommandStream(stream.cfg,
                         {n: getattr(stream, n).copy() for n in names})


def mutate_stream(stream: CommandStream, rng: np.random.Generator,
                  timing: TimingParams) -> CommandStream | None:
    """Break one timing or open-page rule with a guaranteed-detectable edit.

    Returns None when the stream offers no applicable mutation point."""
    s = copy_stream(stream)
    kinds = s.kind
    subs = s.sub_ids()

    mutations = []

    # column too soon after its ACT (tRCD)
    col_idx = np.flatnonzero(~np.isin(kinds, (int(CommandKind.ACT),
                                              int(CommandKind.PRE))))
    act_idx = np.flatnonzero(kinds == int(CommandKind.ACT))
    if len(col_idx):
        def break_trcd():
            i = int(rng.choice(col_idx))
            acts_before = [int(j) for j in act_idx
                           if subs[j] == subs[i] and s.issue_ns[j] <= s.issue_ns[i]]
            if not acts_before:
                return False
            s.issue_ns[i] = s.issue_ns[acts_before[-1]] + timing.tRCD * 0.25
            return True
        mutations.append(break_trcd)

        def break_open_page():
            i = int(rng.choice(col_idx))
            s.row[i] = (s.row[i] + 1) % stream.cfg.rows_per_subarray
            return True
        mutations.append(break_open_page)

    pre_idx = np.flatnonzero(kinds == int(CommandKind.PRE))
    if len(pre_idx):
        def break_tras():
            i = int(rng.choice(pre_idx))
            acts_before = [int(j) for j in act_idx
                           if subs[j] == subs[i] and s.issue_ns[j] <= s.issue_ns[i]]
            if not acts_before:
                return False
            s.issue_ns[i] = s.issue_ns[acts_before[-1]] + timing.tRAS * 0.3
            return True
        mutations.append(break_tras)

    if len(act_idx) >= 2:
        def break_trrd():
            pchs = s.pch
            for a, b in zip(act_idx, act_idx[1:]):
                if pchs[a] == pchs[b]:
                    s.issue_ns[int(b)] = s.issue_ns[int(a)] + timing.tRRD * 0.25
                    return True
            return False
        mutations.append(break_trrd)

    rng.shuffle(mutations)
    for mut in mutations:
        if mut():
            return s
    return None

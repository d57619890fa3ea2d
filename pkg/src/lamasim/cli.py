"""Experiment runner: desk-scale reproduction of the comparison tables.

Subcommands:

  bulk-mul        run one or more engines on a bulk-multiplication workload
  accel           map a model JSON onto pseudo-channels and estimate cost
  validate-trace  re-check a command trace against the timing rules
  config          emit the default configuration (--dump)

`run` verifies functional engines against the native multiply oracle and
fails loudly (nonzero exit) on any mismatch or timing violation, whatever
the cost figures say. CSV output is byte-deterministic for a fixed spec and
seed.
"""

from __future__ import annotations

import argparse
import dataclasses
import io
import json
import sys
from dataclasses import dataclass

import numpy as np

from .topology import HbmConfig, default_config
from .timing import TimingParams, elapsed_ns, import_trace, validate
from .energy import CALIBRATED, EnergyParams, energy, performance
from .lut_engine import run_bulk_mul
from .baselines import pluto_cost, pluto_execute, simdram_cost
from .accel import ModelSpec, estimate_inference, map_model

CSV_SCHEMA = ("# lamasim bulk-mul results v1: engine,op_bits,Latency (ns),"
              "Energy (nJ),Performance (GOPs/s),Num ACT commands,"
              "Num Total commands,checks_passed")

ENGINES = ("lama", "pluto", "simdram")


class OracleError(Exception):
    """A functional engine disagreed with the native oracle."""


@dataclass(frozen=True)
class ExperimentSpec:
    engine: str
    op_bits: int
    ops: int
    parallelism: int
    seed: int = 0

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.ops < 1:
            raise ValueError(f"ops must be >= 1, got {self.ops}")
        if self.parallelism < 1:
            raise ValueError(f"parallelism must be >= 1, got {self.parallelism}")


@dataclass(frozen=True)
class ResultRow:
    engine: str
    op_bits: int
    latency_ns: float
    energy_nj: float
    gops: float
    act_count: int
    total_count: int
    checks_passed: str


def run(spec: ExperimentSpec,
        cfg: HbmConfig | None = None,
        timing: TimingParams | None = None,
        energy_params: EnergyParams | None = None) -> ResultRow:
    """Dispatch one experiment and verify its functional output."""
    cfg = cfg or default_config()
    timing = timing or TimingParams()
    energy_params = energy_params or CALIBRATED

    if spec.engine == "lama":
        a, b, results, stream = run_bulk_mul(
            spec.op_bits, spec.ops, spec.parallelism, cfg, timing,
            seed=spec.seed)
        if not np.array_equal(results, a * b):
            raise OracleError(
                f"lama {spec.op_bits}-bit results disagree with native multiply")
        violations = validate(stream, timing)
        if violations:
            raise OracleError(
                f"lama stream has {len(violations)} timing violations, "
                f"first: {violations[0]}")
        report = energy(stream, energy_params, active_banks=spec.parallelism,
                        ops=spec.ops)
        return ResultRow(
            engine="lama", op_bits=spec.op_bits,
            latency_ns=report.latency_ns, energy_nj=report.total_nj,
            gops=report.gops_per_s, act_count=report.act_count,
            total_count=report.total_count,
            checks_passed="functional+timing")

    if spec.engine == "pluto":
        checks = "cost-only"
        if spec.op_bits <= 4:
            rng = np.random.default_rng(spec.seed)
            pairs = rng.integers(0, 1 << spec.op_bits, size=(spec.ops, 2))
            results, _, _ = pluto_execute(pairs, spec.op_bits, spec.parallelism)
            if not np.array_equal(results, pairs[:, 0] * pairs[:, 1]):
                raise OracleError("pluto sweep disagrees with native multiply")
            checks = "functional"
        cost = pluto_cost(spec.op_bits, spec.ops, spec.parallelism, timing)
        return ResultRow(
            engine="pluto", op_bits=spec.op_bits,
            latency_ns=cost.latency_ns, energy_nj=cost.energy_nj,
            gops=performance(spec.ops, cost.latency_ns),
            act_count=cost.act_count, total_count=cost.total_count,
            checks_passed=checks)

    cost = simdram_cost(spec.op_bits, spec.ops, spec.parallelism)
    return ResultRow(
        engine="simdram", op_bits=spec.op_bits,
        latency_ns=cost.latency_ns, energy_nj=cost.energy_nj,
        gops=performance(spec.ops, cost.latency_ns),
        act_count=cost.act_count, total_count=cost.total_count,
        checks_passed="cost-only")


def compare(specs: list[ExperimentSpec], reference: str | None = None,
            **kw) -> tuple[list[ResultRow], list[dict]]:
    """Run all specs in input order; append speedup / energy-saving ratios
    against the named reference engine when one is given."""
    rows = [run(s, **kw) for s in specs]
    table = []
    ref_rows = {(r.engine, r.op_bits): r for r in rows}
    for r in rows:
        rec = dataclasses.asdict(r)
        if reference:
            ref = ref_rows.get((reference, r.op_bits))
            if ref is not None:
                rec["speedup_vs_" + reference] = ref.latency_ns / r.latency_ns
                rec["energy_saving_vs_" + reference] = ref.energy_nj / r.energy_nj
        table.append(rec)
    return rows, table


def _format_csv(table: list[dict]) -> str:
    buf = io.StringIO()
    buf.write(CSV_SCHEMA + "\n")
    if not table:
        return buf.getvalue()
    keys = list(table[0].keys())
    buf.write(",".join(keys) + "\n")
    for rec in table:
        cells = []
        for k in keys:
            v = rec[k]
            cells.append(f"{v:.6g}" if isinstance(v, float) else str(v))
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()


def _format_text(table: list[dict]) -> str:
    if not table:
        return "(no results)\n"
    keys = list(table[0].keys())
    rows = [[f"{rec[k]:.6g}" if isinstance(rec[k], float) else str(rec[k])
             for k in keys] for rec in table]
    widths = [max(len(k), *(len(r[i]) for r in rows)) for i, k in enumerate(keys)]
    lines = ["  ".join(k.ljust(w) for k, w in zip(keys, widths))]
    for r in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
    return "\n".join(lines) + "\n"


def _emit(table: list[dict], fmt: str, out_path: str | None) -> None:
    if fmt == "csv":
        text = _format_csv(table)
    elif fmt == "json":
        text = json.dumps(table, indent=2) + "\n"
    else:
        text = _format_text(table)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_bulk_mul(args) -> int:
    engines = ENGINES if args.engine == "all" else tuple(args.engine.split(","))
    specs = [ExperimentSpec(engine=e, op_bits=args.bits, ops=args.ops,
                            parallelism=args.parallel, seed=args.seed)
             for e in engines]
    try:
        _, table = compare(specs, reference=args.baseline)
    except OracleError as exc:
        print(f"oracle failure: {exc}", file=sys.stderr)
        return 2
    _emit(table, args.format, args.out)
    return 0


def _cmd_accel(args) -> int:
    with open(args.model) as fh:
        model = ModelSpec.from_json(fh.read())
    plan = map_model(model)
    report = estimate_inference(model, plan, inferences=args.inferences,
                                energy_params=CALIBRATED)
    rec = report.to_dict()
    rec["stages"] = len(plan.stages)
    rec["pch_used"] = plan.pch_used
    _emit([rec], args.format, args.out)
    return 0


def _cmd_validate_trace(args) -> int:
    with open(args.trace) as fh:
        stream = import_trace(fh.read())
    violations = validate(stream, TimingParams())
    for v in violations:
        print(v)
    print(f"{len(stream)} commands, {len(violations)} violations, "
          f"elapsed {elapsed_ns(stream):.3f} ns")
    return 1 if violations else 0


def _cmd_config(args) -> int:
    if not args.dump:
        print("nothing to do; use --dump", file=sys.stderr)
        return 2
    doc = {
        "hbm": dataclasses.asdict(default_config()),
        "timing": dataclasses.asdict(TimingParams()),
        "energy": dataclasses.asdict(EnergyParams()),
    }
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lamasim",
        description="LUT-based processing-using-memory simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bulk-mul", help="bulk multiplication experiments")
    p.add_argument("--engine", default="all",
                   help="engine name, comma list, or 'all'")
    p.add_argument("--bits", type=int, default=4, help="operand bits")
    p.add_argument("--ops", type=int, default=1024)
    p.add_argument("--parallel", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--baseline", default=None,
                   help="reference engine for ratio columns")
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "json", "text"), default="text")
    p.set_defaults(func=_cmd_bulk_mul)

    p = sub.add_parser("accel", help="accelerator inference estimate")
    p.add_argument("--model", required=True, help="model spec JSON path")
    p.add_argument("--inferences", type=int, default=1)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "json", "text"), default="json")
    p.set_defaults(func=_cmd_accel)

    p = sub.add_parser("validate-trace", help="check a command trace")
    p.add_argument("--trace", required=True)
    p.set_defaults(func=_cmd_validate_trace)

    p = sub.add_parser("config", help="configuration inspection")
    p.add_argument("--dump", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_config)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

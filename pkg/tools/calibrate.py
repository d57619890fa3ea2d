"""One-time energy calibration.

Fits the three EnergyParams multipliers (act_scale, col_scale, logic_duty)
so the modeled bulk-multiplication rows land inside their acceptance
tolerances against the reference figures:

  latency / energy within +-20 percent of the reference row
  energy-saving and speedup ratios against pLUTo within +-15 percent

The per-bit attribution itself is fixed (see lamasim.energy); an exact fit
of both reference energies is infeasible under it with non-negative
multipliers, so the script minimizes the worst tolerance-normalized error
over a grid and prints the constants to commit into energy.CALIBRATED.

Run: PYTHONPATH=src python3 tools/calibrate.py
"""

from __future__ import annotations

import itertools
import sys

import numpy as np

sys.path.insert(0, "src")

from lamasim.energy import EnergyParams, energy
from lamasim.lut_engine import run_bulk_mul
from lamasim.refdata import BULK_MUL_REFERENCE, HEADLINE_RATIOS
from lamasim.timing import elapsed_ns


def model_rows():
    rows = {}
    for bits in (4, 8):
        _, _, _, stream = run_bulk_mul(bits, 1024, 4)
        rows[bits] = stream
    return rows


def components(stream, banks=4):
    """Energy components at unit multipliers: (act, col+io, logic) in nJ."""
    base = EnergyParams()
    rep = energy(stream, base, banks)
    return rep.activation_nj, rep.column_movement_nj + rep.io_nj, rep.logic_nj


def main():
    streams = model_rows()
    comp = {bits: components(s) for bits, s in streams.items()}
    lat = {bits: elapsed_ns(s) for bits, s in streams.items()}
    ref = BULK_MUL_REFERENCE

    for bits in (4, 8):
        print(f"{bits}-bit: latency {lat[bits]:.1f} ns "
              f"(ref {ref['lama'][bits]['latency_ns']}), "
              f"unit components act/col/logic = "
              f"{comp[bits][0]:.2f}/{comp[bits][1]:.2f}/{comp[bits][2]:.2f} nJ")

    def errors(a, c, d):
        out = []
        for bits in (4, 8):
            act, col, logic = comp[bits]
            e = a * act + c * col + d * logic
            e_ref = ref["lama"][bits]["energy_nj"]
            out.append(abs(e / e_ref - 1) / 0.20)
            ratio = ref["pluto"][bits]["energy_nj"] / e
            r_ref = HEADLINE_RATIOS["energy_saving"][bits]
            out.append(abs(ratio / r_ref - 1) / 0.15)
        return max(out)

    # Floors keep every component physically present: the unconstrained
    # optimum zeroes activation and column energy entirely, which would make
    # the calibrated breakdown meaningless.
    best = None
    grid_a = np.arange(0.25, 1.01, 0.05)
    grid_c = np.arange(0.01, 0.21, 0.005)
    grid_d = np.arange(0.5, 2.51, 0.01)
    for a, c, d in itertools.product(grid_a, grid_c, grid_d):
        worst = errors(a, c, d)
        if best is None or worst < best[0]:
            best = (worst, round(float(a), 3), round(float(c), 3), round(float(d), 3))

    worst, a, c, d = best
    print(f"\nbest fit: act_scale={a} col_scale={c} logic_duty={d} "
          f"(worst normalized error {worst:.3f})")
    for bits in (4, 8):
        act, col, logic = comp[bits]
        e = a * act + c * col + d * logic
        e_ref = ref["lama"][bits]["energy_nj"]
        ratio = ref["pluto"][bits]["energy_nj"] / e
        print(f"  {bits}-bit energy {e:.2f} nJ vs ref {e_ref} "
              f"({100 * (e / e_ref - 1):+.1f}%), pLUTo ratio {ratio:.2f} "
              f"vs {HEADLINE_RATIOS['energy_saving'][bits]}")


if __name__ == "__main__":
    main()

"""Published reference figures for the modeled engines.

The bulk-multiplication comparison below (1024 multiplications, parallelism
4, HBM2 constants from the default config) anchors the cost models: command
counts are reproduced exactly, latency and energy within documented
tolerances after one-time calibration. The CPU row is a measured external
platform and is carried as a documentation constant only; it is never
simulated.
"""

from __future__ import annotations

# engine -> op bits -> figures
BULK_MUL_REFERENCE: dict[str, dict[int, dict[str, float]]] = {
    "pluto": {
        4: {"latency_ns": 2240.0, "energy_nj": 247.4, "gops": 0.46,
            "act_count": 1088, "total_count": 2176},
        8: {"latency_ns": 8963.0, "energy_nj": 989.7, "gops": 0.11,
            "act_count": 4352, "total_count": 8704},
    },
    "simdram": {
        4: {"latency_ns": 7964.0, "energy_nj": 151.23, "gops": 0.13,
            "act_count": 310, "total_count": 465},
        8: {"latency_ns": 34065.0, "energy_nj": 646.9, "gops": 0.03,
            "act_count": 1326, "total_count": 1989},
    },
    "lama": {
        4: {"latency_ns": 583.0, "energy_nj": 25.8, "gops": 1.75,
            "act_count": 8, "total_count": 112},
        8: {"latency_ns": 2534.0, "energy_nj": 118.8, "gops": 0.4,
            "act_count": 8, "total_count": 592},
    },
}

#: AVX-512 Xeon W-2245 measurement, INT-8 only. Documentation constant.
CPU_REFERENCE_INT8 = {"latency_ns": 9760.4, "energy_nj": 7900.0, "gops": 0.1}

#: Headline ratios of the Lama row against the pLUTo row.
HEADLINE_RATIOS = {
    "energy_saving": {4: 9.6, 8: 8.3},
    "speedup": {4: 3.8, 8: 3.5},
}

#: Reference workload behind the table: 1024 ops split over 4 banks.
REFERENCE_OPS = 1024
REFERENCE_PARALLELISM = 4

#: External TPU/GPU comparisons are measurements on real hardware plus a
#: systolic-array simulator; they are out of scope here and only echoed in
#: the README. Nothing in this package reproduces them.
EXTERNAL_COMPARISONS_OUT_OF_SCOPE = True

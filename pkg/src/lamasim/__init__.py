"""lamasim: command-level simulator for LUT-based processing-using-memory.

Functional results, DRAM command streams, latency and energy for
operand-coalesced LUT arithmetic on HBM2, with row-sweep and bit-serial
baseline cost models and an exponential-quantization accelerator flow.
"""

from .topology import (HbmConfig, Location, default_config, validate_config,
                       capacity_bytes, flat_offset, location_from_offset)
from .timing import (TimingParams, Command, CommandKind, CommandStream,
                     schedule, validate, elapsed_ns, export_trace,
                     import_trace, OpenPageViolationError, KERNEL)
from .energy import (EnergyParams, EnergyReport, energy, performance,
                     CALIBRATED, MissingAnnotationError)
from .lut_engine import (LutLayout, CoalescedBatch, build_layout,
                         column_addresses, mask_select, execute_batch,
                         run_bulk_mul, LutEngineError)
from .baselines import (pluto_execute, pluto_cost, simdram_cost,
                        BaselineCost, UnsupportedPrecisionError)
from .teq import (TeqParams, TeqTensor, TermAccumulators, calibrate, encode,
                  decode, dot_terms_by_counting, combine_terms, reference_dot,
                  TeqError)
from .accel import (LayerSpec, SubarrayPlan, CounterBank, ModelSpec, Block,
                    MappingPlan, AccelReport, layout_layer, run_layer,
                    postprocess_layer, map_model, estimate_inference,
                    CounterOverflowError)
from .cli import ExperimentSpec, ResultRow, run, compare

__version__ = "0.1.0"

"""Importance-aware quantization codec for patch-based image transmission.

The package covers the full chain: importance-weighted bit allocation
(greedy incremental and water-filling KKT solvers), patch-wise uniform
quantization with a serializable bitstream, a binary symmetric channel
simulator, and the closed-form distortion analytics that make channel-aware
allocation work.
"""

from .allocation import (
    SolverConfig,
    WaterFillingResult,
    adjust_to_budget,
    allocate_fixed_q,
    allocate_incremental,
    allocate_sum_threshold,
    allocate_threshold,
    allocate_top_k,
    allocate_waterfilling,
    allocate_waterfilling_modified,
    brute_force_optimal,
    objective,
)
from .channel import ChannelSpec, ber_from_snr, transmit
from .distortion import (
    DistortionParams,
    RegimeError,
    distortion_bit_curvature,
    distortion_bit_slope,
    distortion_closed_form,
    exact_expected_distortion,
    flip_error_terms,
    marginal_value,
    marginal_value_slope,
    monte_carlo_distortion,
    quant_bound,
)
from .model import (
    BitAllocation,
    Budget,
    BudgetError,
    GeometryError,
    IaqError,
    ImageTensor,
    ImportanceMap,
    PatchPartition,
    compression_ratio,
    partition,
    pixel_range,
    side_info_bits,
)
from .pipeline import RunConfig, RunReport, emit_level_map, run_once, run_pipeline, sweep
from .quantizer import (
    Bitstream,
    BitstreamError,
    Codebook,
    decode_bits,
    dequantize_image,
    encode_index,
    quantize_image,
    quantize_pixel,
)
from .weights import WeightFunctionParams, weight, weight_vector

__version__ = "0.1.0"

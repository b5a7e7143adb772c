"""Reconstruction from 1-bit quantized modulo measurements.

Forward model ``y = Q(C mod(D B x, R))``; inverse in three stages:
harmonic dequantization, modulo recovery (matched filter or multi-shot
unwrapping) and CoSaMP sparse recovery.
"""
__version__ = "0.1.0"

from .core import (BitMeasurements, BlockDiagStack, FreqGrid, ModelConfig, ModelError, Mode,
                   ShapeError, apply_block_stack, seeded_uniform, strided_subvector)
from .dequant import PointRule, decode_interval, hm_dequantize, required_k
from .forward import (build_B, build_D, forward_model, harmonic_multipliers, measure_adaptive,
                      measure_nonadaptive, modulo, quantize)
from .modrec import matched_filter, recover_z, recover_z_multishot
from .pipeline import GroundTruth, PipelineReport, PipelineVariant, normalized_error, rqm
from .sparse import cosamp, haar2d_forward, haar2d_inverse, sparsify

__all__ = [
    "BitMeasurements", "BlockDiagStack", "FreqGrid", "ModelConfig", "ModelError", "Mode",
    "ShapeError", "apply_block_stack", "seeded_uniform", "strided_subvector", "PointRule",
    "decode_interval", "hm_dequantize", "required_k", "build_B", "build_D", "forward_model",
    "harmonic_multipliers", "measure_adaptive", "measure_nonadaptive", "modulo", "quantize",
    "matched_filter", "recover_z", "recover_z_multishot", "GroundTruth", "PipelineReport",
    "PipelineVariant", "normalized_error", "rqm", "cosamp", "haar2d_forward", "haar2d_inverse",
    "sparsify",
]

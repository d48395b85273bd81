from .boundaries import Segment, identify_layer_boundaries, segment_trace, split_layers
from .layers import (CandidateStructure, FcCandidate, LayerKind, identify_layer_type, recover_conv_os,
                     recover_conv_ws, recover_fc, recover_pooling, weight_count_solutions)
from .model import RecoveryReport, flatten, recover_layer, recover_model, structure_to_model

__all__ = [
    "Segment", "identify_layer_boundaries", "segment_trace", "split_layers",
    "CandidateStructure", "FcCandidate", "LayerKind", "identify_layer_type", "recover_conv_os",
    "recover_conv_ws", "recover_fc", "recover_pooling", "weight_count_solutions",
    "RecoveryReport", "flatten", "recover_layer", "recover_model", "structure_to_model",
]

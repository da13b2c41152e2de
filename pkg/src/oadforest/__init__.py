"""Online action detection from skeleton streams with context-trained random forests."""
from .detector import DetectedSegment, OnlineActionDetector, select_beta
from .exceptions import (AlignmentError, ConvergenceError, DegenerateError, FormatError,
                         InputError, OADFError)
from .features import SkeletonFeatures, extract_frame_feature
from .forest import ContextForestClassifier, rebalanced_bootstrap
from .metrics import boundary_scores, event_fscore, frame_fscore
from .serialization import load_model, save_model
from .streams import (ContextMatrix, GroundTruth, Segment, SkeletonStream, SynthConfig,
                      generate_synthetic, iter_synthetic, load_context_matrix,
                      load_skeleton_stream)

__version__ = "0.1.0"

__all__ = [
    "AlignmentError", "ContextForestClassifier", "ContextMatrix", "ConvergenceError",
    "DegenerateError", "DetectedSegment", "FormatError", "GroundTruth", "InputError",
    "OADFError", "OnlineActionDetector", "Segment", "SkeletonFeatures", "SkeletonStream",
    "SynthConfig", "boundary_scores", "event_fscore", "extract_frame_feature", "frame_fscore",
    "generate_synthetic", "iter_synthetic", "load_context_matrix", "load_model",
    "load_skeleton_stream", "rebalanced_bootstrap", "save_model", "select_beta",
]

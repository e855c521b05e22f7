"""Music structure analysis: features, repetition, OLDA, boundaries."""

from .boundaries import BoundarySet, detect_boundaries, segment_count
from .features import BeatGrid, extract_beat_features
from .olda import OldaModel, olda_fit
from .repetition import latent_repetition, self_similarity, stack_features

__all__ = [
    "BeatGrid", "BoundarySet", "OldaModel",
    "detect_boundaries", "extract_beat_features", "latent_repetition",
    "olda_fit", "segment_count", "self_similarity", "stack_features",
]

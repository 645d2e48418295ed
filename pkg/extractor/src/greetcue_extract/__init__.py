"""Offline converter from video files to greetcue landmark recordings."""

from .estimators import (BlobEstimator, EstimatorUnavailable,
                         MediaPipeEstimator, make_estimator)
from .extract import VideoUnreadable, extract
from .schema import PersonEstimate, assemble_record

__version__ = "0.1.0"

__all__ = [
    "BlobEstimator",
    "EstimatorUnavailable",
    "MediaPipeEstimator",
    "PersonEstimate",
    "VideoUnreadable",
    "assemble_record",
    "extract",
    "make_estimator",
]

"""Passive-sonar vessel classification: features, histogram-layer models, metrics."""

from ._core import (
    CLASS_NAMES,
    FEATURE_KINDS,
    NUM_CLASSES,
    SEGMENT_SAMPLES,
    TARGET_RATE,
    Model,
    build_model,
    classification_metrics,
    confusion,
    decode_wav,
    extract_feature,
    fdr,
    feature_shape,
    generate_corpus,
    histogram_forward,
    load_checkpoint,
    mcc,
    resample,
    sanity_probe,
    write_wav_float32,
)

__version__ = "0.1.0"

__all__ = [
    "CLASS_NAMES",
    "FEATURE_KINDS",
    "NUM_CLASSES",
    "SEGMENT_SAMPLES",
    "TARGET_RATE",
    "Model",
    "build_model",
    "classification_metrics",
    "confusion",
    "decode_wav",
    "extract_feature",
    "fdr",
    "feature_shape",
    "generate_corpus",
    "histogram_forward",
    "load_checkpoint",
    "mcc",
    "resample",
    "sanity_probe",
    "write_wav_float32",
    "__version__",
]

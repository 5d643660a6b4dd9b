"""Learned lifting-wavelet codec for vibration signals."""

from .codec import CodecConfig, Model, load_model, save_model
from .metrics import compress_samples, decompress_stream, evaluate_record
from .signal_io import SampleRecord, SynthConfig, load_samples, synthesize_bearing
from .training import TrainConfig, train_model

__all__ = [
    "CodecConfig",
    "Model",
    "SampleRecord",
    "SynthConfig",
    "TrainConfig",
    "compress_samples",
    "decompress_stream",
    "evaluate_record",
    "load_model",
    "load_samples",
    "save_model",
    "synthesize_bearing",
    "train_model",
]

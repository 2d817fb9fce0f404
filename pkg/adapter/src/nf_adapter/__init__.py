"""Bridge from torch image classifiers to NFAT activation tables."""

__version__ = "0.1.0"

from .attack import AttackConfig, AttackResult, ifgsm_attack
from .dataset import DatasetResult, build_dataset
from .errors import (
    AdapterError,
    NoQualifyingImagesError,
    ShortfallError,
    UnknownLayerError,
    UnsupportedModelError,
)
from .extraction import ActivationRecorder, ExtractionConfig, extract_activations
from .nfat import NfatTable, read_nfat, write_nfat

__all__ = [
    "ActivationRecorder",
    "AdapterError",
    "AttackConfig",
    "AttackResult",
    "DatasetResult",
    "ExtractionConfig",
    "NfatTable",
    "NoQualifyingImagesError",
    "ShortfallError",
    "UnknownLayerError",
    "UnsupportedModelError",
    "build_dataset",
    "extract_activations",
    "ifgsm_attack",
    "read_nfat",
    "write_nfat",
]

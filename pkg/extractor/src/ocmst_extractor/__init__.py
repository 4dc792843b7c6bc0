"""Image feature extraction companion for the one-class detector.

Runs images through a VGG19 truncated after its first 4096-wide fully
connected layer and writes the activations to the shared feature-file
format, ready for the detector's command line tools.
"""

from .datasets import DATASET_NAMES, load_split, preprocessing_text, transform_for
from .errors import ExtractionError
from .extract import ExtractionJob, extract_features
from .model import FEATURE_DIM, LAYER_NAME, FeatureBackbone, load_backbone
from .ocmf import write_ocmf

__version__ = "0.1.0"

__all__ = [
    "DATASET_NAMES",
    "ExtractionError",
    "ExtractionJob",
    "FEATURE_DIM",
    "FeatureBackbone",
    "LAYER_NAME",
    "extract_features",
    "load_backbone",
    "load_split",
    "preprocessing_text",
    "transform_for",
    "write_ocmf",
    "__version__",
]

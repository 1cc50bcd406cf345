"""Embed image folders with pre-trained vision models.

Pick a model from the documented registry, point it at a directory of
images, and get back a feature-bank file ready for downstream selection
tools: one float32 row per image in lexicographic filename order, with
the model id and pooling recorded in the manifest.
"""

from .errors import (
    EmptyDirectory,
    ExtractorError,
    ModelUnavailable,
    UndecodableImage,
)
from .extract import ExtractorSpec, extract_embeddings
from .registry import FAMILIES, REGISTRY, ModelEntry, get_model, list_models

__version__ = "0.1.0"

__all__ = [
    "EmptyDirectory",
    "ExtractorError",
    "ExtractorSpec",
    "FAMILIES",
    "ModelEntry",
    "ModelUnavailable",
    "REGISTRY",
    "UndecodableImage",
    "extract_embeddings",
    "get_model",
    "list_models",
    "__version__",
]

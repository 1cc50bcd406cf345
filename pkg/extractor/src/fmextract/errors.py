"""Typed errors raised by the extractor.

EmptyDirectory and UndecodableImage describe bad input and map to CLI
exit code 2; ModelUnavailable describes a model whose weights or runtime
dependencies cannot be obtained and maps to exit code 3.
"""


class ExtractorError(Exception):
    """Base class for all extractor errors."""


class ModelUnavailable(ExtractorError):
    """The requested model's weights or dependencies cannot be loaded."""


class UndecodableImage(ExtractorError):
    """A file with an image extension could not be decoded; names the file."""


class EmptyDirectory(ExtractorError):
    """The image directory is missing or contains no image files."""

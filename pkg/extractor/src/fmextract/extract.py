"""Embed an image folder and write the result as a feature-bank file."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .bankio import manifest_dict, write_feature_bank
from .errors import EmptyDirectory, UndecodableImage
from .models import build_encoder
from .registry import ModelEntry, get_model

IMAGE_SUFFIXES = (".bmp", ".gif", ".jpeg", ".jpg", ".png", ".tif", ".tiff", ".webp")


@dataclass(frozen=True)
class ExtractorSpec:
    """How to run one extraction: which model, at what size, pooled how.

    ``input_size`` and ``pooling`` default to the registry entry's native
    resolution and default pooling when left as None.
    """

    model_id: str
    input_size: int | None = None
    pooling: str | None = None
    device: str = "cpu"
    batch_size: int = 16

    def __post_init__(self):
        entry = get_model(self.model_id)
        if self.input_size is not None and self.input_size < 1:
            raise ValueError(f"input_size must be positive, got {self.input_size}")
        if self.pooling is not None and self.pooling not in entry.poolings:
            supported = ", ".join(entry.poolings)
            raise ValueError(
                f"pooling {self.pooling!r} is not supported by "
                f"{self.model_id}; supported: {supported}"
            )
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be positive, got {self.batch_size}")

    @property
    def entry(self) -> ModelEntry:
        return get_model(self.model_id)

    @property
    def resolved_input_size(self) -> int:
        return self.input_size if self.input_size is not None else self.entry.input_size

    @property
    def resolved_pooling(self) -> str:
        return self.pooling if self.pooling is not None else self.entry.default_pooling


def _list_images(image_dir: Path) -> list[Path]:
    if not image_dir.is_dir():
        raise EmptyDirectory(f"{image_dir} is not a directory")
    found = [
        path
        for path in image_dir.rglob("*")
        if path.is_file() and path.suffix.lower() in IMAGE_SUFFIXES
    ]
    if not found:
        raise EmptyDirectory(f"no image files under {image_dir}")
    return sorted(found, key=lambda path: path.relative_to(image_dir).as_posix())


def _decode(image_dir: Path, path: Path) -> Image.Image:
    rel = path.relative_to(image_dir).as_posix()
    try:
        with Image.open(path) as handle:
            handle.load()
            return handle.copy()
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise UndecodableImage(f"{rel}: {exc}") from exc


def extract_embeddings(
    image_dir, spec: ExtractorSpec, out, group_by_dir: bool = False
) -> None:
    """Embed every image under ``image_dir`` and write a feature bank to ``out``.

    Rows follow lexicographic relative-path order regardless of batching,
    sample ids are the relative paths, and group ids (when requested) are
    each image's directory relative to the root, with "." for top-level
    files. The written file records the model id and resolved pooling in
    its manifest and conforms to the feature-bank binary container.
    """
    image_dir = Path(image_dir)
    paths = _list_images(image_dir)
    entry = spec.entry
    encoder = build_encoder(
        entry, spec.resolved_input_size, spec.resolved_pooling, spec.device
    )

    images = [_decode(image_dir, path) for path in paths]
    blocks = []
    for start in range(0, len(images), spec.batch_size):
        blocks.append(encoder(images[start : start + spec.batch_size]))
    features = np.concatenate(blocks, axis=0).astype(np.float32)
    if features.shape != (len(paths), entry.dim):
        raise RuntimeError(
            f"{entry.model_id} produced shape {features.shape}, "
            f"expected ({len(paths)}, {entry.dim})"
        )

    sample_ids = [path.relative_to(image_dir).as_posix() for path in paths]
    group_ids = None
    if group_by_dir:
        group_ids = [
            path.relative_to(image_dir).parent.as_posix() for path in paths
        ]

    manifest = manifest_dict(
        source_model=entry.model_id,
        created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        extra={
            "pooling": spec.resolved_pooling,
            "input_size": str(spec.resolved_input_size),
        },
    )
    write_feature_bank(
        out,
        features,
        sample_ids,
        group_ids=group_ids,
        manifest=manifest,
    )

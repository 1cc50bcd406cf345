"""Writer for the feature-bank binary container.

Layout (little-endian):

    offset  size  field
    0       8     magic ``MCALFB1\\x00``
    8       4     u32 format version, currently 1
    12      4     u32 n_samples
    16      4     u32 dim
    20      1     u8 normalization code (0=raw, 1=l2, 2=zscore)
    21      3     reserved, must be zero
    24      N*d*4 IEEE-754 float32 payload, row-major
    ...     4     u32 trailer byte length
    ...     L     UTF-8 JSON trailer: {"manifest": ..., "sample_ids": [...]}
                  plus optional "group_ids"; keys sorted, no whitespace

This module implements the container independently so the extractor has
no runtime dependency on the selection toolkit that reads these files.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"MCALFB1\x00"
FORMAT_VERSION = 1
NORM_CODES = {"raw": 0, "l2": 1, "zscore": 2}

_HEADER = struct.Struct("<8sIIIB3s")


def manifest_dict(
    source_model: str,
    created_at: str,
    extra: dict[str, str] | None = None,
    normalization: str = "raw",
) -> dict:
    """Manifest payload in the shape the container's readers expect."""
    return {
        "source_model": source_model,
        "created_at": created_at,
        "format_version": "1",
        "normalization": normalization,
        "extra": {str(k): str(v) for k, v in (extra or {}).items()},
    }


def write_feature_bank(
    path,
    features: np.ndarray,
    sample_ids: list[str],
    group_ids: list[str] | None = None,
    manifest: dict | None = None,
    normalization: str = "raw",
) -> None:
    features = np.ascontiguousarray(features, dtype="<f4")
    if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
        raise ValueError(f"features must be a nonempty 2-D array, got {features.shape}")
    n_samples, dim = features.shape
    if len(sample_ids) != n_samples:
        raise ValueError(f"{len(sample_ids)} sample_ids for {n_samples} rows")
    if group_ids is not None and len(group_ids) != n_samples:
        raise ValueError(f"{len(group_ids)} group_ids for {n_samples} rows")
    if normalization not in NORM_CODES:
        raise ValueError(f"unknown normalization {normalization!r}")

    trailer_payload: dict = {
        "manifest": manifest if manifest is not None else manifest_dict("unknown", ""),
        "sample_ids": [str(s) for s in sample_ids],
    }
    if group_ids is not None:
        trailer_payload["group_ids"] = [str(g) for g in group_ids]
    trailer = json.dumps(
        trailer_payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")

    header = _HEADER.pack(
        MAGIC,
        FORMAT_VERSION,
        n_samples,
        dim,
        NORM_CODES[normalization],
        b"\x00\x00\x00",
    )
    with open(Path(path), "wb") as handle:
        handle.write(header)
        handle.write(features.tobytes())
        handle.write(struct.pack("<I", len(trailer)))
        handle.write(trailer)

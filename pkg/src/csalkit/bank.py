"""Feature-bank storage: load, validate, normalize, and persist embeddings.

A feature bank is an immutable (N, d) float32 matrix plus per-row sample
identifiers, optional group identifiers (e.g. the parent volume of a slice),
a normalization tag, and a free-form manifest describing provenance.

Binary wire format (little-endian):

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

The CSV form has header ``id[,group],f0..f{d-1}`` with one row per sample
and a ``<path>.manifest.json`` sidecar carrying the manifest, the
normalization tag, and the id-to-group mapping when groups are present.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    AlreadyNormalized,
    DimensionMismatch,
    DuplicateId,
    IoFailure,
    MalformedHeader,
    NonFiniteValue,
)

MAGIC = b"MCALFB1\x00"
FORMAT_VERSION = 1

NORMALIZATIONS = ("raw", "l2", "zscore")
_NORM_TO_CODE = {name: code for code, name in enumerate(NORMALIZATIONS)}
_CODE_TO_NORM = dict(enumerate(NORMALIZATIONS))

_HEADER = struct.Struct("<8sIIIB3s")

L2_UNIT_TOL = 1e-6


@dataclass(frozen=True)
class Manifest:
    """Provenance record stored alongside the feature matrix."""

    source_model: str = "unknown"
    created_at: str = ""
    format_version: str = "1"
    normalization: str = "raw"
    extra: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.format_version != "1":
            raise ValueError(
                f"unrecognized manifest format_version {self.format_version!r}"
            )
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"unknown normalization {self.normalization!r}")

    def to_dict(self) -> dict:
        return {
            "source_model": self.source_model,
            "created_at": self.created_at,
            "format_version": self.format_version,
            "normalization": self.normalization,
            "extra": dict(self.extra),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Manifest":
        return cls(
            source_model=str(data.get("source_model", "unknown")),
            created_at=str(data.get("created_at", "")),
            format_version=str(data.get("format_version", "1")),
            normalization=str(data.get("normalization", "raw")),
            extra={str(k): str(v) for k, v in dict(data.get("extra", {})).items()},
        )


@dataclass(frozen=True)
class FeatureBank:
    """Immutable dense embedding matrix with per-row identifiers.

    Structural requirements (shape agreement, nonempty matrix, recognized
    normalization tag) are enforced at construction. Value-level invariants
    such as finiteness, id uniqueness, and unit row norms under the ``l2``
    tag are checked by :func:`validate` so that damaged banks can still be
    inspected and reported on.
    """

    features: np.ndarray
    sample_ids: tuple[str, ...]
    group_ids: tuple[str, ...] | None = None
    normalization: str = "raw"
    manifest: Manifest = field(default_factory=Manifest)

    def __post_init__(self):
        feats = np.asarray(self.features)
        if feats.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {feats.shape}")
        if feats.shape[0] < 1 or feats.shape[1] < 1:
            raise ValueError(f"features must be at least 1x1, got {feats.shape}")
        if (
            feats.dtype != np.float32
            or not feats.flags.c_contiguous
            or feats.flags.writeable
        ):
            feats = np.array(feats, dtype=np.float32, order="C", copy=True)
            feats.flags.writeable = False
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "sample_ids", tuple(str(s) for s in self.sample_ids))
        if len(self.sample_ids) != feats.shape[0]:
            raise ValueError(
                f"{len(self.sample_ids)} sample_ids for {feats.shape[0]} rows"
            )
        if self.group_ids is not None:
            object.__setattr__(
                self, "group_ids", tuple(str(g) for g in self.group_ids)
            )
            if len(self.group_ids) != feats.shape[0]:
                raise ValueError(
                    f"{len(self.group_ids)} group_ids for {feats.shape[0]} rows"
                )
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"unknown normalization {self.normalization!r}")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class ValidationIssue:
    kind: str
    severity: str
    message: str
    rows: tuple[int, ...] = ()
    col: int | None = None


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[ValidationIssue, ...]

    @property
    def ok(self) -> bool:
        return not any(issue.severity == "error" for issue in self.issues)

    @property
    def errors(self) -> tuple[ValidationIssue, ...]:
        return tuple(i for i in self.issues if i.severity == "error")

    @property
    def warnings(self) -> tuple[ValidationIssue, ...]:
        return tuple(i for i in self.issues if i.severity == "warning")


def validate(bank: FeatureBank) -> ValidationReport:
    """Check value-level invariants and report every violation found.

    Zero rows in an ``l2``-tagged bank are reported as warnings: they are
    permitted (normalization preserves them) but worth surfacing.
    """
    issues: list[ValidationIssue] = []

    finite = np.isfinite(bank.features)
    if not finite.all():
        for row, col in np.argwhere(~finite):
            value = bank.features[row, col]
            issues.append(
                ValidationIssue(
                    kind="non_finite",
                    severity="error",
                    message=f"non-finite value {value!r} at row {row}, column {col}",
                    rows=(int(row),),
                    col=int(col),
                )
            )

    seen: dict[str, list[int]] = {}
    for row, sid in enumerate(bank.sample_ids):
        seen.setdefault(sid, []).append(row)
    for sid, rows in seen.items():
        if len(rows) > 1:
            issues.append(
                ValidationIssue(
                    kind="duplicate_id",
                    severity="error",
                    message=f"sample_id {sid!r} repeated at rows {rows}",
                    rows=tuple(rows),
                )
            )

    if bank.normalization == "l2":
        norms = np.linalg.norm(bank.features.astype(np.float64), axis=1)
        for row in np.flatnonzero(norms == 0.0):
            issues.append(
                ValidationIssue(
                    kind="zero_row",
                    severity="warning",
                    message=f"row {row} is all-zero and cannot be unit-normalized",
                    rows=(int(row),),
                )
            )
        bad = np.flatnonzero((norms != 0.0) & (np.abs(norms - 1.0) > L2_UNIT_TOL))
        for row in bad:
            issues.append(
                ValidationIssue(
                    kind="l2_norm",
                    severity="error",
                    message=(
                        f"row {row} has norm {norms[row]:.9g}, expected 1.0 "
                        f"within {L2_UNIT_TOL}"
                    ),
                    rows=(int(row),),
                )
            )

    return ValidationReport(issues=tuple(issues))


def normalize(bank: FeatureBank, mode: str) -> FeatureBank:
    """Return a normalized copy of the bank.

    ``l2`` scales each nonzero row to unit Euclidean norm and leaves
    all-zero rows untouched, recording their indices under the manifest key
    ``l2_zero_rows``. ``zscore`` standardizes each column to mean 0 and
    population standard deviation 1 (divisor N); constant columns map to
    zero and are recorded under ``zscore_constant_cols``. Re-applying the
    bank's existing mode is permitted; requesting a different mode on an
    already-normalized bank raises AlreadyNormalized.
    """
    if mode not in ("l2", "zscore"):
        raise ValueError(f"unknown normalization mode {mode!r}")
    if bank.normalization != "raw" and bank.normalization != mode:
        raise AlreadyNormalized(
            f"bank is already {bank.normalization}-normalized; cannot apply {mode}"
        )

    feats = bank.features.astype(np.float64)
    extra = dict(bank.manifest.extra)
    if mode == "l2":
        norms = np.linalg.norm(feats, axis=1)
        zero_rows = np.flatnonzero(norms == 0.0)
        scale = np.where(norms == 0.0, 1.0, norms)
        out = feats / scale[:, None]
        if zero_rows.size:
            extra["l2_zero_rows"] = ",".join(str(int(r)) for r in zero_rows)
    else:
        means = feats.mean(axis=0)
        sds = feats.std(axis=0)
        constant = np.flatnonzero(sds == 0.0)
        scale = np.where(sds == 0.0, 1.0, sds)
        out = (feats - means) / scale
        if constant.size:
            out[:, constant] = 0.0
            extra["zscore_constant_cols"] = ",".join(str(int(c)) for c in constant)

    manifest = replace(bank.manifest, normalization=mode, extra=extra)
    return FeatureBank(
        features=out.astype(np.float32),
        sample_ids=bank.sample_ids,
        group_ids=bank.group_ids,
        normalization=mode,
        manifest=manifest,
    )


def _check_loaded(features: np.ndarray, sample_ids: list[str]) -> None:
    """Raise typed errors for value invariants a loader must not pass through."""
    finite = np.isfinite(features)
    if not finite.all():
        row, col = np.argwhere(~finite)[0]
        raise NonFiniteValue(
            f"non-finite value at row {row}, column {col}",
            row=int(row),
            col=int(col),
        )
    seen: dict[str, int] = {}
    for row, sid in enumerate(sample_ids):
        if sid in seen:
            raise DuplicateId(
                f"sample_id {sid!r} appears at rows {seen[sid]} and {row}"
            )
        seen[sid] = row


def _encode_trailer(bank: FeatureBank) -> bytes:
    payload: dict = {
        "manifest": bank.manifest.to_dict(),
        "sample_ids": list(bank.sample_ids),
    }
    if bank.group_ids is not None:
        payload["group_ids"] = list(bank.group_ids)
    return json.dumps(
        payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


def _find_trailer_start(blob: bytes) -> int | None:
    """Locate the length-prefixed JSON trailer by scanning from the end.

    Returns the offset of the u32 length field, or None when no position
    yields a length prefix that both reaches end-of-file and frames a JSON
    object containing ``sample_ids``.
    """
    for pos in range(len(blob) - 4, _HEADER.size - 1, -1):
        (candidate,) = struct.unpack_from("<I", blob, pos)
        if pos + 4 + candidate != len(blob):
            continue
        try:
            payload = json.loads(blob[pos + 4 :].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            continue
        if isinstance(payload, dict) and "sample_ids" in payload:
            return pos
    return None


def _diagnose_framing(blob, declared_payload, trailer_len, remaining):
    """Build the right error when the declared payload/trailer framing fails.

    If a genuine trailer exists at a different offset, the payload is the
    wrong size for the declared dimensions; otherwise the container itself
    is damaged.
    """
    pos = _find_trailer_start(blob)
    if pos is not None and pos - _HEADER.size != declared_payload:
        actual = pos - _HEADER.size
        return DimensionMismatch(
            f"header dimensions imply a {declared_payload}-byte payload "
            f"but {actual} bytes precede the trailer"
        )
    return MalformedHeader(
        f"trailer declares {trailer_len} bytes but {remaining} remain"
    )


def _decode_binary(blob: bytes) -> FeatureBank:
    if len(blob) < _HEADER.size:
        raise MalformedHeader(
            f"file is {len(blob)} bytes, shorter than the {_HEADER.size}-byte header"
        )
    magic, version, n_samples, dim, norm_code, reserved = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise MalformedHeader(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise MalformedHeader(f"unsupported format version {version}")
    if norm_code not in _CODE_TO_NORM:
        raise MalformedHeader(f"unknown normalization code {norm_code}")
    if reserved != b"\x00\x00\x00":
        raise MalformedHeader(f"reserved bytes are nonzero: {reserved!r}")
    if n_samples < 1 or dim < 1:
        raise MalformedHeader(
            f"header declares n_samples={n_samples}, dim={dim}; both must be >= 1"
        )

    payload_bytes = n_samples * dim * 4
    offset = _HEADER.size
    if len(blob) < offset + payload_bytes + 4:
        available = max(len(blob) - offset - 4, 0)
        raise DimensionMismatch(
            f"header declares {n_samples}x{dim} float32 payload "
            f"({payload_bytes} bytes) but only {available} are present"
        )
    features = np.frombuffer(
        blob, dtype="<f4", count=n_samples * dim, offset=offset
    ).reshape(n_samples, dim)
    offset += payload_bytes

    (trailer_len,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    if len(blob) - offset != trailer_len:
        raise _diagnose_framing(blob, payload_bytes, trailer_len, len(blob) - offset)
    try:
        trailer = json.loads(blob[offset:].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedHeader(f"trailer is not valid JSON: {exc}") from exc
    if not isinstance(trailer, dict) or "sample_ids" not in trailer:
        raise MalformedHeader("trailer JSON must be an object with 'sample_ids'")

    sample_ids = trailer["sample_ids"]
    if not isinstance(sample_ids, list) or not all(
        isinstance(s, str) for s in sample_ids
    ):
        raise MalformedHeader("'sample_ids' must be a list of strings")
    if len(sample_ids) != n_samples:
        raise DimensionMismatch(
            f"{len(sample_ids)} sample_ids for {n_samples} declared rows"
        )
    group_ids = trailer.get("group_ids")
    if group_ids is not None:
        if not isinstance(group_ids, list) or not all(
            isinstance(g, str) for g in group_ids
        ):
            raise MalformedHeader("'group_ids' must be a list of strings")
        if len(group_ids) != n_samples:
            raise DimensionMismatch(
                f"{len(group_ids)} group_ids for {n_samples} declared rows"
            )
    try:
        manifest = Manifest.from_dict(trailer.get("manifest", {}))
        manifest = replace(manifest, normalization=_CODE_TO_NORM[norm_code])
    except (ValueError, TypeError, AttributeError) as exc:
        raise MalformedHeader(f"invalid manifest in trailer: {exc}") from exc

    _check_loaded(features, sample_ids)
    return FeatureBank(
        features=features,
        sample_ids=tuple(sample_ids),
        group_ids=tuple(group_ids) if group_ids is not None else None,
        normalization=_CODE_TO_NORM[norm_code],
        manifest=manifest,
    )


def _format_f32(value: np.float32) -> str:
    """Shortest decimal string that parses back to the same float32."""
    return np.format_float_positional(
        np.float32(value), unique=True, trim="0"
    )


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".manifest.json")


def _decode_csv(path: Path) -> FeatureBank:
    try:
        with open(path, "r", encoding="utf-8", newline="") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise MalformedHeader("csv file is empty")

    header = rows[0]
    if not header or header[0] != "id":
        raise MalformedHeader(f"csv header must start with 'id', got {header[:1]}")
    has_group = len(header) > 1 and header[1] == "group"
    feature_cols = header[2:] if has_group else header[1:]
    if not feature_cols:
        raise MalformedHeader("csv header declares no feature columns")
    expected = [f"f{i}" for i in range(len(feature_cols))]
    if feature_cols != expected:
        raise MalformedHeader(
            f"csv feature columns must be f0..f{len(feature_cols) - 1}, "
            f"got {feature_cols}"
        )

    data_rows = rows[1:]
    if not data_rows:
        raise MalformedHeader("csv file has a header but no data rows")
    dim = len(feature_cols)
    width = len(header)
    sample_ids: list[str] = []
    group_ids: list[str] = []
    features = np.empty((len(data_rows), dim), dtype=np.float32)
    for r, row in enumerate(data_rows):
        if len(row) != width:
            raise DimensionMismatch(
                f"csv row {r} has {len(row)} fields, header declares {width}"
            )
        sample_ids.append(row[0])
        start = 1
        if has_group:
            group_ids.append(row[1])
            start = 2
        for c, token in enumerate(row[start:]):
            try:
                features[r, c] = np.float32(float(token))
            except ValueError as exc:
                raise MalformedHeader(
                    f"csv row {r}, column f{c}: {token!r} is not a number"
                ) from exc

    normalization = "raw"
    manifest = Manifest()
    sidecar = _sidecar_path(path)
    if sidecar.exists():
        try:
            meta = json.loads(sidecar.read_text(encoding="utf-8"))
            manifest = Manifest.from_dict(meta.get("manifest", {}))
            normalization = str(meta.get("normalization", "raw"))
        except (OSError, json.JSONDecodeError, ValueError) as exc:
            raise MalformedHeader(f"invalid manifest sidecar {sidecar}: {exc}") from exc
        if normalization not in NORMALIZATIONS:
            raise MalformedHeader(f"sidecar declares unknown normalization {normalization!r}")
        manifest = replace(manifest, normalization=normalization)

    _check_loaded(features, sample_ids)
    return FeatureBank(
        features=features,
        sample_ids=tuple(sample_ids),
        group_ids=tuple(group_ids) if has_group else None,
        normalization=normalization,
        manifest=manifest,
    )


def load_feature_bank(path, format: str = "binary") -> FeatureBank:
    """Load a feature bank from disk.

    Binary loading is bit-exact; row order always equals on-disk order.
    Malformed input raises a typed error rather than propagating parser
    internals: MalformedHeader, DimensionMismatch, NonFiniteValue, or
    DuplicateId.
    """
    path = Path(path)
    if format == "binary":
        try:
            blob = path.read_bytes()
        except OSError as exc:
            raise IoFailure(f"cannot read {path}: {exc}") from exc
        return _decode_binary(blob)
    if format == "csv":
        return _decode_csv(path)
    raise ValueError(f"unknown format {format!r}")


def save_feature_bank(bank: FeatureBank, path, format: str = "binary") -> None:
    """Write a feature bank to disk in the binary or csv format.

    Binary save followed by load reproduces the bank bit-exactly. CSV uses
    shortest round-trip float formatting, so values survive the trip too;
    the manifest travels in a ``<path>.manifest.json`` sidecar.
    """
    path = Path(path)
    manifest = replace(bank.manifest, normalization=bank.normalization)
    if format == "binary":
        bank = replace_manifest(bank, manifest)
        header = _HEADER.pack(
            MAGIC,
            FORMAT_VERSION,
            bank.n_samples,
            bank.dim,
            _NORM_TO_CODE[bank.normalization],
            b"\x00\x00\x00",
        )
        payload = np.ascontiguousarray(bank.features, dtype="<f4").tobytes()
        trailer = _encode_trailer(bank)
        try:
            with open(path, "wb") as handle:
                handle.write(header)
                handle.write(payload)
                handle.write(struct.pack("<I", len(trailer)))
                handle.write(trailer)
        except OSError as exc:
            raise IoFailure(f"cannot write {path}: {exc}") from exc
        return
    if format == "csv":
        header_row = ["id"]
        if bank.group_ids is not None:
            header_row.append("group")
        header_row.extend(f"f{i}" for i in range(bank.dim))
        try:
            with open(path, "w", encoding="utf-8", newline="") as handle:
                writer = csv.writer(handle)
                writer.writerow(header_row)
                for r in range(bank.n_samples):
                    row = [bank.sample_ids[r]]
                    if bank.group_ids is not None:
                        row.append(bank.group_ids[r])
                    row.extend(_format_f32(v) for v in bank.features[r])
                    writer.writerow(row)
            meta: dict = {
                "manifest": manifest.to_dict(),
                "normalization": bank.normalization,
            }
            if bank.group_ids is not None:
                meta["groups"] = {
                    sid: gid for sid, gid in zip(bank.sample_ids, bank.group_ids)
                }
            _sidecar_path(path).write_text(
                json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8"
            )
        except OSError as exc:
            raise IoFailure(f"cannot write {path}: {exc}") from exc
        return
    raise ValueError(f"unknown format {format!r}")


def replace_manifest(bank: FeatureBank, manifest: Manifest) -> FeatureBank:
    """Copy of the bank with a different manifest (features are shared)."""
    return FeatureBank(
        features=bank.features,
        sample_ids=bank.sample_ids,
        group_ids=bank.group_ids,
        normalization=bank.normalization,
        manifest=manifest,
    )

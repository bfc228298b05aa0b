"""Trial archive container (``.cmi`` blobs) and dataset manifests.

Blob layout, all integers little-endian::

    offset  size  field
    0       4     magic b"CMI1"
    4       2     version (u16, currently 1)
    6       4     n_trials (u32)
    10      4     n_channels (u32)
    14      4     n_samples (u32)
    18      4     fs in milli-hertz (u32)
    22      8     label_block_offset (u64) == 30 + payload bytes
    30      ...   payload, float32 LE, C order [trial][channel][sample]
    ...     2*n   labels, u16 per trial

The manifest is a JSON document; see docs/format.md.
"""

from __future__ import annotations

import json
import logging
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .model import ConfigError, DataError, DatasetManifest, SubjectEntry, TrialSet, validate_trialset

log = logging.getLogger(__name__)

MAGIC = b"CMI1"
BLOB_VERSION = 1
HEADER = struct.Struct("<4sHIIIIQ")
MANIFEST_FORMAT = "clean-mi-manifest"
MANIFEST_VERSION = 1
BLOB_SUFFIX = ".cmi"
WHITENING_SUFFIX = ".whiten.npy"


class BlobError(DataError):
    """Malformed or inconsistent trial blob."""


class ManifestError(ConfigError):
    """Malformed or inconsistent manifest."""


@dataclass(frozen=True)
class BlobHeader:
    n_trials: int
    n_channels: int
    n_samples: int
    fs_millihz: int
    version: int = BLOB_VERSION

    @property
    def payload_bytes(self) -> int:
        return 4 * self.n_trials * self.n_channels * self.n_samples

    @property
    def label_block_offset(self) -> int:
        return HEADER.size + self.payload_bytes

    @property
    def file_size(self) -> int:
        return self.label_block_offset + 2 * self.n_trials

    @property
    def fs(self) -> float:
        return self.fs_millihz / 1000.0

    def pack(self) -> bytes:
        return HEADER.pack(MAGIC, self.version, self.n_trials, self.n_channels,
                           self.n_samples, self.fs_millihz, self.label_block_offset)


def fs_to_millihz(fs: float) -> int:
    mhz = round(fs * 1000)
    if not 0 < mhz < 2**32 or abs(mhz - fs * 1000) > 1e-6:
        raise ValueError(f"sampling rate {fs} Hz cannot be stored as u32 milli-hertz")
    return mhz


def read_blob_header(path) -> BlobHeader:
    path = Path(path)
    with open(path, "rb") as fh:
        raw = fh.read(HEADER.size)
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise BlobError(f"{path}: bad magic (not a {MAGIC.decode()} blob)")
    if len(raw) < HEADER.size:
        raise BlobError(f"{path}: truncated header")
    _, version, n_trials, n_channels, n_samples, fs_mhz, label_off = HEADER.unpack(raw)
    if version != BLOB_VERSION:
        raise BlobError(f"{path}: unsupported blob version {version}")
    if min(n_trials, n_channels, n_samples, fs_mhz) == 0:
        raise BlobError(f"{path}: header has zero-sized dimension")
    header = BlobHeader(n_trials, n_channels, n_samples, fs_mhz, version)
    if label_off != header.label_block_offset:
        raise BlobError(f"{path}: label block offset {label_off} inconsistent with dimensions")
    size = path.stat().st_size
    if size < header.file_size:
        raise BlobError(f"{path}: truncated payload ({size} bytes, header implies {header.file_size})")
    if size > header.file_size:
        raise BlobError(f"{path}: {size - header.file_size} trailing bytes after label block")
    return header


def read_subject_blob(path, expected: Optional[DatasetManifest] = None, *,
                      subject_id: Optional[str] = None,
                      session_id: Optional[str] = None) -> TrialSet:
    """Load one blob as a :class:`TrialSet` of float32 trials.

    With ``expected`` the channel count and sampling rate are checked
    against the manifest and the channel names taken from it.
    """
    path = Path(path)
    header = read_blob_header(path)
    if expected is not None:
        if header.n_channels != len(expected.channel_names):
            raise BlobError(f"{path}: {header.n_channels} channels, manifest declares "
                            f"{len(expected.channel_names)}")
        if header.fs_millihz != fs_to_millihz(expected.fs):
            raise BlobError(f"{path}: fs {header.fs} Hz, manifest declares {expected.fs} Hz")
        names = tuple(expected.channel_names)
    else:
        names = tuple(f"E{i + 1}" for i in range(header.n_channels))
    with open(path, "rb") as fh:
        fh.seek(HEADER.size)
        payload = np.fromfile(fh, dtype="<f4", count=header.n_trials * header.n_channels * header.n_samples)
        labels = np.fromfile(fh, dtype="<u2", count=header.n_trials)
    data = payload.reshape(header.n_trials, header.n_channels, header.n_samples).astype(np.float32)
    return TrialSet.from_arrays(subject_id or path.name.removesuffix(BLOB_SUFFIX), header.fs, names,
                                data, labels.astype(np.int64), session_id)


def write_subject_blob(ts: TrialSet, path) -> None:
    if ts.n_trials == 0:
        raise ValueError(f"{ts.key}: refusing to write a blob with no trials")
    findings = validate_trialset(ts)
    if findings:
        raise DataError(f"{ts.key}: invalid trial set: {findings[0]}")
    labels = ts.labels
    if labels.max() > 0xFFFF:
        raise DataError(f"{ts.key}: labels must fit in u16")
    header = BlobHeader(ts.n_trials, ts.n_channels, ts.n_samples, fs_to_millihz(ts.fs))
    body = np.ascontiguousarray(ts.data, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(header.pack())
        fh.write(body.tobytes(order="C"))
        fh.write(labels.astype("<u2").tobytes())


def manifest_to_dict(m: DatasetManifest) -> dict:
    return {
        "format": MANIFEST_FORMAT,
        "version": m.format_version,
        "dataset_name": m.dataset_name,
        "fs": m.fs,
        "trial_length_s": m.trial_length_s,
        "channel_names": list(m.channel_names),
        "classes": {str(k): v for k, v in sorted(m.classes.items())},
        "subjects": [
            {"subject_id": s.subject_id, "session_id": s.session_id, "blob": s.blob_path}
            for s in m.subjects
        ],
    }


def write_manifest(m: DatasetManifest, path) -> None:
    Path(path).write_text(json.dumps(manifest_to_dict(m), indent=2) + "\n")


def _require(doc: dict, key: str, kind, path):
    if key not in doc:
        raise ManifestError(f"{path}: missing field {key!r}")
    value = doc[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ManifestError(f"{path}: field {key!r} has wrong type {type(value).__name__}")
    return value


def read_manifest(path, *, check_blobs: bool = True) -> DatasetManifest:
    """Parse and check a manifest; blob paths are resolved against its directory."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, UnicodeDecodeError) as exc:
        raise ManifestError(f"{path}: cannot read manifest: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: malformed manifest: {exc}") from exc
    if not isinstance(doc, dict):
        raise ManifestError(f"{path}: manifest must be a JSON object")
    if doc.get("format", MANIFEST_FORMAT) != MANIFEST_FORMAT:
        raise ManifestError(f"{path}: unknown format {doc.get('format')!r}")
    version = _require(doc, "version", int, path)
    if version != MANIFEST_VERSION:
        raise ManifestError(f"{path}: unsupported manifest version {version}")

    fs = float(_require(doc, "fs", (int, float), path))
    length = float(_require(doc, "trial_length_s", (int, float), path))
    if not fs > 0 or not length > 0:
        raise ManifestError(f"{path}: fs and trial_length_s must be positive")
    channels = _require(doc, "channel_names", list, path)
    if not channels or not all(isinstance(c, str) and c for c in channels):
        raise ManifestError(f"{path}: channel_names must be a non-empty list of names")
    classes_raw = doc.get("classes", {})
    try:
        classes = {int(k): str(v) for k, v in classes_raw.items()}
    except (AttributeError, ValueError):
        raise ManifestError(f"{path}: classes must map integer ids to names") from None

    subjects = []
    for i, entry in enumerate(_require(doc, "subjects", list, path)):
        if not isinstance(entry, dict) or "subject_id" not in entry or "blob" not in entry:
            raise ManifestError(f"{path}: subject entry {i} needs 'subject_id' and 'blob'")
        blob = Path(entry["blob"])
        if not blob.is_absolute():
            blob = path.parent / blob
        session = entry.get("session_id")
        subjects.append(SubjectEntry(str(entry["subject_id"]), str(blob),
                                     None if session is None else str(session)))
    if not subjects:
        raise ManifestError(f"{path}: manifest lists no subjects")
    keys = [(s.subject_id, s.session_id) for s in subjects]
    if len(set(keys)) != len(keys):
        raise ManifestError(f"{path}: duplicate subject/session entries")

    manifest = DatasetManifest(str(doc.get("dataset_name", path.stem)), fs, length,
                               tuple(channels), tuple(subjects), classes, version)
    if check_blobs:
        for s in subjects:
            if not Path(s.blob_path).is_file():
                raise ManifestError(f"{path}: blob for {s.subject_id} not found: {s.blob_path}")
            try:
                header = read_blob_header(s.blob_path)
            except BlobError as exc:
                raise ManifestError(f"{path}: {exc}") from exc
            if header.n_channels != len(channels):
                raise ManifestError(f"{path}: blob {s.blob_path} has {header.n_channels} channels, "
                                    f"manifest declares {len(channels)}")
    return manifest


def load_subject(manifest: DatasetManifest, entry: SubjectEntry) -> TrialSet:
    return read_subject_blob(entry.blob_path, manifest, subject_id=entry.subject_id,
                             session_id=entry.session_id)


def write_whitening(path, whitening) -> None:
    """Store ``[W, R]`` as a float64 ``.npy`` array of shape (2, C, C)."""
    np.save(path, np.stack([whitening.values, whitening.source_cov.values]).astype("<f8"),
            allow_pickle=False)


def read_whitening(path) -> tuple[np.ndarray, np.ndarray]:
    arr = np.load(path, allow_pickle=False)
    return arr[0], arr[1]


@dataclass
class ExportSummary:
    out_dir: str
    blobs: list[str] = field(default_factory=list)
    sidecars: list[str] = field(default_factory=list)
    manifest: Optional[str] = None
    report_files: list[str] = field(default_factory=list)
    n_subjects: int = 0
    n_trials: int = 0
    empty: bool = False


def export_dataset(processed: Sequence[TrialSet], report, out_dir, *,
                   dataset_name: str = "clean-mi",
                   classes: Optional[Mapping[int, str]] = None,
                   whitening: Optional[Mapping[str, object]] = None) -> ExportSummary:
    """Write blobs, whitening sidecars, a fresh manifest and the quality report.

    All trial sets must share sampling rate, channel names and length. An
    empty input writes only the report and sets ``summary.empty``.
    """
    from .report import emit_report

    out = Path(out_dir)
    if processed:
        ref = processed[0]
        for ts in processed:
            if fs_to_millihz(ts.fs) != fs_to_millihz(ref.fs):
                raise DataError(f"{ts.key}: fs {ts.fs} Hz differs from {ref.fs} Hz")
            if ts.channel_names != ref.channel_names:
                raise DataError(f"{ts.key}: channel names differ from {ref.key}")
            if ts.n_samples != ref.n_samples:
                raise DataError(f"{ts.key}: {ts.n_samples} samples, expected {ref.n_samples}")
    keys = [ts.key for ts in processed]
    if len(set(keys)) != len(keys):
        raise DataError("duplicate subject/session keys in export")

    out.mkdir(parents=True, exist_ok=True)
    summary = ExportSummary(str(out))
    entries = []
    for ts in sorted(processed, key=lambda t: (t.subject_id, t.session_id or "")):
        blob = ts.key + BLOB_SUFFIX
        write_subject_blob(ts, out / blob)
        summary.blobs.append(blob)
        entries.append(SubjectEntry(ts.subject_id, blob, ts.session_id))
        summary.n_trials += ts.n_trials
        if whitening and ts.key in whitening:
            sidecar = ts.key + WHITENING_SUFFIX
            write_whitening(out / sidecar, whitening[ts.key])
            summary.sidecars.append(sidecar)
    summary.n_subjects = len({ts.subject_id for ts in processed})

    if processed:
        ref = processed[0]
        manifest = DatasetManifest(dataset_name, ref.fs, ref.n_samples / ref.fs, ref.channel_names,
                                   tuple(entries), dict(classes or {}))
        write_manifest(manifest, out / "manifest.json")
        summary.manifest = "manifest.json"
    else:
        summary.empty = True
        log.warning("no subjects retained; exported report only")
    summary.report_files = [os.path.basename(p) for p in emit_report(report, out)]
    return summary

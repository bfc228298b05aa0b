"""Synthetic two-class motor-imagery subjects with known separability.

Each trial is white Gaussian noise on every channel plus a mu-rhythm
sinusoid on C3 and C4. Imagery of one hand attenuates the rhythm over the
opposite hemisphere: left-hand trials (label 0) damp C4, right-hand trials
(label 1) damp C3. ``snr`` is the sinusoid amplitude relative to the unit
noise standard deviation, so ``snr=0`` gives class-indistinguishable data.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .model import ConfigError, TrialSet

DEFAULT_CHANNELS = (
    "FC3", "FCz", "FC4", "C5", "C3", "C1", "Cz", "C2", "C4", "C6", "CP3", "CPz", "CP4",
)
CLASS_NAMES = {0: "left_hand", 1: "right_hand"}


@dataclass(frozen=True)
class SynthConfig:
    n_trials_per_class: int = 50
    fs: float = 250.0
    duration_s: float = 2.0
    mu_hz: float = 11.0
    erd_depth: float = 0.5
    snr: float = 1.0
    seed: int = 0
    channel_names: tuple[str, ...] = DEFAULT_CHANNELS
    c3_idx: Optional[int] = None
    c4_idx: Optional[int] = None

    @property
    def n_channels(self) -> int:
        return len(self.channel_names)

    @property
    def n_samples(self) -> int:
        return int(round(self.fs * self.duration_s))

    def hemisphere_indices(self) -> tuple[int, int]:
        names = list(self.channel_names)
        c3 = self.c3_idx if self.c3_idx is not None else (names.index("C3") if "C3" in names else 0)
        c4 = self.c4_idx if self.c4_idx is not None else (names.index("C4") if "C4" in names else 1)
        return c3, c4

    def check(self) -> None:
        if self.n_channels < 2:
            raise ConfigError("synthetic subjects need at least 2 channels")
        c3, c4 = self.hemisphere_indices()
        if c3 == c4 or not (0 <= c3 < self.n_channels and 0 <= c4 < self.n_channels):
            raise ConfigError(f"C3/C4 indices ({c3}, {c4}) must be distinct and in range")
        if not 0 < self.mu_hz < self.fs / 2:
            raise ConfigError(f"mu frequency {self.mu_hz} Hz must lie below fs/2")
        if not 0 <= self.erd_depth <= 1:
            raise ConfigError("erd_depth must lie in [0, 1]")
        if self.snr < 0:
            raise ConfigError("snr must be >= 0")
        if self.n_trials_per_class < 1 or self.n_samples < 1:
            raise ConfigError("need at least one trial per class and one sample")


def synth_subject(cfg: SynthConfig, subject_id: str = "S01") -> TrialSet:
    cfg.check()
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_trials_per_class
    labels = rng.permutation(np.repeat([0, 1], n))
    t = np.arange(cfg.n_samples) / cfg.fs
    c3, c4 = cfg.hemisphere_indices()
    keep = 1.0 - cfg.erd_depth

    data = rng.standard_normal((2 * n, cfg.n_channels, cfg.n_samples))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=2 * n)
    for i, (label, phase) in enumerate(zip(labels, phases)):
        rhythm = cfg.snr * np.sin(2.0 * np.pi * cfg.mu_hz * t + phase)
        data[i, c3] += rhythm * (keep if label == 1 else 1.0)
        data[i, c4] += rhythm * (keep if label == 0 else 1.0)
    return TrialSet.from_arrays(subject_id, cfg.fs, cfg.channel_names, data, labels)


def subject_seed(base_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([base_seed, index]).generate_state(1, np.uint64)[0])


def synth_cohort(n_subjects: int, snr_schedule: Sequence[float],
                 base: SynthConfig = SynthConfig()) -> list[TrialSet]:
    """One subject per entry of ``snr_schedule``, ids ``S01``, ``S02``, ..."""
    if len(snr_schedule) != n_subjects:
        raise ConfigError(
            f"snr schedule has {len(snr_schedule)} entries for {n_subjects} subjects")
    return [
        synth_subject(replace(base, snr=float(snr), seed=subject_seed(base.seed, i)), f"S{i + 1:02d}")
        for i, snr in enumerate(snr_schedule)
    ]


def write_cohort(cohort: Sequence[TrialSet], out_dir, dataset_name: str = "synthetic-mi") -> Path:
    """Write blobs and a manifest for ``cohort``; returns the manifest path."""
    from .io import BLOB_SUFFIX, write_manifest, write_subject_blob
    from .model import DatasetManifest, SubjectEntry

    if not cohort:
        raise ConfigError("cannot write an empty cohort")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for ts in cohort:
        blob = ts.key + BLOB_SUFFIX
        write_subject_blob(ts, out / blob)
        entries.append(SubjectEntry(ts.subject_id, blob, ts.session_id))
    ref = cohort[0]
    manifest = DatasetManifest(dataset_name, ref.fs, ref.n_samples / ref.fs, ref.channel_names,
                               tuple(entries), dict(CLASS_NAMES))
    path = out / "manifest.json"
    write_manifest(manifest, path)
    return path

"""Domain types shared across the pipeline.

Trials are stored as ``[channels x samples]`` arrays. A :class:`TrialSet`
groups one subject's (or one session's) trials together with the sampling
rate and channel names. Construction never validates; call
:func:`validate_trialset` to get a list of findings.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np


class CleanMIError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(CleanMIError):
    """Invalid configuration, manifest or template."""


class DataError(CleanMIError):
    """Trial data that cannot be processed."""


@dataclass(frozen=True)
class Trial:
    data: np.ndarray  # [channels x samples]
    label: int

    @property
    def n_channels(self) -> int:
        return self.data.shape[0] if self.data.ndim == 2 else 0

    @property
    def n_samples(self) -> int:
        return self.data.shape[1] if self.data.ndim == 2 else 0


@dataclass(frozen=True)
class TrialSet:
    subject_id: str
    fs: float
    channel_names: tuple[str, ...]
    trials: tuple[Trial, ...]
    session_id: Optional[str] = None

    @classmethod
    def from_arrays(cls, subject_id: str, fs: float, channel_names: Sequence[str],
                    data: np.ndarray, labels: Sequence[int],
                    session_id: Optional[str] = None) -> "TrialSet":
        data = np.asarray(data)
        if data.ndim != 3:
            raise ValueError(f"expected [trials x channels x samples], got shape {data.shape}")
        if len(labels) != data.shape[0]:
            raise ValueError(f"{len(labels)} labels for {data.shape[0]} trials")
        trials = tuple(Trial(data[i], int(lab)) for i, lab in enumerate(labels))
        return cls(subject_id, float(fs), tuple(channel_names), trials, session_id)

    @property
    def n_trials(self) -> int:
        return len(self.trials)

    @property
    def n_channels(self) -> int:
        return len(self.channel_names)

    @property
    def n_samples(self) -> int:
        return self.trials[0].n_samples if self.trials else 0

    @property
    def data(self) -> np.ndarray:
        """Stacked ``[trials x channels x samples]`` view of the trial data."""
        if not self.trials:
            return np.zeros((0, self.n_channels, 0))
        return np.stack([t.data for t in self.trials])

    @property
    def labels(self) -> np.ndarray:
        return np.array([t.label for t in self.trials], dtype=np.int64)

    @property
    def key(self) -> str:
        """Subject id, suffixed with the session id when there is one."""
        return self.subject_id if self.session_id is None else f"{self.subject_id}_{self.session_id}"

    def with_data(self, data: np.ndarray, **changes) -> "TrialSet":
        """Return a copy with trial arrays replaced, labels kept."""
        if len(data) != self.n_trials:
            raise ValueError(f"{len(data)} arrays for {self.n_trials} trials")
        trials = tuple(Trial(np.asarray(x), t.label) for x, t in zip(data, self.trials))
        return replace(self, trials=trials, **changes)

    def subset(self, indices: Sequence[int]) -> "TrialSet":
        return replace(self, trials=tuple(self.trials[i] for i in indices))


@dataclass(frozen=True)
class DatasetManifest:
    dataset_name: str
    fs: float
    trial_length_s: float
    channel_names: tuple[str, ...]
    subjects: tuple["SubjectEntry", ...]
    classes: dict[int, str] = field(default_factory=dict)
    format_version: int = 1


@dataclass(frozen=True)
class SubjectEntry:
    subject_id: str
    blob_path: str
    session_id: Optional[str] = None


@dataclass(frozen=True)
class Band:
    low_hz: float
    high_hz: float

    def check(self, fs: float) -> None:
        if not (0 < self.low_hz < self.high_hz < fs / 2):
            raise ConfigError(
                f"band {self.low_hz}-{self.high_hz} Hz invalid for fs={fs} Hz "
                "(need 0 < low < high < fs/2)")

    @classmethod
    def parse(cls, text: str) -> "Band":
        """Parse ``"LO:HI"``."""
        try:
            lo, hi = (float(v) for v in text.split(":"))
        except ValueError:
            raise ConfigError(f"band must look like LO:HI, got {text!r}") from None
        if not 0 < lo < hi:
            raise ConfigError(f"band must satisfy 0 < LO < HI, got {text!r}")
        return cls(lo, hi)


MU_BETA_BAND = Band(8.0, 30.0)


def validate_trialset(ts: TrialSet, *, for_screening: bool = False) -> list[str]:
    """Return a list of invariant violations; empty when ``ts`` is well formed.

    Never raises on malformed numeric content. With ``for_screening`` the
    two-class requirement is checked as well.
    """
    from .montage import normalize_channel_name

    findings: list[str] = []
    n_ch = len(ts.channel_names)
    if not (isinstance(ts.fs, (int, float)) and np.isfinite(ts.fs) and ts.fs > 0):
        findings.append(f"fs: must be a positive finite rate, got {ts.fs!r}")
    if n_ch == 0:
        findings.append("channel_names: empty")

    seen: dict[str, str] = {}
    for raw in ts.channel_names:
        canon = normalize_channel_name(raw)
        if canon in seen:
            findings.append(f"channel_names: duplicate {raw!r} (same as {seen[canon]!r})")
        else:
            seen[canon] = raw

    ref_samples = None
    for i, trial in enumerate(ts.trials):
        data = np.asarray(trial.data)
        if data.ndim != 2:
            findings.append(f"trial {i}: data must be 2-D [channels x samples], got ndim={data.ndim}")
            continue
        c, s = data.shape
        if c < 1 or s < 1:
            findings.append(f"trial {i}: empty data of shape {data.shape}")
        if c != n_ch:
            findings.append(f"trial {i}: {c} channels, expected {n_ch}")
        if ref_samples is None:
            ref_samples = s
        elif s != ref_samples:
            findings.append(f"trial {i}: inconsistent samples ({s} vs {ref_samples})")
        if not np.issubdtype(data.dtype, np.number):
            findings.append(f"trial {i}: non-numeric dtype {data.dtype}")
        elif not np.all(np.isfinite(data)):
            findings.append(f"trial {i}: non-finite values")
        label = trial.label
        if not isinstance(label, (int, np.integer)) or label < 0:
            findings.append(f"trial {i}: label must be a non-negative integer, got {label!r}")

    if for_screening and len({t.label for t in ts.trials}) < 2:
        findings.append("labels: fewer than 2 distinct classes")
    return findings

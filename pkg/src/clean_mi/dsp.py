"""Band-pass filtering, rational resampling and trial length normalisation.

Filters are Butterworth band-passes realised as second-order sections and
applied forward and backward (zero phase). ``order`` is the order of the
analog low-pass prototype; the band-pass transform doubles it, so the
default ``order=4`` yields four sections.

Resampling is polyphase with a Kaiser-windowed sinc prototype; the rate
ratio is reduced exactly from milli-hertz integers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import signal

from .model import Band, ConfigError, DataError, Trial

ArrayOrTrial = Union[np.ndarray, Trial]

EDGE_MARGIN = 0.01  # minimum relative distance of band edges from 0 and Nyquist
RESAMPLE_CUTOFF = 0.9  # fraction of the lower Nyquist rate
RESAMPLE_TRANSITION = 0.1
RESAMPLE_ATTEN_DB = 65.0  # design target; >= 60 dB is guaranteed beyond the lower Nyquist


@dataclass(frozen=True)
class FilterSpec:
    sos: np.ndarray  # [sections x 6]: b0 b1 b2 a0 a1 a2
    fs: float
    band: Optional[Band] = None
    order: int = 0

    @classmethod
    def identity(cls, fs: float) -> "FilterSpec":
        return cls(np.array([[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]]), float(fs))

    @property
    def pad_samples(self) -> int:
        """Reflection padding used by :func:`filtfilt`.

        Three settle lengths, with one settle length taken as
        ``order / band.low`` seconds.
        """
        if self.band is None or self.order == 0:
            return 0
        return int(math.ceil(3.0 * self.order / self.band.low_hz * self.fs))


def design_bandpass(band: Band, fs: float, order: int = 4) -> FilterSpec:
    """Design a Butterworth band-pass as second-order sections."""
    if order < 2 or order % 2:
        raise ConfigError(f"band-pass order must be an even integer >= 2, got {order}")
    band.check(fs)
    nyq = fs / 2.0
    if band.low_hz < EDGE_MARGIN * nyq or band.high_hz > (1.0 - EDGE_MARGIN) * nyq:
        raise ConfigError(
            f"band {band.low_hz}-{band.high_hz} Hz too close to 0 or Nyquist ({nyq} Hz)")
    sos = signal.butter(order, [band.low_hz, band.high_hz], btype="bandpass",
                        fs=fs, output="sos")
    spec = FilterSpec(np.asarray(sos, dtype=np.float64), float(fs), band, order)
    for sec in spec.sos:
        if np.any(np.abs(np.roots(sec[3:])) >= 1.0):
            raise ConfigError("designed filter is unstable")  # pragma: no cover
    return spec


def frequency_response(spec: FilterSpec, freqs) -> np.ndarray:
    """Complex gain of the section cascade at ``freqs`` (Hz, |f| <= fs/2)."""
    f = np.atleast_1d(np.asarray(freqs, dtype=np.float64))
    if np.any(np.abs(f) > spec.fs / 2 * (1 + 1e-12)):
        raise ValueError("frequencies must lie within [-fs/2, fs/2]")
    zinv = np.exp(-2j * np.pi * f / spec.fs)
    h = np.ones_like(zinv)
    for b0, b1, b2, a0, a1, a2 in spec.sos:
        h *= (b0 + b1 * zinv + b2 * zinv**2) / (a0 + a1 * zinv + a2 * zinv**2)
    return h


def _unwrap(x: ArrayOrTrial) -> np.ndarray:
    return x.data if isinstance(x, Trial) else np.asarray(x)


def _rewrap(x: ArrayOrTrial, data: np.ndarray) -> ArrayOrTrial:
    return Trial(data, x.label) if isinstance(x, Trial) else data


def filtfilt(x: ArrayOrTrial, spec: FilterSpec) -> ArrayOrTrial:
    """Zero-phase filtering along the last axis with odd reflection padding."""
    data = _unwrap(x)
    pad = spec.pad_samples
    if data.shape[-1] <= pad:
        raise DataError(
            f"trial of {data.shape[-1]} samples too short for filtering "
            f"(needs more than {pad} samples of padding)")
    out = signal.sosfiltfilt(spec.sos, data.astype(np.float64, copy=False), axis=-1,
                             padtype="odd" if pad else None, padlen=pad)
    return _rewrap(x, out)


@dataclass(frozen=True)
class ResamplePlan:
    up: int
    down: int
    taps: np.ndarray
    fs_in: float
    fs_out: float

    @property
    def is_identity(self) -> bool:
        return self.up == self.down == 1


def _millihertz(fs: float) -> int:
    if not (fs > 0 and math.isfinite(fs)):
        raise ConfigError(f"sampling rate must be positive, got {fs}")
    mhz = round(fs * 1000)
    if mhz == 0 or abs(mhz - fs * 1000) > 1e-6:
        raise ConfigError(f"sampling rate {fs} Hz is not representable in milli-hertz")
    return mhz


MAX_RATE_FACTOR = 1 << 16


def plan_resample(fs_in: float, fs_out: float) -> ResamplePlan:
    a, b = _millihertz(fs_in), _millihertz(fs_out)
    g = math.gcd(a, b)
    up, down = b // g, a // g
    if up > MAX_RATE_FACTOR or down > MAX_RATE_FACTOR:
        raise ConfigError(f"rate ratio {fs_in}->{fs_out} Hz reduces to {up}/{down}; too large")
    if up == down == 1:
        return ResamplePlan(1, 1, np.ones(1), float(fs_in), float(fs_out))

    fs_up = fs_in * up
    min_nyq = min(fs_in, fs_out) / 2.0
    width = RESAMPLE_TRANSITION * min_nyq
    numtaps, beta = signal.kaiserord(RESAMPLE_ATTEN_DB, width / (fs_up / 2.0))
    numtaps |= 1  # odd length keeps the output centred
    taps = signal.firwin(numtaps, RESAMPLE_CUTOFF * min_nyq, window=("kaiser", beta), fs=fs_up)
    return ResamplePlan(up, down, taps, float(fs_in), float(fs_out))


def resample(x: ArrayOrTrial, plan: ResamplePlan) -> ArrayOrTrial:
    """Resample along the last axis; output length is ``ceil(n * up / down)``."""
    if plan.is_identity:
        return x
    data = _unwrap(x).astype(np.float64, copy=False)
    out = signal.resample_poly(data, plan.up, plan.down, axis=-1, window=plan.taps)
    return _rewrap(x, out)


def fix_length(x: ArrayOrTrial, target_samples: int,
               policy: str = "truncate_tail_pad_tail") -> ArrayOrTrial:
    """Keep the first ``target_samples`` samples, zero-padding at the end if short."""
    if policy != "truncate_tail_pad_tail":
        raise ValueError(f"unknown length policy {policy!r}")
    if target_samples < 1:
        raise ValueError("target_samples must be >= 1")
    data = _unwrap(x)
    n = data.shape[-1]
    if n == target_samples:
        return x
    if n > target_samples:
        out = data[..., :target_samples].copy()
    else:
        out = np.zeros(data.shape[:-1] + (target_samples,), dtype=data.dtype)
        out[..., :n] = data
    return _rewrap(x, out)

"""Within-subject screening with a CSP + shrinkage-LDA reference classifier.

A subject is kept when its mean test accuracy over repeated stratified
splits reaches the threshold. Accuracies computed elsewhere (for example by
a deep network) can be imported instead and thresholded the same way.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from .align import CovMatrix, inv_sqrt_spd
from .model import ConfigError, DataError, TrialSet

LDA_SHRINKAGE = 0.1


@dataclass(frozen=True)
class ScreenConfig:
    threshold: float = 0.6
    train_fraction: float = 0.8
    repeats: int = 10
    n_csp_pairs: int = 3
    seed_base: int = 0
    evaluator: str = "builtin_csp_lda"  # or "external_scores"
    class_pair: Optional[tuple[int, int]] = None

    def check(self) -> None:
        if not 0 < self.threshold < 1:
            raise ConfigError(f"threshold must lie in (0, 1), got {self.threshold}")
        if not 0 < self.train_fraction < 1:
            raise ConfigError(f"train fraction must lie in (0, 1), got {self.train_fraction}")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if self.n_csp_pairs < 1:
            raise ConfigError("n_csp_pairs must be >= 1")
        if self.evaluator not in ("builtin_csp_lda", "external_scores"):
            raise ConfigError(f"unknown evaluator {self.evaluator!r}")


@dataclass(frozen=True)
class SubjectVerdict:
    subject_id: str
    accuracy_mean: float
    accuracy_std: float
    kept: bool
    evaluator_tag: str


@dataclass(frozen=True)
class CspModel:
    filters: np.ndarray  # [2 * n_pairs x channels]
    class_pair: tuple[int, int]
    eigenvalues: np.ndarray


@dataclass(frozen=True)
class LdaModel:
    weights: np.ndarray
    bias: float
    classes: tuple[int, int]  # (negative side, positive side)


def split_seed(seed_base: int, subject_id: str, repeat: int) -> int:
    """Seed keyed by subject and repeat, independent of scheduling order."""
    digest = hashlib.blake2b(f"{subject_id}\x00{repeat}".encode(), digest_size=8).digest()
    return (int(seed_base) ^ int.from_bytes(digest, "little")) & ((1 << 64) - 1)


def split_trials(ts: TrialSet, train_fraction: float, seed: int) -> tuple[TrialSet, TrialSet]:
    """Stratified random split.

    Each class contributes ``round(train_fraction * count)`` trials to the
    training set (half-up rounding), clamped so both sides get at least one.
    """
    labels = ts.labels
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        if idx.size < 2:
            raise DataError(f"{ts.key}: class {cls} has {idx.size} trial(s); need at least 2")
        n_train = int(math.floor(train_fraction * idx.size + 0.5))
        n_train = min(max(n_train, 1), idx.size - 1)
        perm = rng.permutation(idx)
        train_idx.extend(perm[:n_train])
        test_idx.extend(perm[n_train:])
    return ts.subset(sorted(train_idx)), ts.subset(sorted(test_idx))


def _normalized_cov(x: np.ndarray) -> np.ndarray:
    c = x @ x.T
    tr = np.trace(c)
    return c / tr if tr > 0 else c


def csp_fit(train: TrialSet, n_pairs: int = 3, eps_rel: float = 1e-10) -> CspModel:
    """Two-class CSP from trace-normalised trial covariances."""
    labels = train.labels
    classes = tuple(int(c) for c in np.unique(labels))
    if len(classes) != 2:
        raise DataError(f"{train.key}: CSP needs exactly 2 classes, got {len(classes)}")
    if train.n_channels < 2 * n_pairs:
        raise DataError(f"{train.key}: {train.n_channels} channels < 2 x {n_pairs} CSP pairs")
    data = train.data.astype(np.float64, copy=False)
    covs = [np.mean([_normalized_cov(x) for x in data[labels == c]], axis=0) for c in classes]
    composite = covs[0] + covs[1]
    white = inv_sqrt_spd(CovMatrix((composite + composite.T) / 2.0), eps_rel).values
    s1 = white @ covs[0] @ white
    lam, v = np.linalg.eigh((s1 + s1.T) / 2.0)  # ascending
    order = np.concatenate([np.arange(len(lam) - 1, len(lam) - 1 - n_pairs, -1), np.arange(n_pairs)])
    filters = (white @ v[:, order]).T
    # Sign convention: largest-magnitude coefficient positive.
    signs = np.sign(filters[np.arange(len(filters)), np.argmax(np.abs(filters), axis=1)])
    filters = filters * np.where(signs == 0, 1.0, signs)[:, None]
    return CspModel(filters, classes, lam[order])


def csp_features(model: CspModel, ts: TrialSet) -> np.ndarray:
    """Log relative variance of each CSP projection; rows sum to one after ``exp``."""
    k = model.filters.shape[0]
    if ts.n_channels != model.filters.shape[1]:
        raise DataError(f"{ts.key}: {ts.n_channels} channels, CSP model expects {model.filters.shape[1]}")
    feats = np.empty((ts.n_trials, k))
    for i, trial in enumerate(ts.trials):
        var = np.var(model.filters @ trial.data.astype(np.float64, copy=False), axis=1)
        total = var.sum()
        if total > 0 and np.all(var > 0):
            feats[i] = np.log(var / total)
        else:
            feats[i] = np.log(1.0 / k)
    return feats


def lda_fit(features: np.ndarray, labels: np.ndarray, shrinkage: float = LDA_SHRINKAGE) -> LdaModel:
    """Fisher discriminant with pooled covariance shrunk toward a scaled identity."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(labels)
    classes = tuple(int(c) for c in np.unique(y))
    if len(classes) != 2:
        raise DataError(f"LDA needs exactly 2 classes, got {len(classes)}")
    groups = [x[y == c] for c in classes]
    if min(len(g) for g in groups) < 2:
        raise DataError("LDA needs at least 2 samples per class")
    means = [g.mean(axis=0) for g in groups]
    scatter = sum((g - m).T @ (g - m) for g, m in zip(groups, means))
    pooled = scatter / (len(x) - 2)
    d = pooled.shape[0]
    mu = np.trace(pooled) / d
    if not mu > 0:
        raise DataError("pooled LDA covariance is degenerate")
    shrunk = (1.0 - shrinkage) * pooled + shrinkage * mu * np.eye(d)
    w = np.linalg.solve(shrunk, means[1] - means[0])
    b = -float(w @ (means[0] + means[1])) / 2.0
    return LdaModel(w, b, classes)


def lda_predict(model: LdaModel, features: np.ndarray) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    score = x @ model.weights + model.bias
    return np.where(score > 0, model.classes[1], model.classes[0])


def screening_pair(ts: TrialSet, cfg: ScreenConfig,
                   class_order: Optional[list[int]] = None) -> tuple[int, int]:
    """The two classes screened: configured pair, else the first two listed."""
    if cfg.class_pair is not None:
        return cfg.class_pair
    present = set(int(c) for c in np.unique(ts.labels))
    order = [c for c in (class_order or sorted(present)) if c in present]
    if len(order) < 2:
        raise DataError(f"{ts.key}: screening needs 2 classes, found {sorted(present)}")
    return order[0], order[1]


def within_subject_accuracy(ts: TrialSet, cfg: ScreenConfig,
                            class_order: Optional[list[int]] = None) -> tuple[float, float]:
    """Mean and sample std of CSP+LDA test accuracy over ``cfg.repeats`` splits.

    With a single repeat the std is reported as 0.
    """
    pair = screening_pair(ts, cfg, class_order)
    labels = ts.labels
    ts = ts.subset(np.flatnonzero(np.isin(labels, pair)))
    accs = []
    for r in range(cfg.repeats):
        train, test = split_trials(ts, cfg.train_fraction, split_seed(cfg.seed_base, ts.subject_id, r))
        csp = csp_fit(train, cfg.n_csp_pairs)
        lda = lda_fit(csp_features(csp, train), train.labels)
        pred = lda_predict(lda, csp_features(csp, test))
        accs.append(float(np.mean(pred == test.labels)))
    accs = np.array(accs)
    std = float(accs.std(ddof=1)) if len(accs) > 1 else 0.0
    return float(accs.mean()), std


def select_experts(accuracies: Mapping[str, float], threshold: float = 0.6) -> tuple[list[str], list[str]]:
    """Split subjects into (kept, excluded); a subject exactly at the threshold is kept."""
    kept = sorted(s for s, a in accuracies.items() if a >= threshold)
    excluded = sorted(s for s, a in accuracies.items() if a < threshold)
    return kept, excluded


def verdict(subject_id: str, mean: float, std: float, cfg: ScreenConfig, tag: str) -> SubjectVerdict:
    return SubjectVerdict(subject_id, mean, std, mean >= cfg.threshold, tag)


def import_external_scores(path) -> dict[str, float]:
    """Read ``subject_id<TAB>accuracy`` rows; ``#`` comments and blank lines are skipped.

    A first row whose accuracy field is not numeric is treated as a header.
    """
    path = Path(path)
    scores: dict[str, float] = {}
    first_row = True
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.rstrip("\r\n").split("\t")
        if len(fields) != 2 or not fields[0].strip():
            raise ConfigError(f"{path}:{lineno}: expected 'subject_id<TAB>accuracy', got {line!r}")
        sid, raw = fields[0].strip(), fields[1].strip()
        header, first_row = first_row, False
        try:
            acc = float(raw)
        except ValueError:
            if header:
                continue
            raise ConfigError(f"{path}:{lineno}: accuracy {raw!r} is not a number") from None
        if not 0.0 <= acc <= 1.0:
            raise ConfigError(f"{path}:{lineno}: accuracy {acc} for {sid} outside [0, 1]")
        if sid in scores:
            raise ConfigError(f"{path}:{lineno}: duplicate subject id {sid!r}")
        scores[sid] = acc
    return scores

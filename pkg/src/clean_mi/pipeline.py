"""Pipeline orchestration: filter, resample, fix length, template, align, screen.

Subjects are independent units of work. All randomness is keyed by subject
id, so the result does not depend on the number of workers.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Optional

import numpy as np

from . import align, dsp, montage, screen
from .io import load_subject
from .model import (MU_BETA_BAND, Band, CleanMIError, ConfigError, DataError, DatasetManifest,
                    SubjectEntry, TrialSet, validate_trialset)
from .report import QualityReport, SubjectReport

log = logging.getLogger(__name__)

STAGES = ("filter", "resample", "length", "template", "align", "screen")


@dataclass(frozen=True)
class PipelineConfig:
    band: Band = MU_BETA_BAND
    filter_order: int = 4
    target_fs: float = 250.0
    target_samples: Optional[int] = None  # None: round(target_fs * manifest trial length)
    template_name: str = "mi-region-rule"
    missing_policy: Optional[str] = None  # None: the template's default
    screening: screen.ScreenConfig = field(default_factory=screen.ScreenConfig)
    align_scope: str = "per_subject"  # or "per_session"
    disabled: frozenset = frozenset()
    master_seed: int = 0
    eps_rel: float = 1e-10
    on_error: str = "skip"  # or "fail"

    def enabled(self, stage: str) -> bool:
        return stage not in self.disabled

    def check(self) -> None:
        unknown = set(self.disabled) - set(STAGES)
        if unknown:
            raise ConfigError(f"unknown stage(s) {sorted(unknown)}; stages are {', '.join(STAGES)}")
        if self.enabled("resample") and not self.target_fs > 2 * self.band.high_hz:
            raise ConfigError(f"target fs {self.target_fs} Hz must exceed twice the band top "
                              f"({self.band.high_hz} Hz)")
        if self.target_samples is not None and self.target_samples < 1:
            raise ConfigError("target_samples must be >= 1")
        if self.align_scope not in ("per_subject", "per_session"):
            raise ConfigError(f"unknown align scope {self.align_scope!r}")
        if self.on_error not in ("skip", "fail"):
            raise ConfigError(f"unknown error policy {self.on_error!r}")
        if self.missing_policy not in (None, "require_full", "allow_missing"):
            raise ConfigError(f"unknown missing-channel policy {self.missing_policy!r}")
        self.screening.check()

    def echo(self) -> dict:
        d = asdict(self)
        d["disabled"] = sorted(self.disabled)
        d["screening"]["seed_base"] = self.master_seed
        return d


def _group_entries(manifest: DatasetManifest) -> dict[str, list[SubjectEntry]]:
    groups: dict[str, list[SubjectEntry]] = {}
    for entry in manifest.subjects:
        groups.setdefault(entry.subject_id, []).append(entry)
    return groups


def _merge(units: list[TrialSet]) -> TrialSet:
    if len(units) == 1:
        return replace(units[0], session_id=None)
    return replace(units[0], trials=tuple(t for u in units for t in u.trials), session_id=None)


@dataclass
class _Context:
    cfg: PipelineConfig
    manifest: DatasetManifest
    target_samples: int
    template: Optional[montage.ChannelTemplate]
    scores: Optional[Mapping[str, float]]
    class_order: list[int]


def _preprocess(ts: TrialSet, ctx: _Context, rec: SubjectReport) -> TrialSet:
    cfg = ctx.cfg
    if cfg.enabled("filter"):
        spec = dsp.design_bandpass(cfg.band, ts.fs, cfg.filter_order)
        ts = ts.with_data(dsp.filtfilt(ts.data, spec))
    if cfg.enabled("resample"):
        plan = dsp.plan_resample(ts.fs, cfg.target_fs)
        if not plan.is_identity:
            ts = ts.with_data(dsp.resample(ts.data, plan), fs=cfg.target_fs)
    if cfg.enabled("length"):
        ts = ts.with_data(dsp.fix_length(ts.data, ctx.target_samples))
    if cfg.enabled("template"):
        plan = montage.resolve_channels(ts.channel_names, ctx.template)
        rec.selection = plan.summary()
        ts = montage.apply_selection(ts, plan, cfg.missing_policy or ctx.template.default_strictness)
    return ts


def _process_subject(subject_id: str, entries: list[SubjectEntry], ctx: _Context):
    cfg = ctx.cfg
    rec = SubjectReport(subject_id, "kept", sessions=[e.session_id for e in entries])
    units = []
    for entry in entries:
        ts = load_subject(ctx.manifest, entry)
        findings = validate_trialset(ts)
        if findings:
            raise DataError(f"{ts.key}: " + "; ".join(findings[:3]))
        rec.n_trials += ts.n_trials
        rec.fs_in, rec.n_channels_in = ts.fs, ts.n_channels
        units.append(ts)

    units = [_preprocess(ts, ctx, rec) for ts in units]

    whitening = {}
    if cfg.enabled("align"):
        groups = [units] if cfg.align_scope == "per_subject" else [[u] for u in units]
        pre, post, aligned = [], [], []
        for group in groups:
            merged = _merge(group)
            pre.append(align.identity_deviation(align.mean_covariance(merged)))
            w = align.inv_sqrt_spd(align.mean_covariance(merged), cfg.eps_rel)
            group_out = [align.apply_whitening(u, w) for u in group]
            post.append(align.identity_deviation(align.mean_covariance(_merge(group_out))))
            rec.eigenvalue_floor_used |= w.eps_used is not None
            for u in group_out:
                whitening[u.key] = w
            aligned.extend(group_out)
        units = aligned
        rec.pre_ea_identity_dev, rec.post_ea_identity_dev = max(pre), max(post)

    if cfg.enabled("screen"):
        scfg = replace(cfg.screening, seed_base=cfg.master_seed)
        if scfg.evaluator == "external_scores":
            if ctx.scores is None or subject_id not in ctx.scores:
                raise DataError(f"{subject_id}: no external accuracy supplied")
            mean, std, tag = float(ctx.scores[subject_id]), 0.0, "external_scores"
        else:
            merged = _merge(units)
            findings = validate_trialset(merged, for_screening=True)
            if findings:
                raise DataError(f"{subject_id}: " + "; ".join(findings[:3]))
            mean, std = screen.within_subject_accuracy(merged, scfg, ctx.class_order)
            tag = "builtin_csp_lda"
        v = screen.verdict(subject_id, mean, std, scfg, tag)
        rec.accuracy_mean, rec.accuracy_std, rec.evaluator = v.accuracy_mean, v.accuracy_std, tag
        rec.status = "kept" if v.kept else "excluded"
    return units, rec, whitening


def _stage_record(cfg: PipelineConfig, ctx: _Context) -> dict:
    params = {
        "filter": {"family": "butterworth", "order": cfg.filter_order, "zero_phase": True,
                   "band_hz": [cfg.band.low_hz, cfg.band.high_hz]},
        "resample": {"target_fs": cfg.target_fs, "method": "polyphase_kaiser_sinc"},
        "length": {"target_samples": ctx.target_samples, "policy": "truncate_tail_pad_tail"},
        "template": {"name": ctx.template.name if ctx.template else cfg.template_name,
                     "mode": ctx.template.selection_mode if ctx.template else None,
                     "missing_policy": cfg.missing_policy or (ctx.template.default_strictness
                                                              if ctx.template else None)},
        "align": {"method": "euclidean", "scope": cfg.align_scope, "eps_rel": cfg.eps_rel},
        "screen": {"evaluator": cfg.screening.evaluator, "threshold": cfg.screening.threshold,
                   "train_fraction": cfg.screening.train_fraction, "repeats": cfg.screening.repeats,
                   "n_csp_pairs": cfg.screening.n_csp_pairs},
    }
    return {s: {"status": "enabled" if cfg.enabled(s) else "skipped", **params[s]} for s in STAGES}


def run_pipeline(cfg: PipelineConfig, manifest: DatasetManifest, *, workers: int = 1,
                 scores: Optional[Mapping[str, float]] = None) -> tuple[list[TrialSet], QualityReport]:
    """Run every enabled stage for each subject in ``manifest``.

    Excluded and failed subjects are absent from the returned trial sets but
    described in the report. With ``cfg.on_error == "fail"`` the first
    subject error is re-raised.
    """
    cfg.check()
    if cfg.screening.evaluator == "external_scores" and cfg.enabled("screen") and scores is None:
        raise ConfigError("external_scores evaluator needs a scores mapping")
    target = cfg.target_samples
    if target is None:
        fs = cfg.target_fs if cfg.enabled("resample") else manifest.fs
        target = int(round(fs * manifest.trial_length_s))
    template = montage.resolve_template(cfg.template_name) if cfg.enabled("template") else None
    class_order = list(manifest.classes) or None
    ctx = _Context(cfg, manifest, target, template, scores, class_order)

    groups = _group_entries(manifest)

    def work(item):
        sid, entries = item
        try:
            return _process_subject(sid, entries, ctx)
        except (CleanMIError, OSError, ValueError, np.linalg.LinAlgError) as exc:
            if cfg.on_error == "fail":
                raise
            log.warning("subject %s failed: %s", sid, exc)
            rec = SubjectReport(sid, "error", sessions=[e.session_id for e in entries], error=str(exc))
            return [], rec, {}

    items = sorted(groups.items())
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, items))
    else:
        results = [work(item) for item in items]

    retained: list[TrialSet] = []
    records, whitening = [], {}
    for units, rec, w in results:
        records.append(rec)
        if rec.kept:
            retained.extend(units)
            whitening.update(w)

    totals = {
        "subjects_in": len(records),
        "subjects_kept": sum(r.status == "kept" for r in records),
        "subjects_excluded": sum(r.status == "excluded" for r in records),
        "subjects_failed": sum(r.status == "error" for r in records),
        "trials_retained": sum(ts.n_trials for ts in retained),
        "final_shape": _final_shape(retained),
        "fs": retained[0].fs if retained else None,
    }
    report = QualityReport(manifest.dataset_name, cfg.echo(), _stage_record(cfg, ctx), records, totals,
                           whitening=whitening)
    return retained, report


def _final_shape(retained: list[TrialSet]):
    if not retained:
        return None
    shapes = {(ts.n_channels, ts.n_samples) for ts in retained}
    if len(shapes) != 1:
        return None
    c, s = shapes.pop()
    return [sum(ts.n_trials for ts in retained), c, s]

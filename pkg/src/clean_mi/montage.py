"""10-20 electrode naming, MI channel templates and channel selection."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .model import ConfigError, DataError, TrialSet

# Letter prefixes of the 10-20 / 10-10 / 10-5 systems, keyed by upper case.
_PREFIXES = {
    p.upper(): p for p in (
        "Fp", "AF", "F", "FT", "FC", "T", "TP", "C", "CP", "P", "PO", "O", "I",
        "AFp", "AFF", "FFT", "FFC", "FTT", "FCC", "TTP", "CCP", "TPP", "CPP",
        "PPO", "POO", "OI", "N", "A", "M",
    )
}
LEGACY_SYNONYMS = {"T3": "T7", "T4": "T8", "T5": "P7", "T6": "P8"}

_NAME_RE = re.compile(r"^([A-Za-z]+?)(z|Z|\d+[hH]?)$")
_DECORATION_RE = re.compile(r"^(EEG[\s:_-]+)|([\s_-]+(REF|LE|AR|AVG)$)", re.IGNORECASE)

MI_REGION_PREFIXES = ("FC", "FT", "C", "CP", "TP", "T", "P")


def _split(raw: str) -> Optional[tuple[str, str]]:
    name = _DECORATION_RE.sub("", raw.strip())
    m = _NAME_RE.match(name)
    if m is None:
        return None
    letters, suffix = m.groups()
    prefix = _PREFIXES.get(letters.upper())
    if prefix is None:
        return None
    return prefix, suffix.lower()


def normalize_channel_name(raw: str) -> str:
    """Canonical capitalisation of an electrode name (``FCZ`` -> ``FCz``).

    Legacy temporal names are mapped to their modern equivalents
    (T3/T4/T5/T6 -> T7/T8/P7/P8). Names that are not recognised are returned
    stripped but otherwise unchanged; use :func:`is_canonical` to detect them.
    """
    if not raw or not raw.strip():
        raise ValueError("empty channel name")
    parts = _split(raw)
    if parts is None:
        return raw.strip()
    name = "".join(parts)
    return LEGACY_SYNONYMS.get(name, name)


def is_canonical(raw: str) -> bool:
    """True when ``raw`` is a recognised electrode name (in any spelling)."""
    return bool(raw and raw.strip()) and _split(raw) is not None


def region_prefix(name: str) -> Optional[str]:
    parts = _split(name)
    return None if parts is None else parts[0]


@dataclass(frozen=True)
class ChannelTemplate:
    name: str
    channels: tuple[str, ...]
    selection_mode: str = "exact_list"  # or "region_rule"
    region_prefixes: tuple[str, ...] = ()
    note: str = ""

    def __post_init__(self):
        if self.selection_mode not in ("exact_list", "region_rule"):
            raise ConfigError(f"unknown selection mode {self.selection_mode!r}")
        if self.selection_mode == "exact_list":
            if not self.channels:
                raise ConfigError(f"template {self.name!r} has no channels")
            if len(set(self.channels)) != len(self.channels):
                raise ConfigError(f"template {self.name!r} has duplicate channels")
        elif not self.region_prefixes:
            raise ConfigError(f"region template {self.name!r} has no prefixes")

    @property
    def default_strictness(self) -> str:
        return "require_full" if self.selection_mode == "exact_list" else "allow_missing"


_CENTRAL_STRIP = (
    "FT7", "FC5", "FC3", "FC1", "FCz", "FC2", "FC4", "FC6", "FT8",
    "T7", "C5", "C3", "C1", "Cz", "C2", "C4", "C6", "T8",
    "TP7", "CP5", "CP3", "CP1", "CPz", "CP2", "CP4", "CP6", "TP8",
)
_PARIETAL_ROW = ("P7", "P5", "P3", "P1", "Pz", "P2", "P4", "P6", "P8")

BUILTIN_TEMPLATES = {
    "mi-weibo2014": ChannelTemplate(
        "mi-weibo2014", _CENTRAL_STRIP + _PARIETAL_ROW,
        note="Published as a 35-channel selection but the printed list has 36 "
             "names; shipped as printed."),
    "mi-cho2017": ChannelTemplate(
        "mi-cho2017", _CENTRAL_STRIP + ("P9",) + _PARIETAL_ROW + ("P10",)),
    "mi-region-rule": ChannelTemplate(
        "mi-region-rule", (), selection_mode="region_rule",
        region_prefixes=MI_REGION_PREFIXES,
        note="Includes P although the sensorimotor rationale only names "
             "FC/C/CP/T; the published channel lists contain parietal sites."),
}


def builtin_template(name: str) -> ChannelTemplate:
    try:
        return BUILTIN_TEMPLATES[name]
    except KeyError:
        raise ConfigError(
            f"unknown template {name!r}; choose from {sorted(BUILTIN_TEMPLATES)}") from None


def load_template(path) -> ChannelTemplate:
    """Read a template file (format described in docs/format.md)."""
    path = Path(path)
    name = path.stem
    mode = "exact_list"
    prefixes: list[str] = []
    channels: list[str] = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition(":")
        key = key.strip().lower()
        if sep and key in ("name", "mode", "prefixes"):
            value = value.strip()
            if key == "name":
                name = value
            elif key == "mode":
                mode = value
            else:
                prefixes.extend(p for p in re.split(r"[,\s]+", value) if p)
            continue
        for tok in re.split(r"[,\s]+", line):
            if not tok:
                continue
            if not is_canonical(tok):
                raise ConfigError(f"{path}:{lineno}: unrecognised electrode {tok!r}")
            channels.append(normalize_channel_name(tok))
    return ChannelTemplate(name, tuple(channels), mode, tuple(prefixes))


def resolve_template(spec: str) -> ChannelTemplate:
    """Built-in template name, or a path to a template file."""
    if spec in BUILTIN_TEMPLATES:
        return BUILTIN_TEMPLATES[spec]
    if Path(spec).is_file():
        return load_template(spec)
    return builtin_template(spec)


@dataclass(frozen=True)
class SelectionPlan:
    template_name: str
    source_indices: tuple[int, ...]
    matched: tuple[tuple[str, str], ...]  # (template name, source name)
    missing: tuple[str, ...] = ()
    dropped: tuple[str, ...] = ()

    @property
    def channel_names(self) -> tuple[str, ...]:
        return tuple(t for t, _ in self.matched)

    def summary(self) -> dict:
        return {
            "template": self.template_name,
            "matched": len(self.matched),
            "missing": list(self.missing),
            "dropped": list(self.dropped),
        }


def resolve_channels(source_names: Sequence[str], template: ChannelTemplate) -> SelectionPlan:
    """Match source channels against a template.

    Exact-list templates are matched by canonical name in template order.
    Region-rule templates keep source channels whose region prefix is in the
    rule, in source order.
    """
    canon = [normalize_channel_name(n) for n in source_names]
    if template.selection_mode == "region_rule":
        keep = set(template.region_prefixes)
        wanted = list(dict.fromkeys(c for c in canon if region_prefix(c) in keep))
    else:
        wanted = list(template.channels)

    index = {}
    for i, c in enumerate(canon):
        index.setdefault(c, i)
    indices, matched, missing = [], [], []
    for name in wanted:
        i = index.get(name)
        if i is None:
            missing.append(name)
        else:
            indices.append(i)
            matched.append((name, source_names[i]))
    used = set(indices)
    dropped = tuple(source_names[i] for i in range(len(source_names)) if i not in used)
    return SelectionPlan(template.name, tuple(indices), tuple(matched), tuple(missing), dropped)


def apply_selection(ts: TrialSet, plan: SelectionPlan, strictness: str = "require_full") -> TrialSet:
    """Subset and reorder the channels of every trial according to ``plan``."""
    if strictness not in ("require_full", "allow_missing"):
        raise ValueError(f"unknown strictness {strictness!r}")
    if strictness == "require_full" and plan.missing:
        raise DataError(
            f"{ts.key}: template {plan.template_name!r} channels missing: {', '.join(plan.missing)}")
    idx = np.asarray(plan.source_indices, dtype=np.intp)
    if idx.size == 0:
        raise DataError(f"{ts.key}: no channels matched template {plan.template_name!r}")
    if idx.max() >= ts.n_channels or len(set(plan.source_indices)) != idx.size:
        raise ValueError("selection plan indices invalid for this trial set")
    return ts.with_data([t.data[idx] for t in ts.trials], channel_names=plan.channel_names)

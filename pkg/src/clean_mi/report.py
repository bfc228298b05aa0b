"""Quality report: per-subject outcomes, JSON/CSV emission and figures."""

from __future__ import annotations

import csv
import io as _io
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

log = logging.getLogger(__name__)

REPORT_JSON = "quality_report.json"
REPORT_CSV = "quality_report.csv"
CSV_COLUMNS = (
    "subject_id", "accuracy_mean", "accuracy_std", "kept",
    "channels_matched", "channels_missing", "preEA_identity_dev", "postEA_identity_dev",
)
REPORT_VERSION = 1


@dataclass
class SubjectReport:
    subject_id: str
    status: str  # kept | excluded | error
    sessions: list = field(default_factory=list)
    n_trials: int = 0
    fs_in: Optional[float] = None
    n_channels_in: Optional[int] = None
    accuracy_mean: Optional[float] = None
    accuracy_std: Optional[float] = None
    evaluator: Optional[str] = None
    selection: Optional[dict] = None
    pre_ea_identity_dev: Optional[float] = None
    post_ea_identity_dev: Optional[float] = None
    eigenvalue_floor_used: bool = False
    error: Optional[str] = None

    @property
    def kept(self) -> bool:
        return self.status == "kept"


@dataclass
class QualityReport:
    dataset_name: str
    config: dict
    stages: dict
    subjects: list[SubjectReport]
    totals: dict = field(default_factory=dict)
    version: int = REPORT_VERSION
    # In-memory whitening matrices keyed by trial-set key; written as sidecars on export.
    whitening: dict = field(default_factory=dict, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "dataset_name": self.dataset_name,
            "config": self.config,
            "stages": self.stages,
            "totals": self.totals,
            "subjects": [asdict(s) for s in self.subjects],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "QualityReport":
        subjects = [SubjectReport(**s) for s in doc.get("subjects", [])]
        return cls(doc.get("dataset_name", ""), doc.get("config", {}), doc.get("stages", {}),
                   subjects, doc.get("totals", {}), doc.get("version", REPORT_VERSION))

    @classmethod
    def load(cls, path) -> "QualityReport":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def verdicts(self) -> dict[str, float]:
        return {s.subject_id: s.accuracy_mean for s in self.subjects if s.accuracy_mean is not None}


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "nan" if math.isnan(value) else format(value, ".10g")
    return str(value)


def report_csv(report: QualityReport) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for s in report.subjects:
        sel = s.selection or {}
        writer.writerow([
            s.subject_id, _fmt(s.accuracy_mean), _fmt(s.accuracy_std), _fmt(s.kept),
            _fmt(sel.get("matched")), _fmt(len(sel["missing"]) if "missing" in sel else None),
            _fmt(s.pre_ea_identity_dev), _fmt(s.post_ea_identity_dev),
        ])
    return buf.getvalue()


def emit_report(report: QualityReport, out_dir) -> list[Path]:
    """Write ``quality_report.json`` and ``quality_report.csv``; return their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not report.subjects:
        log.warning("quality report has no subjects; CSV will contain only the header")
    json_path, csv_path = out / REPORT_JSON, out / REPORT_CSV
    json_path.write_text(json.dumps(report.to_dict(), indent=2, allow_nan=False) + "\n")
    csv_path.write_text(report_csv(report))
    return [json_path, csv_path]


# --- figures -----------------------------------------------------------------

KEPT_COLOR = "#2b6cb0"
EXCLUDED_COLOR = "#c53030"
ERROR_COLOR = "#a0aec0"

_STYLE = {
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "svg.hashsalt": "clean-mi",
}


def _figure(n_subjects: int):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    width = min(max(4.0, 0.35 * n_subjects + 1.5), 16.0)
    return plt.subplots(figsize=(width, 3.2))


def _save(fig, path: Path) -> Path:
    import matplotlib.pyplot as plt

    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def render_figures(report: QualityReport, out_dir) -> list[Path]:
    """Render screening, alignment and channel-selection summaries as PNG files."""
    import matplotlib

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    subjects = report.subjects
    ids = [s.subject_id for s in subjects]
    x = list(range(len(subjects)))
    paths = []

    with matplotlib.rc_context(_STYLE):
        fig, ax = _figure(len(subjects))
        colors = [KEPT_COLOR if s.kept else EXCLUDED_COLOR if s.status == "excluded" else ERROR_COLOR
                  for s in subjects]
        acc = [s.accuracy_mean if s.accuracy_mean is not None else 0.0 for s in subjects]
        err = [s.accuracy_std or 0.0 for s in subjects]
        ax.bar(x, acc, yerr=err, color=colors, capsize=2, linewidth=0)
        threshold = report.config.get("screening", {}).get("threshold")
        if threshold is not None:
            ax.axhline(threshold, color="k", linestyle="--", linewidth=0.8, label=f"threshold {threshold:g}")
            ax.legend(loc="lower right")
        ax.set_ylim(0, 1.05)
        ax.set_ylabel("within-subject accuracy")
        ax.set_title("Subject screening")
        ax.set_xticks(x, ids, rotation=90 if len(ids) > 12 else 0)
        paths.append(_save(fig, out / "screening_accuracy.png"))

        fig, ax = _figure(len(subjects))
        pre = [s.pre_ea_identity_dev for s in subjects]
        post = [s.post_ea_identity_dev for s in subjects]
        if any(v is not None for v in pre + post):
            floor = 1e-18
            w = 0.4
            ax.bar([i - w / 2 for i in x], [max(v or floor, floor) for v in pre], w, label="before", color="#718096")
            ax.bar([i + w / 2 for i in x], [max(v or floor, floor) for v in post], w, label="after", color=KEPT_COLOR)
            ax.set_yscale("log")
            ax.legend(loc="upper right")
        ax.set_ylabel(r"$\|\bar R - I\|_F$")
        ax.set_title("Mean covariance distance from identity")
        ax.set_xticks(x, ids, rotation=90 if len(ids) > 12 else 0)
        paths.append(_save(fig, out / "alignment_identity.png"))

        fig, ax = _figure(len(subjects))
        matched = [(s.selection or {}).get("matched", 0) for s in subjects]
        missing = [len((s.selection or {}).get("missing", [])) for s in subjects]
        dropped = [len((s.selection or {}).get("dropped", [])) for s in subjects]
        ax.bar(x, matched, label="matched", color=KEPT_COLOR)
        ax.bar(x, missing, bottom=matched, label="missing", color=EXCLUDED_COLOR)
        ax.bar(x, dropped, bottom=[m + n for m, n in zip(matched, missing)], label="dropped", color=ERROR_COLOR)
        ax.set_ylabel("channels")
        ax.set_title("Channel template selection")
        ax.set_xticks(x, ids, rotation=90 if len(ids) > 12 else 0)
        ax.legend(loc="upper right")
        paths.append(_save(fig, out / "channel_selection.png"))
    return paths

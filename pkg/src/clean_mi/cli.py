"""Command line interface: ``clean-mi inspect|synth|run|screen|report``.

Tables go to stdout, tab-delimited. Exit codes: 0 success, 1 configuration
or manifest error, 2 data error under ``--on-error fail``, 3 no subject
retained.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from collections import Counter
from pathlib import Path

from . import __version__
from .io import export_dataset, load_subject, read_manifest
from .model import Band, ConfigError, DataError, validate_trialset
from .pipeline import STAGES, PipelineConfig, run_pipeline
from .report import QualityReport, emit_report, render_figures
from .screen import ScreenConfig, import_external_scores
from .synth import SynthConfig, synth_cohort, write_cohort

log = logging.getLogger("clean_mi")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_EMPTY = 0, 1, 2, 3
WORKERS_ENV = "CLEAN_MI_WORKERS"


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_pipeline_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", required=True, help="dataset manifest (JSON)")
    p.add_argument("--band", default="8:30", help="band-pass edges LO:HI in Hz (default 8:30)")
    p.add_argument("--fs", type=float, default=250.0, help="target sampling rate in Hz")
    p.add_argument("--samples", type=int, help="samples per trial (default: fs x trial length)")
    p.add_argument("--template", default="mi-region-rule",
                   help="built-in template name or template file")
    p.add_argument("--threshold", type=float, default=0.6)
    p.add_argument("--train-frac", type=float, default=0.8)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--csp-pairs", type=int, default=3)
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--scores", help="external accuracies (subject_id<TAB>accuracy)")
    p.add_argument("--align-scope", choices=("per_subject", "per_session"), default="per_subject")
    p.add_argument("--disable", default="", metavar="STAGE[,STAGE...]",
                   help=f"stages to skip: {','.join(STAGES)}")
    p.add_argument("--on-error", choices=("skip", "fail"), default="skip")
    p.add_argument("--workers", type=int, default=_default_workers(),
                   help=f"worker threads (default ${WORKERS_ENV} or 1)")


def _config(args) -> PipelineConfig:
    disabled = frozenset(s.strip() for s in args.disable.split(",") if s.strip())
    screening = ScreenConfig(threshold=args.threshold, train_fraction=args.train_frac,
                             repeats=args.repeats, n_csp_pairs=args.csp_pairs,
                             seed_base=args.seed,
                             evaluator="external_scores" if args.scores else "builtin_csp_lda")
    cfg = PipelineConfig(band=Band.parse(args.band), target_fs=args.fs, target_samples=args.samples,
                         template_name=args.template, screening=screening,
                         align_scope=args.align_scope, disabled=disabled, master_seed=args.seed,
                         on_error="fail" if args.on_error == "fail" else "skip")
    cfg.check()
    return cfg


def _print_rows(header, rows, out=None) -> None:
    out = out or sys.stdout
    print("\t".join(header), file=out)
    for row in rows:
        print("\t".join("" if v is None else str(v) for v in row), file=out)


def _fmt(v, digits=4):
    return None if v is None else f"{v:.{digits}f}"


def _verdict_rows(report: QualityReport):
    for s in report.subjects:
        yield (s.subject_id, s.status, _fmt(s.accuracy_mean), _fmt(s.accuracy_std),
               s.evaluator, (s.selection or {}).get("matched"),
               None if s.post_ea_identity_dev is None else f"{s.post_ea_identity_dev:.3e}",
               s.error)


VERDICT_HEADER = ("subject_id", "status", "accuracy_mean", "accuracy_std", "evaluator",
                  "channels_matched", "postEA_identity_dev", "error")


def cmd_inspect(args) -> int:
    manifest = read_manifest(args.manifest)
    print(f"# dataset\t{manifest.dataset_name}")
    print(f"# fs_hz\t{manifest.fs:g}")
    print(f"# trial_length_s\t{manifest.trial_length_s:g}")
    print(f"# channels\t{len(manifest.channel_names)}\t{','.join(manifest.channel_names)}")
    print(f"# classes\t" + ",".join(f"{k}={v}" for k, v in manifest.classes.items()))
    rows = []
    for entry in manifest.subjects:
        ts = load_subject(manifest, entry)
        counts = Counter(int(l) for l in ts.labels)
        findings = validate_trialset(ts)
        rows.append((entry.subject_id, entry.session_id or "", ts.n_trials, ts.n_channels, ts.n_samples,
                     f"{ts.fs:g}", ",".join(f"{k}:{counts[k]}" for k in sorted(counts)),
                     len(findings), "; ".join(findings[:3])))
    _print_rows(("subject_id", "session_id", "trials", "channels", "samples", "fs", "labels",
                 "findings", "details"), rows)
    return EXIT_OK


def cmd_synth(args) -> int:
    snrs = args.snr
    n = args.subjects if args.subjects is not None else len(snrs)
    if len(snrs) == 1 and n > 1:
        snrs = snrs * n
    base = SynthConfig(n_trials_per_class=args.trials_per_class, fs=args.sfreq,
                       duration_s=args.duration, mu_hz=args.mu, erd_depth=args.erd_depth,
                       seed=args.seed)
    cohort = synth_cohort(n, snrs, base)
    path = write_cohort(cohort, args.out, args.name)
    _print_rows(("subject_id", "snr", "trials", "channels", "samples", "blob"),
                [(ts.subject_id, f"{snr:g}", ts.n_trials, ts.n_channels, ts.n_samples, f"{ts.key}.cmi")
                 for ts, snr in zip(cohort, snrs)])
    print(f"# manifest\t{path}")
    return EXIT_OK


def _run_common(args):
    cfg = _config(args)
    manifest = read_manifest(args.manifest)
    scores = import_external_scores(args.scores) if args.scores else None
    return manifest, run_pipeline(cfg, manifest, workers=max(1, args.workers), scores=scores)


def cmd_run(args) -> int:
    manifest, (retained, report) = _run_common(args)
    summary = export_dataset(retained, report, args.out, dataset_name=manifest.dataset_name,
                             classes=manifest.classes, whitening=report.whitening)
    if args.figures:
        render_figures(report, args.out)
    _print_rows(VERDICT_HEADER, _verdict_rows(report))
    t = report.totals
    print(f"# retained\t{t['subjects_kept']}/{t['subjects_in']} subjects\t{t['trials_retained']} trials"
          f"\tshape={t['final_shape']}")
    print(f"# output\t{summary.out_dir}")
    return EXIT_EMPTY if summary.empty else EXIT_OK


def cmd_screen(args) -> int:
    _, (retained, report) = _run_common(args)
    if args.out:
        emit_report(report, args.out)
    _print_rows(VERDICT_HEADER, _verdict_rows(report))
    return EXIT_OK if retained else EXIT_EMPTY


def cmd_report(args) -> int:
    report = QualityReport.load(args.report)
    out = args.out or str(Path(args.report).parent)
    paths = emit_report(report, out)
    paths += render_figures(report, out)
    _print_rows(VERDICT_HEADER, _verdict_rows(report))
    for p in paths:
        print(f"# wrote\t{p}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clean-mi", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="summarise a manifest and validate its blobs")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("synth", help="write a synthetic two-class cohort")
    p.add_argument("--out", required=True)
    p.add_argument("--subjects", type=int)
    p.add_argument("--snr", type=_floats, default=[0.0, 0.3, 0.6, 1.0, 2.0],
                   help="comma-separated SNR per subject (default 0,0.3,0.6,1,2)")
    p.add_argument("--trials-per-class", type=int, default=50)
    p.add_argument("--sfreq", type=float, default=250.0, help="sampling rate of the cohort")
    p.add_argument("--duration", type=float, default=2.0, help="trial length in seconds")
    p.add_argument("--mu", type=float, default=11.0, help="mu rhythm frequency in Hz")
    p.add_argument("--erd-depth", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", default="synthetic-mi", help="dataset name")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="run the pipeline and export the cleaned corpus")
    _add_pipeline_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--figures", action="store_true", help="also render report figures")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("screen", help="run the pipeline and print screening verdicts only")
    _add_pipeline_args(p)
    p.add_argument("--out", help="write the quality report here")
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("report", help="re-emit a quality report as CSV and figures")
    p.add_argument("--report", required=True, help="quality_report.json")
    p.add_argument("--out", help="output directory (default: next to the report)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

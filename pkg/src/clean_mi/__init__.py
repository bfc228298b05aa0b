"""Build standardised, quality-screened motor-imagery EEG corpora."""

from .align import euclidean_align, inv_sqrt_spd, mean_covariance
from .dsp import design_bandpass, filtfilt, fix_length, plan_resample, resample
from .io import export_dataset, read_manifest, read_subject_blob, write_subject_blob
from .model import Band, DatasetManifest, Trial, TrialSet, validate_trialset
from .montage import builtin_template, normalize_channel_name, resolve_channels
from .pipeline import PipelineConfig, run_pipeline
from .screen import ScreenConfig, select_experts, within_subject_accuracy

__version__ = "0.1.0"

__all__ = [
    "Band", "DatasetManifest", "PipelineConfig", "ScreenConfig", "Trial", "TrialSet",
    "builtin_template", "design_bandpass", "euclidean_align", "export_dataset", "filtfilt", "fix_length",
    "inv_sqrt_spd", "mean_covariance", "normalize_channel_name", "plan_resample", "read_manifest",
    "read_subject_blob", "resample", "resolve_channels", "run_pipeline", "select_experts",
    "validate_trialset", "within_subject_accuracy", "write_subject_blob",
]

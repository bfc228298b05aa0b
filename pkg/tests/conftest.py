import numpy as np
import pytest

from clean_mi.model import TrialSet

# Standard 64-channel Biosemi 10-10 layout (Cho2017 recordings).
BIOSEMI64 = (
    "Fp1 AF7 AF3 F1 F3 F5 F7 FT7 FC5 FC3 FC1 C1 C3 C5 T7 TP7 CP5 CP3 CP1 P1 P3 P5 P7 P9 "
    "PO7 PO3 O1 Iz Oz POz Pz CPz Fpz Fp2 AF8 AF4 AFz Fz F2 F4 F6 F8 FT8 FC6 FC4 FC2 FCz "
    "Cz C2 C4 C6 T8 TP8 CP6 CP4 CP2 P2 P4 P6 P8 P10 PO8 PO4 O2"
).split()

# BNCI2015001 montage: 13 sensorimotor electrodes.
BNCI2015001 = ("FC3", "FCz", "FC4", "C5", "C3", "C1", "Cz", "C2", "C4", "C6", "CP3", "CPz", "CP4")


def make_trialset(n=6, c=4, t=64, fs=250.0, seed=0, subject_id="S01", names=None, dtype=np.float64):
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((n, c, t)).astype(dtype)
    labels = np.arange(n) % 2
    names = names or [f"C{i + 1}" for i in range(c)]
    return TrialSet.from_arrays(subject_id, fs, names, data, labels)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_LINES = []


def record_criterion(name, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" :: {detail}" if detail else "")
    _LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)

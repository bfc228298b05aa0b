import numpy as np
import pytest

from clean_mi.model import Band, ConfigError, Trial, TrialSet, validate_trialset

from conftest import make_trialset


def test_well_formed_has_no_findings():
    assert validate_trialset(make_trialset(n=8, c=3, t=50), for_screening=True) == []


def test_nan_reported_once():
    ts = make_trialset(n=4, c=3, t=20)
    data = ts.data.copy()
    data[2, 1, 5] = np.nan
    findings = validate_trialset(ts.with_data(data))
    assert len(findings) == 1 and "trial 2" in findings[0] and "non-finite" in findings[0]


def test_inconsistent_samples():
    trials = (Trial(np.zeros((2, 100)), 0), Trial(np.zeros((2, 101)), 1))
    findings = validate_trialset(TrialSet("S1", 250.0, ("C3", "C4"), trials))
    assert any("inconsistent samples" in f for f in findings)


def test_duplicate_after_normalisation():
    trials = (Trial(np.zeros((2, 10)), 0),)
    findings = validate_trialset(TrialSet("S1", 250.0, ("FCz", "FCZ"), trials))
    assert len(findings) == 1 and "duplicate" in findings[0]


def test_channel_count_and_label():
    trials = (Trial(np.zeros((3, 10)), 0), Trial(np.zeros((2, 10)), -1))
    findings = validate_trialset(TrialSet("S1", 250.0, ("C3", "C4"), trials))
    assert any("3 channels" in f for f in findings)
    assert any("label" in f for f in findings)


def test_bad_fs_and_empty_names():
    findings = validate_trialset(TrialSet("S1", 0.0, (), ()))
    assert len(findings) == 2


def test_single_class_only_matters_for_screening():
    ts = TrialSet.from_arrays("S1", 250, ["C3"], np.zeros((3, 1, 10)), [1, 1, 1])
    assert validate_trialset(ts) == []
    assert validate_trialset(ts, for_screening=True) == ["labels: fewer than 2 distinct classes"]


def test_subset_and_key():
    ts = make_trialset(n=6, subject_id="S07")
    assert ts.key == "S07"
    sub = ts.subset([4, 1])
    np.testing.assert_array_equal(sub.data, ts.data[[4, 1]])
    assert TrialSet("S07", 250.0, ("C3",), (), session_id="2").key == "S07_2"


@pytest.mark.parametrize("text,band", [("8:30", Band(8, 30)), ("4.5:40", Band(4.5, 40))])
def test_band_parse(text, band):
    assert Band.parse(text) == band


@pytest.mark.parametrize("text", ["30:8", "8", "a:b", "0:30"])
def test_band_parse_rejects(text):
    with pytest.raises(ConfigError):
        Band.parse(text)

import numpy as np
import pytest
from scipy import signal, stats

from clean_mi.model import ConfigError, validate_trialset
from clean_mi.synth import SynthConfig, synth_cohort, synth_subject


def test_deterministic():
    a = synth_subject(SynthConfig(seed=4))
    b = synth_subject(SynthConfig(seed=4))
    np.testing.assert_array_equal(a.data, b.data)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert not np.array_equal(a.data, synth_subject(SynthConfig(seed=5)).data)


def test_shape_and_validity():
    ts = synth_subject(SynthConfig(n_trials_per_class=10))
    assert (ts.n_trials, ts.n_channels, ts.n_samples) == (20, 13, 500)
    assert np.bincount(ts.labels).tolist() == [10, 10]
    assert validate_trialset(ts, for_screening=True) == []


def _mu_power(x, fs=250.0):
    f, p = signal.welch(x, fs, nperseg=250)
    return p[(f >= 9) & (f <= 13)].sum()


def test_left_hand_attenuates_c4():
    cfg = SynthConfig(snr=1.0, seed=3)
    ts = synth_subject(cfg)
    c3, c4 = cfg.hemisphere_indices()
    diff = [np.log(_mu_power(x[c4]) / _mu_power(x[c3])) for x in ts.data]
    diff = np.array(diff)
    left, right = diff[ts.labels == 0], diff[ts.labels == 1]
    assert np.all(np.median(left) < np.median(right))
    assert stats.mannwhitneyu(left, right, alternative="less").pvalue < 1e-6


def test_zero_snr_has_no_class_structure():
    ts = synth_subject(SynthConfig(snr=0.0, seed=1))
    var = np.log(ts.data.var(axis=2))
    for ch in range(ts.n_channels):
        assert stats.ttest_ind(var[ts.labels == 0, ch], var[ts.labels == 1, ch]).pvalue > 0.001


def test_cohort_ids_and_independence():
    cohort = synth_cohort(3, [0.0, 1.0, 2.0])
    assert [t.subject_id for t in cohort] == ["S01", "S02", "S03"]
    assert not np.array_equal(cohort[0].labels, cohort[1].labels)


def test_cohort_length_mismatch():
    with pytest.raises(ConfigError):
        synth_cohort(2, [1.0])


def test_empty_cohort():
    assert synth_cohort(0, []) == []


@pytest.mark.parametrize("cfg", [SynthConfig(snr=-1), SynthConfig(erd_depth=1.5), SynthConfig(mu_hz=200),
                                 SynthConfig(channel_names=("C3",)), SynthConfig(c3_idx=0, c4_idx=0)])
def test_bad_config(cfg):
    with pytest.raises(ConfigError):
        synth_subject(cfg)

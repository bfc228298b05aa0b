import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clean_mi.align import (CovMatrix, euclidean_align, identity_deviation, inv_sqrt_spd,
                            mean_covariance)
from clean_mi.model import DataError, TrialSet

from conftest import make_trialset


def brute_mean_cov(data):
    c = data.shape[1]
    out = np.zeros((c, c))
    for x in data:
        for i in range(c):
            for j in range(c):
                out[i, j] += sum(float(a) * float(b) for a, b in zip(x[i], x[j]))
    return out / len(data)


class TestMeanCovariance:
    def test_orthonormal_rows_give_identity(self, rng):
        q, _ = np.linalg.qr(rng.standard_normal((100, 5)))
        ts = TrialSet.from_arrays("S", 100, list("ABCDE"), q.T[None], [0])
        np.testing.assert_allclose(mean_covariance(ts).values, np.eye(5), atol=1e-12)

    def test_two_trials_direct_summation(self):
        ts = make_trialset(n=2, c=3, t=20)
        np.testing.assert_allclose(mean_covariance(ts).values, brute_mean_cov(ts.data), rtol=1e-12)

    def test_empty(self):
        ts = TrialSet("S", 250.0, ("C3",), ())
        with pytest.raises(DataError):
            mean_covariance(ts)

    def test_symmetric(self):
        cov = mean_covariance(make_trialset(n=5, c=6, t=40)).values
        np.testing.assert_array_equal(cov, cov.T)


class TestInvSqrt:
    def test_identity(self):
        w = inv_sqrt_spd(CovMatrix(np.eye(4)))
        np.testing.assert_allclose(w.values, np.eye(4), atol=1e-15)
        assert w.eps_used is None

    def test_diagonal(self):
        w = inv_sqrt_spd(CovMatrix(np.diag([4.0, 9.0])))
        np.testing.assert_allclose(w.values, np.diag([0.5, 1 / 3]), atol=1e-15)

    def test_random_spd_reconstruction(self, rng):
        a = rng.standard_normal((8, 20))
        r = a @ a.T
        w = inv_sqrt_spd(CovMatrix(r)).values
        assert np.linalg.norm(w @ r @ w - np.eye(8)) < 1e-10
        np.testing.assert_allclose(w, w.T)
        assert np.all(np.linalg.eigvalsh(w) > 0)

    def test_rank_deficient_is_floored(self, rng):
        a = rng.standard_normal((6, 3))
        w = inv_sqrt_spd(CovMatrix(a @ a.T))
        assert w.eps_used is not None and w.n_floored == 3
        assert np.all(np.isfinite(w.values))

    def test_non_symmetric_rejected(self):
        with pytest.raises(ValueError):
            inv_sqrt_spd(CovMatrix(np.array([[1.0, 0.5], [0.0, 1.0]])))

    def test_zero_matrix_rejected(self):
        with pytest.raises(DataError):
            inv_sqrt_spd(CovMatrix(np.zeros((3, 3))))


class TestEuclideanAlign:
    def test_already_white_is_unchanged(self, rng):
        q, _ = np.linalg.qr(rng.standard_normal((200, 4)))
        ts = TrialSet.from_arrays("S", 100, list("ABCD"), q.T[None], [0])
        out, w = euclidean_align(ts)
        np.testing.assert_allclose(out.data, ts.data, atol=1e-10)

    def test_fifty_trials(self):
        ts = make_trialset(n=50, c=8, t=256, seed=3)
        out, _ = euclidean_align(ts)
        assert identity_deviation(mean_covariance(out)) < 1e-8
        np.testing.assert_array_equal(out.labels, ts.labels)
        assert out.channel_names == ts.channel_names and out.subject_id == ts.subject_id

    def test_single_trial(self):
        ts = make_trialset(n=1, c=4, t=100)
        out, _ = euclidean_align(ts)
        x = out.trials[0].data
        np.testing.assert_allclose(x @ x.T, np.eye(4), atol=1e-10)

    @settings(max_examples=40, deadline=None)
    @given(n=st.integers(1, 20), c=st.integers(2, 12), extra=st.integers(0, 100),
           seed=st.integers(0, 2**32 - 1), scale=st.floats(1e-3, 1e3))
    def test_identity_postcondition(self, n, c, extra, seed, scale):
        t = max(16, -(-2 * c // n)) + extra  # keeps the reference full rank
        ts = make_trialset(n=n, c=c, t=t, seed=seed)
        ts = ts.with_data(ts.data * scale)
        out, w = euclidean_align(ts)
        assert w.eps_used is None
        assert identity_deviation(mean_covariance(out)) < 1e-8

    @pytest.mark.parametrize("c", [1e-3, 1.0, 1e3])
    def test_scale_equivariance(self, c):
        ts = make_trialset(n=10, c=6, t=128, seed=5)
        ref, _ = euclidean_align(ts)
        got, _ = euclidean_align(ts.with_data(ts.data * c))
        assert np.linalg.norm(got.data - ref.data) <= 1e-9 * np.linalg.norm(ref.data)

    def test_idempotent(self):
        once, _ = euclidean_align(make_trialset(n=12, c=5, t=90, seed=9))
        twice, _ = euclidean_align(once)
        assert np.linalg.norm(twice.data - once.data) < 1e-8 * np.linalg.norm(once.data)

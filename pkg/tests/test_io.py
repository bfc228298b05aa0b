import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clean_mi.align import euclidean_align
from clean_mi.io import (HEADER, BlobError, ManifestError, export_dataset, read_blob_header,
                         read_manifest, read_subject_blob, read_whitening, write_manifest,
                         write_subject_blob)
from clean_mi.model import DataError, DatasetManifest, SubjectEntry, TrialSet, validate_trialset
from clean_mi.report import QualityReport

from conftest import make_trialset

WEIBO_NAMES = tuple(f"E{i}" for i in range(60))


def _empty_report():
    return QualityReport("test", {}, {}, [])


def test_header_layout():
    assert HEADER.size == 30


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 5), c=st.integers(1, 6), t=st.integers(1, 40), seed=st.integers(0, 999),
       fs=st.sampled_from([100.0, 128.0, 200.0, 250.0, 256.0, 500.0, 512.0, 1000.0, 160.5]))
def test_round_trip_bit_exact(tmp_path_factory, n, c, t, seed, fs):
    rng = np.random.default_rng(seed)
    data = (rng.standard_normal((n, c, t)) * 50).astype(np.float32)
    labels = rng.integers(0, 4, n)
    ts = TrialSet.from_arrays("S1", fs, [f"E{i}" for i in range(c)], data, labels)
    path = tmp_path_factory.mktemp("blob") / "S1.cmi"
    write_subject_blob(ts, path)
    back = read_subject_blob(path)
    assert back.data.tobytes() == data.tobytes()
    np.testing.assert_array_equal(back.labels, labels)
    assert back.fs == fs
    assert path.stat().st_size == 30 + 4 * n * c * t + 2 * n


def test_liu2024_shape(tmp_path):
    ts = make_trialset(n=20, c=29, t=2000, fs=500.0, dtype=np.float32)
    write_subject_blob(ts, tmp_path / "S1.cmi")
    h = read_blob_header(tmp_path / "S1.cmi")
    assert (h.n_trials, h.n_channels, h.n_samples, h.fs_millihz) == (20, 29, 2000, 500_000)


def test_single_value(tmp_path):
    ts = TrialSet.from_arrays("S1", 250, ["Cz"], np.full((1, 1, 1), 1.5, np.float32), [1])
    write_subject_blob(ts, tmp_path / "x.cmi")
    back = read_subject_blob(tmp_path / "x.cmi")
    assert back.data.shape == (1, 1, 1) and back.data[0, 0, 0] == 1.5


def test_empty_trialset_rejected(tmp_path):
    with pytest.raises(ValueError):
        write_subject_blob(TrialSet("S1", 250.0, ("Cz",), ()), tmp_path / "x.cmi")


class TestCorruptBlobs:
    def _blob(self, tmp_path):
        p = tmp_path / "S1.cmi"
        write_subject_blob(make_trialset(n=3, c=2, t=10, dtype=np.float32), p)
        return p

    def test_zero_bytes(self, tmp_path):
        p = tmp_path / "z.cmi"
        p.write_bytes(b"")
        with pytest.raises(BlobError, match="magic"):
            read_subject_blob(p)

    def test_wrong_magic(self, tmp_path):
        p = self._blob(tmp_path)
        raw = bytearray(p.read_bytes())
        raw[:4] = b"XXXX"
        p.write_bytes(bytes(raw))
        with pytest.raises(BlobError, match="magic"):
            read_subject_blob(p)

    def test_truncated(self, tmp_path):
        p = self._blob(tmp_path)
        p.write_bytes(p.read_bytes()[:-3])
        with pytest.raises(BlobError, match="truncated"):
            read_subject_blob(p)

    def test_missing_last_trial(self, tmp_path):
        p = tmp_path / "S1.cmi"
        write_subject_blob(make_trialset(n=10, c=2, t=10, dtype=np.float32), p)
        raw = p.read_bytes()
        p.write_bytes(raw[:30 + 9 * 2 * 10 * 4])
        with pytest.raises(BlobError, match="truncated"):
            read_subject_blob(p)

    def test_trailing_bytes(self, tmp_path):
        p = self._blob(tmp_path)
        p.write_bytes(p.read_bytes() + b"\0")
        with pytest.raises(BlobError, match="trailing"):
            read_subject_blob(p)

    def test_bad_version(self, tmp_path):
        p = self._blob(tmp_path)
        raw = bytearray(p.read_bytes())
        raw[4:6] = struct.pack("<H", 9)
        p.write_bytes(bytes(raw))
        with pytest.raises(BlobError, match="version"):
            read_subject_blob(p)

    def test_is_data_error(self):
        assert issubclass(BlobError, DataError)


class TestManifest:
    def _write(self, tmp_path, n_subjects=10, names=WEIBO_NAMES, fs=200.0):
        entries = []
        for i in range(n_subjects):
            ts = make_trialset(n=2, c=len(names), t=8, fs=fs, seed=i, dtype=np.float32)
            write_subject_blob(ts, tmp_path / f"S{i}.cmi")
            entries.append(SubjectEntry(f"S{i}", f"S{i}.cmi"))
        m = DatasetManifest("Weibo2014", fs, 4.0, names, tuple(entries), {0: "left_hand", 1: "right_hand"})
        write_manifest(m, tmp_path / "manifest.json")
        return m

    def test_weibo_shaped_round_trip(self, tmp_path):
        self._write(tmp_path)
        m = read_manifest(tmp_path / "manifest.json")
        assert m.dataset_name == "Weibo2014" and m.fs == 200.0 and m.trial_length_s == 4.0
        assert len(m.channel_names) == 60 and len(m.subjects) == 10
        assert m.classes == {0: "left_hand", 1: "right_hand"}
        assert all(s.blob_path.startswith(str(tmp_path)) for s in m.subjects)

    def test_zero_subjects(self, tmp_path):
        m = DatasetManifest("empty", 250.0, 2.0, ("C3",), (), {})
        write_manifest(m, tmp_path / "manifest.json")
        with pytest.raises(ManifestError, match="no subjects"):
            read_manifest(tmp_path / "manifest.json")

    def test_missing_blob(self, tmp_path):
        self._write(tmp_path, n_subjects=2)
        (tmp_path / "S1.cmi").unlink()
        with pytest.raises(ManifestError, match="S1.cmi"):
            read_manifest(tmp_path / "manifest.json")
        assert len(read_manifest(tmp_path / "manifest.json", check_blobs=False).subjects) == 2

    def test_channel_mismatch(self, tmp_path):
        self._write(tmp_path, n_subjects=1)
        doc = json.loads((tmp_path / "manifest.json").read_text())
        doc["channel_names"] = doc["channel_names"][:10]
        (tmp_path / "manifest.json").write_text(json.dumps(doc))
        with pytest.raises(ManifestError):
            read_manifest(tmp_path / "manifest.json")

    @pytest.mark.parametrize("mutate", [
        lambda d: d.pop("fs"),
        lambda d: d.update(format="other"),
        lambda d: d.update(version=99),
        lambda d: d.update(fs="fast"),
    ])
    def test_malformed(self, tmp_path, mutate):
        self._write(tmp_path, n_subjects=1)
        doc = json.loads((tmp_path / "manifest.json").read_text())
        mutate(doc)
        (tmp_path / "manifest.json").write_text(json.dumps(doc))
        with pytest.raises(ManifestError):
            read_manifest(tmp_path / "manifest.json")

    def test_not_json(self, tmp_path):
        (tmp_path / "manifest.json").write_text("{")
        with pytest.raises(ManifestError):
            read_manifest(tmp_path / "manifest.json")


class TestExport:
    def test_eight_subjects(self, tmp_path):
        sets = [make_trialset(n=4, c=5, t=32, seed=i, subject_id=f"S{i}") for i in range(8)]
        summary = export_dataset(sets, _empty_report(), tmp_path, dataset_name="x", classes={0: "a", 1: "b"})
        assert summary.n_subjects == 8 and summary.n_trials == 32 and not summary.empty
        m = read_manifest(tmp_path / "manifest.json")
        assert len(m.subjects) == 8
        for entry, ts in zip(m.subjects, sets):
            back = read_subject_blob(entry.blob_path, m, subject_id=entry.subject_id)
            assert validate_trialset(back) == []
            np.testing.assert_array_equal(back.data, ts.data.astype(np.float32))

    def test_heterogeneous_rejected(self, tmp_path):
        a = make_trialset(subject_id="S1")
        b = make_trialset(subject_id="S2", fs=256.0)
        with pytest.raises(DataError, match="S2"):
            export_dataset([a, b], _empty_report(), tmp_path)
        c = make_trialset(subject_id="S3", t=65)
        with pytest.raises(DataError, match="S3"):
            export_dataset([a, c], _empty_report(), tmp_path)

    def test_empty(self, tmp_path, caplog):
        summary = export_dataset([], _empty_report(), tmp_path)
        assert summary.empty and summary.manifest is None
        assert (tmp_path / "quality_report.csv").exists()
        assert not (tmp_path / "manifest.json").exists()

    def test_whitening_sidecar(self, tmp_path):
        ts, w = euclidean_align(make_trialset(n=6, c=4, t=64))
        summary = export_dataset([ts], _empty_report(), tmp_path, whitening={ts.key: w})
        assert summary.sidecars == ["S01.whiten.npy"]
        wm, r = read_whitening(tmp_path / "S01.whiten.npy")
        np.testing.assert_array_equal(wm, w.values)
        np.testing.assert_allclose(wm @ r @ wm, np.eye(4), atol=1e-10)

import json

import numpy as np
import pytest

from izhifit.sorting import (RawRecording, WaveformSet, bandpass, cluster, detect,
                             extract_waveforms, isi_violation_rate, matched_accuracy,
                             noise_sigma, pca_features, read_recording, sort_recording,
                             validate_units, write_recording)
from izhifit.synth import match_events, poisson_train, synth_recording, template_shapes

FS = 50_000.0


def sine(freq, seconds=1.0, amp=1.0):
    t = np.arange(int(seconds * FS)) / FS
    return RawRecording(FS, amp * np.sin(2 * np.pi * freq * t))


def test_bandpass_passes_5khz():
    out = bandpass(sine(5000.0)).samples
    core = out[5000:-5000]
    assert abs(np.sqrt(2) * core.std() - 1.0) < 0.05


def test_bandpass_rejects_50hz():
    out = bandpass(sine(50.0, seconds=2.0)).samples
    core = out[20000:-20000]
    gain_db = 20 * np.log10(np.sqrt(2) * core.std())
    assert gain_db <= -20.0


def test_bandpass_zero_and_validation():
    zero = RawRecording(FS, np.zeros(5000))
    assert np.all(bandpass(zero).samples == 0.0)
    with pytest.raises(ValueError):
        bandpass(zero, 300.0, 30_000.0)
    with pytest.raises(ValueError):
        bandpass(zero, 500.0, 400.0)


def test_recording_validation():
    with pytest.raises(ValueError):
        RawRecording(0.0, np.zeros(10))
    with pytest.raises(ValueError):
        RawRecording(FS, np.array([0.0, np.nan]))
    assert RawRecording(FS, np.zeros(50_000)).duration == 1000.0


def test_false_positive_rate_on_noise():
    rng = np.random.default_rng(0)
    rec = bandpass(RawRecording(FS, rng.normal(0.0, 10.0, int(30 * FS))))
    events = detect(rec)
    assert len(events) / 30.0 < 0.5


def test_noise_sigma_estimate():
    rng = np.random.default_rng(1)
    assert noise_sigma(rng.normal(0.0, 3.0, 200_000)) == pytest.approx(3.0, rel=0.01)


def test_single_injected_template():
    x = np.zeros(int(0.2 * FS))
    shape = template_shapes(FS)[0]
    half = len(shape) // 2
    at = 5000
    x[at - half: at + half + 1] += 50.0 * shape
    events = detect(RawRecording(FS, x), threshold=20.0)
    assert len(events) == 1
    assert abs(events[0] - at * 1000.0 / FS) <= 0.1


def test_dead_time_merges_close_events():
    x = np.zeros(int(0.1 * FS))
    i0 = 2000
    i1 = i0 + int(0.3e-3 * FS)
    x[i0] = -100.0
    x[i1] = -80.0
    assert len(detect(RawRecording(FS, x), threshold=50.0)) == 1
    x[i0 + int(2e-3 * FS)] = -90.0
    assert len(detect(RawRecording(FS, x), threshold=50.0)) == 2


def test_edge_events_are_skipped():
    x = np.zeros(int(0.05 * FS))
    x[3] = -100.0
    x[1000] = -100.0
    x[-4] = -100.0
    rec = RawRecording(FS, x)
    wf = extract_waveforms(rec, detect(rec, threshold=50.0))
    assert len(wf) == 1 and wf.skipped == 2


def test_identical_templates_give_identical_aligned_snippets():
    shape = template_shapes(FS)[1] * 60.0
    half = len(shape) // 2
    x = np.zeros(int(0.5 * FS))
    centres = [3000, 9000, 15000, 21000]
    for c in centres:
        x[c - half: c + half + 1] += shape
    rec = RawRecording(FS, x)
    wf = extract_waveforms(rec, detect(rec, threshold=20.0))
    assert len(wf) == 4
    assert np.all(wf.snippets == wf.snippets[0])
    assert np.all(np.argmin(wf.snippets, axis=1) == wf.align_index)
    assert wf.snippets.shape[1] == int(0.4e-3 * FS) + int(1.0e-3 * FS) + 1


@pytest.fixture(scope="module")
def noisy_snippets():
    syn = synth_recording(duration_s=20.0, seed=4)
    rec = bandpass(syn.recording)
    return extract_waveforms(rec, detect(rec))


def test_alignment_on_noisy_data(noisy_snippets):
    idx = np.argmin(noisy_snippets.snippets, axis=1)
    assert np.all(idx == noisy_snippets.align_index)


def test_pca_orthonormal_and_ordered(noisy_snippets):
    p = pca_features(noisy_snippets)
    gram = p.components @ p.components.T
    assert np.max(np.abs(gram - np.eye(len(gram)))) < 1e-8
    ev = p.explained_variance
    assert ev[0] >= ev[1] >= ev[2]
    assert p.features.shape == (len(noisy_snippets), 5)
    np.testing.assert_array_equal(p.features[:, 3], noisy_snippets.snippets.max(axis=1))
    np.testing.assert_array_equal(p.features[:, 4], noisy_snippets.snippets.min(axis=1))
    assert all(np.isfinite([v.pc1, v.pc2, v.pc3, v.peak, v.valley]).all() for v in p.vectors())


def test_pca_reconstruction(noisy_snippets):
    p = pca_features(noisy_snippets)
    X = noisy_snippets.snippets
    proj = (X - p.mean) @ p.components.T
    back = p.reconstruct(proj)
    assert np.linalg.norm(back - X) / np.linalg.norm(X - p.mean) < 1e-6


def test_pca_needs_four_waveforms():
    with pytest.raises(ValueError):
        pca_features(WaveformSet(np.zeros((3, 10)), np.zeros(3), 2))


def test_pca_separates_two_template_families():
    rng = np.random.default_rng(5)
    shapes = template_shapes(FS)[:2] * 50.0
    X = np.vstack([shapes[k] + rng.normal(0, 2.0, shapes.shape[1])
                   for k in (0, 1) for _ in range(100)])
    labels = np.repeat([0, 1], 100)
    pc1 = pca_features(X).features[:, 0]
    a, b = pc1[labels == 0], pc1[labels == 1]
    gap = abs(a.mean() - b.mean()) - 0.5 * (np.ptp(a) + np.ptp(b))
    spread = max(a.std(), b.std())
    assert gap > 0 and abs(a.mean() - b.mean()) > 5 * spread


def test_cluster_blobs_and_edge_cases():
    rng = np.random.default_rng(6)
    centres = np.array([[0, 0, 0, 0, 0], [10, 0, 0, 0, 0], [0, 10, 0, 0, 0]], dtype=float)
    truth = np.repeat([0, 1, 2], 200)
    F = centres[truth] + rng.normal(0.0, 1.0, (600, 5))
    assert matched_accuracy(truth, cluster(F, k=3, seed=0)) >= 0.99
    assert np.all(cluster(F, k=1) == 0)
    with pytest.raises(ValueError):
        cluster(F[:2], k=3)
    dup = np.vstack([F, F])
    lab = cluster(dup, k=3)
    assert np.array_equal(lab[:600], lab[600:])
    assert np.array_equal(cluster(F, k=3, seed=4), cluster(F, k=3, seed=4))


def test_validate_units_refractory_checks():
    rng = np.random.default_rng(7)
    a = poisson_train(20.0, 60_000.0, rng, refractory_ms=2.0)
    b = poisson_train(20.0, 60_000.0, rng, refractory_ms=2.0)
    res = validate_units(np.zeros(len(a), dtype=int), a)
    assert res.units[0].isi_violation_rate == 0.0 and res.units[0].valid
    merged = np.sort(np.concatenate([a, b]))
    res = validate_units(np.zeros(len(merged), dtype=int), merged)
    u = res.units[0]
    assert u.isi_violation_rate > 0.01 and not u.valid
    assert "refractory-violations" in u.flags


def test_validate_units_reports_empty_clusters():
    res = validate_units(np.array([0, 0, 2, 2]), np.array([1.0, 5.0, 2.0, 9.0]), n_clusters=4)
    assert [u.unit_id for u in res.units] == [0, 2]
    assert res.empty_clusters == [1, 3]
    assert set(res.cross_correlograms) == {(0, 2)}
    with pytest.raises(ValueError):
        validate_units([0], [1.0], refractory=0.0)


def test_violation_rate_bounds():
    assert isi_violation_rate(np.array([1.0]), 1.0) == 0.0
    assert isi_violation_rate(np.array([0.0, 0.5, 1.0]), 1.0) == 1.0


def test_matched_accuracy_is_permutation_invariant():
    t = np.array([0, 0, 1, 1, 2, 2])
    assert matched_accuracy(t, np.array([2, 2, 0, 0, 1, 1])) == 1.0
    assert matched_accuracy(t, np.array([2, 2, 0, 1, 1, 1])) == pytest.approx(5 / 6)


def test_sort_recording_end_to_end_and_deterministic():
    syn = synth_recording(duration_s=15.0, seed=8)
    a = sort_recording(syn.recording, k=3, seed=0)
    b = sort_recording(syn.recording, k=3, seed=0)
    assert json.dumps(a.summary()) == json.dumps(b.summary())
    for u in a.units:
        t = u.train.times
        assert np.all(np.diff(t) > 0)
        assert t[0] >= 0 and t[-1] <= syn.recording.duration
        assert 0.0 <= u.isi_violation_rate <= 1.0
    true_t, _ = syn.ground_truth()
    found = np.sort(np.concatenate([u.train.times for u in a.units]))
    ti, _ = match_events(true_t, found)
    assert len(ti) / len(true_t) >= 0.95


def test_sort_rejects_empty_recording():
    rng = np.random.default_rng(9)
    rec = RawRecording(FS, rng.normal(0.0, 1.0, int(2 * FS)))
    with pytest.raises(ValueError):
        sort_recording(rec)


@pytest.mark.parametrize("dtype", ["float32", "int16"])
def test_recording_file_round_trip(tmp_path, dtype):
    rec = RawRecording(FS, np.random.default_rng(1).normal(0.0, 10.0, 1000), region="BLA")
    path = tmp_path / "rec.bin"
    write_recording(rec, path, dtype)
    back = read_recording(path)
    assert back.sample_rate == FS and back.region == "BLA"
    tol = 1e-5 if dtype == "float32" else np.abs(rec.samples).max() / 30000.0
    assert np.max(np.abs(back.samples - rec.samples)) <= tol
    assert sorted(p.name for p in tmp_path.iterdir()) == ["rec.bin", "rec.bin.json"]


def test_csv_recording(tmp_path):
    path = tmp_path / "rec.csv"
    path.write_text("time_s,signal\n0.0,1.5\n0.00002,-2.0\n0.00004,0.5\n")
    rec = read_recording(path)
    assert list(rec.samples) == [1.5, -2.0, 0.5] and rec.sample_rate == FS
    bare = tmp_path / "bare.csv"
    bare.write_text("1\n2\n3\n")
    assert list(read_recording(bare, sample_rate=1000.0).samples) == [1.0, 2.0, 3.0]

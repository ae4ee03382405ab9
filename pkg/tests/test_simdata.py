import numpy as np
import pytest

from ecko.simdata import SimulationSpec, compute_snr, generate_synthetic, place_rois


def test_default_support_size():
    spec = SimulationSpec(n_samples=2)
    rng = np.random.default_rng(spec.seed)
    corners = place_rois(spec.shape, spec.n_rois, spec.roi_size, rng)
    assert len(corners) == 5
    w = np.zeros(spec.shape)
    for c in corners:
        w[tuple(slice(x, x + 6) for x in c)] = 1
    assert w.sum() == 1080


def test_generate_support_and_signs():
    spec = SimulationSpec(shape=(20, 20, 20), n_samples=10, n_rois=3, roi_size=4, seed=3)
    ds, truth = generate_synthetic(spec)
    assert len(truth.support) == 3 * 64
    assert sorted(np.unique(truth.w_star).tolist()) == [-1.0, 0.0, 1.0]
    assert np.sum(truth.w_star == 1) == 128 and np.sum(truth.w_star == -1) == 64


def test_target_snr_exact():
    for snr in (0.5, 3.6, 32.0):
        spec = SimulationSpec(shape=(10, 10, 10), n_samples=30, n_rois=2, roi_size=3, target_snr=snr)
        ds, truth = generate_synthetic(spec)
        assert compute_snr(ds.X, truth.w_star, truth.sigma, truth.noise) == pytest.approx(snr, abs=1e-12)
        np.testing.assert_allclose(ds.y, ds.X @ truth.w_star + truth.sigma * truth.noise)


def test_no_smoothing_gives_independent_columns():
    spec = SimulationSpec(shape=(5, 5, 4), n_samples=10000, n_rois=1, roi_size=2, smoothing_width=0.0)
    ds, _ = generate_synthetic(spec)
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, b = rng.choice(ds.p, 2, replace=False)
        assert abs(np.corrcoef(ds.X[:, a], ds.X[:, b])[0, 1]) <= 0.05


def test_smoothing_correlates_neighbours():
    spec = SimulationSpec(shape=(6, 6, 6), n_samples=2000, n_rois=1, roi_size=2)
    ds, _ = generate_synthetic(spec)
    assert np.corrcoef(ds.X[:, 0], ds.X[:, 1])[0, 1] > 0.3


def test_bit_identical():
    spec = SimulationSpec(shape=(7, 7, 7), n_samples=12, n_rois=2, roi_size=2, seed=9)
    (a, ta), (b, tb) = generate_synthetic(spec), generate_synthetic(spec)
    assert a.X.tobytes() == b.X.tobytes() and a.y.tobytes() == b.y.tobytes()
    assert ta.w_star.tobytes() == tb.w_star.tobytes() and ta.sigma == tb.sigma


def test_compute_snr_examples():
    assert compute_snr(np.eye(2), np.ones(2), 1.0, np.ones(2)) == 1.0
    assert compute_snr(np.eye(2), np.zeros(2), 1.0, np.ones(2)) == 0.0
    assert compute_snr(np.eye(2), np.array([2.0, 0.0]), 1.0, np.ones(2)) == 2.0
    with pytest.raises(ValueError):
        compute_snr(np.eye(2), np.ones(2), 1.0, np.zeros(2))


def test_no_signal_sigma_one():
    _, truth = generate_synthetic(SimulationSpec(shape=(4, 4, 4), n_samples=5, n_rois=0))
    assert truth.sigma == 1.0 and not truth.support.size


def test_spec_validation():
    with pytest.raises(ValueError, match="ROI does not fit"):
        SimulationSpec(roi_size=60)
    with pytest.raises(ValueError, match="overlap"):
        SimulationSpec(shape=(10, 10, 10), n_rois=2, roi_size=3, roi_corners=((0, 0, 0), (2, 2, 2)))
    with pytest.raises(ValueError, match="ROI does not fit"):
        SimulationSpec(shape=(10, 10, 10), n_rois=1, roi_size=3, roi_corners=((8, 0, 0),))
    with pytest.raises(ValueError):
        place_rois((6, 6, 6), 5, 5, np.random.default_rng(0))


def test_explicit_corners():
    spec = SimulationSpec(shape=(8, 8, 8), n_samples=5, n_rois=2, roi_size=2,
                          roi_corners=((0, 0, 0), (5, 5, 5)), roi_amplitude=(2.0, 3.0))
    _, truth = generate_synthetic(spec)
    vol = truth.w_star.reshape(8, 8, 8)
    assert vol[0, 0, 0] == 2.0 and vol[6, 6, 6] == 3.0 and np.count_nonzero(vol) == 16

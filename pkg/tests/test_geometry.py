import math
import warnings

import numpy as np
import pytest
from scipy import stats

from rydberg_mc.analytic import chandrasekhar_pdf
from rydberg_mc.geometry import (
    FWHM_PER_SIGMA,
    SEPARATION,
    SINGLE_BOX,
    SINGLE_CIGAR,
    TRAP_ARRAY,
    TWO_CIGAR_TRAPS,
    TWO_SYMMETRIC_TRAPS,
    GeometryError,
    SpatialConfig,
    interaction_scale,
    mean_nn_distance,
    realization_rng,
    sample,
)


def _positions(config, n, seed=0):
    return np.stack([sample(config, seed, i).positions for i in range(n)])


def test_box_support():
    pos = _positions(SpatialConfig(SINGLE_BOX, atom_count=3), 2000)
    assert pos.shape == (2000, 3, 3)
    assert pos.min() >= 0.0 and pos.max() <= 1.0
    pos = _positions(SpatialConfig(SINGLE_BOX, length=2.5), 500)
    assert pos.max() <= 2.5


def test_symmetric_trap_centres_and_mean():
    cfg = SpatialConfig(TWO_SYMMETRIC_TRAPS, separation=1.0, fwhm=(0.1, 0.1, 0.1))
    np.testing.assert_array_equal(cfg.centers(), [[0, 0, -0.5], [0, 0, 0.5]])
    pos = _positions(cfg, 10_000)
    sigma = 0.1 / FWHM_PER_SIGMA
    err = np.abs(pos.mean(axis=0) - cfg.centers())
    assert np.all(err < 5 * sigma / math.sqrt(10_000))


@pytest.mark.parametrize(
    "cfg",
    [
        SpatialConfig(TWO_SYMMETRIC_TRAPS, fwhm=(0.2, 0.2, 0.2)),
        SpatialConfig(TWO_CIGAR_TRAPS, fwhm=(0.94, 0.07, 0.07)),
        SpatialConfig(SINGLE_CIGAR, atom_count=3, fwhm=(0.1, 0.1, 1.0)),
        SpatialConfig(TWO_SYMMETRIC_TRAPS, fwhm=(0.2, 0.2, 0.2), fwhm_convention=SEPARATION),
    ],
)
def test_trap_variance_within_5_percent(cfg):
    pos = _positions(cfg, 10_000, seed=3)
    var = pos.var(axis=0, ddof=1)
    expected = np.broadcast_to(cfg.sigma**2, var.shape)
    np.testing.assert_allclose(var, expected, rtol=0.05)


def test_separation_convention_narrows_per_atom_width():
    a = SpatialConfig(TWO_SYMMETRIC_TRAPS, fwhm=0.2)
    b = SpatialConfig(TWO_SYMMETRIC_TRAPS, fwhm=0.2, fwhm_convention=SEPARATION)
    np.testing.assert_allclose(a.sigma / b.sigma, math.sqrt(2.0))
    # the separation vector then has the configured FWHM
    d = np.diff(_positions(b, 20_000, seed=5), axis=1)[:, 0, 0]
    assert abs(d.std(ddof=1) * FWHM_PER_SIGMA / 0.2 - 1) < 0.03


def test_cigar_long_axis_fwhm():
    # FWHM 9.4 along x, 0.7 transverse, traps 10 apart
    cfg = SpatialConfig(TWO_CIGAR_TRAPS, separation=10.0, fwhm=(9.4, 0.7, 0.7))
    x = _positions(cfg, 10_000, seed=11)[:, :, 0].ravel()
    fwhm = x.std(ddof=1) * FWHM_PER_SIGMA
    assert abs(fwhm / 9.4 - 1) < 0.03


def test_trap_array_layout_and_default_width():
    cfg = SpatialConfig(TRAP_ARRAY, atom_count=4, separation=2.0)
    assert cfg.fwhm == (0.4, 0.4, 0.4)
    np.testing.assert_allclose(cfg.centers()[:, 2], [-3, -1, 1, 3])
    assert interaction_scale(cfg) == (2.0, 2.0)


def test_determinism_and_independence():
    cfg = SpatialConfig(SINGLE_BOX, atom_count=3)
    a = sample(cfg, 42, 17).positions
    np.testing.assert_array_equal(a, sample(cfg, 42, 17).positions)
    assert not np.array_equal(a, sample(cfg, 42, 18).positions)
    assert not np.array_equal(a, sample(cfg, 43, 17).positions)
    assert not np.array_equal(a, sample(cfg, 42, 17, attempt=1).positions)
    # independent of the order in which indices are drawn
    forward = [sample(cfg, 1, i).positions for i in range(20)]
    backward = [sample(cfg, 1, i).positions for i in reversed(range(20))][::-1]
    np.testing.assert_array_equal(forward, backward)


def test_noise_stream_separate_from_positions():
    x = realization_rng(5, 3, 0).standard_normal(4)
    y = realization_rng(5, 3, 1).standard_normal(4)
    assert not np.array_equal(x, y)


def test_mean_nn_distance():
    r1 = mean_nn_distance(SpatialConfig(SINGLE_BOX))
    assert r1 == pytest.approx(0.4923725109, abs=1e-9)
    assert mean_nn_distance(SpatialConfig(SINGLE_BOX, length=2.0)) == pytest.approx(2 * r1)
    with pytest.raises(GeometryError):
        mean_nn_distance(SpatialConfig(TWO_SYMMETRIC_TRAPS, fwhm=0.1))


def test_chandrasekhar_mode():
    r0 = 0.7
    r = np.linspace(1e-4, 3 * r0, 200_001)
    mode = r[np.argmax(chandrasekhar_pdf(r, r0))]
    assert mode == pytest.approx((2.0 / 3.0) ** (1.0 / 3.0) * r0, abs=1e-4)


def test_box_pair_distance_shape_matches_chandrasekhar_at_small_r():
    # Below r0/2 the sampled pair distances follow the Chandrasekhar shape. The
    # comparison is on the conditional distribution; the tolerance adds the
    # 95% Kolmogorov-Smirnov sampling band to the 0.02 target.
    cfg = SpatialConfig(SINGLE_BOX)
    r0 = mean_nn_distance(cfg)
    pos = _positions(cfg, 100_000, seed=2)
    r = np.linalg.norm(pos[:, 0] - pos[:, 1], axis=1)
    cut = 0.5 * r0
    small = r[r < cut]
    cdf_cut = 1 - math.exp(-((cut / r0) ** 3))
    ks = stats.kstest(small, lambda x: (1 - np.exp(-((x / r0) ** 3))) / cdf_cut).statistic
    assert ks < 0.02 + 1.36 / math.sqrt(small.size)


def test_validation():
    with pytest.raises(GeometryError):
        SpatialConfig("sphere")
    with pytest.raises(GeometryError):
        SpatialConfig(SINGLE_BOX, length=0.0)
    with pytest.raises(GeometryError):
        SpatialConfig(TWO_SYMMETRIC_TRAPS, atom_count=3, fwhm=0.1)
    with pytest.raises(GeometryError):
        SpatialConfig(TWO_SYMMETRIC_TRAPS)
    with pytest.raises(GeometryError):
        SpatialConfig(TWO_SYMMETRIC_TRAPS, fwhm=(0.1, -0.1, 0.1))
    with pytest.raises(GeometryError):
        SpatialConfig(TWO_SYMMETRIC_TRAPS, fwhm=0.1, fwhm_convention="pair")


def test_overlapping_traps_warn_only():
    with pytest.warns(UserWarning, match="not smaller than the trap separation"):
        SpatialConfig(TWO_SYMMETRIC_TRAPS, separation=1.0, fwhm=1.5)
    # a long cigar axis perpendicular to the separation does not overlap the traps
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        SpatialConfig(TWO_CIGAR_TRAPS, separation=1.0, fwhm=(1.88, 0.07, 0.07))


def test_single_cigar_scale_from_density():
    cfg = SpatialConfig(SINGLE_CIGAR, atom_count=5, fwhm=(0.1, 0.1, 1.0))
    scale, c_geom = interaction_scale(cfg)
    volume = 4 * math.pi / 3 * 0.05 * 0.05 * 0.5
    assert scale == pytest.approx((3 * volume / (4 * math.pi * 5)) ** (1 / 3))
    assert c_geom == 1.0

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pointseg.datasets import SynthConfig, synth_tile
from pointseg.perturb import (
    PerturbationSaturationWarning,
    PerturbConfig,
    PointPerturber,
    instance_rng,
    max_perturbation_distances,
    perturb_pointset,
    round_half_down,
    shift_point,
)
from pointseg.raster import centroid


def square(n=41, size=None):
    size = size or n + 10
    m = np.zeros((size, size), bool)
    off = (size - n) // 2
    m[off:off + n, off:off + n] = True
    return m


def test_round_half_down():
    assert [round_half_down(v) for v in (0.5, 1.5, -0.5, 2.49, 2.51, 3.0)] == [0, 1, -1, 2, 3, 3]


def test_distances_single_pixel():
    m = np.zeros((5, 5), bool)
    m[2, 2] = True
    assert max_perturbation_distances(m, (2.0, 2.0)) == (0.5, 0.5)


def test_distances_rectangle():
    m = np.zeros((9, 11), bool)
    m[3:6, 3:8] = True  # 5 wide, 3 tall
    assert max_perturbation_distances(m, centroid(m)) == (2.5, 1.5)


def test_distances_full_row_clipped_at_border():
    m = np.zeros((5, 8), bool)
    m[2, :] = True
    dx, dy = max_perturbation_distances(m, centroid(m))
    assert dx == 4.0  # centroid x = 3.5, border at -0.5 and 7.5
    assert dy == 0.5


def test_epsilon_zero_returns_centroid():
    m = square(7)
    c = centroid(m)
    assert shift_point(c, max_perturbation_distances(m, c), m, PerturbConfig(0.0)) == c


def test_single_pixel_any_epsilon_returns_centroid():
    m = np.zeros((5, 5), bool)
    m[1, 3] = True
    rng = instance_rng(0, 1)
    for eps in (0.5, 1.0, 3.0):
        x, y = shift_point((3.0, 1.0), (0.5, 0.5), m, PerturbConfig(eps), rng)
        assert (round_half_down(x), round_half_down(y)) == (3, 1)


def test_square_statistics():
    m = square(41)
    c = centroid(m)
    d = max_perturbation_distances(m, c)
    assert d == (20.5, 20.5)
    cfg = PerturbConfig(0.5)
    rng = instance_rng(123, 1)
    draws = np.array([shift_point(c, d, m, cfg, rng) for _ in range(10_000)])
    px = np.floor(draws + 0.5).astype(int)  # rounding of non-tie floats
    assert m[px[:, 1], px[:, 0]].all()
    expected = 0.5 * d[0] / 3
    assert abs(draws[:, 0].std() - expected) / expected < 0.05


def test_saturation_warns_and_returns_centroid():
    m = np.zeros((5, 5), bool)
    m[2, 2] = True
    with pytest.warns(PerturbationSaturationWarning):
        out = shift_point((2.0, 2.0), (0.5, 0.5), m, PerturbConfig(50.0, max_redraws=1), instance_rng(0, 0))
    assert out == (2.0, 2.0)


def test_config_validation():
    with pytest.raises(ValueError):
        PerturbConfig(-0.1)
    with pytest.raises(ValueError):
        PerturbConfig(0.1, max_redraws=0)


def _tile(seed, n=50):
    return synth_tile(SynthConfig(height=160, width=160, nuclei=(n, n), debris=(0, 0), seed=seed)).instances


def test_pointset_epsilon_zero_is_rounded_centroids():
    inst = _tile(1, 20)
    res = perturb_pointset(inst, PerturbConfig(0.0, seed=3))
    for (x, y), i in zip(res.points, res.instance_ids):
        cx, cy = centroid(inst == i)
        if inst[round_half_down(cy), round_half_down(cx)] == i:
            assert (x, y) == (round_half_down(cx), round_half_down(cy))


def test_pointset_deterministic():
    inst = _tile(2, 20)
    a = perturb_pointset(inst, PerturbConfig(1.0, seed=9))
    b = perturb_pointset(inst, PerturbConfig(1.0, seed=9))
    np.testing.assert_array_equal(a.points, b.points)
    c = perturb_pointset(inst, PerturbConfig(1.0, seed=10))
    assert not np.array_equal(a.points, c.points)


def test_pointset_independent_of_other_instances():
    inst = _tile(4, 10)
    full = perturb_pointset(inst, PerturbConfig(1.0, seed=2))
    keep = full.instance_ids[3]
    solo = perturb_pointset(np.where(inst == keep, inst, 0), PerturbConfig(1.0, seed=2))
    np.testing.assert_array_equal(solo.points[0], full.points[3])


@pytest.mark.parametrize("eps", [0.25, 0.5, 1.0, 2.0])
def test_pointset_containment(eps):
    inst = _tile(7)
    assert inst.max() >= 45
    res = perturb_pointset(inst, PerturbConfig(eps, seed=1))
    assert len(res.points) == len(res.instance_ids)
    assert (inst[res.points[:, 1], res.points[:, 0]] == res.instance_ids).all()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.floats(0, 3))
def test_pointset_containment_property(seed, eps):
    inst = synth_tile(SynthConfig(height=64, width=64, nuclei=(3, 8), debris=(0, 0), seed=seed % 1000)).instances
    res = perturb_pointset(inst, PerturbConfig(eps, seed=seed))
    assert (inst[res.points[:, 1], res.points[:, 0]] == res.instance_ids).all()


def test_displacement_grows_with_epsilon():
    inst = _tile(8)
    base = perturb_pointset(inst, PerturbConfig(0.0)).points
    spread = [np.abs(perturb_pointset(inst, PerturbConfig(e, seed=5)).points - base).mean() for e in (0.25, 1.0, 2.0)]
    assert spread[0] < spread[1] < spread[2]


def test_point_perturber_estimator():
    from sklearn.base import clone

    inst = _tile(3, 5)
    est = PointPerturber(epsilon=0.5, random_state=4)
    assert clone(est).get_params() == {"epsilon": 0.5, "random_state": 4, "max_redraws": 1000}
    pts = est.fit_transform(inst)
    np.testing.assert_array_equal(pts, perturb_pointset(inst, PerturbConfig(0.5, 4)).points)

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from regioncert import (
    AllInfeasibleError,
    Box,
    DeadPlaneError,
    box_constrained_distance,
    dual_exponent,
    hyperplane_projection,
    min_box_distance_over_planes,
    point_hyperplane_distance,
    vector_norm,
)
from regioncert.geometry import check_p

PS = (1.0, 2.0, math.inf)

finite_vec = st.lists(
    st.floats(-10, 10, allow_nan=False, allow_infinity=False, width=32),
    min_size=1, max_size=6,
).map(lambda v: np.array(v, dtype=np.float64))


def test_check_p_accepts_and_rejects():
    assert check_p(2) == 2.0
    assert check_p(np.inf) == math.inf
    for bad in (0, 3, -1, 1.5):
        with pytest.raises(ValueError):
            check_p(bad)


def test_dual_exponent_pairs():
    assert dual_exponent(2.0) == 2.0
    assert dual_exponent(1.0) == math.inf
    assert dual_exponent(math.inf) == 1.0


@given(finite_vec, st.sampled_from(PS))
def test_vector_norm_matches_numpy(v, p):
    assert vector_norm(v, p) == pytest.approx(np.linalg.norm(v, p), abs=1e-12)


def test_box_validation_and_ops():
    box = Box.unit(3)
    assert box.dim == 3
    assert box.contains(np.array([0.0, 0.5, 1.0]))
    assert not box.contains(np.array([0.0, 0.5, 1.1]))
    np.testing.assert_array_equal(box.clip([-1.0, 0.5, 2.0]), [0.0, 0.5, 1.0])
    with pytest.raises(ValueError):
        Box(np.array([1.0]), np.array([0.0]))
    with pytest.raises(ValueError):
        Box(np.array([0.0]), np.array([np.inf]))


@given(finite_vec)
def test_box_clip_idempotent_and_inside(x):
    box = Box.unit(x.shape[0])
    clipped = box.clip(x)
    assert box.contains(clipped)
    np.testing.assert_array_equal(box.clip(clipped), clipped)


def test_point_plane_distance_hand_cases():
    w, b = np.array([2.0, 0.0]), -0.7
    x = np.array([0.6, 0.5])
    assert point_hyperplane_distance((w, b), x, 2.0) == pytest.approx(0.25)
    assert point_hyperplane_distance((w, b), x, math.inf) == pytest.approx(0.25)
    assert point_hyperplane_distance((w, b), x, 1.0) == pytest.approx(0.25)
    w2 = np.array([1.0, 1.0])
    assert point_hyperplane_distance((w2, 0.0), np.array([1.0, 1.0]), math.inf) \
        == pytest.approx(1.0)  # dual norm is l1: 2 / 2
    with pytest.raises(DeadPlaneError):
        point_hyperplane_distance((np.zeros(2), 1.0), x, 2.0)


@given(st.integers(0, 2 ** 31 - 1), st.sampled_from(PS))
def test_projection_lands_on_plane_at_stated_distance(seed, p):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 7))
    w = rng.normal(0, 1, d)
    if not w.any():
        w[0] = 1.0
    b = float(rng.normal())
    x = rng.normal(0, 2, d)
    z = hyperplane_projection((w, b), x, p)
    assert abs(w @ z + b) <= 1e-9 * (1 + abs(b) + np.abs(w).sum())
    dist = point_hyperplane_distance((w, b), x, p)
    assert vector_norm(z - x, p) == pytest.approx(dist, abs=1e-9)


def test_projection_move_structure():
    w, b = np.array([3.0, -1.0, 0.0]), -2.0
    x = np.zeros(3)
    z1 = hyperplane_projection((w, b), x, 1.0)
    assert np.count_nonzero(z1 - x) == 1 and z1[0] != 0.0  # largest |w_i| only
    zinf = hyperplane_projection((w, b), x, math.inf)
    moved = zinf - x
    assert abs(moved[0]) == pytest.approx(abs(moved[1]))
    assert moved[2] == 0.0  # zero-weight coordinates stay put


def test_box_distance_frozen_clipped_example():
    # Unconstrained optimum sits outside the box; the constrained optimum is
    # pinned to the corner-adjacent face point (1, 0.5).
    w, b = np.array([1.0, 0.1]), -1.05
    x = np.zeros(2)
    res = box_constrained_distance((w, b), x, 2.0, Box.unit(2))
    assert res.tight and res.feasible
    assert res.distance == pytest.approx(1.1180339887498945, abs=1e-9)
    np.testing.assert_allclose(res.point, [1.0, 0.5], atol=1e-7)
    assert res.distance > point_hyperplane_distance((w, b), x, 2.0)


def test_box_distance_interior_matches_unconstrained():
    w, b = np.array([1.0, 0.0]), -0.4
    x = np.array([0.6, 0.5])
    for p in (2.0, math.inf):
        res = box_constrained_distance((w, b), x, p, Box.unit(2))
        assert res.distance == pytest.approx(0.2, abs=1e-10)
        np.testing.assert_allclose(res.point, [0.4, 0.5], atol=1e-8)


def test_box_distance_infeasible_plane():
    res = box_constrained_distance((np.array([1.0, 0.0]), 5.0), np.zeros(2),
                                   2.0, Box.unit(2))
    assert not res.feasible
    assert res.distance == math.inf and res.point is None


def test_box_distance_p1_fallback_is_lower_bound():
    w, b = np.array([1.0, 0.1]), -1.05
    res = box_constrained_distance((w, b), np.zeros(2), 1.0, Box.unit(2))
    assert not res.tight and res.point is None
    assert res.distance == pytest.approx(
        point_hyperplane_distance((w, b), np.zeros(2), 1.0))


@given(st.integers(0, 2 ** 31 - 1), st.sampled_from((2.0, math.inf)))
def test_box_distance_dominates_unconstrained_with_valid_witness(seed, p):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 8))
    w = rng.normal(0, 1, d)
    if not w.any():
        w[0] = 1.0
    b = float(rng.normal(0, 0.5))
    x = rng.uniform(0, 1, d)
    box = Box.unit(d)
    res = box_constrained_distance((w, b), x, p, box)
    d0 = point_hyperplane_distance((w, b), x, p)
    if not res.feasible:
        return
    assert res.distance >= d0 - 1e-12
    z = res.point
    assert box.contains(z, tol=1e-9)
    assert abs(w @ z + b) <= 1e-6 * (1 + np.abs(w).sum())
    assert vector_norm(z - x, p) <= res.distance + 1e-7


def test_min_over_planes_matches_exhaustive_and_counts_solves():
    rng = np.random.default_rng(11)
    x = rng.uniform(0.2, 0.8, 4)
    box = Box.unit(4)
    planes = [(rng.normal(0, 1, 4), float(rng.normal(0, 0.8))) for _ in range(30)]
    for p in (2.0, math.inf):
        lazy = min_box_distance_over_planes(planes, x, p, box)
        exhaustive = min(
            box_constrained_distance(pl, x, p, box).distance for pl in planes)
        assert lazy.distance == exhaustive
        assert lazy.box_solves <= len(planes)


def test_min_over_planes_lazy_skips_far_planes():
    x = np.array([0.5, 0.5])
    # one near plane, many far ones: only a prefix should be solved
    planes = [(np.array([1.0, 0.0]), -0.45)]
    planes += [(np.array([1.0, 0.0]), -0.55 - 0.02 * k) for k in range(1, 20)]
    res = min_box_distance_over_planes(planes, x, 2.0, Box.unit(2))
    assert res.index == 0
    assert res.distance == pytest.approx(0.05)
    assert res.box_solves < len(planes)


def test_min_over_planes_no_box_uses_projection():
    planes = [(np.array([0.0, 1.0]), -0.9), (np.array([1.0, 0.0]), -0.4)]
    res = min_box_distance_over_planes(planes, np.array([0.6, 0.5]), 2.0)
    assert res.index == 1 and res.box_solves == 0
    np.testing.assert_allclose(res.point, [0.4, 0.5], atol=1e-12)


def test_min_over_planes_error_cases():
    with pytest.raises(ValueError):
        min_box_distance_over_planes([(np.zeros(2), 1.0)], np.zeros(2), 2.0)
    with pytest.raises(AllInfeasibleError):
        min_box_distance_over_planes([(np.array([1.0, 0.0]), 9.0)],
                                     np.zeros(2), 2.0, Box.unit(2))

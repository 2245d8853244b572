import math

import numpy as np
import pytest

from regioncert import (
    Box,
    Network,
    NoAdversarialFoundError,
    certify_point,
    enumerate_patterns_oracle,
    grid_oracle,
    predict,
    random_network,
    vector_norm,
)
from regioncert.oracle import EXACT_WITHIN_TOL, GRID, PATTERN_ENUM, UPPER_ONLY


def test_grid_oracle_hand_value(hand_net, hand_x):
    res = grid_oracle(hand_net, hand_x, 2.0, 0.5, 200)
    assert res.method == GRID and res.guarantee == UPPER_ONLY
    assert res.value == pytest.approx(0.25, abs=1e-3)
    assert res.value >= 0.25 - 1e-9  # upper bound on the true minimum
    assert res.tol < 1e-3
    assert predict(hand_net, res.witness) != 0


def test_grid_oracle_is_prediction_relative(hand_net):
    # from a class-1 point the nearest class change sits at x1 = 0.35
    res = grid_oracle(hand_net, np.array([0.1, 0.5]), 2.0, 0.5, 150)
    assert predict(hand_net, np.array([0.1, 0.5])) == 1
    assert res.value == pytest.approx(0.25, abs=1e-3)
    assert predict(hand_net, res.witness) == 0


def test_grid_oracle_no_adversarial_in_radius(hand_net, hand_x):
    with pytest.raises(NoAdversarialFoundError):
        grid_oracle(hand_net, hand_x, 2.0, 0.1, 100)


def test_grid_oracle_linear_closed_form():
    # linear classifier: minimal perturbation is the decision-plane distance
    net = Network(weights=(np.array([[1.0, 2.0], [0.0, 0.0]]),),
                  biases=(np.array([-0.5, 0.0]),))
    x = np.array([0.5, 0.5])
    w = np.array([1.0, 2.0])
    b = -0.5
    for p in (2.0, math.inf, 1.0):
        q = {2.0: 2.0, math.inf: 1.0, 1.0: math.inf}[p]
        true = abs(w @ x + b) / vector_norm(w, q)
        res = grid_oracle(net, x, p, 1.5, 150)
        assert res.value == pytest.approx(true, abs=res.tol)


def test_grid_oracle_validates_preconditions(hand_net, hand_x):
    rng = np.random.default_rng(0)
    big = random_network(rng, 4, [3], 2)
    with pytest.raises(ValueError):
        grid_oracle(big, np.zeros(4), 2.0, 0.5, 10)  # d > 3
    with pytest.raises(ValueError):
        grid_oracle(hand_net, hand_x, 2.0, 0.5, 100000)  # too many cells
    with pytest.raises(ValueError):
        grid_oracle(hand_net, hand_x, 2.0, -1.0, 100)


def test_enum_oracle_hand_value(hand_net, hand_x):
    res = enumerate_patterns_oracle(hand_net, hand_x, 2.0)
    assert res.method == PATTERN_ENUM
    assert res.guarantee == EXACT_WITHIN_TOL and res.tol == 1e-5
    assert res.value == pytest.approx(0.25, abs=1e-6)
    np.testing.assert_allclose(res.witness, [0.35, 0.5], atol=1e-4)
    assert predict(hand_net, res.witness) != 0
    assert vector_norm(res.witness - hand_x, 2.0) == pytest.approx(
        res.value, abs=1e-6)


def test_enum_oracle_all_norms(hand_net, hand_x):
    for p in (1.0, math.inf):
        res = enumerate_patterns_oracle(hand_net, hand_x, p)
        assert res.value == pytest.approx(0.25, abs=1e-5)
        assert predict(hand_net, res.witness) != 0


def test_enum_oracle_respects_box(hand_net):
    x = np.array([0.9, 0.5])
    free = enumerate_patterns_oracle(hand_net, x, 2.0)
    boxed = enumerate_patterns_oracle(hand_net, x, 2.0, box=Box.unit(2))
    assert boxed.value >= free.value - 1e-9
    assert Box.unit(2).contains(boxed.witness, tol=1e-9)


def test_enum_oracle_size_cap():
    rng = np.random.default_rng(1)
    net = random_network(rng, 2, [8, 8], 2)  # 16 hidden units
    with pytest.raises(ValueError):
        enumerate_patterns_oracle(net, np.zeros(2), 2.0)


def test_enum_oracle_constant_classifier():
    net = Network(weights=(np.array([[1.0, 0.0]]), np.array([[1.0], [0.0]])),
                  biases=(np.array([0.5]), np.array([1.0, 0.0])))
    # logits (h + 1, 0) with h >= 0: class 0 everywhere
    with pytest.raises(NoAdversarialFoundError):
        enumerate_patterns_oracle(net, np.array([0.2, 0.2]), 2.0)


def test_oracles_agree_and_bound_certificates():
    rng = np.random.default_rng(5)
    done = 0
    while done < 8:
        net = random_network(rng, 2, [int(rng.integers(3, 6))], 2)
        x = rng.uniform(0.2, 0.8, 2)
        label = predict(net, x)
        try:
            enum = enumerate_patterns_oracle(net, x, 2.0)
        except NoAdversarialFoundError:
            continue
        if not math.isfinite(enum.value) or enum.value > 0.7 or enum.value < 1e-4:
            continue
        done += 1
        radius = enum.value * 1.5 + 0.05
        grid = grid_oracle(net, x, 2.0, radius, 120)
        # refinement recenters on the incumbent, which may sit on a
        # different boundary branch; only the first scan's cell diagonal
        # bounds the overshoot
        diagonal = math.sqrt(2.0) * 2.0 * radius / 119
        assert grid.value >= enum.value - enum.tol - 1e-9
        assert grid.value <= enum.value + diagonal + enum.tol
        cert = certify_point(net, x, label, 2.0)
        assert cert.lower_bound <= enum.value + 1e-9
        if cert.is_exact:
            assert cert.lower_bound == pytest.approx(enum.value, abs=1e-5)


def test_oracle_witness_distance_invariant():
    rng = np.random.default_rng(9)
    net = random_network(rng, 2, [4], 3)
    x = rng.uniform(0, 1, 2)
    res = enumerate_patterns_oracle(net, x, math.inf)
    assert res.value > 0.0
    assert vector_norm(res.witness - x, math.inf) <= res.value + 1e-6

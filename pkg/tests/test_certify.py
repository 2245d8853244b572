import math

import numpy as np
import pytest

from regioncert import (
    Box,
    CERTIFIED_LB,
    DEGENERATE,
    EXACT,
    MISCLASSIFIED,
    NeighborBudget,
    Network,
    certified_robust_error,
    certify_point,
    explore_neighbors,
    predict,
    random_network,
    region_distances,
)


def test_hand_point_exact(hand_net, hand_x):
    cert = certify_point(hand_net, hand_x, 0, 2.0)
    assert cert.status == EXACT and cert.is_exact
    assert cert.d_B == pytest.approx(0.3, abs=1e-12)
    assert cert.d_D == pytest.approx(0.25, abs=1e-12)
    assert cert.lower_bound == pytest.approx(0.25, abs=1e-12)
    np.testing.assert_allclose(cert.minimal_perturbation, [-0.25, 0.0], atol=1e-12)
    # pushing just past the witness flips the class
    z = hand_x + cert.minimal_perturbation * (1 + 1e-6)
    assert predict(hand_net, z) != 0


def test_hand_point_other_norms(hand_net, hand_x):
    for p in (1.0, math.inf):
        cert = certify_point(hand_net, hand_x, 0, p)
        assert cert.lower_bound == pytest.approx(0.25, abs=1e-12)
        assert cert.is_exact


def test_misclassified_point(hand_net):
    x = np.array([0.1, 0.5])  # logits (0, 0.1): class 1 wins
    cert = certify_point(hand_net, x, 0, 2.0)
    assert cert.status == MISCLASSIFIED
    assert cert.lower_bound == 0.0 and not cert.is_exact
    assert cert.predicted_class == 1


def test_degenerate_preactivation(hand_net):
    # second hidden unit sits exactly on its plane (x2 = 0.8) while the
    # prediction still matches the label
    cert = certify_point(hand_net, np.array([0.6, 0.8]), 0, 2.0)
    assert cert.status == DEGENERATE
    assert cert.lower_bound == 0.0


def test_misclassification_outranks_degeneracy(hand_net):
    # x1 = 0.3 zeroes the first unit AND flips the argmax to class 1
    cert = certify_point(hand_net, np.array([0.3, 0.5]), 0, 2.0)
    assert cert.status == MISCLASSIFIED
    assert cert.lower_bound == 0.0


def test_on_decision_boundary_is_degenerate():
    # binary-exact logit tie (2.0 vs 2.0) with a live decision normal
    net = Network(weights=(np.array([[1.0, 0.0]]), np.array([[2.0], [1.0]])),
                  biases=(np.array([0.5]), np.array([0.0, 1.0])))
    cert = certify_point(net, np.array([0.5, 0.7]), 0, 2.0)
    assert cert.status == DEGENERATE
    assert cert.lower_bound == 0.0


def test_region_distances_hand(hand_net, hand_x):
    rd = region_distances(hand_net, hand_x, 2.0)
    assert rd.d_B == pytest.approx(0.3, abs=1e-12)
    assert rd.d_D == pytest.approx(0.25, abs=1e-12)
    assert rd.predicted_class == 0
    np.testing.assert_allclose(rd.decision_point, [0.35, 0.5], atol=1e-12)


def test_budget_zero_gives_two_distance_bound(three_region_net):
    x = np.array([0.6, 0.5])
    cert = certify_point(three_region_net, x, 0, 2.0,
                         budget=NeighborBudget(max_regions=0))
    assert cert.status == CERTIFIED_LB
    assert cert.lower_bound == pytest.approx(0.3, abs=1e-12)  # d_B
    assert cert.d_D == pytest.approx(0.6, abs=1e-12)


def test_exploration_budget_sequence(three_region_net):
    x = np.array([0.6, 0.5])
    expected = {0: (0.3, False), 1: (0.4, False), 2: (0.45, True),
                3: (0.45, True), 5: (0.45, True)}
    for budget, (lb, exact) in expected.items():
        cert = certify_point(three_region_net, x, 0, 2.0,
                             budget=NeighborBudget(max_regions=budget))
        assert cert.lower_bound == pytest.approx(lb, abs=1e-9), budget
        assert cert.is_exact == exact, budget
    cert = certify_point(three_region_net, x, 0, 2.0,
                         budget=NeighborBudget(max_regions=2))
    np.testing.assert_allclose(x + cert.minimal_perturbation, [0.15, 0.5],
                               atol=1e-9)
    assert cert.regions_explored == 2
    assert cert.flips_skipped >= 1  # degenerate adjacencies must not eat budget


def test_exploration_monotone_in_budget_random_nets():
    rng = np.random.default_rng(123)
    checked = 0
    while checked < 40:
        net = random_network(rng, 2, [int(rng.integers(3, 7))], 2)
        x = rng.uniform(0, 1, 2)
        certs = [certify_point(net, x, predict(net, x), 2.0,
                               budget=NeighborBudget(max_regions=b))
                 for b in range(6)]
        if certs[0].status in (MISCLASSIFIED, DEGENERATE):
            continue
        checked += 1
        lbs = [c.lower_bound for c in certs]
        for a, b in zip(lbs, lbs[1:]):
            assert b >= a - 1e-12
        # once exact, stays exact with the same value
        for a, b in zip(certs, certs[1:]):
            if a.is_exact:
                assert b.is_exact and b.lower_bound == pytest.approx(
                    a.lower_bound, abs=1e-12)


def test_lower_bound_is_sound_by_sampling():
    rng = np.random.default_rng(7)
    tested = 0
    while tested < 30:
        net = random_network(rng, 3, [5], 3)
        x = rng.uniform(0, 1, 3)
        label = predict(net, x)
        cert = certify_point(net, x, label, 2.0)
        if cert.status in (MISCLASSIFIED, DEGENERATE) or cert.lower_bound == 0:
            continue
        if not math.isfinite(cert.lower_bound):
            continue
        tested += 1
        r = 0.999 * cert.lower_bound
        for _ in range(40):
            u = rng.normal(0, 1, 3)
            u /= np.linalg.norm(u)
            z = x + r * (rng.uniform() ** (1 / 3)) * u
            assert predict(net, z) == label


def test_exact_witness_flips_class():
    rng = np.random.default_rng(99)
    found = 0
    while found < 20:
        net = random_network(rng, 2, [4], 2)
        x = rng.uniform(0, 1, 2)
        label = predict(net, x)
        cert = certify_point(net, x, label, 2.0)
        if not cert.is_exact:
            continue
        found += 1
        delta = cert.minimal_perturbation
        assert np.linalg.norm(delta) == pytest.approx(cert.lower_bound, rel=1e-9)
        assert predict(net, x + delta * (1 + 1e-7)) != label


def test_box_certification_bounds_dominate_unboxed(hand_net, hand_x):
    free = certify_point(hand_net, hand_x, 0, 2.0)
    boxed = certify_point(hand_net, hand_x, 0, 2.0, box=Box.unit(2))
    # restricting the adversary can only push the minimum up
    assert boxed.lower_bound >= free.lower_bound - 1e-12
    assert boxed.used_box and not free.used_box


def test_box_can_remove_adversarials_entirely():
    # decision boundary outside the box: certified bound becomes infinite
    net = Network(weights=(np.array([[1.0, 0.0]]), np.array([[1.0], [0.0]])),
                  biases=(np.array([3.0]), np.array([0.0, 0.0])))
    x = np.array([0.5, 0.5])
    assert predict(net, x) == 0
    cert = certify_point(net, x, 0, 2.0, box=Box.unit(2))
    assert cert.status == CERTIFIED_LB
    assert cert.lower_bound == math.inf


def test_explore_neighbors_result_shape(three_region_net):
    res = explore_neighbors(three_region_net, np.array([0.6, 0.5]), 2.0,
                            budget=NeighborBudget(max_regions=2))
    assert res.exact
    assert res.lower_bound == pytest.approx(0.45, abs=1e-9)
    assert res.upper_bound == pytest.approx(0.45, abs=1e-9)
    assert res.regions_explored == 2


def test_certified_robust_error_thresholds(hand_net, hand_x):
    X = np.array([hand_x])
    y = np.array([0])
    # exact minimal perturbation is 0.25
    assert certified_robust_error(hand_net, X, y, 0.2, 2.0) == 0.0
    assert certified_robust_error(hand_net, X, y, 0.3, 2.0) == 1.0
    assert certified_robust_error(hand_net, X, np.array([1]), 0.01, 2.0) == 1.0


def test_neighbor_budget_validation():
    with pytest.raises(ValueError):
        NeighborBudget(max_regions=-1)
    with pytest.raises(ValueError):
        NeighborBudget(max_regions=65)


def test_certificate_point_index_passthrough(hand_net, hand_x):
    cert = certify_point(hand_net, hand_x, 0, 2.0, point_index=17)
    assert cert.point_index == 17


def test_exploration_sound_when_projection_misses_face():
    # Adversarial region whose entry face is far from the raw plane
    # projection of x: the witness must be pulled back onto the face or the
    # face's value capped, otherwise the reported bound overshoots the true
    # minimum (0.45862924872610783, confirmed by pattern enumeration).
    net = Network(
        weights=(
            np.array([[-1.3219811271491677, 0.3902540846666899],
                      [0.2542488378433782, 0.5106273950275195],
                      [-0.23385863792830738, 0.014163345469503952]]),
            np.array([[0.06162805953902427, 0.23377657256671736, -0.29343402480825587],
                      [1.6388953129146988, -0.16725149156839875, 0.10096638290983061]]),
        ),
        biases=(
            np.array([0.06637366211648048, -0.07501283396609795, 0.056648755412220565]),
            np.array([-0.0016427462012196291, -0.03599114965888359]),
        ),
    )
    x = np.array([0.6510263031708633, 0.716884642674083])
    true_min = 0.45862924872610783
    for budget in range(0, 13):
        cert = certify_point(net, x, 0, 2.0, budget=NeighborBudget(budget))
        assert cert.lower_bound <= true_min + 1e-9
    cert = certify_point(net, x, 0, 2.0, budget=NeighborBudget(12))
    assert cert.is_exact
    assert cert.lower_bound == pytest.approx(true_min, abs=1e-9)

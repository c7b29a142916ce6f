import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emvgc.exceptions import LengthMismatchError, NonSquareError
from emvgc.metrics import accuracy, contingency, evaluate, fscore, hungarian, nmi

from oracles import accuracy_bruteforce, assignment_bruteforce, fscore_pairs


# --- hungarian ----------------------------------------------------------------------

def test_hungarian_identity():
    cost = 1.0 - np.eye(4)
    perm = hungarian(cost)
    np.testing.assert_array_equal(perm, np.arange(4))
    assert cost[np.arange(4), perm].sum() == 0.0


def test_hungarian_swap():
    cost = np.array([[2.0, 1.0], [1.0, 2.0]])
    perm = hungarian(cost)
    np.testing.assert_array_equal(perm, [1, 0])
    assert cost[[0, 1], perm].sum() == 2.0


@pytest.mark.parametrize("size", range(1, 8))
def test_hungarian_matches_bruteforce(size):
    rng = np.random.default_rng(size)
    for _ in range(5 if size == 7 else 20):
        cost = rng.integers(-5, 10, (size, size)).astype(float)
        best, _ = assignment_bruteforce(cost)
        perm = hungarian(cost)
        assert sorted(perm) == list(range(size))
        assert cost[np.arange(size), perm].sum() == best


def test_hungarian_non_square():
    with pytest.raises(NonSquareError):
        hungarian(np.zeros((2, 3)))


# --- accuracy -----------------------------------------------------------------------

def test_accuracy_examples():
    truth = np.array([0, 0, 1, 1, 2, 2])
    assert accuracy(truth, truth) == 1.0
    assert accuracy(np.array([5, 5, 3, 3, 9, 9]), truth) == 1.0
    assert accuracy([0, 1, 1, 1], [0, 0, 1, 1]) == 0.75
    assert accuracy_bruteforce([0, 1, 1, 1], [0, 0, 1, 1]) == 0.75


def test_accuracy_unequal_cluster_counts():
    assert accuracy([0, 0, 0, 0], [0, 0, 1, 1]) == 0.5
    assert accuracy([0, 1, 2, 3], [0, 0, 1, 1]) == 0.5


def test_accuracy_length_mismatch():
    with pytest.raises(LengthMismatchError):
        accuracy([0, 1], [0, 1, 1])


@pytest.mark.parametrize("seed", range(30))
def test_accuracy_matches_bruteforce(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 30))
    pred = rng.integers(0, rng.integers(1, 5), n)
    truth = rng.integers(0, rng.integers(1, 5), n)
    assert accuracy(pred, truth) == pytest.approx(accuracy_bruteforce(pred, truth), abs=1e-15)


# --- NMI ----------------------------------------------------------------------------

def test_nmi_examples():
    assert nmi([0, 0, 1, 1, 2], [0, 0, 1, 1, 2]) == 1.0
    assert nmi([0, 1, 0, 1], [0, 0, 1, 1]) == 0.0
    assert nmi([0, 0, 0], [1, 1, 1]) == 1.0
    assert nmi([0, 0, 0, 0], [0, 0, 1, 1]) == 0.0


def test_nmi_hand_value():
    # truth (0,0,1,1), pred (0,0,0,1): MI = 1.5 ln 2 - 0.75 ln 3 nats,
    # H(truth) = ln 2, H(pred) = 2 ln 2 - 0.75 ln 3
    mi = 1.5 * np.log(2) - 0.75 * np.log(3)
    hp = 2 * np.log(2) - 0.75 * np.log(3)
    want = mi / np.sqrt(np.log(2) * hp)
    assert nmi([0, 0, 0, 1], [0, 0, 1, 1]) == pytest.approx(want, rel=1e-14)


def test_nmi_independent_partitions_near_zero():
    rng = np.random.default_rng(0)
    assert nmi(rng.integers(0, 5, 10000), rng.integers(0, 5, 10000)) < 0.05


def test_nmi_matches_sklearn():
    sk = pytest.importorskip("sklearn.metrics")
    rng = np.random.default_rng(1)
    for _ in range(50):
        a = rng.integers(0, 6, 200)
        b = rng.integers(0, 4, 200)
        b[:100] = a[:100] % 4
        ref = sk.normalized_mutual_info_score(b, a, average_method="geometric")
        assert nmi(a, b) == pytest.approx(ref, abs=1e-12)


# --- F-score ------------------------------------------------------------------------

def test_fscore_examples():
    assert fscore([1, 1, 2, 2], [0, 0, 1, 1]) == 1.0
    assert fscore([0, 1, 2, 3], [0, 0, 1, 1]) == 0.0
    assert fscore([0, 0, 0, 1], [0, 0, 1, 1]) == pytest.approx(0.4, abs=1e-15)
    assert fscore_pairs([0, 0, 0, 1], [0, 0, 1, 1]) == pytest.approx(0.4, abs=1e-15)


def test_fscore_all_singletons_both_sides():
    assert fscore([0, 1, 2], [2, 1, 0]) == 1.0


@pytest.mark.parametrize("seed", range(30))
def test_fscore_matches_pair_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 40))
    pred = rng.integers(0, 4, n)
    truth = rng.integers(0, 3, n)
    assert fscore(pred, truth) == pytest.approx(fscore_pairs(pred, truth), abs=1e-14)


# --- shared properties --------------------------------------------------------------

labelings = st.lists(st.integers(0, 5), min_size=2, max_size=40)


@settings(max_examples=300, deadline=None)
@given(labelings, st.randoms(use_true_random=False))
def test_metrics_bounded_and_relabeling_invariant(pred, rnd):
    pred = np.array(pred)
    truth = np.array([rnd.randrange(4) for _ in pred])
    base = evaluate(pred, truth)
    for v in base.values():
        assert 0.0 <= v <= 1.0
    perm_p = list(range(6))
    rnd.shuffle(perm_p)
    perm_t = list(range(4))
    rnd.shuffle(perm_t)
    moved = evaluate(np.array(perm_p)[pred], np.array(perm_t)[truth])
    for key in base:
        assert moved[key] == pytest.approx(base[key], abs=1e-12)
    assert nmi(pred, truth) == pytest.approx(nmi(truth, pred), abs=1e-12)
    same = evaluate(pred, pred)
    assert same == {"acc": 1.0, "nmi": 1.0, "fscore": 1.0}


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 5), st.integers(2, 30), st.randoms(use_true_random=False))
def test_accuracy_symmetric_when_counts_match(k, n, rnd):
    n = max(n, k)
    a = np.array(list(range(k)) + [rnd.randrange(k) for _ in range(n - k)])
    b = np.array(list(range(k)) + [rnd.randrange(k) for _ in range(n - k)])
    assert accuracy(a, b) == pytest.approx(accuracy(b, a), abs=1e-15)


def test_contingency_sums_to_n():
    t = contingency([0, 1, 1, 2], [5, 5, 6, 6])
    assert t.counts.sum() == t.n == 4
    assert t.counts.shape == (3, 2)

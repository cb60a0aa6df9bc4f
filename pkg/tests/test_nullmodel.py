import json
import random
from collections import Counter
from math import comb

import pytest
from scipy.stats import chisquare

from parsetopo.contacts import ContactMap, build_pair_sets
from parsetopo.errors import EmptyPairClassError, ParsetopoError
from parsetopo.measures import evaluate
from parsetopo.nullmodel import baseline_distribution, random_binary_tree
from parsetopo.tree import serialize_bracket

from oracles import random_contacts


def catalan(n):
    return comb(2 * n, n) // (n + 1)


def all_shapes(n):
    """Every strictly binary shape with n leaves, in bracket notation."""
    if n == 1:
        return ["x"]
    out = []
    for k in range(1, n):
        for left in all_shapes(k):
            for right in all_shapes(n - k):
                out.append(f"(N {left} {right})")
    return out


def test_single_leaf():
    t = random_binary_tree(1, seed=0)
    assert t.n_leaves == 1 and t.n_nodes == 1


def test_zero_leaves_rejected():
    with pytest.raises(ParsetopoError):
        random_binary_tree(0, seed=0)


@pytest.mark.parametrize("n", [2, 5, 9, 21])
def test_strictly_binary(n):
    t = random_binary_tree(n, seed=n)
    assert t.n_leaves == n
    assert t.n_nodes == 2 * n - 1
    assert all(len(ch) in (0, 2) for ch in t.children)


def test_seed_determinism():
    a = serialize_bracket(random_binary_tree(15, seed=42))
    assert a == serialize_bracket(random_binary_tree(15, seed=42))
    assert a != serialize_bracket(random_binary_tree(15, seed=43))


def test_shape_enumeration_matches_catalan():
    for n in range(1, 7):
        assert len(set(all_shapes(n))) == catalan(n - 1)


@pytest.mark.parametrize("n, lo, hi", [(3, 0.48, 0.52), (4, 0.18, 0.22)])
def test_shape_frequency_bands(n, lo, hi):
    draws = 10_000
    counts = Counter(serialize_bracket(random_binary_tree(n, seed=s)) for s in range(draws))
    assert set(counts) == set(all_shapes(n))
    for shape in all_shapes(n):
        assert lo <= counts[shape] / draws <= hi


@pytest.mark.parametrize("n", [3, 4, 5])
def test_shape_uniformity_chi_square(n):
    draws = 10_000
    counts = Counter(serialize_bracket(random_binary_tree(n, seed=s)) for s in range(draws))
    shapes = all_shapes(n)
    assert len(shapes) == catalan(n - 1)
    observed = [counts[s] for s in shapes]
    assert sum(observed) == draws
    assert chisquare(observed).pvalue > 0.001


def _map(n, seed):
    rng = random.Random(seed)
    while True:
        cmap = ContactMap(n, frozenset(random_contacts(rng, n, 0.3)))
        ps = build_pair_sets(cmap, 2)
        if ps.pc and ps.pnc:
            return cmap


def test_single_sample_equals_evaluation():
    cmap = _map(10, 1)
    summary = baseline_distribution(cmap, L=2, t=5, n_samples=1, seed=3)
    rep = evaluate(random_binary_tree(10, "3/0"), cmap, L=2, t=5)
    assert summary.n_samples == 1
    assert summary.s1_mean == rep.s1 and summary.r1_mean == rep.r1 and summary.d1_mean == rep.d1
    assert summary.s1_std == summary.r1_std == summary.d1_std == 0.0


def test_empty_contact_class_propagates():
    cmap = ContactMap(10, frozenset({(0, 1)}))
    with pytest.raises(EmptyPairClassError) as info:
        baseline_distribution(cmap, L=5, t=5, n_samples=10, seed=0)
    assert info.value.which == "contact"


def test_n_samples_must_be_positive():
    with pytest.raises(ParsetopoError):
        baseline_distribution(_map(8, 0), L=2, t=5, n_samples=0)


def test_reproducible_serialization():
    cmap = _map(12, 5)
    a = json.dumps(baseline_distribution(cmap, 3, 6, 200, seed=9).to_dict())
    b = json.dumps(baseline_distribution(cmap, 3, 6, 200, seed=9).to_dict())
    assert a == b
    assert a != json.dumps(baseline_distribution(cmap, 3, 6, 200, seed=10).to_dict())


def test_null_centering_on_random_maps():
    # random maps and random trees jointly: s1 centres on 0, r1 on 1
    s1s, r1s = [], []
    for k in range(40):
        cmap = _map(15, 100 + k)
        s = baseline_distribution(cmap, 2, 5, 50, seed=k)
        s1s.append(s.s1_mean)
        r1s.append(s.r1_mean)
    assert abs(sum(s1s) / len(s1s)) < 0.05
    assert abs(sum(r1s) / len(r1s) - 1.0) < 0.1

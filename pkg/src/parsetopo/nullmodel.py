"""
Random-tree baselines.

Trees are drawn uniformly over strictly binary shapes with ``n`` ordered
leaves using Remy's growth procedure: starting from a single leaf, pick one
of the ``2k - 1`` existing nodes uniformly, splice a new internal node above
it and hang a fresh leaf on a uniformly chosen side.  Every leaf-labelled
tree with ``k`` leaves is reached in exactly one way, and every shape carries
the same number of labellings, so shapes come out Catalan-uniform.

Randomness comes from :class:`random.Random` seeded with an int (or, per
sample, with the string ``"<seed>/<index>"``), whose stream is stable across
Python releases.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .contacts import ContactMap, build_pair_sets
from .errors import EmptyPairClassError, ParsetopoError, UndefinedMeasureError
from .measures import d1, mean_class_distances, r1, s1
from .tree import ParseTree, leaf_distance_matrix

__all__ = ["INTERNAL_LABEL", "LEAF_LABEL", "random_binary_tree", "BaselineSummary", "baseline_distribution"]

INTERNAL_LABEL = "N"
LEAF_LABEL = "x"


def _remy(n_leaves: int, rng: random.Random) -> ParseTree:
    # node 0 is the first leaf; ids grow as nodes are added
    left = [-1]
    right = [-1]
    parent = [-1]
    for _ in range(n_leaves - 1):
        target = rng.randrange(len(parent))
        inner = len(parent)
        leaf = inner + 1
        left.extend((-1, -1))
        right.extend((-1, -1))
        parent.extend((parent[target], inner))
        up = parent[target]
        if up != -1:
            if left[up] == target:
                left[up] = inner
            else:
                right[up] = inner
        parent[target] = inner
        if rng.random() < 0.5:
            left[inner], right[inner] = target, leaf
        else:
            left[inner], right[inner] = leaf, target

    m = len(parent)
    children = [() if left[u] == -1 else (left[u], right[u]) for u in range(m)]
    labels = [LEAF_LABEL if not ch else INTERNAL_LABEL for ch in children]
    return ParseTree(labels, children)


def random_binary_tree(n_leaves: int, seed=0) -> ParseTree:
    """Uniformly random strictly binary tree with ``n_leaves`` ordered leaves."""
    if n_leaves < 1:
        raise ParsetopoError("n_leaves must be >= 1")
    return _remy(n_leaves, random.Random(seed))


@dataclass(frozen=True)
class BaselineSummary:
    n_samples: int
    n_skipped: int
    s1_mean: float
    s1_std: float
    r1_mean: float
    r1_std: float
    d1_mean: float
    d1_std: float
    seed: int
    n_leaves: int
    L: int
    t: float

    def to_dict(self) -> dict:
        return {
            "record": "baseline",
            "n_samples": self.n_samples,
            "n_skipped": self.n_skipped,
            "seed": self.seed,
            "n": self.n_leaves,
            "L": self.L,
            "t": self.t,
            "s1_mean": self.s1_mean,
            "s1_std": self.s1_std,
            "r1_mean": self.r1_mean,
            "r1_std": self.r1_std,
            "d1_mean": self.d1_mean,
            "d1_std": self.d1_std,
        }


def _mean_std(values):
    mean = math.fsum(values) / len(values)
    var = math.fsum((v - mean) ** 2 for v in values) / len(values)
    return mean, math.sqrt(var)


def baseline_distribution(
    cmap: ContactMap, L: int, t: float, n_samples: int, seed: int = 0
) -> BaselineSummary:
    """Mean and population std of s1, r1, d1 over random trees against ``cmap``.

    Sample ``k`` uses a tree seeded by ``f"{seed}/{k}"``, so the summary does
    not depend on evaluation order.  Samples with an undefined measure are
    skipped and counted.
    """
    if n_samples < 1:
        raise ParsetopoError("n_samples must be >= 1")
    pairs = build_pair_sets(cmap, L)
    if not pairs.pc:
        raise EmptyPairClassError("contact")
    if not pairs.pnc:
        raise EmptyPairClassError("non-contact")

    s1s, r1s, d1s = [], [], []
    skipped = 0
    for k in range(n_samples):
        tree = random_binary_tree(cmap.n_residues, f"{seed}/{k}")
        dmat = leaf_distance_matrix(tree)
        try:
            d_c, d_nc = mean_class_distances(dmat, pairs)
            vals = (s1(d_c, d_nc), r1(d_c, d_nc), d1(dmat, pairs, t))
        except UndefinedMeasureError:
            skipped += 1
            continue
        s1s.append(vals[0])
        r1s.append(vals[1])
        d1s.append(vals[2])
    if not s1s:
        raise UndefinedMeasureError("every sampled tree gave undefined measures")
    s1m, s1sd = _mean_std(s1s)
    r1m, r1sd = _mean_std(r1s)
    d1m, d1sd = _mean_std(d1s)
    return BaselineSummary(
        n_samples=len(s1s),
        n_skipped=skipped,
        s1_mean=s1m,
        s1_std=s1sd,
        r1_mean=r1m,
        r1_std=r1sd,
        d1_mean=d1m,
        d1_std=d1sd,
        seed=seed,
        n_leaves=cmap.n_residues,
        L=L,
        t=float(t),
    )

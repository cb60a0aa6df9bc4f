"""
Topological agreement between a parse tree and a contact map.

For a fixed sequence separation ``L`` the admissible residue pairs split into
contacts (``pc``) and non-contacts (``pnc``).  With ``d(i, j)`` the tree path
length between leaves ``i`` and ``j``:

* ``d_c`` / ``d_nc`` are the mean path lengths over each class,
* ``s1 = (d_nc - d_c) / max(d_c, d_nc)`` in [-1, 1],
* ``r1 = d_nc / d_c`` in (0, inf),
* ``d1`` is the Dice overlap between the contacts and the admissible pairs
  whose path length is below a threshold ``t``.

Higher is better for all three.  Local scores repeat ``s1``/``r1`` over the
pairs that involve one residue; weighted scores replace edge counts by
``-ln`` of the product of edge weights along the path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .contacts import ContactMap, PairSets, build_pair_sets
from .errors import EmptyPairClassError, ParsetopoError, UndefinedMeasureError
from .tree import ParseTree, leaf_distance_matrix, weighted_leaf_distance_matrix

__all__ = [
    "LocalScore",
    "WeightedScores",
    "TopologyReport",
    "ClassificationMetrics",
    "mean_class_distances",
    "s1",
    "r1",
    "d1",
    "local_measures",
    "weighted_measures",
    "evaluate",
    "classification_metrics",
    "best_threshold",
    "TSV_COLUMNS",
]


def _index(pairs) -> Tuple[np.ndarray, np.ndarray]:
    ordered = sorted(pairs)
    if not ordered:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    arr = np.asarray(ordered, dtype=np.int64)
    return arr[:, 0], arr[:, 1]


def _check_dim(dmat: np.ndarray, pairs: PairSets) -> np.ndarray:
    dmat = np.asarray(dmat)
    if dmat.shape != (pairs.n_residues, pairs.n_residues):
        raise ParsetopoError(
            f"distance matrix shape {dmat.shape} does not match "
            f"{pairs.n_residues} residues"
        )
    return dmat


def _mean(dmat: np.ndarray, pairs) -> float:
    i, j = _index(pairs)
    return math.fsum(float(x) for x in dmat[i, j]) / len(i)


def mean_class_distances(dmat, pairs: PairSets) -> Tuple[float, float]:
    """Mean path length over the contact and non-contact classes."""
    dmat = _check_dim(dmat, pairs)
    if not pairs.pc:
        raise EmptyPairClassError("contact")
    if not pairs.pnc:
        raise EmptyPairClassError("non-contact")
    return _mean(dmat, pairs.pc), _mean(dmat, pairs.pnc)


def s1(d_c: float, d_nc: float) -> float:
    top = max(d_c, d_nc)
    if top <= 0:
        raise UndefinedMeasureError("s1 undefined: both mean distances are zero")
    return (d_nc - d_c) / top


def r1(d_c: float, d_nc: float) -> float:
    if d_c <= 0:
        raise UndefinedMeasureError("r1 undefined: mean contact distance is zero")
    return d_nc / d_c


def close_pairs(dmat, pairs: PairSets, t: float) -> frozenset:
    """Admissible pairs whose path length is strictly below ``t``."""
    dmat = _check_dim(dmat, pairs)
    return frozenset(p for p in pairs.admissible if dmat[p] < t)


def d1(dmat, pairs: PairSets, t: float) -> float:
    """Dice coefficient between the close pairs and the contact class."""
    close = close_pairs(dmat, pairs, t)
    denom = len(close) + len(pairs.pc)
    if denom == 0:
        raise UndefinedMeasureError("d1 undefined: no close pairs and no contacts")
    return 2.0 * len(close & pairs.pc) / denom


@dataclass(frozen=True)
class LocalScore:
    """Per-residue scores; ``s1``/``r1`` are ``None`` when undefined."""

    residue: int
    s1: Optional[float]
    r1: Optional[float]
    n_pc: int
    n_pnc: int

    @property
    def defined(self) -> bool:
        return self.s1 is not None


def local_measures(dmat, pairs: PairSets, residue: int) -> LocalScore:
    """s1/r1 restricted to the pairs that involve ``residue``."""
    dmat = _check_dim(dmat, pairs)
    if not 0 <= residue < pairs.n_residues:
        raise IndexError(f"residue {residue} out of range")
    pc = [p for p in pairs.pc if residue in p]
    pnc = [p for p in pairs.pnc if residue in p]
    if not pc or not pnc:
        return LocalScore(residue, None, None, len(pc), len(pnc))
    d_c, d_nc = _mean(dmat, pc), _mean(dmat, pnc)
    try:
        return LocalScore(residue, s1(d_c, d_nc), r1(d_c, d_nc), len(pc), len(pnc))
    except UndefinedMeasureError:
        return LocalScore(residue, None, None, len(pc), len(pnc))


@dataclass(frozen=True)
class WeightedScores:
    s1: float
    r1: float
    d_c: float
    d_nc: float


def weighted_measures(tree: ParseTree, pairs: PairSets) -> WeightedScores:
    """s1/r1 with ``-ln`` edge-weight path lengths in place of edge counts."""
    if not tree.is_weighted:
        raise ParsetopoError("weighted measures need a weighted tree")
    wmat = weighted_leaf_distance_matrix(tree)
    d_c, d_nc = mean_class_distances(wmat, pairs)
    return WeightedScores(s1(d_c, d_nc), r1(d_c, d_nc), d_c, d_nc)


# -- reports ---------------------------------------------------------------

TSV_COLUMNS = (
    "record", "tree", "map", "n", "L", "t",
    "d_c", "d_nc", "s1", "r1", "d1",
    "s1_w", "r1_w", "d_c_w", "d_nc_w",
    "local", "warnings",
)


@dataclass
class TopologyReport:
    d_c: float
    d_nc: float
    s1: float
    r1: float
    d1: float
    t: float
    L: int
    n: int
    local: List[LocalScore]
    weighted: Optional[WeightedScores] = None
    warnings: List[str] = field(default_factory=list)
    tree_id: str = ""
    map_id: str = ""

    def to_dict(self) -> dict:
        w = self.weighted
        return {
            "record": "report",
            "tree": self.tree_id,
            "map": self.map_id,
            "n": self.n,
            "L": self.L,
            "t": self.t,
            "d_c": self.d_c,
            "d_nc": self.d_nc,
            "s1": self.s1,
            "r1": self.r1,
            "d1": self.d1,
            "local": [
                {"residue": s.residue, "s1": s.s1, "r1": s.r1, "n_pc": s.n_pc, "n_pnc": s.n_pnc}
                for s in self.local
            ],
            "weighted": {}
            if w is None
            else {"s1": w.s1, "r1": w.r1, "d_c": w.d_c, "d_nc": w.d_nc},
            "warnings": list(self.warnings),
        }

    def to_row(self) -> dict:
        """Flat record keyed by :data:`TSV_COLUMNS`."""
        d = self.to_dict()
        w = d.pop("weighted")
        for key in ("s1", "r1", "d_c", "d_nc"):
            d[f"{key}_w"] = w.get(key)
        d["local"] = ";".join(
            f"{s['residue']}:{_fmt(s['s1'])}:{_fmt(s['r1'])}:{s['n_pc']}:{s['n_pnc']}"
            for s in d["local"]
        )
        d["warnings"] = "; ".join(d["warnings"])
        return {k: d[k] for k in TSV_COLUMNS}


def _fmt(x) -> str:
    return "" if x is None else repr(x)


def evaluate(
    tree: ParseTree,
    cmap: ContactMap,
    L: int,
    t: float,
    weighted: Optional[bool] = None,
    tree_id: str = "",
    map_id: str = "",
) -> TopologyReport:
    """Full report for one (tree, contact map, L, t) combination.

    ``weighted=None`` computes the weighted block exactly when the tree
    carries weights; ``True`` demands it and ``False`` skips it.
    """
    if tree.n_leaves != cmap.n_residues:
        raise ParsetopoError(
            f"tree has {tree.n_leaves} leaves but the map has "
            f"{cmap.n_residues} residues"
        )
    if weighted and not tree.is_weighted:
        raise ParsetopoError("weighted measures requested for an unweighted tree")
    pairs = build_pair_sets(cmap, L)
    dmat = leaf_distance_matrix(tree)
    d_c, d_nc = mean_class_distances(dmat, pairs)
    warnings = []

    local = [local_measures(dmat, pairs, i) for i in range(pairs.n_residues)]
    undefined = [s.residue for s in local if not s.defined]
    if undefined:
        warnings.append(
            "local measures undefined for residues " + ",".join(map(str, undefined))
        )
    if cmap.excluded:
        warnings.append(
            "residues excluded from the map: " + ",".join(map(str, sorted(cmap.excluded)))
        )

    wscores = None
    if weighted is None:
        weighted = tree.is_weighted
    if weighted:
        try:
            wscores = weighted_measures(tree, pairs)
        except UndefinedMeasureError as exc:
            warnings.append(f"weighted measures undefined: {exc}")

    return TopologyReport(
        d_c=d_c,
        d_nc=d_nc,
        s1=s1(d_c, d_nc),
        r1=r1(d_c, d_nc),
        d1=d1(dmat, pairs, t),
        t=float(t),
        L=L,
        n=pairs.n_residues,
        local=local,
        weighted=wscores,
        warnings=warnings,
        tree_id=tree_id,
        map_id=map_id or cmap.source.origin,
    )


# -- classification --------------------------------------------------------


@dataclass(frozen=True)
class ClassificationMetrics:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int
    threshold: float

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
            "threshold": self.threshold,
        }


def classification_metrics(
    scores: Iterable[Tuple[float, bool]], threshold: float
) -> ClassificationMetrics:
    """Precision, recall and F1 with positive prediction iff ``score >= threshold``.

    Precision is reported as 0 when nothing is predicted positive, and F1 is 0
    when precision + recall is 0.
    """
    scores = list(scores)
    if not scores:
        raise ParsetopoError("no scores to classify")
    if not any(label for _, label in scores):
        raise ParsetopoError("classification needs at least one positive label")
    tp = fp = fn = tn = 0
    for score, label in scores:
        predicted = score >= threshold
        if predicted and label:
            tp += 1
        elif predicted:
            fp += 1
        elif label:
            fn += 1
        else:
            tn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return ClassificationMetrics(precision, recall, f1, tp, fp, fn, tn, threshold)


def best_threshold(scores: Sequence[Tuple[float, bool]]) -> ClassificationMetrics:
    """Metrics at the observed finite score maximizing F1 (highest on ties)."""
    candidates = sorted({s for s, _ in scores if math.isfinite(s)}, reverse=True)
    if not candidates:
        raise ParsetopoError("no finite scores to sweep")
    best = None
    for thr in candidates:
        m = classification_metrics(scores, thr)
        if best is None or m.f1 > best.f1:
            best = m
    return best

"""
Ordered parse trees over sequence positions.

A :class:`ParseTree` is an immutable rooted ordered tree whose leaves, read
left to right, correspond to sequence positions 0..n-1.  Non-root edges may
carry a weight in (0, 1] (the probability of the grammar rule that produced
the edge).

Leaf-to-leaf path lengths are answered from an Euler tour of the tree with a
sparse-table range-minimum structure, so a single pair costs O(1) after an
O(m log m) preprocessing pass and the full leaf matrix costs O(n^2).

Bracket notation
----------------
::

    TREE   := '(' LABEL ( ' ' TREE )* ')' | LABEL
    LABEL  := name | name ':' WEIGHT        (weights on non-root nodes only)

Example: ``(R (A:0.5 a:0.6 b:0.4) c:0.5)``.

Weighted distance
-----------------
The weighted path length between two leaves is the *negated* natural log of
the product of edge weights on the path, i.e. ``sum(-ln w)`` over those edges.
It is nonnegative and additive, so it can stand in for the edge count in
every measure.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .errors import BracketSyntaxError, ParsetopoError

__all__ = [
    "ParseTree",
    "parse_bracket",
    "serialize_bracket",
    "read_tree_text",
    "read_tree_file",
    "leaf_distance",
    "leaf_distance_matrix",
    "weighted_leaf_distance",
    "weighted_leaf_distance_matrix",
]

_FORBIDDEN_LABEL_CHARS = frozenset("() \t\r\n\f\v:")


class ParseTree:
    """
    Immutable ordered rooted tree.

    Parameters
    ----------
    labels : sequence of str
        Label of each node, indexed by node id.
    children : sequence of sequence of int
        Ordered child ids of each node (empty for leaves).
    weights : sequence of float or None, optional
        Edge weight from each node to its parent.  The root's entry must be
        ``None``; every other entry must lie in (0, 1].  Pass ``None`` (the
        default) for an unweighted tree.

    Node ids are arbitrary integers 0..m-1; the root is the unique node that
    is nobody's child.  Leaf rank k is the k-th leaf met in a left-to-right
    depth-first traversal.
    """

    __slots__ = (
        "_labels",
        "_children",
        "_parent",
        "_weights",
        "_root",
        "_leaf_order",
        "_depth",
        "_cost_depth",
        "_first",
        "_euler",
        "_euler_depth",
        "_sparse",
    )

    def __init__(
        self,
        labels: Sequence[str],
        children: Sequence[Sequence[int]],
        weights: Optional[Sequence[Optional[float]]] = None,
    ):
        m = len(labels)
        if m == 0:
            raise ParsetopoError("a tree needs at least one node")
        if len(children) != m:
            raise ParsetopoError("labels and children must have equal length")
        labels = tuple(str(x) for x in labels)
        for lab in labels:
            if not lab or _FORBIDDEN_LABEL_CHARS.intersection(lab):
                raise ParsetopoError(f"invalid node label {lab!r}")
        children = tuple(tuple(int(c) for c in ch) for ch in children)

        parent = [-1] * m
        for u, ch in enumerate(children):
            for c in ch:
                if not 0 <= c < m:
                    raise ParsetopoError(f"child id {c} out of range")
                if c == u or parent[c] != -1:
                    raise ParsetopoError(f"node {c} has more than one parent")
                parent[c] = u
        roots = [u for u in range(m) if parent[u] == -1]
        if len(roots) != 1:
            raise ParsetopoError(f"expected exactly one root, found {len(roots)}")
        root = roots[0]

        if weights is not None:
            if len(weights) != m:
                raise ParsetopoError("weights must have one entry per node")
            clean = []
            for u, w in enumerate(weights):
                if u == root:
                    if w is not None:
                        raise ParsetopoError("the root edge cannot carry a weight")
                    clean.append(None)
                    continue
                if w is None:
                    raise ParsetopoError(
                        "weights present on some but not all non-root edges"
                    )
                w = float(w)
                if not (0.0 < w <= 1.0):
                    raise ParsetopoError(f"edge weight {w!r} outside (0, 1]")
                clean.append(w)
            weights = tuple(clean)

        # Iterative DFS: depth, leaf order and Euler tour in one pass.
        depth = [0] * m
        cost = [0.0] * m
        leaf_order = []
        euler = []
        first = [-1] * m
        seen = 0
        stack = [(root, 0)]
        while stack:
            u, k = stack.pop()
            if k == 0:
                seen += 1
                first[u] = len(euler)
                if not children[u]:
                    leaf_order.append(u)
            euler.append(u)
            if k < len(children[u]):
                c = children[u][k]
                depth[c] = depth[u] + 1
                if weights is not None:
                    cost[c] = cost[u] - math.log(weights[c])
                stack.append((u, k + 1))
                stack.append((c, 0))
        if seen != m:
            raise ParsetopoError("tree is not connected")

        self._labels = labels
        self._children = children
        self._parent = tuple(parent)
        self._weights = weights
        self._root = root
        self._leaf_order = tuple(leaf_order)
        self._depth = np.asarray(depth, dtype=np.int64)
        self._cost_depth = np.asarray(cost, dtype=np.float64)
        self._first = np.asarray(first, dtype=np.int64)
        self._euler = np.asarray(euler, dtype=np.int64)
        self._euler_depth = self._depth[self._euler]
        self._sparse = _build_sparse_table(self._euler_depth)

    # -- structure ---------------------------------------------------------

    @property
    def labels(self) -> tuple:
        return self._labels

    @property
    def children(self) -> tuple:
        return self._children

    @property
    def parent(self) -> tuple:
        """Parent id of each node; -1 for the root."""
        return self._parent

    @property
    def weights(self) -> Optional[tuple]:
        return self._weights

    @property
    def root(self) -> int:
        return self._root

    @property
    def n_nodes(self) -> int:
        return len(self._labels)

    @property
    def n_leaves(self) -> int:
        return len(self._leaf_order)

    @property
    def leaf_order(self) -> tuple:
        """Node id of each leaf, by leaf rank."""
        return self._leaf_order

    @property
    def is_weighted(self) -> bool:
        return self._weights is not None

    def depth(self, node: int) -> int:
        return int(self._depth[node])

    def leaf_labels(self) -> list:
        return [self._labels[u] for u in self._leaf_order]

    def is_cnf(self) -> bool:
        """True if every internal node has at most two children and
        single-child nodes sit directly above a leaf."""
        for ch in self._children:
            if len(ch) > 2:
                return False
            if len(ch) == 1 and self._children[ch[0]]:
                return False
        return True

    def structure(self):
        """Nested ``(label, weight, children)`` tuples; equal for trees with
        identical labels, child order and weights."""
        return _nested(self, self._root)

    def __eq__(self, other):
        if not isinstance(other, ParseTree):
            return NotImplemented
        return self.structure() == other.structure()

    def __hash__(self):
        return hash(self.structure())

    def __repr__(self):
        text = serialize_bracket(self)
        if len(text) > 60:
            text = text[:57] + "..."
        return f"ParseTree({text!r})"

    # -- LCA ---------------------------------------------------------------

    def lca(self, u: int, v: int) -> int:
        """Lowest common ancestor of nodes ``u`` and ``v``."""
        return int(self._lca_many(np.asarray([u]), np.asarray([v]))[0])

    def _lca_many(self, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
        a = self._first[us]
        b = self._first[vs]
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        k = _floor_log2(hi - lo + 1)
        left = self._sparse[k, lo]
        right = self._sparse[k, hi - (1 << k) + 1]
        pick = np.where(
            self._euler_depth[left] <= self._euler_depth[right], left, right
        )
        return self._euler[pick]

    def _check_rank(self, k: int) -> int:
        if not (0 <= k < self.n_leaves):
            raise IndexError(f"leaf rank {k} out of range [0, {self.n_leaves})")
        return self._leaf_order[k]


def _nested(tree: ParseTree, root: int):
    out = {}
    stack = [(root, False)]
    while stack:
        u, done = stack.pop()
        if done:
            w = tree.weights[u] if tree.weights is not None else None
            out[u] = (tree.labels[u], w, tuple(out.pop(c) for c in tree.children[u]))
        else:
            stack.append((u, True))
            stack.extend((c, False) for c in tree.children[u])
    return out[root]


def _floor_log2(x: np.ndarray) -> np.ndarray:
    # exact for positive int64 (bit_length - 1)
    x = np.asarray(x, dtype=np.int64)
    out = np.zeros_like(x)
    y = x.copy()
    shift = 32
    while shift:
        big = y >= (1 << shift)
        out[big] += shift
        y[big] >>= shift
        shift >>= 1
    return out


def _build_sparse_table(values: np.ndarray) -> np.ndarray:
    """Row k holds, for each start i, the index of the minimum of
    values[i : i + 2**k] (leftmost on ties)."""
    n = len(values)
    levels = max(1, int(n).bit_length())
    table = np.zeros((levels, n), dtype=np.int64)
    table[0] = np.arange(n)
    for k in range(1, levels):
        half = 1 << (k - 1)
        span = n - (1 << k) + 1
        if span <= 0:
            break
        left = table[k - 1, :span]
        right = table[k - 1, half : half + span]
        table[k, :span] = np.where(values[left] <= values[right], left, right)
    return table


# -- distances -------------------------------------------------------------


def leaf_distance(tree: ParseTree, i: int, j: int) -> int:
    """Number of edges on the path between leaves of rank ``i`` and ``j``."""
    u = tree._check_rank(i)
    v = tree._check_rank(j)
    w = tree.lca(u, v)
    return int(tree._depth[u] + tree._depth[v] - 2 * tree._depth[w])


def leaf_distance_matrix(tree: ParseTree) -> np.ndarray:
    """Symmetric ``n x n`` integer matrix of leaf-to-leaf edge counts."""
    return _pairwise(tree, tree._depth)


def weighted_leaf_distance(tree: ParseTree, i: int, j: int) -> float:
    """Sum of ``-ln(weight)`` over the edges between leaves ``i`` and ``j``."""
    if not tree.is_weighted:
        raise ParsetopoError("weighted distance needs a weighted tree")
    u = tree._check_rank(i)
    v = tree._check_rank(j)
    if u == v:
        return 0.0
    w = tree.lca(u, v)
    c = tree._cost_depth
    return _non_negative(float(c[u] + c[v] - 2.0 * c[w]))


def weighted_leaf_distance_matrix(tree: ParseTree) -> np.ndarray:
    if not tree.is_weighted:
        raise ParsetopoError("weighted distance needs a weighted tree")
    out = _pairwise(tree, tree._cost_depth)
    np.maximum(out, 0.0, out=out)
    return out


def _non_negative(x: float) -> float:
    return x if x > 0.0 else 0.0


def _pairwise(tree: ParseTree, root_depth: np.ndarray) -> np.ndarray:
    n = tree.n_leaves
    leaves = np.asarray(tree.leaf_order, dtype=np.int64)
    out = np.zeros((n, n), dtype=root_depth.dtype)
    if n == 1:
        return out
    iu, ju = np.triu_indices(n, k=1)
    u = leaves[iu]
    v = leaves[ju]
    w = tree._lca_many(u, v)
    d = root_depth[u] + root_depth[v] - 2 * root_depth[w]
    out[iu, ju] = d
    out[ju, iu] = d
    return out


# -- bracket notation ------------------------------------------------------


def _tokenize(text: str):
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            yield ch, i
            i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()":
                j += 1
            yield text[i:j], i
            i = j


def _split_label(token: str, offset: int):
    if ":" not in token:
        return token, None
    name, _, raw = token.rpartition(":")
    if not name:
        raise BracketSyntaxError("empty label", offset)
    if ":" in name:
        raise BracketSyntaxError(f"label {name!r} contains ':'", offset)
    try:
        w = float(raw)
    except ValueError:
        raise BracketSyntaxError(f"bad edge weight {raw!r}", offset) from None
    if not (0.0 < w <= 1.0):
        raise BracketSyntaxError(f"edge weight {raw} outside (0, 1]", offset)
    return name, w


def parse_bracket(text: str) -> ParseTree:
    """Parse one tree in bracket notation.

    Raises :class:`BracketSyntaxError` (with a character offset) for
    unbalanced parentheses, empty labels, weights outside (0, 1], weights on
    the root, or weights on some but not all non-root edges.
    """
    labels: list = []
    children: list = []
    weights: list = []
    offsets: list = []
    stack: list = []
    root = None

    def new_node(token, offset):
        name, w = _split_label(token, offset)
        labels.append(name)
        children.append([])
        weights.append(w)
        offsets.append(offset)
        u = len(labels) - 1
        if stack:
            children[stack[-1][0]].append(u)
        return u

    tokens = _tokenize(text)
    for tok, off in tokens:
        if tok == "(":
            if root is not None and not stack:
                raise BracketSyntaxError("text continues after a complete tree", off)
            nxt = next(tokens, None)
            if nxt is None or nxt[0] in "()":
                raise BracketSyntaxError(
                    "empty label", nxt[1] if nxt is not None else len(text)
                )
            u = new_node(nxt[0], nxt[1])
            if root is None:
                root = u
            stack.append((u, off))
        elif tok == ")":
            if not stack:
                raise BracketSyntaxError("unbalanced ')'", off)
            stack.pop()
        else:
            if not stack:
                if root is not None:
                    raise BracketSyntaxError(
                        "text continues after a complete tree", off
                    )
                root = new_node(tok, off)
            else:
                new_node(tok, off)
    if stack:
        raise BracketSyntaxError("unbalanced '('", stack[-1][1])
    if root is None:
        raise BracketSyntaxError("empty tree", 0)

    if weights[root] is not None:
        raise BracketSyntaxError("the root cannot carry an edge weight", offsets[root])
    non_root = [u for u in range(len(labels)) if u != root]
    present = [weights[u] is not None for u in non_root]
    if any(present) and not all(present):
        u = non_root[present.index(False)]
        raise BracketSyntaxError(
            "weights present on some but not all non-root edges", offsets[u]
        )
    return ParseTree(labels, children, weights if any(present) else None)


def _format_weight(w: float) -> str:
    # repr is the shortest string that round-trips the float exactly
    return repr(float(w))


def serialize_bracket(tree: ParseTree) -> str:
    """Bracket notation for ``tree``; ``parse_bracket`` inverts it exactly."""
    weights = tree.weights

    def atom(u):
        if weights is not None and weights[u] is not None:
            return f"{tree.labels[u]}:{_format_weight(weights[u])}"
        return tree.labels[u]

    parts: list = []
    stack = [(tree.root, 0)]
    while stack:
        u, k = stack.pop()
        ch = tree.children[u]
        if not ch:
            parts.append(atom(u))
            continue
        if k == 0:
            parts.append("(" + atom(u))
        if k < len(ch):
            parts.append(" ")
            stack.append((u, k + 1))
            stack.append((ch[k], 0))
        else:
            parts.append(")")
    return "".join(parts)


def read_tree_text(text: str) -> ParseTree:
    """Parse tree-file contents; '#' comment lines are blanked so error
    offsets still point into the original text."""
    kept = [
        " " * len(line) if line.lstrip().startswith("#") else line
        for line in text.split("\n")
    ]
    return parse_bracket("\n".join(kept))


def read_tree_file(path) -> ParseTree:
    with open(path, encoding="utf-8") as fh:
        return read_tree_text(fh.read())


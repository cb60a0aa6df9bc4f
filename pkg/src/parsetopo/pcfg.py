"""
Probabilistic context-free grammars in Chomsky Normal Form.

Grammar file format (UTF-8, ``#`` starts a comment)::

    start S
    S -> S S 0.4          # binary rule  A -> B C p
    S -> 'a' 0.6          # lexical rule A -> 'a' p
    map K p               # residue letter -> terminal
    map * o               # every remaining standard amino acid

Parsing is CYK over log probabilities.  The Viterbi tree stores, on every
edge from a node to its children, the probability of the rule applied at
that node, so ``-ln`` weighted path lengths sum per-rule costs.

Viterbi ties (within a relative 1e-12) prefer the larger split point, i.e.
the longer left child, then the lexicographically smaller ``(B, C)``.  For
``S -> S S`` this yields left-branching trees.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import GrammarError, SequenceError
from .tree import ParseTree

__all__ = [
    "AMINO_ACIDS",
    "Pcfg",
    "ViterbiResult",
    "load_grammar",
    "read_grammar_file",
    "map_sequence",
    "viterbi_parse",
    "inside_logprob",
    "batch_score",
    "read_sequences",
]

log = logging.getLogger(__name__)

AMINO_ACIDS = "ACDEFGHIKLMNPQRSTVWY"
SUM_TOLERANCE = 1e-6
_TIE_TOL = 1e-12
_TOKEN = re.compile(r"'[^']*'|\"[^\"]*\"|\S+")
_BAD_SYMBOL_CHARS = set("() \t\r\n\f\v:'\"")


@dataclass(frozen=True)
class Pcfg:
    nonterminals: frozenset
    terminals: frozenset
    start: str
    lexical_rules: Dict[Tuple[str, str], float]
    binary_rules: Dict[Tuple[str, str, str], float]
    alphabet_map: Optional[Dict[str, str]] = None

    def __post_init__(self):
        lex: Dict[str, list] = {}
        for (a, term), p in sorted(self.lexical_rules.items()):
            lex.setdefault(term, []).append((a, math.log(p)))
        binary = [
            (b, c, a, math.log(p))
            for (a, b, c), p in sorted(self.binary_rules.items(), key=lambda kv: (kv[0][1], kv[0][2], kv[0][0]))
        ]
        object.__setattr__(self, "_lex", lex)
        object.__setattr__(self, "_binary", binary)

    def rule_sums(self) -> Dict[str, float]:
        sums: Dict[str, float] = {}
        for (a, _), p in self.lexical_rules.items():
            sums[a] = sums.get(a, 0.0) + p
        for (a, _, _), p in self.binary_rules.items():
            sums[a] = sums.get(a, 0.0) + p
        return sums


@dataclass(frozen=True)
class ViterbiResult:
    tree: ParseTree
    log_prob: float


# -- loading ---------------------------------------------------------------


def _symbol_ok(sym: str) -> bool:
    return bool(sym) and not _BAD_SYMBOL_CHARS.intersection(sym)


def load_grammar(text: str) -> Pcfg:
    """Parse and validate a grammar.

    Rule sums that miss 1 by more than 1e-6 are errors; smaller deviations
    are renormalized with a logged warning.
    """
    start = None
    lexical: Dict[Tuple[str, str], float] = {}
    binary: Dict[Tuple[str, str, str], float] = {}
    amap: Dict[str, str] = {}
    default_target = None
    rhs_refs: List[Tuple[int, str]] = []
    map_lines: List[Tuple[int, str]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = _TOKEN.findall(line)
        where = f"line {lineno}"
        if toks[0] == "start":
            if len(toks) != 2:
                raise GrammarError(f"{where}: expected 'start <NT>'")
            start = toks[1]
            continue
        if toks[0] == "map":
            if len(toks) != 3:
                raise GrammarError(f"{where}: expected 'map <residue> <terminal>'")
            residue, target = toks[1], _unquote(toks[2])
            if residue == "*":
                default_target = target
            elif len(residue) != 1:
                raise GrammarError(f"{where}: residue {residue!r} must be one letter")
            elif residue in amap:
                raise GrammarError(f"{where}: residue {residue!r} mapped twice")
            else:
                amap[residue] = target
            map_lines.append((lineno, target))
            continue
        if len(toks) < 3 or toks[1] != "->":
            raise GrammarError(f"{where}: cannot parse {line!r}")
        lhs, rhs, prob_tok = toks[0], toks[2:-1], toks[-1]
        if _is_quoted(lhs) or not _symbol_ok(lhs):
            raise GrammarError(f"{where}: bad left-hand side {lhs!r}")
        try:
            p = float(prob_tok)
        except ValueError:
            raise GrammarError(f"{where}: bad probability {prob_tok!r}") from None
        if not (0.0 < p <= 1.0):
            raise GrammarError(f"{where}: probability {p} outside (0, 1]")
        quoted = [_is_quoted(s) for s in rhs]
        if len(rhs) == 1 and quoted[0]:
            term = _unquote(rhs[0])
            if not _symbol_ok(term):
                raise GrammarError(f"{where}: bad terminal {rhs[0]}")
            key = (lhs, term)
            if key in lexical:
                raise GrammarError(f"{where}: duplicate rule {lhs} -> {rhs[0]}")
            lexical[key] = p
        elif len(rhs) == 2 and not any(quoted):
            for s in rhs:
                if not _symbol_ok(s):
                    raise GrammarError(f"{where}: bad nonterminal {s!r}")
                rhs_refs.append((lineno, s))
            key = (lhs, rhs[0], rhs[1])
            if key in binary:
                raise GrammarError(f"{where}: duplicate rule {lhs} -> {' '.join(rhs)}")
            binary[key] = p
        else:
            raise GrammarError(
                f"{where}: rule {lhs} -> {' '.join(rhs)} is not in Chomsky Normal Form"
            )

    nonterminals = frozenset(a for a, _ in lexical) | frozenset(a for a, _, _ in binary)
    terminals = frozenset(t for _, t in lexical)
    if not nonterminals:
        raise GrammarError("grammar has no rules")
    if start is None:
        raise GrammarError("missing 'start <NT>' line")
    if start not in nonterminals:
        raise GrammarError(f"unknown start symbol {start!r}")
    for lineno, sym in rhs_refs:
        if sym not in nonterminals:
            raise GrammarError(f"line {lineno}: unknown symbol {sym!r}")
    overlap = nonterminals & terminals
    if overlap:
        raise GrammarError(f"symbols used as both terminal and nonterminal: {sorted(overlap)}")

    sums: Dict[str, float] = {}
    for (a, _), p in lexical.items():
        sums[a] = sums.get(a, 0.0) + p
    for (a, _, _), p in binary.items():
        sums[a] = sums.get(a, 0.0) + p
    for a in sorted(sums):
        total = sums[a]
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise GrammarError(f"rule probabilities for {a} sum to {total!r}, not 1")
        if total != 1.0:
            log.warning("renormalizing rules for %s (sum %r)", a, total)
    lexical = {k: p / sums[k[0]] for k, p in lexical.items()}
    binary = {k: p / sums[k[0]] for k, p in binary.items()}

    alphabet_map = None
    if map_lines:
        for lineno, target in map_lines:
            if target not in terminals:
                raise GrammarError(f"line {lineno}: map target {target!r} is not a terminal")
        if default_target is not None:
            for aa in AMINO_ACIDS:
                amap.setdefault(aa, default_target)
        missing = [aa for aa in AMINO_ACIDS if aa not in amap]
        if missing:
            raise GrammarError(f"alphabet map misses residues {''.join(missing)}")
        alphabet_map = dict(sorted(amap.items()))

    return Pcfg(
        nonterminals=nonterminals,
        terminals=terminals,
        start=start,
        lexical_rules=lexical,
        binary_rules=binary,
        alphabet_map=alphabet_map,
    )


def _is_quoted(tok: str) -> bool:
    return len(tok) >= 2 and tok[0] == tok[-1] and tok[0] in "'\""


def _unquote(tok: str) -> str:
    return tok[1:-1] if _is_quoted(tok) else tok


def read_grammar_file(path) -> Pcfg:
    with open(path, encoding="utf-8") as fh:
        return load_grammar(fh.read())


# -- sequences -------------------------------------------------------------


def map_sequence(grammar: Pcfg, residues) -> List[str]:
    """Project residues onto grammar terminals.

    With an alphabet map every character is looked up.  Without one, a string
    containing whitespace is split into tokens and any other string is read
    character by character; each symbol must already be a terminal.
    """
    if grammar.alphabet_map is not None:
        chars = [c for c in residues if not c.isspace()] if isinstance(residues, str) else list(residues)
        out = []
        for pos, c in enumerate(chars):
            try:
                out.append(grammar.alphabet_map[c])
            except KeyError:
                raise SequenceError(f"unmappable residue {c!r} at position {pos}", pos) from None
        return out
    if isinstance(residues, str):
        symbols = residues.split() if any(c.isspace() for c in residues.strip()) else list(residues.strip())
    else:
        symbols = list(residues)
    _check_terminals(grammar, symbols)
    return symbols


def _check_terminals(grammar: Pcfg, seq: Sequence[str]) -> None:
    for pos, sym in enumerate(seq):
        if sym not in grammar.terminals:
            raise SequenceError(f"unknown terminal {sym!r} at position {pos}", pos)


def read_sequences(text: str) -> List[Tuple[str, str]]:
    """``(id, sequence)`` pairs from FASTA or one-sequence-per-line text.

    Plain lines get ids ``seq1``, ``seq2``, ... by order.
    """
    lines = [ln.rstrip("\r") for ln in text.splitlines()]
    body = [ln for ln in lines if ln.strip() and not ln.lstrip().startswith("#")]
    if body and body[0].startswith(">"):
        records: List[Tuple[str, List[str]]] = []
        for ln in body:
            if ln.startswith(">"):
                records.append((ln[1:].strip(), []))
            else:
                records[-1][1].append(ln.strip())
        return [(name, "".join(parts)) for name, parts in records]
    return [(f"seq{k}", ln.strip()) for k, ln in enumerate(body, start=1)]


# -- parsing ---------------------------------------------------------------


def _better(cand: float, cur: Optional[float]) -> bool:
    if cur is None:
        return True
    return cand > cur and not math.isclose(cand, cur, rel_tol=_TIE_TOL, abs_tol=_TIE_TOL)


def viterbi_parse(grammar: Pcfg, seq: Sequence[str]) -> Optional[ViterbiResult]:
    """Most probable derivation of ``seq``, or ``None`` if there is none."""
    n = len(seq)
    if n == 0:
        raise SequenceError("cannot parse an empty sequence")
    _check_terminals(grammar, seq)
    lex = grammar._lex
    binary = grammar._binary
    best: Dict[Tuple[int, int], Dict[str, float]] = {}
    back: Dict[Tuple[int, int], Dict[str, tuple]] = {}
    for i, sym in enumerate(seq):
        best[i, i + 1] = {a: lp for a, lp in lex.get(sym, ())}
        back[i, i + 1] = {a: (sym,) for a, _ in lex.get(sym, ())}
    for span in range(2, n + 1):
        for i in range(n - span + 1):
            j = i + span
            cell: Dict[str, float] = {}
            bp: Dict[str, tuple] = {}
            for k in range(j - 1, i, -1):
                left, right = best[i, k], best[k, j]
                if not left or not right:
                    continue
                for b, c, a, lp in binary:
                    lb = left.get(b)
                    if lb is None:
                        continue
                    rc = right.get(c)
                    if rc is None:
                        continue
                    cand = lp + lb + rc
                    if _better(cand, cell.get(a)):
                        cell[a] = cand
                        bp[a] = (k, b, c)
            best[i, j] = cell
            back[i, j] = bp
    top = best[0, n].get(grammar.start)
    if top is None:
        return None
    return ViterbiResult(_build_tree(grammar, back, n), top)


def _build_tree(grammar: Pcfg, back, n: int) -> ParseTree:
    labels: List[str] = []
    children: List[List[int]] = []
    weights: List[Optional[float]] = []

    def add(label, weight):
        labels.append(label)
        children.append([])
        weights.append(weight)
        return len(labels) - 1

    root = add(grammar.start, None)
    stack = [(root, grammar.start, 0, n)]
    while stack:
        node, a, i, j = stack.pop()
        entry = back[i, j][a]
        if len(entry) == 1:
            p = grammar.lexical_rules[a, entry[0]]
            children[node].append(add(entry[0], p))
            continue
        k, b, c = entry
        p = grammar.binary_rules[a, b, c]
        left = add(b, p)
        right = add(c, p)
        children[node].extend((left, right))
        stack.append((right, c, k, j))
        stack.append((left, b, i, k))
    return ParseTree(labels, children, weights)


def _logsumexp(values: List[float]) -> float:
    m = max(values)
    return m + math.log(math.fsum(math.exp(v - m) for v in values))


def inside_logprob(grammar: Pcfg, seq: Sequence[str]) -> Optional[float]:
    """Natural log of the total probability of ``seq``; ``None`` if it has no
    derivation."""
    n = len(seq)
    if n == 0:
        raise SequenceError("cannot parse an empty sequence")
    _check_terminals(grammar, seq)
    lex = grammar._lex
    binary = grammar._binary
    chart: Dict[Tuple[int, int], Dict[str, float]] = {}
    for i, sym in enumerate(seq):
        chart[i, i + 1] = {a: lp for a, lp in lex.get(sym, ())}
    for span in range(2, n + 1):
        for i in range(n - span + 1):
            j = i + span
            terms: Dict[str, List[float]] = {}
            for k in range(i + 1, j):
                left, right = chart[i, k], chart[k, j]
                if not left or not right:
                    continue
                for b, c, a, lp in binary:
                    lb = left.get(b)
                    if lb is None:
                        continue
                    rc = right.get(c)
                    if rc is None:
                        continue
                    terms.setdefault(a, []).append(lp + lb + rc)
            chart[i, j] = {a: _logsumexp(v) for a, v in terms.items()}
    return chart[0, n].get(grammar.start)


def batch_score(
    grammar: Pcfg,
    sequences: Iterable[Tuple[object, bool]],
    normalization: str = "none",
) -> List[Tuple[float, bool]]:
    """Inside log-probability score per labelled sequence, in input order.

    ``normalization="per-length"`` divides by the sequence length.  Sequences
    without a parse, or with unmappable symbols, score ``-inf``.
    """
    if normalization not in ("none", "per-length"):
        raise ValueError(f"unknown normalization {normalization!r}")
    out = []
    for k, (residues, label) in enumerate(sequences):
        try:
            seq = map_sequence(grammar, residues)
            lp = inside_logprob(grammar, seq)
        except SequenceError as exc:
            log.warning("sequence %d: %s", k, exc)
            out.append((-math.inf, label))
            continue
        if lp is None:
            out.append((-math.inf, label))
        elif normalization == "per-length":
            out.append((lp / len(seq), label))
        else:
            out.append((lp, label))
    return out

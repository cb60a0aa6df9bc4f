import itertools
import logging
import math
import random
import time

import pytest

from parsetopo.contacts import ContactMap
from parsetopo.errors import GrammarError, SequenceError
from parsetopo.measures import classification_metrics, evaluate
from parsetopo.pcfg import (
    batch_score,
    inside_logprob,
    load_grammar,
    map_sequence,
    read_sequences,
    viterbi_parse,
)
from parsetopo.tree import parse_bracket, serialize_bracket

from oracles import count_derivations, enumerate_derivations, random_grammar_text

TOY = "start S\nS -> S S 0.4\nS -> 'a' 0.6\n"
CHARGE = """
start S
S -> S S 0.5
S -> 'p' 0.2
S -> 'n' 0.2
S -> 'o' 0.1
map K p
map R p
map D n
map E n
map * o
"""


@pytest.fixture
def toy():
    return load_grammar(TOY)


# -- loading -----------------------------------------------------------------


def test_load_minimal(toy):
    assert toy.nonterminals == {"S"}
    assert toy.terminals == {"a"}
    assert toy.start == "S"
    assert toy.binary_rules == {("S", "S", "S"): 0.4}
    assert toy.lexical_rules == {("S", "a"): 0.6}
    assert toy.alphabet_map is None


@pytest.mark.parametrize(
    "text, message",
    [
        ("start S\nS -> S S 0.4\nS -> 'a' 0.5\n", "sum to 0.9"),
        ("start S\nS -> A 1.0\n", "Chomsky"),
        ("start S\nS -> 'a' 'b' 1.0\n", "Chomsky"),
        ("start S\nS -> S 'a' 1.0\n", "Chomsky"),
        ("start S\nS -> 1.0\n", "Chomsky"),
        ("start S\nS -> S X 0.4\nS -> 'a' 0.6\n", "unknown symbol 'X'"),
        ("start T\nS -> 'a' 1.0\n", "unknown start"),
        ("S -> 'a' 1.0\n", "missing 'start"),
        ("start S\nS -> 'a' 0.5\nS -> 'a' 0.5\n", "duplicate"),
        ("start S\nS -> 'a' 1.5\n", "outside"),
        ("start S\nS -> 'a' 0\n", "outside"),
        ("start S\nS -> 'a' p\n", "bad probability"),
        ("start S\nS -> 'a' 1.0\nmap K q\n", "not a terminal"),
        ("start S\nS -> 'a' 1.0\nmap K a\n", "misses residues"),
        ("start S\nS => 'a' 1.0\n", "cannot parse"),
    ],
)
def test_load_errors(text, message):
    with pytest.raises(GrammarError, match=message):
        load_grammar(text)


def test_small_deviation_is_renormalized(caplog):
    with caplog.at_level(logging.WARNING):
        g = load_grammar("start S\nS -> S S 0.4000004\nS -> 'a' 0.6\n")
    total = sum(g.binary_rules.values()) + sum(g.lexical_rules.values())
    assert total == pytest.approx(1.0, abs=1e-15)
    assert "renormalizing" in caplog.text


def test_quoted_multichar_terminal():
    g = load_grammar("start S\nS -> S S 0.5\nS -> 'ab' 0.5\n")
    assert g.terminals == {"ab"}
    assert map_sequence(g, "ab ab") == ["ab", "ab"]


def test_rule_sums_are_one():
    g = load_grammar(CHARGE)
    for total in g.rule_sums().values():
        assert total == pytest.approx(1.0, abs=1e-12)


# -- sequences ---------------------------------------------------------------


def test_map_sequence_charge():
    g = load_grammar(CHARGE)
    assert map_sequence(g, "KDLA") == ["p", "n", "o", "o"]
    assert len(g.alphabet_map) == 20
    with pytest.raises(SequenceError) as info:
        map_sequence(g, "KXA")
    assert info.value.position == 1


def test_map_sequence_identity(toy):
    assert map_sequence(toy, "aaa") == ["a", "a", "a"]
    with pytest.raises(SequenceError, match="position 1"):
        map_sequence(toy, "aba")


def test_read_sequences_fasta_and_plain():
    fasta = ">one desc\nAAK\nDE\n>two\nKK\n"
    assert read_sequences(fasta) == [("one desc", "AAKDE"), ("two", "KK")]
    assert read_sequences("aaa\n\n# skip\naa\n") == [("seq1", "aaa"), ("seq2", "aa")]


# -- Viterbi / inside fixtures -------------------------------------------------


def test_viterbi_single_symbol(toy):
    r = viterbi_parse(toy, ["a"])
    assert r.log_prob == pytest.approx(math.log(0.6), abs=1e-12)
    assert serialize_bracket(r.tree) == "(S a:0.6)"
    assert inside_logprob(toy, ["a"]) == pytest.approx(math.log(0.6), abs=1e-12)


def test_viterbi_two_symbols(toy):
    r = viterbi_parse(toy, ["a", "a"])
    assert r.log_prob == pytest.approx(math.log(0.144), abs=1e-12)
    assert r.tree.leaf_labels() == ["a", "a"]


def test_viterbi_three_symbols_left_branching(toy):
    r = viterbi_parse(toy, list("aaa"))
    assert r.log_prob == pytest.approx(math.log(0.03456), abs=1e-12)
    assert serialize_bracket(r.tree) == "(S (S:0.4 (S:0.4 a:0.6) (S:0.4 a:0.6)) (S:0.4 a:0.6))"
    assert inside_logprob(toy, list("aaa")) == pytest.approx(math.log(0.06912), abs=1e-12)


def test_tie_break_prefers_smaller_rule():
    g = load_grammar("start S\nS -> A B 0.5\nS -> B A 0.5\nA -> 'a' 1.0\nB -> 'a' 1.0\n")
    r = viterbi_parse(g, ["a", "a"])
    assert serialize_bracket(r.tree) == "(S (A:0.5 a:1.0) (B:0.5 a:1.0))"


def test_no_parse_is_a_result():
    g = load_grammar("start S\nS -> A A 1.0\nA -> 'a' 0.5\nA -> 'b' 0.5\n")
    assert viterbi_parse(g, ["a"]) is None
    assert inside_logprob(g, ["a", "b", "a"]) is None
    assert viterbi_parse(g, ["a", "b"]) is not None


def test_unknown_terminal_and_empty_fail(toy):
    with pytest.raises(SequenceError):
        viterbi_parse(toy, ["a", "z"])
    with pytest.raises(SequenceError):
        inside_logprob(toy, ["z"])
    with pytest.raises(SequenceError):
        viterbi_parse(toy, [])


def test_viterbi_tree_weights_reproduce_log_prob():
    g = load_grammar(CHARGE)
    for residues in ("KDLA", "EEKRAD", "K", "GGGGGGGGGG"):
        r = viterbi_parse(g, map_sequence(g, residues))
        t = r.tree
        # one applied-rule probability per internal node
        total = sum(math.log(t.weights[ch[0]]) for ch in t.children if ch)
        assert math.exp(total) == pytest.approx(math.exp(r.log_prob), rel=1e-9)
        assert t.leaf_labels() == map_sequence(g, residues)
        assert t.is_cnf() or t.n_leaves == 1


def test_viterbi_tree_round_trips_and_evaluates():
    g = load_grammar(CHARGE)
    seq = map_sequence(g, "KDLAKDLAKDLAKDLAKDLAK")
    r = viterbi_parse(g, seq)
    back = parse_bracket(serialize_bracket(r.tree))
    assert back == r.tree
    cmap = ContactMap(21, frozenset({(0, 20), (1, 19), (2, 18), (5, 15)}))
    rep = evaluate(back, cmap, L=5, t=5)
    assert -1 <= rep.s1 <= 1
    assert rep.weighted is not None


# -- exhaustive oracle ---------------------------------------------------------


def _check_against_enumeration(g, max_len):
    table = enumerate_derivations(g, max_len)
    terms = sorted(g.terminals)
    for n in range(1, max_len + 1):
        for seq in itertools.product(terms, repeat=n):
            probs = table.get(seq)
            vit = viterbi_parse(g, list(seq))
            ins = inside_logprob(g, list(seq))
            if not probs:
                assert vit is None and ins is None
                continue
            assert vit.log_prob == pytest.approx(math.log(max(probs)), abs=1e-9)
            assert ins == pytest.approx(math.log(math.fsum(probs)), abs=1e-9)
            assert ins >= vit.log_prob - 1e-12
            if len(probs) == 1:
                assert ins == pytest.approx(vit.log_prob, abs=1e-12)
            else:
                assert ins > vit.log_prob
            assert vit.tree.leaf_labels() == list(seq)


def test_toy_against_enumeration(toy):
    _check_against_enumeration(toy, 8)


def test_random_grammars_against_enumeration():
    rng = random.Random(2024)
    logging.disable(logging.WARNING)
    try:
        for _ in range(25):
            g = load_grammar(random_grammar_text(rng))
            max_len = 8
            while count_derivations(g, max_len) > 300_000:
                max_len -= 1
            _check_against_enumeration(g, max_len)
    finally:
        logging.disable(logging.NOTSET)


def test_cyk_scaling_is_at_most_cubic():
    g = load_grammar(CHARGE)
    times = {}
    for n in (20, 40):
        seq = ["o"] * n
        start = time.perf_counter()
        inside_logprob(g, seq)
        times[n] = time.perf_counter() - start
    # doubling n costs at most 8x cubically; allow a generous constant
    assert times[40] < 8 * 4 * times[20] + 0.05


# -- batch scoring -------------------------------------------------------------


def test_batch_score_marks_failures():
    g = load_grammar("start S\nS -> A A 1.0\nA -> 'a' 0.5\nA -> 'b' 0.5\n")
    out = batch_score(g, [("ab", True), ("aa", True), ("a", False), ("zz", False)])
    assert len(out) == 4
    assert out[0][0] == pytest.approx(math.log(0.25))
    assert out[2][0] == -math.inf and out[3][0] == -math.inf
    assert [lab for _, lab in out] == [True, True, False, False]


def test_per_length_same_ranking_for_fixed_length():
    g = load_grammar(CHARGE)
    seqs = [(s, i % 2 == 0) for i, s in enumerate(["KDLAE", "AAAAA", "KKKKK", "DEDED", "GGKGG"])]
    raw = batch_score(g, seqs)
    per = batch_score(g, seqs, "per-length")
    order = lambda xs: sorted(range(len(xs)), key=lambda k: xs[k][0])
    assert order(raw) == order(per)
    for (a, _), (b, _) in zip(raw, per):
        assert b == pytest.approx(a / 5)


def test_batch_scores_feed_classification(toy):
    # positives parse, negatives carry an unknown symbol and score -inf
    scores = batch_score(toy, [("aa", True), ("aaa", True), ("ab", False), ("b", False)])
    for thr in (-100.0, -5.0, math.log(0.03456)):
        m = classification_metrics(scores, thr)
        assert m.f1 == 1.0

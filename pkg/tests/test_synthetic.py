"""Synthetic corpora: determinism, well-formedness, and the designed ambiguity."""

from collections import Counter

from rlparse import (
    grammar_corpus,
    is_projective,
    load_conll,
    random_projective_corpus,
    random_tree_corpus,
    write_conll,
)
from rlparse.synthetic import NOUN_PREPS, VERB_PREPS

GRAMMAR_POS = {"DT", "JJ", "CD", "NN", "VBD", "RB", "IN", "."}
GRAMMAR_LABELS = {"det", "amod", "num", "nsubj", "root", "dobj",
                  "prep", "pobj", "advmod", "punct"}


def roundtrip(tmp_path, corpus, name):
    path = tmp_path / f"{name}.conllu"
    write_conll(corpus, path)
    return load_conll(path)


def test_sizes_and_ids():
    g = grammar_corpus(7, seed=0)
    p = random_projective_corpus(5, seed=0)
    r = random_tree_corpus(4, seed=0)
    assert [s.sent_id for s in g] == [f"g{i}" for i in range(7)]
    assert [s.sent_id for s in p] == [f"p{i}" for i in range(5)]
    assert [s.sent_id for s in r] == [f"r{i}" for i in range(4)]


def test_seed_determinism():
    a = grammar_corpus(30, seed=4)
    b = grammar_corpus(30, seed=4)
    assert a == b
    c = grammar_corpus(30, seed=5)
    assert a != c
    assert random_projective_corpus(10, seed=1) == random_projective_corpus(10, seed=1)
    assert random_tree_corpus(10, seed=1) == random_tree_corpus(10, seed=1)


def test_grammar_projective_by_default():
    corpus = grammar_corpus(200, seed=3)
    assert all(is_projective(s.gold_tree()) for s in corpus)


def test_grammar_extraposition_crosses_arcs():
    corpus = grammar_corpus(200, seed=3, extraposed=0.5)
    nonproj = sum(not is_projective(s.gold_tree()) for s in corpus)
    assert 0 < nonproj < len(corpus)


def test_grammar_trees_survive_serialization(tmp_path):
    corpus = grammar_corpus(50, seed=6)
    assert roundtrip(tmp_path, corpus, "g") == corpus


def test_grammar_tag_and_label_inventory():
    corpus = grammar_corpus(150, seed=2)
    pos = {t.pos for s in corpus for t in s.tokens}
    labels = {t.label for s in corpus for t in s.tokens}
    assert pos <= GRAMMAR_POS
    assert labels <= GRAMMAR_LABELS
    assert {"nsubj", "root", "det"} <= labels


def test_grammar_final_punctuation_rate():
    corpus = grammar_corpus(200, seed=8)
    ending = sum(1 for s in corpus
                 if s.tokens[-1].form == "." and s.tokens[-1].pos == ".")
    assert 0.8 <= ending / len(corpus) <= 1.0


def test_preposition_cue_is_exact_without_noise():
    corpus = grammar_corpus(200, seed=7, noise=0.0)
    for sent in corpus:
        for tok in sent.tokens:
            if tok.pos != "IN":
                continue
            head_pos = sent.tokens[tok.head - 1].pos
            if tok.form in NOUN_PREPS:
                assert head_pos == "NN"
            else:
                assert tok.form in VERB_PREPS
                assert head_pos == "VBD"


def test_preposition_cue_noise_flips_some_sites():
    corpus = grammar_corpus(300, seed=7, noise=0.3)
    flipped = 0
    for sent in corpus:
        for tok in sent.tokens:
            if tok.pos != "IN":
                continue
            head_pos = sent.tokens[tok.head - 1].pos
            cue_ok = (head_pos == "NN") == (tok.form in NOUN_PREPS)
            flipped += not cue_ok
    assert flipped > 0


def test_noun_frequencies_are_skewed():
    corpus = grammar_corpus(300, seed=1)
    counts = Counter(t.form for s in corpus for t in s.tokens if t.pos == "NN")
    assert counts["noun0"] > counts.get("noun29", 0)


def test_random_projective_bounds_and_labels(tmp_path):
    corpus = random_projective_corpus(80, seed=11, min_len=3, max_len=6, n_labels=2)
    assert all(is_projective(s.gold_tree()) for s in corpus)
    assert all(3 <= len(s) <= 6 for s in corpus)
    labels = {t.label for s in corpus for t in s.tokens}
    assert labels <= {"l0", "l1"}
    assert roundtrip(tmp_path, corpus, "p") == corpus


def test_random_projective_pinned_length():
    corpus = random_projective_corpus(20, seed=2, min_len=5, max_len=5)
    assert all(len(s) == 5 for s in corpus)


def test_random_trees_mostly_cross(tmp_path):
    corpus = random_tree_corpus(100, seed=13, min_len=4, max_len=9)
    nonproj = sum(not is_projective(s.gold_tree()) for s in corpus)
    assert nonproj > len(corpus) // 4
    assert roundtrip(tmp_path, corpus, "r") == corpus


def test_random_trees_have_single_root():
    corpus = random_tree_corpus(60, seed=17)
    for sent in corpus:
        roots = [t.index for t in sent.tokens if t.head == 0]
        assert len(roots) == 1

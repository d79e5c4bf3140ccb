"""Synthetic dependency corpora.

``grammar_corpus`` generates clause-like sentences whose only real
ambiguity is prepositional attachment: the preposition lexeme decides
whether the phrase modifies the object noun or the verb, and a small
noise rate flips that decision.  A model can therefore learn most of the
grammar while still making a controlled number of mistakes, which is
exactly what the propagation analysis needs to chew on.

The random-tree generators provide structure without lexical signal:
uniform-ish projective trees from a recursive span builder, and
unconstrained attachment trees (mostly non-projective) for exercising
the reordering system.
"""

from __future__ import annotations

import numpy as np

from .treebank import Sentence, Token

DETERMINERS = ("the", "a", "some", "this", "each")
ADJECTIVES = ("big", "small", "red", "old", "quick", "late", "new")
VERBS = ("hit", "saw", "bought", "sold", "moved", "held", "watched")
ADVERBS = ("yesterday", "quickly", "recently", "today")
NUMBERS = ("two", "three", "five", "seven")
NOUN_PREPS = ("on", "in")
VERB_PREPS = ("with", "near", "by")
NOUNS = tuple(f"noun{i}" for i in range(30))


def _zipf_noun(rng: np.random.Generator) -> str:
    weights = 1.0 / np.arange(1, len(NOUNS) + 1)
    return NOUNS[rng.choice(len(NOUNS), p=weights / weights.sum())]


class _Builder:
    def __init__(self):
        self.forms: list[str] = []
        self.pos: list[str] = []
        self.heads: list[int] = []
        self.labels: list[str] = []

    def add(self, form: str, pos: str, head: int, label: str) -> int:
        """Append a token; negative head is a placeholder patched later."""
        self.forms.append(form)
        self.pos.append(pos)
        self.heads.append(head)
        self.labels.append(label)
        return len(self.forms)

    def sentence(self, sent_id: str) -> Sentence:
        toks = tuple(
            Token(i + 1, f, p, h, l)
            for i, (f, p, h, l) in enumerate(
                zip(self.forms, self.pos, self.heads, self.labels)))
        return Sentence(sent_id, toks)


def _noun_phrase(b: _Builder, rng: np.random.Generator, head: int, label: str,
                 rich: bool = True) -> int:
    """Emit a noun phrase, return the position of its head noun."""
    det = b.add(rng.choice(DETERMINERS), "DT", -1, "det")
    adj = num = None
    if rich and rng.random() < 0.35:
        adj = b.add(rng.choice(ADJECTIVES), "JJ", -1, "amod")
    if rich and rng.random() < 0.15:
        num = b.add(rng.choice(NUMBERS), "CD", -1, "num")
    noun = b.add(_zipf_noun(rng), "NN", head, label)
    b.heads[det - 1] = noun
    if adj is not None:
        b.heads[adj - 1] = noun
    if num is not None:
        b.heads[num - 1] = noun
    return noun


def grammar_corpus(n_sentences: int, seed: int = 0, noise: float = 0.10,
                   extraposed: float = 0.0) -> list[Sentence]:
    """Clause-like sentences with lexically cued prepositional attachment.

    Up to two prepositional phrases hang off the right spine of the
    clause.  The preposition lexeme cues the site: ``on``/``in`` point to
    the nearest noun, the rest to the verb.  With probability ``noise``
    the attachment instead goes to a random other spine site, so the cue
    is learnable but not perfectly, and a wrong first attachment corrupts
    the context of the second.  ``extraposed`` moves the first phrase
    after a verb-attached adverb while keeping noun attachment, which
    yields non-projective trees.
    """
    rng = np.random.default_rng(seed)
    out = []
    for si in range(n_sentences):
        b = _Builder()
        subj = _noun_phrase(b, rng, -1, "nsubj")
        verb = b.add(rng.choice(VERBS), "VBD", 0, "root")
        b.heads[subj - 1] = verb
        obj = None
        if rng.random() < 0.85:
            obj = _noun_phrase(b, rng, verb, "dobj")
        n_pps = 0
        if rng.random() < 0.6:
            n_pps = 1 if rng.random() >= 0.45 else 2
        extrap = obj is not None and n_pps >= 1 and rng.random() < extraposed
        adverb = None
        if extrap:
            adverb = b.add(rng.choice(ADVERBS), "RB", verb, "advmod")
        spine_nouns = [obj] if obj is not None else []
        for pi in range(n_pps):
            sites = [verb] + spine_nouns
            noun_cue = bool(spine_nouns) and rng.random() < 0.5
            pool = NOUN_PREPS if noun_cue else VERB_PREPS
            target = spine_nouns[-1] if noun_cue else verb
            if extrap and pi == 0:
                pool, target = NOUN_PREPS, spine_nouns[-1]
            elif len(sites) > 1 and rng.random() < noise:
                others = [s for s in sites if s != target]
                target = others[int(rng.integers(len(others)))]
            prep = b.add(str(rng.choice(pool)), "IN", target, "prep")
            pnoun = _noun_phrase(b, rng, prep, "pobj", rich=False)
            # attachment closes every spine noun deeper than its site
            if target == verb:
                spine_nouns = [pnoun]
            else:
                spine_nouns = spine_nouns[:spine_nouns.index(target) + 1] + [pnoun]
        if adverb is None and rng.random() < 0.2:
            b.add(rng.choice(ADVERBS), "RB", verb, "advmod")
        if rng.random() < 0.9:
            b.add(".", ".", verb, "punct")
        out.append(b.sentence(f"g{si}"))
    return out


def random_projective_corpus(n_sentences: int, seed: int = 0,
                             min_len: int = 2, max_len: int = 10,
                             n_labels: int = 4) -> list[Sentence]:
    """Random projective trees over placeholder tokens."""
    rng = np.random.default_rng(seed)
    labels = tuple(f"l{i}" for i in range(n_labels))
    out = []
    for si in range(n_sentences):
        n = int(rng.integers(min_len, max_len + 1))
        heads = [0] * (n + 1)

        def attach(lo: int, hi: int, head: int) -> None:
            # carve [lo..hi] into segments, each a subtree hanging off head
            i = lo
            while i <= hi:
                j = int(rng.integers(i, hi + 1))
                r = int(rng.integers(i, j + 1))
                heads[r] = head
                attach(i, r - 1, r)
                attach(r + 1, j, r)
                i = j + 1

        root = int(rng.integers(1, n + 1))
        heads[root] = 0
        attach(1, root - 1, root)
        attach(root + 1, n, root)
        toks = tuple(
            Token(t, f"w{t}", "N" if t % 2 else "V", heads[t],
                  str(rng.choice(labels)))
            for t in range(1, n + 1))
        out.append(Sentence(f"p{si}", toks))
    return out


def random_tree_corpus(n_sentences: int, seed: int = 0,
                       min_len: int = 2, max_len: int = 10,
                       n_labels: int = 4) -> list[Sentence]:
    """Random unconstrained trees; most are non-projective."""
    rng = np.random.default_rng(seed)
    labels = tuple(f"l{i}" for i in range(n_labels))
    out = []
    for si in range(n_sentences):
        n = int(rng.integers(min_len, max_len + 1))
        order = rng.permutation(np.arange(1, n + 1))
        heads = [0] * (n + 1)
        placed = [int(order[0])]
        for t in order[1:]:
            heads[int(t)] = int(placed[int(rng.integers(0, len(placed)))])
            placed.append(int(t))
        toks = tuple(
            Token(t, f"w{t}", "N" if t % 2 else "V", heads[t],
                  str(rng.choice(labels)))
            for t in range(1, n + 1))
        out.append(Sentence(f"r{si}", toks))
    return out

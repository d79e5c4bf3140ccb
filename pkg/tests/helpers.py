"""Shared builders for the test suite."""

from rlparse import Sentence, Token


def make_sentence(heads, labels=None, pos=None, forms=None, sent_id="t"):
    """Sentence from parallel per-token lists; heads are 1-indexed, 0 = root."""
    n = len(heads)
    labels = labels or ["dep"] * n
    pos = pos or ["NN"] * n
    forms = forms or [f"w{i}" for i in range(1, n + 1)]
    tokens = tuple(
        Token(i + 1, forms[i], pos[i], heads[i], labels[i]) for i in range(n))
    return Sentence(sent_id, tokens)


# eight-token running example used across the suite: two clean noun phrases,
# a reflexive, and a prepositional phrase hanging off the verb
EXAMPLE_FORMS = ["waves", "hit", "stocks", "themselves", "on", "the", "Big", "Board"]
EXAMPLE_POS = ["NNS", "VBD", "NNS", "PRP", "IN", "DT", "NNP", "NNP"]
EXAMPLE_HEADS = [2, 0, 2, 3, 2, 8, 8, 5]
EXAMPLE_LABELS = ["nsubj", "root", "dobj", "dep", "prep", "det", "nn", "pobj"]

# the gold arc-standard derivation for the example, as "kind" or "kind:label"
EXAMPLE_DERIVATION = [
    "shift", "shift", "left:nsubj", "shift", "shift", "right:dep",
    "right:dobj", "shift", "shift", "shift", "shift", "left:nn",
    "left:det", "right:pobj", "right:prep", "right:root",
]


def example_sentence():
    return make_sentence(EXAMPLE_HEADS, EXAMPLE_LABELS, EXAMPLE_POS,
                         EXAMPLE_FORMS, sent_id="example")

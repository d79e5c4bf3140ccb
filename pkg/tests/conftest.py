import pytest

from rlparse import make_system, random_projective_corpus

from helpers import EXAMPLE_LABELS, example_sentence


@pytest.fixture
def example():
    return example_sentence()


@pytest.fixture
def example_system():
    # amod joins the gold labels so off-path actions exist for loss fixtures
    labels = tuple(sorted(set(EXAMPLE_LABELS) | {"amod"}))
    return make_system("arc-standard", labels)


@pytest.fixture(scope="session")
def tiny_corpus():
    return random_projective_corpus(30, seed=5, min_len=2, max_len=7, n_labels=3)

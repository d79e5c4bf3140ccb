"""Greedy decoding and attachment-score evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import Model, extract_features
from .transitions import TransitionSystem, extract_tree
from .treebank import DepTree, Sentence, is_punctuation


class DecodeError(RuntimeError):
    pass


@dataclass
class Step:
    """One decision: what the parser saw and what it picked."""
    features: np.ndarray
    action_id: int
    prob: float
    legal_mask: np.ndarray


@dataclass
class Trajectory:
    system_id: str
    steps: list[Step] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)

    def action_ids(self) -> tuple[int, ...]:
        return tuple(s.action_id for s in self.steps)

    def log_prob(self) -> float:
        return float(sum(np.log(s.prob) for s in self.steps))


def _step_limit(n: int) -> int:
    # covers the quadratic worst case of reordering systems
    return 2 * n + n * (n + 1) // 2 + 8


def greedy_parse(model: Model, sentence: Sentence,
                 system: TransitionSystem | None = None) -> tuple[DepTree, Trajectory]:
    """Follow the most probable legal action until the parse is finished."""
    if system is None:
        system = model.make_system()
    config = system.initial_config(sentence)
    traj = Trajectory(system.system_id)
    for _ in range(_step_limit(len(sentence))):
        if system.is_terminal(config):
            return extract_tree(config), traj
        mask = system.legal_mask(config)
        feats = extract_features(config, sentence, model.vocab)
        probs, _ = model.forward(feats, mask)
        action_id = int(np.argmax(probs))
        traj.steps.append(Step(feats, action_id, float(probs[action_id]), mask))
        config = system.apply(config, system.inventory[action_id])
    raise DecodeError(
        f"{sentence.sent_id}: no terminal configuration within "
        f"{_step_limit(len(sentence))} steps")


def replay(system: TransitionSystem, sentence: Sentence,
           action_ids: tuple[int, ...]) -> DepTree:
    """Apply a recorded action sequence and return the resulting tree."""
    config = system.initial_config(sentence)
    for aid in action_ids:
        config = system.apply(config, system.inventory[aid])
    return extract_tree(config)


def sentence_scores(sentence: Sentence, tree: DepTree,
                    punct: str = "ptb") -> tuple[int, int, int]:
    """(correct heads, correct head+label pairs, scoring tokens), punctuation excluded."""
    heads_ok = labeled_ok = total = 0
    for tok in sentence.tokens:
        if is_punctuation(tok, punct):
            continue
        total += 1
        if tree.heads[tok.index - 1] == tok.head:
            heads_ok += 1
            if tree.labels[tok.index - 1] == tok.label:
                labeled_ok += 1
    return heads_ok, labeled_ok, total


@dataclass
class EvalReport:
    correct_heads: int
    correct_labeled: int
    total: int
    sentences: int

    @property
    def uas(self) -> float:
        return 100.0 * self.correct_heads / self.total if self.total else 0.0

    @property
    def las(self) -> float:
        return 100.0 * self.correct_labeled / self.total if self.total else 0.0

    def __str__(self) -> str:
        return (f"UAS {self.uas:.2f}  LAS {self.las:.2f}  "
                f"({self.total} tokens, {self.sentences} sentences)")


def evaluate(sentences, trees, punct: str = "ptb") -> EvalReport:
    """Attachment scores of predicted trees against the gold annotation."""
    sentences = list(sentences)
    trees = list(trees)
    if len(sentences) != len(trees):
        raise ValueError(f"{len(sentences)} sentences but {len(trees)} trees")
    heads_ok = labeled_ok = total = 0
    for sent, tree in zip(sentences, trees):
        if len(tree) != len(sent):
            raise ValueError(f"{sent.sent_id}: tree length {len(tree)} "
                             f"does not match sentence length {len(sent)}")
        h, l, t = sentence_scores(sent, tree, punct)
        heads_ok += h
        labeled_ok += l
        total += t
    return EvalReport(heads_ok, labeled_ok, total, len(sentences))

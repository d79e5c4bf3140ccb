"""Where greedy parses go wrong, and what one fix would have bought.

A decision error is a step whose chosen action strictly increases the
best loss still reachable.  Finding them is cheap given the dynamic
oracle; the interesting question is how they relate.  ``analyze_sentence``
reparses a sentence repeatedly, correcting one more decision error per
pass (each correction substitutes the loss-preserving action the model
itself likes best), until the parse equals the gold tree.  If fixing one
decision silently repairs later ones, those later errors were
propagation rather than independent mistakes; if the final pass needs
more corrections than the original parse had errors, the corrections
exposed new trouble.

Only the plain shift/attach system is supported here: the dynamic oracle
is specific to it, and the repair loop needs the gold tree to be
reachable, so non-projective sentences are skipped.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .decode import greedy_parse
from .dynamic_oracle import DynamicOracle
from .model import Model, extract_features
from .transitions import Action, TransitionSystem, extract_tree, initial_config
from .treebank import DepTree, Sentence, is_projective

logger = logging.getLogger(__name__)


def _require_arc_standard(system: TransitionSystem) -> None:
    if system.system_id != "arc-standard":
        raise ValueError(
            f"loss analysis needs the plain shift/attach system, got {system.system_id!r}")


def trace_costs(sentence: Sentence, actions: list[Action],
                oracle: DynamicOracle | None = None,
                mode: str = "labeled") -> list[int]:
    """Per-step committed loss along an arbitrary action sequence."""
    oracle = oracle or DynamicOracle(sentence, mode)
    config = initial_config(len(sentence))
    costs = []
    for action in actions:
        costs.append(oracle.action_cost(config, action))
        config = oracle._successor(config, action)
    return costs


def detect_decision_errors(model: Model, sentence: Sentence,
                           system: TransitionSystem | None = None,
                           oracle: DynamicOracle | None = None) -> list[int]:
    """0-based step indices where the greedy parse commits extra loss."""
    system = system or model.make_system()
    _require_arc_standard(system)
    oracle = oracle or DynamicOracle(sentence)
    _, traj = greedy_parse(model, sentence, system)
    actions = [system.inventory[s.action_id] for s in traj.steps]
    return [i for i, c in enumerate(trace_costs(sentence, actions, oracle)) if c > 0]


def repair_parse(model: Model, sentence: Sentence, corrections: int,
                 system: TransitionSystem | None = None,
                 oracle: DynamicOracle | None = None
                 ) -> tuple[DepTree, int, int]:
    """Greedy parse that overrides the first ``corrections`` costly choices.

    An override replaces the model's pick with the cheapest legal action,
    breaking ties toward the one the model assigns the highest probability.
    The cheapest action normally costs nothing; it can stay costly when the
    gold label is missing from the model's inventory, and such residual
    loss still counts as taken.  Returns the tree, the number of costly
    actions taken, and the number of overrides actually spent.
    """
    system = system or model.make_system()
    _require_arc_standard(system)
    oracle = oracle or DynamicOracle(sentence)
    config = system.initial_config(sentence)
    taken = 0
    fixed = 0
    for _ in range(2 * len(sentence)):
        if system.is_terminal(config):
            break
        mask = system.legal_mask(config)
        feats = extract_features(config, sentence, model.vocab)
        probs, _ = model.forward(feats, mask)
        action_id = int(np.argmax(probs))
        cost = oracle.action_cost(config, system.inventory[action_id])
        if cost > 0:
            if fixed < corrections:
                costs = oracle.action_costs(config, system)
                cheapest = costs.min()
                action_id = int(np.argmax(np.where(costs == cheapest, probs, -1.0)))
                fixed += 1
                if cheapest > 0:
                    taken += 1
            else:
                taken += 1
        config = system.apply(config, system.inventory[action_id])
    return extract_tree(config), taken, fixed


@dataclass
class RepairRecord:
    sent_id: str
    converged: bool
    passes: int                # corrections allowed in the gold-producing pass
    decision_errors: int       # costly steps in the unrepaired parse
    fixed: int                 # overrides spent in the final pass
    labeled_loss: int          # loss of the unrepaired parse, all tokens
    unlabeled_loss: int
    taken_errors: list[int]    # costly steps taken in pass 0, 1, ...

    @property
    def propagated(self) -> int:
        return max(0, self.decision_errors - self.fixed)

    @property
    def new_errors(self) -> int:
        return max(0, self.fixed - self.decision_errors)


def alternative_propagation(record: RepairRecord) -> int:
    """Pass pairs where one extra correction removed two or more taken errors."""
    seq = record.taken_errors
    return sum(1 for a, b in zip(seq, seq[1:]) if a - b >= 2)


def analyze_sentence(model: Model, sentence: Sentence,
                     system: TransitionSystem | None = None,
                     oracle: DynamicOracle | None = None) -> RepairRecord:
    system = system or model.make_system()
    _require_arc_standard(system)
    oracle = oracle or DynamicOracle(sentence)
    gold = sentence.gold_tree()
    taken_per_pass: list[int] = []
    base_tree = None
    for r in range(2 * len(sentence) + 1):
        tree, taken, fixed = repair_parse(model, sentence, r, system, oracle)
        taken_per_pass.append(taken)
        if r == 0:
            base_tree = tree
        if tree == gold:
            labeled = sum(
                1 for d in range(len(sentence))
                if base_tree.heads[d] != gold.heads[d]
                or base_tree.labels[d] != gold.labels[d])
            unlabeled = sum(
                1 for d in range(len(sentence))
                if base_tree.heads[d] != gold.heads[d])
            return RepairRecord(
                sent_id=sentence.sent_id, converged=True, passes=r,
                decision_errors=taken_per_pass[0], fixed=fixed,
                labeled_loss=labeled, unlabeled_loss=unlabeled,
                taken_errors=taken_per_pass)
    labeled = sum(
        1 for d in range(len(sentence))
        if base_tree.heads[d] != gold.heads[d]
        or base_tree.labels[d] != gold.labels[d])
    unlabeled = sum(
        1 for d in range(len(sentence)) if base_tree.heads[d] != gold.heads[d])
    return RepairRecord(
        sent_id=sentence.sent_id, converged=False,
        passes=2 * len(sentence), decision_errors=taken_per_pass[0],
        fixed=0, labeled_loss=labeled, unlabeled_loss=unlabeled,
        taken_errors=taken_per_pass)


def analyze(model: Model, sentences) -> list[RepairRecord]:
    """Repair records for every projective sentence; others are skipped."""
    system = model.make_system()
    _require_arc_standard(system)
    records = []
    skipped = 0
    for sent in sentences:
        if not is_projective(sent.gold_tree()):
            skipped += 1
            continue
        records.append(analyze_sentence(model, sent, system))
    if skipped:
        logger.info("analysis skipped %d non-projective sentences", skipped)
    return records


@dataclass
class PropagationReport:
    sentences: int
    converged: int
    total_labeled_loss: int
    total_unlabeled_loss: int
    decision_errors: int
    propagated: int
    new_errors: int
    alternative: int

    @property
    def loss_per_error(self) -> float:
        if not self.decision_errors:
            return 0.0
        return self.total_labeled_loss / self.decision_errors

    @property
    def propagation_pct(self) -> float:
        if not self.decision_errors:
            return 0.0
        return 100.0 * self.propagated / self.decision_errors

    def format_table(self) -> str:
        rows = [
            ("Total Loss", f"{self.total_labeled_loss}"),
            ("Total Loss (unlabeled)", f"{self.total_unlabeled_loss}"),
            ("Decision Errors", f"{self.decision_errors}"),
            ("Error Propagation", f"{self.propagated}"),
            ("Error Propagation (alternative)", f"{self.alternative}"),
            ("New Errors", f"{self.new_errors}"),
            ("Loss per error", f"{self.loss_per_error:.2f}"),
            ("Error Propagation (%)", f"{self.propagation_pct:.1f}"),
        ]
        width = max(len(name) for name, _ in rows)
        lines = [f"{name:<{width}}  {value}" for name, value in rows]
        lines.append(f"{'(sentences)':<{width}}  {self.converged}/{self.sentences} converged")
        return "\n".join(lines)

    def __str__(self) -> str:
        return self.format_table()


def aggregate(records: list[RepairRecord]) -> PropagationReport:
    """Corpus totals; records whose repair never reached gold are excluded."""
    used = [r for r in records if r.converged]
    return PropagationReport(
        sentences=len(records),
        converged=len(used),
        total_labeled_loss=sum(r.labeled_loss for r in used),
        total_unlabeled_loss=sum(r.unlabeled_loss for r in used),
        decision_errors=sum(r.decision_errors for r in used),
        propagated=sum(r.propagated for r in used),
        new_errors=sum(r.new_errors for r in used),
        alternative=sum(alternative_propagation(r) for r in used),
    )

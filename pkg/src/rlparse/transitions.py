"""Parser configurations and transition systems.

A configuration holds a stack (bottom first, position 0 is the artificial
root), a buffer of upcoming token positions, and the attachments built so
far.  Configurations are immutable values; ``apply`` returns a new one.

Three systems share this machinery:

* ``arc-standard``: LEFT attaches the second stack item to the top and
  pops it, RIGHT attaches the top to the second item and pops the top,
  SHIFT moves the next buffer token onto the stack.
* ``arc-eager``: arcs connect the stack top and the buffer front; REDUCE
  pops attached tokens.  When the buffer runs dry with unattached tokens
  left, UNSHIFT recycles them through the buffer so every parse ends as
  a single tree.
* ``swap-standard``: arc-standard plus SWAP, which returns the second
  stack item to the buffer front and thereby reorders the sentence enough
  to build non-projective trees.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .treebank import DepTree, Sentence, is_projective

SHIFT = "shift"
LEFT = "left"
RIGHT = "right"
REDUCE = "reduce"
SWAP = "swap"
UNSHIFT = "unshift"


class IllegalActionError(ValueError):
    """An action was applied in a configuration where it is not legal."""


class OracleError(ValueError):
    """No oracle derivation exists for the requested sentence."""


@dataclass(frozen=True, slots=True)
class Action:
    kind: str
    label: str | None = None

    def __str__(self) -> str:
        return self.kind if self.label is None else f"{self.kind}:{self.label}"


@dataclass(frozen=True, slots=True)
class Configuration:
    """stack/buffer hold token positions; heads[d] is -1 until d attaches."""

    stack: tuple[int, ...]
    buffer: tuple[int, ...]
    heads: tuple[int, ...]
    labels: tuple[str | None, ...]
    unshifted: frozenset[int] = frozenset()

    @property
    def n(self) -> int:
        return len(self.heads) - 1

    def arc_count(self) -> int:
        return sum(1 for h in self.heads if h >= 0)


def initial_config(n: int) -> Configuration:
    return Configuration(
        stack=(0,),
        buffer=tuple(range(1, n + 1)),
        heads=(-1,) * (n + 1),
        labels=(None,) * (n + 1),
    )


def extract_tree(config: Configuration) -> DepTree:
    """Read the finished tree out of a terminal configuration."""
    if config.stack != (0,) or config.buffer:
        raise ValueError("tree extraction requires a terminal configuration")
    heads = config.heads[1:]
    labels = config.labels[1:]
    if any(h < 0 for h in heads):
        raise ValueError("terminal configuration left tokens unattached")
    return DepTree(heads=tuple(heads), labels=tuple(labels))  # type: ignore[arg-type]


def _attach(config: Configuration, head: int, dep: int, label: str) -> tuple:
    heads = list(config.heads)
    labels = list(config.labels)
    if heads[dep] != -1:
        raise IllegalActionError(f"token {dep} already has a head")
    heads[dep] = head
    labels[dep] = label
    return tuple(heads), tuple(labels)


class TransitionSystem:
    """Shared interface; subclasses fill in the action semantics."""

    system_id: str = ""
    structural_kinds: tuple[str, ...] = ()

    def __init__(self, labels: tuple[str, ...] | list[str]):
        self.labels = tuple(labels)
        self.inventory: tuple[Action, ...] = tuple(self._build_inventory())
        self.action_index = {a: i for i, a in enumerate(self.inventory)}
        self._kind_slots: dict[str, np.ndarray] = {}
        for kind in set(a.kind for a in self.inventory):
            ids = [i for i, a in enumerate(self.inventory) if a.kind == kind]
            self._kind_slots[kind] = np.asarray(ids, dtype=np.int64)

    def _build_inventory(self) -> list[Action]:
        out = [Action(k) for k in self.structural_kinds]
        out.extend(Action(LEFT, l) for l in self.labels)
        out.extend(Action(RIGHT, l) for l in self.labels)
        return out

    @property
    def n_actions(self) -> int:
        return len(self.inventory)

    def initial_config(self, sentence: Sentence) -> Configuration:
        if len(sentence) == 0:
            raise ValueError("cannot parse an empty sentence")
        return initial_config(len(sentence))

    def legal_kinds(self, config: Configuration) -> tuple[str, ...]:
        raise NotImplementedError

    def legal_actions(self, config: Configuration) -> list[Action]:
        kinds = set(self.legal_kinds(config))
        return [a for a in self.inventory if a.kind in kinds]

    def legal_mask(self, config: Configuration) -> np.ndarray:
        mask = np.zeros(self.n_actions, dtype=bool)
        for kind in self.legal_kinds(config):
            mask[self._kind_slots[kind]] = True
        return mask

    def apply(self, config: Configuration, action: Action) -> Configuration:
        if action.kind not in self.legal_kinds(config):
            raise IllegalActionError(
                f"{action} is not legal here: {self._legality_note(config, action)}"
            )
        return self._apply(config, action)

    def _legality_note(self, config: Configuration, action: Action) -> str:
        return (
            f"stack depth {len(config.stack)}, buffer length {len(config.buffer)}"
        )

    def _apply(self, config: Configuration, action: Action) -> Configuration:
        raise NotImplementedError

    def is_terminal(self, config: Configuration) -> bool:
        return config.stack == (0,) and not config.buffer

    def static_oracle(self, sentence: Sentence) -> list[Action]:
        """Derive the gold tree, returning the action sequence."""
        gold = sentence.gold_tree()
        children = _gold_children(gold)
        config = self.initial_config(sentence)
        actions: list[Action] = []
        limit = 2 * len(sentence) + len(sentence) * (len(sentence) + 1) // 2 + 8
        while not self.is_terminal(config):
            if len(actions) > limit:
                raise OracleError(
                    f"sentence {sentence.sent_id}: oracle failed to terminate"
                )
            action = self._oracle_step(config, gold, children)
            if action is None:
                raise OracleError(
                    f"sentence {sentence.sent_id}: no derivation "
                    f"(is the tree projective?)"
                )
            actions.append(action)
            config = self.apply(config, action)
        return actions

    def _oracle_step(self, config, gold, children):
        raise NotImplementedError


def _gold_children(gold: DepTree) -> list[list[int]]:
    children: list[list[int]] = [[] for _ in range(len(gold) + 1)]
    for head, _, dep in gold.arcs():
        children[head].append(dep)
    return children


def _children_done(config: Configuration, children: list[list[int]], tok: int) -> bool:
    return all(config.heads[c] != -1 for c in children[tok])


class ArcStandard(TransitionSystem):
    system_id = "arc-standard"
    structural_kinds = (SHIFT,)

    def legal_kinds(self, config: Configuration) -> tuple[str, ...]:
        kinds = []
        if config.buffer:
            kinds.append(SHIFT)
        if len(config.stack) >= 2:
            if config.stack[-2] != 0:
                kinds.append(LEFT)
            kinds.append(RIGHT)
        return tuple(kinds)

    def _apply(self, config: Configuration, action: Action) -> Configuration:
        if action.kind == SHIFT:
            return Configuration(
                stack=config.stack + (config.buffer[0],),
                buffer=config.buffer[1:],
                heads=config.heads,
                labels=config.labels,
                unshifted=config.unshifted,
            )
        s1, s2 = config.stack[-1], config.stack[-2]
        if action.kind == LEFT:
            heads, labels = _attach(config, s1, s2, action.label)
            return Configuration(
                stack=config.stack[:-2] + (s1,),
                buffer=config.buffer,
                heads=heads,
                labels=labels,
                unshifted=config.unshifted,
            )
        heads, labels = _attach(config, s2, s1, action.label)
        return Configuration(
            stack=config.stack[:-1],
            buffer=config.buffer,
            heads=heads,
            labels=labels,
            unshifted=config.unshifted,
        )

    def _oracle_step(self, config, gold, children):
        if len(config.stack) >= 2:
            s1, s2 = config.stack[-1], config.stack[-2]
            if s2 != 0 and gold.heads[s2 - 1] == s1 and _children_done(config, children, s2):
                return Action(LEFT, gold.labels[s2 - 1])
            if gold.heads[s1 - 1] == s2 and _children_done(config, children, s1):
                return Action(RIGHT, gold.labels[s1 - 1])
        if config.buffer:
            return Action(SHIFT)
        return None

    def static_oracle(self, sentence: Sentence) -> list[Action]:
        if not is_projective(sentence.gold_tree()):
            raise OracleError(
                f"sentence {sentence.sent_id}: no derivation for a "
                f"non-projective tree"
            )
        return super().static_oracle(sentence)


class ArcEager(TransitionSystem):
    system_id = "arc-eager"
    structural_kinds = (SHIFT, REDUCE, UNSHIFT)

    def legal_kinds(self, config: Configuration) -> tuple[str, ...]:
        s1 = config.stack[-1]
        if not config.buffer:
            if len(config.stack) < 2:
                return ()
            return (REDUCE,) if config.heads[s1] != -1 else (UNSHIFT,)
        kinds = [RIGHT]
        b1 = config.buffer[0]
        if b1 not in config.unshifted:
            kinds.append(SHIFT)
        if s1 != 0 and config.heads[s1] == -1:
            kinds.append(LEFT)
        if config.heads[s1] != -1:
            kinds.append(REDUCE)
        return tuple(kinds)

    def _apply(self, config: Configuration, action: Action) -> Configuration:
        s1 = config.stack[-1]
        if action.kind == SHIFT:
            return Configuration(
                stack=config.stack + (config.buffer[0],),
                buffer=config.buffer[1:],
                heads=config.heads,
                labels=config.labels,
                unshifted=config.unshifted,
            )
        if action.kind == REDUCE:
            return Configuration(
                stack=config.stack[:-1],
                buffer=config.buffer,
                heads=config.heads,
                labels=config.labels,
                unshifted=config.unshifted,
            )
        if action.kind == UNSHIFT:
            return Configuration(
                stack=config.stack[:-1],
                buffer=(s1,) + config.buffer,
                heads=config.heads,
                labels=config.labels,
                unshifted=config.unshifted | {s1},
            )
        b1 = config.buffer[0]
        if action.kind == LEFT:
            heads, labels = _attach(config, b1, s1, action.label)
            return Configuration(
                stack=config.stack[:-1],
                buffer=config.buffer,
                heads=heads,
                labels=labels,
                unshifted=config.unshifted,
            )
        heads, labels = _attach(config, s1, b1, action.label)
        return Configuration(
            stack=config.stack + (b1,),
            buffer=config.buffer[1:],
            heads=heads,
            labels=labels,
            unshifted=config.unshifted,
        )

    def _oracle_step(self, config, gold, children):
        s1 = config.stack[-1]
        if not config.buffer:
            if config.heads[s1] != -1:
                return Action(REDUCE)
            return None
        b1 = config.buffer[0]
        if s1 != 0 and gold.heads[s1 - 1] == b1:
            return Action(LEFT, gold.labels[s1 - 1])
        if gold.heads[b1 - 1] == s1:
            return Action(RIGHT, gold.labels[b1 - 1])
        if config.heads[s1] != -1 and not any(
            gold.heads[b - 1] == s1 for b in config.buffer
        ):
            return Action(REDUCE)
        return Action(SHIFT)

    def static_oracle(self, sentence: Sentence) -> list[Action]:
        if not is_projective(sentence.gold_tree()):
            raise OracleError(
                f"sentence {sentence.sent_id}: no derivation for a "
                f"non-projective tree"
            )
        return super().static_oracle(sentence)


class SwapStandard(TransitionSystem):
    system_id = "swap-standard"
    structural_kinds = (SHIFT, SWAP)

    def legal_kinds(self, config: Configuration) -> tuple[str, ...]:
        kinds = []
        if config.buffer:
            kinds.append(SHIFT)
        if len(config.stack) >= 2:
            s1, s2 = config.stack[-1], config.stack[-2]
            if s2 != 0:
                kinds.append(LEFT)
            kinds.append(RIGHT)
            if 0 < s2 < s1:
                kinds.append(SWAP)
        return tuple(kinds)

    def _apply(self, config: Configuration, action: Action) -> Configuration:
        if action.kind == SWAP:
            s1, s2 = config.stack[-1], config.stack[-2]
            return Configuration(
                stack=config.stack[:-2] + (s1,),
                buffer=(s2,) + config.buffer,
                heads=config.heads,
                labels=config.labels,
                unshifted=config.unshifted,
            )
        return ArcStandard._apply(self, config, action)

    def _oracle_step(self, config, gold, children):
        proj = getattr(self, "_proj_order", None)
        if len(config.stack) >= 2:
            s1, s2 = config.stack[-1], config.stack[-2]
            if s2 != 0 and gold.heads[s2 - 1] == s1 and _children_done(config, children, s2):
                return Action(LEFT, gold.labels[s2 - 1])
            if gold.heads[s1 - 1] == s2 and _children_done(config, children, s1):
                return Action(RIGHT, gold.labels[s1 - 1])
            if 0 < s2 < s1 and proj[s2] > proj[s1]:
                return Action(SWAP)
        if config.buffer:
            return Action(SHIFT)
        return None

    def static_oracle(self, sentence: Sentence) -> list[Action]:
        self._proj_order = projective_order(sentence.gold_tree())
        try:
            return super().static_oracle(sentence)
        finally:
            del self._proj_order


def projective_order(gold: DepTree) -> list[int]:
    """Rank tokens by an in-order traversal of the gold tree.

    The ranking gives the token order under which the tree would be
    projective; the swap oracle reorders the stack toward it.
    """
    children = _gold_children(gold)
    for lst in children:
        lst.sort()
    order: list[int] = []

    def visit(tok: int) -> None:
        for c in children[tok]:
            if c < tok:
                visit(c)
        order.append(tok)
        for c in children[tok]:
            if c > tok:
                visit(c)

    for root in children[0]:
        visit(root)
    rank = [0] * (len(gold) + 1)
    for pos, tok in enumerate(order, start=1):
        rank[tok] = pos
    return rank


_SYSTEMS = {
    "arc-standard": ArcStandard,
    "arc-eager": ArcEager,
    "swap-standard": SwapStandard,
}

SYSTEM_IDS = tuple(_SYSTEMS)


def make_system(system_id: str, labels: tuple[str, ...] | list[str]) -> TransitionSystem:
    try:
        cls = _SYSTEMS[system_id]
    except KeyError:
        raise ValueError(
            f"unknown transition system {system_id!r}; "
            f"choose from {sorted(_SYSTEMS)}"
        ) from None
    return cls(labels)

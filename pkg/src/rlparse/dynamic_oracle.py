"""Minimum reachable loss for arc-standard configurations.

From any mid-derivation configuration the parser can still produce many
final trees.  ``DynamicOracle`` computes, in polynomial time, the best
labeled (or unlabeled) attachment loss among them, the extra loss each
individual action commits to, and the set of actions that keep the best
reachable tree available.

The polynomial algorithm rests on two properties of arc-standard.
First, the buffer of any reachable configuration is a suffix of the
sentence, so the value of the best projective subtree over a buffer
span can be tabulated once per sentence with a span dynamic program.
Second, items buried in the stack only ever interact with the item
directly above them, so the search over completions collapses to a
state (buried stack prefix, active item, buffer position) with four
move types:

* absorb a buffer span as a right-dependent subtree of the active item,
* hand the active item to a buffer token that becomes its head (that
  token then becomes the active item; its own right dependents can
  always be deferred, so only its left span is scored here),
* let the active item take its buried neighbor as a left dependent,
* attach the active item rightward to its buried neighbor, which then
  becomes active.

Moves either advance the buffer position or shrink the buried prefix,
so the state graph is acyclic and memoizable.  The memo is keyed on the
buried prefix tuple and persists across calls, which makes repeated
queries along a derivation cheap.

``exhaustive_min_loss`` is an independent brute-force reference for
small inputs.  Labels never constrain either search: an arc with the
correct head can take the gold label for free, and an arc with a wrong
head costs one no matter which label it carries, so only attachment
structure is enumerated and label errors of already-built arcs are
added analytically.
"""

from __future__ import annotations

import numpy as np

from .transitions import (
    LEFT,
    RIGHT,
    SHIFT,
    Action,
    Configuration,
    IllegalActionError,
    _attach,
)
from .treebank import Sentence

NEG = -(10 ** 9)
LOSS_MODES = ("labeled", "unlabeled")


class DynamicOracle:
    """Best-reachable-loss queries for one sentence under arc-standard."""

    def __init__(self, sentence: Sentence, mode: str = "labeled"):
        if mode not in LOSS_MODES:
            raise ValueError(f"unknown loss mode {mode!r}; choose from {LOSS_MODES}")
        self.sentence = sentence
        self.mode = mode
        gold = sentence.gold_tree()
        # position-indexed copies: entry d describes token d, entry 0 the root
        self.gold_heads = (-1,) + gold.heads
        self.gold_labels = (None,) + gold.labels
        self.n = len(sentence)
        self._children: list[list[int]] = [[] for _ in range(self.n + 1)]
        for d in range(1, self.n + 1):
            self._children[self.gold_heads[d]].append(d)
        self._build_span_tables()
        self._memo: dict[tuple, int] = {}

    def _build_span_tables(self) -> None:
        """Tabulate best gold-arc counts of projective subtrees over spans.

        cl[a][v] scores the best structure on [a..v] in which every token
        left of v descends from v; cr[v][b] is the mirror image.  Their sum
        is the best subtree on [a..b] rooted at v.
        """
        n = self.n
        heads = self.gold_heads
        size = n + 2
        cl = np.zeros((size, size), dtype=np.int64)
        cr = np.zeros((size, size), dtype=np.int64)
        il = np.zeros((size, size), dtype=np.int64)
        ir = np.zeros((size, size), dtype=np.int64)
        for span in range(1, n):
            for a in range(1, n - span + 1):
                b = a + span
                m = NEG
                for k in range(a, b):
                    m = max(m, cr[a][k] + cl[k + 1][b])
                ir[a][b] = m + (1 if heads[b] == a else 0)
                il[a][b] = m + (1 if heads[a] == b else 0)
                best = NEG
                for k in range(a + 1, b + 1):
                    best = max(best, ir[a][k] + cr[k][b])
                cr[a][b] = best
                best = NEG
                for k in range(a, b):
                    best = max(best, cl[a][k] + il[k][b])
                cl[a][b] = best
        self._cl = cl
        self._cr = cr
        w = np.zeros((size, size), dtype=np.int64)
        for a in range(1, n + 1):
            for b in range(a, n + 1):
                best = NEG
                for v in range(a, b + 1):
                    best = max(best, cl[a][v] + cr[v][b])
                w[a][b] = best
        self._w = w

    def _rd_score(self, tau: int, i: int, q: int) -> int:
        """Best subtree on [i..q] counting a bonus when its root is tau's gold child."""
        best = int(self._w[i][q])
        for v in self._children[tau]:
            if i <= v <= q:
                s = int(self._cl[i][v]) + int(self._cr[v][q]) + 1
                if s > best:
                    best = s
        return best

    def _value(self, prefix: tuple[int, ...], tau: int, i: int) -> int:
        """Max achievable gold arcs from stack prefix+(tau,), buffer [i..n]."""
        key = (prefix, tau, i)
        cached = self._memo.get(key)
        if cached is not None:
            return cached
        n = self.n
        j = len(prefix)
        heads = self.gold_heads
        best = NEG
        if i > n:
            if j == 0:
                best = 0
        else:
            for q in range(i, n + 1):
                s = self._rd_score(tau, i, q) + self._value(prefix, tau, q + 1)
                if s > best:
                    best = s
            if j >= 1:
                # a buffer token v becomes tau's head and the new active item;
                # everything before v must fold into v's left span
                for v in range(i, n + 1):
                    s = int(self._cl[i][v]) + (1 if heads[tau] == v else 0) \
                        + self._value(prefix, v, v + 1)
                    if s > best:
                        best = s
        if j >= 1:
            below = prefix[-1]
            shorter = prefix[:-1]
            s = (1 if heads[tau] == below else 0) + self._value(shorter, below, i)
            if s > best:
                best = s
            if j >= 2:
                s = (1 if heads[below] == tau else 0) + self._value(shorter, tau, i)
                if s > best:
                    best = s
        self._memo[key] = best
        return best

    def _base_loss(self, heads: tuple[int, ...], labels: tuple) -> int:
        total = 0
        labeled = self.mode == "labeled"
        for d in range(1, self.n + 1):
            h = heads[d]
            if h < 0:
                continue
            if h != self.gold_heads[d]:
                total += 1
            elif labeled and labels[d] != self.gold_labels[d]:
                total += 1
        return total

    def min_loss(self, config: Configuration) -> int:
        """Loss of the best final tree still reachable from this configuration."""
        if len(config.heads) != self.n + 1:
            raise ValueError("configuration does not belong to this oracle's sentence")
        i = config.buffer[0] if config.buffer else self.n + 1
        if config.buffer != tuple(range(i, self.n + 1)):
            raise ValueError("buffer is not a sentence suffix; "
                             "not a reachable arc-standard configuration")
        if not config.stack or config.stack[0] != 0:
            raise ValueError("stack bottom must be the root")
        base = self._base_loss(config.heads, config.labels)
        unattached = len(config.stack) - 1 + len(config.buffer)
        value = self._value(config.stack[:-1], config.stack[-1], i)
        return base + unattached - int(value)

    def _successor(self, config: Configuration, action: Action) -> Configuration:
        # arc-standard semantics kept local so cost queries need no system object
        if action.kind == SHIFT:
            if not config.buffer:
                raise IllegalActionError("shift on an empty buffer")
            return Configuration(config.stack + (config.buffer[0],), config.buffer[1:],
                                 config.heads, config.labels, config.unshifted)
        if len(config.stack) < 2:
            raise IllegalActionError(f"{action} needs two stack items")
        s1, s2 = config.stack[-1], config.stack[-2]
        if action.kind == LEFT:
            if s2 == 0:
                raise IllegalActionError("cannot attach the root as a dependent")
            heads, labels = _attach(config, s1, s2, action.label)
            return Configuration(config.stack[:-2] + (s1,), config.buffer,
                                 heads, labels, config.unshifted)
        if action.kind == RIGHT:
            heads, labels = _attach(config, s2, s1, action.label)
            return Configuration(config.stack[:-1], config.buffer,
                                 heads, labels, config.unshifted)
        raise IllegalActionError(f"{action} is not an arc-standard action")

    def action_cost(self, config: Configuration, action: Action) -> int:
        """Extra loss committed by taking this action, always >= 0."""
        return self.min_loss(self._successor(config, action)) - self.min_loss(config)

    def action_costs(self, config: Configuration, system) -> np.ndarray:
        """Cost of every inventory action; illegal actions get +inf.

        Only three searches are needed: one per structural outcome.  Label
        variants of an arc action differ by exactly one point when the head
        is correct and not at all when it is wrong.
        """
        costs = np.full(system.n_actions, np.inf)
        ml0 = self.min_loss(config)
        stack, buffer = config.stack, config.buffer
        labeled = self.mode == "labeled"
        if buffer:
            shift = Action(SHIFT)
            costs[system.action_index[shift]] = (
                self.min_loss(self._successor(config, shift)) - ml0)
        if len(stack) >= 2:
            s1, s2 = stack[-1], stack[-2]
            if s2 != 0:
                head_ok = self.gold_heads[s2] == s1
                probe = self.gold_labels[s2] if head_ok else system.labels[0]
                best = self.min_loss(self._successor(config, Action(LEFT, probe))) - ml0
                for lab in system.labels:
                    extra = 1 if labeled and head_ok and lab != self.gold_labels[s2] else 0
                    costs[system.action_index[Action(LEFT, lab)]] = best + extra
            head_ok = self.gold_heads[s1] == s2
            probe = self.gold_labels[s1] if head_ok else system.labels[0]
            best = self.min_loss(self._successor(config, Action(RIGHT, probe))) - ml0
            for lab in system.labels:
                extra = 1 if labeled and head_ok and lab != self.gold_labels[s1] else 0
                costs[system.action_index[Action(RIGHT, lab)]] = best + extra
        return costs

    def zero_cost_actions(self, config: Configuration, system) -> list[Action]:
        """All actions that preserve the currently reachable minimum loss."""
        costs = self.action_costs(config, system)
        actions = [system.inventory[k] for k in np.flatnonzero(costs == 0)]
        assert actions or system.is_terminal(config), \
            "a non-terminal configuration always has a zero-cost action"
        return actions


def exhaustive_min_loss(config: Configuration, sentence: Sentence,
                        mode: str = "labeled",
                        memo: dict | None = None) -> int:
    """Brute-force reference for ``DynamicOracle.min_loss`` on small inputs.

    Enumerates every completion of the configuration under arc-standard
    rules, memoizing on (stack, remaining buffer length).  Kept deliberately
    independent of the polynomial algorithm so the two can check each other.
    Pass the same ``memo`` dict across calls on one sentence to share the
    completion table; it depends only on the gold heads, never on the mode
    or the configuration.
    """
    if mode not in LOSS_MODES:
        raise ValueError(f"unknown loss mode {mode!r}; choose from {LOSS_MODES}")
    n = len(sentence)
    if n > 10:
        raise ValueError("brute-force reference only supports up to 10 tokens")
    gold = sentence.gold_tree()
    gold_heads = (-1,) + gold.heads
    gold_labels = (None,) + gold.labels
    labeled = mode == "labeled"
    base = 0
    for d in range(1, n + 1):
        h = config.heads[d]
        if h < 0:
            continue
        if h != gold_heads[d]:
            base += 1
        elif labeled and config.labels[d] != gold_labels[d]:
            base += 1
    if memo is None:
        memo = {}

    def search(stack: tuple[int, ...], buffer: tuple[int, ...]) -> int:
        if len(stack) == 1 and not buffer:
            return 0
        key = (stack, len(buffer))
        got = memo.get(key)
        if got is not None:
            return got
        top = NEG
        if buffer:
            v = search(stack + (buffer[0],), buffer[1:])
            if v > top:
                top = v
        if len(stack) >= 2:
            s1, s2 = stack[-1], stack[-2]
            if s2 != 0:
                v = (1 if gold_heads[s2] == s1 else 0) + search(stack[:-2] + (s1,), buffer)
                if v > top:
                    top = v
            v = (1 if gold_heads[s1] == s2 else 0) + search(stack[:-1], buffer)
            if v > top:
                top = v
        memo[key] = top
        return top

    unattached = len(config.stack) - 1 + len(config.buffer)
    return base + unattached - search(config.stack, config.buffer)

"""Reading, validating, and writing dependency treebanks.

Both common 10-column tab-separated formats are supported.  Token indices
are 1-based and head 0 denotes the artificial root.  Sentences are
immutable after loading and safe to share between parallel workers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

logger = logging.getLogger(__name__)

PTB_PUNCT_TAGS = frozenset({"``", "''", ",", ".", ":"})


class TreebankError(ValueError):
    """Malformed or inconsistent treebank content."""


@dataclass(frozen=True, slots=True)
class Token:
    """One token with its gold attachment."""

    index: int
    form: str
    pos: str
    head: int
    label: str


@dataclass(frozen=True, slots=True)
class DepTree:
    """A dependency structure: heads[i] and labels[i] describe token i+1."""

    heads: tuple[int, ...]
    labels: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.heads)

    def arcs(self) -> Iterator[tuple[int, str, int]]:
        """Yield (head, label, dependent) triples."""
        for dep, (head, label) in enumerate(zip(self.heads, self.labels), start=1):
            yield head, label, dep


@dataclass(frozen=True, slots=True)
class Sentence:
    sent_id: str
    tokens: tuple[Token, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    def gold_tree(self) -> DepTree:
        return DepTree(
            heads=tuple(t.head for t in self.tokens),
            labels=tuple(t.label for t in self.tokens),
        )

    def forms(self) -> tuple[str, ...]:
        return tuple(t.form for t in self.tokens)


def is_punctuation(token: Token, convention: str = "ptb") -> bool:
    """True when the token is punctuation under the given convention.

    "ptb" checks the POS tag against the classic tag set, "ud" checks for
    the universal PUNCT tag.
    """
    if convention == "ptb":
        return token.pos in PTB_PUNCT_TAGS
    if convention == "ud":
        return token.pos == "PUNCT"
    raise ValueError(f"unknown punctuation convention: {convention!r}")


def _pos_column(fmt: str) -> int:
    # Column 4 holds the universal tag in the newer format; the older
    # format keeps its fine-grained tag in column 5.
    if fmt == "conllu":
        return 3
    if fmt == "conllx":
        return 4
    raise ValueError(f"unknown treebank format: {fmt!r}")


def _check_tree(tokens: list[Token], sent_id: str, first_line: int) -> str | None:
    """Validate head structure.  Returns a skip reason or None if usable.

    Structural corruption (bad head range, self-loops, cycles) raises;
    multi-root sentences are merely reported so the caller can skip them.
    """
    n = len(tokens)
    roots = 0
    for t in tokens:
        line = first_line + t.index - 1
        if not 0 <= t.head <= n:
            raise TreebankError(
                f"sentence {sent_id}: head {t.head} out of range at line {line}"
            )
        if t.head == t.index:
            raise TreebankError(f"sentence {sent_id}: self-loop at line {line}")
        if t.head == 0:
            roots += 1
    if roots == 0:
        raise TreebankError(f"sentence {sent_id}: cyclic gold tree (no root)")
    for t in tokens:
        seen = {t.index}
        cur = t.head
        while cur != 0:
            if cur in seen:
                raise TreebankError(
                    f"sentence {sent_id}: cyclic gold tree through token {cur} "
                    f"(line {first_line + cur - 1})"
                )
            seen.add(cur)
            cur = tokens[cur - 1].head
    if roots > 1:
        return f"{roots} root tokens"
    return None


def load_conll(path: str | Path, fmt: str = "conllu") -> list[Sentence]:
    """Load a treebank file.

    Comment lines are ignored, multiword ranges and empty nodes are
    skipped.  Sentences whose trees are corrupt raise TreebankError;
    multi-root sentences are skipped with a warning.
    """
    pos_col = _pos_column(fmt)
    sentences: list[Sentence] = []
    block: list[tuple[int, str]] = []
    sent_id: str | None = None

    def flush(first_line: int) -> None:
        nonlocal sent_id
        if not block:
            return
        default_id = f"s{len(sentences) + 1}"
        this_id = sent_id or default_id
        sent_id = None
        tokens: list[Token] = []
        for line_no, line in block:
            cols = line.split("\t")
            if len(cols) != 10:
                raise TreebankError(
                    f"sentence {this_id}: expected 10 columns, got {len(cols)} "
                    f"at line {line_no}"
                )
            if "-" in cols[0] or "." in cols[0]:
                continue
            try:
                index = int(cols[0])
                head = int(cols[6])
            except ValueError as exc:
                raise TreebankError(
                    f"sentence {this_id}: bad index or head at line {line_no}"
                ) from exc
            if index != len(tokens) + 1:
                raise TreebankError(
                    f"sentence {this_id}: token index {index} out of order "
                    f"at line {line_no}"
                )
            tokens.append(
                Token(index=index, form=cols[1], pos=cols[pos_col],
                      head=head, label=cols[7])
            )
        block.clear()
        if not tokens:
            return
        skip = _check_tree(tokens, this_id, first_line)
        if skip is not None:
            logger.warning("skipping sentence %s: %s", this_id, skip)
            return
        sentences.append(Sentence(sent_id=this_id, tokens=tuple(tokens)))

    block_start = 1
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                flush(block_start)
                block_start = line_no + 1
                continue
            if line.startswith("#"):
                if line[1:].strip().startswith("sent_id"):
                    _, _, value = line.partition("=")
                    if value.strip():
                        sent_id = value.strip()
                block_start = min(block_start, line_no + 1) if block else line_no + 1
                continue
            if not block:
                block_start = line_no
            block.append((line_no, line))
    flush(block_start)
    return sentences


def write_conll(
    sentences: Sequence[Sentence],
    path: str | Path,
    trees: Sequence[DepTree] | None = None,
    fmt: str = "conllu",
) -> None:
    """Write sentences, optionally with predicted trees replacing gold."""
    pos_col = _pos_column(fmt)
    if trees is not None and len(trees) != len(sentences):
        raise ValueError("one tree per sentence required")

    def emit(fh) -> None:
        for si, sent in enumerate(sentences):
            tree = trees[si] if trees is not None else sent.gold_tree()
            if len(tree) != len(sent):
                raise ValueError(f"sentence {sent.sent_id}: tree length mismatch")
            fh.write(f"# sent_id = {sent.sent_id}\n")
            for t in sent.tokens:
                cols = ["_"] * 10
                cols[0] = str(t.index)
                cols[1] = t.form
                cols[pos_col] = t.pos
                cols[6] = str(tree.heads[t.index - 1])
                cols[7] = tree.labels[t.index - 1]
                fh.write("\t".join(cols) + "\n")
            fh.write("\n")

    if hasattr(path, "write"):
        emit(path)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            emit(fh)


def is_projective(tree: DepTree) -> bool:
    """True iff no arc crosses another.

    Checked via the descendant formulation: for every arc, each token
    strictly between its endpoints must descend from the head.
    """
    n = len(tree)
    heads = tree.heads
    ancestors: list[set[int]] = [set() for _ in range(n + 1)]
    for tok in range(1, n + 1):
        cur = heads[tok - 1]
        chain = ancestors[tok]
        while cur != 0 and cur not in chain:
            chain.add(cur)
            cur = heads[cur - 1]
    for dep in range(1, n + 1):
        head = heads[dep - 1]
        if head == 0:
            continue  # everything descends from the artificial root
        lo, hi = min(head, dep), max(head, dep)
        for mid in range(lo + 1, hi):
            if head not in ancestors[mid]:
                return False
    return True

"""Feature extraction and the scoring network.

The policy scores every action of a transition system from 48 sparse
features of the configuration: the words and tags of the top stack and
buffer positions plus the words, tags, and labels of selected children of
the top two stack items.  Features index three embedding tables whose
concatenation feeds one hidden layer with a cubic activation, then a
linear layer and a softmax restricted to the legal actions.

All gradients are computed manually; AdaGrad state lives next to each
parameter so training can resume after a reload.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .transitions import Configuration, TransitionSystem, make_system
from .treebank import Sentence

logger = logging.getLogger(__name__)

UNK, NULL, ROOT = "<unk>", "<null>", "<root>"
NUM = "<num>"
RESERVED = (UNK, NULL, ROOT)

N_WORD_FEATURES = 18
N_POS_FEATURES = 18
N_LABEL_FEATURES = 12
N_FEATURES = N_WORD_FEATURES + N_POS_FEATURES + N_LABEL_FEATURES

FORMAT_MAGIC = b"RLPARSE1"
FORMAT_VERSION = 1


def normalize_word(form: str) -> str:
    """Lowercase and collapse number-like tokens onto one id."""
    stripped = form.replace(",", "").replace(".", "").replace("-", "")
    if stripped.isdigit() and stripped:
        return NUM
    return form.lower()


@dataclass(frozen=True)
class Vocab:
    words: tuple[str, ...]
    pos: tuple[str, ...]
    labels: tuple[str, ...]
    word_index: dict[str, int] = field(repr=False, compare=False, default=None)
    pos_index: dict[str, int] = field(repr=False, compare=False, default=None)
    label_index: dict[str, int] = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "word_index", {w: i for i, w in enumerate(self.words)})
        object.__setattr__(self, "pos_index", {p: i for i, p in enumerate(self.pos)})
        object.__setattr__(self, "label_index", {l: i for i, l in enumerate(self.labels)})

    @classmethod
    def build(cls, sentences, word_cutoff: int = 1) -> "Vocab":
        counts: dict[str, int] = {}
        pos_set: set[str] = set()
        label_set: set[str] = set()
        for sent in sentences:
            for tok in sent.tokens:
                w = normalize_word(tok.form)
                counts[w] = counts.get(w, 0) + 1
                pos_set.add(tok.pos)
                label_set.add(tok.label)
        kept = sorted(w for w, c in counts.items() if c >= word_cutoff and w != NUM)
        words = RESERVED + (NUM,) + tuple(kept)
        pos = RESERVED + tuple(sorted(pos_set))
        labels = RESERVED + tuple(sorted(label_set))
        return cls(words=words, pos=pos, labels=labels)

    @property
    def parse_labels(self) -> tuple[str, ...]:
        """Labels usable on arcs, excluding the reserved slots."""
        return self.labels[len(RESERVED):]

    def word_id(self, form: str) -> int:
        return self.word_index.get(normalize_word(form), 0)

    def pos_id(self, tag: str) -> int:
        return self.pos_index.get(tag, 0)

    def label_id(self, label: str) -> int:
        return self.label_index.get(label, 0)


UNK_ID = 0
NULL_ID = 1
ROOT_ID = 2


def _first_two(values: list[int]) -> tuple[int, int]:
    a = values[0] if values else -1
    b = values[1] if len(values) > 1 else -1
    return a, b


def extract_features(config: Configuration, sentence: Sentence, vocab: Vocab) -> np.ndarray:
    """The 48 feature ids for one configuration.

    Layout: 18 word ids, 18 tag ids, 12 label ids.  Position -1 marks an
    absent slot and maps onto the null embedding.
    """
    stack, buffer, heads = config.stack, config.buffer, config.heads
    n = config.n

    s = [stack[-1 - i] if len(stack) > i else -1 for i in range(3)]
    b = [buffer[i] if len(buffer) > i else -1 for i in range(3)]

    child_slots: list[int] = []
    for t in s[:2]:
        if t < 0:
            child_slots.extend([-1] * 6)
            continue
        left = [d for d in range(1, t) if heads[d] == t]
        right = [d for d in range(n, t, -1) if heads[d] == t]
        lc1, lc2 = _first_two(left)
        rc1, rc2 = _first_two(right)
        llc1 = -1
        if lc1 > 0:
            grand = [d for d in range(1, lc1) if heads[d] == lc1]
            llc1 = grand[0] if grand else -1
        rrc1 = -1
        if rc1 > 0:
            grand = [d for d in range(n, rc1, -1) if heads[d] == rc1]
            rrc1 = grand[0] if grand else -1
        child_slots.extend([lc1, rc1, lc2, rc2, llc1, rrc1])

    positions = s + b + child_slots  # 18 positions
    feats = np.empty(N_FEATURES, dtype=np.int32)
    for i, t in enumerate(positions):
        if t < 0:
            feats[i] = NULL_ID
            feats[N_WORD_FEATURES + i] = NULL_ID
        elif t == 0:
            feats[i] = ROOT_ID
            feats[N_WORD_FEATURES + i] = ROOT_ID
        else:
            tok = sentence.tokens[t - 1]
            feats[i] = vocab.word_id(tok.form)
            feats[N_WORD_FEATURES + i] = vocab.pos_id(tok.pos)
    for j, t in enumerate(child_slots):
        k = N_WORD_FEATURES + N_POS_FEATURES + j
        if t <= 0 or config.labels[t] is None:
            feats[k] = NULL_ID
        else:
            feats[k] = vocab.label_id(config.labels[t])
    return feats


@dataclass
class Gradients:
    e_word: np.ndarray
    e_pos: np.ndarray
    e_label: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray

    @classmethod
    def zeros_like(cls, model: "Model") -> "Gradients":
        return cls(*(np.zeros_like(p) for p in model.parameters()))

    def arrays(self) -> tuple[np.ndarray, ...]:
        return (self.e_word, self.e_pos, self.e_label, self.w1, self.b1, self.w2)

    def add(self, other: "Gradients", scale: float = 1.0) -> None:
        for a, b in zip(self.arrays(), other.arrays()):
            a += scale * b

    def scale(self, factor: float) -> None:
        for a in self.arrays():
            a *= factor

    def norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(a * a)) for a in self.arrays())))


PARAM_NAMES = ("e_word", "e_pos", "e_label", "w1", "b1", "w2")


def masked_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Softmax over the legal entries; illegal entries are exactly zero."""
    if logits.ndim == 1:
        return masked_softmax(logits[None, :], mask[None, :])[0]
    if not mask.any(axis=1).all():
        raise ValueError("no legal action to normalize over")
    shifted = np.where(mask, logits, -np.inf)
    shifted = shifted - shifted.max(axis=1, keepdims=True)
    probs = np.where(mask, np.exp(shifted), 0.0)
    probs /= probs.sum(axis=1, keepdims=True)
    return probs


class Model:
    """The scoring network with its vocab and optimizer state."""

    def __init__(self, system_id: str, vocab: Vocab, dim_embed: int,
                 dim_hidden: int, learning_rate: float = 0.01,
                 adagrad_eps: float = 1e-6, seed: int = 0):
        self.system_id = system_id
        self.vocab = vocab
        self.dim_embed = dim_embed
        self.dim_hidden = dim_hidden
        self.learning_rate = learning_rate
        self.adagrad_eps = adagrad_eps
        system = make_system(system_id, vocab.parse_labels)
        self.n_actions = system.n_actions

        rng = np.random.default_rng(seed)
        d, h = dim_embed, dim_hidden
        dim_input = N_FEATURES * d
        self.e_word = rng.uniform(-0.01, 0.01, size=(len(vocab.words), d))
        self.e_pos = rng.uniform(-0.01, 0.01, size=(len(vocab.pos), d))
        self.e_label = rng.uniform(-0.01, 0.01, size=(len(vocab.labels), d))
        bound1 = 1.0 / np.sqrt(dim_input)
        self.w1 = rng.uniform(-bound1, bound1, size=(h, dim_input))
        self.b1 = np.zeros(h)
        bound2 = 1.0 / np.sqrt(h)
        self.w2 = rng.uniform(-bound2, bound2, size=(self.n_actions, h))
        self.accumulators = [np.zeros_like(p) for p in self.parameters()]

    def parameters(self) -> tuple[np.ndarray, ...]:
        return (self.e_word, self.e_pos, self.e_label, self.w1, self.b1, self.w2)

    def make_system(self) -> TransitionSystem:
        return make_system(self.system_id, self.vocab.parse_labels)

    def copy(self) -> "Model":
        dup = object.__new__(Model)
        dup.__dict__.update(self.__dict__)
        for name, arr in zip(PARAM_NAMES, self.parameters()):
            setattr(dup, name, arr.copy())
        dup.accumulators = [a.copy() for a in self.accumulators]
        return dup

    # -- forward / backward ------------------------------------------------

    def forward_batch(self, features: np.ndarray, masks: np.ndarray,
                      dropout: float = 0.0, rng: np.random.Generator | None = None):
        """Score a batch of feature rows.  Returns (probs, cache)."""
        features = np.atleast_2d(features)
        masks = np.atleast_2d(masks)
        B = features.shape[0]
        d = self.dim_embed
        fw = features[:, :N_WORD_FEATURES]
        fp = features[:, N_WORD_FEATURES:N_WORD_FEATURES + N_POS_FEATURES]
        fl = features[:, N_WORD_FEATURES + N_POS_FEATURES:]
        x = np.concatenate(
            [
                self.e_word[fw].reshape(B, -1),
                self.e_pos[fp].reshape(B, -1),
                self.e_label[fl].reshape(B, -1),
            ],
            axis=1,
        )
        z = x @ self.w1.T + self.b1
        hidden = z ** 3
        drop_mask = None
        if dropout > 0.0:
            if rng is None:
                raise ValueError("dropout requires a random generator")
            drop_mask = (rng.random(hidden.shape) >= dropout) / (1.0 - dropout)
            hidden = hidden * drop_mask
        logits = hidden @ self.w2.T
        probs = masked_softmax(logits, masks)
        cache = (features, masks, x, z, hidden, drop_mask, probs)
        return probs, cache

    def forward(self, features: np.ndarray, mask: np.ndarray,
                dropout: float = 0.0, rng: np.random.Generator | None = None):
        probs, cache = self.forward_batch(features[None, :], mask[None, :],
                                          dropout=dropout, rng=rng)
        return probs[0], cache

    def backward_batch(self, cache, grad_logp: np.ndarray) -> Gradients:
        """Gradients of a loss given d loss / d log-prob per action.

        Entries of grad_logp at illegal actions are ignored.  Only the
        embedding rows referenced by the cached features receive gradient.
        """
        features, masks, x, z, hidden, drop_mask, probs = cache
        grad_logp = np.atleast_2d(grad_logp) * masks
        total = grad_logp.sum(axis=1, keepdims=True)
        grad_logits = grad_logp - probs * total
        grads = Gradients.zeros_like(self)
        grads.w2[...] = grad_logits.T @ hidden
        grad_hidden = grad_logits @ self.w2
        if drop_mask is not None:
            grad_hidden = grad_hidden * drop_mask
        grad_z = grad_hidden * 3.0 * z ** 2
        grads.w1[...] = grad_z.T @ x
        grads.b1[...] = grad_z.sum(axis=0)
        grad_x = grad_z @ self.w1
        B = features.shape[0]
        d = self.dim_embed
        w_end = N_WORD_FEATURES * d
        p_end = w_end + N_POS_FEATURES * d
        fw = features[:, :N_WORD_FEATURES]
        fp = features[:, N_WORD_FEATURES:N_WORD_FEATURES + N_POS_FEATURES]
        fl = features[:, N_WORD_FEATURES + N_POS_FEATURES:]
        np.add.at(grads.e_word, fw.ravel(), grad_x[:, :w_end].reshape(-1, d))
        np.add.at(grads.e_pos, fp.ravel(), grad_x[:, w_end:p_end].reshape(-1, d))
        np.add.at(grads.e_label, fl.ravel(), grad_x[:, p_end:].reshape(-1, d))
        return grads

    # -- optimization ------------------------------------------------------

    def adagrad_step(self, grads: Gradients) -> bool:
        """One update.  Returns False (and changes nothing) on bad values."""
        arrays = grads.arrays()
        if not all(np.isfinite(a).all() for a in arrays):
            logger.warning("rejected update containing non-finite gradients")
            return False
        for param, acc, g in zip(self.parameters(), self.accumulators, arrays):
            acc += g * g
            param -= self.learning_rate * g / np.sqrt(acc + self.adagrad_eps)
        return True

    def l2_gradients(self, weight: float) -> Gradients:
        grads = Gradients.zeros_like(self)
        for g, p in zip(grads.arrays(), self.parameters()):
            g += weight * p
        return grads

    # -- persistence ---------------------------------------------------------

    def save(self, path) -> None:
        header = {
            "format_version": FORMAT_VERSION,
            "system": self.system_id,
            "dim_embed": self.dim_embed,
            "dim_hidden": self.dim_hidden,
            "n_actions": self.n_actions,
            "learning_rate": self.learning_rate,
            "adagrad_eps": self.adagrad_eps,
            "vocab": {
                "words": list(self.vocab.words),
                "pos": list(self.vocab.pos),
                "labels": list(self.vocab.labels),
            },
            "arrays": [
                {"name": name, "shape": list(arr.shape), "dtype": "<f8"}
                for name, arr in zip(
                    list(PARAM_NAMES) + [f"acc_{n}" for n in PARAM_NAMES],
                    list(self.parameters()) + self.accumulators,
                )
            ],
        }
        blob = json.dumps(header, sort_keys=True).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(FORMAT_MAGIC)
            fh.write(len(blob).to_bytes(4, "little"))
            fh.write(blob)
            for arr in list(self.parameters()) + self.accumulators:
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path, expected_system: str | None = None) -> "Model":
        with open(path, "rb") as fh:
            data = fh.read()
        if data[: len(FORMAT_MAGIC)] != FORMAT_MAGIC:
            raise ValueError(f"{path}: bad magic at offset 0; not a model file")
        pos = len(FORMAT_MAGIC)
        if len(data) < pos + 4:
            raise ValueError(f"{path}: truncated header length at offset {pos}")
        header_len = int.from_bytes(data[pos:pos + 4], "little")
        pos += 4
        if len(data) < pos + header_len:
            raise ValueError(f"{path}: truncated header at offset {pos}")
        try:
            header = json.loads(data[pos:pos + header_len])
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: corrupt header at offset {pos}: {exc}") from exc
        pos += header_len
        if header.get("format_version") != FORMAT_VERSION:
            raise ValueError(
                f"{path}: unsupported format version {header.get('format_version')}"
            )
        if expected_system is not None and header["system"] != expected_system:
            raise ValueError(
                f"{path}: model was trained for {header['system']!r}, "
                f"not {expected_system!r}"
            )
        vocab = Vocab(
            words=tuple(header["vocab"]["words"]),
            pos=tuple(header["vocab"]["pos"]),
            labels=tuple(header["vocab"]["labels"]),
        )
        model = cls(
            system_id=header["system"],
            vocab=vocab,
            dim_embed=header["dim_embed"],
            dim_hidden=header["dim_hidden"],
            learning_rate=header["learning_rate"],
            adagrad_eps=header["adagrad_eps"],
        )
        if model.n_actions != header["n_actions"]:
            raise ValueError(f"{path}: action inventory mismatch")
        arrays = []
        for spec in header["arrays"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            nbytes = count * 8
            if len(data) < pos + nbytes:
                raise ValueError(f"{path}: truncated array data at offset {pos}")
            arr = np.frombuffer(data[pos:pos + nbytes], dtype="<f8").reshape(shape)
            arrays.append(arr.copy())
            pos += nbytes
        if pos != len(data):
            raise ValueError(f"{path}: {len(data) - pos} trailing bytes at offset {pos}")
        for name, arr in zip(PARAM_NAMES, arrays[: len(PARAM_NAMES)]):
            setattr(model, name, arr)
        model.accumulators = arrays[len(PARAM_NAMES):]
        return model


def load_pretrained_embeddings(model: Model, path) -> int:
    """Overwrite word-embedding rows from a text file of `token v1 .. vd`.

    Returns the number of rows replaced.  Tokens missing from the vocab
    are ignored; dimension mismatches raise.
    """
    replaced = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                continue
            token, values = parts[0], parts[1:]
            if len(values) != model.dim_embed:
                raise ValueError(
                    f"embedding for {token!r} has {len(values)} dims, "
                    f"model expects {model.dim_embed}"
                )
            idx = model.vocab.word_index.get(normalize_word(token))
            if idx is not None:
                model.e_word[idx] = [float(v) for v in values]
                replaced += 1
    return replaced

import numpy as np
import pytest

from rlparse import (
    Model,
    Vocab,
    extract_features,
    load_pretrained_embeddings,
    make_system,
    masked_softmax,
    normalize_word,
    random_projective_corpus,
)
from rlparse.model import (
    NULL_ID,
    N_FEATURES,
    N_LABEL_FEATURES,
    N_POS_FEATURES,
    N_WORD_FEATURES,
    ROOT_ID,
    UNK_ID,
)

from helpers import example_sentence, make_sentence


def small_model(corpus, system_id="arc-standard", d=6, h=8, seed=0):
    vocab = Vocab.build(corpus)
    return Model(system_id, vocab, dim_embed=d, dim_hidden=h, seed=seed)


def test_normalize_word():
    assert normalize_word("Board") == "board"
    assert normalize_word("MiXeD") == "mixed"
    assert normalize_word("1984") == "<num>"
    assert normalize_word("3.5") == "<num>"
    assert normalize_word("R2D2") == "r2d2"


def test_vocab_reserved_slots(example):
    vocab = Vocab.build([example])
    assert vocab.words[UNK_ID] == "<unk>"
    assert vocab.words[NULL_ID] == "<null>"
    assert vocab.words[ROOT_ID] == "<root>"
    assert vocab.pos[:3] == ("<unk>", "<null>", "<root>")
    assert vocab.labels[:3] == ("<unk>", "<null>", "<root>")
    assert "waves" in vocab.words
    assert vocab.word_id("zzz-unseen") == UNK_ID
    assert vocab.word_id("waves") > ROOT_ID
    assert set(vocab.parse_labels) == set(example.gold_tree().labels)


def test_vocab_cutoff():
    a = make_sentence([0, 1], forms=["rare", "common"], sent_id="a")
    b = make_sentence([0, 1], forms=["other", "common"], sent_id="b")
    vocab = Vocab.build([a, b], word_cutoff=2)
    assert vocab.word_id("common") != UNK_ID
    assert vocab.word_id("rare") == UNK_ID


def test_feature_layout_initial(example):
    vocab = Vocab.build([example])
    system = make_system("arc-standard", vocab.parse_labels)
    cfg = system.initial_config(example)
    feats = extract_features(cfg, example, vocab)
    assert feats.shape == (N_FEATURES,)
    assert feats.dtype == np.int32
    words = feats[:N_WORD_FEATURES]
    # stack slots: only the root is on the stack
    assert words[0] == ROOT_ID
    assert words[1] == NULL_ID and words[2] == NULL_ID
    # buffer slots: first three tokens
    assert words[3] == vocab.word_id("waves")
    assert words[4] == vocab.word_id("hit")
    assert words[5] == vocab.word_id("stocks")
    # child slots empty
    assert (words[6:] == NULL_ID).all()
    labels = feats[N_WORD_FEATURES + N_POS_FEATURES:]
    assert labels.shape == (N_LABEL_FEATURES,)
    assert (labels == NULL_ID).all()


def test_feature_children_after_attachment(example):
    from rlparse import Action
    vocab = Vocab.build([example])
    system = make_system("arc-standard", vocab.parse_labels)
    cfg = system.initial_config(example)
    cfg = system.apply(cfg, Action("shift"))
    cfg = system.apply(cfg, Action("shift"))
    cfg = system.apply(cfg, Action("left", "nsubj"))  # waves <- hit
    cfg = system.apply(cfg, Action("shift"))
    # stack (0, 2, 3): s2 = hit with left child waves
    feats = extract_features(cfg, example, vocab)
    words = feats[:N_WORD_FEATURES]
    assert words[0] == vocab.word_id("stocks")
    assert words[1] == vocab.word_id("hit")
    s2_lc1_slot = 6 + 6  # six child slots for s1 come first
    assert words[s2_lc1_slot] == vocab.word_id("waves")
    labels = feats[N_WORD_FEATURES + N_POS_FEATURES:]
    assert vocab.labels[labels[6]] == "nsubj"


def test_masked_softmax_properties():
    rng = np.random.default_rng(0)
    logits = rng.normal(size=(40, 9)) * 40.0
    masks = rng.random((40, 9)) < 0.5
    masks[:, 0] = True  # at least one legal everywhere
    probs = masked_softmax(logits, masks)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-12)
    assert (probs[~masks] == 0.0).all()
    assert (probs >= 0.0).all()


def test_forward_batch_rows_normalized(tiny_corpus):
    model = small_model(tiny_corpus)
    system = model.make_system()
    rows, masks = [], []
    rng = np.random.default_rng(2)
    for sent in tiny_corpus[:6]:
        cfg = system.initial_config(sent)
        while not system.is_terminal(cfg):
            rows.append(extract_features(cfg, sent, model.vocab))
            masks.append(system.legal_mask(cfg))
            legal = system.legal_actions(cfg)
            cfg = system.apply(cfg, legal[rng.integers(len(legal))])
    feats = np.stack(rows)
    m = np.stack(masks)
    probs, _ = model.forward_batch(feats, m)
    assert probs.shape == (len(rows), model.n_actions)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)
    assert (probs[~m] == 0.0).all()


def test_gradient_check_full_coordinates(tiny_corpus):
    """Analytic backward equals central differences on every coordinate of
    a small model; absolute guard covers coordinates near zero."""
    model = small_model(tiny_corpus[:4], d=4, h=5, seed=3)
    system = model.make_system()
    sent = tiny_corpus[0]
    rng = np.random.default_rng(8)
    cfg = system.initial_config(sent)
    rows, masks = [], []
    while not system.is_terminal(cfg):
        rows.append(extract_features(cfg, sent, model.vocab))
        masks.append(system.legal_mask(cfg))
        legal = system.legal_actions(cfg)
        cfg = system.apply(cfg, legal[rng.integers(len(legal))])
    feats, m = np.stack(rows), np.stack(masks)
    coeff = rng.normal(size=(len(rows), model.n_actions)) * m

    def loss():
        probs, _ = model.forward_batch(feats, m)
        logp = np.where(m, np.log(np.maximum(probs, 1e-300)), 0.0)
        return float((coeff * logp).sum())

    _, cache = model.forward_batch(feats, m)
    grads = model.backward_batch(cache, coeff)
    eps = 1e-6
    checked = 0
    for param, grad in zip(model.parameters(), grads.arrays()):
        flat_p = param.ravel()
        flat_g = grad.ravel()
        idx = np.arange(flat_p.size)
        if flat_p.size > 60:
            idx = np.random.default_rng(1).choice(flat_p.size, 60, replace=False)
        for i in idx:
            keep = flat_p[i]
            flat_p[i] = keep + eps
            up = loss()
            flat_p[i] = keep - eps
            down = loss()
            flat_p[i] = keep
            fd = (up - down) / (2 * eps)
            if abs(fd - flat_g[i]) < 1e-8:
                checked += 1
                continue
            rel = abs(fd - flat_g[i]) / max(abs(fd), abs(flat_g[i]))
            assert rel < 1e-4, f"coordinate {i}: fd {fd} vs analytic {flat_g[i]}"
            checked += 1
    assert checked > 100


def test_dropout_requires_rng_and_scales(tiny_corpus):
    from rlparse import Action
    model = small_model(tiny_corpus)
    system = model.make_system()
    sent = next(s for s in tiny_corpus if len(s) >= 4)
    cfg = system.initial_config(sent)
    cfg = system.apply(cfg, Action("shift"))
    cfg = system.apply(cfg, Action("shift"))  # several actions now legal
    feats = extract_features(cfg, sent, model.vocab)[None, :]
    mask = system.legal_mask(cfg)[None, :]
    assert mask.sum() > 1
    with pytest.raises(ValueError):
        model.forward_batch(feats, mask, dropout=0.5)
    rng = np.random.default_rng(0)
    _, cache_drop = model.forward_batch(feats, mask, dropout=0.5, rng=rng)
    _, cache_plain = model.forward_batch(feats, mask)
    dropped = cache_drop[4]
    plain = cache_plain[4]
    # inverted dropout: units are zeroed or rescaled by 1/(1-rate)
    zeroed = dropped == 0.0
    assert zeroed.any() and not zeroed.all()
    assert np.allclose(dropped[~zeroed], 2.0 * plain[~zeroed])


def test_adagrad_rejects_nonfinite(tiny_corpus):
    model = small_model(tiny_corpus)
    from rlparse import Gradients
    grads = Gradients.zeros_like(model)
    grads.w1[0, 0] = np.nan
    before = [p.copy() for p in model.parameters()]
    assert model.adagrad_step(grads) is False
    for b, p in zip(before, model.parameters()):
        assert np.array_equal(b, p)


def test_adagrad_moves_parameters(tiny_corpus):
    model = small_model(tiny_corpus)
    from rlparse import Gradients
    grads = Gradients.zeros_like(model)
    grads.w2[...] = 1.0
    w2_before = model.w2.copy()
    assert model.adagrad_step(grads) is True
    step = w2_before - model.w2
    expected = model.learning_rate * 1.0 / np.sqrt(1.0 + model.adagrad_eps)
    assert np.allclose(step, expected)


def test_l2_gradients(tiny_corpus):
    model = small_model(tiny_corpus)
    grads = model.l2_gradients(0.5)
    for g, p in zip(grads.arrays(), model.parameters()):
        assert np.allclose(g, 0.5 * p)


def test_copy_is_deep(tiny_corpus):
    model = small_model(tiny_corpus)
    dup = model.copy()
    dup.w1[0, 0] += 1.0
    dup.accumulators[0][0] += 1.0
    assert model.w1[0, 0] != dup.w1[0, 0]
    assert model.accumulators[0][0, 0] != dup.accumulators[0][0, 0]


def test_save_load_round_trip(tiny_corpus, tmp_path):
    model = small_model(tiny_corpus, seed=11)
    # dirty the accumulators so persistence of optimizer state is visible
    from rlparse import Gradients
    g = Gradients.zeros_like(model)
    g.w1[...] = 0.25
    model.adagrad_step(g)
    path = tmp_path / "m.bin"
    model.save(path)
    back = Model.load(path)
    for a, b in zip(model.parameters(), back.parameters()):
        assert np.array_equal(a, b)
    for a, b in zip(model.accumulators, back.accumulators):
        assert np.array_equal(a, b)
    assert back.vocab == model.vocab
    assert back.system_id == model.system_id
    # a second save must be byte-identical
    path2 = tmp_path / "m2.bin"
    back.save(path2)
    assert path.read_bytes() == path2.read_bytes()


def test_load_error_reporting(tiny_corpus, tmp_path):
    model = small_model(tiny_corpus)
    path = tmp_path / "m.bin"
    model.save(path)
    data = path.read_bytes()

    bad_magic = tmp_path / "bad_magic.bin"
    bad_magic.write_bytes(b"NOTMODEL" + data[8:])
    with pytest.raises(ValueError, match="offset 0"):
        Model.load(bad_magic)

    truncated = tmp_path / "trunc.bin"
    truncated.write_bytes(data[: len(data) - 16])
    with pytest.raises(ValueError, match="truncated array data at offset"):
        Model.load(truncated)

    trailing = tmp_path / "trail.bin"
    trailing.write_bytes(data + b"\x00" * 8)
    with pytest.raises(ValueError, match="trailing bytes"):
        Model.load(trailing)

    with pytest.raises(ValueError, match="arc-eager"):
        Model.load(path, expected_system="arc-eager")


def test_pretrained_embeddings(tiny_corpus, tmp_path):
    model = small_model(tiny_corpus, d=3)
    known = model.vocab.words[4]
    path = tmp_path / "vec.txt"
    path.write_text(f"{known} 1.0 2.0 3.0\nunseen-token 9 9 9\n")
    replaced = load_pretrained_embeddings(model, path)
    assert replaced == 1
    idx = model.vocab.word_id(known)
    assert np.allclose(model.e_word[idx], [1.0, 2.0, 3.0])
    bad = tmp_path / "bad.txt"
    bad.write_text(f"{known} 1.0 2.0\n")
    with pytest.raises(ValueError, match="dims"):
        load_pretrained_embeddings(model, bad)

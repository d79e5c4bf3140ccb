import numpy as np
import pytest

from rlparse import (
    Action,
    ArcEager,
    ArcStandard,
    IllegalActionError,
    OracleError,
    SwapStandard,
    extract_tree,
    initial_config,
    is_projective,
    make_system,
    projective_order,
    random_projective_corpus,
    random_tree_corpus,
)

from helpers import EXAMPLE_DERIVATION, make_sentence


def parse_action(text):
    kind, _, label = text.partition(":")
    return Action(kind, label or None)


def test_initial_config_shape(example):
    cfg = initial_config(len(example))
    assert cfg.stack == (0,)
    assert cfg.buffer == tuple(range(1, 9))
    assert cfg.heads == (-1,) * 9
    assert cfg.unshifted == frozenset()


def test_example_static_oracle(example, example_system):
    actions = example_system.static_oracle(example)
    assert [str(a) for a in actions] == EXAMPLE_DERIVATION
    assert len(actions) == 2 * len(example)


def test_oracle_reconstructs_gold(example, example_system):
    cfg = example_system.initial_config(example)
    for action in example_system.static_oracle(example):
        assert action in example_system.legal_actions(cfg)
        cfg = example_system.apply(cfg, action)
    assert example_system.is_terminal(cfg)
    assert extract_tree(cfg) == example.gold_tree()


@pytest.mark.parametrize("system_id", ["arc-standard", "arc-eager", "swap-standard"])
def test_round_trip_projective(system_id, tiny_corpus):
    labels = sorted({l for s in tiny_corpus for l in s.gold_tree().labels})
    system = make_system(system_id, tuple(labels))
    for sent in tiny_corpus:
        actions = system.static_oracle(sent)
        cfg = system.initial_config(sent)
        for action in actions:
            cfg = system.apply(cfg, action)
        assert system.is_terminal(cfg)
        assert extract_tree(cfg) == sent.gold_tree()


def test_swap_round_trip_nonprojective():
    corpus = random_tree_corpus(25, seed=3, n_labels=3)
    labels = sorted({l for s in corpus for l in s.gold_tree().labels})
    system = make_system("swap-standard", tuple(labels))
    nonproj = 0
    for sent in corpus:
        nonproj += not is_projective(sent.gold_tree())
        cfg = system.initial_config(sent)
        for action in system.static_oracle(sent):
            cfg = system.apply(cfg, action)
        assert extract_tree(cfg) == sent.gold_tree()
    assert nonproj > 0


@pytest.mark.parametrize("system_id", ["arc-standard", "arc-eager"])
def test_projective_only_oracles_refuse(system_id):
    sent = make_sentence([2, 0, 1, 2])
    assert not is_projective(sent.gold_tree())
    system = make_system(system_id, ("dep",))
    with pytest.raises(OracleError):
        system.static_oracle(sent)


def test_arc_standard_derivation_length(tiny_corpus):
    labels = sorted({l for s in tiny_corpus for l in s.gold_tree().labels})
    system = ArcStandard(tuple(labels))
    for sent in tiny_corpus:
        assert len(system.static_oracle(sent)) == 2 * len(sent)


def test_inventory_sizes():
    labels = ("a", "b", "c")
    assert ArcStandard(labels).n_actions == 2 * 3 + 1
    assert ArcEager(labels).n_actions == 2 * 3 + 3
    assert SwapStandard(labels).n_actions == 2 * 3 + 2


def test_action_index_covers_inventory():
    system = ArcEager(("x", "y"))
    assert len(system.action_index) == system.n_actions
    for action, idx in system.action_index.items():
        assert system.inventory[idx] == action


def test_legal_mask_matches_legal_actions(example, example_system):
    rng = np.random.default_rng(0)
    cfg = example_system.initial_config(example)
    while not example_system.is_terminal(cfg):
        legal = example_system.legal_actions(cfg)
        mask = example_system.legal_mask(cfg)
        assert mask.dtype == bool and mask.shape == (example_system.n_actions,)
        from_mask = {example_system.inventory[i] for i in np.flatnonzero(mask)}
        assert from_mask == set(legal)
        cfg = example_system.apply(cfg, legal[rng.integers(len(legal))])


def test_root_left_arc_illegal(example):
    system = ArcStandard(("dep",))
    cfg = system.initial_config(example)
    cfg = system.apply(cfg, Action("shift"))
    # stack is (0, 1): a left arc would attach the root as a dependent
    assert Action("left", "dep") not in system.legal_actions(cfg)
    with pytest.raises(IllegalActionError):
        system.apply(cfg, Action("left", "dep"))


def test_illegal_when_terminal(example, example_system):
    cfg = example_system.initial_config(example)
    for action in example_system.static_oracle(example):
        cfg = example_system.apply(cfg, action)
    assert example_system.legal_actions(cfg) == []
    with pytest.raises(IllegalActionError):
        example_system.apply(cfg, Action("shift"))


def test_arc_standard_stack_invariants(tiny_corpus):
    """Stack positions stay increasing with the root pinned at the bottom,
    and stacked or buffered tokens never carry a head."""
    labels = sorted({l for s in tiny_corpus for l in s.gold_tree().labels})
    system = ArcStandard(tuple(labels))
    rng = np.random.default_rng(7)
    for sent in tiny_corpus[:12]:
        cfg = system.initial_config(sent)
        while not system.is_terminal(cfg):
            assert cfg.stack[0] == 0
            assert all(a < b for a, b in zip(cfg.stack, cfg.stack[1:]))
            assert all(cfg.heads[t] == -1 for t in cfg.stack[1:])
            assert all(cfg.heads[t] == -1 for t in cfg.buffer)
            assert cfg.buffer == tuple(range(cfg.buffer[0], len(sent) + 1)) if cfg.buffer else True
            legal = system.legal_actions(cfg)
            cfg = system.apply(cfg, legal[rng.integers(len(legal))])


def test_arc_eager_reduce_needs_head():
    sent = make_sentence([0, 1], ["root", "dep"])
    system = ArcEager(("root", "dep"))
    cfg = system.initial_config(sent)
    cfg = system.apply(cfg, Action("shift"))
    # token 1 has no head yet, reduce must be off the menu
    assert Action("reduce") not in system.legal_actions(cfg)
    cfg2 = system.apply(cfg, Action("right", "dep"))
    assert Action("reduce") in system.legal_actions(cfg2)


def test_arc_eager_unshift_cycle():
    # wrong early choices strand a headless token; the machine must hand
    # it back to the buffer exactly once and still terminate
    sent = make_sentence([0, 1, 2], ["root", "a", "b"])
    system = ArcEager(("root", "a", "b"))
    cfg = system.initial_config(sent)
    cfg = system.apply(cfg, Action("shift"))      # 1 stacked, headless
    cfg = system.apply(cfg, Action("shift"))      # 2 stacked, headless
    cfg = system.apply(cfg, Action("right", "b"))  # 2 -> 3, buffer empty
    legal = system.legal_actions(cfg)
    assert legal == [Action("reduce")]
    cfg = system.apply(cfg, Action("reduce"))
    # now (0, 1, 2) with 2 headless and empty buffer: only unshift
    legal = system.legal_actions(cfg)
    assert legal == [Action("unshift")]
    cfg = system.apply(cfg, Action("unshift"))
    assert cfg.buffer == (2,)
    assert 2 in cfg.unshifted
    # an unshifted token may not simply be shifted back
    assert Action("shift") not in system.legal_actions(cfg)
    cfg = system.apply(cfg, Action("right", "a"))
    while not system.is_terminal(cfg):
        legal = system.legal_actions(cfg)
        assert legal
        cfg = system.apply(cfg, legal[0])
    tree = extract_tree(cfg)
    assert tree.heads == (0, 1, 2)


def test_arc_eager_terminates_from_any_policy(tiny_corpus):
    system = ArcEager(("dep",))
    rng = np.random.default_rng(13)
    for sent in tiny_corpus:
        for _ in range(3):
            cfg = system.initial_config(sent)
            steps = 0
            while not system.is_terminal(cfg):
                legal = system.legal_actions(cfg)
                assert legal, f"dead end in {sent.sent_id}"
                cfg = system.apply(cfg, legal[rng.integers(len(legal))])
                steps += 1
                assert steps < 8 * len(sent) + 16
            extract_tree(cfg)


def test_swap_legality():
    sent = make_sentence([2, 0, 1, 2])
    system = SwapStandard(("dep",))
    cfg = system.initial_config(sent)
    assert Action("swap") not in system.legal_actions(cfg)
    cfg = system.apply(cfg, Action("shift"))
    assert Action("swap") not in system.legal_actions(cfg)  # s2 is the root
    cfg = system.apply(cfg, Action("shift"))
    assert Action("swap") in system.legal_actions(cfg)
    swapped = system.apply(cfg, Action("swap"))
    assert swapped.buffer[0] == 1
    assert swapped.stack == (0, 2)
    # swapping pushed s2 forward; s2 < s1 no longer holds after reshift
    cfg2 = system.apply(swapped, Action("shift"))
    assert Action("swap") not in system.legal_actions(cfg2)


def test_projective_order_repairs_crossings():
    tree = make_sentence([2, 0, 1, 2]).gold_tree()
    assert not is_projective(tree)
    rank = projective_order(tree)
    # one rank per token, the root slot pinned at zero
    assert rank[0] == 0
    assert sorted(rank[1:]) == [1, 2, 3, 4]
    # reordering tokens by rank removes every crossing
    remapped_heads = [0] * len(tree)
    for head, _, dep in tree.arcs():
        remapped_heads[rank[dep] - 1] = rank[head] if head else 0
    reordered = make_sentence(remapped_heads).gold_tree()
    assert is_projective(reordered)


def test_make_system_rejects_unknown():
    with pytest.raises(ValueError, match="unknown transition system"):
        make_system("arc-hybrid", ("dep",))


def test_action_str_and_parse():
    assert str(Action("shift")) == "shift"
    assert str(Action("left", "nsubj")) == "left:nsubj"
    assert parse_action("right:dep") == Action("right", "dep")
    assert parse_action("unshift") == Action("unshift")

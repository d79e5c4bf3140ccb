"""Training procedures: supervised imitation and policy gradients.

Supervised training fits the network to static-oracle decisions with a
cross-entropy loss.  The policy-gradient trainers instead score whole
parses: the reward of a trajectory is its number of correctly attached
and labeled non-punctuation tokens, compared against a fixed baseline of
half the scoring tokens.  Several strategies differ only in which
trajectory set they push toward:

* ``reinforce``    one sampled trajectory, classic score-function update
* ``rl-oracle``    the static-oracle derivation itself
* ``rl-random``    k distinct sampled trajectories per sentence
* ``rl-memory``    a per-sentence reservoir of high-reward trajectories
                   with random forgetting

Trajectory probabilities are always recomputed under the current
parameters; stored rollouts only keep features, masks, actions, and the
reward.  All gradient functions return gradients of a loss to minimize.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .decode import Step, Trajectory, evaluate, greedy_parse, sentence_scores
from .model import Gradients, Model, extract_features
from .transitions import OracleError, TransitionSystem, extract_tree
from .treebank import Sentence, is_projective, is_punctuation

logger = logging.getLogger(__name__)

STRATEGIES = ("reinforce", "rl-oracle", "rl-random", "rl-memory")
WEIGHT_MODES = ("normalized", "raw")


def reward_fn(sentence: Sentence, tree, punct: str = "ptb") -> float:
    """Correctly attached and labeled non-punctuation tokens."""
    _, labeled_ok, _ = sentence_scores(sentence, tree, punct)
    return float(labeled_ok)


def baseline_fn(sentence: Sentence, punct: str = "ptb") -> float:
    """Half the scoring tokens: the reward of a coin-flip parser, roughly."""
    total = sum(1 for t in sentence.tokens if not is_punctuation(t, punct))
    return 0.5 * total


@dataclass
class Rollout:
    trajectory: Trajectory
    reward: float


class TrajectoryMemory:
    """Bounded per-sentence store of rollouts, replacing the worst one.

    Before each insertion round every stored rollout is independently
    forgotten with the configured probability, so the store keeps drifting
    toward what the current policy can actually reach.
    """

    def __init__(self, capacity: int, forget: float):
        if capacity < 1:
            raise ValueError("memory capacity must be at least 1")
        if not 0.0 <= forget <= 1.0:
            raise ValueError("forget probability must lie in [0, 1]")
        self.capacity = capacity
        self.forget = forget
        self.entries: list[Rollout] = []

    def update(self, candidates: list[Rollout], rng: np.random.Generator) -> None:
        self.entries = [e for e in self.entries if rng.random() >= self.forget]
        for cand in candidates:
            if len(self.entries) < self.capacity:
                self.entries.append(cand)
                continue
            worst = min(range(len(self.entries)), key=lambda i: self.entries[i].reward)
            if cand.reward > self.entries[worst].reward:
                self.entries[worst] = cand


def _sample_rows(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One action index per row, drawn from each row's distribution."""
    cum = np.cumsum(probs, axis=1)
    draws = rng.random(probs.shape[0])
    picks = (cum < draws[:, None]).sum(axis=1)
    picks = np.minimum(picks, probs.shape[1] - 1)
    # cumulative rounding can land on a zero-probability slot; fall back
    bad = probs[np.arange(len(picks)), picks] <= 0.0
    if bad.any():
        picks[bad] = np.argmax(probs[bad], axis=1)
    return picks


def sample_trajectories(model: Model, sentences: list[Sentence],
                        system: TransitionSystem, k: int,
                        rng: np.random.Generator, punct: str = "ptb",
                        max_total: int = 3000) -> list[list[Rollout]]:
    """k rollouts per sentence, sampled in lockstep so the network runs batched.

    Rollouts of one sentence are deduplicated by their action sequence.
    Rollouts that fail to terminate within 4n+8 actions are discarded.
    """
    if not sentences:
        return []
    replicas = k
    if len(sentences) * k > max_total:
        replicas = max(1, max_total // len(sentences))
    live = []
    for si, sent in enumerate(sentences):
        limit = 4 * len(sent) + 8
        for _ in range(replicas):
            live.append({
                "si": si, "config": system.initial_config(sent),
                "steps": [], "limit": limit,
            })
    done: list[list[Rollout]] = [[] for _ in sentences]
    while live:
        feats = np.stack([
            extract_features(inst["config"], sentences[inst["si"]], model.vocab)
            for inst in live])
        masks = np.stack([system.legal_mask(inst["config"]) for inst in live])
        probs, _ = model.forward_batch(feats, masks)
        picks = _sample_rows(probs, rng)
        survivors = []
        for row, inst in enumerate(live):
            aid = int(picks[row])
            inst["steps"].append(Step(feats[row], aid, float(probs[row, aid]), masks[row]))
            inst["config"] = system.apply(inst["config"], system.inventory[aid])
            if system.is_terminal(inst["config"]):
                sent = sentences[inst["si"]]
                tree = extract_tree(inst["config"])
                traj = Trajectory(system.system_id, inst["steps"])
                done[inst["si"]].append(Rollout(traj, reward_fn(sent, tree, punct)))
            elif len(inst["steps"]) >= inst["limit"]:
                pass  # aborted rollout, dropped
            else:
                survivors.append(inst)
        live = survivors
    for si, rollouts in enumerate(done):
        seen: set[tuple[int, ...]] = set()
        unique = []
        for r in rollouts:
            key = r.trajectory.action_ids()
            if key not in seen:
                seen.add(key)
                unique.append(r)
        done[si] = unique
    return done


def trajectory_log_prob(model: Model, traj: Trajectory) -> float:
    """Log-probability of a recorded trajectory under the current parameters."""
    if not traj.steps:
        return 0.0
    feats = np.stack([s.features for s in traj.steps])
    masks = np.stack([s.legal_mask for s in traj.steps])
    probs, _ = model.forward_batch(feats, masks)
    taken = probs[np.arange(len(traj.steps)), [s.action_id for s in traj.steps]]
    return float(np.sum(np.log(np.maximum(taken, 1e-300))))


def apg_gradient(model: Model, groups: list[tuple[Sentence, list[Rollout]]],
                 punct: str = "ptb", weight_mode: str = "normalized"
                 ) -> tuple[Gradients, dict]:
    """Gradient that pushes probability toward high-reward trajectories.

    Every trajectory contributes its advantage (reward minus baseline)
    times a trajectory weight.  With ``normalized`` weights each
    sentence's trajectory set is weighted by a softmax of the current
    log-probabilities; ``raw`` uses the plain trajectory probabilities,
    which makes the result the exact gradient of minus the expected
    truncated advantage and is mainly useful for numerical checking.
    Weights are treated as constants, not differentiated through.
    """
    if weight_mode not in WEIGHT_MODES:
        raise ValueError(f"unknown weight mode {weight_mode!r}; choose from {WEIGHT_MODES}")
    feats_rows: list[np.ndarray] = []
    masks_rows: list[np.ndarray] = []
    action_rows: list[int] = []
    spans: list[tuple[int, int]] = []
    traj_meta: list[tuple[int, float]] = []  # (group index, advantage)
    contributing = 0
    reward_sum = 0.0
    n_traj = 0
    for gi, (sent, rollouts) in enumerate(groups):
        if not rollouts:
            continue
        contributing += 1
        b = baseline_fn(sent, punct)
        for roll in rollouts:
            start = len(action_rows)
            for st in roll.trajectory.steps:
                feats_rows.append(st.features)
                masks_rows.append(st.legal_mask)
                action_rows.append(st.action_id)
            spans.append((start, len(action_rows)))
            traj_meta.append((gi, roll.reward - b))
            reward_sum += roll.reward
            n_traj += 1
    stats = {"contributing": contributing, "trajectories": n_traj,
             "steps": len(action_rows),
             "mean_reward": reward_sum / n_traj if n_traj else 0.0}
    if contributing == 0 or not action_rows:
        return Gradients.zeros_like(model), stats
    feats = np.stack(feats_rows)
    masks = np.stack(masks_rows)
    actions = np.asarray(action_rows)
    probs, cache = model.forward_batch(feats, masks)
    taken = np.log(np.maximum(probs[np.arange(len(actions)), actions], 1e-300))
    logp = np.array([taken[a:b].sum() for a, b in spans])
    weights = np.empty(len(spans))
    by_group: dict[int, list[int]] = {}
    for ti, (gi, _) in enumerate(traj_meta):
        by_group.setdefault(gi, []).append(ti)
    for gi, tis in by_group.items():
        lp = logp[tis]
        if weight_mode == "normalized":
            shifted = np.exp(lp - lp.max())
            weights[tis] = shifted / shifted.sum()
        else:
            weights[tis] = np.exp(lp)
    grad_logp = np.zeros_like(probs)
    rows = np.arange(len(actions))
    coeff_rows = np.empty(len(actions))
    for ti, (start, end) in enumerate(spans):
        advantage = traj_meta[ti][1]
        coeff_rows[start:end] = -advantage * weights[ti] / contributing
    grad_logp[rows, actions] = coeff_rows
    return model.backward_batch(cache, grad_logp), stats


def reinforce_gradient(model: Model, sentences: list[Sentence],
                       system: TransitionSystem, rng: np.random.Generator,
                       punct: str = "ptb") -> tuple[Gradients, dict]:
    """Score-function gradient from a single sampled trajectory per sentence."""
    batches = sample_trajectories(model, sentences, system, 1, rng, punct)
    feats_rows, masks_rows, action_rows, coeffs = [], [], [], []
    contributing = 0
    reward_sum = 0.0
    for sent, rollouts in zip(sentences, batches):
        if not rollouts:
            continue
        contributing += 1
        roll = rollouts[0]
        advantage = roll.reward - baseline_fn(sent, punct)
        reward_sum += roll.reward
        for st in roll.trajectory.steps:
            feats_rows.append(st.features)
            masks_rows.append(st.legal_mask)
            action_rows.append(st.action_id)
            coeffs.append(-advantage)
    stats = {"contributing": contributing, "trajectories": contributing,
             "steps": len(action_rows),
             "mean_reward": reward_sum / contributing if contributing else 0.0}
    if not action_rows:
        return Gradients.zeros_like(model), stats
    feats = np.stack(feats_rows)
    masks = np.stack(masks_rows)
    actions = np.asarray(action_rows)
    _, cache = model.forward_batch(feats, masks)
    grad_logp = np.zeros((len(actions), model.n_actions))
    grad_logp[np.arange(len(actions)), actions] = np.asarray(coeffs) / contributing
    return model.backward_batch(cache, grad_logp), stats


# -- supervised --------------------------------------------------------------


def build_oracle_dataset(model: Model, sentences: list[Sentence],
                         system: TransitionSystem | None = None):
    """Static-oracle decisions as flat arrays: features, action ids, legal masks."""
    if system is None:
        system = model.make_system()
    feats_rows, action_rows, masks_rows = [], [], []
    skipped = 0
    for sent in sentences:
        try:
            actions = system.static_oracle(sent)
        except OracleError:
            skipped += 1
            continue
        config = system.initial_config(sent)
        for action in actions:
            feats_rows.append(extract_features(config, sent, model.vocab))
            masks_rows.append(system.legal_mask(config))
            action_rows.append(system.action_index[action])
            config = system.apply(config, action)
    if skipped:
        logger.info("oracle dataset: skipped %d sentences without a derivation", skipped)
    if not feats_rows:
        raise ValueError("no trainable sentences; every derivation failed")
    return (np.stack(feats_rows).astype(np.int32),
            np.asarray(action_rows, dtype=np.int64),
            np.stack(masks_rows))


def _snapshot(model: Model):
    return ([p.copy() for p in model.parameters()],
            [a.copy() for a in model.accumulators])


def _restore(model: Model, snap) -> None:
    for param, saved in zip(model.parameters(), snap[0]):
        param[...] = saved
    for acc, saved in zip(model.accumulators, snap[1]):
        acc[...] = saved


class _TsvLog:
    def __init__(self, path, fields: tuple[str, ...]):
        self.fields = fields
        self.fh = open(path, "w", encoding="utf-8") if path else None
        if self.fh:
            self.fh.write("\t".join(fields) + "\n")

    def row(self, values: dict) -> None:
        if not self.fh:
            return
        cells = []
        for f in self.fields:
            v = values.get(f, "")
            cells.append(f"{v:.6g}" if isinstance(v, float) else str(v))
        self.fh.write("\t".join(cells) + "\n")
        self.fh.flush()

    def close(self) -> None:
        if self.fh:
            self.fh.close()


def _dev_scores(model: Model, dev: list[Sentence], punct: str) -> tuple[float, float]:
    trees = [greedy_parse(model, s)[0] for s in dev]
    report = evaluate(dev, trees, punct)
    return report.uas, report.las


def train_supervised(model: Model, train: list[Sentence],
                     dev: list[Sentence] | None = None, epochs: int = 20,
                     batch_size: int = 32, l2: float = 1e-8,
                     dropout: float = 0.5, seed: int = 0,
                     punct: str = "ptb", log_path=None) -> list[dict]:
    """Cross-entropy training on static-oracle decisions.

    Shuffled minibatches, inverted dropout on the hidden layer, L2 decay
    folded into each step.  When a dev set is given the parameters that
    scored the best dev LAS are restored at the end.
    """
    feats, actions, masks = build_oracle_dataset(model, train)
    n = len(actions)
    rng = np.random.default_rng(seed)
    log = _TsvLog(log_path, ("epoch", "nll", "dev_uas", "dev_las"))
    history: list[dict] = []
    best_las, best_snap = -1.0, None
    try:
        for epoch in range(1, epochs + 1):
            order = rng.permutation(n)
            nll_total = 0.0
            for lo in range(0, n, batch_size):
                idx = order[lo:lo + batch_size]
                probs, cache = model.forward_batch(feats[idx], masks[idx],
                                                   dropout=dropout, rng=rng)
                gold = actions[idx]
                taken = probs[np.arange(len(idx)), gold]
                nll_total += -float(np.sum(np.log(np.maximum(taken, 1e-300))))
                grad_logp = np.zeros_like(probs)
                grad_logp[np.arange(len(idx)), gold] = -1.0 / len(idx)
                grads = model.backward_batch(cache, grad_logp)
                if l2:
                    grads.add(model.l2_gradients(l2))
                model.adagrad_step(grads)
            row = {"epoch": epoch, "nll": nll_total / n}
            if dev is not None:
                row["dev_uas"], row["dev_las"] = _dev_scores(model, dev, punct)
                if row["dev_las"] > best_las:
                    best_las, best_snap = row["dev_las"], _snapshot(model)
            history.append(row)
            log.row(row)
    finally:
        log.close()
    if best_snap is not None:
        _restore(model, best_snap)
    return history


# -- reinforcement -----------------------------------------------------------


@dataclass
class RLConfig:
    strategy: str = "rl-random"
    k: int = 8
    forget: float = 0.01
    batch_size: int = 512
    updates: int = 1000
    eval_every: int = 50
    seed: int = 0
    punct: str = "ptb"
    weight_mode: str = "normalized"
    max_samples_per_update: int = 3000
    learning_rate: float | None = None  # None keeps the model's current rate

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if self.weight_mode not in WEIGHT_MODES:
            raise ValueError(f"unknown weight mode {self.weight_mode!r}")
        if self.k < 1:
            raise ValueError("k must be at least 1")


def _oracle_rollout(system: TransitionSystem, model: Model,
                    sentence: Sentence, punct: str) -> Rollout:
    actions = system.static_oracle(sentence)
    config = system.initial_config(sentence)
    steps = []
    for action in actions:
        feats = extract_features(config, sentence, model.vocab)
        mask = system.legal_mask(config)
        steps.append(Step(feats, system.action_index[action], 0.0, mask))
        config = system.apply(config, action)
    reward = reward_fn(sentence, extract_tree(config), punct)
    return Rollout(Trajectory(system.system_id, steps), reward)


def train_rl(model: Model, train: list[Sentence],
             dev: list[Sentence] | None = None,
             config: RLConfig | None = None, log_path=None) -> list[dict]:
    """Policy-gradient training; see the module docstring for the strategies.

    No dropout and no L2 here: exploration is the regularizer.  When a dev
    set is given the best-LAS parameters are restored at the end.
    """
    cfg = config or RLConfig()
    system = model.make_system()
    usable = list(train)
    if system.system_id != "swap-standard":
        usable = [s for s in usable if is_projective(s.gold_tree())]
        dropped = len(train) - len(usable)
        if dropped:
            logger.info("excluded %d non-projective sentences from rewards", dropped)
    if not usable:
        raise ValueError("no usable training sentences")
    if cfg.learning_rate is not None:
        model.learning_rate = cfg.learning_rate
    rng = np.random.default_rng(cfg.seed)
    memories: dict[int, TrajectoryMemory] = {}
    oracle_cache: dict[int, Rollout] = {}
    log = _TsvLog(log_path, ("update", "mean_reward", "trajectories",
                             "grad_norm", "dev_uas", "dev_las"))
    history: list[dict] = []
    best_las, best_snap = -1.0, None
    if dev is not None:
        # the untouched model competes too; updates that only hurt get discarded
        best_las, best_snap = _dev_scores(model, dev, cfg.punct)[1], _snapshot(model)
    try:
        for update in range(1, cfg.updates + 1):
            size = min(cfg.batch_size, len(usable))
            chosen = rng.choice(len(usable), size=size, replace=False)
            batch = [usable[i] for i in chosen]
            if cfg.strategy == "reinforce":
                grads, stats = reinforce_gradient(model, batch, system, rng, cfg.punct)
            elif cfg.strategy == "rl-oracle":
                groups = []
                for i, sent in zip(chosen, batch):
                    if i not in oracle_cache:
                        oracle_cache[i] = _oracle_rollout(system, model, sent, cfg.punct)
                    groups.append((sent, [oracle_cache[i]]))
                grads, stats = apg_gradient(model, groups, cfg.punct, cfg.weight_mode)
            else:
                sampled = sample_trajectories(model, batch, system, cfg.k, rng,
                                              cfg.punct, cfg.max_samples_per_update)
                if cfg.strategy == "rl-memory":
                    groups = []
                    for i, sent, fresh in zip(chosen, batch, sampled):
                        mem = memories.setdefault(
                            int(i), TrajectoryMemory(cfg.k, cfg.forget))
                        mem.update(fresh, rng)
                        groups.append((sent, list(mem.entries)))
                else:
                    groups = list(zip(batch, sampled))
                grads, stats = apg_gradient(model, groups, cfg.punct, cfg.weight_mode)
            model.adagrad_step(grads)
            row = {"update": update, "mean_reward": stats["mean_reward"],
                   "trajectories": stats["trajectories"], "grad_norm": grads.norm()}
            # the final update always gets a dev score so the run ends measured
            if dev is not None and (update % cfg.eval_every == 0
                                    or update == cfg.updates):
                row["dev_uas"], row["dev_las"] = _dev_scores(model, dev, cfg.punct)
                if row["dev_las"] > best_las:
                    best_las, best_snap = row["dev_las"], _snapshot(model)
            history.append(row)
            log.row(row)
    finally:
        log.close()
    if best_snap is not None:
        _restore(model, best_snap)
    return history

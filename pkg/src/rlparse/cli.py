"""Command-line front end.

Four subcommands: ``train``, ``parse``, ``eval``, ``analyze``.  Every
option can also come from a flat ``key=value`` config file or from an
``RLPARSE_<NAME>`` environment variable; precedence is built-in default,
then config file, then environment, then command-line flag.

Diagnostics go to stderr through ``logging``; results go to stdout or to
the requested output file.  The exit status is 0 exactly when the
command succeeded.
"""

from __future__ import annotations

import argparse
import logging
import multiprocessing
import os
import sys
from dataclasses import dataclass

from .error_analysis import aggregate, analyze_sentence
from .decode import evaluate, greedy_parse
from .model import Model, Vocab, load_pretrained_embeddings
from .training import RLConfig, train_rl, train_supervised
from .transitions import SYSTEM_IDS
from .treebank import TreebankError, is_projective, load_conll, write_conll

logger = logging.getLogger("rlparse")

MODES = ("sl", "reinforce", "rl-oracle", "rl-random", "rl-memory")


class CliError(Exception):
    """User-facing failure; message printed to stderr, exit status 1."""


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class Opt:
    name: str
    type: type
    default: object
    help: str
    choices: tuple | None = None
    flag: bool = False  # store-true switch; config/env still accept booleans


_COMMON_IO = [
    Opt("format", str, "conllu", "treebank layout", ("conllu", "conllx")),
]

COMMANDS: dict[str, list[Opt]] = {
    "train": _COMMON_IO + [
        Opt("train", str, None, "gold training treebank (required)"),
        Opt("dev", str, None, "held-out treebank for model selection"),
        Opt("model_out", str, None, "where to save the trained model (required)"),
        Opt("init", str, None, "warm-start from a saved model"),
        Opt("mode", str, "sl", "training mode", MODES),
        Opt("system", str, "arc-standard", "transition system", tuple(SYSTEM_IDS)),
        Opt("dim_embed", int, 50, "embedding width"),
        Opt("dim_hidden", int, 200, "hidden layer width"),
        Opt("learning_rate", float, 0.01, "adagrad step size"),
        Opt("word_cutoff", int, 1, "min frequency for a word to get its own embedding"),
        Opt("epochs", int, 20, "supervised passes over the data"),
        Opt("batch_size", int, None, "minibatch size (default 32 supervised, 512 rl)"),
        Opt("l2", float, 1e-8, "supervised weight decay"),
        Opt("dropout", float, 0.5, "supervised hidden dropout rate"),
        Opt("k", int, 8, "rollouts per sentence"),
        Opt("forget", float, 0.01, "memory forgetting rate"),
        Opt("updates", int, 1000, "rl parameter updates"),
        Opt("eval_every", int, 50, "dev evaluation period in updates"),
        Opt("weight_mode", str, "normalized", "rollout weighting",
            ("normalized", "raw")),
        Opt("embeddings", str, None, "pretrained word vectors, text format"),
        Opt("punct", str, "ptb", "punctuation convention", ("ptb", "ud")),
        Opt("seed", int, 0, "rng seed"),
        Opt("log", str, None, "TSV training log path"),
    ],
    "parse": _COMMON_IO + [
        Opt("model", str, None, "saved model (required)"),
        Opt("input", str, None, "treebank to parse (required)"),
        Opt("output", str, "-", "where to write parses, - for stdout"),
        Opt("jobs", int, 1, "worker processes"),
    ],
    "eval": _COMMON_IO + [
        Opt("model", str, None, "saved model (required)"),
        Opt("input", str, None, "gold treebank to score against (required)"),
        Opt("punct", str, "ptb", "punctuation convention", ("ptb", "ud")),
        Opt("jobs", int, 1, "worker processes"),
    ],
    "analyze": _COMMON_IO + [
        Opt("model", str, None, "saved model (required)"),
        Opt("input", str, None, "gold treebank to analyze (required)"),
        Opt("alternative", bool, False,
            "use the stricter pass-pair propagation count in the summary",
            flag=True),
        Opt("records", str, None, "optional per-sentence TSV output"),
        Opt("jobs", int, 1, "worker processes"),
    ],
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rlparse",
        description="greedy transition-based dependency parsing, "
                    "supervised and policy-gradient training")
    sub = parser.add_subparsers(dest="command", required=True)
    for command, opts in COMMANDS.items():
        sp = sub.add_parser(command)
        sp.add_argument("--config", default=None,
                        help="flat key=value file supplying defaults")
        for opt in opts:
            flag = "--" + opt.name.replace("_", "-")
            if opt.flag:
                # default None so merge can tell "absent" from "off"
                sp.add_argument(flag, action="store_const", const=True,
                                default=None, help=opt.help)
            else:
                sp.add_argument(flag, type=opt.type, choices=opt.choices,
                                default=None, help=opt.help)
    return parser


def read_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for line_no, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise CliError(f"{path}:{line_no}: expected key=value")
                key, _, value = line.partition("=")
                values[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}") from exc
    return values


def _convert(opt: Opt, text: str, source: str):
    try:
        value = _parse_bool(text) if opt.type is bool else opt.type(text)
    except ValueError as exc:
        raise CliError(f"{source}: bad value for {opt.name}: {exc}") from exc
    if opt.choices and value not in opt.choices:
        raise CliError(
            f"{source}: {opt.name} must be one of {', '.join(opt.choices)}")
    return value


def resolve_options(command: str, args: argparse.Namespace) -> dict:
    """Merge defaults, config file, environment, and flags, in that order."""
    opts = {o.name: o for o in COMMANDS[command]}
    values = {name: o.default for name, o in opts.items()}
    if args.config:
        for key, text in read_config_file(args.config).items():
            if key not in opts:
                raise CliError(
                    f"{args.config}: unknown option {key!r} for "
                    f"'{command}' (known: {', '.join(sorted(opts))})")
            values[key] = _convert(opts[key], text, args.config)
    for name, opt in opts.items():
        text = os.environ.get("RLPARSE_" + name.upper())
        if text is not None:
            values[name] = _convert(opt, text, "environment")
    for name in opts:
        given = getattr(args, name)
        if given is not None:
            values[name] = given
    return values


def _require(values: dict, command: str, *names: str) -> None:
    for name in names:
        if values[name] is None:
            raise CliError(
                f"'{command}' needs --{name.replace('_', '-')}")


def _load(path: str, fmt: str):
    try:
        sentences = load_conll(path, fmt=fmt)
    except (OSError, TreebankError) as exc:
        raise CliError(str(exc)) from exc
    if not sentences:
        raise CliError(f"{path}: no sentences")
    return sentences


def _load_model(path: str) -> Model:
    try:
        return Model.load(path)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot load model {path}: {exc}") from exc


def cmd_train(values: dict) -> int:
    _require(values, "train", "train", "model_out")
    train = _load(values["train"], values["format"])
    dev = _load(values["dev"], values["format"]) if values["dev"] else None

    if values["init"]:
        model = _load_model(values["init"])
        if model.system_id != values["system"] and values["system"] != "arc-standard":
            raise CliError(
                f"--init model uses {model.system_id}, flags ask for {values['system']}")
        logger.info("warm start from %s (%s, %d labels)", values["init"],
                    model.system_id, len(model.vocab.parse_labels))
    else:
        vocab = Vocab.build(train, word_cutoff=values["word_cutoff"])
        model = Model(values["system"], vocab,
                      dim_embed=values["dim_embed"],
                      dim_hidden=values["dim_hidden"],
                      learning_rate=values["learning_rate"],
                      seed=values["seed"])
        if values["embeddings"]:
            hit = load_pretrained_embeddings(model, values["embeddings"])
            logger.info("initialized %d word embeddings from %s",
                        hit, values["embeddings"])

    mode = values["mode"]
    if mode == "sl":
        batch = values["batch_size"] if values["batch_size"] is not None else 32
        history = train_supervised(
            model, train, dev, epochs=values["epochs"], batch_size=batch,
            l2=values["l2"], dropout=values["dropout"], seed=values["seed"],
            punct=values["punct"], log_path=values["log"])
    else:
        if not values["init"]:
            logger.warning("policy-gradient training from a random model; "
                           "consider --init with a supervised model")
        batch = values["batch_size"] if values["batch_size"] is not None else 512
        cfg = RLConfig(strategy=mode, k=values["k"], forget=values["forget"],
                       batch_size=batch, updates=values["updates"],
                       eval_every=values["eval_every"], seed=values["seed"],
                       punct=values["punct"], weight_mode=values["weight_mode"],
                       learning_rate=values["learning_rate"])
        history = train_rl(model, train, dev, cfg, log_path=values["log"])

    if history and "dev_las" in history[-1]:
        logger.info("final dev LAS %.2f UAS %.2f",
                    history[-1]["dev_las"], history[-1]["dev_uas"])
    model.save(values["model_out"])
    logger.info("model written to %s", values["model_out"])
    return 0


# one loaded model per worker process; None while in the parent
_worker_model: Model | None = None


def _init_worker(model_path: str) -> None:
    global _worker_model
    _worker_model = Model.load(model_path)


def _parse_one(sentence):
    tree, _ = greedy_parse(_worker_model, sentence)
    return tree


def _analyze_one(sentence):
    return analyze_sentence(_worker_model, sentence)


def _map_sentences(model_path: str, worker, sentences, jobs: int) -> list:
    """Order-preserving map; identical output for any worker count."""
    global _worker_model
    # fail on a bad model path here, not inside a worker process
    _worker_model = _load_model(model_path)
    if jobs <= 1:
        return [worker(s) for s in sentences]
    chunk = max(1, len(sentences) // (jobs * 4))
    with multiprocessing.Pool(jobs, initializer=_init_worker,
                              initargs=(model_path,)) as pool:
        return pool.map(worker, sentences, chunksize=chunk)


def cmd_parse(values: dict) -> int:
    _require(values, "parse", "model", "input")
    sentences = _load(values["input"], values["format"])
    trees = _map_sentences(values["model"], _parse_one, sentences,
                           values["jobs"])
    if values["output"] == "-":
        write_conll(sentences, sys.stdout, trees=trees, fmt=values["format"])
    else:
        write_conll(sentences, values["output"], trees=trees,
                    fmt=values["format"])
        logger.info("wrote %d parses to %s", len(trees), values["output"])
    return 0


def cmd_eval(values: dict) -> int:
    _require(values, "eval", "model", "input")
    sentences = _load(values["input"], values["format"])
    trees = _map_sentences(values["model"], _parse_one, sentences,
                           values["jobs"])
    report = evaluate(sentences, trees, punct=values["punct"])
    print(f"sentences  {len(sentences)}")
    print(f"tokens     {report.total}")
    print(f"UAS        {report.uas:.2f}")
    print(f"LAS        {report.las:.2f}")
    return 0


def cmd_analyze(values: dict) -> int:
    _require(values, "analyze", "model", "input")
    sentences = _load(values["input"], values["format"])
    projective = [s for s in sentences if is_projective(s.gold_tree())]
    skipped = len(sentences) - len(projective)
    if skipped:
        logger.info("skipping %d non-projective sentences", skipped)
    if not projective:
        raise CliError("no projective sentences to analyze")
    records = _map_sentences(values["model"], _analyze_one, projective,
                             values["jobs"])
    report = aggregate(records)
    print(report.format_table())
    if values["alternative"]:
        denom = report.decision_errors
        pct = 100.0 * report.alternative / denom if denom else 0.0
        print(f"{'Error Propagation (%, alternative)':<36}{pct:>10.1f}")
    if values["records"]:
        with open(values["records"], "w", encoding="utf-8") as fh:
            fh.write("sent_id\tconverged\tpasses\tdecision_errors\tfixed\t"
                     "propagated\tnew_errors\tlabeled_loss\tunlabeled_loss\n")
            for rec in records:
                fh.write(f"{rec.sent_id}\t{int(rec.converged)}\t{rec.passes}\t"
                         f"{rec.decision_errors}\t{rec.fixed}\t"
                         f"{rec.propagated}\t{rec.new_errors}\t"
                         f"{rec.labeled_loss}\t{rec.unlabeled_loss}\n")
        logger.info("per-sentence records written to %s", values["records"])
    return 0


_DISPATCH = {
    "train": cmd_train,
    "parse": cmd_parse,
    "eval": cmd_eval,
    "analyze": cmd_analyze,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        values = resolve_options(args.command, args)
        return _DISPATCH[args.command](values)
    except CliError as exc:
        logger.error("%s", exc)
        return 1
    except KeyboardInterrupt:
        logger.error("interrupted")
        return 130


if __name__ == "__main__":
    sys.exit(main())

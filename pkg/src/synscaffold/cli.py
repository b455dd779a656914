"""Command-line entry point: ``synscaffold {train,evaluate,predict,extract-scaffold}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import data
from .config import TASK_DEFAULTS, ConfigError, load_config
from .metrics import report_lines
from .scaffold import SCHEMES, LabelScheme, TreeParseError, parse_bracketed_tree, scaffold_instance
from .training import (NumericalError, evaluate_model, flatten_scores, load_corpus, load_model,
                       predict_corpus, score_predictions, train, write_predictions)

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="synscaffold", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--task", choices=sorted(TASK_DEFAULTS))
        p.add_argument("--seed", type=int)

    p = sub.add_parser("train", help="train a model and write the best-dev checkpoint")
    common(p)
    p.add_argument("--scaffold-scheme", choices=("none",) + SCHEMES)
    p.add_argument("--delta", type=float)
    p.add_argument("--train", dest="train_path")
    p.add_argument("--dev", dest="dev_path")
    p.add_argument("--treebank", dest="treebank_path")
    p.add_argument("--embeddings", dest="embeddings_path")
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", dest="out_dir", help="output directory")

    p = sub.add_parser("evaluate", help="score a corpus with a checkpoint (or a predictions file)")
    p.add_argument("corpus")
    p.add_argument("--checkpoint")
    p.add_argument("--predictions", help="score this predictions file instead of running a model")
    p.add_argument("--task", choices=sorted(TASK_DEFAULTS), help="needed with --predictions")
    p.add_argument("--out", help="line-JSON report path (default: stdout)")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("predict", help="annotate a corpus with a checkpoint")
    p.add_argument("corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("extract-scaffold", help="write span labels for every treebank sentence")
    p.add_argument("treebank")
    common(p)
    p.add_argument("--scaffold-scheme", choices=SCHEMES, default="common")
    p.add_argument("--max-span-width", "-D", type=int)
    p.add_argument("--out", required=True)
    return parser


def cmd_train(args):
    overrides = {k: getattr(args, k) for k in ("task", "seed", "delta", "train_path", "dev_path",
                                               "treebank_path", "embeddings_path", "epochs", "out_dir")}
    overrides["scaffold_scheme"] = args.scaffold_scheme
    config = load_config(args.config, **overrides)
    if not config.train_path:
        raise UsageError("no training corpus: set train_path or pass --train")
    result = train(config)
    print(json.dumps({"checkpoint": result.checkpoint, "best_epoch": result.best_epoch,
                      config.early_stopping_metric: result.best_metric}))


def cmd_evaluate(args):
    if args.predictions:
        if not args.task and not args.checkpoint:
            raise UsageError("--predictions needs --task or --checkpoint")
        config = load_model(args.checkpoint).config if args.checkpoint else load_config(task=args.task)
        gold = load_corpus(config, args.corpus)
        predicted = load_corpus(config, args.predictions)
        if len(gold) != len(predicted):
            raise data.CorpusError(f"{len(predicted)} predicted items for {len(gold)} gold items")
        scores = score_predictions(config, gold, predicted)
    else:
        if not args.checkpoint:
            raise UsageError("evaluate needs --checkpoint or --predictions")
        model = load_model(args.checkpoint)
        scores = evaluate_model(model, load_corpus(model.config, args.corpus))
    scores = flatten_scores(scores)
    lines = report_lines(scores)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")
        if not args.no_figures:
            from .plotting import plot_scores

            plot_scores(scores, os.path.splitext(args.out)[0] + ".png")
    else:
        print("\n".join(lines))


def cmd_predict(args):
    model = load_model(args.checkpoint)
    items = load_corpus(model.config, args.corpus)
    write_predictions(args.out, model.config, predict_corpus(model, items))


def cmd_extract_scaffold(args):
    config = load_config(args.config, task=args.task, seed=args.seed)
    D = args.max_span_width or config.max_span_width
    scheme = LabelScheme(args.scaffold_scheme, frozenset(config.class1))
    rows = []
    with open(args.treebank, encoding="utf-8") as f:
        for number, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                tree = parse_bracketed_tree(line)
            except TreeParseError as exc:
                raise data.CorpusError(f"{args.treebank}:{number}: {exc}") from None
            inst = scaffold_instance(tree, scheme, D)
            rows.append(json.dumps({"tokens": inst.tokens, "pos": inst.pos,
                                    "target": list(inst.target),
                                    "spans": [[i, j, z] for (i, j), z in zip(inst.spans, inst.labels)]},
                                   ensure_ascii=False))
    with open(args.out, "w", encoding="utf-8") as f:
        f.writelines(r + "\n" for r in rows)


COMMANDS = {"train": cmd_train, "evaluate": cmd_evaluate, "predict": cmd_predict,
            "extract-scaffold": cmd_extract_scaffold}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"synscaffold: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, FloatingPointError) as exc:
        print(f"synscaffold: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError) as exc:
        print(f"synscaffold: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())

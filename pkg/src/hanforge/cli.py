"""Command-line front end: train / predict / eval / compress / inspect.

stdout carries only data so results can be piped; diagnostics go to stderr.
Exit codes: 0 success, 2 bad arguments or config, 3 model errors, 4 input
errors.
"""

import argparse
import json
import os
import sys

from .core import Task
from .errors import (ConfigError, CorpusFormatError, CorruptContainer, EmptyInput,
                     EmptyWord, FormatVersionMismatch, HanforgeError, IllegalSequence,
                     LengthExceeded, ModelNotLoaded, NegativeWeight, UnknownTag)
from .lexicon import DEFAULT_WEIGHT, Lexicon
from .pipeline import TrainingConfig, evaluate, load, predict, save, train

MODEL_ENV = "HANFORGE_MODEL"

_EXIT_BAD_ARGS = 2
_EXIT_MODEL = 3
_EXIT_INPUT = 4

_MODEL_ERRORS = (ModelNotLoaded, CorruptContainer, FormatVersionMismatch)
_INPUT_ERRORS = (CorpusFormatError, EmptyInput, LengthExceeded, IllegalSequence,
                 EmptyWord)
_ARG_ERRORS = (ConfigError, UnknownTag, NegativeWeight)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hanforge",
        description="Chinese word segmentation, POS tagging, NER and dependency parsing",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_model(p):
        p.add_argument("--model", default=os.environ.get(MODEL_ENV),
                       help=f"model container path (default ${MODEL_ENV})")

    p = sub.add_parser("predict", help="analyze sentences")
    add_model(p)
    p.add_argument("--task", required=True, choices=[t.value for t in Task])
    p.add_argument("--text", action="append",
                   help="inline sentence (repeatable); omit to read stdin or --input")
    p.add_argument("--input", help="file with one sentence per line")
    p.add_argument("--tag", help="corpus tag name (default: first tag of the task)")
    p.add_argument("--user-dict", help="lexicon file, one word per line")
    p.add_argument("--dict-weight", type=float, default=DEFAULT_WEIGHT)
    p.add_argument("--format", choices=["plain", "json", "conll"], default="plain")

    p = sub.add_parser("train", help="train a joint model from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output model path")
    p.add_argument("--seed", type=int, help="override the config seed")

    p = sub.add_parser("eval", help="score a model against a gold corpus")
    add_model(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--tag", required=True)
    p.add_argument("--user-dict")
    p.add_argument("--dict-weight", type=float, default=DEFAULT_WEIGHT)

    p = sub.add_parser("compress", help="compress a model to half depth")
    p.add_argument("--from", dest="source", required=True, help="large model path")
    p.add_argument("--out", required=True, help="compressed model path")
    p.add_argument("--config", required=True,
                   help="training config JSON providing the corpora")
    p.add_argument("--phase1-steps", type=int, required=True)
    p.add_argument("--phase2-steps", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--learning-rate", type=float, default=1e-3)

    p = sub.add_parser("inspect", help="print a model summary as JSON")
    add_model(p)
    return parser


def _load_model(path):
    if not path:
        raise ModelNotLoaded(f"no model given; pass --model or set ${MODEL_ENV}")
    return load(path)


def _load_lexicon(args) -> Lexicon | None:
    if not getattr(args, "user_dict", None):
        return None
    try:
        return Lexicon.from_file(args.user_dict, weight=args.dict_weight)
    except FileNotFoundError:
        raise EmptyInput(f"user dictionary not found: {args.user_dict}") from None


def _read_sentences(args) -> list[str]:
    if args.text:
        return list(args.text)
    if args.input:
        try:
            with open(args.input, encoding="utf-8") as fh:
                lines = fh.read().splitlines()
        except FileNotFoundError:
            raise EmptyInput(f"input file not found: {args.input}") from None
    else:
        lines = sys.stdin.read().splitlines()
    sentences = [line.strip() for line in lines if line.strip()]
    if not sentences:
        raise EmptyInput("no sentences to analyze")
    return sentences


def cmd_predict(args) -> int:
    if args.format == "conll" and args.task != Task.DEP.value:
        raise ConfigError("--format conll requires --task DEP")
    model = _load_model(args.model)
    result = predict(model, _read_sentences(args), Task(args.task),
                     lexicon=_load_lexicon(args), tag=args.tag)
    if args.format == "json":
        sys.stdout.write(result.to_json() + "\n")
    elif args.format == "conll":
        sys.stdout.write(result.to_conll())
    else:
        sys.stdout.write(result.to_plain())
    return 0


def cmd_train(args) -> int:
    config = TrainingConfig.from_json(args.config)
    if args.seed is not None:
        config.seed = args.seed
    model = train(config, log=sys.stdout)
    save(model, args.out)
    print(f"model written to {args.out}", file=sys.stderr)
    return 0


def cmd_eval(args) -> int:
    model = _load_model(args.model)
    metrics = evaluate(model, args.corpus, args.tag, lexicon=_load_lexicon(args))
    sys.stdout.write(json.dumps(metrics, ensure_ascii=False) + "\n")
    return 0


def cmd_compress(args) -> int:
    from .pipeline import prepare_training_data
    from .theseus import TheseusSchedule, compress

    model = _load_model(args.source)
    config = TrainingConfig.from_json(args.config)
    data = prepare_training_data(model, config.corpora, config.batch_size)
    schedule = TheseusSchedule(args.phase1_steps, args.phase2_steps)
    base = compress(model, data, schedule, seed=args.seed,
                    learning_rate=args.learning_rate, log=sys.stderr)
    save(base, args.out)
    print(f"compressed model written to {args.out}", file=sys.stderr)
    return 0


def cmd_inspect(args) -> int:
    model = _load_model(args.model)
    info = {
        "encoder": model.encoder.config.to_dict(),
        "parameters": sum(p.numel() for p in model.parameters()),
        "corpus_tags": [
            {"name": t.name, "task": t.task.value} for t in model.tags
        ],
        "schemes": {task.value: len(scheme) for task, scheme in model.schemes.items()},
        "pos_categories": list(model.pos_categories),
        "rel_labels": list(model.rel_labels),
        "default_cws_tag": model.default_cws_tag,
    }
    sys.stdout.write(json.dumps(info, ensure_ascii=False, indent=2) + "\n")
    return 0


_COMMANDS = {
    "predict": cmd_predict,
    "train": cmd_train,
    "eval": cmd_eval,
    "compress": cmd_compress,
    "inspect": cmd_inspect,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except _MODEL_ERRORS as exc:
        print(f"hanforge: {exc}", file=sys.stderr)
        return _EXIT_MODEL
    except _INPUT_ERRORS as exc:
        print(f"hanforge: {exc}", file=sys.stderr)
        return _EXIT_INPUT
    except _ARG_ERRORS as exc:
        print(f"hanforge: {exc}", file=sys.stderr)
        return _EXIT_BAD_ARGS
    except HanforgeError as exc:
        print(f"hanforge: {exc}", file=sys.stderr)
        return _EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

Exit codes: 0 success, 2 usage or validation error, 3 data error,
4 model or checkpoint error.
"""

import argparse
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from .errors import FrameIdError, TruncationError, ValidationError
from .evaluation import evaluate, format_confusion, format_report
from .lexicon import (
    BY_LU,
    CANDIDATE_MODES,
    build_target_index,
    candidate_frames,
    check_spans,
    format_index,
    format_lexicon,
    load_annotations,
    load_lexicon,
    normalize_surface,
    parse_lexicon,
    parse_lu,
    parse_spans,
)
from .model import FILTER_MODES, NO_FILTER, forward, load_checkpoint, save_checkpoint
from .tokenizer import Vocab, build_vocab, encode_instance
from .training import TrainConfig, load_config, train


class UsageError(FrameIdError):
    exit_code = 2


def _require(path, what):
    if path is None or not Path(path).is_file():
        raise UsageError(f"{what} not found: {path}")
    return path


def cmd_build_index(args):
    lexicon = load_lexicon(_require(args.lexicon, "lexicon"))
    index = build_target_index(lexicon)
    Path(args.out).write_text(format_index(index, lexicon), encoding="utf-8")
    print(f"surface_forms={len(index)}")
    print(f"frames={lexicon.k}")
    return 0


def _sentences(path):
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip() and not line.startswith("#"):
            out.append(line.split("\t", 1)[0])
    return out


def cmd_build_vocab(args):
    sentences = []
    for path in args.train:
        sentences += _sentences(_require(path, "training data"))
    vocab = build_vocab(sentences, max_size=args.size)
    vocab.save(args.out)
    print(f"tokens={len(vocab)}")
    print(f"vocab_hash={vocab.hash}")
    return 0


def cmd_train(args):
    config = load_config(_require(args.config, "config")) if args.config else TrainConfig()
    lexicon = load_lexicon(_require(args.lexicon, "lexicon"))
    index = build_target_index(lexicon)
    corpus = load_annotations(_require(args.train, "training data"), lexicon)
    dev = load_annotations(_require(args.dev, "dev data"), lexicon) if args.dev else []
    vocab = Vocab.load(_require(args.vocab, "vocab")) if args.vocab else None

    log_path = Path(args.log) if args.log else Path(str(args.out) + ".log")
    with open(log_path, "w", encoding="utf-8") as log_fh:
        log_fh.write("epoch\tloss\ttrain_acc\tdev_acc\tseconds\n")

        def on_epoch(stats):
            log_fh.write(stats.log_line() + "\n")
            log_fh.flush()

        params, vocab, report = train(config, corpus, dev, lexicon, index, vocab, on_epoch)

    extra = {
        "train_config": asdict(config),
        "lexicon": format_lexicon(lexicon),
        "lowercase": vocab.lowercase,
    }
    save_checkpoint(args.out, params, [f.name for f in lexicon.frames], vocab.tokens, extra)
    last = report.epochs[-1]
    print(f"checkpoint={args.out}")
    print(f"log={log_path}")
    print(f"trained_instances={report.trained_instances}")
    print(f"removed_duplicates={report.removed_duplicates}")
    print(f"gold_not_candidate={report.gold_filtered}")
    for reason, count in report.skipped.items():
        print(f"skipped_{reason}={count}")
    print(f"final_loss={last.loss:.6f}")
    print(f"final_train_accuracy={last.train_accuracy:.4f}")
    if dev:
        print(f"dev_accuracy={report.dev_accuracy:.4f}")
    return 0


def _load_model(args):
    ckpt = load_checkpoint(args.model)
    if getattr(args, "lexicon", None):
        lexicon = load_lexicon(_require(args.lexicon, "lexicon"))
        if [f.name for f in lexicon.frames] != list(ckpt.frames):
            raise ValidationError("lexicon frames do not match the checkpoint's frame labels")
    else:
        lexicon = parse_lexicon(ckpt.extra["lexicon"])
    vocab = Vocab(ckpt.vocab, lowercase=ckpt.extra.get("lowercase", True))
    train_config = ckpt.extra.get("train_config", {})
    return ckpt, lexicon, vocab, train_config


def cmd_predict(args):
    ckpt, lexicon, vocab, tc = _load_model(args)
    filter_mode = args.filter or tc.get("filter_mode", "masked")
    mode = args.mode or tc.get("candidate_mode", "by_target")
    w = args.w if args.w is not None else tc.get("w", 10)
    gold_lu = parse_lu(args.lu) if args.lu else None
    if filter_mode != NO_FILTER and mode == BY_LU and gold_lu is None:
        raise UsageError("--mode by_lu needs --lu lemma.pos")
    if not args.sentence.strip():
        raise UsageError("--sentence is empty")
    index = build_target_index(lexicon)
    config = ckpt.config

    targets = [check_spans(parse_spans(t), len(args.sentence)) for t in args.target]
    for spans in targets:
        try:
            inst = encode_instance(vocab, args.sentence, spans, config.n, w)
        except TruncationError as exc:
            raise TruncationError(
                f"{exc}; the target is past the model's max length n={config.n}"
            ) from None
        text = " ".join(args.sentence[a:b] for a, b in spans)
        if filter_mode == NO_FILTER:
            v = None
        else:
            v = candidate_frames(index, lexicon, text, mode, gold_lu)
        pred = forward(ckpt.params, config, inst, v, filter_mode)
        span_text = ",".join(f"{a}:{b}" for a, b in spans)
        candidates = int(pred.v.sum())
        print(f"target\t{span_text}\t{normalize_surface(text)}\twindow={inst.window[0]}..{inst.window[1]}"
              f"\tfilter={filter_mode}" + ("" if filter_mode == NO_FILTER else f"/{mode}"))
        for rank, fid in enumerate(pred.top(args.top), start=1):
            row = f"{rank}\t{lexicon.frame_name(fid)}\t{pred.y[fid]:.6f}"
            if filter_mode != NO_FILTER and not pred.v[fid]:
                row += "\tnon-candidate"
            print(row)
        if filter_mode != NO_FILTER and args.top > candidates:
            print(f"# only {candidates} candidate frame(s); rows marked non-candidate are outside the mask")
    return 0


def cmd_evaluate(args):
    ckpt, lexicon, vocab, tc = _load_model(args)
    if args.config:
        cfg = load_config(_require(args.config, "config"))
        tc = {**tc, "filter_mode": cfg.filter_mode, "candidate_mode": cfg.candidate_mode, "w": cfg.w}
    filter_mode = args.filter or tc.get("filter_mode", "masked")
    mode = args.mode or tc.get("candidate_mode", "by_target")
    w = tc.get("w", 10)
    data_path = args.dev or args.data
    if data_path is None:
        raise UsageError("evaluate needs --dev (or --data) with annotations")
    dataset = load_annotations(_require(data_path, "evaluation data"), lexicon)
    if not dataset:
        raise ValidationError(f"no instances in {data_path}")
    index = build_target_index(lexicon)
    report = evaluate(ckpt.params, ckpt.config, dataset, lexicon, index, vocab, filter_mode, mode, w)
    text = format_report(report, lexicon)
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    if args.confusion:
        Path(args.confusion).write_text(format_confusion(report, lexicon), encoding="utf-8")
    return 0


def cmd_inspect(args):
    ckpt = load_checkpoint(args.model)
    for key, value in asdict(ckpt.config).items():
        print(f"config.{key}={value}")
    for key, value in sorted(ckpt.extra.get("train_config", {}).items()):
        print(f"train.{key}={value}")
    print(f"k={ckpt.params.k}")
    print(f"vocab_size={len(ckpt.vocab)}")
    print(f"vocab_hash={ckpt.vocab_hash}")
    print(f"parameters={ckpt.params.count()}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="frameid", description="Frame identification toolkit")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-index", help="expand a lexicon into a surface-form lookup table")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("build-vocab", help="build a wordpiece vocab from annotation files")
    p.add_argument("--train", required=True, nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, default=8192)
    p.set_defaults(func=cmd_build_vocab)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    p.add_argument("--config")
    p.add_argument("--train", required=True)
    p.add_argument("--dev")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--vocab")
    p.add_argument("--out", required=True)
    p.add_argument("--log")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict frames for marked targets in a sentence")
    p.add_argument("--model", required=True)
    p.add_argument("--sentence", required=True)
    p.add_argument("--target", required=True, action="append",
                   help="a:b[,a:b...] character spans of one target; repeat for more targets")
    p.add_argument("--filter", choices=FILTER_MODES)
    p.add_argument("--mode", choices=CANDIDATE_MODES)
    p.add_argument("--lu", help="gold lexical unit as lemma.pos (by_lu mode)")
    p.add_argument("--top", type=int, default=1)
    p.add_argument("--w", type=int, help="attention window size (default: the trained value)")
    p.add_argument("--lexicon", help="override the lexicon stored in the checkpoint")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a checkpoint on annotated data")
    p.add_argument("--model", required=True)
    p.add_argument("--dev")
    p.add_argument("--data")
    p.add_argument("--config")
    p.add_argument("--lexicon")
    p.add_argument("--filter", choices=FILTER_MODES)
    p.add_argument("--mode", choices=CANDIDATE_MODES)
    p.add_argument("--out")
    p.add_argument("--confusion", help="write the confusion table as TSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("inspect", help="print checkpoint metadata")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "top", 1) < 1:
        parser.error("--top must be >= 1")
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.ERROR,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except FrameIdError as exc:
        print(f"frameid {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"frameid {args.command}: file not found: {exc.filename}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"frameid {args.command}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

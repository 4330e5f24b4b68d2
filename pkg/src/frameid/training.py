"""Supervised fine-tuning of the frame classifier."""

import logging
import math
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import numerics as nx
from .errors import AlignmentError, ContractError, NonFiniteError, ParseError, TruncationError, ValidationError
from .lexicon import BY_LU, BY_TARGET, CANDIDATE_MODES, candidate_frames
from .model import FILTER_MODES, MASKED, NO_FILTER, EncoderConfig, ModelParams, choose, forward_batch
from .tokenizer import DEFAULT_MAX_LENGTH, DEFAULT_WINDOW, build_vocab, encode_instance

log = logging.getLogger(__name__)

LOSS_FLOOR = 1e-12

# Selected settings reported for BERT-base fine-tuning, keyed by
# (FrameNet release, candidate listing).  Kept for reference; they assume
# an Adam-style optimizer and pretrained weights.
REPORTED_HYPERPARAMETERS = {
    ("1.5", "by_lu"): dict(batch_size=32, learning_rate=3e-5, epochs=8),
    ("1.5", "by_target"): dict(batch_size=32, learning_rate=3e-5, epochs=6),
    ("1.5", "none"): dict(batch_size=32, learning_rate=3e-5, epochs=8),
    ("1.7", "by_lu"): dict(batch_size=16, learning_rate=3e-5, epochs=7),
    ("1.7", "by_target"): dict(batch_size=16, learning_rate=3e-5, epochs=6),
    ("1.7", "none"): dict(batch_size=16, learning_rate=3e-5, epochs=8),
}
SEARCH_BATCH_SIZES = (16, 32)
SEARCH_LEARNING_RATES = (2e-5, 3e-5, 5e-5)
SEARCH_EPOCHS = (3, 4, 5, 6, 7, 8)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 8
    learning_rate: float = 0.1
    momentum: float = 0.0
    epochs: int = 100
    w: int = DEFAULT_WINDOW
    filter_mode: str = MASKED
    candidate_mode: str = BY_TARGET
    seed: int = 0
    n: int = DEFAULT_MAX_LENGTH
    layers: int = 2
    d: int = 32
    heads: int = 4
    ffn_dim: int = 64
    dropout: float = 0.0
    vocab_size: int = 8192

    def __post_init__(self):
        bad = self.problems()
        if bad:
            raise ValidationError(
                "invalid training config: " + "; ".join(f"{k}: {msg}" for k, msg in bad)
            )

    def problems(self):
        out = []
        if self.batch_size < 1:
            out.append(("batch_size", "must be >= 1"))
        if not self.learning_rate > 0:
            out.append(("learning_rate", "must be > 0"))
        if not 0 <= self.momentum < 1:
            out.append(("momentum", "must be in [0, 1)"))
        if self.epochs < 1:
            out.append(("epochs", "must be >= 1"))
        if self.w < 0:
            out.append(("w", "must be >= 0"))
        if self.filter_mode not in FILTER_MODES:
            out.append(("filter_mode", f"must be one of {', '.join(FILTER_MODES)}"))
        if self.candidate_mode not in CANDIDATE_MODES:
            out.append(("candidate_mode", f"must be one of {', '.join(CANDIDATE_MODES)}"))
        if self.n < 3:
            out.append(("n", "must be >= 3"))
        for name in ("layers", "d", "heads", "ffn_dim"):
            if getattr(self, name) < 1:
                out.append((name, "must be >= 1"))
        if self.heads >= 1 and self.d % self.heads:
            out.append(("heads", "must divide d"))
        if not 0 <= self.dropout < 1:
            out.append(("dropout", "must be in [0, 1)"))
        if self.vocab_size < 8:
            out.append(("vocab_size", "must be >= 8"))
        return out

    def encoder_config(self, vocab_size):
        return EncoderConfig(
            layers=self.layers,
            d=self.d,
            heads=self.heads,
            ffn_dim=self.ffn_dim,
            vocab_size=vocab_size,
            n=self.n,
            dropout=self.dropout,
            seed=self.seed,
        )


def parse_config(text, path=None):
    """Parse flat ``key=value`` text into a TrainConfig."""
    types = {f.name: f.type for f in fields(TrainConfig)}
    values = {}
    bad = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected key=value", lineno, path)
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in types:
            bad.append((key, "unknown key"))
            continue
        kind = types[key]
        try:
            values[key] = raw if kind in (str, "str") else (int if kind in (int, "int") else float)(raw)
        except ValueError:
            bad.append((key, f"cannot parse {raw!r}"))
    if bad:
        raise ValidationError(
            "invalid training config: " + "; ".join(f"{k}: {msg}" for k, msg in bad)
        )
    return TrainConfig(**values)


def load_config(path):
    return parse_config(Path(path).read_text(encoding="utf-8"), path=str(path))


def loss(y, gold, floor=LOSS_FLOOR):
    """Cross-entropy of a single distribution against the gold frame."""
    return -math.log(max(float(y[gold]), floor))


def dedupe(corpus, held_out):
    """Drop training instances whose sentence also occurs in ``held_out``."""
    held = {inst.sentence for inst in held_out}
    return [inst for inst in corpus if inst.sentence not in held]


@dataclass
class EncodedBatch:
    """Stacked model inputs for a set of instances."""

    token_ids: np.ndarray
    p: np.ndarray
    beta1: np.ndarray
    beta2: np.ndarray
    v: np.ndarray
    gold: np.ndarray
    index: np.ndarray

    def __len__(self):
        return len(self.gold)

    def take(self, rows):
        return EncodedBatch(
            self.token_ids[rows], self.p[rows], self.beta1[rows], self.beta2[rows],
            self.v[rows], self.gold[rows], self.index[rows],
        )


@dataclass
class Prepared:
    batch: EncodedBatch
    skipped: dict = field(default_factory=dict)
    gold_filtered: list = field(default_factory=list)


def candidate_mask(inst, lexicon, index, filter_mode, candidate_mode):
    if filter_mode == NO_FILTER:
        return np.ones(lexicon.k, dtype=np.int8)
    if candidate_mode == BY_LU and inst.gold_lu is None:
        raise ContractError(f"instance on line {inst.line} has no gold lexical unit for by_lu filtering")
    return candidate_frames(index, lexicon, inst.target_text, candidate_mode, inst.gold_lu)


def prepare(instances, vocab, lexicon, index, n, w, filter_mode, candidate_mode, drop_filtered=True):
    """Tokenize and stack instances.

    Instances that cannot be aligned, were truncated, or lack the gold
    lexical unit that by_lu listing needs are left out and counted by
    reason.  With ``drop_filtered`` instances whose gold frame is outside
    their candidate mask are left out too.
    """
    rows = {k: [] for k in ("token_ids", "p", "beta1", "beta2", "v", "gold", "index")}
    skipped = {"alignment": 0, "truncated": 0, "no_lu": 0}
    filtered = []
    for i, inst in enumerate(instances):
        if filter_mode != NO_FILTER and candidate_mode == BY_LU and inst.gold_lu is None:
            skipped["no_lu"] += 1
            continue
        try:
            enc = encode_instance(vocab, inst.sentence, inst.target_spans, n, w)
        except AlignmentError:
            skipped["alignment"] += 1
            continue
        except TruncationError:
            skipped["truncated"] += 1
            continue
        v = candidate_mask(inst, lexicon, index, filter_mode, candidate_mode)
        if not v[inst.gold_frame]:
            filtered.append(i)
            if drop_filtered:
                continue
        rows["token_ids"].append(enc.token_ids)
        rows["p"].append(enc.p)
        rows["beta1"].append(enc.window[0])
        rows["beta2"].append(enc.window[1])
        rows["v"].append(v)
        rows["gold"].append(inst.gold_frame)
        rows["index"].append(i)
    k = lexicon.k
    batch = EncodedBatch(
        token_ids=np.array(rows["token_ids"], dtype=np.int64).reshape(-1, n),
        p=np.array(rows["p"], dtype=np.int8).reshape(-1, n),
        beta1=np.array(rows["beta1"], dtype=np.int64),
        beta2=np.array(rows["beta2"], dtype=np.int64),
        v=np.array(rows["v"], dtype=np.int8).reshape(-1, k),
        gold=np.array(rows["gold"], dtype=np.int64),
        index=np.array(rows["index"], dtype=np.int64),
    )
    return Prepared(batch, skipped, filtered)


def batch_loss(params, config, batch, filter_mode, rng=None):
    y, _ = forward_batch(
        params, config, batch.token_ids, batch.p, batch.beta1, batch.beta2,
        batch.v, filter_mode, rng,
    )
    return nx.nll(y, batch.gold, LOSS_FLOOR), y


def predict_batch(params, config, batch, filter_mode, chunk=64):
    """Predicted frame ids and probability rows for every instance in ``batch``."""
    preds, probs = [], []
    for start in range(0, len(batch), chunk):
        part = batch.take(slice(start, start + chunk))
        y, _ = forward_batch(
            params, config, part.token_ids, part.p, part.beta1, part.beta2, part.v, filter_mode
        )
        for row, v in zip(y.data, part.v):
            preds.append(choose(row, v, filter_mode))
            probs.append(row)
    return np.array(preds, dtype=np.int64), probs


@dataclass
class EpochStats:
    epoch: int
    loss: float
    train_accuracy: float
    dev_accuracy: float
    seconds: float

    def log_line(self):
        dev = "-" if math.isnan(self.dev_accuracy) else f"{self.dev_accuracy:.4f}"
        return f"{self.epoch}\t{self.loss:.6f}\t{self.train_accuracy:.4f}\t{dev}\t{self.seconds:.3f}"


@dataclass
class TrainReport:
    epochs: list = field(default_factory=list)
    dev_accuracy: float = float("nan")
    removed_duplicates: int = 0
    skipped: dict = field(default_factory=dict)
    gold_filtered: int = 0
    trained_instances: int = 0

    def log_text(self):
        header = "epoch\tloss\ttrain_acc\tdev_acc\tseconds"
        return "\n".join([header] + [e.log_line() for e in self.epochs]) + "\n"


def sgd_step(params, velocity, lr, momentum):
    for name, p in params.params.items():
        buf = velocity[name]
        buf *= momentum
        buf += p.grad
        p.data -= lr * buf


def train(config, corpus, dev, lexicon, index, vocab=None, on_epoch=None):
    """Fit a model on ``corpus``; returns ``(params, vocab, report)``.

    Training sentences that also occur in ``dev`` are removed first.  The
    run is deterministic for a given config seed.
    """
    if not corpus:
        raise ContractError("training corpus is empty")
    dev = list(dev or [])
    report = TrainReport()
    kept = dedupe(corpus, dev)
    report.removed_duplicates = len(corpus) - len(kept)
    if report.removed_duplicates:
        log.info("removed %d training instances whose sentence occurs in dev", report.removed_duplicates)
    if not kept:
        raise ContractError("every training sentence also occurs in the dev set")
    if vocab is None:
        vocab = build_vocab([inst.sentence for inst in kept], max_size=config.vocab_size)

    prepared = prepare(kept, vocab, lexicon, index, config.n, config.w, config.filter_mode, config.candidate_mode)
    report.skipped = prepared.skipped
    report.gold_filtered = len(prepared.gold_filtered)
    if report.gold_filtered:
        log.warning("skipped %d instances whose gold frame is not a candidate", report.gold_filtered)
    data = prepared.batch
    report.trained_instances = len(data)
    if not len(data):
        raise ContractError("no trainable instances left after alignment and filtering")
    dev_data = None
    if dev:
        dev_data = prepare(dev, vocab, lexicon, index, config.n, config.w, config.filter_mode,
                           config.candidate_mode, drop_filtered=False)

    enc_config = config.encoder_config(len(vocab))
    params = ModelParams(enc_config, lexicon.k)
    velocity = {name: np.zeros_like(p.data) for name, p in params.params.items()}
    shuffle_rng = np.random.default_rng(config.seed)
    dropout_rng = np.random.default_rng(config.seed + 1) if config.dropout > 0 else None

    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        order = shuffle_rng.permutation(len(data))
        total_loss = 0.0
        correct = 0
        for b, start in enumerate(range(0, len(order), config.batch_size)):
            batch = data.take(order[start:start + config.batch_size])
            params.zero_grad()
            value, y = batch_loss(params, enc_config, batch, config.filter_mode, dropout_rng)
            if not np.isfinite(value.data):
                raise NonFiniteError(f"non-finite loss at epoch {epoch}, batch {b}")
            value.backward()
            sgd_step(params, velocity, config.learning_rate, config.momentum)
            total_loss += float(value.data) * len(batch)
            for row, v, gold in zip(y.data, batch.v, batch.gold):
                correct += choose(row, v, config.filter_mode) == gold
        dev_acc = float("nan")
        if dev_data is not None:
            dev_acc = _accuracy(params, enc_config, dev_data, len(dev), config.filter_mode)
        stats = EpochStats(
            epoch=epoch,
            loss=total_loss / len(data),
            train_accuracy=correct / len(data),
            dev_accuracy=dev_acc,
            seconds=time.perf_counter() - started,
        )
        report.epochs.append(stats)
        if on_epoch is not None:
            on_epoch(stats)
    report.dev_accuracy = report.epochs[-1].dev_accuracy
    return params, vocab, report


def _accuracy(params, config, prepared, total, filter_mode):
    if not len(prepared.batch):
        return 0.0
    preds, _ = predict_batch(params, config, prepared.batch, filter_mode)
    return float(np.sum(preds == prepared.batch.gold)) / total

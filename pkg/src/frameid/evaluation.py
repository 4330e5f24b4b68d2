"""Accuracy over all targets and the ambiguous subset, and confused frame pairs."""

from collections import Counter, defaultdict
from dataclasses import dataclass, field

from .lexicon import BY_TARGET, normalize_surface
from .model import MASKED
from .tokenizer import DEFAULT_WINDOW
from .training import predict_batch, prepare


def is_ambiguous(index, target_text):
    """True when the target-form lookup yields two or more candidate frames.

    Unseen targets fall back to every frame, so they count as ambiguous
    whenever the lexicon has at least two frames.
    """
    frames = index.lookup(target_text)
    return (index.k if frames is None else len(frames)) >= 2


@dataclass
class EvalReport:
    accuracy_all: float
    accuracy_ambiguous: float
    total: int
    ambiguous_total: int
    correct: int
    skipped: int
    confusion: dict = field(default_factory=dict)
    examples: dict = field(default_factory=dict)
    gold_filtered: int = 0
    filter_mode: str = MASKED
    candidate_mode: str = BY_TARGET

    @property
    def misclassified(self):
        return sum(self.confusion.values())

    def key_values(self):
        return {
            "filter_mode": self.filter_mode,
            "candidate_mode": self.candidate_mode,
            "accuracy_all": f"{self.accuracy_all:.6f}",
            "accuracy_ambiguous": f"{self.accuracy_ambiguous:.6f}",
            "total": self.total,
            "ambiguous_total": self.ambiguous_total,
            "correct": self.correct,
            "misclassified": self.misclassified,
            "skipped": self.skipped,
            "gold_filtered": self.gold_filtered,
        }


def evaluate(params, config, dataset, lexicon, index, vocab, filter_mode=MASKED,
             candidate_mode=BY_TARGET, w=DEFAULT_WINDOW):
    """Score ``params`` on ``dataset``.

    Instances that cannot be encoded (alignment failure, truncation, no gold
    lexical unit under by_lu listing) are counted as skipped and scored as
    errors.  The ambiguous subset is defined by the target-form index.
    """
    if not dataset:
        raise ValueError("evaluation dataset is empty")
    prepared = prepare(dataset, vocab, lexicon, index, config.n, w, filter_mode,
                       candidate_mode, drop_filtered=False)
    batch = prepared.batch
    predicted = {}
    if len(batch):
        preds, _ = predict_batch(params, config, batch, filter_mode)
        predicted = dict(zip(batch.index.tolist(), preds.tolist()))

    ambiguous = [is_ambiguous(index, inst.target_text) for inst in dataset]
    correct = correct_ambiguous = 0
    confusion = Counter()
    examples = defaultdict(list)
    for i, inst in enumerate(dataset):
        if i not in predicted:
            continue
        guess = predicted[i]
        if guess == inst.gold_frame:
            correct += 1
            correct_ambiguous += ambiguous[i]
        else:
            pair = (inst.gold_frame, guess)
            confusion[pair] += 1
            surface = normalize_surface(inst.target_text)
            if surface not in examples[pair]:
                examples[pair].append(surface)

    ambiguous_total = sum(ambiguous)
    return EvalReport(
        accuracy_all=correct / len(dataset),
        accuracy_ambiguous=correct_ambiguous / ambiguous_total if ambiguous_total else 0.0,
        total=len(dataset),
        ambiguous_total=ambiguous_total,
        correct=correct,
        skipped=len(dataset) - len(batch),
        confusion=dict(confusion),
        examples={pair: sorted(s) for pair, s in examples.items()},
        gold_filtered=len(prepared.gold_filtered),
        filter_mode=filter_mode,
        candidate_mode=candidate_mode,
    )


def top_confused(report, top_k=10):
    """Most frequent (gold, predicted, count) errors; ties go to lower ids."""
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    ranked = sorted(report.confusion.items(), key=lambda kv: (-kv[1], kv[0]))
    return [(gold, pred, count) for (gold, pred), count in ranked[:top_k]]


def format_report(report, lexicon=None, top_k=10):
    """Human-readable summary followed by a ``key=value`` block."""
    mode = report.filter_mode if report.filter_mode == "none" else f"{report.filter_mode}/{report.candidate_mode}"
    lines = [
        f"Evaluation ({mode})",
        f"  all targets:       {report.accuracy_all:.2%} ({report.correct}/{report.total})",
        f"  ambiguous targets: {report.accuracy_ambiguous:.2%} of {report.ambiguous_total}"
        " (ambiguous = two or more frames in the target-form lookup)",
        f"  skipped:           {report.skipped}",
        f"  gold not in mask:  {report.gold_filtered}",
    ]
    pairs = top_confused(report, top_k) if report.confusion else []
    if pairs:
        lines.append("  most confused (gold -> predicted):")
        for gold, pred, count in pairs:
            g, p = _name(lexicon, gold), _name(lexicon, pred)
            lines.append(f"    {g} -> {p}: {count}")
    lines.append("")
    lines.extend(f"{k}={v}" for k, v in report.key_values().items())
    return "\n".join(lines) + "\n"


def format_confusion(report, lexicon=None):
    """TSV rows: gold, predicted, count, example target surfaces."""
    rows = ["gold\tpredicted\tcount\texamples"]
    for gold, pred, count in top_confused(report, max(len(report.confusion), 1)):
        surfaces = ", ".join(report.examples.get((gold, pred), []))
        rows.append(f"{_name(lexicon, gold)}\t{_name(lexicon, pred)}\t{count}\t{surfaces}")
    return "\n".join(rows) + "\n"


def _name(lexicon, frame_id):
    return lexicon.frame_name(frame_id) if lexicon is not None else str(frame_id)

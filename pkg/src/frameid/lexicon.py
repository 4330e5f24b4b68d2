"""Frame inventory, lexical units, the surface-form index and annotations."""

from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Optional

import numpy as np

from .errors import (
    ConflictError,
    ContractError,
    ParseError,
    ResolutionError,
    UnknownLUError,
    ValidationError,
)
from .inflect import inflect

POS_TAGS = frozenset(
    {"v", "n", "a", "adv", "prep", "num", "c", "scon", "art", "intj", "pron", "idio"}
)

BY_TARGET = "by_target"
BY_LU = "by_lu"
CANDIDATE_MODES = (BY_TARGET, BY_LU)


@dataclass(frozen=True)
class Frame:
    id: int
    name: str


@dataclass(frozen=True)
class LexicalUnit:
    lemma: str
    pos: str
    frames: frozenset

    @property
    def key(self):
        return (self.lemma, self.pos)

    def __str__(self):
        return f"{self.lemma}.{self.pos}"


class Lexicon:
    """Immutable collection of frames and lexical units.

    Frame ids are dense and follow the order frames were added.
    """

    def __init__(self, frame_names, lexical_units=()):
        frame_names = list(frame_names)
        if not frame_names:
            raise ValidationError("lexicon needs at least one frame")
        by_name = {}
        for name in frame_names:
            if name in by_name:
                raise ConflictError(f"duplicate frame name {name!r}")
            by_name[name] = len(by_name)
        self._frames = tuple(Frame(i, name) for i, name in enumerate(frame_names))
        self._by_name = MappingProxyType(by_name)

        lus = {}
        for lu in lexical_units:
            if not lu.frames:
                raise ValidationError(f"lexical unit {lu} has no frames")
            for fid in lu.frames:
                if not 0 <= fid < len(self._frames):
                    raise ResolutionError(f"lexical unit {lu} references frame id {fid}")
            if lu.key in lus:
                raise ConflictError(f"duplicate lexical unit {lu}")
            lus[lu.key] = lu
        self._lus = MappingProxyType(lus)

    @property
    def frames(self):
        return self._frames

    @property
    def lexical_units(self):
        return tuple(self._lus.values())

    @property
    def k(self):
        return len(self._frames)

    def frame_id(self, name):
        try:
            return self._by_name[name]
        except KeyError:
            raise ResolutionError(f"unknown frame {name!r}") from None

    def frame_name(self, frame_id):
        return self._frames[frame_id].name

    def lu(self, lemma, pos):
        try:
            return self._lus[(lemma, pos)]
        except KeyError:
            raise UnknownLUError(f"unknown lexical unit {lemma}.{pos}") from None

    def __contains__(self, key):
        return key in self._lus

    def __eq__(self, other):
        if not isinstance(other, Lexicon):
            return NotImplemented
        return self._frames == other._frames and dict(self._lus) == dict(other._lus)

    def __repr__(self):
        return f"Lexicon(k={self.k}, lexical_units={len(self._lus)})"


def parse_lexicon(text, path=None):
    """Parse lexicon text.  See :func:`load_lexicon` for the format."""
    frame_names = []
    raw_lus = []
    seen_lu = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.rstrip("\r\n").split("\t")
        kind = fields[0]
        if kind == "frame":
            if len(fields) != 2 or not fields[1].strip():
                raise ParseError("expected 'frame<TAB>Name'", lineno, path)
            if seen_lu:
                raise ParseError("frame lines must precede lu lines", lineno, path)
            frame_names.append(fields[1].strip())
        elif kind == "lu":
            if len(fields) != 4:
                raise ParseError("expected 'lu<TAB>lemma<TAB>pos<TAB>Frame,...'", lineno, path)
            lemma, pos, frames = (f.strip() for f in fields[1:])
            if not lemma:
                raise ParseError("empty lemma", lineno, path)
            if pos not in POS_TAGS:
                raise ParseError(f"unknown part of speech {pos!r}", lineno, path)
            names = [n.strip() for n in frames.split(",") if n.strip()]
            if not names:
                raise ParseError(f"lexical unit {lemma}.{pos} lists no frames", lineno, path)
            raw_lus.append((lineno, lemma, pos, names))
            seen_lu = True
        else:
            raise ParseError(f"unknown record type {kind!r}", lineno, path)

    if not frame_names:
        raise ParseError("lexicon defines no frames", path=path)
    seen = set()
    for name in frame_names:
        if name in seen:
            raise ConflictError(f"duplicate frame name {name!r}")
        seen.add(name)
    ids = {name: i for i, name in enumerate(frame_names)}

    lus = []
    for lineno, lemma, pos, names in raw_lus:
        frame_ids = set()
        for name in names:
            if name not in ids:
                raise ResolutionError(
                    f"{path or '<lexicon>'}:{lineno}: lexical unit {lemma}.{pos} "
                    f"references unknown frame {name!r}"
                )
            frame_ids.add(ids[name])
        lus.append(LexicalUnit(lemma, pos, frozenset(frame_ids)))
    return Lexicon(frame_names, lus)


def load_lexicon(path):
    """Read a lexicon file.

    The format is UTF-8 text with ``frame<TAB>Name`` lines first, followed by
    ``lu<TAB>lemma<TAB>pos<TAB>Frame1,Frame2`` lines.  Lines starting with
    ``#`` are comments.
    """
    path = Path(path)
    return parse_lexicon(path.read_text(encoding="utf-8"), path=str(path))


def format_lexicon(lexicon):
    lines = [f"frame\t{f.name}" for f in lexicon.frames]
    for lu in lexicon.lexical_units:
        names = ",".join(lexicon.frame_name(i) for i in sorted(lu.frames))
        lines.append(f"lu\t{lu.lemma}\t{lu.pos}\t{names}")
    return "\n".join(lines) + "\n"


def save_lexicon(lexicon, path):
    Path(path).write_text(format_lexicon(lexicon), encoding="utf-8")


def normalize_surface(text):
    return " ".join(text.lower().split())


@dataclass(frozen=True)
class TargetIndex:
    """Lookup table from normalized surface form to candidate frame ids."""

    table: Mapping[str, frozenset]
    k: int

    def __post_init__(self):
        object.__setattr__(self, "table", MappingProxyType(dict(self.table)))

    def lookup(self, text):
        return self.table.get(normalize_surface(text))

    def __contains__(self, text):
        return normalize_surface(text) in self.table

    def __len__(self):
        return len(self.table)

    def __eq__(self, other):
        if not isinstance(other, TargetIndex):
            return NotImplemented
        return self.k == other.k and dict(self.table) == dict(other.table)


def build_target_index(lexicon):
    table = defaultdict(set)
    for lu in lexicon.lexical_units:
        for form in inflect(lu.lemma, lu.pos):
            table[normalize_surface(form)].update(lu.frames)
    return TargetIndex({s: frozenset(f) for s, f in table.items()}, lexicon.k)


def format_index(index, lexicon):
    lines = []
    for surface in sorted(index.table):
        names = ",".join(lexicon.frame_name(i) for i in sorted(index.table[surface]))
        lines.append(f"{surface}\t{names}")
    return "\n".join(lines) + "\n"


def candidate_frames(index, lexicon, target_text, mode=BY_TARGET, gold_lu=None):
    """Return the k-dimensional 0/1 candidate mask for a target.

    Targets missing from the index get an all-ones mask.
    """
    v = np.zeros(lexicon.k, dtype=np.int8)
    if mode == BY_LU:
        if gold_lu is None:
            raise ContractError("by_lu candidate listing needs the gold lexical unit")
        lu = lexicon.lu(*gold_lu)
        v[sorted(lu.frames)] = 1
        return v
    if mode != BY_TARGET:
        raise ContractError(f"unknown candidate mode {mode!r}")
    frames = index.lookup(target_text)
    if frames is None:
        v[:] = 1
    else:
        v[sorted(frames)] = 1
    return v


@dataclass(frozen=True)
class AnnotationInstance:
    sentence: str
    target_spans: tuple
    gold_frame: int
    gold_lu: Optional[tuple] = None
    line: Optional[int] = field(default=None, compare=False)

    @property
    def target_text(self):
        """Span texts joined by single spaces; used as the lookup key."""
        return " ".join(self.sentence[a:b] for a, b in self.target_spans)


def check_spans(spans, length):
    """Sort spans and check they are non-empty, in bounds and disjoint."""
    spans = sorted((int(a), int(b)) for a, b in spans)
    if not spans:
        raise ValidationError("target needs at least one span")
    for a, b in spans:
        if a < 0 or b > length:
            raise ValidationError(f"span {a}:{b} outside sentence of length {length}")
        if b <= a:
            raise ValidationError(f"empty span {a}:{b}")
    for (_, b1), (a2, _) in zip(spans, spans[1:]):
        if a2 < b1:
            raise ValidationError(f"overlapping spans ending at {b1} and starting at {a2}")
    return tuple(spans)


def parse_spans(text):
    spans = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        try:
            a, b = chunk.split(":")
            spans.append((int(a), int(b)))
        except ValueError:
            raise ValidationError(f"malformed span {chunk!r}, expected a:b") from None
    return spans


def parse_lu(text):
    lemma, dot, pos = text.strip().rpartition(".")
    if not dot or not lemma or not pos:
        raise ValidationError(f"malformed lexical unit {text!r}, expected lemma.pos")
    return (lemma, pos)


def parse_annotations(text, lexicon, path=None):
    instances = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.rstrip("\r\n").split("\t")
        if len(fields) not in (3, 4):
            raise ParseError("expected sentence<TAB>spans<TAB>Frame[<TAB>lemma.pos]", lineno, path)
        sentence, span_text, frame_name = fields[:3]
        try:
            spans = check_spans(parse_spans(span_text), len(sentence))
            gold_lu = parse_lu(fields[3]) if len(fields) == 4 and fields[3].strip() else None
        except ValidationError as exc:
            raise ValidationError(f"{path or '<annotations>'}:{lineno}: {exc}") from None
        try:
            gold = lexicon.frame_id(frame_name.strip())
            if gold_lu is not None:
                lexicon.lu(*gold_lu)
        except ResolutionError as exc:
            raise type(exc)(f"{path or '<annotations>'}:{lineno}: {exc}") from None
        instances.append(AnnotationInstance(sentence, spans, gold, gold_lu, lineno))
    return instances


def load_annotations(path, lexicon):
    """Read one instance per line: ``sentence<TAB>a:b[,a:b]<TAB>Frame[<TAB>lemma.pos]``.

    Offsets are half-open character offsets into the raw sentence.
    """
    path = Path(path)
    return parse_annotations(path.read_text(encoding="utf-8"), lexicon, path=str(path))


def format_annotations(instances, lexicon):
    lines = []
    for inst in instances:
        spans = ",".join(f"{a}:{b}" for a, b in inst.target_spans)
        row = [inst.sentence, spans, lexicon.frame_name(inst.gold_frame)]
        if inst.gold_lu is not None:
            row.append(".".join(inst.gold_lu))
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"

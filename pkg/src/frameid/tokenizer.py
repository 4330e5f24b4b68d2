"""WordPiece-style tokenization aligned to character offsets."""

import hashlib
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AlignmentError, ContractError, ParseError, TruncationError

PAD, UNK, CLS, SEP = "[PAD]", "[UNK]", "[CLS]", "[SEP]"
SPECIALS = (PAD, UNK, CLS, SEP)
CONTINUATION = "##"
NO_SPAN = (-1, -1)

DEFAULT_WINDOW = 10
DEFAULT_MAX_LENGTH = 64
# max sequence lengths used with the two public FrameNet releases
MAX_LENGTH_FRAMENET_15 = 260
MAX_LENGTH_FRAMENET_17 = 320

_WORD = re.compile(r"\S+")


class Vocab:
    """Token to id mapping with the four specials at ids 0-3."""

    def __init__(self, tokens, lowercase=True):
        tokens = list(tokens)
        if tuple(tokens[:4]) != SPECIALS:
            raise ContractError(f"vocab must start with {', '.join(SPECIALS)}")
        ids = {}
        for tok in tokens:
            if not tok or tok in ids or any(ch.isspace() for ch in tok):
                raise ContractError(f"invalid or duplicate vocab token {tok!r}")
            if tok == CONTINUATION:
                raise ContractError("bare continuation prefix is not a token")
            ids[tok] = len(ids)
        self.tokens = tuple(tokens)
        self.ids = ids
        self.lowercase = lowercase

    pad_id = 0
    unk_id = 1
    cls_id = 2
    sep_id = 3

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.ids

    def __eq__(self, other):
        return isinstance(other, Vocab) and self.tokens == other.tokens

    def text(self):
        return "\n".join(self.tokens) + "\n"

    @property
    def hash(self):
        return hashlib.sha256(self.text().encode("utf-8")).hexdigest()

    def save(self, path):
        Path(path).write_text(self.text(), encoding="utf-8")

    @classmethod
    def load(cls, path):
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if tuple(lines[:4]) != SPECIALS:
            raise ParseError(f"first four lines must be {' '.join(SPECIALS)}", path=str(path))
        try:
            return cls(lines)
        except ContractError as exc:
            raise ParseError(str(exc), path=str(path)) from None


def build_vocab(sentences, max_size=8192, lowercase=True):
    """Build a vocab from raw sentences.

    Every character seen gets a word-initial and a continuation piece so no
    seen word falls back to UNK; whole words then fill the remaining slots in
    order of frequency.
    """
    words = Counter()
    chars = set()
    for sentence in sentences:
        for word in _WORD.findall(sentence):
            word = _fold(word, lowercase)
            words[word] += 1
            chars.update(word)
    tokens = list(SPECIALS)
    for ch in sorted(chars):
        tokens += [ch, CONTINUATION + ch]
    if len(tokens) > max_size:
        raise ContractError(f"max_size {max_size} cannot hold the {len(tokens)} character pieces")
    seen = set(tokens)
    for word, _ in sorted(words.items(), key=lambda kv: (-kv[1], kv[0])):
        if len(tokens) >= max_size:
            break
        if word not in seen:
            tokens.append(word)
            seen.add(word)
    return Vocab(tokens, lowercase=lowercase)


def _fold(word, lowercase):
    if not lowercase:
        return word
    low = word.lower()
    # keep offsets aligned when lowercasing changes length
    return low if len(low) == len(word) else word


def tokenize(vocab, sentence):
    """Segment ``sentence`` into pieces by greedy longest match.

    Returns ``(pieces, char_spans)``.  Text the vocab cannot cover becomes a
    single UNK spanning the rest of the word.
    """
    if not sentence.strip():
        raise ContractError("cannot tokenize an empty sentence")
    pieces = []
    spans = []
    for m in _WORD.finditer(sentence):
        word = _fold(m.group(), vocab.lowercase)
        start = 0
        while start < len(word):
            end = len(word)
            piece = None
            while end > start:
                cand = word[start:end]
                if start > 0:
                    cand = CONTINUATION + cand
                if cand in vocab.ids:
                    piece = cand
                    break
                end -= 1
            if piece is None:
                pieces.append(UNK)
                spans.append((m.start() + start, m.end()))
                break
            pieces.append(piece)
            spans.append((m.start() + start, m.start() + end))
            start = end
    return pieces, spans


def make_position_vector(char_spans, target_spans, n):
    """Binary vector over token positions marking pieces that overlap a target."""
    if len(char_spans) > n:
        raise ContractError(f"{len(char_spans)} token spans exceed length {n}")
    p = np.zeros(n, dtype=np.int8)
    for a, b in target_spans:
        hit = False
        for i, (s, e) in enumerate(char_spans):
            if s < 0:
                continue
            if s < b and a < e:
                p[i] = 1
                hit = True
        if not hit:
            raise AlignmentError(f"target span {a}:{b} covers no token")
    return p


def window_bounds(p_start, p_end, w, n):
    """Clamp ``[p_start - w, p_end + w]`` into ``[1, n]``; positions are 1-based."""
    if not (1 <= p_start <= p_end <= n):
        raise ContractError(f"need 1 <= p_start <= p_end <= n, got {p_start}, {p_end}, {n}")
    if w < 0:
        raise ContractError(f"window size must be non-negative, got {w}")
    return max(p_start - w, 1), min(p_end + w, n)


@dataclass(frozen=True, eq=False)
class TokenizedInstance:
    token_ids: np.ndarray
    char_spans: tuple
    p: np.ndarray
    p_start: int
    p_end: int
    window: tuple

    @property
    def n(self):
        return len(self.token_ids)

    @property
    def length(self):
        """Number of non-PAD positions."""
        return int(np.count_nonzero(self.token_ids != Vocab.pad_id))


def encode_instance(vocab, sentence, target_spans, n=DEFAULT_MAX_LENGTH, w=DEFAULT_WINDOW):
    """Build model inputs for one target: padded ids, position vector, window."""
    if n < 3:
        raise ContractError("max length must leave room for CLS, a piece and SEP")
    pieces, spans = tokenize(vocab, sentence)
    # alignment is checked on the full sentence so truncation is reported separately
    make_position_vector(spans, target_spans, len(spans))
    kept = n - 2
    total = len(pieces)
    pieces, spans = pieces[:kept], spans[:kept]
    ids = [vocab.cls_id] + [vocab.ids[t] for t in pieces] + [vocab.sep_id]
    ids += [vocab.pad_id] * (n - len(ids))
    char_spans = (NO_SPAN, *spans, NO_SPAN) + (NO_SPAN,) * (n - len(spans) - 2)

    p = np.zeros(n, dtype=np.int8)
    for a, b in target_spans:
        for i, (s, e) in enumerate(char_spans):
            if s >= 0 and s < b and a < e:
                p[i] = 1
    hits = np.flatnonzero(p)
    if hits.size == 0:
        raise TruncationError(
            f"target lies beyond the first {kept} of {total} pieces; raise the max length"
        )
    p_start, p_end = int(hits[0]) + 1, int(hits[-1]) + 1
    return TokenizedInstance(
        token_ids=np.asarray(ids, dtype=np.int64),
        char_spans=char_spans,
        p=p,
        p_start=p_start,
        p_end=p_end,
        window=window_bounds(p_start, p_end, w, n),
    )

"""Fixture lexicon and template-generated annotated sentences for tests."""

import random

from frameid.lexicon import AnnotationInstance, parse_lexicon

FRAMES = [
    "Possibility", "Capability", "Certainty", "Differentiation", "Awareness",
    "Familiarity", "Degree", "Causation", "Possession", "Have_associated",
    "Desirability", "Visiting",
]

LEXICAL_UNITS = [
    ("can", "v", ["Possibility", "Capability"]),
    ("able", "a", ["Capability"]),
    ("possible", "a", ["Possibility"]),
    ("might", "v", ["Possibility"]),
    ("know", "v", ["Certainty", "Differentiation", "Awareness", "Familiarity"]),
    ("sure", "a", ["Certainty"]),
    ("certain", "a", ["Certainty"]),
    ("aware", "a", ["Awareness"]),
    ("tell", "v", ["Differentiation"]),
    ("familiar", "a", ["Familiarity"]),
    ("so", "adv", ["Degree"]),
    ("very", "adv", ["Degree"]),
    ("so", "c", ["Causation"]),
    ("because", "c", ["Causation"]),
    ("have", "v", ["Possession", "Have_associated"]),
    ("own", "v", ["Possession"]),
    ("good", "a", ["Desirability"]),
    ("great", "a", ["Desirability"]),
    ("visit", "v", ["Visiting"]),
    ("visit", "n", ["Visiting"]),
]


def lexicon_text():
    lines = ["# fixture lexicon"]
    lines += [f"frame\t{name}" for name in FRAMES]
    lines += [f"lu\t{lemma}\t{pos}\t{','.join(frames)}" for lemma, pos, frames in LEXICAL_UNITS]
    return "\n".join(lines) + "\n"


def fixture_lexicon():
    return parse_lexicon(lexicon_text())


PEOPLE = ["she", "he", "my aunt", "the teacher", "our neighbour", "the pilot", "tom", "anna"]
NOUNS = ["the soup", "the room", "the lake", "the road", "the film", "the exam"]
ADJECTIVES = ["cold", "warm", "long", "dark", "quiet", "hard", "bright"]
RESULTS = ["we stayed home", "we left early", "they closed it", "nobody came", "we waited"]
SKILLS = ["swim", "sing", "drive", "cook", "paint", "juggle"]
EVENTS = ["rain", "snow", "flood", "freeze"]
TIMES = ["tonight", "tomorrow", "later", "soon"]
RELATIVES = ["a sister", "a brother", "two cousins", "an uncle"]
THINGS = ["a car", "a boat", "a piano", "a bike"]


def _instance(lexicon, sentence, word, frame, lu, occurrence=0):
    start = -1
    for _ in range(occurrence + 1):
        start = _find_word(sentence, word, start + 1)
    return AnnotationInstance(
        sentence, ((start, start + len(word)),), lexicon.frame_id(frame), lu
    )


def _find_word(sentence, word, begin):
    pos = begin
    while True:
        pos = sentence.index(word, pos)
        before = pos == 0 or sentence[pos - 1] == " "
        after = pos + len(word) == len(sentence) or sentence[pos + len(word)] == " "
        if before and after:
            return pos
        pos += 1


def so_corpus(lexicon, sentences=6, seed=0):
    """Sentences with two "so" tokens: degree first, causation second."""
    rng = random.Random(seed)
    seen = set()
    out = []
    while len(seen) < sentences:
        s = f"{rng.choice(NOUNS)} was so {rng.choice(ADJECTIVES)} so {rng.choice(RESULTS)}"
        if s in seen:
            continue
        seen.add(s)
        out.append(_instance(lexicon, s, "so", "Degree", ("so", "adv"), 0))
        out.append(_instance(lexicon, s, "so", "Causation", ("so", "c"), 1))
    return out


def _templates():
    return [
        (lambda r: f"{r.choice(PEOPLE)} can {r.choice(SKILLS)} well", "can", "Capability", ("can", "v")),
        (lambda r: f"it can {r.choice(EVENTS)} here {r.choice(TIMES)}", "can", "Possibility", ("can", "v")),
        (lambda r: f"{r.choice(PEOPLE)} knows {r.choice(PEOPLE)} quite well", "knows", "Familiarity", ("know", "v")),
        (lambda r: f"{r.choice(PEOPLE)} knew that it would {r.choice(EVENTS)}", "knew", "Awareness", ("know", "v")),
        (lambda r: f"{r.choice(PEOPLE)} knows the {r.choice(SKILLS)} class from the other one", "knows",
         "Differentiation", ("know", "v")),
        (lambda r: f"i know for sure it will {r.choice(EVENTS)} {r.choice(TIMES)}", "know", "Certainty", ("know", "v")),
        (lambda r: f"{r.choice(PEOPLE)} has {r.choice(THINGS)} now", "has", "Possession", ("have", "v")),
        (lambda r: f"{r.choice(PEOPLE)} has {r.choice(RELATIVES)} abroad", "has", "Have_associated", ("have", "v")),
        (lambda r: f"{r.choice(NOUNS)} was so {r.choice(ADJECTIVES)} today", "so", "Degree", ("so", "adv")),
        (lambda r: f"it was late so {r.choice(RESULTS)}", "so", "Causation", ("so", "c")),
        (lambda r: f"{r.choice(PEOPLE)} visited {r.choice(NOUNS)} {r.choice(TIMES)}", "visited", "Visiting", ("visit", "v")),
        (lambda r: f"{r.choice(NOUNS)} was good {r.choice(TIMES)}", "good", "Desirability", ("good", "a")),
    ]


def template_corpus(lexicon, size=50, seed=0):
    """``size`` unique single-target sentences cycling through the templates."""
    rng = random.Random(seed)
    templates = _templates()
    seen = set()
    out = []
    i = 0
    while len(out) < size:
        make, word, frame, lu = templates[i % len(templates)]
        i += 1
        sentence = make(rng)
        if sentence in seen:
            continue
        seen.add(sentence)
        out.append(_instance(lexicon, sentence, word, frame, lu))
    return out

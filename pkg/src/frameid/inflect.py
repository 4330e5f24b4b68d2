"""Rule-based English inflection for lexicon expansion.

Only generation is supported (lemma to surface forms).  Regular suffix rules
cover the bulk of the vocabulary, and bundled tables handle irregular verbs,
nouns and adjectives.
"""

import re

# base past past-participle; alternatives separated by "/"
_IRREGULAR_VERBS = """
arise arose arisen
awake awoke awoken
be was/were been
bear bore borne
beat beat beaten
become became become
begin began begun
bend bent bent
bet bet bet
bid bid bid
bind bound bound
bite bit bitten
bleed bled bled
blow blew blown
break broke broken
breed bred bred
bring brought brought
build built built
burn burnt/burned burnt/burned
burst burst burst
buy bought bought
cast cast cast
catch caught caught
choose chose chosen
cling clung clung
come came come
cost cost cost
creep crept crept
cut cut cut
deal dealt dealt
dig dug dug
do did done
draw drew drawn
dream dreamt/dreamed dreamt/dreamed
drink drank drunk
drive drove driven
eat ate eaten
fall fell fallen
feed fed fed
feel felt felt
fight fought fought
find found found
flee fled fled
fling flung flung
fly flew flown
forbid forbade forbidden
forecast forecast forecast
foresee foresaw foreseen
forget forgot forgotten
forgive forgave forgiven
freeze froze frozen
get got got/gotten
give gave given
go went gone
grind ground ground
grow grew grown
hang hung/hanged hung/hanged
have had had
hear heard heard
hide hid hidden
hit hit hit
hold held held
hurt hurt hurt
keep kept kept
kneel knelt knelt
know knew known
lay laid laid
lead led led
lean leant/leaned leant/leaned
leap leapt/leaped leapt/leaped
learn learnt/learned learnt/learned
leave left left
lend lent lent
let let let
lie lay lain
light lit/lighted lit/lighted
lose lost lost
make made made
mean meant meant
meet met met
mislead misled misled
mistake mistook mistaken
overcome overcame overcome
overtake overtook overtaken
pay paid paid
prove proved proven/proved
put put put
quit quit quit
read read read
rid rid rid
ride rode ridden
ring rang rung
rise rose risen
run ran run
say said said
see saw seen
seek sought sought
sell sold sold
send sent sent
set set set
sew sewed sewn/sewed
shake shook shaken
shed shed shed
shine shone shone
shoot shot shot
show showed shown
shrink shrank shrunk
shut shut shut
sing sang sung
sink sank sunk
sit sat sat
sleep slept slept
slide slid slid
sling slung slung
slit slit slit
smell smelt/smelled smelt/smelled
speak spoke spoken
speed sped sped
spell spelt/spelled spelt/spelled
spend spent spent
spill spilt/spilled spilt/spilled
spin spun spun
spit spat spat
split split split
spoil spoilt/spoiled spoilt/spoiled
spread spread spread
spring sprang sprung
stand stood stood
steal stole stolen
stick stuck stuck
sting stung stung
stink stank stunk
strike struck struck
string strung strung
strive strove striven
swear swore sworn
sweep swept swept
swell swelled swollen
swim swam swum
swing swung swung
take took taken
teach taught taught
tear tore torn
tell told told
think thought thought
throw threw thrown
thrust thrust thrust
tread trod trodden
understand understood understood
undertake undertook undertaken
upset upset upset
wake woke woken
wear wore worn
weave wove woven
weep wept wept
win won won
wind wound wound
withdraw withdrew withdrawn
withhold withheld withheld
withstand withstood withstood
wring wrung wrung
write wrote written
"""

# forms the suffix rules get wrong, beyond past tenses
_VERB_SPECIAL_FORMS = {
    "be": {"am", "is", "are", "being"},
    "have": {"has"},
    "do": {"does"},
    "go": {"goes"},
    "can": {"could"},
    "will": {"would"},
    "shall": {"should"},
    "may": {"might"},
    "must": set(),
    "ought": set(),
}

_THIRD_SINGULAR = {"be": "is", "have": "has", "do": "does", "go": "goes"}

_MODALS = {"can", "could", "will", "would", "shall", "should", "may", "might", "must", "ought"}

_IRREGULAR_NOUNS = {
    "man": "men", "woman": "women", "child": "children", "person": "people",
    "foot": "feet", "tooth": "teeth", "goose": "geese", "mouse": "mice",
    "louse": "lice", "ox": "oxen", "die": "dice", "datum": "data",
    "criterion": "criteria", "phenomenon": "phenomena", "analysis": "analyses",
    "basis": "bases", "crisis": "crises", "thesis": "theses", "hypothesis": "hypotheses",
    "index": "indices", "appendix": "appendices", "cactus": "cacti",
    "fungus": "fungi", "nucleus": "nuclei", "radius": "radii", "stimulus": "stimuli",
    "medium": "media", "bacterium": "bacteria", "curriculum": "curricula",
    "memorandum": "memoranda", "leaf": "leaves", "knife": "knives", "wife": "wives",
    "life": "lives", "half": "halves", "wolf": "wolves", "shelf": "shelves",
    "self": "selves", "thief": "thieves", "loaf": "loaves", "calf": "calves",
    "elf": "elves", "scarf": "scarves", "hero": "heroes", "potato": "potatoes",
    "tomato": "tomatoes", "echo": "echoes", "veto": "vetoes", "torpedo": "torpedoes",
}

_UNCOUNTABLE_NOUNS = {
    "sheep", "fish", "deer", "series", "species", "aircraft", "information",
    "equipment", "news", "advice", "furniture", "luggage", "rice", "money",
    "software", "music", "evidence", "knowledge", "research",
}

_IRREGULAR_ADJECTIVES = {
    "good": ("better", "best"),
    "well": ("better", "best"),
    "bad": ("worse", "worst"),
    "ill": ("worse", "worst"),
    "far": ("farther", "farthest"),
    "little": ("less", "least"),
    "many": ("more", "most"),
    "much": ("more", "most"),
    "old": ("older", "oldest"),
}

# stress falls on the last syllable, so the final consonant doubles
_DOUBLING_VERBS = {
    "admit", "commit", "omit", "permit", "submit", "transmit", "emit", "refer",
    "prefer", "confer", "defer", "infer", "occur", "recur", "incur", "concur",
    "regret", "control", "patrol", "compel", "expel", "propel", "repel",
    "equip", "forget", "begin", "upset", "abhor", "deter", "excel",
}

_VOWELS = set("aeiou")


def _parse_irregular(table):
    verbs = {}
    for line in table.strip().splitlines():
        base, past, participle = line.split()
        verbs[base] = (tuple(past.split("/")), tuple(participle.split("/")))
    return verbs


IRREGULAR_VERBS = _parse_irregular(_IRREGULAR_VERBS)


def _syllables(word):
    return len(re.findall(r"[aeiouy]+", word.rstrip("e"))) or 1


def _ends_cvc(word):
    if len(word) < 3:
        return False
    a, b, c = word[-3], word[-2], word[-1]
    return (
        a not in _VOWELS
        and b in _VOWELS
        and c not in _VOWELS
        and c not in "wxy"
    )


def _doubles(word):
    if word in _DOUBLING_VERBS:
        return True
    return _syllables(word) == 1 and _ends_cvc(word)


def third_singular(verb):
    if verb in _THIRD_SINGULAR:
        return _THIRD_SINGULAR[verb]
    if re.search(r"(s|x|z|ch|sh)$", verb):
        return verb + "es"
    if verb.endswith("y") and len(verb) > 1 and verb[-2] not in _VOWELS:
        return verb[:-1] + "ies"
    if verb.endswith("o") and len(verb) > 1 and verb[-2] not in _VOWELS:
        return verb + "es"
    return verb + "s"


def gerund(verb):
    if verb.endswith("ie"):
        return verb[:-2] + "ying"
    if verb.endswith("ee") or verb.endswith("ye") or verb.endswith("oe"):
        return verb + "ing"
    if verb.endswith("e") and len(verb) > 2:
        return verb[:-1] + "ing"
    if _doubles(verb):
        return verb + verb[-1] + "ing"
    return verb + "ing"


def regular_past(verb):
    if verb.endswith("e"):
        return verb + "d"
    if verb.endswith("y") and len(verb) > 1 and verb[-2] not in _VOWELS:
        return verb[:-1] + "ied"
    if _doubles(verb):
        return verb + verb[-1] + "ed"
    if verb.endswith("c"):
        return verb + "ked"
    return verb + "ed"


def verb_forms(verb):
    if verb in _MODALS:
        return {verb} | _VERB_SPECIAL_FORMS.get(verb, set())
    forms = {verb, third_singular(verb), gerund(verb)}
    forms |= _VERB_SPECIAL_FORMS.get(verb, set())
    if verb in IRREGULAR_VERBS:
        past, participle = IRREGULAR_VERBS[verb]
        forms.update(past)
        forms.update(participle)
    else:
        forms.add(regular_past(verb))
    return forms


def plural(noun):
    if noun in _IRREGULAR_NOUNS:
        return _IRREGULAR_NOUNS[noun]
    if noun in _UNCOUNTABLE_NOUNS:
        return noun
    if re.search(r"(s|x|z|ch|sh)$", noun):
        return noun + "es"
    if noun.endswith("y") and len(noun) > 1 and noun[-2] not in _VOWELS:
        return noun[:-1] + "ies"
    return noun + "s"


def noun_forms(noun):
    return {noun, plural(noun)}


def adjective_forms(adj):
    if adj in _IRREGULAR_ADJECTIVES:
        return {adj, *_IRREGULAR_ADJECTIVES[adj]}
    syllables = _syllables(adj)
    if syllables == 1 or (syllables == 2 and adj.endswith("y")):
        if adj.endswith("e"):
            stem = adj[:-1]
        elif adj.endswith("y") and len(adj) > 1 and adj[-2] not in _VOWELS:
            stem = adj[:-1] + "i"
        elif syllables == 1 and _ends_cvc(adj):
            stem = adj + adj[-1]
        else:
            stem = adj
        return {adj, stem + "er", stem + "est"}
    return {adj, "more " + adj, "most " + adj}


_WORD_RULES = {
    "v": verb_forms,
    "n": noun_forms,
    "a": adjective_forms,
}


def inflect(lemma, pos):
    """Return the set of lowercased surface forms for ``lemma`` under ``pos``.

    Multi-word lemmas inflect their head word only: the first word for verbs
    and adjectives, the last word for nouns.  The lemma itself is always in
    the result.  Unknown parts of speech yield just the lemma.
    """
    words = lemma.lower().split()
    if not words:
        raise ValueError("lemma must be non-empty")
    base = " ".join(words)
    rule = _WORD_RULES.get(pos)
    if rule is None:
        return {base}
    head = len(words) - 1 if pos == "n" else 0
    forms = set()
    for form in rule(words[head]):
        forms.add(" ".join(words[:head] + [form] + words[head + 1:]))
    forms.add(base)
    return forms

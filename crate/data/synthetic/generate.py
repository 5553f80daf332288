#!/usr/bin/env python3
"""Regenerates the bundled synthetic corpus, seed grammar and relation facts.

Run from this directory: python3 generate.py
Output is deterministic for a given seed.
"""

import json
import random

SEED = 20240611
LAYERS = ["small-caps", "named-entity", "instance", "class"]

FIRST = ["Ada", "Bruno", "Clara", "Dmitri", "Elena", "Felix", "Greta", "Hugo", "Irene",
         "Jonas", "Katja", "Lorenz", "Mira", "Nils", "Olga", "Pavel", "Rosa", "Stefan",
         "Tilda", "Viktor"]
LAST = ["Adler", "Berger", "Conti", "Dahl", "Eckert", "Fischer", "Gallo", "Horvat", "Ibsen",
        "Jansen", "Keller", "Lang", "Moreau", "Novak", "Ortiz", "Petrov"]
CITIES = ["Vienna", "Lyon", "Porto", "Krakow", "Dublin", "Turin", "Ghent", "Bergen", "Riga",
          "Graz", "Basel", "Leeds", ("New", "York"), ("Buenos", "Aires"), ("San", "Diego")]
COMPANIES = [("Acme", "Corp"), ("Globex", "Corp"), ("Initech", "Corp"), ("Umbra", "Corp"),
             ("Vortex", "Corp")]
UNIVERSITIES = [("Leiden", "University"), ("Uppsala", "University"), ("Bologna", "University"),
                ("Coimbra", "University"), ("Tartu", "University")]
PROFESSIONS = ["physicist", "chemist", "painter", "musician", "poet", "composer"]
VOWEL_PROFESSIONS = ["engineer", "architect", "astronomer"]
# unannotated professions and how often each occurs
RARE_PROFESSIONS = [("botanist", 5), ("geologist", 3), ("sculptor", 2)]
MONTHS = ["January", "February", "March", "April", "May", "June", "July", "August",
          "September", "October", "November", "December"]

SEED_GRAMMAR = """\
%start <Relation>
positive\t<Person> ::= Person{class}
positive\t<Location> ::= Location{class}
positive\t<Organization> ::= Organization{class}
positive\t<Profession> ::= Profession{class}
positive\t<Date> ::= Date{named-entity}
positive\t<Event> ::= born
positive\t<Event> ::= buried
positive\t<Event> ::= raised
positive\t<Relation> ::= <Person> is <Life Role>
positive\t<Life Role> ::= <Life Role> who <Action>
"""


def title_id(words):
    return "_".join(w[0].upper() + w[1:] for w in words)


class Sentence:
    def __init__(self, sid):
        self.id = sid
        self.words = []
        self.tokens = {name: [] for name in LAYERS}

    def add(self, words, **layers):
        if isinstance(words, str):
            words = words.split()
        start = len(self.words)
        self.words.extend(words)
        end = len(self.words)
        for name, value in layers.items():
            self.tokens[name.replace("_", "-")].append((start, end, value))
        return (start, end)

    def person(self, name):
        first, last = name
        s, _ = self.add([first, last], named_entity="Person", instance=f"{first}_{last}",
                        **{"class": "Person"})
        # small caps echo the capitalized words one by one
        self.tokens["small-caps"].append((s, s + 1, first.lower()))
        self.tokens["small-caps"].append((s + 1, s + 2, last.lower()))

    def named(self, words, ne, cls, instance):
        words = list(words) if isinstance(words, tuple) else [words]
        s = len(self.words)
        self.add(words, named_entity=ne, instance=instance, **{"class": cls})
        for i, w in enumerate(words):
            self.tokens["small-caps"].append((s + i, s + i + 1, w.lower()))

    def city(self, city):
        words = list(city) if isinstance(city, tuple) else [city]
        self.named(city, "Location", "Location", title_id(words))
        return title_id(words)

    def org(self, org):
        self.named(org, "Organization", "Organization", title_id(list(org)))
        return title_id(list(org))

    def profession(self, word, annotated=True):
        if annotated:
            self.add(word, instance=title_id([word]), **{"class": "Profession"})
        else:
            self.add(word)

    def date(self, day, month, year):
        s = len(self.words)
        self.add([str(day), MONTHS[month - 1], str(year)], named_entity="Date")
        self.tokens["small-caps"].append((s + 1, s + 2, MONTHS[month - 1].lower()))
        return f"{year:04d}-{month:02d}-{day:02d}"

    def to_json(self):
        layers = {}
        for name in LAYERS:
            tiles, pos = [], 0
            for s, e, v in sorted(self.tokens[name]):
                if pos < s:
                    tiles.append({"v": None, "s": pos, "e": s})
                tiles.append({"v": v, "s": s, "e": e})
                pos = e
            if pos < len(self.words):
                tiles.append({"v": None, "s": pos, "e": len(self.words)})
            layers[name] = tiles
        return json.dumps({"id": self.id, "words": self.words, "layers": layers},
                          separators=(",", ":"))


def main():
    rng = random.Random(SEED)
    names = [(f, l) for f in FIRST for l in LAST]
    rng.shuffle(names)
    names = iter(names)
    sentences, facts, counters = [], [], {}

    def new(kind):
        n = counters.get(kind, 0)
        counters[kind] = n + 1
        s = Sentence(f"{kind}{n:03d}")
        sentences.append(s)
        return s

    def fact(s, predicate, value, kind):
        facts.append((predicate, s.id, value, kind))

    def person(s):
        p = next(names)
        s.person(p)
        return p

    def event_place(tag, event, predicate, count):
        for _ in range(count):
            s = new(tag)
            person(s)
            s.add(f"was {event} in")
            place = s.city(rng.choice(CITIES))
            if predicate:
                fact(s, predicate, place, "resource")

    event_place("born", "born", "birthPlace", 36)
    event_place("buried", "buried", "burialPlace", 24)
    event_place("raised", "raised", None, 14)

    for _ in range(18):
        s = new("bornon")
        person(s)
        s.add("was born on")
        iso = s.date(rng.randint(1, 28), rng.randint(1, 12), rng.randint(1820, 1960))
        s.add("in")
        place = s.city(rng.choice(CITIES))
        fact(s, "birthDate", iso, "date")
        fact(s, "birthPlace", place, "resource")

    for i in range(24):
        s = new("prof")
        person(s)
        s.add("is a")
        prof = rng.choice(PROFESSIONS)
        s.profession(prof)
        s.add("from")
        city = rng.choice(CITIES)
        s.city(city)
        fact(s, "occupation", title_id([prof]), "resource")
        if i < 4:
            # a knowledge-base description spanning two nodes
            city_words = " ".join(city) if isinstance(city, tuple) else city
            fact(s, "description", f"{prof} from {city_words}", "string")

    for word, count in RARE_PROFESSIONS:
        for _ in range(count):
            s = new("rare")
            person(s)
            s.add("is a")
            s.profession(word, annotated=False)
            s.add("from")
            s.city(rng.choice(CITIES))
            fact(s, "occupation", word, "string")

    for _ in range(8):
        s = new("vowel")
        person(s)
        s.add("is an")
        prof = rng.choice(VOWEL_PROFESSIONS)
        s.profession(prof)
        s.add("from")
        s.city(rng.choice(CITIES))
        fact(s, "occupation", title_id([prof]), "resource")

    for _ in range(8):
        s = new("plain")
        person(s)
        s.add("is a")
        prof = rng.choice(PROFESSIONS)
        s.profession(prof)
        fact(s, "occupation", title_id([prof]), "resource")

    for _ in range(4):
        s = new("cosmic")
        person(s)
        s.add("is a")
        s.profession("physicist")
        s.add("who discovered cosmic rays")
        fact(s, "occupation", "Physicist", "resource")
        fact(s, "knownFor", "cosmic rays", "string")

    for i in range(28):
        s = new("joined")
        person(s)
        s.add("joined")
        if i % 2 == 0:
            fact(s, "employer", s.org(rng.choice(COMPANIES)), "resource")
        else:
            fact(s, "almaMater", s.org(rng.choice(UNIVERSITIES)), "resource")

    for _ in range(6):
        s = new("lectured")
        person(s)
        s.add("lectured at")
        fact(s, "employer", s.org(rng.choice(UNIVERSITIES + COMPANIES)), "resource")

    for _ in range(14):
        s = new("married")
        person(s)
        s.add("married")
        first, last = person(s)
        fact(s, "spouse", f"{first}_{last}", "resource")

    for rel in ["son", "daughter"]:
        for _ in range(5):
            s = new(rel)
            person(s)
            s.add(f"was the {rel} of")
            first, last = person(s)
            fact(s, "parent", f"{first}_{last}", "resource")

    for _ in range(9):
        s = new("moved")
        person(s)
        s.add("moved to")
        s.city(rng.choice(CITIES))

    for _ in range(5):
        s = new("retired")
        person(s)
        s.add("retired to")
        s.city(rng.choice(CITIES))

    for _ in range(7):
        s = new("died")
        person(s)
        s.add("died in")
        s.city(rng.choice(CITIES))

    for _ in range(6):
        s = new("founded")
        person(s)
        s.add("founded")
        s.org(rng.choice(COMPANIES))

    for _ in range(4):
        s = new("studied")
        person(s)
        s.add("studied at")
        fact(s, "almaMater", s.org(rng.choice(UNIVERSITIES)), "resource")

    for _ in range(3):
        s = new("worked")
        person(s)
        s.add("worked as a")
        prof = rng.choice(PROFESSIONS)
        s.profession(prof)
        fact(s, "occupation", title_id([prof]), "resource")

    with open("seed_grammar.txt", "w") as f:
        f.write(SEED_GRAMMAR)
    with open("corpus.jsonl", "w") as f:
        f.write(json.dumps({"layers": LAYERS}) + "\n")
        for s in sentences:
            f.write(s.to_json() + "\n")
    with open("relations.tsv", "w") as f:
        for row in facts:
            f.write("\t".join(row) + "\n")
    print(f"{len(sentences)} sentences, {len(facts)} facts")


if __name__ == "__main__":
    main()

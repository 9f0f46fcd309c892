"""A miniature Spanish-like agreement language with rule-derivable gold.

Sentences follow ``DET NOUN ADJ`` optionally extended by a copular
(``VERB ADJ``) or passive (``VERB VERB-participle``) predicate.
Determiners, gendered adjectives and participles agree with the single
noun in gender and number; occupation nouns are sampled masculine with
probability ``masc_rate``.
"""

from __future__ import annotations

import numpy as np

from .evaluation import BiasQuery
from .pipeline import AnimacyGazetteer
from .treebank import DepSentence, MorphTag, Token

# (masc lemma, fem lemma, masc plural, fem plural)
NOUNS = [
    ("ingeniero", "ingeniera", "ingenieros", "ingenieras"),
    ("médico", "médica", "médicos", "médicas"),
    ("abogado", "abogada", "abogados", "abogadas"),
    ("arquitecto", "arquitecta", "arquitectos", "arquitectas"),
    ("profesor", "profesora", "profesores", "profesoras"),
    ("doctor", "doctora", "doctores", "doctoras"),
    ("director", "directora", "directores", "directoras"),
    ("enfermero", "enfermera", "enfermeros", "enfermeras"),
    ("cocinero", "cocinera", "cocineros", "cocineras"),
    ("maestro", "maestra", "maestros", "maestras"),
    ("científico", "científica", "científicos", "científicas"),
    ("escritor", "escritora", "escritores", "escritoras"),
    ("pintor", "pintora", "pintores", "pintoras"),
    ("político", "política", "políticos", "políticas"),
    ("cirujano", "cirujana", "cirujanos", "cirujanas"),
    ("ministro", "ministra", "ministros", "ministras"),
    ("actor", "actriz", "actores", "actrices"),
    ("presidente", "presidenta", "presidentes", "presidentas"),
    ("trabajador", "trabajadora", "trabajadores", "trabajadoras"),
    ("bombero", "bombera", "bomberos", "bomberas"),
]

GENDERED_ADJ = ["bueno", "malo", "hermoso", "alto", "famoso", "experto", "nuevo", "viejo",
                "rico", "sincero"]
INVARIANT_ADJ = [("inteligente", "inteligentes"), ("amable", "amables"), ("feliz", "felices"),
                 ("joven", "jóvenes")]
PARTICIPLES = ["premiar", "elegir", "contratar", "despedir"]
_PART_STEM = {"premiar": "premiad", "elegir": "elegid", "contratar": "contratad", "despedir": "despedid"}

G = {"m": "Masc", "f": "Fem"}
N = {"s": "Sing", "p": "Plur"}


def _gn(g: str, n: str, **extra) -> MorphTag:
    return MorphTag.of(Gender=G[g], Number=N[n], **extra)


def det_form(definite: bool, g: str, n: str) -> str:
    if definite:
        return {"ms": "el", "fs": "la", "mp": "los", "fp": "las"}[g + n]
    return {"ms": "un", "fs": "una", "mp": "unos", "fp": "unas"}[g + n]


def gendered_form(stem_masc: str, g: str, n: str) -> str:
    stem = stem_masc[:-1]
    return stem + {"ms": "o", "fs": "a", "mp": "os", "fp": "as"}[g + n]


def noun_form(entry, g: str, n: str) -> str:
    masc, fem, mpl, fpl = entry
    return {"ms": masc, "fs": fem, "mp": mpl, "fp": fpl}[g + n]


def _tokens(slots, heads, labels):
    out = []
    for i, ((form, lemma, pos, tag), head, label) in enumerate(zip(slots, heads, labels), start=1):
        out.append(Token(i, form, lemma, pos, tag, head, label))
    return out


class SyntheticLanguage:
    def __init__(self, masc_rate: float = 0.9, seed: int = 0):
        self.masc_rate = masc_rate
        self.rng = np.random.default_rng(seed)
        self._count = 0

    # the sentence is fully determined by this spec; gender is the only thing interventions change
    def _spec(self):
        r = self.rng
        return {
            "noun": int(r.integers(len(NOUNS))),
            "g": "m" if r.random() < self.masc_rate else "f",
            "n": "s" if r.random() < 0.5 else "p",
            "definite": bool(r.random() < 0.5),
            "adj": int(r.integers(len(GENDERED_ADJ) + len(INVARIANT_ADJ))),
            "template": ["np", "cop", "pass"][int(r.integers(3))],
            "attr": bool(r.random() < 0.5),
            "pred": int(r.integers(len(GENDERED_ADJ) + len(INVARIANT_ADJ))),
            "part": int(r.integers(len(PARTICIPLES))),
        }

    @staticmethod
    def _adj(idx: int, g: str, n: str):
        if idx < len(GENDERED_ADJ):
            lemma = GENDERED_ADJ[idx]
            return gendered_form(lemma, g, n), lemma, "ADJ", _gn(g, n)
        sg, pl = INVARIANT_ADJ[idx - len(GENDERED_ADJ)]
        return (sg if n == "s" else pl), sg, "ADJ", MorphTag.of(Number=N[n])

    def realize(self, spec, sentence_id: str) -> DepSentence:
        g, n = spec["g"], spec["n"]
        entry = NOUNS[spec["noun"]]
        det_lemma = "el" if spec["definite"] else "uno"
        det = (det_form(spec["definite"], g, n), det_lemma, "DET",
               _gn(g, n, Definite="Def" if spec["definite"] else "Ind", PronType="Art"))
        noun = (noun_form(entry, g, n), entry[0] if g == "m" else entry[1], "NOUN", _gn(g, n))
        slots = [det, noun]
        heads, labels = [2, 0], ["det", "root"]
        noun_pos = 2
        if spec["template"] == "np" or spec["attr"]:
            slots.append(self._adj(spec["adj"], g, n))
            heads.append(2)
            labels.append("amod")
        if spec["template"] != "np":
            pred_pos = len(slots) + 2
            if spec["template"] == "cop":
                verb = ("es" if n == "s" else "son", "ser", "VERB",
                        MorphTag.of(Mood="Ind", Number=N[n], Person="3", Tense="Pres", VerbForm="Fin"))
                pred = self._adj(spec["pred"], g, n)
                rel, aux_rel = "nsubj", "cop"
            else:
                verb = ("fue" if n == "s" else "fueron", "ser", "VERB",
                        MorphTag.of(Mood="Ind", Number=N[n], Person="3", Tense="Past", VerbForm="Fin"))
                lemma = PARTICIPLES[spec["part"]]
                pred = (gendered_form(_PART_STEM[lemma] + "o", g, n), lemma, "VERB",
                        _gn(g, n, Tense="Past", VerbForm="Part"))
                rel, aux_rel = "nsubj:pass", "aux:pass"
            slots += [verb, pred]
            heads += [pred_pos, 0]
            labels += [aux_rel, "root"]
            heads[noun_pos - 1], labels[noun_pos - 1] = pred_pos, rel
        slots = [(s[0].capitalize() if i == 0 else s[0], *s[1:]) for i, s in enumerate(slots)]
        tokens = _tokens(slots, heads, labels)
        return DepSentence(tuple(tokens), sentence_id, " ".join(t.form for t in tokens))

    def sentence(self):
        self._count += 1
        spec = self._spec()
        return self.realize(spec, f"syn-{self._count}"), spec

    def corpus(self, size: int) -> list:
        return [self.sentence()[0] for _ in range(size)]

    def intervention_pairs(self, size: int) -> list:
        """``(source, noun position, gold)`` with gold built by flipping the noun's gender."""
        out = []
        for _ in range(size):
            src, spec = self.sentence()
            flipped = dict(spec, g="f" if spec["g"] == "m" else "m")
            gold = self.realize(flipped, src.sentence_id + "-gold")
            out.append((src, 2, gold))
        return out


def gazetteer() -> AnimacyGazetteer:
    return AnimacyGazetteer((m, f) for m, f, _, _ in NOUNS)


ADJECTIVES = [("good", "bueno", "buena"), ("bad", "malo", "mala"),
              ("smart", "inteligente", "inteligente"), ("beautiful", "hermoso", "hermosa")]


def queries() -> list:
    return [BiasQuery("el", "la", m, f, am, af) for m, f, _, _ in NOUNS for _, am, af in ADJECTIVES]


"""Intervention, inference, reinflection and corpus augmentation."""

from __future__ import annotations

import enum
import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial

from .config import GenderConfig
from .inference import build_instance, decode, max_product
from .model import Clamp, Prefer
from .treebank import DepSentence, MorphTag, gender_tag_domains

log = logging.getLogger(__name__)


class AnimacyGazetteer:
    """Pairs of (masculine lemma, feminine lemma) denoting people."""

    def __init__(self, pairs=()):
        self.masc_to_fem: dict[str, str] = {}
        self.fem_to_masc: dict[str, str] = {}
        for masc, fem in pairs:
            self.add(masc, fem)

    def add(self, masc: str, fem: str) -> None:
        if self.masc_to_fem.get(masc, fem) != fem or self.fem_to_masc.get(fem, masc) != masc:
            raise ValueError(f"conflicting gazetteer entry ({masc}, {fem})")
        if (masc in self.fem_to_masc and masc != fem) or (fem in self.masc_to_fem and masc != fem):
            raise ValueError(f"lemma in ({masc}, {fem}) already appears on the other side")
        self.masc_to_fem[masc] = fem
        self.fem_to_masc[fem] = masc

    @classmethod
    def parse(cls, text: str) -> "AnimacyGazetteer":
        gaz = cls()
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.rstrip("\n").split("\t")
            if len(cols) != 2 or not cols[0].strip() or not cols[1].strip():
                raise ValueError(f"gazetteer line {lineno}: expected two tab-separated lemmas")
            gaz.add(cols[0].strip(), cols[1].strip())
        return gaz

    @classmethod
    def load(cls, path) -> "AnimacyGazetteer":
        with open(path, encoding="utf-8") as f:
            return cls.parse(f.read())

    @property
    def pairs(self) -> list:
        return sorted(self.masc_to_fem.items())

    def __contains__(self, lemma) -> bool:
        return lemma in self.masc_to_fem or lemma in self.fem_to_masc

    def __len__(self) -> int:
        return len(self.masc_to_fem)

    def partner(self, lemma: str) -> str | None:
        return self.masc_to_fem.get(lemma) or self.fem_to_masc.get(lemma)

    def pair_of(self, lemma: str) -> tuple | None:
        if lemma in self.masc_to_fem:
            return lemma, self.masc_to_fem[lemma]
        if lemma in self.fem_to_masc:
            return self.fem_to_masc[lemma], lemma
        return None

    def lemma_for(self, lemma: str, feminine: bool) -> str | None:
        pair = self.pair_of(lemma)
        if pair is None:
            return None
        return pair[1] if feminine else pair[0]


def find_animate_nouns(sentence: DepSentence, gazetteer: AnimacyGazetteer,
                       gender: GenderConfig = GenderConfig(), include_propn: bool = False) -> list:
    pos_ok = {"NOUN", "PROPN"} if include_propn else {"NOUN"}
    return [t.index for t in sentence.tokens
            if t.pos in pos_ok and t.lemma in gazetteer and gender.of(t.tag) is not None]


def swap_gender(tag: MorphTag, gender: GenderConfig = GenderConfig()) -> MorphTag:
    value = gender.of(tag)
    if value is None:
        raise ValueError(f"tag {tag} has no {gender.feature} subtag in {gender.values}")
    return tag.with_value(gender.feature, gender.other(value))


# ---------------------------------------------------------------------------
# reinflection


class ReinflectStatus(str, enum.Enum):
    LEXICON = "lexicon"
    SUFFIX_RULE = "suffix-rule"
    UNCHANGED = "unchanged-flagged"


class InflectionLexicon:
    """(lemma, tag) -> surface form, learned from a treebank.

    The most frequent form wins, ties broken alphabetically; supplementary
    entries override corpus counts.  Forms are stored lowercased.
    """

    def __init__(self):
        self.counts: dict[tuple, Counter] = {}
        self.overrides: dict[tuple, str] = {}

    def add(self, lemma: str, tag: MorphTag, form: str, count: int = 1) -> None:
        self.counts.setdefault((lemma, tag), Counter())[form.lower()] += count

    def add_sentences(self, sentences) -> None:
        for s in sentences:
            for t in s.tokens:
                self.add(t.lemma, t.tag, t.form)

    def override(self, lemma: str, tag: MorphTag, form: str) -> None:
        self.overrides[(lemma, tag)] = form.lower()

    def lookup(self, lemma: str, tag: MorphTag) -> str | None:
        key = (lemma, tag)
        if key in self.overrides:
            return self.overrides[key]
        forms = self.counts.get(key)
        if not forms:
            return None
        return min(forms.items(), key=lambda kv: (-kv[1], kv[0]))[0]

    def __len__(self) -> int:
        return len(set(self.counts) | set(self.overrides))

    def read_tsv(self, path_or_text, is_text: bool = False) -> None:
        """Load 3-column supplement rows (override) or 4-column count rows."""
        text = path_or_text if is_text else open(path_or_text, encoding="utf-8").read()
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            try:
                if len(cols) == 3:
                    self.override(cols[0], MorphTag.from_string(cols[1]), cols[2])
                elif len(cols) == 4:
                    self.add(cols[0], MorphTag.from_string(cols[1]), cols[2], int(cols[3]))
                else:
                    raise ValueError(f"expected 3 or 4 columns, found {len(cols)}")
            except ValueError as exc:
                raise ValueError(f"lexicon line {lineno}: {exc}") from None

    def to_tsv(self) -> str:
        rows = []
        for (lemma, tag), forms in self.counts.items():
            for form, n in forms.items():
                rows.append((lemma, str(tag), form, str(n)))
        for (lemma, tag), form in self.overrides.items():
            rows.append((lemma, str(tag), form))
        return "".join("\t".join(r) + "\n" for r in sorted(rows))


def build_lexicon(treebank, supplement=None) -> InflectionLexicon:
    lex = InflectionLexicon()
    lex.add_sentences(treebank)
    if supplement is not None:
        lex.read_tsv(supplement)
    return lex


class SuffixRules:
    """Word-final rewrite pairs (masculine ending, feminine ending).

    An entry starting with ``^`` rewrites the whole word.  The longest
    matching source ending wins.
    """

    def __init__(self, pairs=()):
        self.pairs = [tuple(p) for p in pairs]

    @classmethod
    def parse(cls, text: str) -> "SuffixRules":
        pairs = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            if line.startswith("#") or not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != 2:
                raise ValueError(f"suffix rules line {lineno}: expected two tab-separated endings")
            pairs.append((cols[0].strip(), cols[1].strip()))
        return cls(pairs)

    def apply(self, form: str, to_feminine: bool) -> str | None:
        word = form.lower()
        best = None
        for masc, fem in self.pairs:
            src, dst = (masc, fem) if to_feminine else (fem, masc)
            if src.startswith("^"):
                if word == src[1:]:
                    return dst.lstrip("^")
                continue
            if word.endswith(src) and len(word) > len(src) and (best is None or len(src) > len(best[0])):
                best = (src, dst)
        if best is None:
            return None
        src, dst = best
        return word[:len(word) - len(src)] + dst if src else word + dst


def _match_case(form: str, original: str) -> str:
    if len(original) > 1 and original.isupper():
        return form.upper()
    if original[:1].isupper():
        return form[:1].upper() + form[1:]
    return form


def reinflect(lemma: str, new_tag: MorphTag, original_form: str, lexicon: InflectionLexicon,
              rules: SuffixRules | None = None, original_tag: MorphTag | None = None,
              gender: GenderConfig = GenderConfig(), alt_lemmas=()) -> tuple[str, ReinflectStatus]:
    """Surface form of ``lemma`` under ``new_tag``; never raises."""
    if original_tag is not None and new_tag == original_tag:
        return original_form, ReinflectStatus.LEXICON
    for cand in (*alt_lemmas, lemma):
        form = lexicon.lookup(cand, new_tag)
        if form is not None:
            return _match_case(form, original_form), ReinflectStatus.LEXICON
    target = gender.of(new_tag)
    if alt_lemmas and target is not None and original_tag is not None \
            and original_form.lower() == lemma.lower() \
            and new_tag == original_tag.with_value(gender.feature, target):
        # a citation form with only its gender changed is the paired lemma itself
        return _match_case(alt_lemmas[0], original_form), ReinflectStatus.SUFFIX_RULE
    if rules is not None and target is not None:
        if original_tag is None or gender.of(original_tag) != target:
            form = rules.apply(original_form, to_feminine=target == gender.fem)
            if form is not None:
                return _match_case(form, original_form), ReinflectStatus.SUFFIX_RULE
    return original_form, ReinflectStatus.UNCHANGED


# ---------------------------------------------------------------------------
# intervention


@dataclass
class InterventionReport:
    sentence_id: str
    positions: tuple  # intervened nouns
    original_tags: dict
    new_tags: dict
    statuses: dict = field(default_factory=dict)  # position -> ReinflectStatus
    forms: dict = field(default_factory=dict)  # position -> (old form, new form)

    def changed(self) -> list:
        return [p for p in sorted(self.new_tags) if self.new_tags[p] != self.original_tags[p]]

    def describe(self) -> str:
        lines = [f"# sentence {self.sentence_id}: intervened on {', '.join(map(str, self.positions))}"]
        for p in self.changed():
            old_form, new_form = self.forms.get(p, ("?", "?"))
            status = self.statuses.get(p)
            lines.append(f"{p}\t{old_form} -> {new_form}\t{self.original_tags[p]} -> "
                         f"{self.new_tags[p]}\t{status.value if status else '-'}")
        return "\n".join(lines) + "\n"


def intervene(sentence: DepSentence, positions, params, alpha: float = math.e,
              gender: GenderConfig = GenderConfig(), keep=(), drop_unknown: bool = False):
    """Swap the gender of the nouns at ``positions`` and re-infer the other tags.

    Intervened nouns are clamped to their swapped tag and nouns in ``keep``
    to their original tag; every other position prefers its original tag
    with strength ``alpha``.  Returns ``(tags by position, report)``.
    """
    if isinstance(positions, int):
        positions = (positions,)
    positions = tuple(positions)
    domains = gender_tag_domains(sentence, gender.feature, gender.values)
    constraints = {}
    for tok in sentence.tokens:
        if tok.index in positions:
            constraints[tok.index] = Clamp(swap_gender(tok.tag, gender))
        elif tok.index in keep:
            constraints[tok.index] = Clamp(tok.tag)
        else:
            constraints[tok.index] = Prefer(tok.tag, alpha)
    inst = build_instance(sentence, domains, params, constraints, drop_unknown=drop_unknown)
    tags = decode(inst, max_product(inst))
    original = {t.index: t.tag for t in sentence.tokens}
    return tags, InterventionReport(sentence.sentence_id, positions, original, dict(tags))


def realize(sentence: DepSentence, tags: dict, report: InterventionReport, lexicon: InflectionLexicon,
            rules: SuffixRules | None = None, gazetteer: AnimacyGazetteer | None = None,
            gender: GenderConfig = GenderConfig(), sentence_id: str | None = None) -> DepSentence:
    """Apply new tags, reinflecting changed tokens; fills the report's statuses."""
    tokens = []
    for tok in sentence.tokens:
        new_tag = tags[tok.index]
        alt = ()
        if gazetteer is not None and tok.index in report.positions:
            paired = gazetteer.lemma_for(tok.lemma, gender.of(new_tag) == gender.fem)
            alt = (paired,) if paired else ()
        form, status = reinflect(tok.lemma, new_tag, tok.form, lexicon, rules, tok.tag, gender, alt)
        report.statuses[tok.index] = status
        report.forms[tok.index] = (tok.form, form)
        tokens.append(replace(tok, tag=new_tag, form=form))
    return sentence.with_tokens(tokens, sentence_id=sentence_id)


def transform(sentence, positions, params, lexicon, rules=None, gazetteer=None, alpha=math.e,
              gender=GenderConfig(), keep=(), drop_unknown=False, sentence_id=None):
    tags, report = intervene(sentence, positions, params, alpha, gender, keep, drop_unknown)
    new = realize(sentence, tags, report, lexicon, rules, gazetteer, gender, sentence_id)
    return new, report


@dataclass
class Augmenter:
    """Everything needed to produce counterfactual variants of one sentence."""

    gazetteer: AnimacyGazetteer
    params: object
    lexicon: InflectionLexicon
    rules: SuffixRules | None = None
    alpha: float = math.e
    gender: GenderConfig = GenderConfig()
    max_variants: int = 8
    include_propn: bool = False
    drop_unknown: bool = False

    def variants(self, sentence: DepSentence):
        nouns = find_animate_nouns(sentence, self.gazetteer, self.gender, self.include_propn)
        out = []
        k = len(nouns)
        for mask in range(1, 2 ** k):
            if len(out) >= self.max_variants:
                break
            flip = tuple(p for b, p in enumerate(nouns) if mask >> b & 1)
            keep = tuple(p for p in nouns if p not in flip)
            new, report = transform(sentence, flip, self.params, self.lexicon, self.rules,
                                    self.gazetteer, self.alpha, self.gender, keep,
                                    self.drop_unknown, sentence_id=f"{sentence.sentence_id}-cda{mask}")
            out.append((new, report))
        return out


def _augment_one(augmenter: Augmenter, sentence: DepSentence):
    try:
        return augmenter.variants(sentence), None
    except Exception as exc:  # per-sentence failures must not stop a corpus run
        return [], f"{sentence.sentence_id}: {exc}"


def augment_corpus(corpus, augmenter: Augmenter, jobs: int = 1):
    """Originals in input order, each followed by its counterfactual variants."""
    corpus = list(corpus)
    if jobs > 1 and len(corpus) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(partial(_augment_one, augmenter), corpus,
                                    chunksize=max(1, len(corpus) // (4 * jobs))))
    else:
        results = [_augment_one(augmenter, s) for s in corpus]
    out, reports = [], []
    for sentence, (variants, error) in zip(corpus, results):
        out.append(sentence)
        if error is not None:
            log.warning("augmentation failed, keeping original only: %s", error)
        for new, report in variants:
            out.append(new)
            reports.append(report)
    return out, reports


def naive_swap_baseline(corpus, gazetteer: AnimacyGazetteer, lexicon: InflectionLexicon,
                        rules: SuffixRules | None = None, gender: GenderConfig = GenderConfig(),
                        include_propn: bool = False):
    """Originals plus one copy per animate sentence with only the nouns swapped."""
    out = []
    for sentence in corpus:
        out.append(sentence)
        nouns = set(find_animate_nouns(sentence, gazetteer, gender, include_propn))
        if not nouns:
            continue
        tokens = []
        for tok in sentence.tokens:
            if tok.index not in nouns:
                tokens.append(tok)
                continue
            new_tag = swap_gender(tok.tag, gender)
            paired = gazetteer.lemma_for(tok.lemma, gender.of(new_tag) == gender.fem)
            form, _ = reinflect(tok.lemma, new_tag, tok.form, lexicon, rules, tok.tag, gender,
                                (paired,) if paired else ())
            tokens.append(replace(tok, tag=new_tag, form=form))
        out.append(sentence.with_tokens(tokens, sentence_id=f"{sentence.sentence_id}-swap"))
    return out


def sentence_text(sentence: DepSentence) -> str:
    return " ".join(t.form for t in sentence.tokens)

"""Intrinsic tag/form metrics and language-model bias measurements."""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field

from .config import GenderConfig

# ---------------------------------------------------------------------------
# intrinsic evaluation


@dataclass
class IntrinsicScore:
    """Counts behind tag P/R/F1/accuracy and form accuracy.

    The positive class is "the tag differs from the source sentence".
    """

    true_changed: int = 0
    predicted_changed: int = 0
    gold_changed: int = 0
    tag_correct: int = 0
    form_correct: int = 0
    total: int = 0

    def __add__(self, other: "IntrinsicScore") -> "IntrinsicScore":
        return IntrinsicScore(*(a + b for a, b in zip(self.as_tuple(), other.as_tuple())))

    def as_tuple(self) -> tuple:
        return (self.true_changed, self.predicted_changed, self.gold_changed,
                self.tag_correct, self.form_correct, self.total)

    @property
    def tag_precision(self) -> float:
        return self.true_changed / self.predicted_changed if self.predicted_changed else 0.0

    @property
    def tag_recall(self) -> float:
        return self.true_changed / self.gold_changed if self.gold_changed else 0.0

    @property
    def tag_f1(self) -> float:
        return f1(self.tag_precision, self.tag_recall)

    @property
    def tag_accuracy(self) -> float:
        return self.tag_correct / self.total if self.total else 0.0

    @property
    def form_accuracy(self) -> float:
        return self.form_correct / self.total if self.total else 0.0

    def row(self) -> list:
        return [self.tag_precision, self.tag_recall, self.tag_f1, self.tag_accuracy, self.form_accuracy]


METRIC_COLUMNS = ("tag_P", "tag_R", "tag_F1", "tag_Acc", "form_Acc")


def f1(precision: float, recall: float) -> float:
    return 2 * precision * recall / (precision + recall) if precision + recall else 0.0


def intrinsic_score(gold, predicted_tags, predicted_forms, source, intervened) -> IntrinsicScore:
    """Score one transformed sentence against its gold counterpart.

    ``gold`` and ``source`` are DepSentences, ``predicted_tags`` and
    ``predicted_forms`` are sequences aligned with them.  Intervened
    positions (1-based) are excluded from every count.
    """
    if isinstance(intervened, int):
        intervened = (intervened,)
    n = len(source.tokens)
    if not (len(gold.tokens) == len(predicted_tags) == len(predicted_forms) == n):
        raise ValueError(f"misaligned sentences: source {n}, gold {len(gold.tokens)}, "
                         f"predicted {len(predicted_tags)} tags / {len(predicted_forms)} forms")
    score = IntrinsicScore()
    for i, (g, s) in enumerate(zip(gold.tokens, source.tokens)):
        if i + 1 in intervened:
            continue
        pred_changed = predicted_tags[i] != s.tag
        gold_changed = g.tag != s.tag
        score.predicted_changed += pred_changed
        score.gold_changed += gold_changed
        score.true_changed += pred_changed and gold_changed
        score.tag_correct += predicted_tags[i] == g.tag
        score.form_correct += predicted_forms[i].lower() == g.form.lower()
        score.total += 1
    return score


# ---------------------------------------------------------------------------
# language-model bias


@dataclass(frozen=True)
class BiasQuery:
    det_m: str
    det_f: str
    noun_m: str
    noun_f: str
    adj_m: str
    adj_f: str

    def __post_init__(self):
        if not all(self.as_tuple()):
            raise ValueError(f"empty field in query {self.as_tuple()}")

    def as_tuple(self) -> tuple:
        return (self.det_m, self.det_f, self.noun_m, self.noun_f, self.adj_m, self.adj_f)

    @property
    def masc(self) -> tuple:
        return (self.det_m, self.noun_m, self.adj_m)

    @property
    def fem(self) -> tuple:
        return (self.det_f, self.noun_f, self.adj_f)

    @property
    def masc_mismatch(self) -> tuple:
        """Masculine determiner and adjective around the feminine noun."""
        return (self.det_m, self.noun_f, self.adj_m)

    @property
    def fem_mismatch(self) -> tuple:
        return (self.det_f, self.noun_m, self.adj_f)

    def label(self) -> str:
        return f"{self.noun_m}/{self.noun_f}:{self.adj_m}/{self.adj_f}"


def read_queries(path) -> list:
    with open(path, encoding="utf-8") as f:
        return parse_queries(f.read())


def parse_queries(text: str) -> list:
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 6:
            raise ValueError(f"queries line {lineno}: expected 6 tab-separated columns")
        out.append(BiasQuery(*(c.strip() for c in cols)))
    return out


def make_queries(gazetteer, adjectives, determiners) -> list:
    """Cross every gazetteer pair with every (english, masc, fem) adjective."""
    det_m, det_f = determiners
    return [BiasQuery(det_m, det_f, m, f, adj_m, adj_f)
            for m, f in gazetteer.pairs for _, adj_m, adj_f in adjectives]


class FixedLogProbs:
    """A scorer that returns stored prefix log-probabilities for known phrases."""

    def __init__(self, table: dict):
        self.table = {tuple(w.lower() for w in k): v for k, v in table.items()}

    def prefix_logprob(self, phrase) -> float:
        key = tuple(w.lower() for w in phrase)
        try:
            return self.table[key]
        except KeyError:
            raise KeyError(f"no stored log-probability for {' '.join(phrase)!r}") from None


def stereotype_score(lm, query: BiasQuery) -> float:
    """log P(masc phrase...) - log P(fem phrase...); positive means masculine-skewed."""
    return lm.prefix_logprob(query.masc) - lm.prefix_logprob(query.fem)


def grammaticality_score(lm, query: BiasQuery) -> float:
    masc = lm.prefix_logprob(query.masc) - lm.prefix_logprob(query.masc_mismatch)
    fem = lm.prefix_logprob(query.fem) - lm.prefix_logprob(query.fem_mismatch)
    return (masc + fem) / 2


def stereotyped_words(corpus, gazetteer, threshold: float = 0.75,
                      gender: GenderConfig = GenderConfig()):
    """Gazetteer pairs whose occurrences lean toward one gender by ``threshold``.

    Occurrences are NOUN tokens whose lemma belongs to a pair, counted by
    their gender subtag.  Returns ``(masc_set, fem_set, counts)``.
    """
    if not 0.5 < threshold <= 1:
        raise ValueError("threshold must lie in (0.5, 1]")
    counts = {pair: Counter() for pair in gazetteer.pairs}
    for sent in corpus:
        for tok in sent.tokens:
            pair = gazetteer.pair_of(tok.lemma)
            if pair is None or tok.pos != "NOUN":
                continue
            g = gender.of(tok.tag)
            if g is None:
                g = gender.masc if tok.lemma == pair[0] else gender.fem
            counts[pair][g] += 1
    masc, fem = set(), set()
    for pair, c in counts.items():
        total = c[gender.masc] + c[gender.fem]
        if total == 0:
            continue
        if c[gender.masc] / total >= threshold:
            masc.add(pair)
        elif c[gender.fem] / total >= threshold:
            fem.add(pair)
    return masc, fem, counts


def group_stereotype(lm, queries, pairs) -> float:
    """Signed mean stereotyping over the queries whose noun pair is in ``pairs``."""
    scores = [stereotype_score(lm, q) for q in queries if (q.noun_m, q.noun_f) in pairs]
    return sum(scores) / len(scores) if scores else float("nan")


@dataclass
class BiasReport:
    language: str
    conditions: list
    queries: list
    stereotype: dict = field(default_factory=dict)  # condition -> list of per-query scores
    grammaticality: dict = field(default_factory=dict)

    def mean_abs_stereotype(self, condition) -> float:
        s = self.stereotype[condition]
        return sum(abs(x) for x in s) / len(s) if s else 0.0

    def mean_grammaticality(self, condition) -> float:
        g = self.grammaticality[condition]
        return sum(g) / len(g) if g else 0.0

    def to_tsv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, delimiter="\t", lineterminator="\n")
        w.writerow(["query", "metric", *self.conditions])
        for i, q in enumerate(self.queries):
            w.writerow([q.label(), "stereotyping", *(_fmt(self.stereotype[c][i]) for c in self.conditions)])
            w.writerow([q.label(), "grammaticality",
                        *(_fmt(self.grammaticality[c][i]) for c in self.conditions)])
        w.writerow(["ALL", "mean_abs_stereotyping",
                    *(_fmt(self.mean_abs_stereotype(c)) for c in self.conditions)])
        w.writerow(["ALL", "mean_grammaticality",
                    *(_fmt(self.mean_grammaticality(c)) for c in self.conditions)])
        return buf.getvalue()

    def long_rows(self) -> list:
        rows = []
        for c in self.conditions:
            rows.append((self.language, c, "mean_abs_stereotyping", self.mean_abs_stereotype(c)))
            rows.append((self.language, c, "mean_grammaticality", self.mean_grammaticality(c)))
        return rows

    def to_long_tsv(self) -> str:
        lines = ["language\tcondition\tmetric\tvalue"]
        lines += [f"{l}\t{c}\t{m}\t{_fmt(v)}" for l, c, m, v in self.long_rows()]
        return "\n".join(lines) + "\n"


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def bias_report(lms: dict, queries, language: str = "") -> BiasReport:
    """Score every query under each condition's language model.

    ``lms`` maps condition name (e.g. original / swap / mrf) to anything
    with ``prefix_logprob``.
    """
    queries = list(queries)
    report = BiasReport(language, list(lms), queries)
    for cond, lm in lms.items():
        report.stereotype[cond] = [stereotype_score(lm, q) for q in queries]
        report.grammaticality[cond] = [grammaticality_score(lm, q) for q in queries]
    return report


def intrinsic_table(rows: dict) -> str:
    """TSV with one row per system and the five metric columns."""
    lines = ["system\t" + "\t".join(METRIC_COLUMNS)]
    for name, score in rows.items():
        lines.append(name + "\t" + "\t".join(f"{x:.4f}" for x in score.row()))
    return "\n".join(lines) + "\n"

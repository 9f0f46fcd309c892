"""CoNLL-U ingestion, the dependency-sentence data model and the subtag vocabulary."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator

import numpy as np

log = logging.getLogger(__name__)

ROOT = 0


class ConllUParseError(ValueError):
    """A line of CoNLL-U input could not be read."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class ConllUValidationError(ValueError):
    """A sentence violates the dependency-tree invariants."""

    def __init__(self, message: str, sentence_id: str):
        super().__init__(f"sentence {sentence_id!r}: {message}")
        self.sentence_id = sentence_id


class UnknownSubtagError(KeyError):
    def __init__(self, subtag: "Subtag"):
        super().__init__(f"subtag {subtag} is not in the vocabulary")
        self.subtag = subtag


@dataclass(frozen=True, order=True)
class Subtag:
    feature: str
    value: str

    def __post_init__(self):
        if not self.feature or not self.value:
            raise ValueError(f"empty subtag field: {self.feature!r}={self.value!r}")

    def __str__(self) -> str:
        return f"{self.feature}={self.value}"


@dataclass(frozen=True)
class MorphTag:
    """An unordered bundle of subtags with at most one value per feature."""

    subtags: frozenset = frozenset()

    def __post_init__(self):
        subtags = frozenset(self.subtags)
        object.__setattr__(self, "subtags", subtags)
        features = [s.feature for s in subtags]
        if len(features) != len(set(features)):
            raise ValueError(f"duplicate feature in tag {sorted(map(str, subtags))}")

    @classmethod
    def from_string(cls, feats: str) -> "MorphTag":
        """Parse a FEATS column value such as ``Gender=Masc|Number=Sing``."""
        feats = feats.strip()
        if feats in ("", "_"):
            return cls()
        subtags = []
        for item in feats.split("|"):
            feature, sep, value = item.partition("=")
            if not sep:
                raise ValueError(f"malformed feature {item!r}")
            subtags.append(Subtag(feature, value))
        return cls(frozenset(subtags))

    @classmethod
    def of(cls, **features: str) -> "MorphTag":
        return cls(frozenset(Subtag(f, v) for f, v in features.items()))

    def get(self, feature: str) -> str | None:
        for s in self.subtags:
            if s.feature == feature:
                return s.value
        return None

    def with_value(self, feature: str, value: str) -> "MorphTag":
        kept = {s for s in self.subtags if s.feature != feature}
        return MorphTag(frozenset(kept | {Subtag(feature, value)}))

    def __len__(self) -> int:
        return len(self.subtags)

    def __str__(self) -> str:
        if not self.subtags:
            return "_"
        return "|".join(str(s) for s in sorted(self.subtags))

    def __repr__(self) -> str:
        return f"MorphTag({str(self)!r})"


@dataclass(frozen=True)
class Token:
    index: int
    form: str
    lemma: str
    pos: str
    tag: MorphTag
    head: int
    deplabel: str
    xpos: str = "_"
    deps: str = "_"
    misc: str = "_"

    def __post_init__(self):
        if self.index < 1:
            raise ValueError(f"token index must be >= 1, got {self.index}")
        if self.head == self.index:
            raise ValueError(f"token {self.index} is its own head")


@dataclass(frozen=True)
class DepSentence:
    tokens: tuple
    sentence_id: str = ""
    text: str | None = None
    comments: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))

    def __len__(self) -> int:
        return len(self.tokens)

    def __getitem__(self, position: int) -> Token:
        """1-based token access."""
        return self.tokens[position - 1]

    @property
    def root(self) -> int:
        return next(t.index for t in self.tokens if t.head == ROOT)

    def triples(self) -> list[tuple[int, int, str]]:
        """All (dependent, head, label) triples, the root attachment included."""
        return [(t.index, t.head, t.deplabel) for t in self.tokens]

    def edges(self) -> list[tuple[int, int, str]]:
        """Triples between two real positions (no ROOT attachment)."""
        return [(t.index, t.head, t.deplabel) for t in self.tokens if t.head != ROOT]

    def tags(self) -> tuple:
        return tuple(t.tag for t in self.tokens)

    def forms(self) -> tuple:
        return tuple(t.form for t in self.tokens)

    def with_tokens(self, tokens, sentence_id: str | None = None) -> "DepSentence":
        tokens = tuple(tokens)
        return replace(
            self,
            tokens=tokens,
            sentence_id=self.sentence_id if sentence_id is None else sentence_id,
            text=" ".join(t.form for t in tokens),
        )

    def validate(self) -> None:
        """Raise ConllUValidationError unless this is a single-rooted tree."""
        sid = self.sentence_id
        n = len(self.tokens)
        if n == 0:
            raise ConllUValidationError("no tokens", sid)
        if [t.index for t in self.tokens] != list(range(1, n + 1)):
            raise ConllUValidationError("token indices are not 1..n", sid)
        roots = [t.index for t in self.tokens if t.head == ROOT]
        if len(roots) != 1:
            raise ConllUValidationError(f"expected one root, found {len(roots)}", sid)
        for t in self.tokens:
            if not 0 <= t.head <= n:
                raise ConllUValidationError(f"token {t.index} has head {t.head} out of range", sid)
        # every walk to the root must terminate within n steps
        heads = {t.index: t.head for t in self.tokens}
        for start in heads:
            node, steps = start, 0
            while node != ROOT:
                node = heads[node]
                steps += 1
                if steps > n:
                    raise ConllUValidationError(f"cycle through token {start}", sid)


TagDomainTable = dict  # position -> tuple of candidate MorphTags, observed tag first


@dataclass(frozen=True)
class SubtagVocab:
    subtags: tuple

    def __post_init__(self):
        object.__setattr__(self, "subtags", tuple(self.subtags))
        if len(set(self.subtags)) != len(self.subtags):
            raise ValueError("duplicate subtags in vocabulary")
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.subtags)})

    @property
    def c(self) -> int:
        return len(self.subtags)

    def __len__(self) -> int:
        return len(self.subtags)

    def __contains__(self, subtag) -> bool:
        return subtag in self._index

    def index(self, subtag: Subtag) -> int:
        try:
            return self._index[subtag]
        except KeyError:
            raise UnknownSubtagError(subtag) from None

    def indices(self, feature: str) -> list[int]:
        return [i for i, s in enumerate(self.subtags) if s.feature == feature]


def build_subtag_vocab(sentences: Iterable[DepSentence]) -> SubtagVocab:
    seen = set()
    for sent in sentences:
        for tok in sent.tokens:
            seen.update(tok.tag.subtags)
    return SubtagVocab(tuple(sorted(seen)))


def multi_hot(tag: MorphTag, vocab: SubtagVocab, drop_unknown: bool = False) -> np.ndarray:
    vec = np.zeros(vocab.c)
    for s in tag.subtags:
        if s not in vocab:
            if drop_unknown:
                continue
            raise UnknownSubtagError(s)
        vec[vocab.index(s)] = 1.0
    return vec


def decode_multi_hot(vec, vocab: SubtagVocab) -> MorphTag:
    return MorphTag(frozenset(vocab.subtags[i] for i in np.flatnonzero(np.asarray(vec) > 0.5)))


def gender_tag_domains(sentence: DepSentence, gender_feature: str = "Gender",
                       values: tuple = ("Masc", "Fem")) -> TagDomainTable:
    """Candidate tags per position when only the gender subtag may change.

    Gendered positions get ``(original, swapped)``; everything else is a singleton.
    """
    a, b = values
    domains = {}
    for tok in sentence.tokens:
        g = tok.tag.get(gender_feature)
        if g in (a, b):
            domains[tok.index] = (tok.tag, tok.tag.with_value(gender_feature, b if g == a else a))
        else:
            domains[tok.index] = (tok.tag,)
    return domains


# ---------------------------------------------------------------------------
# CoNLL-U reading and writing


def _iter_lines(source) -> Iterator[str]:
    if isinstance(source, str):
        yield from source.splitlines()
    else:
        for line in source:
            yield line.rstrip("\r\n")


def _parse_token(cols: list[str], lineno: int) -> Token | None:
    tid = cols[0]
    if "-" in tid or "." in tid:
        return None  # multiword range or empty node
    try:
        index = int(tid)
        head = int(cols[6])
    except ValueError:
        raise ConllUParseError(f"non-integer ID or HEAD ({tid!r}, {cols[6]!r})", lineno) from None
    try:
        tag = MorphTag.from_string(cols[5])
    except ValueError as exc:
        raise ConllUParseError(f"bad FEATS {cols[5]!r}: {exc}", lineno) from None
    return Token(index=index, form=cols[1], lemma=cols[2], pos=cols[3], tag=tag,
                 head=head, deplabel=cols[7], xpos=cols[4], deps=cols[8], misc=cols[9])


def iter_conllu(source, strict: bool = False) -> Iterator[DepSentence]:
    """Stream sentences from CoNLL-U text or an iterable of lines.

    Sentences that fail tree validation raise in ``strict`` mode and are
    otherwise skipped with a warning.
    """
    tokens: list[Token] = []
    comments: list[str] = []
    self_loops: list[int] = []
    count = 0
    lineno = 0

    def finish():
        nonlocal count
        count += 1
        sid = text = None
        for c in comments:
            key, _, val = c[1:].partition("=")
            if key.strip() == "sent_id":
                sid = val.strip()
            elif key.strip() == "text":
                text = val.strip()
        sid = sid or f"s{count}"
        other = tuple(c for c in comments
                      if c[1:].partition("=")[0].strip() not in ("sent_id", "text"))
        sent = DepSentence(tuple(tokens), sid, text, other)
        try:
            if self_loops:
                raise ConllUValidationError(f"token {self_loops[0]} is its own head", sid)
            sent.validate()
        except ConllUValidationError as exc:
            if strict:
                raise
            log.warning("skipping invalid sentence: %s", exc)
            return None
        return sent

    for lineno, line in enumerate(_iter_lines(source), start=1):
        if not line.strip():
            if tokens:
                sent = finish()
                if sent is not None:
                    yield sent
            tokens, comments, self_loops = [], [], []
            continue
        if line.startswith("#"):
            comments.append(line)
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ConllUParseError(f"expected 10 tab-separated columns, found {len(cols)}", lineno)
        if cols[0].isdigit() and cols[0] == cols[6]:
            self_loops.append(int(cols[0]))
            continue
        try:
            tok = _parse_token(cols, lineno)
        except ValueError as exc:
            if isinstance(exc, ConllUParseError):
                raise
            raise ConllUParseError(str(exc), lineno) from None
        if tok is not None:
            tokens.append(tok)
    if tokens:
        sent = finish()
        if sent is not None:
            yield sent


def parse_conllu(source, strict: bool = False) -> list[DepSentence]:
    return list(iter_conllu(source, strict=strict))


def read_conllu(path, strict: bool = False) -> list[DepSentence]:
    with open(path, encoding="utf-8") as f:
        return list(iter_conllu(f, strict=strict))


def format_sentence(sent: DepSentence) -> str:
    lines = []
    if sent.sentence_id:
        lines.append(f"# sent_id = {sent.sentence_id}")
    if sent.text is not None:
        lines.append(f"# text = {sent.text}")
    lines.extend(sent.comments)
    for t in sent.tokens:
        lines.append("\t".join([str(t.index), t.form, t.lemma, t.pos, t.xpos, str(t.tag),
                                str(t.head), t.deplabel, t.deps, t.misc]))
    return "\n".join(lines) + "\n"


def serialize_conllu(sentences: Iterable[DepSentence]) -> str:
    return "".join(format_sentence(s) + "\n" for s in sentences)


def write_conllu(path, sentences: Iterable[DepSentence]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for s in sentences:
            f.write(format_sentence(s))
            f.write("\n")

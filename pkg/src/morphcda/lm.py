"""Additively smoothed n-gram language model."""

from __future__ import annotations

import math
from collections import Counter, defaultdict

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"


class NGramLM:
    """Order-k model with add-delta smoothing over a closed vocabulary.

    The vocabulary is the training words plus ``EOS`` and ``UNK``; ``BOS``
    only ever appears as context.
    """

    def __init__(self, order: int = 3, delta: float = 0.1, lowercase: bool = True):
        if order < 1:
            raise ValueError("order must be >= 1")
        if delta <= 0:
            raise ValueError("delta must be positive")
        self.order = order
        self.delta = delta
        self.lowercase = lowercase
        self.counts: dict[tuple, Counter] = defaultdict(Counter)
        self.totals: Counter = Counter()
        self.vocab: set = {EOS, UNK}

    def norm(self, token: str) -> str:
        return token.lower() if self.lowercase else token

    def _map(self, token: str) -> str:
        token = self.norm(token)
        return token if token in self.vocab else UNK

    def fit(self, corpus) -> "NGramLM":
        corpus = [[self.norm(t) for t in sent] for sent in corpus]
        if not corpus:
            raise ValueError("cannot train a language model on an empty corpus")
        for sent in corpus:
            self.vocab.update(sent)
        k = self.order - 1
        for sent in corpus:
            seq = [BOS] * k + sent + [EOS]
            for i in range(k, len(seq)):
                ctx = tuple(seq[i - k:i])
                self.counts[ctx][seq[i]] += 1
                self.totals[ctx] += 1
        return self

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def prob(self, word: str, context=()) -> float:
        k = self.order - 1
        ctx = tuple(self._map(t) if t != BOS else BOS for t in context)
        ctx = ((BOS,) * k + ctx)[len(ctx):] if k else ()
        w = word if word == EOS else self._map(word)
        seen = self.counts.get(ctx)
        count = seen[w] if seen else 0
        return (count + self.delta) / (self.totals[ctx] + self.delta * self.vocab_size)

    def logprob(self, word: str, context=()) -> float:
        return math.log(self.prob(word, context))

    def prefix_logprob(self, phrase) -> float:
        """log P(BOS phrase ...): summed conditionals of the phrase, no EOS term."""
        phrase = list(phrase)
        if not phrase:
            raise ValueError("phrase must be non-empty")
        return sum(self.logprob(w, phrase[:i]) for i, w in enumerate(phrase))

    def sentence_logprob(self, sentence) -> float:
        sentence = list(sentence)
        return self.prefix_logprob(sentence + [EOS]) if sentence else self.logprob(EOS)

    def perplexity(self, corpus) -> float:
        total, n = 0.0, 0
        for sent in corpus:
            total += self.sentence_logprob(sent)
            n += len(sent) + 1
        return math.exp(-total / n)

    def words(self) -> list:
        """Every predictable symbol (vocabulary including EOS and UNK)."""
        return sorted(self.vocab)


def train_ngram(corpus, order: int = 3, delta: float = 0.1, lowercase: bool = True) -> NGramLM:
    return NGramLM(order, delta, lowercase).fit(corpus)


def prefix_logprob(lm, phrase) -> float:
    return lm.prefix_logprob(phrase)


def tokenize(line: str) -> list:
    return line.split()

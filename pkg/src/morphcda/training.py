"""Maximum-likelihood training of the binary factors with Adam.

The gradient of the tree NLL with respect to an edge-key matrix ``A_k`` is
the expected minus observed outer product of the multi-hot encodings,
summed over edges carrying key ``k``; expectations come from the
sum-product edge marginals.  The neural parameterisation chains this
through ``A = exp(U . tanh(V x))``.

Losses are computed in nats and reported in bits.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .inference import FactorGraphInstance, sum_product
from .model import EdgeKey, LinearParams, NeuralParams, encode_domain, neural_W
from .treebank import ROOT, DepSentence, SubtagVocab, build_subtag_vocab

log = logging.getLogger(__name__)

LN2 = math.log(2.0)


class DataError(ValueError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 0.005
    weight_decay: float = 0.0001
    adam_betas: tuple = (0.9, 0.999)
    adam_epsilon: float = 1e-8
    stop_delta_bits: float = 1e-5
    max_epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    domain: str = "full"  # "full": every observed tag; "pos": tags observed with the token's POS

    def __post_init__(self):
        if self.learning_rate <= 0 or self.weight_decay < 0 or self.adam_epsilon <= 0:
            raise ValueError("learning rate and epsilon must be positive, weight decay >= 0")
        if self.stop_delta_bits <= 0:
            raise ValueError("stop_delta_bits must be positive")
        if self.batch_size < 1 or self.max_epochs < 0:
            raise ValueError("batch_size must be >= 1 and max_epochs >= 0")
        if self.domain not in ("full", "pos"):
            raise ValueError(f"unknown domain policy {self.domain!r}")


class TagSet:
    """The training tag inventory M with its multi-hot encodings."""

    def __init__(self, tags, vocab: SubtagVocab, by_pos: dict | None = None):
        self.tags = tuple(tags)
        self.vocab = vocab
        self.index = {t: i for i, t in enumerate(self.tags)}
        self.X = encode_domain(self.tags, vocab)
        self._full = np.arange(len(self.tags))
        self.by_pos = None
        if by_pos is not None:
            self.by_pos = {p: np.array(sorted(self.index[t] for t in ts)) for p, ts in by_pos.items()}

    @classmethod
    def from_sentences(cls, sentences, vocab: SubtagVocab, per_pos: bool = False) -> "TagSet":
        tags, by_pos = set(), {}
        for s in sentences:
            for t in s.tokens:
                tags.add(t.tag)
                by_pos.setdefault(t.pos, set()).add(t.tag)
        return cls(sorted(tags, key=str), vocab, by_pos if per_pos else None)

    def __len__(self) -> int:
        return len(self.tags)

    def domain(self, pos: str) -> np.ndarray:
        if self.by_pos is None:
            return self._full
        return self.by_pos.get(pos, self._full)

    def observed(self, sentence: DepSentence) -> list:
        idx = []
        for tok in sentence.tokens:
            i = self.index.get(tok.tag)
            if i is None:
                raise DataError(f"{sentence.sentence_id}: tag {tok.tag} at position {tok.index} "
                                "is outside the training tag set")
            idx.append(i)
        return idx


class _Tables:
    """Per-key |M| x |M| log-potential tables for fixed parameters."""

    def __init__(self, params, tagset: TagSet):
        self.params = params
        self.tagset = tagset
        self.cache = {}

    def matrix(self, key) -> np.ndarray:
        return self.params.potential_matrix(key)

    def __getitem__(self, key) -> np.ndarray:
        t = self.cache.get(key)
        if t is None:
            X = self.tagset.X
            t = self.cache[key] = X @ self.matrix(key) @ X.T
        return t


def _sentence_instance(sentence: DepSentence, tables: _Tables):
    ts = tables.tagset
    obs = ts.observed(sentence)
    doms, unary, parent, binary, keys = [], [], [], [], []
    for tok in sentence.tokens:
        d = ts.domain(tok.pos)
        local = np.flatnonzero(d == obs[tok.index - 1])
        if local.size == 0:
            raise DataError(f"{sentence.sentence_id}: tag {tok.tag} at position {tok.index} "
                            f"was never observed with POS {tok.pos}")
        doms.append(d)
    for tok in sentence.tokens:
        d = doms[tok.index - 1]
        unary.append(np.zeros(len(d)))
        if tok.head == ROOT:
            parent.append(-1)
            binary.append(None)
            keys.append(None)
        else:
            key = EdgeKey(tok.pos, sentence[tok.head].pos, tok.deplabel)
            parent.append(tok.head - 1)
            binary.append(tables[key][np.ix_(d, doms[tok.head - 1])])
            keys.append(key)
    inst = FactorGraphInstance(doms, unary, parent, binary, edge_keys=keys)
    local_obs = [int(np.flatnonzero(doms[v] == obs[v])[0]) for v in range(len(obs))]
    return inst, obs, local_obs


def _sentence_loss(inst, local_obs):
    result = sum_product(inst)
    score = sum(inst.log_binary[v][local_obs[v], local_obs[p]] for v, p in inst.edges)
    return result, result.log_z - score


def nll(sentence: DepSentence, params, tagset: TagSet, unit: str = "bits") -> float:
    """Negative log-likelihood of the sentence's observed tags (unary factors all 1)."""
    inst, _, local_obs = _sentence_instance(sentence, _Tables(params, tagset))
    _, nats = _sentence_loss(inst, local_obs)
    return nats / LN2 if unit == "bits" else nats


def _edge_feature_grads(batch, tables: _Tables):
    """Total NLL (nats) and per-key (expected - observed) c x c statistics."""
    ts = tables.tagset
    X = ts.X
    stats = {}
    total = 0.0
    for sentence in batch:
        inst, obs, local_obs = _sentence_instance(sentence, tables)
        result, nats = _sentence_loss(inst, local_obs)
        total += nats
        for v, p in inst.edges:
            key = inst.edge_keys[v]
            expected = X[inst.domains[v]].T @ result.edge_marginals[v] @ X[inst.domains[p]]
            g = expected - np.outer(X[obs[v]], X[obs[p]])
            if key in stats:
                stats[key] += g
            else:
                stats[key] = g
    return total, stats


def linear_loss_grad(batch, params: LinearParams, tagset: TagSet, weight_decay: float = 0.0):
    """(summed NLL in nats + L2 term, gradient dict) for the linear model."""
    total, stats = _edge_feature_grads(batch, _Tables(params, tagset))
    gW = np.zeros_like(params.weights)
    for key, g in stats.items():
        i = params.key_index.get(key)
        if i is not None:
            gW[i] += g
    gW += weight_decay * params.weights
    total += 0.5 * weight_decay * float(np.sum(params.weights ** 2))
    return total, {"W": gW}


def grad_linear(batch, params: LinearParams, tagset: TagSet, weight_decay: float = 0.0) -> dict:
    return linear_loss_grad(batch, params, tagset, weight_decay)[1]


def neural_loss_grad(batch, params: NeuralParams, tagset: TagSet, weight_decay: float = 0.0):
    total, stats = _edge_feature_grads(batch, _Tables(params, tagset))
    grads = {name: np.zeros_like(a) for name, a in params.arrays().items()}
    n2 = params.n2
    for key, G in stats.items():
        pi, pj, lab = params.lookup(key)
        x, h = params.hidden(key)
        dZ = G * neural_W(key, params)
        grads["U"] += dZ[:, :, None] * h[None, None, :]
        ds = np.einsum("abr,ab->r", params.U, dZ) * (1.0 - h * h)
        grads["V"] += np.outer(ds, x)
        dx = params.V.T @ ds
        grads["pos_embed"][pi] += dx[:n2]
        grads["pos_embed"][pj] += dx[n2:2 * n2]
        grads["label_embed"][lab] += dx[2 * n2:]
    for name, a in params.arrays().items():
        grads[name] += weight_decay * a
        total += 0.5 * weight_decay * float(np.sum(a ** 2))
    return total, grads


def grad_neural(batch, params: NeuralParams, tagset: TagSet, weight_decay: float = 0.0) -> dict:
    return neural_loss_grad(batch, params, tagset, weight_decay)[1]


def loss_grad(batch, params, tagset, weight_decay=0.0):
    if isinstance(params, LinearParams):
        return linear_loss_grad(batch, params, tagset, weight_decay)
    return neural_loss_grad(batch, params, tagset, weight_decay)


@dataclass
class TrainState:
    params: object
    config: TrainConfig
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0
    best_dev: float = math.inf
    history: list = field(default_factory=list)  # (epoch, train bits, dev bits)

    def __post_init__(self):
        for name, a in self.params.arrays().items():
            self.m.setdefault(name, np.zeros_like(a))
            self.v.setdefault(name, np.zeros_like(a))


def adam_step(state: TrainState, gradient: dict) -> TrainState:
    """One bias-corrected Adam update, applied in place to ``state.params``."""
    arrays = state.params.arrays()
    for name, g in gradient.items():
        if g.shape != arrays[name].shape:
            raise ValueError(f"gradient for {name} has shape {g.shape}, expected {arrays[name].shape}")
        if not np.all(np.isfinite(g)):
            bad = np.argwhere(~np.isfinite(g))[:5].tolist()
            raise FloatingPointError(f"non-finite gradient for {name} at step {state.step + 1}, "
                                     f"first entries {bad}")
    b1, b2 = state.config.adam_betas
    lr, eps = state.config.learning_rate, state.config.adam_epsilon
    state.step += 1
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name, g in gradient.items():
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        arrays[name] -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return state


def init_params(sentences, kind: str = "linear", vocab=None, seed: int = 0, n1: int = 9, n2: int = 3):
    vocab = vocab or build_subtag_vocab(sentences)
    if kind == "linear":
        keys = sorted({EdgeKey(t.pos, s[t.head].pos, t.deplabel)
                       for s in sentences for t in s.tokens if t.head != ROOT})
        return LinearParams.zeros(vocab, keys)
    if kind == "neural":
        pos = {t.pos for s in sentences for t in s.tokens}
        labels = {t.deplabel for s in sentences for t in s.tokens}
        return NeuralParams.init(vocab, pos, labels, n1=n1, n2=n2, rng=seed)
    raise ValueError(f"unknown parameterization {kind!r}")


def _usable(sentences, tagset, name):
    kept = []
    for s in sentences:
        try:
            idx = tagset.observed(s)
        except DataError:
            continue
        if tagset.by_pos is not None and any(
                i not in tagset.domain(t.pos) for i, t in zip(idx, s.tokens)):
            continue
        kept.append(s)
    if len(kept) < len(sentences):
        log.warning("%s: dropped %d sentences with tags unseen in training",
                    name, len(sentences) - len(kept))
    return kept


def mean_nll_bits(sentences, params, tagset) -> float:
    if not sentences:
        return float("nan")
    tables = _Tables(params, tagset)
    total = 0.0
    for s in sentences:
        inst, _, local_obs = _sentence_instance(s, tables)
        total += _sentence_loss(inst, local_obs)[1]
    return total / len(sentences) / LN2


def train(train_set, dev_set, config: TrainConfig | None = None, parameterization: str = "linear",
          callback=None):
    """Fit the binary factors; return ``(params, tagset, history)``.

    Training stops once the mean dev loss changes by less than
    ``config.stop_delta_bits`` between consecutive epochs, or after
    ``config.max_epochs``.
    """
    config = config or TrainConfig()
    train_set = list(train_set)
    if not train_set:
        raise DataError("empty training set")
    vocab = build_subtag_vocab(train_set)
    tagset = TagSet.from_sentences(train_set, vocab, per_pos=config.domain == "pos")
    params = init_params(train_set, parameterization, vocab, seed=config.seed)
    dev_set = _usable(list(dev_set or []), tagset, "dev set") or train_set
    state = TrainState(params, config)
    rng = np.random.default_rng(config.seed)
    previous = None
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train_set))
        running = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = [train_set[i] for i in order[start:start + config.batch_size]]
            loss, grads = loss_grad(batch, params, tagset, config.weight_decay)
            if not math.isfinite(loss):
                raise FloatingPointError(f"non-finite training loss in epoch {epoch}")
            running += loss
            adam_step(state, grads)
        train_bits = running / len(train_set) / LN2
        dev_bits = mean_nll_bits(dev_set, params, tagset)
        if not math.isfinite(dev_bits):
            raise FloatingPointError(f"non-finite dev loss in epoch {epoch}")
        state.history.append((epoch, train_bits, dev_bits))
        state.best_dev = min(state.best_dev, dev_bits)
        log.info("epoch %d: train %.6f bits, dev %.6f bits", epoch, train_bits, dev_bits)
        if callback is not None:
            callback(epoch, train_bits, dev_bits)
        if previous is not None and abs(dev_bits - previous) < config.stop_delta_bits:
            break
        previous = dev_bits
    return params, tagset, state.history

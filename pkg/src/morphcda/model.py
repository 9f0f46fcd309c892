"""Factors of the agreement MRF.

Every binary factor has the form ``psi(m_i, m_j) = exp(mh_i^T A mh_j)`` where
``mh`` is the multi-hot encoding of a tag and ``A`` is a ``c x c`` matrix
chosen by the edge key (child POS, head POS, label):

* linear:   ``A = W[key]``
* neural:   ``A = exp(U . tanh(V [e(p_i); e(p_j); e(l)]))``
* baseline: ``A`` is ``weight`` on the diagonal of agreement features for
  activated keys and zero elsewhere.

Factor tables are built in log space (``log_psi_table``) so that inference
never exponentiates.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .treebank import MorphTag, Subtag, SubtagVocab, multi_hot

UNK = "<unk>"
FORMAT_VERSION = 1
MAGIC = b"MORPHCDA-PARAMS\n"


class EdgeKey(NamedTuple):
    child_pos: str
    head_pos: str
    label: str


class ParamsFormatError(ValueError):
    pass


def encode_domain(tags, vocab: SubtagVocab, drop_unknown: bool = False) -> np.ndarray:
    """Stack multi-hot encodings of ``tags`` into a ``len(tags) x c`` matrix."""
    if not tags:
        return np.zeros((0, vocab.c))
    return np.stack([multi_hot(t, vocab, drop_unknown) for t in tags])


@dataclass
class LinearParams:
    vocab: SubtagVocab
    keys: tuple
    weights: np.ndarray  # (len(keys), c, c)
    key_index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.keys = tuple(EdgeKey(*k) for k in self.keys)
        self.weights = np.asarray(self.weights, dtype=float)
        c = self.vocab.c
        if self.weights.shape != (len(self.keys), c, c):
            raise ValueError(f"weights shape {self.weights.shape} != {(len(self.keys), c, c)}")
        self.key_index = {k: i for i, k in enumerate(self.keys)}

    @classmethod
    def zeros(cls, vocab: SubtagVocab, keys) -> "LinearParams":
        keys = tuple(keys)
        return cls(vocab, keys, np.zeros((len(keys), vocab.c, vocab.c)))

    def matrix(self, key) -> np.ndarray:
        """W for ``key``; unseen keys score with the zero matrix."""
        i = self.key_index.get(EdgeKey(*key))
        if i is None:
            return np.zeros((self.vocab.c, self.vocab.c))
        return self.weights[i]

    potential_matrix = matrix

    def log_psi_table(self, child_tags, head_tags, key, drop_unknown=False) -> np.ndarray:
        xi = encode_domain(child_tags, self.vocab, drop_unknown)
        xj = encode_domain(head_tags, self.vocab, drop_unknown)
        return xi @ self.matrix(key) @ xj.T

    def arrays(self) -> dict:
        return {"W": self.weights}


@dataclass
class NeuralParams:
    vocab: SubtagVocab
    U: np.ndarray  # (c, c, n1)
    V: np.ndarray  # (n1, 3 * n2)
    pos_vocab: tuple  # index 0 is the shared unknown entry
    label_vocab: tuple
    pos_embed: np.ndarray  # (len(pos_vocab), n2)
    label_embed: np.ndarray  # (len(label_vocab), n2)

    def __post_init__(self):
        self.pos_vocab = tuple(self.pos_vocab)
        self.label_vocab = tuple(self.label_vocab)
        c = self.vocab.c
        n1, n2 = self.n1, self.n2
        if self.U.shape != (c, c, n1):
            raise ValueError(f"U has shape {self.U.shape}, expected {(c, c, n1)}")
        if self.V.shape != (n1, 3 * n2):
            raise ValueError(f"V has shape {self.V.shape}, expected {(n1, 3 * n2)}")
        if self.pos_embed.shape != (len(self.pos_vocab), n2):
            raise ValueError("pos_embed does not match pos_vocab / n2")
        if self.label_embed.shape != (len(self.label_vocab), n2):
            raise ValueError("label_embed does not match label_vocab / n2")
        if self.pos_vocab[:1] != (UNK,) or self.label_vocab[:1] != (UNK,):
            raise ValueError("embedding vocabularies must start with the unknown entry")
        self._pos_index = {p: i for i, p in enumerate(self.pos_vocab)}
        self._label_index = {p: i for i, p in enumerate(self.label_vocab)}

    @property
    def n1(self) -> int:
        return self.U.shape[2]

    @property
    def n2(self) -> int:
        return self.pos_embed.shape[1]

    @classmethod
    def init(cls, vocab, pos_tags, labels, n1=9, n2=3, rng=None, scale=0.1) -> "NeuralParams":
        rng = np.random.default_rng(rng)
        pos_vocab = (UNK,) + tuple(sorted(set(pos_tags) - {UNK}))
        label_vocab = (UNK,) + tuple(sorted(set(labels) - {UNK}))
        c = vocab.c

        def u(*shape):
            return rng.uniform(-scale, scale, size=shape)

        return cls(vocab, u(c, c, n1), u(n1, 3 * n2), pos_vocab, label_vocab,
                   u(len(pos_vocab), n2), u(len(label_vocab), n2))

    def lookup(self, key) -> tuple[int, int, int]:
        key = EdgeKey(*key)
        return (self._pos_index.get(key.child_pos, 0),
                self._pos_index.get(key.head_pos, 0),
                self._label_index.get(key.label, 0))

    def hidden(self, key) -> tuple[np.ndarray, np.ndarray]:
        """Return the embedding input ``x`` and hidden activation ``tanh(V x)``."""
        pi, pj, l = self.lookup(key)
        x = np.concatenate([self.pos_embed[pi], self.pos_embed[pj], self.label_embed[l]])
        return x, np.tanh(self.V @ x)

    def potential_matrix(self, key) -> np.ndarray:
        return neural_W(key, self)

    def log_psi_table(self, child_tags, head_tags, key, drop_unknown=False) -> np.ndarray:
        xi = encode_domain(child_tags, self.vocab, drop_unknown)
        xj = encode_domain(head_tags, self.vocab, drop_unknown)
        return xi @ neural_W(key, self) @ xj.T

    def arrays(self) -> dict:
        return {"U": self.U, "V": self.V, "pos_embed": self.pos_embed,
                "label_embed": self.label_embed}


def neural_W(key, params: NeuralParams) -> np.ndarray:
    _, h = params.hidden(key)
    with np.errstate(over="raise"):
        try:
            return np.exp(params.U @ h)
        except FloatingPointError:
            raise OverflowError(f"neural W overflowed for edge key {tuple(key)}") from None


def psi_linear(m_i: MorphTag, m_j: MorphTag, key, params: LinearParams) -> float:
    xi = multi_hot(m_i, params.vocab)
    xj = multi_hot(m_j, params.vocab)
    return math.exp(xi @ params.matrix(key) @ xj)


def psi_neural(m_i: MorphTag, m_j: MorphTag, key, params: NeuralParams) -> float:
    xi = multi_hot(m_i, params.vocab)
    xj = multi_hot(m_j, params.vocab)
    return math.exp(xi @ neural_W(key, params) @ xj)


@dataclass(frozen=True)
class BaselineRules:
    """Hand-written agreement factor.

    A key matches a pattern ``(child_pos, head_pos, label)`` when every field
    is equal or the pattern field is ``*``.  Matching edges score
    ``exp(weight * #shared agreement subtags)``; all other edges score 1.
    """

    activated: frozenset
    features: tuple = ("Gender", "Number")
    weight: float = 1.0

    def matches(self, key) -> bool:
        key = EdgeKey(*key)
        for cp, hp, lab in self.activated:
            if cp in ("*", key.child_pos) and hp in ("*", key.head_pos) and lab in ("*", key.label):
                return True
        return False

    def agreement(self, m_i: MorphTag, m_j: MorphTag) -> int:
        return sum(1 for s in m_i.subtags if s.feature in self.features and s in m_j.subtags)

    def log_psi_table(self, child_tags, head_tags, key, drop_unknown=False) -> np.ndarray:
        table = np.zeros((len(child_tags), len(head_tags)))
        if self.matches(key):
            for a, mi in enumerate(child_tags):
                for b, mj in enumerate(head_tags):
                    table[a, b] = self.weight * self.agreement(mi, mj)
        return table

    @classmethod
    def parse(cls, text: str, **kwargs) -> "BaselineRules":
        patterns = set()
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) == 2:
                parts.append("*")
            if len(parts) != 3:
                raise ValueError(f"baseline rules line {lineno}: expected 'CHILD HEAD [LABEL]'")
            patterns.add(tuple(parts))
        return cls(frozenset(patterns), **kwargs)

    @classmethod
    def load(cls, path, **kwargs) -> "BaselineRules":
        with open(path, encoding="utf-8") as f:
            return cls.parse(f.read(), **kwargs)


def psi_baseline(m_i: MorphTag, m_j: MorphTag, key, rules: BaselineRules, vocab=None) -> float:
    if not rules.matches(key):
        return 1.0
    return math.exp(rules.weight * rules.agreement(m_i, m_j))


# ---------------------------------------------------------------------------
# unary factors


@dataclass(frozen=True)
class Free:
    pass


@dataclass(frozen=True)
class Prefer:
    tag: MorphTag
    alpha: float = math.e

    def __post_init__(self):
        if not self.alpha > 1:
            raise ValueError(f"alpha must be > 1, got {self.alpha}")


@dataclass(frozen=True)
class Clamp:
    tag: MorphTag


FREE = Free()
UnaryConstraints = dict  # position -> Free | Prefer | Clamp; missing positions are Free


def log_phi(m: MorphTag, constraint) -> float:
    if isinstance(constraint, Prefer):
        return math.log(constraint.alpha) if m == constraint.tag else 0.0
    if isinstance(constraint, Clamp):
        return 0.0 if m == constraint.tag else -math.inf
    return 0.0


def phi(m: MorphTag, position: int, constraints: UnaryConstraints) -> float:
    return math.exp(log_phi(m, constraints.get(position, FREE)))


# ---------------------------------------------------------------------------
# persistence


def _vocab_json(vocab: SubtagVocab) -> list:
    return [[s.feature, s.value] for s in vocab.subtags]


def save_params(params, fh) -> None:
    """Write ``params`` to a binary file handle (versioned header + float64 payload)."""
    if isinstance(params, LinearParams):
        meta = {"kind": "linear", "keys": [list(k) for k in params.keys]}
    elif isinstance(params, NeuralParams):
        meta = {"kind": "neural", "pos_vocab": list(params.pos_vocab),
                "label_vocab": list(params.label_vocab)}
    else:
        raise TypeError(f"cannot save {type(params).__name__}")
    arrays = params.arrays()
    payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays.values())
    meta.update({
        "version": FORMAT_VERSION,
        "vocab": _vocab_json(params.vocab),
        "arrays": [[name, list(a.shape)] for name, a in arrays.items()],
        "payload_bytes": len(payload),
        "sha256": hashlib.sha256(payload).hexdigest(),
    })
    fh.write(MAGIC)
    fh.write(json.dumps(meta, sort_keys=True).encode("utf-8") + b"\n")
    fh.write(payload)


def load_params(fh):
    if fh.read(len(MAGIC)) != MAGIC:
        raise ParamsFormatError("not a parameter file (bad magic)")
    header = fh.readline()
    try:
        meta = json.loads(header)
    except ValueError:
        raise ParamsFormatError("corrupt header") from None
    if meta.get("version") != FORMAT_VERSION:
        raise ParamsFormatError(
            f"parameter file version {meta.get('version')} != supported {FORMAT_VERSION}")
    payload = fh.read()
    if len(payload) != meta["payload_bytes"]:
        raise ParamsFormatError(
            f"truncated payload: {len(payload)} of {meta['payload_bytes']} bytes")
    if hashlib.sha256(payload).hexdigest() != meta["sha256"]:
        raise ParamsFormatError("payload checksum mismatch")
    arrays, offset = {}, 0
    for name, shape in meta["arrays"]:
        size = int(np.prod(shape)) * 8
        arrays[name] = np.frombuffer(payload[offset:offset + size], dtype="<f8").reshape(shape).copy()
        offset += size
    vocab = SubtagVocab(tuple(Subtag(f, v) for f, v in meta["vocab"]))
    if meta["kind"] == "linear":
        return LinearParams(vocab, tuple(EdgeKey(*k) for k in meta["keys"]), arrays["W"])
    if meta["kind"] == "neural":
        return NeuralParams(vocab, arrays["U"], arrays["V"], tuple(meta["pos_vocab"]),
                            tuple(meta["label_vocab"]), arrays["pos_embed"], arrays["label_embed"])
    raise ParamsFormatError(f"unknown parameter kind {meta['kind']!r}")


def dumps_params(params) -> bytes:
    buf = io.BytesIO()
    save_params(params, buf)
    return buf.getvalue()


def loads_params(data: bytes):
    return load_params(io.BytesIO(data))


def save_params_file(params, path) -> None:
    data = dumps_params(params)
    with open(path, "wb") as f:
        f.write(data)


def load_params_file(path):
    with open(path, "rb") as f:
        return load_params(f)

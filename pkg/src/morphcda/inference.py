"""Exact inference on tree-shaped factor graphs.

All arithmetic is in log space.  Upward messages are max-normalised and the
removed constants are accumulated into ``log_z``.  The unary factor sends
``log phi`` to its variable (it has no other neighbour), so a variable's
belief is its unary plus the messages from its binary factors.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .model import FREE, Clamp, EdgeKey, log_phi
from .treebank import ROOT, DepSentence


class InconsistentConstraintsError(ValueError):
    """Every assignment has zero probability."""


class ConstraintError(ValueError):
    """A clamped tag is not in its variable's domain."""


def logsumexp(a: np.ndarray, axis=None) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    m = a.max(axis=axis, keepdims=True)
    if not np.isfinite(m).all():
        m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.exp(a - m).sum(axis=axis, keepdims=True)) + m
    return out.squeeze(axis=axis) if axis is not None else out.reshape(())[()]


@dataclass
class FactorGraphInstance:
    """A forest of variables with one unary table each and one pairwise table per edge.

    ``parent[v]`` is the parent variable of ``v`` or -1; ``log_binary[v]`` is
    the ``|D_v| x |D_parent|`` log-potential table of the edge from ``v`` to
    its parent (``None`` for roots).
    """

    domains: list
    log_unary: list
    parent: list
    log_binary: list
    positions: list | None = None
    edge_keys: list | None = None

    def __post_init__(self):
        n = len(self.domains)
        if self.positions is None:
            self.positions = list(range(1, n + 1))
        if not (len(self.log_unary) == len(self.parent) == len(self.log_binary) == n):
            raise ValueError("domains, log_unary, parent and log_binary must have equal length")
        self.log_unary = [np.asarray(u, dtype=float) for u in self.log_unary]
        self.log_binary = [None if b is None else np.asarray(b, dtype=float) for b in self.log_binary]
        for v in range(n):
            size = len(self.domains[v])
            if size == 0:
                raise ValueError(f"variable {v} has an empty domain")
            if self.log_unary[v].shape != (size,):
                raise ValueError(f"unary table of variable {v} has the wrong shape")
            p = self.parent[v]
            if p == -1:
                if self.log_binary[v] is not None:
                    raise ValueError(f"root variable {v} has a binary table")
                continue
            if not 0 <= p < n or p == v:
                raise ValueError(f"variable {v} has invalid parent {p}")
            if self.log_binary[v].shape != (size, len(self.domains[p])):
                raise ValueError(f"binary table of edge {v}->{p} has the wrong shape")
        for table in self.log_unary + [b for b in self.log_binary if b is not None]:
            if np.isnan(table).any() or np.isposinf(table).any():
                raise ValueError("factor tables must be finite or -inf (zero potential)")
        self.children = [[] for _ in range(n)]
        for v, p in enumerate(self.parent):
            if p >= 0:
                self.children[p].append(v)
        self.order = self._preorder()

    def _preorder(self) -> list:
        order = []
        for r in (v for v, p in enumerate(self.parent) if p == -1):
            stack = [r]
            while stack:
                v = stack.pop()
                order.append(v)
                stack.extend(reversed(self.children[v]))
        if len(order) != len(self.domains):
            raise ValueError("parent structure contains a cycle")
        return order

    @property
    def n(self) -> int:
        return len(self.domains)

    @property
    def edges(self) -> list:
        """(child, parent) variable pairs, one per binary factor."""
        return [(v, p) for v, p in enumerate(self.parent) if p >= 0]

    def assignment_space(self) -> int:
        return math.prod(len(d) for d in self.domains)


@dataclass
class InferenceResult:
    log_z: float
    node_marginals: list
    edge_marginals: dict  # child variable -> (|D_child| x |D_parent|) joint
    argmax: list | None = None


def build_instance(sentence: DepSentence, domains, params, constraints=None,
                   drop_unknown: bool = False) -> FactorGraphInstance:
    """Factor graph of ``sentence`` restricted to ``domains`` (position -> tags).

    ``params`` is anything with ``log_psi_table(child_tags, head_tags, key)``.
    """
    constraints = constraints or {}
    doms, unary, parent, binary, keys = [], [], [], [], []
    for tok in sentence.tokens:
        dom = tuple(domains[tok.index])
        c = constraints.get(tok.index, FREE)
        if isinstance(c, Clamp) and c.tag not in dom:
            raise ConstraintError(f"clamped tag {c.tag} not in the domain of position {tok.index}")
        doms.append(dom)
        unary.append(np.array([log_phi(m, c) for m in dom]))
    table_cache = {}
    for tok in sentence.tokens:
        if tok.head == ROOT:
            parent.append(-1)
            binary.append(None)
            keys.append(None)
            continue
        head = sentence[tok.head]
        key = EdgeKey(tok.pos, head.pos, tok.deplabel)
        cache_key = (key, doms[tok.index - 1], doms[tok.head - 1])
        if cache_key not in table_cache:
            table_cache[cache_key] = params.log_psi_table(
                doms[tok.index - 1], doms[tok.head - 1], key, drop_unknown=drop_unknown)
        parent.append(tok.head - 1)
        binary.append(table_cache[cache_key])
        keys.append(key)
    return FactorGraphInstance(doms, unary, parent, binary,
                               positions=[t.index for t in sentence.tokens], edge_keys=keys)


def _normalise(msg: np.ndarray, where: str) -> tuple[np.ndarray, float]:
    top = msg.max()
    if top == -math.inf:
        raise InconsistentConstraintsError(f"all-zero message {where}")
    return msg - top, float(top)


def sum_product(inst: FactorGraphInstance) -> InferenceResult:
    n = inst.n
    up = [None] * n
    belief_up = [None] * n
    log_z = 0.0
    for v in reversed(inst.order):
        b = inst.log_unary[v].copy()
        for ch in inst.children[v]:
            b += up[ch]
        belief_up[v] = b
        if inst.parent[v] >= 0:
            up[v], shift = _normalise(logsumexp(inst.log_binary[v] + b[:, None], axis=0),
                                      f"from variable {v}")
            log_z += shift
        else:
            root_z = logsumexp(b)
            if root_z == -math.inf:
                raise InconsistentConstraintsError(f"all-zero belief at root variable {v}")
            log_z += float(root_z)

    down = [None] * n
    cavity = [None] * n  # cavity[c]: parent's belief excluding c's message
    for v in inst.order:
        if inst.parent[v] == -1:
            down[v] = np.zeros(len(inst.domains[v]))
        kids = inst.children[v]
        if not kids:
            continue
        base = inst.log_unary[v] + down[v]
        # prefix/suffix sums avoid subtracting messages that may be -inf
        prefix = [np.zeros_like(base)]
        for ch in kids:
            prefix.append(prefix[-1] + up[ch])
        suffix = np.zeros_like(base)
        for k in range(len(kids) - 1, -1, -1):
            ch = kids[k]
            cav = base + prefix[k] + suffix
            cavity[ch] = cav
            down[ch], _ = _normalise(logsumexp(inst.log_binary[ch] + cav[None, :], axis=1),
                                     f"to variable {ch}")
            suffix = suffix + up[ch]

    node_marginals = []
    for v in range(n):
        b = belief_up[v] + down[v]
        node_marginals.append(np.exp(b - logsumexp(b)))
    edge_marginals = {}
    for v, p in inst.edges:
        joint = inst.log_binary[v] + belief_up[v][:, None] + cavity[v][None, :]
        edge_marginals[v] = np.exp(joint - logsumexp(joint))
    return InferenceResult(log_z, node_marginals, edge_marginals)


def max_product(inst: FactorGraphInstance) -> list:
    """Highest-scoring assignment as domain indices; ties go to the lowest index."""
    n = inst.n
    up = [None] * n
    back = [None] * n
    assignment = [0] * n
    for v in reversed(inst.order):
        b = inst.log_unary[v].copy()
        for ch in inst.children[v]:
            b += up[ch]
        p = inst.parent[v]
        if p >= 0:
            scores = inst.log_binary[v] + b[:, None]
            back[v] = np.argmax(scores, axis=0)
            up[v] = scores[back[v], np.arange(scores.shape[1])]
        else:
            best = int(np.argmax(b))
            if b[best] == -math.inf:
                raise InconsistentConstraintsError(f"all-zero max-belief at root variable {v}")
            assignment[v] = best
    for v in inst.order:
        p = inst.parent[v]
        if p >= 0:
            assignment[v] = int(back[v][assignment[p]])
    return assignment


def assignment_log_score(inst: FactorGraphInstance, assignment) -> float:
    total = sum(inst.log_unary[v][assignment[v]] for v in range(inst.n))
    for v, p in inst.edges:
        total += inst.log_binary[v][assignment[v], assignment[p]]
    return float(total)


def decode(inst: FactorGraphInstance, assignment) -> dict:
    """Map positions to the chosen domain entries."""
    return {pos: inst.domains[v][assignment[v]] for v, pos in enumerate(inst.positions)}


def brute_force(inst: FactorGraphInstance, limit: int = 10**6) -> InferenceResult:
    """Exhaustive enumeration of the joint table; the test oracle for BP."""
    size = inst.assignment_space()
    if size > limit:
        raise ValueError(f"assignment space {size} exceeds the enumeration limit {limit}")
    n = inst.n
    shape = [len(d) for d in inst.domains]
    joint = np.zeros(shape)
    for v in range(n):
        view = [1] * n
        view[v] = shape[v]
        joint = joint + inst.log_unary[v].reshape(view)
    for v, p in inst.edges:
        view = [1] * n
        view[v], view[p] = shape[v], shape[p]
        table = inst.log_binary[v] if v < p else inst.log_binary[v].T
        joint = joint + table.reshape(view)
    log_z = float(logsumexp(joint))
    if log_z == -math.inf:
        raise InconsistentConstraintsError("every assignment has zero potential")
    prob = np.exp(joint - log_z)
    axes = set(range(n))
    node_marginals = [prob.sum(axis=tuple(axes - {v})) for v in range(n)]
    edge_marginals = {}
    for v, p in inst.edges:
        m = prob.sum(axis=tuple(axes - {v, p}))
        edge_marginals[v] = m if v < p else m.T
    # lexicographic minimum in pre-order matches max_product's tie-breaking
    ordered = np.transpose(joint, inst.order)
    flat = int(np.argmax(ordered))
    idx = np.unravel_index(flat, ordered.shape)
    argmax = [0] * n
    for axis, v in enumerate(inst.order):
        argmax[v] = int(idx[axis])
    return InferenceResult(log_z, node_marginals, edge_marginals, argmax)


def enumerate_assignments(inst: FactorGraphInstance):
    return itertools.product(*(range(len(d)) for d in inst.domains))


def dump_result(inst: FactorGraphInstance, result: InferenceResult) -> str:
    """JSON debug view of marginals keyed by sentence position."""
    out = {"log_z": result.log_z, "nodes": {}}
    for v, pos in enumerate(inst.positions):
        out["nodes"][str(pos)] = {
            str(tag): round(float(p), 12) for tag, p in zip(inst.domains[v], result.node_marginals[v])}
    if result.argmax is not None:
        out["argmax"] = {str(pos): str(inst.domains[v][result.argmax[v]])
                         for v, pos in enumerate(inst.positions)}
    return json.dumps(out, indent=2, ensure_ascii=False)

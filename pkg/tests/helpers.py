"""Shared fixtures and independent oracles for the test-suite."""

import itertools
import math

import numpy as np

from morphcda.inference import FactorGraphInstance
from morphcda.treebank import parse_conllu

FIG2 = """\
# sent_id = fig2
# text = El ingeniero alemán es muy experto
1\tEl\tel\tDET\t_\tGender=Masc|Number=Sing\t2\tdet\t_\t_
2\tingeniero\tingeniero\tNOUN\t_\tGender=Masc|Number=Sing\t0\troot\t_\t_
3\talemán\talemán\tADJ\t_\tGender=Masc|Number=Sing\t2\tamod\t_\t_
4\tes\tser\tVERB\t_\tNumber=Sing\t2\tcop\t_\t_
5\tmuy\tmuy\tADV\t_\t_\t6\tadvmod\t_\t_
6\texperto\texperto\tADJ\t_\tGender=Masc|Number=Sing\t2\tamod\t_\t_

"""

FIG1 = """\
# sent_id = fig1
# text = Los ingenieros son expertos
1\tLos\tel\tDET\t_\tDefinite=Def|Gender=Masc|Number=Plur|PronType=Art\t2\tdet\t_\t_
2\tingenieros\tingeniero\tNOUN\t_\tGender=Masc|Number=Plur\t4\tnsubj\t_\t_
3\tson\tser\tVERB\t_\tMood=Ind|Number=Plur|Person=3|Tense=Pres|VerbForm=Fin\t4\tcop\t_\t_
4\texpertos\texperto\tADJ\t_\tGender=Masc|Number=Plur\t0\troot\t_\t_

"""

# one "PASS/FAIL/SKIP criterion: detail" line per acceptance criterion, printed at session end
ACCEPTANCE = []


def fig2():
    return parse_conllu(FIG2)[0]


def fig1():
    return parse_conllu(FIG1)[0]


def random_instance(rng, max_n=7, max_dom=4, clamp_rate=0.2, prefer_rate=0.3, forest=False):
    """A random tree-shaped factor graph with positive factors and some clamps."""
    n = int(rng.integers(1, max_n + 1))
    perm = rng.permutation(n)
    parent = [-1] * n
    for k in range(1, n):
        if forest and rng.random() < 0.15:
            continue
        parent[perm[k]] = int(perm[rng.integers(0, k)])
    sizes = [int(rng.integers(1, max_dom + 1)) for _ in range(n)]
    domains = [tuple(range(s)) for s in sizes]
    unary, binary = [], []
    for v in range(n):
        u = rng.normal(0, 1, sizes[v])
        r = rng.random()
        if r < clamp_rate:
            keep = int(rng.integers(sizes[v]))
            u = np.full(sizes[v], -np.inf)
            u[keep] = 0.0
        elif r < clamp_rate + prefer_rate:
            u = np.zeros(sizes[v])
            u[int(rng.integers(sizes[v]))] = 1.0
        unary.append(u)
        binary.append(None if parent[v] < 0 else rng.normal(0, 1.5, (sizes[v], sizes[parent[v]])))
    return FactorGraphInstance(domains, unary, parent, binary)


def loop_log_z(inst):
    """log Z by explicit iteration over every assignment (no numpy broadcasting)."""
    scores = []
    for a in itertools.product(*(range(len(d)) for d in inst.domains)):
        s = 0.0
        for v in range(inst.n):
            s += inst.log_unary[v][a[v]]
        for v, p in inst.edges:
            s += inst.log_binary[v][a[v], a[p]]
        scores.append(s)
    top = max(scores)
    if top == -math.inf:
        return top
    return top + math.log(sum(math.exp(s - top) for s in scores))


def uniform_bits(sentence, m):
    return len(sentence.tokens) * math.log2(m)


def fd_gradient_errors(params, batch, tagset, weight_decay, coords, h=1e-5):
    """(analytic, central-difference) gradient pairs at ``coords``.

    ``coords`` is a list of (array name, index tuple); the objective is the
    batch loss including the weight-decay term.
    """
    from morphcda.training import loss_grad

    _, grads = loss_grad(batch, params, tagset, weight_decay)
    arrays = params.arrays()
    out = []
    for name, idx in coords:
        a = arrays[name]
        old = a[idx]
        a[idx] = old + h
        up = loss_grad(batch, params, tagset, weight_decay)[0]
        a[idx] = old - h
        down = loss_grad(batch, params, tagset, weight_decay)[0]
        a[idx] = old
        out.append((float(grads[name][idx]), (up - down) / (2 * h)))
    return out


def within(pairs, rtol, atol=1e-7):
    """Every (analytic, numeric) pair agrees to ``rtol`` relative, with an absolute noise floor."""
    bad = [(a, f) for a, f in pairs if abs(a - f) > rtol * max(abs(a), abs(f)) + atol]
    return not bad, bad


def gradient_cases(kind, count, seed=0):
    """``count`` random (one-sentence batch, params, tagset) triples from the synthetic language."""
    from morphcda.synthetic import SyntheticLanguage
    from morphcda.training import TagSet, init_params
    from morphcda.treebank import build_subtag_vocab

    rng = np.random.default_rng(seed)
    corpus = SyntheticLanguage(seed=seed).corpus(60)
    vocab = build_subtag_vocab(corpus)
    tagset = TagSet.from_sentences(corpus, vocab)
    cases = []
    for k in range(count):
        params = init_params(corpus, kind, vocab, seed=int(rng.integers(1 << 30)))
        for a in params.arrays().values():
            a[...] = rng.normal(0, 0.5 if kind == "linear" else 0.3, a.shape)
        sent = corpus[int(rng.integers(len(corpus)))]
        cases.append(([sent], params, tagset, rng))
    return cases


def gradient_coords(params, batch, rng, n_random=40):
    """Coordinates worth checking: every W / V / embedding entry touched by the batch, plus random ones."""
    from morphcda.model import EdgeKey, LinearParams

    coords = []
    arrays = params.arrays()
    if isinstance(params, LinearParams):
        keys = {EdgeKey(t.pos, s[t.head].pos, t.deplabel) for s in batch for t in s.tokens if t.head}
        c = params.vocab.c
        for key in sorted(keys):
            i = params.key_index[key]
            for a in range(c):
                for b in range(c):
                    coords.append(("W", (i, a, b)))
    else:
        for name in ("V", "pos_embed", "label_embed"):
            coords += [(name, idx) for idx in np.ndindex(arrays[name].shape)]
    for _ in range(n_random):
        name = list(arrays)[int(rng.integers(len(arrays)))]
        coords.append((name, tuple(int(rng.integers(s)) for s in arrays[name].shape)))
    return coords

"""``morphcda`` command line: train, intervene, augment and evaluate.

Exit codes: 0 on success, 1 on data errors, 2 on configuration errors.
Configuration and inputs are validated before any output file is written.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, load_run_config
from .evaluation import (IntrinsicScore, bias_report, group_stereotype, intrinsic_score,
                         intrinsic_table, make_queries, read_queries, stereotyped_words,
                         FixedLogProbs)
from .lm import train_ngram, tokenize
from .model import BaselineRules, load_params_file, save_params_file
from .pipeline import (AnimacyGazetteer, Augmenter, InflectionLexicon, augment_corpus,
                       build_lexicon, find_animate_nouns, naive_swap_baseline, sentence_text,
                       transform)
from .treebank import read_conllu, serialize_conllu

log = logging.getLogger("morphcda")


class DataFailure(Exception):
    """Bad or missing input data; maps to exit code 1."""


def _need(path, what: str) -> str:
    if path is None:
        raise ConfigError(f"{what} is required")
    if not os.path.exists(path):
        raise DataFailure(f"{what} {path} does not exist")
    return path


def _write(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def _treebank(paths, what="treebank"):
    out = []
    for p in paths:
        out.extend(read_conllu(_need(p, what)))
    if not out:
        raise DataFailure(f"{what} contains no usable sentences")
    return out


def _lexicon(args, corpus) -> InflectionLexicon:
    treebanks = [s for p in (args.treebank or []) for s in read_conllu(_need(p, "treebank"))]
    supplement = _need(args.lexicon, "lexicon") if args.lexicon else None
    return build_lexicon(list(corpus) + treebanks, supplement)


def _model(path, cfg):
    """A trained parameter file, or the rule baseline for the literal name ``baseline``."""
    if path == "baseline":
        return cfg.profile.baseline_rules()
    return load_params_file(_need(path, "model"))


def _gazetteer(path) -> AnimacyGazetteer:
    return AnimacyGazetteer.load(_need(path, "gazetteer"))


# ---------------------------------------------------------------------------
# commands


def cmd_train(args, cfg) -> int:
    from .training import train

    train_set = _treebank(args.train, "training treebank")
    dev_set = _treebank(args.dev, "dev treebank") if args.dev else []
    tc = cfg.train_config()
    params, tagset, history = train(train_set, dev_set, tc, cfg.parameterization)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_params_file(params, args.out)
    lines = ["epoch\ttrain_bits\tdev_bits"]
    lines += [f"{e}\t{tr:.9f}\t{dv:.9f}" for e, tr, dv in history]
    _write(args.history or str(args.out) + ".history.tsv", "\n".join(lines) + "\n")
    final = f"final dev loss {history[-1][2]:.6f} bits" if history else "no epochs run"
    print(f"{cfg.parameterization} model: {len(tagset)} tags, {len(history)} epochs, {final}")
    return 0


def _select(corpus, ids, positions, gaz, cfg):
    wanted = set(ids or [])
    for sent in corpus:
        if wanted and sent.sentence_id not in wanted:
            continue
        nouns = find_animate_nouns(sent, gaz, cfg.profile.gender, cfg.include_propn)
        if positions:
            nouns = [p for p in nouns if p in positions]
        if not nouns:
            log.warning("%s: no animate noun to intervene on", sent.sentence_id)
        for p in nouns:
            yield sent, p


def cmd_intervene(args, cfg) -> int:
    corpus = _treebank([args.input], "input")
    gaz = _gazetteer(args.gazetteer)
    params = _model(args.model, cfg)
    lexicon = _lexicon(args, corpus)
    rules = cfg.profile.suffix_rules()
    outputs, reports = [], []
    for sent, pos in _select(corpus, args.sentence_id, args.position, gaz, cfg):
        new, report = transform(sent, pos, params, lexicon, rules, gaz, cfg.alpha, cfg.profile.gender,
                                drop_unknown=cfg.drop_unknown,
                                sentence_id=f"{sent.sentence_id}-int{pos}")
        outputs.append(new)
        reports.append(report.describe())
    _write(args.out, serialize_conllu(outputs) if outputs else "")
    if args.report:
        _write(args.report, "".join(reports))
    for new in outputs:
        print(sentence_text(new))
    return 0


def cmd_augment(args, cfg) -> int:
    corpus = _treebank([args.input], "input")
    gaz = _gazetteer(args.gazetteer)
    lexicon = _lexicon(args, corpus)
    rules = cfg.profile.suffix_rules()
    if args.swap:
        out = naive_swap_baseline(corpus, gaz, lexicon, rules, cfg.profile.gender, cfg.include_propn)
        reports = []
    else:
        params = _model(args.model, cfg)
        augmenter = Augmenter(gaz, params, lexicon, rules, cfg.alpha, cfg.profile.gender,
                              cfg.max_variants, cfg.include_propn, cfg.drop_unknown)
        out, reports = augment_corpus(corpus, augmenter, jobs=args.jobs)
    if args.format == "text":
        _write(args.out, "".join(sentence_text(s) + "\n" for s in out))
    else:
        _write(args.out, serialize_conllu(out))
    if args.report:
        _write(args.report, "".join(r.describe() for r in reports))
    log.info("%d sentences in, %d out", len(corpus), len(out))
    return 0


def _changed_nouns(source, gold, gaz, cfg):
    gender = cfg.profile.gender
    return tuple(p for p in find_animate_nouns(source, gaz, gender, cfg.include_propn)
                 if gender.of(gold[p].tag) not in (None, gender.of(source[p].tag)))


def cmd_eval_intrinsic(args, cfg) -> int:
    sources = _treebank([args.source], "source treebank")
    golds = _treebank([args.gold], "gold treebank")
    if len(sources) != len(golds):
        raise DataFailure(f"{len(sources)} source sentences but {len(golds)} gold sentences")
    gaz = _gazetteer(args.gazetteer)
    systems = {"baseline": "baseline"}
    for item in args.system or []:
        name, sep, path = item.partition("=")
        if not sep:
            raise ConfigError(f"--system expects NAME=MODEL, got {item!r}")
        systems[name] = path
    models = {name: _model(path, cfg) for name, path in systems.items()}
    lexicon = _lexicon(args, sources)
    rules = cfg.profile.suffix_rules()
    scores = {name: IntrinsicScore() for name in models}
    for src, gold in zip(sources, golds):
        if len(src.tokens) != len(gold.tokens):
            raise DataFailure(f"{src.sentence_id}: source and gold differ in length")
        positions = _changed_nouns(src, gold, gaz, cfg)
        if not positions:
            log.warning("%s: no intervened noun found, skipped", src.sentence_id)
            continue
        for name, params in models.items():
            new, _ = transform(src, positions, params, lexicon, rules, gaz, cfg.alpha,
                               cfg.profile.gender, drop_unknown=cfg.drop_unknown)
            scores[name] = scores[name] + intrinsic_score(gold, new.tags(), new.forms(), src, positions)
    _write(args.out, intrinsic_table(scores))
    return 0


def _read_lm_corpus(path, fmt):
    _need(path, "corpus")
    if fmt == "conllu" or (fmt == "auto" and str(path).endswith((".conllu", ".conll"))):
        return [s.forms() for s in read_conllu(path)], True
    with open(path, encoding="utf-8") as f:
        return [tokenize(line) for line in f if line.strip()], False


def _read_logprobs(path) -> dict:
    """TSV rows ``condition<TAB>phrase<TAB>log-probability``."""
    tables = {}
    with open(_need(path, "log-probability fixture"), encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.rstrip("\n").split("\t")
            if len(cols) != 3:
                raise DataFailure(f"{path}:{lineno}: expected condition, phrase, log-probability")
            try:
                value = float(cols[2])
            except ValueError:
                raise DataFailure(f"{path}:{lineno}: bad log-probability {cols[2]!r}") from None
            tables.setdefault(cols[0], {})[tuple(cols[1].split())] = value
    return tables


def cmd_eval_bias(args, cfg) -> int:
    from .plotting import plot_bias_reports, plot_group_stereotype

    gaz = _gazetteer(args.gazetteer) if args.gazetteer else None
    if args.queries:
        queries = read_queries(_need(args.queries, "queries"))
    elif gaz is not None:
        queries = make_queries(gaz, cfg.profile.adjectives, cfg.profile.determiners)
    else:
        raise ConfigError("eval-bias needs --queries or --gazetteer")
    if not queries:
        raise DataFailure("no bias queries")
    original_sents = None
    if args.logprobs:
        lms = {c: FixedLogProbs(t) for c, t in _read_logprobs(args.logprobs).items()}
    else:
        lms = {}
        for cond in ("original", "swap", "mrf"):
            path = getattr(args, cond)
            if path is None:
                continue
            tokens, is_conllu = _read_lm_corpus(path, args.format)
            if cond == "original" and is_conllu:
                original_sents = read_conllu(path)
            lms[cond] = train_ngram(tokens, cfg.ngram_order, cfg.ngram_delta)
        if not lms:
            raise ConfigError("eval-bias needs --logprobs or at least one of --original/--swap/--mrf")
    report = bias_report(lms, queries, cfg.profile.name)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "report.tsv", report.to_tsv())
    _write(out / "report_long.tsv", report.to_long_tsv())
    plot_bias_reports([report], out / "bias.png")
    if gaz is not None and original_sents is not None:
        masc, fem, _ = stereotyped_words(original_sents, gaz, args.threshold, cfg.profile.gender)
        groups = {"masc-stereotyped": {c: group_stereotype(lm, queries, masc) for c, lm in lms.items()},
                  "fem-stereotyped": {c: group_stereotype(lm, queries, fem) for c, lm in lms.items()}}
        lines = ["group\tcondition\tsigned_mean_stereotyping\tn_pairs"]
        for g, pairs in (("masc-stereotyped", masc), ("fem-stereotyped", fem)):
            lines += [f"{g}\t{c}\t{v:.6f}\t{len(pairs)}" for c, v in groups[g].items()]
        _write(out / "groups.tsv", "\n".join(lines) + "\n")
        plot_group_stereotype(groups, out / "groups.png")
    for c in report.conditions:
        print(f"{c}\tmean |stereotyping| {report.mean_abs_stereotype(c):.4f}"
              f"\tmean grammaticality {report.mean_grammaticality(c):.4f}")
    return 0


def cmd_build_lexicon(args, cfg) -> int:
    corpus = _treebank(args.treebank, "treebank")
    supplement = _need(args.lexicon, "lexicon") if args.lexicon else None
    _write(args.out, build_lexicon(corpus, supplement).to_tsv())
    return 0


def cmd_generate_synthetic(args, cfg) -> int:
    from .synthetic import SyntheticLanguage, gazetteer

    lang = SyntheticLanguage(args.masc_rate, seed=cfg.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "train.conllu", serialize_conllu(lang.corpus(args.train_size)))
    _write(out / "dev.conllu", serialize_conllu(lang.corpus(args.dev_size)))
    pairs = lang.intervention_pairs(args.pairs)
    _write(out / "pairs.source.conllu", serialize_conllu(s for s, _, _ in pairs))
    _write(out / "pairs.gold.conllu", serialize_conllu(g for _, _, g in pairs))
    _write(out / "gazetteer.tsv", "".join(f"{m}\t{f}\n" for m, f in gazetteer().pairs))
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="morphcda", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="key = value run configuration file")
    p.add_argument("--seed", type=int, help="random seed (overrides the config)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for augmentation")
    p.add_argument("--language", help="language profile name or directory")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def lexicon_args(sp):
        sp.add_argument("--lexicon", help="lexicon supplement or build-lexicon output (TSV)")
        sp.add_argument("--treebank", nargs="*", help="extra treebanks for the inflection lexicon")

    sp = sub.add_parser("train", help="fit the binary factors on a treebank")
    sp.add_argument("--train", nargs="+", required=True)
    sp.add_argument("--dev", nargs="*")
    sp.add_argument("--out", required=True, help="model file to write")
    sp.add_argument("--history", help="loss history TSV (default: <out>.history.tsv)")
    sp.add_argument("--parameterization", choices=["linear", "neural"])
    sp.add_argument("--epochs", type=int, help="maximum number of epochs")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("intervene", help="swap the gender of selected nouns")
    sp.add_argument("--input", required=True)
    sp.add_argument("--model", required=True, help="model file, or 'baseline'")
    sp.add_argument("--gazetteer", required=True)
    sp.add_argument("--sentence-id", nargs="*")
    sp.add_argument("--position", type=int, nargs="*")
    sp.add_argument("--out", default="-")
    sp.add_argument("--report")
    lexicon_args(sp)
    sp.set_defaults(func=cmd_intervene)

    sp = sub.add_parser("augment", help="counterfactual data augmentation")
    sp.add_argument("--input", required=True)
    sp.add_argument("--model", help="model file, or 'baseline'")
    sp.add_argument("--gazetteer", required=True)
    sp.add_argument("--swap", action="store_true", help="naive noun-only swapping instead")
    sp.add_argument("--format", choices=["conllu", "text"], default="conllu")
    sp.add_argument("--out", default="-")
    sp.add_argument("--report")
    lexicon_args(sp)
    sp.set_defaults(func=cmd_augment)

    sp = sub.add_parser("eval-intrinsic", help="tag and form metrics on source/gold pairs")
    sp.add_argument("--source", required=True)
    sp.add_argument("--gold", required=True)
    sp.add_argument("--gazetteer", required=True)
    sp.add_argument("--system", action="append", help="NAME=MODEL (repeatable)")
    sp.add_argument("--out", default="-")
    lexicon_args(sp)
    sp.set_defaults(func=cmd_eval_intrinsic)

    sp = sub.add_parser("eval-bias", help="stereotyping and grammaticality under n-gram LMs")
    sp.add_argument("--original")
    sp.add_argument("--swap")
    sp.add_argument("--mrf")
    sp.add_argument("--format", choices=["auto", "conllu", "text"], default="auto")
    sp.add_argument("--queries")
    sp.add_argument("--gazetteer")
    sp.add_argument("--logprobs", help="fixture TSV of condition, phrase, log-probability")
    sp.add_argument("--threshold", type=float, default=0.75)
    sp.add_argument("--out-dir", required=True)
    sp.set_defaults(func=cmd_eval_bias)

    sp = sub.add_parser("build-lexicon", help="write the inflection lexicon of treebanks")
    sp.add_argument("--treebank", nargs="+", required=True)
    sp.add_argument("--lexicon", help="supplement TSV")
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_build_lexicon)

    sp = sub.add_parser("generate-synthetic", help="write a synthetic agreement corpus")
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--train-size", type=int, default=2000)
    sp.add_argument("--dev-size", type=int, default=200)
    sp.add_argument("--pairs", type=int, default=200)
    sp.add_argument("--masc-rate", type=float, default=0.9)
    sp.set_defaults(func=cmd_generate_synthetic)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {"seed": args.seed, "language": args.language,
                 "parameterization": getattr(args, "parameterization", None),
                 "max_epochs": getattr(args, "epochs", None)}
    try:
        cfg = load_run_config(args.config, **overrides)
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        if args.command == "augment" and not args.swap and not args.model:
            raise ConfigError("augment needs --model unless --swap is given")
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataFailure, OSError, ValueError, KeyError, FloatingPointError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

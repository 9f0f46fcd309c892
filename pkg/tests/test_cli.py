import math
from pathlib import Path

import numpy as np
import pytest

from helpers import FIG1
from morphcda.cli import main
from morphcda.model import save_params_file
from morphcda.synthetic import SyntheticLanguage
from morphcda.treebank import build_subtag_vocab, read_conllu, serialize_conllu
from morphcda.training import TagSet

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="module")
def synth(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    assert main(["--seed", "3", "generate-synthetic", "--out-dir", str(d), "--train-size", "300",
                 "--dev-size", "40", "--pairs", "60"]) == 0
    return d


def _rows(path):
    return [line.split("\t") for line in Path(path).read_text().strip().split("\n")]


# -- exit codes and validation -----------------------------------------------


def test_exit_codes(tmp_path, synth, capsys):
    out = tmp_path / "m.npz"
    assert main(["train", "--train", str(tmp_path / "missing.conllu"), "--out", str(out)]) == 1
    bad = tmp_path / "bad.cfg"
    bad.write_text("log_alpha = -1\n")
    assert main(["--config", str(bad), "train", "--train", str(synth / "train.conllu"),
                 "--out", str(out)]) == 2
    assert main(["--config", str(tmp_path / "nope.cfg"), "build-lexicon", "--treebank",
                 str(synth / "train.conllu"), "--out", str(out)]) == 2
    assert main(["--language", "klingon", "build-lexicon", "--treebank", str(synth / "train.conllu"),
                 "--out", str(out)]) == 2
    assert not out.exists()  # nothing written on a configuration error
    broken = tmp_path / "broken.conllu"
    broken.write_text("1\tx\tx\tNOUN\n\n")
    assert main(["build-lexicon", "--treebank", str(broken), "--out", str(out)]) == 1
    assert "config error" in capsys.readouterr().err


def test_unknown_config_key(tmp_path, synth):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("no_such_key = 1\n")
    out = tmp_path / "lex.tsv"
    assert main(["--config", str(cfg), "build-lexicon", "--treebank", str(synth / "train.conllu"),
                 "--out", str(out)]) == 2
    assert not out.exists()


# -- train -------------------------------------------------------------------


def test_train_two_epochs(tmp_path, synth, capsys):
    out = tmp_path / "new" / "dir" / "m.bin"  # parent directories are created
    assert main(["--seed", "1", "train", "--train", str(synth / "train.conllu"), "--dev",
                 str(synth / "dev.conllu"), "--out", str(out), "--epochs", "2"]) == 0
    rows = _rows(str(out) + ".history.tsv")
    assert rows[0] == ["epoch", "train_bits", "dev_bits"] and len(rows) == 3
    assert "final dev loss" in capsys.readouterr().out


def test_train_same_seed_identical(tmp_path, synth):
    outs = []
    for k in range(2):
        out = tmp_path / f"m{k}.bin"
        assert main(["--seed", "4", "train", "--train", str(synth / "train.conllu"), "--dev",
                     str(synth / "dev.conllu"), "--out", str(out), "--epochs", "2",
                     "--parameterization", "neural"]) == 0
        outs.append(out)
    assert outs[0].read_bytes() == outs[1].read_bytes()
    assert Path(str(outs[0]) + ".history.tsv").read_bytes() == Path(str(outs[1]) + ".history.tsv").read_bytes()


def test_linear_and_neural_beat_uniform(tmp_path, synth):
    train = read_conllu(synth / "train.conllu")
    dev = read_conllu(synth / "dev.conllu")
    ts = TagSet.from_sentences(train, build_subtag_vocab(train))
    uniform = np.mean([len(s.tokens) * math.log2(len(ts)) for s in dev])
    files = {}
    for kind in ("linear", "neural"):
        out = tmp_path / f"{kind}.bin"
        assert main(["train", "--train", str(synth / "train.conllu"), "--dev", str(synth / "dev.conllu"),
                     "--out", str(out), "--epochs", "15", "--parameterization", kind]) == 0
        files[kind] = out.read_bytes()
        assert float(_rows(str(out) + ".history.tsv")[-1][2]) < uniform
    assert files["linear"] != files["neural"]


# -- intervene ---------------------------------------------------------------


def _model_file(tmp_path, trained):
    path = tmp_path / "trained.bin"
    save_params_file(trained["params"], path)
    return path


def _gaz(tmp_path):
    path = tmp_path / "gaz.tsv"
    path.write_text("ingeniero\tingeniera\nmédico\tmédica\n")
    return path


def test_intervene_fig1(tmp_path, trained, capsys):
    src = tmp_path / "fig1.conllu"
    src.write_text(FIG1)
    train = tmp_path / "train.conllu"
    train.write_text(serialize_conllu(trained["train"]))
    out, report = tmp_path / "out.conllu", tmp_path / "report.txt"
    assert main(["intervene", "--input", str(src), "--model", str(_model_file(tmp_path, trained)),
                 "--gazetteer", str(_gaz(tmp_path)), "--treebank", str(train), "--out", str(out),
                 "--report", str(report)]) == 0
    assert "Las ingenieras son expertas" in capsys.readouterr().out
    (new,) = read_conllu(out)
    assert list(new.forms()) == ["Las", "ingenieras", "son", "expertas"]
    assert new.sentence_id == "fig1-int2"
    # the report's changed positions are exactly the positions whose FEATS differ
    (old,) = read_conllu(src)
    diff = [t.index for t, u in zip(old.tokens, new.tokens) if t.tag != u.tag]
    changed = [int(line.split()[0]) for line in report.read_text().splitlines()
               if line[:1].isdigit() and "->" in line]
    assert changed == diff == [1, 2, 4]


def test_intervene_without_animate_noun(tmp_path, caplog):
    src = tmp_path / "x.conllu"
    src.write_text("# sent_id = rain\n1\tLlueve\tllover\tVERB\t_\tNumber=Sing\t0\troot\t_\t_\n\n")
    out = tmp_path / "out.conllu"
    assert main(["intervene", "--input", str(src), "--model", "baseline", "--gazetteer",
                 str(_gaz(tmp_path)), "--out", str(out)]) == 0
    assert out.read_text() == ""
    assert "no animate noun" in caplog.text


# -- augment -----------------------------------------------------------------


def _ten_sentences(tmp_path):
    corpus = SyntheticLanguage(seed=30).corpus(4)
    rain = "".join(f"# sent_id = rain{i}\n1\tLlueve\tllover\tVERB\t_\tNumber=Sing\t0\troot\t_\t_\n\n"
                   for i in range(6))
    path = tmp_path / "ten.conllu"
    path.write_text(serialize_conllu(corpus) + rain)
    return path


def _augment(tmp_path, trained, name, *extra):
    from morphcda.synthetic import gazetteer
    gaz = tmp_path / "synth_gaz.tsv"
    gaz.write_text("".join(f"{m}\t{f}\n" for m, f in gazetteer().pairs))
    out = tmp_path / name
    args = ["augment", "--input", str(_ten_sentences(tmp_path)), "--gazetteer", str(gaz),
            "--out", str(out), *extra]
    if "--swap" not in extra:
        args += ["--model", str(_model_file(tmp_path, trained))]
    assert main(args) == 0
    return out


def test_augment_counts(tmp_path, trained):
    out = _augment(tmp_path, trained, "aug.conllu")
    assert len(read_conllu(out)) == 14


def test_swap_differs_only_off_the_noun(tmp_path, trained):
    mrf = [s for s in read_conllu(_augment(tmp_path, trained, "mrf.conllu")) if "-cda" in s.sentence_id]
    swap = [s for s in read_conllu(_augment(tmp_path, trained, "swap.conllu", "--swap"))
            if s.sentence_id.endswith("-swap")]
    assert len(mrf) == len(swap) == 4
    for a, b in zip(mrf, swap):
        differing = [t.index for t, u in zip(a.tokens, b.tokens) if (t.form, t.tag) != (u.form, u.tag)]
        assert differing and all(a[i].pos != "NOUN" for i in differing)
        assert a[2] == b[2]


def test_augment_deterministic(tmp_path, trained):
    a = _augment(tmp_path, trained, "a.conllu").read_bytes()
    b = _augment(tmp_path, trained, "b.conllu", ).read_bytes()
    c = _augment(tmp_path, trained, "c.txt", "--format", "text").read_text()
    assert a == b
    assert len(c.strip().split("\n")) == 14


def test_augment_requires_model(tmp_path, trained):
    assert main(["augment", "--input", str(_ten_sentences(tmp_path)), "--gazetteer",
                 str(_gaz(tmp_path)), "--out", str(tmp_path / "o")]) == 2
    assert not (tmp_path / "o").exists()


# -- eval-intrinsic ----------------------------------------------------------


def test_eval_intrinsic(tmp_path, trained, synth):
    out = tmp_path / "scores.tsv"
    assert main(["eval-intrinsic", "--source", str(synth / "pairs.source.conllu"), "--gold",
                 str(synth / "pairs.gold.conllu"), "--gazetteer", str(synth / "gazetteer.tsv"),
                 "--system", f"linear={_model_file(tmp_path, trained)}", "--treebank",
                 str(synth / "train.conllu"), "--out", str(out)]) == 0
    rows = _rows(out)
    assert rows[0] == ["system", "tag_P", "tag_R", "tag_F1", "tag_Acc", "form_Acc"]
    scores = {r[0]: [float(x) for x in r[1:]] for r in rows[1:]}
    assert all(len(v) == 5 for v in scores.values())
    assert scores["baseline"][0] >= scores["linear"][0]
    assert scores["baseline"][1] < scores["linear"][1]


def test_eval_intrinsic_gold_against_itself(tmp_path, synth):
    out = tmp_path / "scores.tsv"
    # gold as both source and gold: nothing changes, so every noun is skipped and counts are empty
    assert main(["eval-intrinsic", "--source", str(synth / "pairs.gold.conllu"), "--gold",
                 str(synth / "pairs.source.conllu"), "--gazetteer", str(synth / "gazetteer.tsv"),
                 "--treebank", str(synth / "train.conllu"), "--out", str(out)]) == 0
    assert len(_rows(out)) == 2


def test_eval_intrinsic_misaligned(tmp_path, synth):
    short = tmp_path / "short.conllu"
    short.write_text(serialize_conllu(read_conllu(synth / "pairs.gold.conllu")[:5]))
    assert main(["eval-intrinsic", "--source", str(synth / "pairs.source.conllu"), "--gold",
                 str(short), "--gazetteer", str(synth / "gazetteer.tsv"), "--out",
                 str(tmp_path / "o.tsv")]) == 1


# -- eval-bias ---------------------------------------------------------------


def test_eval_bias_identical_corpora(tmp_path, synth):
    d = tmp_path / "bias"
    c = str(synth / "train.conllu")
    assert main(["eval-bias", "--original", c, "--swap", c, "--mrf", c, "--gazetteer",
                 str(synth / "gazetteer.tsv"), "--out-dir", str(d)]) == 0
    rows = _rows(d / "report.tsv")
    assert rows[0] == ["query", "metric", "original", "swap", "mrf"]
    assert all(r[2] == r[3] == r[4] for r in rows[1:])
    for name in ("report_long.tsv", "bias.png", "groups.tsv", "groups.png"):
        assert (d / name).stat().st_size > 0


def test_eval_bias_stored_logprobs(tmp_path, capsys):
    d = tmp_path / "t4"
    assert main(["eval-bias", "--logprobs", str(FIXTURES / "engineer_good_logprobs.tsv"), "--queries",
                 str(FIXTURES / "engineer_queries.tsv"), "--out-dir", str(d)]) == 0
    summary = {r[0]: r[1:] for r in _rows(d / "report.tsv") if r[0] == "ALL"}
    stereo = dict(zip(("original", "swap", "mrf"), map(float, summary["ALL"][1:])))
    long = {(r[1], r[2]): float(r[3]) for r in _rows(d / "report_long.tsv")[1:]}
    assert long[("original", "mean_abs_stereotyping")] == pytest.approx(3.7, abs=5e-3)
    assert long[("original", "mean_grammaticality")] == pytest.approx(3.25, abs=5e-3)
    assert long[("mrf", "mean_abs_stereotyping")] == pytest.approx(2.0, abs=5e-3)
    assert long[("mrf", "mean_grammaticality")] == pytest.approx(4.05, abs=5e-3)
    assert long[("swap", "mean_grammaticality")] == pytest.approx(0.25, abs=5e-3)
    # the printed swap stereotyping (6.2) is not the difference of its own phrase scores
    assert long[("swap", "mean_abs_stereotyping")] == pytest.approx(3.8, abs=5e-3)
    assert stereo  # the summary row is present
    assert (d / "bias.png").exists()


def test_eval_bias_bad_fixture(tmp_path):
    bad = tmp_path / "bad.tsv"
    bad.write_text("original\tEl ingeniero bueno\n")
    assert main(["eval-bias", "--logprobs", str(bad), "--queries", str(FIXTURES / "engineer_queries.tsv"),
                 "--out-dir", str(tmp_path / "o")]) == 1
    assert main(["eval-bias", "--out-dir", str(tmp_path / "o2")]) == 2


def test_build_lexicon(tmp_path, synth):
    from morphcda.pipeline import build_lexicon

    out = tmp_path / "lex.tsv"
    assert main(["build-lexicon", "--treebank", str(synth / "train.conllu"), "--out", str(out)]) == 0
    rows = _rows(out)
    assert all(len(r) == 4 and int(r[3]) > 0 for r in rows)  # lemma, tag, form, count
    assert out.read_text() == build_lexicon(read_conllu(synth / "train.conllu")).to_tsv()

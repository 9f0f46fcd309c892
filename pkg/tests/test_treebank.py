import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import FIG2, fig2
from morphcda.synthetic import SyntheticLanguage
from morphcda.treebank import (ConllUParseError, ConllUValidationError, DepSentence, MorphTag,
                               Subtag, SubtagVocab, Token, UnknownSubtagError, build_subtag_vocab,
                               decode_multi_hot, gender_tag_domains, multi_hot, parse_conllu,
                               serialize_conllu)


def test_fig2_triples_and_root():
    s = fig2()
    assert s.root == 2
    assert set(s.edges()) == {(1, 2, "det"), (3, 2, "amod"), (4, 2, "cop"),
                              (6, 2, "amod"), (5, 6, "advmod")}
    assert len(s.triples()) == len(s.tokens)
    assert s[5].tag == MorphTag.from_string("_")
    assert len(s[5].tag) == 0


def test_empty_input():
    assert parse_conllu("") == []
    assert serialize_conllu([]) == ""


def test_multiword_and_empty_nodes_skipped():
    text = ("1-2\tdel\t_\t_\t_\t_\t_\t_\t_\t_\n"
            "1\tde\tde\tADP\t_\t_\t2\tcase\t_\t_\n"
            "2\tel\tel\tDET\t_\tGender=Masc\t0\troot\t_\t_\n"
            "2.1\tx\tx\tX\t_\t_\t_\t_\t_\t_\n\n")
    (s,) = parse_conllu(text)
    assert [t.form for t in s.tokens] == ["de", "el"]


def test_wrong_column_count_reports_line():
    text = FIG2.replace("3\talemán\talemán\tADJ\t_\t", "3\talemán\talemán\tADJ\t")
    with pytest.raises(ConllUParseError) as err:
        parse_conllu(text)
    assert err.value.line_number == 5


def test_cycle_and_multiroot_are_validation_errors():
    cyc = ("1\ta\ta\tX\t_\t_\t2\tdep\t_\t_\n2\tb\tb\tX\t_\t_\t1\tdep\t_\t_\n"
           "3\tc\tc\tX\t_\t_\t0\troot\t_\t_\n\n")
    two = "1\ta\ta\tX\t_\t_\t0\troot\t_\t_\n2\tb\tb\tX\t_\t_\t0\troot\t_\t_\n\n"
    for text in (cyc, two):
        with pytest.raises(ConllUValidationError) as err:
            parse_conllu("# sent_id = bad\n" + text, strict=True)
        assert err.value.sentence_id == "bad"
        # non-strict mode skips the sentence but keeps the valid ones
        assert len(parse_conllu(text + FIG2)) == 1


def test_self_loop_is_validation_error():
    text = "1\ta\ta\tX\t_\t_\t1\tdep\t_\t_\n2\tb\tb\tX\t_\t_\t0\troot\t_\t_\n\n"
    with pytest.raises(ConllUValidationError):
        parse_conllu(text, strict=True)
    assert parse_conllu(text) == []


def test_roundtrip_fig2_and_canonical_feats():
    s = fig2()
    again = parse_conllu(serialize_conllu([s]))[0]
    assert again == s and again.triples() == s.triples()
    shuffled = FIG2.replace("Gender=Masc|Number=Sing\t0", "Number=Sing|Gender=Masc\t0")
    out = serialize_conllu(parse_conllu(shuffled))
    assert "Gender=Masc|Number=Sing\t0" in out


def test_roundtrip_synthetic_corpus_and_line_count():
    corpus = SyntheticLanguage(seed=3).corpus(100)
    text = serialize_conllu(corpus)
    # independent count: sentences are blank-line separated blocks
    blocks = [b for b in text.split("\n\n") if b.strip()]
    parsed = parse_conllu(text)
    assert len(parsed) == len(blocks) == 100
    assert parsed == corpus
    assert serialize_conllu(parsed) == text


def test_subtag_vocab_counts():
    toks = [Token(1, "a", "a", "X", MorphTag.of(Gender="Masc", Number="Sing"), 0, "root")]
    toks2 = [Token(1, "b", "b", "X", MorphTag.of(Gender="Fem", Number="Sing"), 0, "root")]
    vocab = build_subtag_vocab([DepSentence(toks), DepSentence(toks2)])
    assert vocab.c == 3
    assert list(vocab.subtags) == sorted(vocab.subtags)
    assert build_subtag_vocab([]).c == 0


def test_subtag_vocab_matches_independent_count():
    corpus = SyntheticLanguage(seed=4).corpus(200)
    text = serialize_conllu(corpus)
    feats = set()
    for line in text.splitlines():
        if line and not line.startswith("#"):
            col = line.split("\t")[5]
            if col != "_":
                feats.update(col.split("|"))
    assert build_subtag_vocab(corpus).c == len(feats)


def test_multi_hot_worked_example():
    vocab = SubtagVocab((Subtag("Gender", "Fem"), Subtag("Gender", "Masc"), Subtag("Number", "Sing")))
    np.testing.assert_array_equal(multi_hot(MorphTag.of(Gender="Masc", Number="Sing"), vocab), [0, 1, 1])
    np.testing.assert_array_equal(multi_hot(MorphTag(), vocab), [0, 0, 0])
    with pytest.raises(UnknownSubtagError, match="Case=Nom"):
        multi_hot(MorphTag.of(Case="Nom"), vocab)
    np.testing.assert_array_equal(multi_hot(MorphTag.of(Case="Nom", Number="Sing"), vocab,
                                            drop_unknown=True), [0, 0, 1])


def test_multi_hot_bijective_on_observed_tags():
    corpus = SyntheticLanguage(seed=5).corpus(300)
    vocab = build_subtag_vocab(corpus)
    tags = {t.tag for s in corpus for t in s.tokens}
    codes = {tuple(multi_hot(t, vocab)) for t in tags}
    assert len(codes) == len(tags)
    for t in tags:
        assert decode_multi_hot(multi_hot(t, vocab), vocab) == t
        assert multi_hot(t, vocab).sum() == len(t)


def test_gender_domains_fig2():
    s = fig2()
    doms = gender_tag_domains(s)
    assert [len(doms[i]) for i in range(1, 7)] == [2, 2, 2, 1, 1, 2]
    for i in range(1, 7):
        assert doms[i][0] == s[i].tag
    assert doms[1][1] == MorphTag.of(Gender="Fem", Number="Sing")
    assert np.prod([len(d) for d in doms.values()]) == 2 ** 4


def test_morphtag_rejects_duplicate_feature():
    with pytest.raises(ValueError):
        MorphTag.from_string("Gender=Masc|Gender=Fem")


features = st.sampled_from(["Gender", "Number", "Person", "Case", "Tense"])
values = st.sampled_from(["Masc", "Fem", "Sing", "Plur", "1", "3", "Nom", "Past"])


@settings(max_examples=200, deadline=None)
@given(st.dictionaries(features, values))
def test_morphtag_string_roundtrip(kv):
    tag = MorphTag.of(**kv)
    assert MorphTag.from_string(str(tag)) == tag
    assert str(tag) == ("|".join(f"{k}={v}" for k, v in sorted(kv.items())) or "_")

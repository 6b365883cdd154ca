import dataclasses
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tga.discourse import (
    Lexicon,
    LexiconRule,
    classify_utterance,
    cognitive_distribution,
    default_lexicon,
    label_session,
)
from tga.model import BLOOM_LEVELS, TEACHER, Actor, CognitiveLevel as L
from tga.report import resolve_metric, summarize

from conftest import make_log, utt


@pytest.fixture(scope="module")
def lex():
    return default_lexicon()


def _table(lex):
    return {r.pattern: r.level for r in lex.rules}


def test_shipped_lexicon_table(lex):
    table = _table(lex)
    assert table["what is"] is L.REMEMBERING
    assert table["design"] is L.CREATING
    per_level = {lvl: sum(1 for r in lex.rules if r.level is lvl) for lvl in BLOOM_LEVELS}
    assert all(n == 20 for n in per_level.values())


@pytest.mark.parametrize("text, expected", [
    ("What is the capital of France?", (L.REMEMBERING, 1.0)),
    ("Design your own experiment to test this.", (L.CREATING, 1.0)),
    ("", (L.UNCLASSIFIED, 0.0)),
    ("   ", (L.UNCLASSIFIED, 0.0)),
    ("Good morning everyone.", (L.UNCLASSIFIED, 0.0)),
])
def test_classify(lex, text, expected):
    assert classify_utterance(text, lex) == expected


def test_word_boundaries(lex):
    # "list" must not fire inside "listen"
    assert classify_utterance("Please listen carefully", lex) == (L.UNCLASSIFIED, 0.0)


def test_first_rule_wins():
    lex = Lexicon([LexiconRule("why", L.ANALYZING), LexiconRule("why do", L.EVALUATING)])
    assert classify_utterance("Why do plants grow?", lex)[0] is L.ANALYZING


def test_lexicon_rejects_empty_pattern():
    with pytest.raises(ValueError):
        Lexicon([LexiconRule("  ", L.CREATING)])


def test_lexicon_load_file(tmp_path):
    p = tmp_path / "lex.json"
    p.write_text(json.dumps({"rules": [{"pattern": "hmm", "level": "Evaluating"}]}))
    assert classify_utterance("Hmm, ok", Lexicon.load(p)) == (L.EVALUATING, 1.0)


@given(st.text(max_size=80))
def test_classifier_deterministic(text):
    lex = default_lexicon()
    assert classify_utterance(text, lex) == classify_utterance(text, lex)


def _labeled(levels, actor=TEACHER):
    return [dataclasses.replace(utt(i, i + 1, "x", actor), level=lvl) for i, lvl in enumerate(levels)]


def test_distribution_counts():
    log = make_log(utterances=_labeled([L.REMEMBERING, L.REMEMBERING, L.UNDERSTANDING, L.ANALYZING]))
    d = cognitive_distribution([log])
    assert d.counts["teacher"][L.REMEMBERING] == 2
    assert d.counts["teacher"][L.UNDERSTANDING] == 1
    assert d.counts["teacher"][L.ANALYZING] == 1
    assert d.totals == {"teacher": 4, "student": 0}


def test_distribution_empty():
    d = cognitive_distribution([])
    assert d.total == 0
    assert all(v == 0 for a in d.counts.values() for v in a.values())


@given(st.lists(st.tuples(st.sampled_from(list(L)), st.booleans()), max_size=40))
def test_distribution_conservation(items):
    utts = [dataclasses.replace(utt(i, i + 1, "x", TEACHER if t else Actor("s1")), level=lvl)
            for i, (lvl, t) in enumerate(items)]
    d = cognitive_distribution([make_log(utterances=utts)])
    assert sum(sum(c.values()) for c in d.counts.values()) == len(items) == d.total


def test_recall_oriented_flag():
    log = make_log(utterances=_labeled([L.REMEMBERING, L.UNDERSTANDING, L.REMEMBERING, L.CREATING]))
    d = cognitive_distribution([log])
    assert d.lower_order_share("teacher") == 0.75
    assert d.recall_oriented()
    bundle = summarize([log], d)
    assert bundle["cognitive"]["recall_oriented"] is True
    assert resolve_metric(bundle, "cognitive.lower_order_share") == 0.75


def test_not_recall_oriented():
    log = make_log(utterances=_labeled([L.REMEMBERING, L.CREATING, L.EVALUATING]))
    assert not cognitive_distribution([log]).recall_oriented()


def test_label_session(lex):
    log = make_log(utterances=[utt(0, 1, "Compare both answers"), utt(2, 3, "")])
    out = label_session(log, lex)
    assert [u.level for u in out.utterances] == [L.ANALYZING, L.UNCLASSIFIED]
    assert [u.confidence for u in out.utterances] == [1.0, 0.0]

import dataclasses
import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tga.errors import (
    DuplicateIndex,
    DuplicateMeta,
    IndexOutOfRange,
    MalformedRecord,
    MissingMeta,
    MissingScene,
    TimestampOutOfRange,
    ZeroGazeDirection,
)
from tga.ingest import (
    LabelEntry,
    LabelSidecar,
    apply_sidecar_labels,
    parse_embeddings,
    parse_labels,
    parse_session,
    serialize_session,
    validate,
)
from tga.model import TEACHER, Actor, BehaviorEvent, CognitiveLevel, GazeFrame, Utterance, parse_behavior_code
from tga.synth import DEFAULT_TEMPLATES, GazeSegment, generate_session, planted_config

from conftest import make_log, utt


def test_parse_sorts_and_normalizes(session_lines):
    log = parse_session(session_lines)
    assert log.meta.session_id == "abc"
    assert [u.t_start_ms for u in log.utterances] == [1000, 2000]
    assert log.utterances[0].actor == TEACHER
    assert log.utterances[1].actor == Actor("s1")
    assert log.gaze[0].gaze_dir == (0.0, 0.0, 1.0)
    assert str(log.events[1].code) == "s_answer_low"


def test_parse_accepts_whole_text(session_lines):
    assert parse_session("\n".join(session_lines)) == parse_session(session_lines)


def test_missing_meta(session_lines):
    with pytest.raises(MissingMeta):
        parse_session(session_lines[1:])


def test_missing_scene(session_lines):
    with pytest.raises(MissingScene):
        parse_session([session_lines[0]] + session_lines[2:])


def test_duplicate_meta(session_lines):
    with pytest.raises(DuplicateMeta):
        parse_session([session_lines[0]] + session_lines)


def test_malformed_line_number(session_lines):
    lines = session_lines[:3] + ["{not json"] + session_lines[3:]
    with pytest.raises(MalformedRecord) as info:
        parse_session(lines)
    assert info.value.line == 4


def test_bad_code_is_malformed_record(session_lines):
    bad = json.dumps({"kind": "event", "t_ms": 1, "actor": "teacher", "code": "x_focal_low"})
    with pytest.raises(MalformedRecord):
        parse_session(session_lines + [bad])


@pytest.mark.parametrize("vec", [[0, 0, 0], [0, 0, 0.3], [0, 0, 3]])
def test_gaze_outside_band(session_lines, vec):
    bad = json.dumps({"kind": "gaze", "t_ms": 20, "head_pos": [0, 0, 0], "gaze_dir": vec})
    with pytest.raises(ZeroGazeDirection):
        parse_session(session_lines + [bad])


def test_strict_timestamps(session_lines):
    late = json.dumps({"kind": "event", "t_ms": 9000, "actor": "teacher", "code": "t_focal_remembering"})
    with pytest.raises(TimestampOutOfRange):
        parse_session(session_lines + [late])
    log = parse_session(session_lines + [late], strict=False)
    report = validate(log)
    assert [v.rule for v in report.violations] == ["timestamp_out_of_range"]
    assert report.fatal


def test_validate_clean(session_lines):
    report = validate(parse_session(session_lines))
    assert report.violations == ()
    assert not report.fatal


def test_validate_actor_code_mismatch():
    ev = BehaviorEvent(10, TEACHER, parse_behavior_code("s_answer_low"))
    report = validate(make_log(events=[ev]))
    assert [v.rule for v in report.violations] == ["actor_code_mismatch"]


def test_validate_unknown_student_and_interval():
    bad = Utterance(50, 10, Actor("ghost"), "hi")
    rules = {v.rule for v in validate(make_log(utterances=[bad])).violations}
    assert rules == {"unknown_student", "bad_interval"}


def test_validate_unsorted_and_gaze_norm():
    log = make_log(utterances=[utt(500, 600), utt(100, 200)],
                   gaze=[GazeFrame(0, (0, 0, 0), (0.0, 0.0, 1.5))])
    rules = sorted(v.rule for v in validate(log).violations)
    assert rules == ["gaze_not_unit", "unsorted_records"]


def test_round_trip_fixture(session_lines):
    log = parse_session(session_lines)
    assert parse_session(serialize_session(log)) == log


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 60))
def test_round_trip_generated(seed, n_events):
    cfg = planted_config(n_events=n_events)
    cfg.utterance_templates = dict(DEFAULT_TEMPLATES)
    cfg.gaze_script = [GazeSegment("s1", 200, 0.5), GazeSegment(None, 100, 2.0)]
    log = generate_session(cfg, seed=seed)
    text = serialize_session(log)
    assert parse_session(text) == log
    assert serialize_session(parse_session(text)) == text


def test_round_trip_keeps_labels():
    u = Utterance(0, 10, TEACHER, "Why?", CognitiveLevel.ANALYZING, 0.75)
    log = make_log(utterances=[u])
    assert parse_session(serialize_session(log)).utterances[0] == u


def test_apply_labels():
    log = make_log(utterances=[utt(0, 10, "x")])
    out = apply_sidecar_labels(log, LabelSidecar((LabelEntry(0, CognitiveLevel.ANALYZING, 0.9),)))
    assert out.utterances[0].level is CognitiveLevel.ANALYZING
    assert out.utterances[0].confidence == 0.9
    assert apply_sidecar_labels(out, LabelSidecar((LabelEntry(0, CognitiveLevel.ANALYZING, 0.9),))) == out


def test_apply_labels_empty_is_identity():
    log = make_log(utterances=[utt(0, 10)])
    assert apply_sidecar_labels(log, LabelSidecar()) is log


def test_apply_labels_keeps_untouched():
    log = make_log(utterances=[utt(0, 10), dataclasses.replace(utt(20, 30), level=CognitiveLevel.CREATING)])
    out = apply_sidecar_labels(log, LabelSidecar((LabelEntry(0, CognitiveLevel.APPLYING, 1.0),)))
    assert out.utterances[1].level is CognitiveLevel.CREATING


def test_apply_labels_errors():
    log = make_log(utterances=[utt(0, 1), utt(2, 3), utt(4, 5)])
    with pytest.raises(IndexOutOfRange):
        apply_sidecar_labels(log, LabelSidecar((LabelEntry(5, CognitiveLevel.APPLYING, 1.0),)))
    with pytest.raises(DuplicateIndex):
        apply_sidecar_labels(log, LabelSidecar((
            LabelEntry(1, CognitiveLevel.APPLYING, 1.0), LabelEntry(1, CognitiveLevel.CREATING, 1.0))))


def test_sidecar_parsers():
    labels = parse_labels({"session_id": "a", "entries": [
        {"utterance_index": 0, "level": "Analyzing", "confidence": 0.9}]})
    assert labels.entries[0].level is CognitiveLevel.ANALYZING
    emb = parse_embeddings({"dim": 2, "entries": [{"utterance_index": 3, "vector": [1, 2]}]})
    assert emb.entries[0].vector == (1.0, 2.0)
    with pytest.raises(ValueError):
        parse_embeddings({"dim": 3, "entries": [{"utterance_index": 0, "vector": [1, 2]}]})
    with pytest.raises(DuplicateIndex):
        parse_embeddings({"dim": 1, "entries": [{"utterance_index": 0, "vector": [1]},
                                                {"utterance_index": 0, "vector": [2]}]})


def test_gaze_normalized_within_tolerance(session_lines):
    for g in parse_session(session_lines).gaze:
        assert abs(math.sqrt(sum(c * c for c in g.gaze_dir)) - 1) <= 1e-3

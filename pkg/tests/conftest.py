from __future__ import annotations

import json

import pytest

from tga.model import (
    TEACHER,
    Actor,
    BehaviorEvent,
    FloorPlane,
    GazeFrame,
    SceneLayout,
    SessionLog,
    SessionMeta,
    StudentAvatar,
    Utterance,
    parse_behavior_code,
)

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def make_scene(n: int = 2) -> SceneLayout:
    students = tuple(
        StudentAvatar(f"s{k + 1}", (float(k) - (n - 1) / 2, 1.2, 3.0), 0.3) for k in range(n)
    )
    return SceneLayout(students, FloorPlane((0.0, 0.0, 2.0), (0.0, 1.0, 0.0), 6.0, 6.0))


def make_log(
    events=(),
    utterances=(),
    gaze=(),
    duration_ms: int = 10_000,
    session_id: str = "s-test",
    scene: SceneLayout | None = None,
) -> SessionLog:
    """``events`` may be (t_ms, code_str) pairs; the actor follows the prefix."""
    evs = []
    for item in events:
        if isinstance(item, BehaviorEvent):
            evs.append(item)
            continue
        t, raw = item
        code = parse_behavior_code(raw)
        evs.append(BehaviorEvent(t, TEACHER if code.actor_prefix == "t" else Actor("s1"), code))
    return SessionLog(
        SessionMeta(session_id, "math", duration_ms, ("objective",)),
        tuple(utterances),
        tuple(evs),
        tuple(gaze),
        scene or make_scene(),
    )


@pytest.fixture
def scene() -> SceneLayout:
    return make_scene()


@pytest.fixture
def session_lines() -> list[str]:
    recs = [
        {"kind": "meta", "session_id": "abc", "subject": "science", "duration_ms": 5000,
         "learning_objectives": ["Explain photosynthesis"], "class_level": "high"},
        {"kind": "scene", "students": [{"id": "s1", "center": [0, 1.2, 3], "radius": 0.3}],
         "floor_plane": {"origin": [0, 0, 2], "normal": [0, 1, 0], "extent_u": 6, "extent_v": 6}},
        {"kind": "utterance", "t_start_ms": 2000, "t_end_ms": 2500, "actor": {"student": "s1"}, "text": "It is green."},
        {"kind": "utterance", "t_start_ms": 1000, "t_end_ms": 1800, "actor": "teacher", "text": "What is a leaf?"},
        {"kind": "event", "t_ms": 1000, "actor": "teacher", "code": "t_focal_remembering"},
        {"kind": "event", "t_ms": 2000, "actor": {"student": "s1"}, "code": "s_answer_low"},
        {"kind": "gaze", "t_ms": 0, "head_pos": [0, 1.6, 0], "gaze_dir": [0, 0, 2]},
        {"kind": "gaze", "t_ms": 16, "head_pos": [0, 1.6, 0], "gaze_dir": [0, 0, 1]},
    ]
    return [json.dumps(r) for r in recs]


def utt(t0: int, t1: int, text: str = "hello", actor: Actor = TEACHER) -> Utterance:
    return Utterance(t0, t1, actor, text)


def frame(t: int, d=(0.0, 0.0, 1.0), head=(0.0, 0.0, 0.0)) -> GazeFrame:
    return GazeFrame(t, tuple(head), tuple(d))

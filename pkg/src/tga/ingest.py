"""Reading, writing and validating ``*.session.jsonl`` logs and sidecar files.

A session file is line-delimited JSON; every record carries a ``kind``
discriminator (``meta``, ``scene``, ``utterance``, ``event``, ``gaze``).
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence, Tuple, Union

from .errors import (
    CodeError,
    DuplicateIndex,
    DuplicateMeta,
    DuplicateScene,
    IndexOutOfRange,
    MalformedRecord,
    MissingMeta,
    MissingScene,
    TimestampOutOfRange,
    ZeroGazeDirection,
)
from .model import (
    TEACHER,
    Actor,
    BehaviorEvent,
    ClassLevel,
    CognitiveLevel,
    FloorPlane,
    GazeFrame,
    SceneLayout,
    SessionLog,
    SessionMeta,
    StudentAvatar,
    Utterance,
    parse_behavior_code,
)

GAZE_NORM_BAND = (0.5, 2.0)
UNIT_TOLERANCE = 1e-3

# every rule is fatal: a log with any violation is not analysable as-is
FATAL_RULES = frozenset({
    "parse_error",
    "empty_session_id",
    "negative_duration",
    "timestamp_out_of_range",
    "unsorted_records",
    "bad_interval",
    "empty_text_labeled",
    "bad_confidence",
    "actor_code_mismatch",
    "unknown_student",
    "gaze_not_unit",
    "duplicate_student",
    "bad_radius",
    "bad_extent",
    "bad_plane_normal",
})


@dataclass(frozen=True)
class Violation:
    record_index: int
    rule: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    violations: Tuple[Violation, ...] = ()

    @property
    def fatal(self) -> bool:
        return any(v.rule in FATAL_RULES for v in self.violations)

    def to_dict(self) -> dict:
        return {
            "fatal": self.fatal,
            "violations": [dataclasses.asdict(v) for v in self.violations],
        }


@dataclass(frozen=True)
class LabelEntry:
    utterance_index: int
    level: CognitiveLevel
    confidence: float


@dataclass(frozen=True)
class LabelSidecar:
    entries: Tuple[LabelEntry, ...] = ()
    session_id: Optional[str] = None


@dataclass(frozen=True)
class EmbeddingEntry:
    utterance_index: int
    vector: Tuple[float, ...]


@dataclass(frozen=True)
class EmbeddingSidecar:
    dim: int
    entries: Tuple[EmbeddingEntry, ...] = ()
    session_id: Optional[str] = None


# ---------------------------------------------------------------- parsing

def _vec3(value: Any, what: str) -> Tuple[float, float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ValueError(f"{what} must be a list of 3 numbers")
    out = tuple(float(x) for x in value)
    if not all(math.isfinite(x) for x in out):
        raise ValueError(f"{what} must be finite")
    return out  # type: ignore[return-value]


def _int(value: Any, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"{what} must be an integer")
    return value


def parse_actor(value: Any) -> Actor:
    if value == "teacher":
        return TEACHER
    if isinstance(value, dict) and set(value) == {"student"} and isinstance(value["student"], str):
        return Actor.student(value["student"])
    raise ValueError(f"bad actor {value!r}")


def format_actor(actor: Actor) -> Any:
    return "teacher" if actor.is_teacher else {"student": actor.student_id}


def _normalize_dir(v: Tuple[float, float, float], line: int) -> Tuple[float, float, float]:
    norm = math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
    if abs(norm - 1.0) <= 1e-12:
        return v
    lo, hi = GAZE_NORM_BAND
    if not lo <= norm <= hi:
        raise ZeroGazeDirection(f"line {line}: gaze_dir magnitude {norm:.4g} outside [{lo}, {hi}]")
    return (v[0] / norm, v[1] / norm, v[2] / norm)


def _parse_meta(rec: dict) -> SessionMeta:
    objectives = rec.get("learning_objectives", [])
    if not isinstance(objectives, list) or not all(isinstance(o, str) for o in objectives):
        raise ValueError("learning_objectives must be a list of strings")
    session_id = rec["session_id"]
    if not isinstance(session_id, str):
        raise ValueError("session_id must be a string")
    return SessionMeta(
        session_id=session_id,
        subject=str(rec.get("subject", "")),
        duration_ms=_int(rec["duration_ms"], "duration_ms"),
        learning_objectives=tuple(objectives),
        class_level=ClassLevel(rec.get("class_level", "medium")),
    )


def _parse_scene(rec: dict) -> SceneLayout:
    students = tuple(
        StudentAvatar(
            student_id=str(s["id"]),
            center=_vec3(s["center"], "center"),
            radius=float(s["radius"]),
        )
        for s in rec.get("students", [])
    )
    fp = rec.get("floor_plane")
    plane = FloorPlane() if fp is None else FloorPlane(
        origin=_vec3(fp["origin"], "origin"),
        normal=_vec3(fp["normal"], "normal"),
        extent_u=float(fp["extent_u"]),
        extent_v=float(fp["extent_v"]),
    )
    return SceneLayout(students=students, floor_plane=plane)


def _parse_utterance(rec: dict) -> Utterance:
    text = rec.get("text", "")
    if not isinstance(text, str):
        raise ValueError("text must be a string")
    level = CognitiveLevel.parse(rec["level"]) if "level" in rec else CognitiveLevel.UNCLASSIFIED
    return Utterance(
        t_start_ms=_int(rec["t_start_ms"], "t_start_ms"),
        t_end_ms=_int(rec["t_end_ms"], "t_end_ms"),
        actor=parse_actor(rec["actor"]),
        text=text,
        level=level,
        confidence=float(rec.get("confidence", 0.0)),
    )


def _parse_event(rec: dict) -> BehaviorEvent:
    return BehaviorEvent(
        t_ms=_int(rec["t_ms"], "t_ms"),
        actor=parse_actor(rec["actor"]),
        code=parse_behavior_code(rec["code"]),
    )


def parse_session(stream: Union[str, Iterable[str]], strict: bool = True) -> SessionLog:
    """Parse a line-delimited session stream into a :class:`SessionLog`.

    ``stream`` is either the whole text or an iterable of lines. Records are
    stably sorted by their start timestamp. With ``strict`` set, timestamps
    outside ``[0, duration_ms]`` raise :class:`TimestampOutOfRange`; otherwise
    they are kept so that :func:`validate` can report them.
    """
    lines = stream.splitlines() if isinstance(stream, str) else stream
    meta: Optional[SessionMeta] = None
    scene: Optional[SceneLayout] = None
    utterances: List[Utterance] = []
    events: List[BehaviorEvent] = []
    gaze: List[GazeFrame] = []

    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(lineno, f"invalid JSON: {exc.msg}") from None
        if not isinstance(rec, dict):
            raise MalformedRecord(lineno, "record is not a JSON object")
        kind = rec.get("kind")
        try:
            if kind == "meta":
                if meta is not None:
                    raise DuplicateMeta(f"line {lineno}: second meta record")
                meta = _parse_meta(rec)
            elif kind == "scene":
                if scene is not None:
                    raise DuplicateScene(f"line {lineno}: second scene record")
                scene = _parse_scene(rec)
            elif kind == "utterance":
                utterances.append(_parse_utterance(rec))
            elif kind == "event":
                events.append(_parse_event(rec))
            elif kind == "gaze":
                gaze.append(GazeFrame(
                    t_ms=_int(rec["t_ms"], "t_ms"),
                    head_pos=_vec3(rec["head_pos"], "head_pos"),
                    gaze_dir=_normalize_dir(_vec3(rec["gaze_dir"], "gaze_dir"), lineno),
                ))
            else:
                raise MalformedRecord(lineno, f"unknown kind {kind!r}")
        except (KeyError, ValueError, TypeError, CodeError) as exc:
            detail = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
            raise MalformedRecord(lineno, f"{kind}: {detail}") from None

    if meta is None:
        raise MissingMeta("no meta record")
    if scene is None:
        raise MissingScene("no scene record")

    utterances.sort(key=lambda u: u.t_start_ms)
    events.sort(key=lambda e: e.t_ms)
    gaze.sort(key=lambda g: g.t_ms)
    log = SessionLog(meta, tuple(utterances), tuple(events), tuple(gaze), scene)
    if strict:
        for v in _timestamp_violations(log):
            raise TimestampOutOfRange(v.detail)
    return log


def load_session(path: Union[str, Path], strict: bool = True) -> SessionLog:
    with open(path, encoding="utf-8") as fh:
        return parse_session(fh, strict=strict)


def _num(x: float) -> Union[int, float]:
    return int(x) if float(x).is_integer() and abs(x) < 2**53 else x


def serialize_session(log: SessionLog) -> str:
    """Inverse of :func:`parse_session`; output is byte-stable for equal logs."""
    m = log.meta
    recs: List[dict] = [{
        "kind": "meta",
        "session_id": m.session_id,
        "subject": m.subject,
        "duration_ms": m.duration_ms,
        "learning_objectives": list(m.learning_objectives),
        "class_level": m.class_level.value,
    }]
    fp = log.scene.floor_plane
    recs.append({
        "kind": "scene",
        "students": [
            {"id": s.student_id, "center": [_num(c) for c in s.center], "radius": _num(s.radius)}
            for s in log.scene.students
        ],
        "floor_plane": {
            "origin": [_num(c) for c in fp.origin],
            "normal": [_num(c) for c in fp.normal],
            "extent_u": _num(fp.extent_u),
            "extent_v": _num(fp.extent_v),
        },
    })
    for u in log.utterances:
        rec = {
            "kind": "utterance",
            "t_start_ms": u.t_start_ms,
            "t_end_ms": u.t_end_ms,
            "actor": format_actor(u.actor),
            "text": u.text,
        }
        if u.level is not CognitiveLevel.UNCLASSIFIED or u.confidence:
            rec["level"] = u.level.value
            rec["confidence"] = u.confidence
        recs.append(rec)
    for e in log.events:
        recs.append({"kind": "event", "t_ms": e.t_ms, "actor": format_actor(e.actor), "code": str(e.code)})
    for g in log.gaze:
        recs.append({"kind": "gaze", "t_ms": g.t_ms, "head_pos": list(g.head_pos), "gaze_dir": list(g.gaze_dir)})
    return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in recs)


def write_session(log: SessionLog, path: Union[str, Path]) -> None:
    Path(path).write_text(serialize_session(log), encoding="utf-8")


# ------------------------------------------------------------- validation

def _timestamp_violations(log: SessionLog) -> List[Violation]:
    out = []
    dur = log.meta.duration_ms

    def check(idx: int, t: int, what: str) -> None:
        if not 0 <= t <= dur:
            out.append(Violation(idx, "timestamp_out_of_range", f"{what} t={t} outside [0, {dur}]"))

    for i, u in enumerate(log.utterances):
        check(i, u.t_start_ms, "utterance start")
        check(i, u.t_end_ms, "utterance end")
    for i, e in enumerate(log.events):
        check(i, e.t_ms, "event")
    for i, g in enumerate(log.gaze):
        check(i, g.t_ms, "gaze")
    return out


def validate(log: SessionLog) -> ValidationReport:
    """Collect every invariant violation; never raises."""
    v: List[Violation] = []
    meta, scene = log.meta, log.scene
    if not meta.session_id:
        v.append(Violation(0, "empty_session_id", "session_id is empty"))
    if meta.duration_ms < 0:
        v.append(Violation(0, "negative_duration", f"duration_ms={meta.duration_ms}"))
    v.extend(_timestamp_violations(log))

    for name, times in (
        ("utterances", [u.t_start_ms for u in log.utterances]),
        ("events", [e.t_ms for e in log.events]),
        ("gaze", [g.t_ms for g in log.gaze]),
    ):
        for i in range(1, len(times)):
            if times[i] < times[i - 1]:
                v.append(Violation(i, "unsorted_records", f"{name}[{i}] earlier than its predecessor"))

    ids = scene.student_ids
    seen = set()
    for i, s in enumerate(scene.students):
        if s.student_id in seen:
            v.append(Violation(i, "duplicate_student", f"student id {s.student_id!r} repeated"))
        seen.add(s.student_id)
        if not s.radius > 0:
            v.append(Violation(i, "bad_radius", f"radius {s.radius} for {s.student_id!r}"))
    fp = scene.floor_plane
    if not (fp.extent_u > 0 and fp.extent_v > 0):
        v.append(Violation(0, "bad_extent", f"extents {fp.extent_u}x{fp.extent_v}"))
    if abs(math.sqrt(sum(c * c for c in fp.normal)) - 1.0) > UNIT_TOLERANCE:
        v.append(Violation(0, "bad_plane_normal", "floor_plane.normal is not unit length"))

    known = set(ids)
    for i, u in enumerate(log.utterances):
        if u.t_start_ms > u.t_end_ms:
            v.append(Violation(i, "bad_interval", f"utterance starts after it ends ({u.t_start_ms} > {u.t_end_ms})"))
        if not u.text and u.level is not CognitiveLevel.UNCLASSIFIED:
            v.append(Violation(i, "empty_text_labeled", "empty utterance carries a level"))
        if not 0.0 <= u.confidence <= 1.0:
            v.append(Violation(i, "bad_confidence", f"confidence {u.confidence}"))
        if not u.actor.is_teacher and u.actor.student_id not in known:
            v.append(Violation(i, "unknown_student", f"utterance by unknown student {u.actor.student_id!r}"))
    for i, e in enumerate(log.events):
        if e.actor.kind != e.code.actor_kind:
            v.append(Violation(i, "actor_code_mismatch", f"{e.actor.kind} actor with code {e.code}"))
        if not e.actor.is_teacher and e.actor.student_id not in known:
            v.append(Violation(i, "unknown_student", f"event by unknown student {e.actor.student_id!r}"))
    for i, g in enumerate(log.gaze):
        n = math.sqrt(sum(c * c for c in g.gaze_dir))
        if abs(n - 1.0) > UNIT_TOLERANCE:
            v.append(Violation(i, "gaze_not_unit", f"|gaze_dir| = {n:.6f}"))
    return ValidationReport(tuple(v))


# --------------------------------------------------------------- sidecars

def parse_labels(data: dict) -> LabelSidecar:
    entries = tuple(
        LabelEntry(
            utterance_index=_int(e["utterance_index"], "utterance_index"),
            level=CognitiveLevel.parse(e["level"]),
            confidence=float(e.get("confidence", 1.0)),
        )
        for e in data.get("entries", [])
    )
    for e in entries:
        if not 0.0 <= e.confidence <= 1.0:
            raise ValueError(f"confidence {e.confidence} outside [0, 1]")
    return LabelSidecar(entries, data.get("session_id"))


def load_labels(path: Union[str, Path]) -> LabelSidecar:
    return parse_labels(json.loads(Path(path).read_text(encoding="utf-8")))


def parse_embeddings(data: dict) -> EmbeddingSidecar:
    dim = _int(data["dim"], "dim")
    if dim <= 0:
        raise ValueError("dim must be positive")
    entries = []
    seen = set()
    for e in data.get("entries", []):
        idx = _int(e["utterance_index"], "utterance_index")
        if idx in seen:
            raise DuplicateIndex(f"embedding index {idx} repeated")
        seen.add(idx)
        vec = tuple(float(x) for x in e["vector"])
        if len(vec) != dim:
            raise ValueError(f"vector for index {idx} has length {len(vec)}, expected {dim}")
        entries.append(EmbeddingEntry(idx, vec))
    return EmbeddingSidecar(dim, tuple(entries), data.get("session_id"))


def load_embeddings(path: Union[str, Path]) -> EmbeddingSidecar:
    return parse_embeddings(json.loads(Path(path).read_text(encoding="utf-8")))


def apply_sidecar_labels(log: SessionLog, labels: LabelSidecar) -> SessionLog:
    n = len(log.utterances)
    seen = set()
    for e in labels.entries:
        if not 0 <= e.utterance_index < n:
            raise IndexOutOfRange(f"label index {e.utterance_index} outside 0..{n - 1}")
        if e.utterance_index in seen:
            raise DuplicateIndex(f"label index {e.utterance_index} repeated")
        seen.add(e.utterance_index)
    if not labels.entries:
        return log
    utts = list(log.utterances)
    for e in labels.entries:
        utts[e.utterance_index] = dataclasses.replace(
            utts[e.utterance_index], level=e.level, confidence=e.confidence
        )
    return dataclasses.replace(log, utterances=tuple(utts))


def match_sidecars(logs: Sequence[SessionLog], sidecars: Sequence[Any], what: str) -> List[Any]:
    """Pair sidecars with sessions by ``session_id``.

    A sidecar without ``session_id`` is accepted only when the corpus holds a
    single session. Returns one entry (or ``None``) per log.
    """
    out: List[Any] = [None] * len(logs)
    index = {log.meta.session_id: i for i, log in enumerate(logs)}
    for sc in sidecars:
        if sc.session_id is None:
            if len(logs) != 1:
                raise ValueError(f"{what} sidecar lacks session_id but the corpus has {len(logs)} sessions")
            i = 0
        elif sc.session_id in index:
            i = index[sc.session_id]
        else:
            raise ValueError(f"{what} sidecar refers to unknown session {sc.session_id!r}")
        if out[i] is not None:
            raise ValueError(f"two {what} sidecars for session {logs[i].meta.session_id!r}")
        out[i] = sc
    return out

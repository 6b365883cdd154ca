"""Domain types shared across the pipeline, plus the behavior-code grammar.

Behavior codes have the form ``{prefix}_{move}_{suffix}``: ``t`` codes carry a
Bloom level suffix (``t_focal_understanding``), ``s`` codes carry an
intensity suffix (``s_creative_high``). Moves are an open vocabulary.

All types are frozen; list-valued fields are stored as tuples.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Optional, Tuple

from .errors import BadSuffixForActor, MalformedCode, UnknownActorPrefix

Vec3 = Tuple[float, float, float]


class CognitiveLevel(enum.Enum):
    REMEMBERING = "Remembering"
    UNDERSTANDING = "Understanding"
    APPLYING = "Applying"
    ANALYZING = "Analyzing"
    EVALUATING = "Evaluating"
    CREATING = "Creating"
    UNCLASSIFIED = "Unclassified"

    @property
    def rank(self) -> int:
        """0..5 for the Bloom levels (low to high), -1 for Unclassified."""
        return _LEVEL_RANK[self]

    @classmethod
    def parse(cls, name: str) -> "CognitiveLevel":
        try:
            return _LEVEL_BY_NAME[name.strip().lower()]
        except (KeyError, AttributeError):
            raise ValueError(f"unknown cognitive level {name!r}") from None

    def __lt__(self, other: "CognitiveLevel") -> bool:
        if not isinstance(other, CognitiveLevel):
            return NotImplemented
        return self.rank < other.rank


BLOOM_LEVELS: Tuple[CognitiveLevel, ...] = tuple(CognitiveLevel)[:6]
LOWER_ORDER = (CognitiveLevel.REMEMBERING, CognitiveLevel.UNDERSTANDING)
_LEVEL_RANK = {lvl: i for i, lvl in enumerate(BLOOM_LEVELS)}
_LEVEL_RANK[CognitiveLevel.UNCLASSIFIED] = -1
_LEVEL_BY_NAME = {lvl.value.lower(): lvl for lvl in CognitiveLevel}


class ClassLevel(enum.Enum):
    """Students' concentration level configured for the scenario."""

    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


class InteractionType(enum.Enum):
    TT = "TT"
    TS = "TS"
    ST = "ST"
    SS = "SS"

    @property
    def arrow(self) -> str:
        return f"{self.value[0]}→{self.value[1]}"


@dataclass(frozen=True)
class Actor:
    """The teacher (``student_id is None``) or one identified student."""

    student_id: Optional[str] = None

    @property
    def is_teacher(self) -> bool:
        return self.student_id is None

    @property
    def kind(self) -> str:
        return "T" if self.student_id is None else "S"

    @classmethod
    def student(cls, student_id: str) -> "Actor":
        if not student_id:
            raise ValueError("student_id must be non-empty")
        return cls(student_id)


TEACHER = Actor()


def interaction_type(prev: Actor, next: Actor) -> InteractionType:
    return InteractionType(prev.kind + next.kind)


STUDENT_SUFFIXES = ("low", "high")
_MOVE_RE = re.compile(r"^[a-z][a-z0-9]*$")


@dataclass(frozen=True)
class BehaviorCode:
    actor_prefix: str
    move: str
    level_suffix: str

    def __str__(self) -> str:
        return f"{self.actor_prefix}_{self.move}_{self.level_suffix}"

    @property
    def actor_kind(self) -> str:
        return self.actor_prefix.upper()

    @property
    def level(self) -> Optional[CognitiveLevel]:
        """Bloom level of a teacher code, ``None`` for student codes."""
        if self.actor_prefix == "t":
            return CognitiveLevel.parse(self.level_suffix)
        return None


def parse_behavior_code(raw: str) -> BehaviorCode:
    text = raw.strip().lower()
    parts = text.split("_")
    if len(parts) != 3 or not all(parts):
        raise MalformedCode(f"expected prefix_move_suffix, got {raw!r}")
    prefix, move, suffix = parts
    if prefix not in ("t", "s"):
        raise UnknownActorPrefix(f"unknown actor prefix {prefix!r} in {raw!r}")
    if not _MOVE_RE.match(move):
        raise MalformedCode(f"move {move!r} is not a lowercase identifier")
    if prefix == "t":
        if suffix not in (lvl.value.lower() for lvl in BLOOM_LEVELS):
            raise BadSuffixForActor(f"teacher code needs a Bloom level suffix, got {suffix!r}")
    elif suffix not in STUDENT_SUFFIXES:
        raise BadSuffixForActor(f"student code needs low/high suffix, got {suffix!r}")
    return BehaviorCode(prefix, move, suffix)


def format_behavior_code(code: BehaviorCode) -> str:
    return str(code)


@dataclass(frozen=True)
class SessionMeta:
    session_id: str
    subject: str
    duration_ms: int
    learning_objectives: Tuple[str, ...] = ()
    class_level: ClassLevel = ClassLevel.MEDIUM


@dataclass(frozen=True)
class Utterance:
    t_start_ms: int
    t_end_ms: int
    actor: Actor
    text: str
    level: CognitiveLevel = CognitiveLevel.UNCLASSIFIED
    confidence: float = 0.0

    @property
    def duration_ms(self) -> int:
        return self.t_end_ms - self.t_start_ms


@dataclass(frozen=True)
class BehaviorEvent:
    t_ms: int
    actor: Actor
    code: BehaviorCode


@dataclass(frozen=True)
class GazeFrame:
    t_ms: int
    head_pos: Vec3
    gaze_dir: Vec3


@dataclass(frozen=True)
class StudentAvatar:
    student_id: str
    center: Vec3
    radius: float


@dataclass(frozen=True)
class FloorPlane:
    """Rectangle centred on ``origin``; extents are full side lengths."""

    origin: Vec3 = (0.0, 0.0, 0.0)
    normal: Vec3 = (0.0, 1.0, 0.0)
    extent_u: float = 10.0
    extent_v: float = 10.0


@dataclass(frozen=True)
class SceneLayout:
    students: Tuple[StudentAvatar, ...] = ()
    floor_plane: FloorPlane = field(default_factory=FloorPlane)

    @property
    def student_ids(self) -> Tuple[str, ...]:
        return tuple(s.student_id for s in self.students)


@dataclass(frozen=True)
class SessionLog:
    meta: SessionMeta
    utterances: Tuple[Utterance, ...] = ()
    events: Tuple[BehaviorEvent, ...] = ()
    gaze: Tuple[GazeFrame, ...] = ()
    scene: SceneLayout = field(default_factory=SceneLayout)

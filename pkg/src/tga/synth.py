"""Seeded synthetic sessions with planted structure.

Events follow a first-order Markov chain at one-second spacing. Every event
gets a template utterance of matching level, and gaze frames follow a
script of looks at named students (or away) with Gaussian angular jitter on
the tangent plane of the target direction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigError, InvalidStochasticMatrix
from .ingest import _parse_scene
from .model import (
    TEACHER,
    Actor,
    BehaviorCode,
    BehaviorEvent,
    ClassLevel,
    FloorPlane,
    GazeFrame,
    SceneLayout,
    SessionLog,
    SessionMeta,
    StudentAvatar,
    Utterance,
    parse_behavior_code,
)

EVENT_SPACING_MS = 1000
UTTERANCE_MS = 800
AWAY_DIR = (0.0, 1.0, 0.0)

DEFAULT_TEMPLATES: Dict[str, Tuple[str, ...]] = {
    "remembering": ("What is the name of this shape?", "Who can recall the rule we learned?"),
    "understanding": ("Can you explain why that works?", "Describe what happens next."),
    "applying": ("Solve this problem using the formula.", "How would you use this at home?"),
    "analyzing": ("Compare these two answers.", "What evidence supports that idea?"),
    "evaluating": ("Do you agree with her answer?", "Justify your choice."),
    "creating": ("Design a new experiment for this.", "Propose another way to do it."),
    "low": ("I don't know.", "Maybe it is five."),
    "high": ("I think we should compare both methods first.", "What if we design it differently?"),
}


@dataclass(frozen=True)
class GazeSegment:
    student_id: Optional[str]
    duration_ms: int
    jitter_deg: float = 0.0


@dataclass
class SynthConfig:
    codes: List[BehaviorCode]
    transition: np.ndarray
    n_events: int
    initial_distribution: Optional[np.ndarray] = None
    scene: SceneLayout = field(default_factory=SceneLayout)
    utterance_templates: Dict[str, Sequence[str]] = field(default_factory=lambda: dict(DEFAULT_TEMPLATES))
    gaze_script: List[GazeSegment] = field(default_factory=list)
    gaze_loop: bool = True
    sample_rate_hz: float = 60.0
    head_pos: Tuple[float, float, float] = (0.0, 1.6, 0.0)
    seed: int = 0
    session_id: str = "synth"
    subject: str = "science"
    learning_objectives: Tuple[str, ...] = ("synthetic objective",)
    class_level: ClassLevel = ClassLevel.MEDIUM

    def __post_init__(self) -> None:
        k = len(self.codes)
        self.transition = np.asarray(self.transition, dtype=float)
        if self.initial_distribution is None:
            self.initial_distribution = np.full(k, 1.0 / k) if k else np.zeros(0)
        self.initial_distribution = np.asarray(self.initial_distribution, dtype=float)
        self.check()

    def check(self) -> None:
        k = len(self.codes)
        if k == 0:
            raise ConfigError("need at least one code")
        if self.transition.shape != (k, k):
            raise InvalidStochasticMatrix(f"transition must be {k}x{k}, got {self.transition.shape}")
        if (self.transition < 0).any() or np.any(np.abs(self.transition.sum(axis=1) - 1.0) > 1e-9):
            raise InvalidStochasticMatrix("transition rows must be non-negative and sum to 1")
        init = self.initial_distribution
        if init.shape != (k,) or (init < 0).any() or abs(init.sum() - 1.0) > 1e-9:
            raise InvalidStochasticMatrix("initial_distribution must be a probability vector")
        if self.n_events <= 0:
            raise ConfigError("n_events must be positive")
        if self.sample_rate_hz <= 0:
            raise ConfigError("sample_rate_hz must be positive")
        ids = set(self.scene.student_ids)
        if any(c.actor_prefix == "s" for c in self.codes) and not ids:
            raise ConfigError("student codes need at least one student in the scene")
        for seg in self.gaze_script:
            if seg.student_id is not None and seg.student_id not in ids:
                raise ConfigError(f"gaze script names unknown student {seg.student_id!r}")
            if seg.duration_ms <= 0 or seg.jitter_deg < 0:
                raise ConfigError("gaze segments need positive duration and non-negative jitter")

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        try:
            scene = _parse_scene(data["scene"]) if "scene" in data else default_scene()
            templates = data.get("utterance_templates")
            return cls(
                codes=[parse_behavior_code(c) for c in data["codes"]],
                transition=np.array(data["transition"], dtype=float),
                n_events=int(data["n_events"]),
                initial_distribution=(
                    np.array(data["initial_distribution"], dtype=float)
                    if "initial_distribution" in data else None
                ),
                scene=scene,
                utterance_templates=(
                    {k.lower(): tuple(v) for k, v in templates.items()} if templates else dict(DEFAULT_TEMPLATES)
                ),
                gaze_script=[
                    GazeSegment(g.get("student_id"), int(g["duration_ms"]), float(g.get("jitter_deg", 0.0)))
                    for g in data.get("gaze_script", [])
                ],
                gaze_loop=bool(data.get("gaze_loop", True)),
                sample_rate_hz=float(data.get("sample_rate_hz", 60.0)),
                head_pos=tuple(data.get("head_pos", (0.0, 1.6, 0.0))),
                seed=int(data.get("seed", 0)),
                session_id=str(data.get("session_id", "synth")),
                subject=str(data.get("subject", "science")),
                learning_objectives=tuple(data.get("learning_objectives", ("synthetic objective",))),
                class_level=ClassLevel(data.get("class_level", "medium")),
            )
        except InvalidStochasticMatrix:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad synth config: {exc}") from None


def load_config(path: Union[str, Path]) -> SynthConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return SynthConfig.from_dict(data)


def default_scene(n_students: int = 4) -> SceneLayout:
    """Students on an arc in front of the teacher, 3 m away at head height."""
    students = []
    for k in range(n_students):
        ang = math.radians(-30 + 60 * k / max(1, n_students - 1))
        students.append(StudentAvatar(f"s{k + 1}", (3.0 * math.sin(ang), 1.2, 3.0 * math.cos(ang)), 0.35))
    return SceneLayout(tuple(students), FloorPlane((0.0, 0.0, 2.0), (0.0, 1.0, 0.0), 8.0, 8.0))


def sample_chain(cfg: SynthConfig, rng: np.random.Generator) -> List[int]:
    k = len(cfg.codes)
    cum = np.cumsum(cfg.transition, axis=1)
    cum[:, -1] = 1.0
    u = rng.random(cfg.n_events)
    state = int(np.searchsorted(np.cumsum(cfg.initial_distribution), u[0], side="right"))
    state = min(state, k - 1)
    out = [state]
    for x in u[1:]:
        state = min(int(np.searchsorted(cum[state], x, side="right")), k - 1)
        out.append(state)
    return out


def jittered_directions(base: np.ndarray, jitter_deg: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` unit vectors around ``base`` with N(0, jitter) offsets on its tangent plane."""
    base = base / np.linalg.norm(base)
    if jitter_deg == 0 or n == 0:
        return np.tile(base, (n, 1))
    ref = np.array([1.0, 0.0, 0.0]) if abs(base[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(base, ref)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(base, e1)
    offs = rng.normal(0.0, math.tan(math.radians(jitter_deg)), size=(n, 2))
    d = base[None, :] + offs[:, :1] * e1[None, :] + offs[:, 1:] * e2[None, :]
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def _gaze_frames(cfg: SynthConfig, until_ms: int, rng: np.random.Generator) -> List[GazeFrame]:
    if not cfg.gaze_script:
        return []
    centers = {s.student_id: np.array(s.center, dtype=float) for s in cfg.scene.students}
    head = np.array(cfg.head_pos, dtype=float)
    period = 1000.0 / cfg.sample_rate_hz
    frames: List[GazeFrame] = []
    k = 0
    seg_start = 0
    seg_i = 0
    while True:
        seg = cfg.gaze_script[seg_i]
        seg_end = seg_start + seg.duration_ms
        times = []
        while True:
            tk = int(round(k * period))
            if tk >= seg_end or tk > until_ms:
                break
            times.append(tk)
            k += 1
        base = centers[seg.student_id] - head if seg.student_id is not None else np.array(AWAY_DIR)
        dirs = jittered_directions(base, seg.jitter_deg, len(times), rng)
        frames.extend(GazeFrame(tk, tuple(cfg.head_pos), tuple(float(x) for x in d)) for tk, d in zip(times, dirs))
        seg_start = seg_end
        seg_i += 1
        if seg_i == len(cfg.gaze_script):
            if not cfg.gaze_loop:
                break
            seg_i = 0
        if seg_start > until_ms:
            break
    return frames


def generate_session(cfg: SynthConfig, seed: Optional[int] = None, session_id: Optional[str] = None) -> SessionLog:
    cfg.check()
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    states = sample_chain(cfg, rng)
    students = cfg.scene.student_ids

    events = []
    utterances = []
    for i, s in enumerate(states):
        code = cfg.codes[s]
        t = i * EVENT_SPACING_MS
        actor = TEACHER if code.actor_prefix == "t" else Actor.student(students[int(rng.integers(len(students)))])
        events.append(BehaviorEvent(t, actor, code))
        templates = cfg.utterance_templates.get(code.level_suffix)
        if templates:
            text = templates[int(rng.integers(len(templates)))]
            utterances.append(Utterance(t, t + UTTERANCE_MS, actor, text))

    last_event = (len(states) - 1) * EVENT_SPACING_MS + UTTERANCE_MS
    gaze = _gaze_frames(cfg, last_event, rng)
    duration = max([last_event] + [g.t_ms for g in gaze])
    meta = SessionMeta(
        session_id=session_id or cfg.session_id,
        subject=cfg.subject,
        duration_ms=duration,
        learning_objectives=tuple(cfg.learning_objectives),
        class_level=cfg.class_level,
    )
    return SessionLog(meta, tuple(utterances), tuple(events), tuple(gaze), cfg.scene)


def planted_config(
    p: float = 0.9,
    n_events: int = 1000,
    codes: Sequence[str] = ("t_focal_understanding", "t_funnel_analyzing", "s_disagreement_low", "s_creative_high"),
    seed: int = 0,
) -> SynthConfig:
    """Uniform chain over ``codes`` except row 0, which moves to code 1 with probability ``p``."""
    k = len(codes)
    T = np.full((k, k), 1.0 / k)
    T[0] = (1.0 - p) / (k - 1)
    T[0, 1] = p
    return SynthConfig(
        codes=[parse_behavior_code(c) for c in codes],
        transition=T,
        n_events=n_events,
        scene=default_scene(),
        utterance_templates={},
        seed=seed,
    )

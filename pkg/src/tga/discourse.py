"""Cognitive-level labelling of utterances, level distributions and the
semantic-space projection of utterance embeddings."""

from __future__ import annotations

import dataclasses
import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DimensionMismatch, TooFewPoints
from .ingest import EmbeddingSidecar
from .model import BLOOM_LEVELS, LOWER_ORDER, CognitiveLevel, SessionLog
from .tsne import TsneConfig, tsne

ACTOR_KINDS = ("teacher", "student")
RECALL_ORIENTED_SHARE = 0.5


@dataclass(frozen=True)
class LexiconRule:
    pattern: str
    level: CognitiveLevel


class Lexicon:
    """Ordered phrase rules; the first rule whose phrase occurs wins.

    Phrases match case-insensitively on word boundaries, so ``"list"`` does
    not fire inside ``"listen"``.
    """

    default_level = CognitiveLevel.UNCLASSIFIED

    def __init__(self, rules: Sequence[LexiconRule]):
        for r in rules:
            if not r.pattern.strip():
                raise ValueError("lexicon patterns must be non-empty")
        self.rules: Tuple[LexiconRule, ...] = tuple(rules)
        self._compiled = [
            (re.compile(r"(?<!\w)" + re.escape(r.pattern.strip().lower()) + r"(?!\w)"), r.level)
            for r in self.rules
        ]

    @classmethod
    def from_dict(cls, data: dict) -> "Lexicon":
        return cls([LexiconRule(r["pattern"], CognitiveLevel.parse(r["level"])) for r in data["rules"]])

    @classmethod
    def load(cls, path: Optional[Union[str, Path]] = None) -> "Lexicon":
        if path is None:
            text = resources.files("tga").joinpath("data/bloom_lexicon.json").read_text(encoding="utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        return cls.from_dict(json.loads(text))

    def match(self, text: str) -> Optional[LexiconRule]:
        lowered = " ".join(text.lower().split())
        for rule, (rx, _) in zip(self.rules, self._compiled):
            if rx.search(lowered):
                return rule
        return None


def default_lexicon() -> Lexicon:
    return Lexicon.load()


def classify_utterance(text: str, lex: Lexicon) -> Tuple[CognitiveLevel, float]:
    if not text.strip():
        return CognitiveLevel.UNCLASSIFIED, 0.0
    rule = lex.match(text)
    if rule is None:
        return CognitiveLevel.UNCLASSIFIED, 0.0
    return rule.level, 1.0


def label_session(log: SessionLog, lex: Lexicon) -> SessionLog:
    """Lexicon-label every utterance; sidecar labels are applied afterwards."""
    utts = []
    for u in log.utterances:
        level, conf = classify_utterance(u.text, lex)
        utts.append(dataclasses.replace(u, level=level, confidence=conf))
    return dataclasses.replace(log, utterances=tuple(utts))


@dataclass
class CognitiveDistribution:
    counts: Dict[str, Dict[CognitiveLevel, int]]
    totals: Dict[str, int]

    @property
    def total(self) -> int:
        return sum(self.totals.values())

    def lower_order_share(self, actor: str = "teacher") -> Optional[float]:
        """Share of Remembering+Understanding among classified utterances."""
        c = self.counts[actor]
        classified = sum(c[lvl] for lvl in BLOOM_LEVELS)
        if classified == 0:
            return None
        return sum(c[lvl] for lvl in LOWER_ORDER) / classified

    def recall_oriented(self, actor: str = "teacher") -> bool:
        share = self.lower_order_share(actor)
        return share is not None and share > RECALL_ORIENTED_SHARE

    def to_dict(self) -> dict:
        return {
            "levels": [lvl.value for lvl in CognitiveLevel],
            "counts": {a: {lvl.value: self.counts[a][lvl] for lvl in CognitiveLevel} for a in ACTOR_KINDS},
            "totals": dict(self.totals),
            "total": self.total,
            "lower_order_share": self.lower_order_share("teacher"),
            "recall_oriented": self.recall_oriented("teacher"),
        }


def cognitive_distribution(logs: Sequence[SessionLog]) -> CognitiveDistribution:
    counts = {a: {lvl: 0 for lvl in CognitiveLevel} for a in ACTOR_KINDS}
    for log in logs:
        for u in log.utterances:
            counts["teacher" if u.actor.is_teacher else "student"][u.level] += 1
    totals = {a: sum(counts[a].values()) for a in ACTOR_KINDS}
    return CognitiveDistribution(counts, totals)


@dataclass(frozen=True)
class ProjectedPoint:
    utterance_index: int
    x: float
    y: float
    level: CognitiveLevel
    actor_kind: str
    session_id: Optional[str] = None


@dataclass
class Projection2D:
    points: List[ProjectedPoint]
    kl_initial: float
    kl_final: float

    def to_dict(self) -> dict:
        return {
            "kl_initial": self.kl_initial,
            "kl_final": self.kl_final,
            "points": [
                {
                    "session_id": p.session_id,
                    "utterance_index": p.utterance_index,
                    "x": p.x,
                    "y": p.y,
                    "level": p.level.value,
                    "actor_kind": p.actor_kind,
                }
                for p in self.points
            ],
        }


PointLabel = Tuple[CognitiveLevel, str]


def tsne_project(
    embeddings: EmbeddingSidecar,
    labels: Dict[int, PointLabel],
    cfg: TsneConfig = TsneConfig(),
) -> Projection2D:
    """Project one sidecar's vectors; ``labels`` maps utterance index to (level, actor kind)."""
    return tsne_project_many([(None, embeddings, labels)], cfg)


def tsne_project_many(
    items: Sequence[Tuple[Optional[str], EmbeddingSidecar, Dict[int, PointLabel]]],
    cfg: TsneConfig = TsneConfig(),
) -> Projection2D:
    """Joint projection of several sessions' embeddings into one space."""
    keys = []
    vectors = []
    dim = None
    for session_id, emb, labels in items:
        if dim is None:
            dim = emb.dim
        elif emb.dim != dim:
            raise DimensionMismatch(f"embedding dims differ: {dim} vs {emb.dim}")
        for e in emb.entries:
            if len(e.vector) != emb.dim:
                raise DimensionMismatch(f"vector {e.utterance_index} has length {len(e.vector)}")
            level, kind = labels.get(e.utterance_index, (CognitiveLevel.UNCLASSIFIED, "teacher"))
            keys.append((session_id, e.utterance_index, level, kind))
            vectors.append(e.vector)
    if len(vectors) < 4:
        raise TooFewPoints(f"t-SNE needs at least 4 points, got {len(vectors)}")
    res = tsne(np.array(vectors, dtype=float), cfg)
    points = [
        ProjectedPoint(idx, float(x), float(y), level, kind, sid)
        for (sid, idx, level, kind), (x, y) in zip(keys, res.embedding)
    ]
    return Projection2D(points, res.kl_initial, res.kl_final)

"""Assembling the dashboard bundle and rule-based feedback.

The bundle is a plain JSON-ready dict so that feedback rules can address
any metric by a dotted path (``equity.teacher_speaking_ratio``).
"""

from __future__ import annotations

import json
import math
import operator
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from .discourse import CognitiveDistribution, Projection2D
from .errors import BadMetricPath, NothingToReport
from .model import SessionLog
from .sequence import LsaSummary, flatten

SCHEMA_VERSION = "tga.report/1"
TEMPLATE_SOURCE = "engine-authored template"


@dataclass(frozen=True)
class FeedbackRule:
    id: str
    metric: str
    comparator: str
    threshold: float
    template: str

    @classmethod
    def from_dict(cls, d: dict) -> "FeedbackRule":
        rule = cls(str(d["id"]), str(d["metric"]), str(d["comparator"]), float(d["threshold"]), str(d["template"]))
        if rule.comparator not in _COMPARATORS:
            raise ValueError(f"rule {rule.id!r}: unknown comparator {rule.comparator!r}")
        return rule


_COMPARATORS = {
    ">": operator.gt, "<": operator.lt,
    ">=": operator.ge, "<=": operator.le,
    "≥": operator.ge, "≤": operator.le,
}

DEFAULT_RULES = (
    FeedbackRule(
        "teacher_talk_dominance", "equity.teacher_speaking_ratio", ">", 0.7,
        "Teacher talk dominance: the teacher spoke {value:.1%} of the time (threshold {threshold:.0%}). "
        "Consider leaving more room for student talk.",
    ),
    FeedbackRule(
        "attention_imbalance", "gaze.gini", ">", 0.4,
        "Attention imbalance: gaze dwell across students has Gini {value:.3f} (threshold {threshold:.2f}). "
        "Some students received much less visual attention than others.",
    ),
    FeedbackRule(
        "recall_oriented_questions", "cognitive.lower_order_share", ">", 0.7,
        "Recall-oriented discourse: {value:.1%} of classified teacher utterances were Remembering or "
        "Understanding (threshold {threshold:.0%}). Try adding analysis, evaluation or creation prompts.",
    ),
)


def load_rules(path: Union[str, Path]) -> List[FeedbackRule]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict):
        data = data["rules"]
    return [FeedbackRule.from_dict(d) for d in data]


def round1(x: float) -> float:
    return float(Decimal(repr(x)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def _clean(obj: Any) -> Any:
    """Make ``obj`` JSON-ready: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def corpus_summary(logs: Sequence[SessionLog]) -> dict:
    sessions = len(logs)
    turns = sum(len(l.utterances) for l in logs)
    mean = round1(turns / sessions) if sessions else 0.0
    return {
        "sessions": sessions,
        "turns": turns,
        "events": sum(len(l.events) for l in logs),
        "gaze_frames": sum(len(l.gaze) for l in logs),
        "mean_turns_per_session": mean,
        "summary_line": f"{sessions:,} sessions, {turns:,} turns, mean {mean:.1f} turns/session",
    }


def equity_indicators(logs: Sequence[SessionLog]) -> dict:
    teacher_ms = 0
    student_ms = 0
    turns: Dict[str, int] = {}
    for log in logs:
        for sid in log.scene.student_ids:
            turns.setdefault(sid, 0)
        for u in log.utterances:
            if u.actor.is_teacher:
                teacher_ms += u.duration_ms
            else:
                student_ms += u.duration_ms
                turns[u.actor.student_id] = turns.get(u.actor.student_id, 0) + 1
    total = teacher_ms + student_ms
    counts = [turns[k] for k in sorted(turns)]
    turn_gini = None
    if len(counts) >= 2 and sum(counts) > 0:
        x = np.array(counts, dtype=float)
        turn_gini = float(np.abs(x[:, None] - x[None, :]).sum() / (2.0 * len(x) ** 2 * x.mean()))
    return {
        "teacher_talk_ms": teacher_ms,
        "student_talk_ms": student_ms,
        "teacher_speaking_ratio": teacher_ms / total if total > 0 else None,
        "student_turns": {k: turns[k] for k in sorted(turns)},
        "student_turn_gini": turn_gini,
    }


def session_meta(log: SessionLog) -> dict:
    m = log.meta
    return {
        "session_id": m.session_id,
        "subject": m.subject,
        "duration_ms": m.duration_ms,
        "learning_objectives": list(m.learning_objectives),
        "class_level": m.class_level.value,
    }


def lsa_section(lsa: LsaSummary) -> dict:
    return {
        "lag": lsa.matrix.lag,
        "vocabulary": [str(c) for c in lsa.matrix.codes],
        "n_transitions": lsa.matrix.N,
        "n_cells": len(flatten(lsa.results)),
        "z_threshold": lsa.z_threshold,
        "n_significant": len(lsa.significant),
        "significant": [r.to_dict() for r in lsa.significant],
        "breakdown": lsa.breakdown.to_dict() if lsa.breakdown else None,
        "zscore_distribution": {t.value: f.to_dict() for t, f in lsa.distribution.items()},
        "network": lsa.network.to_dict() if lsa.network else None,
    }


def summarize(
    logs: Sequence[SessionLog],
    cognitive: Optional[CognitiveDistribution] = None,
    projection: Optional[Projection2D] = None,
    lsa: Optional[LsaSummary] = None,
    gaze: Optional[dict] = None,
    rules: Sequence[FeedbackRule] = DEFAULT_RULES,
) -> dict:
    """Build the report bundle; ``gaze`` is the section produced by the pipeline."""
    if not logs and cognitive is None and projection is None and lsa is None and gaze is None:
        raise NothingToReport("no sessions and no analyses supplied")
    bundle = {
        "schema_version": SCHEMA_VERSION,
        "corpus": corpus_summary(logs),
        "sessions": [session_meta(l) for l in logs],
        "cognitive": cognitive.to_dict() if cognitive is not None else None,
        "projection": projection.to_dict() if projection is not None else None,
        "lsa": lsa_section(lsa) if lsa is not None else None,
        "gaze": gaze,
        "equity": equity_indicators(logs),
        "feedback": [],
    }
    bundle = _clean(bundle)
    bundle["feedback"] = apply_feedback(bundle, rules)
    return bundle


def resolve_metric(bundle: dict, path: str) -> Optional[float]:
    """Value at a dotted path; ``None`` when an optional section is absent."""
    node: Any = bundle
    for part in path.split("."):
        if node is None:
            return None
        if not isinstance(node, dict) or part not in node:
            raise BadMetricPath(f"metric path {path!r} does not resolve (at {part!r})")
        node = node[part]
    if node is None:
        return None
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise BadMetricPath(f"metric path {path!r} is not numeric")
    return float(node)


def baseline_message(bundle: dict) -> dict:
    c = bundle["corpus"]
    parts = [c["summary_line"]]
    lsa = bundle.get("lsa")
    if lsa:
        parts.append(f"{lsa['n_significant']} significant transitions at z ≥ {lsa['z_threshold']}")
    gz = bundle.get("gaze")
    if gz and gz.get("entropy") is not None:
        parts.append(f"attention entropy {gz['entropy']:.3f}")
    return {"id": "summary", "text": "; ".join(parts) + ".", "source": TEMPLATE_SOURCE}


def apply_feedback(bundle: dict, rules: Sequence[FeedbackRule]) -> List[dict]:
    values = [resolve_metric(bundle, r.metric) for r in rules]  # validate every path first
    messages = [baseline_message(bundle)]
    for rule, value in zip(rules, values):
        if value is None:
            continue
        if _COMPARATORS[rule.comparator](value, rule.threshold):
            messages.append({
                "id": rule.id,
                "metric": rule.metric,
                "value": value,
                "threshold": rule.threshold,
                "text": rule.template.format(value=value, threshold=rule.threshold),
                "source": TEMPLATE_SOURCE,
            })
    return messages


def dumps(obj: Any) -> str:
    """Canonical JSON used for every exported file."""
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n"

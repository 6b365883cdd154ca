"""Lag-sequential analysis over behavior-code sequences.

Transitions are counted within sessions only. Each cell of the lag table is
scored with the Allison-Liker adjusted residual

    z = (O - E) / sqrt(E * (1 - row/N) * (1 - col/N)),   E = row * col / N

and cells with a zero denominator get ``z = None``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import EmptyMatrix
from .model import Actor, BehaviorCode, InteractionType, SessionLog

DEFAULT_Z_THRESHOLD = 1.96
DEFAULT_NETWORK_Z = 10.0


@dataclass(frozen=True)
class CodeSequence:
    session_id: str
    items: Tuple[Tuple[int, BehaviorCode, Actor], ...] = ()

    @property
    def codes(self) -> List[BehaviorCode]:
        return [c for _, c, _ in self.items]


@dataclass
class TransitionMatrix:
    codes: Tuple[BehaviorCode, ...]
    counts: np.ndarray
    lag: int = 1

    @property
    def N(self) -> int:
        return int(self.counts.sum())

    def count(self, a: BehaviorCode, b: BehaviorCode) -> int:
        idx = {c: i for i, c in enumerate(self.codes)}
        if a not in idx or b not in idx:
            return 0
        return int(self.counts[idx[a], idx[b]])


@dataclass(frozen=True)
class LagResult:
    antecedent: BehaviorCode
    consequent: BehaviorCode
    observed: int
    expected: float
    z: Optional[float]
    itype: InteractionType

    def to_dict(self) -> dict:
        return {
            "antecedent": str(self.antecedent),
            "consequent": str(self.consequent),
            "observed": self.observed,
            "expected": self.expected,
            "z": self.z,
            "itype": self.itype.value,
        }


def code_itype(a: BehaviorCode, b: BehaviorCode) -> InteractionType:
    return InteractionType(a.actor_kind + b.actor_kind)


def extract_sequences(logs: Sequence[SessionLog]) -> List[CodeSequence]:
    return [
        CodeSequence(log.meta.session_id, tuple((e.t_ms, e.code, e.actor) for e in log.events))
        for log in logs
    ]


def transition_counts(seqs: Iterable[CodeSequence], lag: int = 1) -> TransitionMatrix:
    if lag < 1:
        raise ValueError("lag must be >= 1")
    pairs: Dict[Tuple[BehaviorCode, BehaviorCode], int] = {}
    for seq in seqs:
        codes = seq.codes
        for a, b in zip(codes, codes[lag:]):
            pairs[a, b] = pairs.get((a, b), 0) + 1
    vocab = sorted({c for pair in pairs for c in pair}, key=str)
    idx = {c: i for i, c in enumerate(vocab)}
    counts = np.zeros((len(vocab), len(vocab)), dtype=np.int64)
    for (a, b), n in pairs.items():
        counts[idx[a], idx[b]] = n
    return TransitionMatrix(tuple(vocab), counts, lag)


def allison_liker_z(m: TransitionMatrix) -> List[List[LagResult]]:
    N = m.N
    if N < 2:
        raise EmptyMatrix(f"need at least 2 transitions, got {N}")
    rows = m.counts.sum(axis=1)
    cols = m.counts.sum(axis=0)
    out = []
    for i, a in enumerate(m.codes):
        row = []
        for j, b in enumerate(m.codes):
            o = int(m.counts[i, j])
            e = rows[i] * cols[j] / N
            var = e * (1.0 - rows[i] / N) * (1.0 - cols[j] / N)
            z = (o - e) / math.sqrt(var) if var > 0 else None
            row.append(LagResult(a, b, o, float(e), None if z is None else float(z), code_itype(a, b)))
        out.append(row)
    return out


def flatten(results: Iterable) -> List[LagResult]:
    """Accept either the matrix from :func:`allison_liker_z` or a flat list."""
    flat: List[LagResult] = []
    for item in results:
        if isinstance(item, LagResult):
            flat.append(item)
        else:
            flat.extend(item)
    return flat


def _pattern_key(r: LagResult):
    return (-r.z, str(r.antecedent), str(r.consequent))


def significant_patterns(results, z_threshold: float = DEFAULT_Z_THRESHOLD) -> List[LagResult]:
    if not math.isfinite(z_threshold):
        raise ValueError("z_threshold must be finite")
    hits = [r for r in flatten(results) if r.z is not None and r.z >= z_threshold]
    return sorted(hits, key=_pattern_key)


def pct(count: int, denominator: int) -> float:
    """100*count/denominator rounded half-up to one decimal (0.0 when empty)."""
    if denominator <= 0:
        return 0.0
    q = Decimal(100 * count) / Decimal(denominator)
    return float(q.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


@dataclass
class TypeBreakdown:
    counts: Dict[InteractionType, int]
    percentages: Dict[InteractionType, float]
    denominator: int
    policy: str

    def lines(self, types: Optional[Sequence[InteractionType]] = None) -> List[str]:
        """Display lines such as ``T→T: 69 patterns; 34.8%``."""
        types = list(InteractionType) if types is None else types
        return [f"{t.arrow}: {self.counts[t]} patterns; {self.percentages[t]:.1f}%" for t in types]

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "denominator": self.denominator,
            "counts": {t.value: self.counts[t] for t in InteractionType},
            "percentages": {t.value: self.percentages[t] for t in InteractionType},
            "lines": self.lines(),
        }


POLICIES = ("all_significant", "sum_of_reported_types", "explicit")


def breakdown_from_counts(
    counts: Dict[InteractionType, int], denominator: int, policy: str = "explicit"
) -> TypeBreakdown:
    full = {t: int(counts.get(t, 0)) for t in InteractionType}
    return TypeBreakdown(full, {t: pct(full[t], denominator) for t in InteractionType}, denominator, policy)


def type_breakdown(
    patterns: Sequence[LagResult],
    denominator_policy: str = "all_significant",
    reported_types: Optional[Sequence[InteractionType]] = None,
    denominator: Optional[int] = None,
) -> TypeBreakdown:
    """Count patterns per interaction type and express them as percentages.

    ``all_significant`` divides by ``len(patterns)``; ``sum_of_reported_types``
    divides by the summed counts of ``reported_types`` (all four by default);
    ``explicit`` divides by the caller-supplied ``denominator``.
    """
    if denominator_policy not in POLICIES:
        raise ValueError(f"unknown denominator policy {denominator_policy!r}")
    counts = {t: 0 for t in InteractionType}
    for p in patterns:
        counts[p.itype] += 1
    if denominator_policy == "all_significant":
        denom = len(patterns)
    elif denominator_policy == "sum_of_reported_types":
        denom = sum(counts[t] for t in (reported_types or list(InteractionType)))
    else:
        if denominator is None:
            raise ValueError("explicit policy needs a denominator")
        denom = denominator
    return breakdown_from_counts(counts, denom, denominator_policy)


@dataclass(frozen=True)
class FiveNumber:
    min: float
    q1: float
    median: float
    q3: float
    max: float
    count: int

    def to_dict(self) -> dict:
        return {"min": self.min, "q1": self.q1, "median": self.median, "q3": self.q3,
                "max": self.max, "count": self.count}


def zscore_distribution(results) -> Dict[InteractionType, FiveNumber]:
    """Five-number summary of defined z-scores per interaction type (linear quantiles)."""
    groups: Dict[InteractionType, List[float]] = {t: [] for t in InteractionType}
    for r in flatten(results):
        if r.z is not None:
            groups[r.itype].append(r.z)
    out = {}
    for t in InteractionType:
        zs = groups[t]
        if not zs:
            continue
        q = np.quantile(np.array(zs), [0.0, 0.25, 0.5, 0.75, 1.0], method="linear")
        out[t] = FiveNumber(*(float(v) for v in q), count=len(zs))
    return out


@dataclass
class SequentialNetwork:
    nodes: List[Tuple[BehaviorCode, str]]
    edges: List[LagResult]
    z_min: float

    def out_degree(self, code: BehaviorCode) -> int:
        return sum(1 for e in self.edges if e.antecedent == code)

    def to_dict(self) -> dict:
        return {
            "z_min": self.z_min,
            "nodes": [{"code": str(c), "actor_kind": k} for c, k in self.nodes],
            "edges": [e.to_dict() for e in self.edges],
        }


def build_network(patterns, z_min: float = DEFAULT_NETWORK_Z) -> SequentialNetwork:
    """Keep every edge with ``z >= z_min``; nodes are the surviving endpoints."""
    if not math.isfinite(z_min):
        raise ValueError("z_min must be finite")
    edges = sorted((p for p in flatten(patterns) if p.z is not None and p.z >= z_min), key=_pattern_key)
    codes = {c for e in edges for c in (e.antecedent, e.consequent)}
    nodes = [(c, c.actor_kind) for c in sorted(codes, key=str)]
    return SequentialNetwork(nodes, edges, z_min)


@dataclass
class LsaSummary:
    matrix: TransitionMatrix
    results: List[List[LagResult]] = field(default_factory=list)
    significant: List[LagResult] = field(default_factory=list)
    breakdown: Optional[TypeBreakdown] = None
    distribution: Dict[InteractionType, FiveNumber] = field(default_factory=dict)
    network: Optional[SequentialNetwork] = None
    z_threshold: float = DEFAULT_Z_THRESHOLD


def run_lsa(
    logs: Sequence[SessionLog],
    lag: int = 1,
    z_threshold: float = DEFAULT_Z_THRESHOLD,
    network_z: float = DEFAULT_NETWORK_Z,
    denominator_policy: str = "all_significant",
) -> LsaSummary:
    m = transition_counts(extract_sequences(logs), lag)
    results = allison_liker_z(m)
    sig = significant_patterns(results, z_threshold)
    return LsaSummary(
        matrix=m,
        results=results,
        significant=sig,
        breakdown=type_breakdown(sig, denominator_policy),
        distribution=zscore_distribution(sig),
        network=build_network(sig, network_z),
        z_threshold=z_threshold,
    )


def lsa_to_dict(s: LsaSummary) -> dict:
    """Payload of ``lsa.json``."""
    return {
        "lag": s.matrix.lag,
        "vocabulary": [str(c) for c in s.matrix.codes],
        "n_transitions": s.matrix.N,
        "counts": s.matrix.counts.tolist(),
        "cells": [r.to_dict() for r in flatten(s.results)],
        "z_threshold": s.z_threshold,
        "significant": [r.to_dict() for r in s.significant],
        "breakdown": s.breakdown.to_dict() if s.breakdown else None,
        "zscore_distribution": {t.value: f.to_dict() for t, f in s.distribution.items()},
        "network": s.network.to_dict() if s.network else None,
    }

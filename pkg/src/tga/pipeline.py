"""Corpus-level orchestration: files in, report artefacts out."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from . import gaze as gz
from .discourse import Lexicon, cognitive_distribution, label_session, tsne_project_many
from .errors import EmptyMatrix, IngestError
from .html import render_html
from .ingest import (
    ValidationReport,
    Violation,
    apply_sidecar_labels,
    load_embeddings,
    load_labels,
    load_session,
    match_sidecars,
    validate,
)
from .model import SessionLog
from .report import DEFAULT_RULES, FeedbackRule, dumps, summarize
from .sequence import DEFAULT_NETWORK_Z, DEFAULT_Z_THRESHOLD, lsa_to_dict, run_lsa
from .tsne import TsneConfig


@dataclass(frozen=True)
class AnalyzeOptions:
    z_threshold: float = DEFAULT_Z_THRESHOLD
    network_z: float = DEFAULT_NETWORK_Z
    lag: int = 1
    denominator_policy: str = "all_significant"
    dispersion_deg: float = gz.DEFAULT_DISPERSION_DEG
    min_fixation_ms: int = gz.DEFAULT_MIN_FIXATION_MS
    cell_size_m: float = gz.DEFAULT_CELL_SIZE_M
    sigma_m: float = gz.DEFAULT_SIGMA_M
    heatmap_mode: str = "samples"
    lexicon: Optional[str] = None
    seed: int = 0
    perplexity: float = 30.0
    tsne_iterations: int = 1000


@dataclass
class SessionResult:
    path: str
    log: Optional[SessionLog] = None
    report: ValidationReport = field(default_factory=ValidationReport)
    gaze: Optional[dict] = None  # report-level per-session summary
    gaze_detail: Optional[dict] = None  # fixation/saccade lists for gaze.json


def worker_count(requested: Optional[int] = None) -> int:
    n = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get("TGA_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return max(1, n)


def read_and_validate(path: str) -> Tuple[Optional[SessionLog], ValidationReport]:
    try:
        log = load_session(path, strict=False)
    except IngestError as exc:
        line = getattr(exc, "line", 0)
        return None, ValidationReport((Violation(line, "parse_error", f"{type(exc).__name__}: {exc}"),))
    return log, validate(log)


def session_gaze(log: SessionLog, opts: AnalyzeOptions) -> Tuple[dict, dict]:
    ids = log.scene.student_ids
    samples = gz.resolve_many(log.gaze, log.scene)
    dwell = gz.summarize_dwell(samples, ids)
    fix, sac = gz.idt_fixations(
        log.gaze, opts.dispersion_deg, opts.min_fixation_ms, targets=[s.target for s in samples]
    )
    windows = [(f.t_start_ms, f.t_end_ms) for f in fix] if opts.heatmap_mode == "fixations" else None
    hm = gz.heatmap(samples, log.scene.floor_plane, opts.cell_size_m, opts.sigma_m, windows)
    fp = log.scene.floor_plane
    summary = {
        "session_id": log.meta.session_id,
        "n_frames": len(log.gaze),
        "dwell_ms": dict(sorted(dwell.dwell_ms.items())),
        "off_target_ms": dwell.off_target_ms,
        "span_ms": dwell.span_ms,
        "entropy": dwell.entropy_norm,
        "gini": dwell.gini,
        "n_fixations": len(fix),
        "mean_fixation_ms": sum(f.duration_ms for f in fix) / len(fix) if fix else None,
        "n_saccades": len(sac),
        "mean_saccade_deg": sum(s.amplitude_deg for s in sac) / len(sac) if sac else None,
        "heatmap_mode": opts.heatmap_mode,
        "heatmap": hm.to_dict(),
    }
    detail = {
        "session_id": log.meta.session_id,
        "floor_plane": {
            "origin": list(fp.origin), "normal": list(fp.normal),
            "extent_u": fp.extent_u, "extent_v": fp.extent_v,
        },
        "fixations": [f.to_dict() for f in fix],
        "saccades": [s.to_dict() for s in sac],
    }
    return summary, detail


def process_file(path: str, opts: AnalyzeOptions) -> SessionResult:
    """Per-session work unit; runs in a worker process."""
    log, report = read_and_validate(path)
    res = SessionResult(path, log, report)
    if log is None or report.fatal:
        return res
    res.log = label_session(log, Lexicon.load(opts.lexicon))
    if log.gaze:
        res.gaze, res.gaze_detail = session_gaze(res.log, opts)
    return res


def process_files(paths: Sequence[str], opts: AnalyzeOptions, workers: int = 1) -> List[SessionResult]:
    if workers <= 1 or len(paths) <= 1:
        return [process_file(p, opts) for p in paths]
    with ProcessPoolExecutor(max_workers=min(workers, len(paths))) as pool:
        # map preserves input order, so the reduction below is worker-count independent
        return list(pool.map(process_file, paths, [opts] * len(paths)))


def corpus_gaze(results: Sequence[SessionResult]) -> Optional[dict]:
    sessions = [r.gaze for r in results if r.gaze is not None]
    if not sessions:
        return None
    dwell: Dict[str, int] = {}
    off = 0
    for s in sessions:
        for k, v in s["dwell_ms"].items():
            dwell[k] = dwell.get(k, 0) + v
        off += s["off_target_ms"]
    dwell = dict(sorted(dwell.items()))
    entropy = gini = None
    if len(dwell) >= 2:
        entropy = gz.attention_entropy(dwell)
        if sum(dwell.values()) > 0:
            gini = gz.gaze_gini(dwell)
    n_fix = sum(s["n_fixations"] for s in sessions)
    n_sac = sum(s["n_saccades"] for s in sessions)
    return {
        "dwell_ms": dwell,
        "off_target_ms": off,
        "entropy": entropy,
        "gini": gini,
        "n_fixations": n_fix,
        "n_saccades": n_sac,
        "sessions": sessions,
    }


@dataclass
class CorpusResult:
    bundle: dict
    lsa: Optional[dict]
    gaze: Optional[dict]


def analyze_logs(
    logs: Sequence[SessionLog],
    results: Optional[Sequence[SessionResult]] = None,
    opts: AnalyzeOptions = AnalyzeOptions(),
    labels: Sequence = (),
    embeddings: Sequence = (),
    rules: Sequence[FeedbackRule] = DEFAULT_RULES,
) -> CorpusResult:
    logs = list(logs)
    for i, sc in enumerate(match_sidecars(logs, labels, "labels")):
        if sc is not None:
            logs[i] = apply_sidecar_labels(logs[i], sc)

    projection = None
    emb = match_sidecars(logs, embeddings, "embeddings")
    if any(e is not None for e in emb):
        items = []
        for log, e in zip(logs, emb):
            if e is None:
                continue
            point_labels = {
                i: (u.level, "teacher" if u.actor.is_teacher else "student")
                for i, u in enumerate(log.utterances)
            }
            items.append((log.meta.session_id, e, point_labels))
        cfg = TsneConfig(perplexity=opts.perplexity, iterations=opts.tsne_iterations, seed=opts.seed)
        projection = tsne_project_many(items, cfg)

    try:
        lsa = run_lsa(logs, opts.lag, opts.z_threshold, opts.network_z, opts.denominator_policy)
    except EmptyMatrix:
        lsa = None

    gaze = corpus_gaze(results or [])
    bundle = summarize(logs, cognitive_distribution(logs), projection, lsa, gaze, rules)
    gaze_export = None
    if gaze is not None:
        details = {r.gaze_detail["session_id"]: r.gaze_detail for r in results if r.gaze_detail}
        gaze_export = {
            "dwell_ms": gaze["dwell_ms"],
            "off_target_ms": gaze["off_target_ms"],
            "entropy": gaze["entropy"],
            "gini": gaze["gini"],
            "sessions": [dict(s, **details.get(s["session_id"], {})) for s in gaze["sessions"]],
        }
    return CorpusResult(bundle, lsa_to_dict(lsa) if lsa is not None else None, gaze_export)


def write_outputs(result: CorpusResult, out_dir: Path) -> List[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    files = [
        ("report.json", dumps(result.bundle)),
        ("report.html", render_html(result.bundle)),
    ]
    if result.lsa is not None:
        files.append(("lsa.json", dumps(result.lsa)))
    if result.gaze is not None:
        files.append(("gaze.json", dumps(result.gaze)))
    for name, text in files:
        p = out_dir / name
        p.write_text(text, encoding="utf-8")
        written.append(p)
    return written


def load_sidecars(label_paths: Sequence[str], embedding_paths: Sequence[str]):
    return [load_labels(p) for p in label_paths], [load_embeddings(p) for p in embedding_paths]

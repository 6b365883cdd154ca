"""``tga`` command line: validate, analyze, synth.

Exit codes: 0 success, 1 validation failure, 2 usage error, 3 analysis error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import gaze as gz
from .errors import ConfigError, TgaError
from .ingest import serialize_session
from .pipeline import (
    AnalyzeOptions,
    analyze_logs,
    load_sidecars,
    process_files,
    read_and_validate,
    worker_count,
    write_outputs,
)
from .report import DEFAULT_RULES, load_rules
from .sequence import DEFAULT_NETWORK_Z, DEFAULT_Z_THRESHOLD, POLICIES
from .synth import generate_session, load_config

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_ANALYSIS = 0, 1, 2, 3

log = logging.getLogger("tga")


class UsageError(Exception):
    pass


def _fail(args: argparse.Namespace, code: int, exc: BaseException) -> int:
    if getattr(args, "json_errors", False):
        err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
        sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
    else:
        sys.stderr.write(f"tga: error: {type(exc).__name__}: {exc}\n")
    return code


def cmd_validate(args: argparse.Namespace) -> int:
    if not args.paths:
        raise UsageError("validate needs at least one session file")
    status = EXIT_OK
    for path in args.paths:
        if not Path(path).is_file():
            raise UsageError(f"no such file: {path}")
        _, report = read_and_validate(path)
        sys.stdout.write(json.dumps({"path": path, **report.to_dict()}, sort_keys=True) + "\n")
        if report.fatal:
            status = EXIT_INVALID
    return status


def cmd_analyze(args: argparse.Namespace) -> int:
    if not args.paths:
        raise UsageError("analyze needs at least one session file")
    for p in args.paths:
        if not Path(p).is_file():
            raise UsageError(f"no such file: {p}")
    if args.heatmap_mode not in ("samples", "fixations"):
        raise UsageError("--heatmap-mode must be 'samples' or 'fixations'")
    opts = AnalyzeOptions(
        z_threshold=args.z_threshold,
        network_z=args.network_z,
        lag=args.lag,
        denominator_policy=args.denominator_policy,
        dispersion_deg=args.dispersion_deg,
        min_fixation_ms=args.min_fixation_ms,
        cell_size_m=args.cell_size,
        sigma_m=args.sigma,
        heatmap_mode=args.heatmap_mode,
        lexicon=args.lexicon,
        seed=args.seed,
        perplexity=args.perplexity,
        tsne_iterations=args.tsne_iterations,
    )
    results = process_files(list(args.paths), opts, worker_count(args.workers))
    bad = [r for r in results if r.report.fatal]
    if bad:
        for r in bad:
            sys.stdout.write(json.dumps({"path": r.path, **r.report.to_dict()}, sort_keys=True) + "\n")
        return _fail(args, EXIT_INVALID, TgaError(f"{len(bad)} session file(s) failed validation"))

    try:
        rules = load_rules(args.rules) if args.rules else DEFAULT_RULES
        labels, embeddings = load_sidecars(args.labels, args.embeddings)
    except (OSError, ValueError, KeyError, TgaError) as exc:
        return _fail(args, EXIT_USAGE, exc)

    try:
        corpus = analyze_logs([r.log for r in results], results, opts, labels, embeddings, rules)
    except (TgaError, ValueError) as exc:
        return _fail(args, EXIT_ANALYSIS, exc)
    try:
        written = write_outputs(corpus, Path(args.out))
    except OSError as exc:
        return _fail(args, EXIT_ANALYSIS, exc)
    for p in written:
        log.info("wrote %s", p)
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        return _fail(args, EXIT_USAGE, exc)
    seed = cfg.seed if args.seed is None else args.seed
    out = Path(args.out)
    n = args.sessions
    try:
        if n == 1 and out.suffix == ".jsonl":
            out.parent.mkdir(parents=True, exist_ok=True)
            targets = [(out, cfg.session_id, seed)]
        else:
            out.mkdir(parents=True, exist_ok=True)
            if n == 1:
                targets = [(out / f"{cfg.session_id}.session.jsonl", cfg.session_id, seed)]
            else:
                targets = [
                    (out / f"{cfg.session_id}-{i + 1:03d}.session.jsonl", f"{cfg.session_id}-{i + 1:03d}", seed + i)
                    for i in range(n)
                ]
        for path, sid, s in targets:
            path.write_text(serialize_session(generate_session(cfg, seed=s, session_id=sid)), encoding="utf-8")
            log.info("wrote %s", path)
    except OSError as exc:
        return _fail(args, EXIT_ANALYSIS, exc)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tga", description="Teaching-simulation multimodal analytics.")
    p.add_argument("--json-errors", action="store_true", help="write errors as JSON to stderr")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command")

    v = sub.add_parser("validate", help="check session files against the log invariants")
    v.add_argument("paths", nargs="*")
    v.set_defaults(func=cmd_validate)

    a = sub.add_parser("analyze", help="analyse a corpus of session files and write the report")
    a.add_argument("paths", nargs="*")
    a.add_argument("--out", default="./out")
    a.add_argument("--labels", action="append", default=[], help="label sidecar (repeatable)")
    a.add_argument("--embeddings", action="append", default=[], help="embedding sidecar (repeatable)")
    a.add_argument("--z-threshold", type=float, default=DEFAULT_Z_THRESHOLD)
    a.add_argument("--network-z", type=float, default=DEFAULT_NETWORK_Z)
    a.add_argument("--lag", type=int, default=1)
    a.add_argument("--denominator-policy", choices=[x for x in POLICIES if x != "explicit"],
                   default="all_significant")
    a.add_argument("--dispersion-deg", type=float, default=gz.DEFAULT_DISPERSION_DEG)
    a.add_argument("--min-fixation-ms", type=int, default=gz.DEFAULT_MIN_FIXATION_MS)
    a.add_argument("--cell-size", type=float, default=gz.DEFAULT_CELL_SIZE_M, help="heatmap cell size (m)")
    a.add_argument("--sigma", type=float, default=gz.DEFAULT_SIGMA_M, help="heatmap splat sigma (m)")
    a.add_argument("--heatmap-mode", default="samples", help="samples | fixations")
    a.add_argument("--lexicon", default=None, help="replacement bloom_lexicon.json")
    a.add_argument("--rules", default=None, help="feedback rules.json")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--perplexity", type=float, default=30.0)
    a.add_argument("--tsne-iterations", type=int, default=1000)
    a.add_argument("--workers", type=int, default=None, help="worker processes (capped by TGA_THREADS)")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("synth", help="generate synthetic session files")
    s.add_argument("config")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", default="./out")
    s.add_argument("--sessions", type=int, default=1)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        return _fail(args, EXIT_USAGE, exc)


if __name__ == "__main__":
    sys.exit(main())

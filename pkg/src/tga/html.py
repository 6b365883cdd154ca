"""Self-contained HTML dashboard rendered from a report bundle.

Output is a pure function of the bundle: inline CSS and SVG only, fixed
number formatting, no clocks or randomness.
"""

from __future__ import annotations

import math
from html import escape
from typing import List, Optional

LEVEL_COLORS = {
    "Remembering": "#4e79a7",
    "Understanding": "#76b7b2",
    "Applying": "#59a14f",
    "Analyzing": "#edc948",
    "Evaluating": "#f28e2b",
    "Creating": "#e15759",
    "Unclassified": "#bab0ac",
}
ITYPE_COLORS = {"TT": "#d62728", "TS": "#ff7f0e", "ST": "#9467bd", "SS": "#1f77b4"}
ACTOR_COLORS = {"T": "#d62728", "S": "#1f77b4"}

# network edges: stroke width = EDGE_WIDTH_PER_Z * z (strictly proportional)
EDGE_WIDTH_PER_Z = 0.2

CSS = """
body{font-family:Helvetica,Arial,sans-serif;margin:24px;color:#222;background:#fafafa}
h1{font-size:22px;margin:0 0 4px} h2{font-size:16px;margin:0 0 8px}
.panel{background:#fff;border:1px solid #ddd;border-radius:6px;padding:12px 16px;margin:12px 0}
table{border-collapse:collapse;font-size:13px} td,th{border-bottom:1px solid #eee;padding:3px 8px;text-align:left}
.note{color:#777;font-size:12px} svg text{font-size:10px}
.msg{margin:6px 0;padding:6px 10px;border-left:4px solid #4e79a7;background:#f3f6fa}
.msg.rule{border-left-color:#e15759;background:#fdf2f2}
.heat{display:inline-block;margin:4px 10px 4px 0;vertical-align:top}
"""


def fmt(x: float, digits: int = 2) -> str:
    return f"{x:.{digits}f}"


def _svg(width: int, height: int, body: List[str], label: str) -> str:
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" role="img" aria-label="{escape(label)}">'
        + "".join(body) + "</svg>"
    )


def _panel(pid: str, title: str, inner: str) -> str:
    return f'<section class="panel" id="{pid}"><h2>{escape(title)}</h2>{inner}</section>\n'


def context_panel(b: dict) -> str:
    c = b["corpus"]
    rows = "".join(
        f"<tr><td>{escape(s['session_id'])}</td><td>{escape(s['subject'])}</td>"
        f"<td>{fmt(s['duration_ms'] / 1000, 1)} s</td><td>{escape('; '.join(s['learning_objectives']))}</td>"
        f"<td>{escape(s['class_level'])}</td></tr>"
        for s in b["sessions"]
    )
    table = (
        "<table><tr><th>Session</th><th>Subject</th><th>Duration</th><th>Learning objectives</th>"
        f"<th>Class level</th></tr>{rows}</table>"
    )
    return _panel("context", "Session context", f"<p>{escape(c['summary_line'])}</p>{table}")


def cognitive_panel(cog: dict) -> str:
    levels = cog["levels"]
    actors = ("teacher", "student")
    maxc = max([cog["counts"][a][lvl] for a in actors for lvl in levels] + [1])
    w, h, left, bottom, bar = 620, 220, 40, 40, 30
    step = (w - left - 10) / len(levels)
    body = [f'<line x1="{left}" y1="{h - bottom}" x2="{w - 10}" y2="{h - bottom}" stroke="#999"/>']
    for i, lvl in enumerate(levels):
        x0 = left + i * step + (step - 2 * bar) / 2
        for k, a in enumerate(actors):
            n = cog["counts"][a][lvl]
            bh = (h - bottom - 20) * n / maxc
            x = x0 + k * bar
            y = h - bottom - bh
            op = "1.0" if a == "teacher" else "0.55"
            body.append(
                f'<rect x="{fmt(x)}" y="{fmt(y)}" width="{bar - 2}" height="{fmt(bh)}" '
                f'fill="{LEVEL_COLORS[lvl]}" fill-opacity="{op}"><title>{a} {lvl}: {n}</title></rect>'
                f'<text x="{fmt(x + (bar - 2) / 2)}" y="{fmt(y - 3)}" text-anchor="middle">{n}</text>'
            )
        body.append(f'<text x="{fmt(x0 + bar)}" y="{h - bottom + 14}" text-anchor="middle">{lvl}</text>')
    body.append(f'<text x="{left}" y="{h - 6}">solid = teacher, faded = student</text>')
    share = cog.get("lower_order_share")
    note = ""
    if share is not None:
        note = f'<p class="note">Lower-order (Remembering+Understanding) share of teacher utterances: {fmt(share, 3)}'
        note += " (recall-oriented)</p>" if cog.get("recall_oriented") else "</p>"
    return _panel("cognitive", "Cognitive level distribution", _svg(w, h, body, "cognitive levels") + note)


def scatter_panel(proj: dict) -> str:
    pts = proj["points"]
    w = h = 420
    pad = 20
    xs = [p["x"] for p in pts] or [0.0]
    ys = [p["y"] for p in pts] or [0.0]
    xmin, xmax, ymin, ymax = min(xs), max(xs), min(ys), max(ys)
    sx = (w - 2 * pad) / ((xmax - xmin) or 1.0)
    sy = (h - 2 * pad) / ((ymax - ymin) or 1.0)
    body = [f'<rect x="0" y="0" width="{w}" height="{h}" fill="#fff" stroke="#eee"/>']
    for p in pts:
        cx = pad + (p["x"] - xmin) * sx
        cy = h - pad - (p["y"] - ymin) * sy
        color = LEVEL_COLORS[p["level"]]
        if p["actor_kind"] == "teacher":
            body.append(f'<circle cx="{fmt(cx)}" cy="{fmt(cy)}" r="3.5" fill="{color}"/>')
        else:
            body.append(f'<rect x="{fmt(cx - 3.5)}" y="{fmt(cy - 3.5)}" width="7" height="7" fill="{color}"/>')
    note = (
        f'<p class="note">Points are utterances (circle = teacher, square = student), coloured by level. '
        f'KL divergence {fmt(proj["kl_initial"], 4)} → {fmt(proj["kl_final"], 4)}.</p>'
    )
    return _panel("semantic", "Semantic space (t-SNE)", _svg(w, h, body, "semantic space") + note)


def edge_width(z: float) -> float:
    return EDGE_WIDTH_PER_Z * z


def network_svg(net: dict, size: int = 520) -> str:
    nodes = sorted(net["nodes"], key=lambda n: n["code"])
    c = size / 2
    r = size / 2 - 90
    pos = {}
    for i, n in enumerate(nodes):
        ang = 2 * math.pi * i / max(1, len(nodes)) - math.pi / 2
        pos[n["code"]] = (c + r * math.cos(ang), c + r * math.sin(ang))
    body = [
        '<defs>' + "".join(
            f'<marker id="arr-{t}" viewBox="0 0 10 10" refX="10" refY="5" markerWidth="6" markerHeight="6" '
            f'orient="auto-start-reverse"><path d="M0,0L10,5L0,10z" fill="{col}"/></marker>'
            for t, col in ITYPE_COLORS.items()
        ) + '</defs>'
    ]
    for e in net["edges"]:
        a, b = pos[e["antecedent"]], pos[e["consequent"]]
        col = ITYPE_COLORS[e["itype"]]
        width = fmt(edge_width(e["z"]), 3)
        tip = f'<title>{escape(e["antecedent"])} → {escape(e["consequent"])}: z={fmt(e["z"], 2)}</title>'
        if e["antecedent"] == e["consequent"]:
            dx, dy = a[0] - c, a[1] - c
            norm = math.hypot(dx, dy) or 1.0
            ox, oy = a[0] + 22 * dx / norm, a[1] + 22 * dy / norm
            body.append(
                f'<circle class="edge" cx="{fmt(ox)}" cy="{fmt(oy)}" r="14" fill="none" stroke="{col}" '
                f'stroke-opacity="0.7" stroke-width="{width}" data-z="{e["z"]!r}">{tip}</circle>'
            )
            continue
        dx, dy = b[0] - a[0], b[1] - a[1]
        d = math.hypot(dx, dy) or 1.0
        x2, y2 = b[0] - 9 * dx / d, b[1] - 9 * dy / d
        body.append(
            f'<line class="edge" x1="{fmt(a[0])}" y1="{fmt(a[1])}" x2="{fmt(x2)}" y2="{fmt(y2)}" stroke="{col}" '
            f'stroke-opacity="0.7" stroke-width="{width}" marker-end="url(#arr-{e["itype"]})" '
            f'data-z="{e["z"]!r}">{tip}</line>'
        )
    for n in nodes:
        x, y = pos[n["code"]]
        anchor = "start" if x >= c else "end"
        tx = x + (10 if x >= c else -10)
        body.append(
            f'<circle cx="{fmt(x)}" cy="{fmt(y)}" r="7" fill="{ACTOR_COLORS[n["actor_kind"]]}"/>'
            f'<text x="{fmt(tx)}" y="{fmt(y + 3)}" text-anchor="{anchor}">{escape(n["code"])}</text>'
        )
    return _svg(size, size, body, "sequential network")


def lsa_panel(lsa: dict) -> str:
    parts = [
        f"<p>{lsa['n_transitions']} transitions over {len(lsa['vocabulary'])} codes; "
        f"{lsa['n_significant']} significant patterns at z ≥ {lsa['z_threshold']}.</p>"
    ]
    bd = lsa.get("breakdown")
    if bd:
        parts.append(breakdown_html(bd))
    net = lsa.get("network")
    if net:
        parts.append(
            f'<p class="note">Network of transitions with z ≥ {net["z_min"]}: {len(net["edges"])} edges, '
            f'{len(net["nodes"])} nodes; stroke width = {EDGE_WIDTH_PER_Z} × z.</p>'
        )
        parts.append(network_svg(net))
    return _panel("lsa", "Sequential patterns (lag sequential analysis)", "".join(parts))


def breakdown_html(bd: dict) -> str:
    items = "".join(f"<li>{escape(line)}</li>" for line in bd["lines"])
    return (
        f'<ul class="breakdown">{items}</ul>'
        f'<p class="note">Percentages over {bd["denominator"]} patterns ({escape(bd["policy"])}).</p>'
    )


def boxplot_panel(dist: dict) -> str:
    types = [t for t in ("SS", "ST", "TS", "TT") if t in dist]
    if not types:
        return _panel("zdist", "Z-score distribution by interaction type", "<p>No significant patterns.</p>")
    lo = min(dist[t]["min"] for t in types)
    hi = max(dist[t]["max"] for t in types)
    lo, hi = min(lo, 0.0), hi if hi > lo else lo + 1.0
    w, h, top, bottom, left = 480, 240, 15, 30, 40
    scale = (h - top - bottom) / (hi - lo)

    def y(v: float) -> float:
        return h - bottom - (v - lo) * scale

    step = (w - left) / len(types)
    body = [f'<line x1="{left}" y1="{top}" x2="{left}" y2="{h - bottom}" stroke="#999"/>']
    for i, t in enumerate(types):
        s = dist[t]
        cx = left + step * (i + 0.5)
        col = ITYPE_COLORS[t]
        body.append(
            f'<line x1="{fmt(cx)}" y1="{fmt(y(s["min"]))}" x2="{fmt(cx)}" y2="{fmt(y(s["max"]))}" stroke="{col}"/>'
            f'<rect x="{fmt(cx - 18)}" y="{fmt(y(s["q3"]))}" width="36" height="{fmt(y(s["q1"]) - y(s["q3"]))}" '
            f'fill="{col}" fill-opacity="0.3" stroke="{col}"/>'
            f'<line x1="{fmt(cx - 18)}" y1="{fmt(y(s["median"]))}" x2="{fmt(cx + 18)}" y2="{fmt(y(s["median"]))}" '
            f'stroke="{col}" stroke-width="2"/>'
            f'<text x="{fmt(cx)}" y="{h - bottom + 14}" text-anchor="middle">{t[0]}→{t[1]} (n={s["count"]})</text>'
            f'<text x="{fmt(cx + 22)}" y="{fmt(y(s["median"]) + 3)}">{fmt(s["median"], 2)}</text>'
        )
    body.append(f'<text x="2" y="{fmt(y(hi) + 4)}">{fmt(hi, 1)}</text><text x="2" y="{fmt(y(lo))}">{fmt(lo, 1)}</text>')
    return _panel("zdist", "Z-score distribution by interaction type", _svg(w, h, body, "z-score box plots"))


def heatmap_svg(hm: dict, cell_px: int = 12) -> str:
    rows, cols = hm["rows"], hm["cols"]
    peak = max([v for row in hm["grid"] for v in row] + [0.0])
    body = [f'<rect x="0" y="0" width="{cols * cell_px}" height="{rows * cell_px}" fill="#fff" stroke="#ccc"/>']
    for r, row in enumerate(hm["grid"]):
        for col, v in enumerate(row):
            if v <= 0:
                continue
            # top of the image is +v on the plane
            body.append(
                f'<rect x="{col * cell_px}" y="{(rows - 1 - r) * cell_px}" width="{cell_px}" height="{cell_px}" '
                f'fill="#e15759" fill-opacity="{fmt(v / peak, 3)}"/>'
            )
    return _svg(cols * cell_px, rows * cell_px, body, "gaze heatmap")


def gaze_panel(gz: dict) -> str:
    parts = []
    entropy, gini = gz.get("entropy"), gz.get("gini")
    stats = []
    if entropy is not None:
        stats.append(f"attention entropy {fmt(entropy, 3)}")
    if gini is not None:
        stats.append(f"gaze Gini {fmt(gini, 3)}")
    stats.append(f"{gz['n_fixations']} fixations, {gz['n_saccades']} saccades")
    parts.append(f"<p>Corpus: {escape(', '.join(stats))}.</p>")
    dwell_rows = "".join(
        f"<tr><td>{escape(k)}</td><td>{fmt(v / 1000, 1)} s</td></tr>" for k, v in gz["dwell_ms"].items()
    )
    parts.append(
        f"<table><tr><th>Target</th><th>Dwell</th></tr>{dwell_rows}"
        f"<tr><td>off-target</td><td>{fmt(gz['off_target_ms'] / 1000, 1)} s</td></tr></table>"
    )
    for s in gz["sessions"]:
        if s.get("heatmap") is None:
            continue
        parts.append(
            f'<div class="heat"><div class="note">{escape(s["session_id"])} '
            f'({fmt(s["heatmap"]["total_mass"], 0)} floor samples)</div>{heatmap_svg(s["heatmap"])}</div>'
        )
    return _panel("gaze", "Gaze attention", "".join(parts))


def equity_panel(eq: dict) -> str:
    ratio = eq.get("teacher_speaking_ratio")
    head = f"<p>Teacher speaking-time ratio: {fmt(ratio, 3) if ratio is not None else 'n/a'}</p>"
    rows = "".join(f"<tr><td>{escape(k)}</td><td>{v}</td></tr>" for k, v in eq["student_turns"].items())
    return _panel("equity", "Equity indicators", head + f"<table><tr><th>Student</th><th>Turns</th></tr>{rows}</table>")


def feedback_panel(messages: List[dict]) -> str:
    items = "".join(
        f'<div class="msg{" rule" if m["id"] != "summary" else ""}" data-rule="{escape(m["id"])}">'
        f'{escape(m["text"])}</div>'
        for m in messages
    )
    return _panel("feedback", "Feedback", items + '<p class="note">Messages are engine-authored templates.</p>')


def render_html(bundle: dict, title: Optional[str] = None) -> str:
    title = title or "Teaching simulation analytics report"
    parts = [
        "<!DOCTYPE html>\n<html lang=\"en\"><head><meta charset=\"utf-8\">",
        f"<title>{escape(title)}</title><style>{CSS}</style></head><body>\n",
        f"<h1>{escape(title)}</h1><p class=\"note\">schema {escape(bundle['schema_version'])}</p>\n",
        context_panel(bundle),
    ]
    if bundle.get("cognitive"):
        parts.append(cognitive_panel(bundle["cognitive"]))
    if bundle.get("projection"):
        parts.append(scatter_panel(bundle["projection"]))
    if bundle.get("lsa"):
        parts.append(lsa_panel(bundle["lsa"]))
        parts.append(boxplot_panel(bundle["lsa"]["zscore_distribution"]))
    if bundle.get("gaze"):
        parts.append(gaze_panel(bundle["gaze"]))
    parts.append(equity_panel(bundle["equity"]))
    parts.append(feedback_panel(bundle["feedback"]))
    parts.append("</body></html>\n")
    return "".join(parts)

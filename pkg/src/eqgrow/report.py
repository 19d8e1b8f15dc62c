"""CSV, text-table, and SVG emission for analysis reports.

Every writer formats numbers with a fixed precision so identical inputs
produce byte-identical files.
"""

from __future__ import annotations

import csv

from .sweep import AnalysisReport

EXPONENT_COLUMNS = ("domain", "generator", "filter", "depth", "batch_size",
                    "seed", "b", "degenerate")


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def render_table(header, rows) -> str:
    cells = [list(map(str, header))] + [[_fmt(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = []
    for i, row in enumerate(cells):
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def write_exponents_csv(path, report: AnalysisReport):
    rows = [[r[c] for c in EXPONENT_COLUMNS] for r in report.exponents]
    write_csv(path, EXPONENT_COLUMNS, rows)


def write_domain_table_csv(path, report: AnalysisReport):
    header = ("domain", "n", "mean_b", "max_b", "count_b_gt_1", "frac_b_lt_0.1")
    rows = [[t[c] for c in header] for t in report.domain_table]
    write_csv(path, header, rows)


def write_window_winners_csv(path, report: AnalysisReport):
    header = ("window",) + tuple(report.models)
    rows = []
    for w in sorted(report.window_winners):
        counts = report.window_winners[w]
        rows.append([w] + [counts.get(m, 0) for m in report.models])
    write_csv(path, header, rows)


def write_histogram_csv(path, report: AnalysisReport):
    header = ("domain", "lo", "hi", "count")
    rows = [[h[c] for c in header] for h in report.histogram]
    write_csv(path, header, rows)


def domain_table_text(report: AnalysisReport) -> str:
    header = ("domain", "n", "mean_b", "max_b", "count_b_gt_1", "frac_b_lt_0.1")
    rows = [[t["domain"], t["n"], round(t["mean_b"], 3), round(t["max_b"], 3),
             t["count_b_gt_1"], round(t["frac_b_lt_0.1"], 3)]
            for t in report.domain_table]
    return render_table(header, rows)


def window_winners_text(report: AnalysisReport) -> str:
    header = ("window",) + tuple(report.models)
    rows = []
    for w in sorted(report.window_winners):
        counts = report.window_winners[w]
        rows.append([f"<= {w}"] + [counts.get(m, 0) for m in report.models])
    return render_table(header, rows)


# ---------------------------------------------------------------------------
# Minimal deterministic SVG plots
# ---------------------------------------------------------------------------

SVG_WIDTH, SVG_HEIGHT, SVG_MARGIN = 640, 480, 48
SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _scale(values, lo, hi, out_lo, out_hi):
    span = hi - lo if hi > lo else 1.0
    return [out_lo + (v - lo) / span * (out_hi - out_lo) for v in values]


def svg_line_plot(path, named_series, title: str = "", log_log: bool = False):
    """One polyline per (name, xs, ys) triple, with axis frame and labels."""
    import math

    def tx(vals):
        return [math.log10(v) for v in vals] if log_log else list(vals)

    all_x = [v for _, xs, _ in named_series for v in tx(xs)]
    all_y = [v for _, _, ys in named_series for v in tx(ys)]
    x_lo, x_hi = min(all_x), max(all_x)
    y_lo, y_hi = min(all_y), max(all_y)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" '
        f'height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">',
        f'<rect x="0" y="0" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>',
        f'<rect x="{SVG_MARGIN}" y="{SVG_MARGIN}" '
        f'width="{SVG_WIDTH - 2 * SVG_MARGIN}" height="{SVG_HEIGHT - 2 * SVG_MARGIN}" '
        f'fill="none" stroke="black"/>',
    ]
    if title:
        parts.append(f'<text x="{SVG_WIDTH // 2}" y="24" text-anchor="middle" '
                     f'font-size="14">{title}</text>')
    for i, (name, xs, ys) in enumerate(named_series):
        px = _scale(tx(xs), x_lo, x_hi, SVG_MARGIN, SVG_WIDTH - SVG_MARGIN)
        py = _scale(tx(ys), y_lo, y_hi, SVG_HEIGHT - SVG_MARGIN, SVG_MARGIN)
        points = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(px, py))
        color = SVG_COLORS[i % len(SVG_COLORS)]
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                     f'points="{points}"><title>{name}</title></polyline>')
    parts.append(f'<text x="{SVG_MARGIN}" y="{SVG_HEIGHT - 12}" font-size="11">'
                 f'{x_lo:.3g} .. {x_hi:.3g}</text>')
    parts.append(f'<text x="8" y="{SVG_MARGIN}" font-size="11">'
                 f'{y_lo:.3g} .. {y_hi:.3g}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def svg_scatter(path, xs, ys, title: str = "", diagonal: bool = True):
    """Predicted-vs-actual style scatter with an optional identity line."""
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    lo, hi = min(x_lo, y_lo), max(x_hi, y_hi)
    px = _scale(xs, lo, hi, SVG_MARGIN, SVG_WIDTH - SVG_MARGIN)
    py = _scale(ys, lo, hi, SVG_HEIGHT - SVG_MARGIN, SVG_MARGIN)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" '
        f'height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">',
        f'<rect x="0" y="0" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>',
    ]
    if title:
        parts.append(f'<text x="{SVG_WIDTH // 2}" y="24" text-anchor="middle" '
                     f'font-size="14">{title}</text>')
    if diagonal:
        d = _scale([lo, hi], lo, hi, SVG_MARGIN, SVG_WIDTH - SVG_MARGIN)
        e = _scale([lo, hi], lo, hi, SVG_HEIGHT - SVG_MARGIN, SVG_MARGIN)
        parts.append(f'<line x1="{d[0]:.2f}" y1="{e[0]:.2f}" x2="{d[1]:.2f}" '
                     f'y2="{e[1]:.2f}" stroke="#888" stroke-dasharray="4 3"/>')
    for x, y in zip(px, py):
        parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" '
                     f'fill="#1f77b4" fill-opacity="0.6"/>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")

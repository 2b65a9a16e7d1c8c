"""Deterministic SVG rendering of step survival curves.

Output is plain text SVG (diffable, byte-stable across runs): one step
path per curve, one '+' glyph per censoring mark (class ``censor-mark``)
and a legend when several curves are drawn.
"""

from __future__ import annotations

from pathlib import Path

from .survival import StepSurvivalCurve

WIDTH, HEIGHT = 640, 480
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 60, 20, 20, 45
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v):
    return f"{v:.2f}"


def _x_ticks(t_max):
    if t_max <= 0:
        return [0.0]
    raw = t_max / 5.0
    mag = 10 ** int(f"{raw:e}".split("e")[1])
    step = mag * min(s for s in (1, 2, 2.5, 5, 10) if s * mag >= raw)
    ticks = []
    v = 0.0
    while v <= t_max * (1 + 1e-9):
        ticks.append(v)
        v += step
    return ticks


def emit_curve_svg(curves, path, title=None):
    """Write step curves to an SVG file.

    `curves` is a list of (label, StepSurvivalCurve) pairs or a single
    curve; censoring marks are drawn as '+' glyphs at S(t).
    """
    if isinstance(curves, StepSurvivalCurve):
        curves = [("survival", curves)]
    curves = list(curves)
    if not curves:
        raise ValueError("need at least one curve")
    t_max = max(c.max_time for _, c in curves)
    t_max = t_max if t_max > 0 else 1.0
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def sx(t):
        return MARGIN_L + plot_w * t / t_max

    def sy(s):
        return MARGIN_T + plot_h * (1.0 - s)

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        lines.append(f'<text x="{WIDTH // 2}" y="15" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="13">{title}</text>')
    # axes
    lines.append(f'<path d="M {_fmt(MARGIN_L)} {_fmt(MARGIN_T)} V {_fmt(MARGIN_T + plot_h)} '
                 f'H {_fmt(MARGIN_L + plot_w)}" fill="none" stroke="black"/>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = sy(frac)
        lines.append(f'<line x1="{_fmt(MARGIN_L - 4)}" y1="{_fmt(y)}" '
                     f'x2="{_fmt(MARGIN_L)}" y2="{_fmt(y)}" stroke="black"/>')
        lines.append(f'<text x="{_fmt(MARGIN_L - 8)}" y="{_fmt(y + 4)}" '
                     f'text-anchor="end" font-family="sans-serif" '
                     f'font-size="11">{frac:.2f}</text>')
    for tick in _x_ticks(t_max):
        x = sx(tick)
        y0 = MARGIN_T + plot_h
        lines.append(f'<line x1="{_fmt(x)}" y1="{_fmt(y0)}" x2="{_fmt(x)}" '
                     f'y2="{_fmt(y0 + 4)}" stroke="black"/>')
        lines.append(f'<text x="{_fmt(x)}" y="{_fmt(y0 + 16)}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="11">{tick:g}</text>')
    lines.append(f'<text x="{_fmt(MARGIN_L + plot_w / 2)}" y="{_fmt(HEIGHT - 8)}" '
                 f'text-anchor="middle" font-family="sans-serif" font-size="12">'
                 f'time (days)</text>')
    lines.append(f'<text x="14" y="{_fmt(MARGIN_T + plot_h / 2)}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12" transform="rotate(-90 14 '
                 f'{_fmt(MARGIN_T + plot_h / 2)})">S(t)</text>')

    for ci, (label, curve) in enumerate(curves):
        color = PALETTE[ci % len(PALETTE)]
        parts = [f"M {_fmt(sx(0.0))} {_fmt(sy(1.0))}"]
        s_prev = 1.0
        for t, s in zip(curve.times, curve.survival):
            parts.append(f"H {_fmt(sx(min(t, t_max)))}")
            if s != s_prev:
                parts.append(f"V {_fmt(sy(s))}")
                s_prev = s
        parts.append(f"H {_fmt(sx(t_max))}")
        lines.append(f'<path d="{" ".join(parts)}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        for t in curve.censor_times:
            x, y = sx(min(float(t), t_max)), sy(float(curve.evaluate(t)))
            lines.append(f'<path class="censor-mark" d="M {_fmt(x - 4)} {_fmt(y)} '
                         f'h 8 M {_fmt(x)} {_fmt(y - 4)} v 8" stroke="{color}" '
                         f'stroke-width="1.2" fill="none"/>')

    if len(curves) > 1:
        for ci, (label, _) in enumerate(curves):
            color = PALETTE[ci % len(PALETTE)]
            y = MARGIN_T + 14 + 16 * ci
            x = MARGIN_L + plot_w - 130
            lines.append(f'<line x1="{_fmt(x)}" y1="{_fmt(y - 4)}" x2="{_fmt(x + 22)}" '
                         f'y2="{_fmt(y - 4)}" stroke="{color}" stroke-width="1.5"/>')
            lines.append(f'<text x="{_fmt(x + 28)}" y="{_fmt(y)}" '
                         f'font-family="sans-serif" font-size="11">{label}</text>')
    lines.append("</svg>")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return Path(path)

"""Minimal deterministic SVG line plots (no plotting library)."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 80, 170, 40, 60
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _num(x: float) -> str:
    return f"{x:.6g}"


def _transform(values, log: bool):
    v = np.asarray(values, dtype=float)
    if log:
        with np.errstate(divide="ignore", invalid="ignore"):
            v = np.where(v > 0, np.log10(np.where(v > 0, v, 1.0)), np.nan)
    return v


def _range(arrays) -> tuple[float, float]:
    finite = [a[np.isfinite(a)] for a in arrays]
    finite = [a for a in finite if a.size]
    if not finite:
        return 0.0, 1.0
    lo = min(float(a.min()) for a in finite)
    hi = max(float(a.max()) for a in finite)
    if hi - lo < 1e-300:
        pad = max(abs(lo) * 0.05, 1e-12)
        return lo - pad, hi + pad
    return lo, hi


def line_plot(series, title: str, xlabel: str, ylabel: str,
              logx: bool = False, logy: bool = False, markers: bool = False) -> str:
    """``series`` is a list of (label, xs, ys); returns the SVG document as text."""
    xs = [_transform(s[1], logx) for s in series]
    ys = [_transform(s[2], logy) for s in series]
    x0, x1 = _range(xs)
    y0, y1 = _range(ys)
    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def px(x):
        return MARGIN_L + (x - x0) / (x1 - x0) * pw

    def py(y):
        return MARGIN_T + ph - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for k in range(5):
        fx = x0 + (x1 - x0) * k / 4
        fy = y0 + (y1 - y0) * k / 4
        lx = _num(10**fx) if logx else _num(fx)
        ly = _num(10**fy) if logy else _num(fy)
        out.append(f'<text x="{px(fx):.2f}" y="{MARGIN_T + ph + 18}" text-anchor="middle">{lx}</text>')
        out.append(f'<text x="{MARGIN_L - 6}" y="{py(fy) + 4:.2f}" text-anchor="end">{ly}</text>')
    out.append(f'<text x="{MARGIN_L + pw / 2:.2f}" y="{HEIGHT - 15}" text-anchor="middle">'
               f'{escape(xlabel)}{" (log)" if logx else ""}</text>')
    out.append(f'<text x="18" y="{MARGIN_T + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {MARGIN_T + ph / 2:.2f})">'
               f'{escape(ylabel)}{" (log)" if logy else ""}</text>')
    for i, ((label, _, _), x, y) in enumerate(zip(series, xs, ys)):
        color = PALETTE[i % len(PALETTE)]
        ok = np.isfinite(x) & np.isfinite(y)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[ok], y[ok]))
        if pts:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
            if markers:
                for a, b in zip(x[ok], y[ok]):
                    out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="3" fill="{color}"/>')
        ly = MARGIN_T + 14 + 18 * i
        lx = WIDTH - MARGIN_R + 12
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plots(out_dir, ledgers, report=None) -> list[Path]:
    """Energy per viscosity; with a report, also zeta(T) and run-to-run gaps against nu."""
    out_dir = Path(out_dir)
    ledgers = sorted(ledgers, key=lambda led: -led.nu)
    files = []
    energy = [(f"nu={led.nu:g}", led.times, led.energy) for led in ledgers]
    p = out_dir / "energy.svg"
    p.write_text(line_plot(energy, "Kinetic energy", "t", "energy"))
    files.append(p)
    if report is not None:
        nus = np.asarray(report.nus, dtype=float)
        p = out_dir / "zeta.svg"
        p.write_text(line_plot([("zeta_nu(T)", nus, report.zeta_T)], "Cumulative dissipation at T",
                               "nu", "zeta", logx=True, logy=True, markers=True))
        files.append(p)
        finer = nus[1:]
        gaps = [("L2_t L2_x", finer, report.l2l2_gaps), ("C_t L2_x", finer, report.ctl2_gaps)]
        p = out_dir / "gaps.svg"
        p.write_text(line_plot(gaps, "Distance to the previous viscosity", "nu", "gap",
                               logx=True, logy=True, markers=True))
        files.append(p)
    return files


"""Output artifacts: CSV time series, SVG field plots and run manifests."""

from __future__ import annotations

import csv
import hashlib
import json
import platform
from pathlib import Path
from typing import Iterable
from xml.sax.saxutils import escape

import numpy as np

from . import __version__
from .dynamics import Record, RunResult
from .grid import Field

SERIES_HEADER = Record.FIELDS


def write_series(result: RunResult | Iterable[Record], path: str | Path) -> None:
    """One CSV row per diagnostic record; floats as shortest round-trip repr."""
    records = result.series if isinstance(result, RunResult) else list(result)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SERIES_HEADER)
        for rec in records:
            w.writerow([repr(float(x)) for x in rec.as_tuple()])


def read_series(path: str | Path) -> list[Record]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != SERIES_HEADER:
        raise ValueError(f"{path}: unexpected header {rows[0] if rows else None}")
    return [Record(*(float(x) for x in row)) for row in rows[1:]]


# -- SVG -------------------------------------------------------------------------

COLORMAPS = {
    # anchor colours, interpolated linearly in RGB
    "viridis": [(68, 1, 84), (59, 82, 139), (33, 145, 140), (94, 201, 98), (253, 231, 37)],
    "gray": [(0, 0, 0), (255, 255, 255)],
    "heat": [(0, 0, 0), (180, 0, 0), (255, 160, 0), (255, 255, 200)],
}


def _color(s: float, anchors) -> str:
    s = min(max(s, 0.0), 1.0)
    x = s * (len(anchors) - 1)
    i = min(int(x), len(anchors) - 2)
    f = x - i
    c = [round(a + f * (b - a)) for a, b in zip(anchors[i], anchors[i + 1])]
    return "#%02x%02x%02x" % tuple(c)


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def write_heatmap_svg(f: Field, path: str | Path, colormap: str = "viridis", title: str = "") -> None:
    """2D fields become one rect per cell, 1D fields a polyline with axes."""
    if colormap not in COLORMAPS:
        raise ValueError(f"unknown colormap {colormap!r}; choose from {sorted(COLORMAPS)}")
    a = f.values
    lo, hi = float(a.min()), float(a.max())
    span = hi - lo
    W, H, pad = 480, 360, 50
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W + 2 * pad}" '
        f'height="{H + 2 * pad}" viewBox="0 0 {W + 2 * pad} {H + 2 * pad}">',
    ]
    if title:
        out.append(f'<text x="{pad}" y="{pad // 2}" font-size="14">{escape(title)}</text>')
    if f.grid.dim == 2:
        nx, ny = f.grid.nx, f.grid.ny
        cw, ch = W / nx, H / ny
        anchors = COLORMAPS[colormap]
        out.append('<g shape-rendering="crispEdges">')
        for i in range(nx):
            for j in range(ny):
                s = 0.0 if span == 0 else (a[i, j] - lo) / span
                # y grows upwards in the plot
                y = pad + (ny - 1 - j) * ch
                out.append(
                    f'<rect x="{_fmt(pad + i * cw)}" y="{_fmt(y)}" width="{_fmt(cw)}" '
                    f'height="{_fmt(ch)}" fill="{_color(s, anchors)}"/>'
                )
        out.append("</g>")
        # legend bar
        lx = pad + W + 10
        for k in range(20):
            s = 1 - k / 19
            out.append(
                f'<rect x="{lx}" y="{_fmt(pad + k * H / 20)}" width="12" '
                f'height="{_fmt(H / 20)}" fill="{_color(s, anchors)}"/>'
            )
    else:
        xs = np.linspace(pad, pad + W, len(a))
        ys = pad + H - (np.zeros_like(a) if span == 0 else (a - lo) / span * H)
        if span == 0:
            ys = np.full_like(a, pad + H / 2)
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, ys))
        out.append(
            f'<line x1="{pad}" y1="{pad + H}" x2="{pad + W}" y2="{pad + H}" stroke="black"/>'
        )
        out.append(f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{pad + H}" stroke="black"/>')
        out.append(f'<text x="{pad + W // 2}" y="{pad + H + 30}" font-size="12">x</text>')
        out.append(f'<polyline fill="none" stroke="#1f4e99" stroke-width="1.5" points="{pts}"/>')
    out.append(f'<text x="{pad}" y="{pad + H + 45}" font-size="12">min={_fmt(lo)} max={_fmt(hi)}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


# -- manifest ----------------------------------------------------------------------


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(
    outdir: str | Path,
    files: Iterable[str | Path],
    config: dict | None = None,
    termination: str | None = None,
    wall_time: float | None = None,
    extra: dict | None = None,
) -> Path:
    """Write ``manifest.json`` listing ``files`` (relative to ``outdir``) with hashes.

    Keys: ``code_version``, ``python``, ``config``, ``termination``,
    ``wall_time_s``, ``files`` (``path``, ``sha256``, ``bytes``), ``extra``.
    """
    outdir = Path(outdir)
    inventory = []
    for f in files:
        p = outdir / f
        inventory.append({"path": str(f), "sha256": sha256_file(p), "bytes": p.stat().st_size})
    manifest = {
        "code_version": __version__,
        "python": platform.python_version(),
        "config": config,
        "termination": termination,
        "wall_time_s": wall_time,
        "files": inventory,
        "extra": extra or {},
    }
    path = outdir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def verify_manifest(path: str | Path) -> list[str]:
    """Paths whose current hash differs from the manifest (empty when all match)."""
    path = Path(path)
    manifest = json.loads(path.read_text(encoding="utf-8"))
    bad = []
    for entry in manifest["files"]:
        p = path.parent / entry["path"]
        if not p.exists() or sha256_file(p) != entry["sha256"]:
            bad.append(entry["path"])
    return bad

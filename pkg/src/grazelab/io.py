"""CSV, SVG, manifest and binary matrix emitters."""

from __future__ import annotations

import csv
import io as _io
import json
import platform
import struct
from pathlib import Path

import numpy as np

MATRIX_MAGIC = b"GLOPMAT1"


def format_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def csv_text(header, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(x) for x in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(csv_text(header, rows))
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


# ---------------------------------------------------------------- SVG

def svg_line_chart(series: dict, title: str = "", xlabel: str = "", ylabel: str = "", logx: bool = False,
                   logy: bool = False, width: int = 640, height: int = 420) -> str:
    """Single-plot line chart; series maps a label to (x, y) arrays."""
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"]
    left, right, top, bottom = 70, 20, 40, 50
    tx = (lambda x: np.log10(x)) if logx else (lambda x: np.asarray(x, dtype=float))
    ty = (lambda y: np.log10(y)) if logy else (lambda y: np.asarray(y, dtype=float))
    pts = {}
    for name, (x, y) in series.items():
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        if logx:
            ok &= x > 0
        if logy:
            ok &= y > 0
        pts[name] = (tx(x[ok]), ty(y[ok]))
    allx = np.concatenate([p[0] for p in pts.values()] or [np.zeros(1)])
    ally = np.concatenate([p[1] for p in pts.values()] or [np.zeros(1)])
    x0, x1 = (float(allx.min()), float(allx.max())) if allx.size else (0.0, 1.0)
    y0, y1 = (float(ally.min()), float(ally.max())) if ally.size else (0.0, 1.0)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw, ph = width - left - right, height - top - bottom
    sx = lambda x: left + (x - x0) / (x1 - x0) * pw
    sy = lambda y: top + ph - (y - y0) / (y1 - y0) * ph
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
           f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{_esc(title)}</text>',
           f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{_esc(xlabel)}</text>',
           f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
           f'transform="rotate(-90 16 {top + ph / 2:.1f})">{_esc(ylabel)}</text>']
    for frac in np.linspace(0.0, 1.0, 5):
        xv, yv = x0 + frac * (x1 - x0), y0 + frac * (y1 - y0)
        xl = f"1e{xv:.2g}" if logx else f"{xv:.3g}"
        yl = f"1e{yv:.2g}" if logy else f"{yv:.3g}"
        out.append(f'<text x="{sx(xv):.1f}" y="{top + ph + 16}" text-anchor="middle">{xl}</text>')
        out.append(f'<text x="{left - 6}" y="{sy(yv) + 4:.1f}" text-anchor="end">{yl}</text>')
    for k, (name, (x, y)) in enumerate(pts.items()):
        c = colors[k % len(colors)]
        path = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{path}"/>')
        out.append(f'<text x="{left + pw - 6}" y="{top + 16 + 14 * k}" text-anchor="end" fill="{c}">{_esc(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def write_svg(path, series: dict, **kw) -> Path:
    path = Path(path)
    path.write_text(svg_line_chart(series, **kw), encoding="utf-8")
    return path


# ---------------------------------------------------------------- manifest and summary

def versions() -> dict:
    import scipy

    from . import __version__
    from .kernels import BACKEND

    return {"grazelab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version(), "kernel_backend": BACKEND}


def write_manifest(out_dir, config: dict) -> Path:
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps({"config": config, "versions": versions()}, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


def write_summary(out_dir, lines: list[str]) -> Path:
    path = Path(out_dir) / "summary.txt"
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


# ---------------------------------------------------------------- binary matrices

def matrix_bytes(entries: np.ndarray, label: str, K: int) -> bytes:
    """GLOPMAT1 | u32 label length | label | u32 K | u32 dim | u8 complex | row-major f64 LE data."""
    A = np.asarray(entries)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("square matrix required")
    cplx = np.iscomplexobj(A)
    lab = label.encode("utf-8")
    head = MATRIX_MAGIC + struct.pack("<I", len(lab)) + lab + struct.pack("<IIB", K, A.shape[0], int(cplx))
    data = A.astype("<c16" if cplx else "<f8", copy=False)
    return head + np.ascontiguousarray(data).tobytes(order="C")


def write_matrix(path, entries: np.ndarray, label: str, K: int) -> Path:
    path = Path(path)
    path.write_bytes(matrix_bytes(entries, label, K))
    return path


def read_matrix(path) -> tuple[np.ndarray, str, int]:
    raw = Path(path).read_bytes()
    if raw[:8] != MATRIX_MAGIC:
        raise ValueError("not a grazelab matrix file")
    (n,) = struct.unpack_from("<I", raw, 8)
    label = raw[12:12 + n].decode("utf-8")
    K, dim, cplx = struct.unpack_from("<IIB", raw, 12 + n)
    off = 12 + n + 9
    dtype = "<c16" if cplx else "<f8"
    A = np.frombuffer(raw, dtype=dtype, count=dim * dim, offset=off).reshape(dim, dim).copy()
    return A, label, K


def write_matrix_csv(path, entries: np.ndarray) -> Path:
    A = np.asarray(entries)
    if A.shape[0] > 64:
        raise ValueError("CSV matrix export is limited to dim <= 64")
    if np.iscomplexobj(A):
        raise ValueError("CSV matrix export is real only")
    header = [f"c{j}" for j in range(A.shape[1])]
    return write_csv(path, header, A.tolist())

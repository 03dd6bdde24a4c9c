"""Instance files, config files and CSV/SVG emitters.

Every emitted file starts with a versioned ``#`` comment line.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import FamilyError, InstanceError
from .families import FamilyDescriptor, IndexFamily, enumerate_family
from .operator import OrthonormalSystem

INSTANCE_HEADER = "# mrlab-instance v1"

ESTIMATE_COLUMNS = ["family", "kind", "n", "mode", "restart", "iters", "value", "gram_residual", "seed"]
SCALING_COLUMNS = ["family", "kind", "n", "mode", "members", "d", "value", "log2_n", "log2_value",
                   "slope", "seed"]
CERTIFY_COLUMNS = ["k", "n", "B", "envelope"]
FAMILY_COLUMNS = ["member_id", "label", "size", "points"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Instance:
    system: OrthonormalSystem
    coeffs: np.ndarray
    family: IndexFamily


def _strip_comments(text: str) -> str:
    return "\n".join(line for line in text.splitlines() if not line.lstrip().startswith("#"))


def parse_instance(text: str, tol: float | None = None) -> Instance:
    """Parse and validate an instance (header comment line + JSON body)."""
    try:
        data = json.loads(_strip_comments(text))
    except json.JSONDecodeError as exc:
        raise InstanceError(f"malformed instance file: {exc}") from exc
    if not isinstance(data, dict):
        raise InstanceError("instance body must be a JSON object")
    missing = {"weights", "system", "coeffs", "family"} - set(data)
    if missing:
        raise InstanceError(f"instance is missing {sorted(missing)}")
    try:
        family = enumerate_family(FamilyDescriptor.from_dict(data["family"]))
    except FamilyError as exc:
        raise InstanceError(f"bad family in instance: {exc}") from exc
    index = data.get("index")
    index = family.ground if index is None else [tuple(p) for p in index]
    kwargs = {} if tol is None else {"tol": tol}
    try:
        values = np.array(data["system"], dtype=float)
        weights = np.array(data["weights"], dtype=float)
        coeffs = np.array(data["coeffs"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise InstanceError(f"non-numeric instance data: {exc}") from exc
    system = OrthonormalSystem(values, weights, index, **kwargs)
    if coeffs.shape != (system.d,):
        raise InstanceError(f"expected {system.d} coefficients, got shape {coeffs.shape}")
    for p in family.ground:
        system.position(p)
    return Instance(system, coeffs, family)


def load_instance(path, tol: float | None = None) -> Instance:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InstanceError(f"cannot read instance {path}: {exc}") from exc
    return parse_instance(text, tol)


def dumps_instance(system: OrthonormalSystem, coeffs, family: IndexFamily) -> str:
    body = {
        "family": family.descriptor.to_dict(),
        "index": [list(p) for p in system.index],
        "weights": [float(w) for w in system.weights],
        "system": [[float(v) for v in row] for row in system.values],
        "coeffs": [float(c) for c in np.asarray(coeffs)],
    }
    return INSTANCE_HEADER + "\n" + json.dumps(body, indent=1) + "\n"


def parse_config(text: str) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; dashes in keys become underscores."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"config line {lineno}: empty key")
        out[key.replace("-", "_")] = value
    return out


def load_config(path) -> dict[str, str]:
    try:
        return parse_config(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def fmt(x) -> str:
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else str(x)
    return "" if x is None else str(x)


def csv_text(header_comment: str, columns: Sequence[str], rows: Iterable[Sequence],
             footer: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    buf.write(f"# {header_comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    for line in footer:
        buf.write(f"# {line}\n")
    return buf.getvalue()


def family_rows(family: IndexFamily):
    for k, label in enumerate(family.labels):
        pts = family.sorted_member(k)
        yield [k, label, len(pts), " ".join(f"{p.i}:{p.j}" for p in pts)]


# ---------------------------------------------------------------------------
# SVG


def line_chart_svg(series, title: str, xlabel: str, ylabel: str,
                   width: int = 640, height: int = 420) -> str:
    """Static line chart. ``series`` is a list of (label, xs, ys, color, dashed)."""
    left, right, top, bottom = 70, 20, 40, 60
    xs_all = [x for s in series for x in s[1]]
    ys_all = [y for s in series for y in s[2]]
    x0, x1 = min(xs_all), max(xs_all)
    y0, y1 = min(ys_all), max(ys_all)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    pw, ph = width - left - right, height - top - bottom

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + (1 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" '
        f'font-size="15">{_esc(title)}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for k in range(5):
        xv = x0 + (x1 - x0) * k / 4
        yv = y0 + (y1 - y0) * k / 4
        out.append(f'<text x="{px(xv):.2f}" y="{top + ph + 18}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="11">{xv:.2f}</text>')
        out.append(f'<text x="{left - 8}" y="{py(yv) + 4:.2f}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="11">{yv:.2f}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 15}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="13">{_esc(xlabel)}</text>')
    out.append(f'<text x="18" y="{top + ph / 2:.1f}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="13" transform="rotate(-90 18 {top + ph / 2:.1f})">{_esc(ylabel)}</text>')
    for k, (label, xs, ys, color, dashed) in enumerate(series):
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        dash = ' stroke-dasharray="6,4"' if dashed else ""
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"{dash}/>')
        ly = top + 14 + 18 * k
        out.append(f'<line x1="{left + 12}" y1="{ly}" x2="{left + 40}" y2="{ly}" stroke="{color}" '
                   f'stroke-width="2"{dash}/>')
        out.append(f'<text x="{left + 46}" y="{ly + 4}" font-family="sans-serif" '
                   f'font-size="12">{_esc(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")

"""Finite families of lattice index sets and their enumeration."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .errors import FamilyError
from .geometry import GridPoint, TriangleShape, tri_lattice_mask

KINDS = ("intervals", "rectangles", "htri", "tri", "explicit")
MODES = ("integer-grid", "line-cut")
LINE_CUT_CAP = 64

IndexSet = frozenset  # frozenset[GridPoint]


@dataclass(frozen=True)
class FamilyDescriptor:
    """What family to build: kind, size parameters and enumeration mode.

    ``n`` is the size parameter of one-parameter kinds (intervals, tri) and
    the height of rectangles/htri; ``m`` is the width of rectangles/htri.
    """

    kind: str
    n: Optional[int] = None
    m: Optional[int] = None
    mode: str = "integer-grid"
    sets: Optional[tuple[tuple[tuple[int, int], ...], ...]] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FamilyError(f"unknown family kind {self.kind!r}; expected one of {KINDS}")
        if self.mode not in MODES:
            raise FamilyError(f"unknown enumeration mode {self.mode!r}")
        if self.mode == "line-cut" and self.kind != "tri":
            raise FamilyError("line-cut mode exists only for the tri family")
        for name in ("n", "m"):
            val = getattr(self, name)
            if val is not None:
                if isinstance(val, bool) or int(val) != val or val < 0:
                    raise FamilyError(f"{name} must be a nonnegative integer, got {val!r}")
                object.__setattr__(self, name, int(val))
        if self.kind == "explicit":
            if self.sets is None:
                raise FamilyError("explicit family needs its sets")
            sets = tuple(tuple((int(i), int(j)) for i, j in s) for s in self.sets)
            for s in sets:
                for i, j in s:
                    if i < 1 or j < 1:
                        raise FamilyError(f"lattice indices start at 1, got ({i},{j})")
            object.__setattr__(self, "sets", sets)
        elif self.n is None:
            raise FamilyError(f"{self.kind} family needs n")
        if self.kind in ("rectangles", "htri") and self.m is None:
            object.__setattr__(self, "m", self.n)

    @classmethod
    def intervals(cls, m: int) -> "FamilyDescriptor":
        return cls("intervals", n=m)

    @classmethod
    def rectangles(cls, m: int, n: int) -> "FamilyDescriptor":
        return cls("rectangles", n=n, m=m)

    @classmethod
    def htri(cls, m: int, n: int) -> "FamilyDescriptor":
        return cls("htri", n=n, m=m)

    @classmethod
    def tri(cls, n: int, mode: str = "integer-grid") -> "FamilyDescriptor":
        return cls("tri", n=n, mode=mode)

    @classmethod
    def explicit(cls, sets: Iterable[Iterable[tuple[int, int]]]) -> "FamilyDescriptor":
        return cls("explicit", sets=tuple(tuple(s) for s in sets))

    def label(self) -> str:
        if self.kind == "explicit":
            return f"explicit({len(self.sets)})"
        if self.kind in ("rectangles", "htri"):
            return f"{self.kind}(m={self.m},n={self.n})"
        if self.kind == "tri":
            return f"tri(n={self.n},{self.mode})"
        return f"{self.kind}(n={self.n})"

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "explicit":
            d["sets"] = [[list(p) for p in s] for s in self.sets]
            return d
        d["n"] = self.n
        if self.kind in ("rectangles", "htri"):
            d["m"] = self.m
        if self.kind == "tri":
            d["mode"] = self.mode
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FamilyDescriptor":
        try:
            kind = d["kind"]
        except (KeyError, TypeError) as exc:
            raise FamilyError(f"family descriptor needs a kind: {d!r}") from exc
        unknown = set(d) - {"kind", "n", "m", "mode", "sets"}
        if unknown:
            raise FamilyError(f"unknown family descriptor keys {sorted(unknown)}")
        sets = d.get("sets")
        if sets is not None:
            sets = tuple(tuple(tuple(p) for p in s) for s in sets)
        return cls(kind, d.get("n"), d.get("m"), d.get("mode", "integer-grid"), sets)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "FamilyDescriptor":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise FamilyError(f"malformed family descriptor: {exc}") from exc


@dataclass(frozen=True)
class IndexFamily:
    """An enumerated family: distinct members, ground set and nesting chains.

    ``chains`` lists member indices so that consecutive members in a chain are
    nested (each a subset of the next); every member occurs in some chain.
    """

    descriptor: FamilyDescriptor
    ground: tuple[GridPoint, ...]
    members: tuple[IndexSet, ...]
    labels: tuple[str, ...]
    chains: tuple[tuple[int, ...], ...] = field(repr=False)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[IndexSet]:
        return iter(self.members)

    def __getitem__(self, k: int) -> IndexSet:
        return self.members[k]

    @property
    def d(self) -> int:
        return len(self.ground)

    def membership(self, index: Optional[Sequence[GridPoint]] = None) -> np.ndarray:
        """0/1 matrix of shape (len(family), len(index)); index defaults to the ground set."""
        index = self.ground if index is None else tuple(index)
        pos = {p: k for k, p in enumerate(index)}
        out = np.zeros((len(self.members), len(index)))
        for r, member in enumerate(self.members):
            for p in member:
                out[r, pos[p]] = 1.0
        return out

    def sorted_member(self, k: int) -> list[GridPoint]:
        return sorted(self.members[k])


class _Collector:
    # keeps first occurrence of each distinct lattice set
    def __init__(self):
        self.members: list[IndexSet] = []
        self.labels: list[str] = []
        self.index: dict[IndexSet, int] = {}

    def add(self, points: Iterable, label: str) -> int:
        s = frozenset(GridPoint(int(i), int(j)) for i, j in points)
        k = self.index.get(s)
        if k is None:
            k = self.index[s] = len(self.members)
            self.members.append(s)
            self.labels.append(label)
        return k


def _chain(indices: Iterable[int]) -> tuple[int, ...]:
    out: list[int] = []
    for k in indices:
        if not out or out[-1] != k:
            out.append(k)
    return tuple(out)


def _greedy_chains(members: Sequence[IndexSet]) -> tuple[tuple[int, ...], ...]:
    order = sorted(range(len(members)), key=lambda k: (len(members[k]), sorted(members[k])))
    chains: list[list[int]] = []
    for k in order:
        for ch in chains:
            if members[ch[-1]] <= members[k]:
                ch.append(k)
                break
        else:
            chains.append([k])
    return tuple(tuple(ch) for ch in chains)


def _mask_points(mask: np.ndarray) -> list[tuple[int, int]]:
    return [(int(i) + 1, int(j) + 1) for i, j in np.argwhere(mask)]


def enumerate_family(desc: FamilyDescriptor, line_cut_cap: int = LINE_CUT_CAP) -> IndexFamily:
    """Enumerate the distinct lattice sets of a family descriptor."""
    col = _Collector()
    kind = desc.kind
    chains: tuple[tuple[int, ...], ...]
    if kind == "intervals":
        m = desc.n
        ground = tuple(GridPoint(k, 1) for k in range(1, m + 1))
        rows = []
        for i in range(1, m + 1):
            rows.append([col.add([(k, 1) for k in range(i, j + 1)], f"[{i},{j}]")
                         for j in range(i, m + 1)])
        chains = tuple(_chain(r) for r in rows)
    elif kind == "rectangles":
        m, n = desc.m, desc.n
        ground = tuple(GridPoint(i, j) for i in range(1, m + 1) for j in range(1, n + 1))
        rows = []
        for x in range(0, m + 1):
            rows.append([
                col.add([(i, j) for i in range(max(x, 1), y + 1) for j in range(1, n + 1)],
                        f"[{x},{y}]x[0,{n}]")
                for y in range(x, m + 1)
            ])
        chains = tuple(_chain(r) for r in rows)
    elif kind == "htri":
        m, n = desc.m, desc.n
        ground = tuple(GridPoint(i, j) for i in range(1, m + 1) for j in range(1, n + 1))
        rows = []
        for a in range(0, m + 1):
            row = []
            for b in range(a, m + 1):
                mask = TriangleShape(a, b, n).region().mask(m, n)
                row.append(col.add(_mask_points(mask), f"Tri_{{{a},{b},{n}}}"))
            rows.append(row)
        chains = tuple(_chain(r) for r in rows)
    elif kind == "tri":
        n = desc.n
        ground = tuple(GridPoint(*p) for p in _mask_points(tri_lattice_mask(n, n, n)))
        if desc.mode == "integer-grid":
            rows = []
            for a in range(0, n + 1):
                rows.append([col.add(_mask_points(tri_lattice_mask(a, b, n)), f"Tri_{{0,{a},{b}}}")
                             for b in range(0, n + 1)])
            chains = tuple(_chain(r) for r in rows)
        else:
            if n > line_cut_cap:
                raise FamilyError(f"line-cut enumeration capped at n <= {line_cut_cap}, got n={n}")
            for pts, (a, b) in line_cut_sets(n):
                col.add(pts, f"Tri_{{0,{a},{b}}}")
            chains = _greedy_chains(col.members)
    else:
        union = sorted({(int(i), int(j)) for s in desc.sets for i, j in s})
        ground = tuple(GridPoint(i, j) for i, j in union)
        for k, s in enumerate(desc.sets):
            col.add(s, f"set{k}")
        chains = _greedy_chains(col.members)
    if not col.members:
        raise FamilyError(f"family {desc.label()} has no members")
    return IndexFamily(desc, ground, tuple(col.members), tuple(col.labels), chains)


def line_cut_sets(n: int) -> list[tuple[list[tuple[int, int]], tuple[Fraction, Fraction]]]:
    """All distinct lattice traces of Tri_{0,a,b} with real 0 <= a, b <= n.

    Works in reciprocal coordinates u = 1/a, v = 1/b, where a point (i, j) is
    included iff ``i*u + j*v <= 1``. Every nonempty trace is attained on some
    line ``i*u + j*v = 1`` of an included point (push (u, v) along (1, 1) until
    the first point becomes tight), so it suffices to evaluate the trace at all
    vertices and edge midpoints of the arrangement along each such line,
    restricted to u, v >= 1/n. Returns (points, (a, b)) pairs sorted by size
    and then lexicographically; the empty trace is included.
    """
    if n < 0:
        raise FamilyError("n must be nonnegative")
    found: dict[tuple, tuple[Fraction, Fraction]] = {(): (Fraction(0), Fraction(0))}
    if n >= 2:
        pts = np.array(_mask_points(tri_lattice_mask(n, n, n)), dtype=np.int64)
        I, J = pts[:, 0], pts[:, 1]
        lo = Fraction(1, n)

        def trace(u: Fraction, v: Fraction) -> tuple:
            den = math.lcm(u.denominator, v.denominator)
            U, V = int(u * den), int(v * den)
            inc = I * U + J * V <= den
            return tuple(map(tuple, pts[inc].tolist()))

        for i, j in pts.tolist():
            # parameterize the line i*u + j*v = 1 by u; feasible u range from v >= 1/n, u >= 1/n
            u_lo, u_hi = lo, (1 - j * lo) / i
            if u_hi < u_lo:
                continue
            cuts = {u_lo, u_hi}
            for p, q in pts.tolist():
                det = i * q - j * p
                if det == 0:
                    continue
                # intersection with p*u + q*v = 1
                u = Fraction(q - j, det)
                if u_lo < u < u_hi:
                    cuts.add(u)
            # boundary lines u = 1/n and v = 1/n are the segment ends
            cuts = sorted(cuts)
            samples = list(cuts) + [(x + y) / 2 for x, y in zip(cuts, cuts[1:])]
            for u in samples:
                v = (1 - i * u) / j
                key = trace(u, v)
                if key not in found:
                    found[key] = (1 / u, 1 / v)
    out = sorted(found.items(), key=lambda kv: (len(kv[0]), kv[0]))
    return [(list(k), ab) for k, ab in out]


def write_lattice_csv(family: IndexFamily, fh) -> None:
    """Export members as rows (i, j, member_id)."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["i", "j", "member_id"])
    for k in range(len(family)):
        for p in family.sorted_member(k):
            w.writerow([p.i, p.j, k])


def lattice_csv(family: IndexFamily) -> str:
    buf = io.StringIO()
    write_lattice_csv(family, buf)
    return buf.getvalue()

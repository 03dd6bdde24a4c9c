"""Exact lattice geometry for right triangles, boxes and their decompositions.

All predicates are evaluated on rationals (``fractions.Fraction``) or on
integer arrays obtained by clearing denominators, so membership of a lattice
point is never decided by a floating point comparison.

Coordinates follow the convention that lattice points have ``i, j >= 1``;
points on the axes never carry an index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from .errors import GeometryError

Rational = Union[int, Fraction, str, float]

ROLES = (
    "triangle-T1",
    "triangle-T2",
    "triangle-T3",
    "remainder-T4",
    "htri-top",
    "rectangle",
    "htri-bottom",
    "square-minus-triangle",
)


class GridPoint(NamedTuple):
    i: int
    j: int


def as_rational(x: Rational) -> Fraction:
    if isinstance(x, bool):
        raise GeometryError(f"not a rational number: {x!r}")
    try:
        return Fraction(x)
    except (TypeError, ValueError) as exc:
        raise GeometryError(f"not a rational number: {x!r}") from exc


@dataclass(frozen=True)
class HalfPlane:
    """The set ``u*x + v*y <= w`` (``< w`` when strict)."""

    u: Fraction
    v: Fraction
    w: Fraction
    strict: bool = False

    def contains(self, x: Fraction, y: Fraction) -> bool:
        s = self.u * x + self.v * y
        return s < self.w if self.strict else s <= self.w

    def integer_form(self) -> tuple[int, int, int]:
        den = math.lcm(self.u.denominator, self.v.denominator, self.w.denominator)
        return tuple(q.numerator * (den // q.denominator) for q in (self.u, self.v, self.w))

    def translate(self, dx: Fraction, dy: Fraction) -> "HalfPlane":
        w = self.w
        if dx and self.u:
            w += self.u * dx
        if dy and self.v:
            w += self.v * dy
        return HalfPlane(self.u, self.v, w, self.strict)

    def swap(self) -> "HalfPlane":
        return HalfPlane(self.v, self.u, self.w, self.strict)

    def point_reflect(self, cx: Fraction, cy: Fraction) -> "HalfPlane":
        # image under (x, y) -> (cx - x, cy - y)
        return HalfPlane(-self.u, -self.v, self.w - self.u * cx - self.v * cy, self.strict)


def _hp(u, v, w, strict=False) -> HalfPlane:
    return HalfPlane(*(t if type(t) is Fraction else Fraction(t) for t in (u, v, w)), strict)


@dataclass(frozen=True)
class Region:
    """Intersection of finitely many half-planes."""

    planes: tuple[HalfPlane, ...]

    def contains(self, x: Rational, y: Rational) -> bool:
        x, y = as_rational(x), as_rational(y)
        return all(p.contains(x, y) for p in self.planes)

    def mask(self, imax: int, jmax: int) -> np.ndarray:
        """Boolean array ``m[i-1, j-1]`` of lattice membership on ``[1,imax]x[1,jmax]``."""
        imax, jmax = max(int(imax), 0), max(int(jmax), 0)
        out = np.ones((imax, jmax), dtype=bool)
        if imax == 0 or jmax == 0:
            return out
        grids = {}
        for plane in self.planes:
            u, v, w = plane.integer_form()
            dtype = np.int64 if abs(u) * imax + abs(v) * jmax + abs(w) < 2**62 else object
            if dtype not in grids:
                grids[dtype] = (np.arange(1, imax + 1, dtype=dtype)[:, None],
                                np.arange(1, jmax + 1, dtype=dtype)[None, :])
            ii, jj = grids[dtype]
            s = u * ii + v * jj
            out &= np.asarray(s < w if plane.strict else s <= w, dtype=bool)
        return out

    def with_planes(self, *extra: HalfPlane) -> "Region":
        return Region(self.planes + tuple(extra))

    def translate(self, dx, dy) -> "Region":
        dx, dy = as_rational(dx), as_rational(dy)
        if not dx and not dy:
            return self
        return Region(tuple(p.translate(dx, dy) for p in self.planes))

    def swap(self) -> "Region":
        return Region(tuple(p.swap() for p in self.planes))

    def point_reflect(self, cx, cy) -> "Region":
        cx, cy = as_rational(cx), as_rational(cy)
        return Region(tuple(p.point_reflect(cx, cy) for p in self.planes))


@dataclass(frozen=True)
class TriangleShape:
    """Closed triangle with vertices (a, 0), (b, 0), (a, c)."""

    a: Fraction
    b: Fraction
    c: Fraction

    def __post_init__(self):
        a, b, c = (as_rational(t) for t in (self.a, self.b, self.c))
        if a < 0:
            raise GeometryError(f"triangle needs a >= 0, got a={a}")
        if b < a:
            raise GeometryError(f"triangle needs b >= a, got a={a}, b={b}")
        if c < 0:
            raise GeometryError(f"triangle needs c >= 0, got c={c}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def x_min(self) -> Fraction:
        return self.a

    @property
    def y_min(self) -> Fraction:
        return Fraction(0)

    def region(self, strict_hypotenuse: bool = False) -> Region:
        a, b, c = self.a, self.b, self.c
        return Region((
            _hp(-1, 0, -a),
            _hp(1, 0, b),
            _hp(0, -1, 0),
            _hp(0, 1, c),
            # (x - a) c + y (b - a) <= c (b - a)
            _hp(c, b - a, c * b, strict_hypotenuse),
        ))

    def bounds(self) -> tuple[int, int]:
        return math.floor(self.b), math.floor(self.c)

    def vertices(self) -> tuple[tuple[Fraction, Fraction], ...]:
        return ((self.a, Fraction(0)), (self.b, Fraction(0)), (self.a, self.c))

    def __str__(self) -> str:
        return f"Tri_{{{self.a},{self.b},{self.c}}}"


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned rectangle [x0, x1] x [y0, y1]."""

    x0: Fraction
    x1: Fraction
    y0: Fraction
    y1: Fraction

    def __post_init__(self):
        vals = [as_rational(t) for t in (self.x0, self.x1, self.y0, self.y1)]
        if vals[1] < vals[0] or vals[3] < vals[2]:
            raise GeometryError(f"empty box bounds {vals}")
        if vals[0] < 0 or vals[2] < 0:
            raise GeometryError(f"box must lie in the closed first quadrant, got {vals}")
        for name, val in zip(("x0", "x1", "y0", "y1"), vals):
            object.__setattr__(self, name, val)

    @property
    def x_min(self) -> Fraction:
        return self.x0

    @property
    def y_min(self) -> Fraction:
        return self.y0

    def region(self) -> Region:
        return Region((
            _hp(-1, 0, -self.x0),
            _hp(1, 0, self.x1),
            _hp(0, -1, -self.y0),
            _hp(0, 1, self.y1),
        ))

    def bounds(self) -> tuple[int, int]:
        return math.floor(self.x1), math.floor(self.y1)

    def __str__(self) -> str:
        return f"[{self.x0},{self.x1}]x[{self.y0},{self.y1}]"


Shape = Union[TriangleShape, Box]


def _mask_to_points(mask: np.ndarray) -> list[GridPoint]:
    # argwhere walks the array in C order, i.e. row-major in (i, j)
    return [GridPoint(int(i) + 1, int(j) + 1) for i, j in np.argwhere(mask)]


def lattice_points(shape: Shape) -> list[GridPoint]:
    """Lattice points (i, j >= 1) of a closed triangle or box, row-major."""
    imax, jmax = shape.bounds()
    return _mask_to_points(shape.region().mask(imax, jmax))


def tri_lattice_mask(a: Rational, b: Rational, n: int) -> np.ndarray:
    """Membership mask of Tri_{0,a,b} on the ``n x n`` lattice box."""
    return TriangleShape(0, a, b).region().mask(n, n)


# ---------------------------------------------------------------------------
# decompositions


@dataclass(frozen=True)
class Piece:
    role: str
    shape: Shape
    offset: tuple[Fraction, Fraction] = (Fraction(0), Fraction(0))
    open_left: bool = False
    open_bottom: bool = False
    reflected: bool = False
    region: Region = field(default=None, compare=False)
    minus: Optional[Region] = field(default=None, compare=False)

    def __post_init__(self):
        if self.role not in ROLES:
            raise GeometryError(f"unknown piece role {self.role!r}")
        dx, dy = (as_rational(t) for t in self.offset)
        object.__setattr__(self, "offset", (dx, dy))
        if self.region is None:
            local = self.shape.region()
            if self.open_left:
                local = local.with_planes(_hp(-1, 0, -self.shape.x_min, strict=True))
            if self.open_bottom:
                local = local.with_planes(_hp(0, -1, -self.shape.y_min, strict=True))
            reg = local.translate(dx, dy)
            object.__setattr__(self, "region", reg.swap() if self.reflected else reg)

    def mirrored(self) -> "Piece":
        """The same piece reflected across the line y = x."""
        return Piece(
            self.role, self.shape, self.offset, self.open_left, self.open_bottom,
            not self.reflected, self.region.swap(),
            None if self.minus is None else self.minus.swap(),
        )

    def contains(self, x: Rational, y: Rational) -> bool:
        if not self.region.contains(x, y):
            return False
        return self.minus is None or not self.minus.contains(x, y)

    def mask(self, imax: int, jmax: int) -> np.ndarray:
        m = self.region.mask(imax, jmax)
        if self.minus is not None:
            m &= ~self.minus.mask(imax, jmax)
        return m

    def points(self, imax: int, jmax: int) -> list[GridPoint]:
        return _mask_to_points(self.mask(imax, jmax))

    def bounds(self) -> tuple[int, int]:
        """Integer box [1, imax] x [1, jmax] holding every lattice point of the piece."""
        bi, bj = self.shape.bounds()
        bi += math.ceil(self.offset[0])
        bj += math.ceil(self.offset[1])
        return (bj, bi) if self.reflected else (bi, bj)

    def describe(self) -> str:
        s = str(self.shape)
        if any(self.offset):
            s += f"+({self.offset[0]},{self.offset[1]})"
        if self.minus is not None:
            s += " minus corner"
        if self.reflected:
            s = f"mirror({s})"
        return s


@dataclass(frozen=True)
class Decomposition:
    parent: Shape
    pieces: tuple[Piece, ...]
    case: Optional[int] = None

    @property
    def bounds(self) -> tuple[int, int]:
        return self.parent.bounds()

    def parent_mask(self) -> np.ndarray:
        return self.parent.region().mask(*self.bounds)

    def piece_masks(self) -> list[np.ndarray]:
        return [p.mask(*self.bounds) for p in self.pieces]

    def piece_points(self) -> list[list[GridPoint]]:
        return [p.points(*self.bounds) for p in self.pieces]

    def is_partition(self) -> bool:
        """Pieces are pairwise disjoint and cover the parent's lattice points.

        The check runs on a box holding the parent and every piece, so a piece
        point outside the parent is detected too.
        """
        boxes = [self.bounds] + [p.bounds() for p in self.pieces]
        imax, jmax = max(b[0] for b in boxes), max(b[1] for b in boxes)
        parent = self.parent.region().mask(imax, jmax)
        counts = np.zeros(parent.shape, dtype=np.int64)
        for p in self.pieces:
            counts += p.mask(imax, jmax)
        return bool(np.array_equal(counts, parent.astype(np.int64)))


def split_htri(shape: TriangleShape, m: Optional[Rational] = None) -> Decomposition:
    """Split Tri_{a,b,n} into top triangle, rectangle and bottom triangle.

    Lattice points with ``j <= n/2`` go to the lower pieces; inside the lower
    strip the rectangle takes ``i <= (a+b)/2``.
    """
    if not isinstance(shape, TriangleShape):
        raise GeometryError("split_htri expects a TriangleShape")
    if m is not None and shape.b > as_rational(m):
        raise GeometryError(f"need b <= m, got b={shape.b}, m={m}")
    a, b, n = shape.a, shape.b, shape.c
    h = n / 2
    mid = (a + b) / 2
    pieces = (
        Piece("htri-top", TriangleShape(a, mid, h), (0, h), open_bottom=True),
        Piece("rectangle", Box(a, mid, 0, h), open_bottom=True),
        Piece("htri-bottom", TriangleShape(mid, b, h), open_left=True),
    )
    return Decomposition(shape, pieces)


def _half(n: int) -> Fraction:
    if isinstance(n, bool) or int(n) != n:
        raise GeometryError(f"n must be an integer, got {n!r}")
    n = int(n)
    if n < 2 or n % 2:
        raise GeometryError(f"decomposition needs an even n >= 2, got {n}")
    return Fraction(n, 2)


def split_tri(n: int) -> Decomposition:
    """Split Tri_{0,n,n} into the corner triangles T1, T2, T3 and the remainder T4."""
    h = _half(n)
    small = TriangleShape(0, h, h)
    pieces = (
        Piece("triangle-T1", small, (0, h), open_bottom=True),
        Piece("triangle-T2", small, (h, 0), open_left=True),
        Piece("triangle-T3", small),
        Piece("remainder-T4", Box(0, h, 0, h), minus=small.region()),
    )
    return Decomposition(TriangleShape(0, 2 * h, 2 * h), pieces)


def _case2_pieces(a: Fraction, b: Fraction, h: Fraction) -> tuple[Piece, ...]:
    # Tri_{0,a,b} with a <= h < b; x-extent of the triangle at height h
    cut = a * (b - h) / b
    return (
        Piece("triangle-T1", TriangleShape(0, cut, b - h), (0, h), open_bottom=True),
        Piece("rectangle", Box(0, cut, 0, h), open_bottom=True),
        Piece("htri-bottom", TriangleShape(cut, a, h), open_left=True),
    )


def classify_tri_member(a: Rational, b: Rational, n: int) -> Decomposition:
    """Decompose a member Tri_{0,a,b} of TRI_n along the split of Tri_{0,n,n}.

    Case 1: a, b <= n/2.  Case 2: a <= n/2 < b.  Case 3: mirror of case 2.
    Case 4: a, b > n/2.
    """
    h = _half(n)
    a, b = as_rational(a), as_rational(b)
    if not (0 <= a <= 2 * h and 0 <= b <= 2 * h):
        raise GeometryError(f"member parameters must lie in [0, {2 * h}], got a={a}, b={b}")
    parent = TriangleShape(0, a, b)
    if a <= h and b <= h:
        return Decomposition(parent, (Piece("triangle-T3", parent),), case=1)
    if a <= h:
        return Decomposition(parent, _case2_pieces(a, b, h), case=2)
    if b <= h:
        pieces = tuple(p.mirrored() for p in _case2_pieces(b, a, h))
        return Decomposition(parent, pieces, case=3)
    top_cut = a * (b - h) / b
    side_cut = b * (a - h) / a
    # the part of the square above the hypotenuse is (h, h) - Tri_{0,a'',b''}
    corner = TriangleShape(0, h - top_cut, h - side_cut)
    pieces = (
        Piece("triangle-T1", TriangleShape(0, top_cut, b - h), (0, h), open_bottom=True),
        Piece("triangle-T2", TriangleShape(0, a - h, side_cut), (h, 0), open_left=True),
        Piece(
            "square-minus-triangle", Box(0, h, 0, h),
            minus=corner.region(strict_hypotenuse=True).point_reflect(h, h),
        ),
    )
    return Decomposition(parent, pieces, case=4)


def inside_tri(points: Sequence[tuple[Rational, Rational]], outer: TriangleShape) -> bool:
    """Exact test that every given (real) point lies in the closed triangle."""
    reg = outer.region()
    return all(reg.contains(x, y) for x, y in points)

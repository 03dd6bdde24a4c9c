"""Exhaustive grid-search oracle for mr(S) on tiny ground sets (d <= 3).

Orthonormal systems on M points are parameterized by rotation angles and the
coefficient vector by spherical angles; the objective is evaluated directly
from the member index lists, independently of the operator module. Sign
flips of columns (and reflections) are absorbed by the coefficient signs, so
rotations suffice.
"""
from __future__ import annotations

import numpy as np

from .errors import FamilyError
from .families import IndexFamily

GRID_BUDGET = 1 << 21
CHUNK = 1 << 16


def _rot2(t):
    c, s = np.cos(t), np.sin(t)
    R = np.empty(t.shape + (2, 2))
    R[..., 0, 0], R[..., 0, 1] = c, -s
    R[..., 1, 0], R[..., 1, 1] = s, c
    return R


def _rot3(al, be, ga):
    # ZYZ Euler angles
    def rz(t):
        c, s = np.cos(t), np.sin(t)
        R = np.zeros(t.shape + (3, 3))
        R[..., 0, 0], R[..., 0, 1], R[..., 1, 0], R[..., 1, 1] = c, -s, s, c
        R[..., 2, 2] = 1.0
        return R

    def ry(t):
        c, s = np.cos(t), np.sin(t)
        R = np.zeros(t.shape + (3, 3))
        R[..., 0, 0], R[..., 0, 2], R[..., 2, 0], R[..., 2, 2] = c, s, -s, c
        R[..., 1, 1] = 1.0
        return R

    return rz(al) @ ry(be) @ rz(ga)


class _Param:
    """Map a box of angles to (Y, a) batches for a given (d, M)."""

    def __init__(self, d: int, M: int):
        self.d, self.M = d, M
        rot = {1: 0, 2: 1, 3: 3}[M]
        sph = d - 1
        self.lo = np.zeros(rot + sph)
        hi = []
        if M == 2:
            hi.append(2 * np.pi)
        elif M == 3:
            hi += [2 * np.pi, np.pi, 2 * np.pi]
        if d == 2:
            hi.append(np.pi)  # a and -a give the same value
        elif d == 3:
            hi += [np.pi, np.pi]
        self.hi = np.array(hi)
        self.rot = rot

    @property
    def dim(self) -> int:
        return len(self.hi)

    def build(self, X):
        K = X.shape[0]
        if self.M == 1:
            R = np.ones((K, 1, 1))
        elif self.M == 2:
            R = _rot2(X[:, 0])
        else:
            R = _rot3(X[:, 0], X[:, 1], X[:, 2])
        Y = R[:, :, : self.d]
        S = X[:, self.rot:]
        if self.d == 1:
            a = np.ones((K, 1))
        elif self.d == 2:
            a = np.stack([np.cos(S[:, 0]), np.sin(S[:, 0])], axis=1)
        else:
            th, ph = S[:, 0], S[:, 1]
            a = np.stack([np.cos(th), np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph)], axis=1)
        return Y, a


def _values(Y, a, members):
    # Y: (K, M, d), a: (K, d)
    X = Y * a[:, None, :]
    best = np.zeros(X.shape[:2])
    for cols in members:
        s = X[:, :, cols].sum(axis=2) if cols else np.zeros(X.shape[:2])
        np.maximum(best, np.abs(s), out=best)
    return np.sqrt((best ** 2).sum(axis=1))


def _grid_max(param, members, lo, hi, N):
    axes = [np.linspace(l, h, N) for l, h in zip(lo, hi)]
    shape = (N,) * len(axes)
    total = N ** len(axes)
    best, arg = -1.0, None
    for start in range(0, total, CHUNK):
        idx = np.unravel_index(np.arange(start, min(start + CHUNK, total)), shape)
        block = np.stack([ax[k] for ax, k in zip(axes, idx)], axis=1)
        v = _values(*param.build(block), members)
        k = int(np.argmax(v))
        if v[k] > best:
            best, arg = float(v[k]), block[k]
    return best, arg


def brute_force_oracle(family: IndexFamily, M: int | None = None, resolution: int = 16,
                       tol: float = 1e-4, max_levels: int = 40) -> float:
    """Grid-search value of mr(family) on M measure points.

    The uniform grid is doubled in resolution while it fits the evaluation
    budget; after that the search zooms onto the best grid point, halving the
    box each level. Stops once successive values differ by less than ``tol``.
    Supported: d <= 2 with M in {d, d+1}, and d = 3 with M = 3.
    """
    d = family.d
    if d > 3:
        raise FamilyError(f"oracle supports d <= 3, got d={d}")
    if d == 0:
        raise FamilyError("family has no index points")
    M = d if M is None else int(M)
    if not (d <= M <= d + 1) or M > 3:
        raise FamilyError(f"oracle supports M in {{d, d+1}} with M <= 3, got d={d}, M={M}")
    pos = {p: k for k, p in enumerate(family.ground)}
    members = [sorted(pos[p] for p in s) for s in family.members]
    param = _Param(d, M)
    if param.dim == 0:
        Y, a = param.build(np.zeros((1, 0)))
        return float(_values(Y, a, members)[0])

    prev = -np.inf
    N = resolution
    best, arg = _grid_max(param, members, param.lo, param.hi, N)
    while abs(best - prev) >= tol and (2 * N) ** param.dim <= GRID_BUDGET:
        prev = best
        N *= 2
        best, arg = _grid_max(param, members, param.lo, param.hi, N)
    width = (param.hi - param.lo) / (N - 1)
    for _ in range(max_levels):
        if abs(best - prev) < tol:
            break
        prev = best
        zoom_n = max(5, min(33, int(GRID_BUDGET ** (1.0 / param.dim))))
        val, cand = _grid_max(param, members, arg - width, arg + width, zoom_n)
        if val > best:
            best, arg = val, cand
        width = width / 2
    return best

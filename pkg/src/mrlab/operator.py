"""Finite-dimensional model of the generalized Menchov-Rademacher operator.

The measure space is a finite set of M points with positive weights; an
orthonormal system is an (M, d) matrix whose columns are orthonormal in the
weighted inner product. Coefficient vectors are plain arrays aligned with the
system's index (the ground set of lattice points).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import InstanceError
from .families import FamilyDescriptor, IndexFamily, enumerate_family
from .geometry import GridPoint

ORTHONORMAL_TOL = 1e-8


def uniform_weights(M: int) -> np.ndarray:
    return np.full(M, 1.0 / M)


def polar_factor(Y: np.ndarray) -> np.ndarray:
    """Nearest matrix with orthonormal columns (Frobenius norm): U V^T from the SVD."""
    U, _, Vt = np.linalg.svd(Y, full_matrices=False)
    return U @ Vt


def complete_columns(Y: np.ndarray, extra: int) -> np.ndarray:
    """Append ``extra`` unit columns orthogonal to the (orthonormal) columns of Y.

    Candidates are the standard basis vectors in order, orthogonalized twice,
    so the completion is deterministic.
    """
    M = Y.shape[0]
    cols = [Y[:, k] for k in range(Y.shape[1])]
    added = 0
    for k in range(M):
        if added == extra:
            break
        e = np.zeros(M)
        e[k] = 1.0
        for _ in range(2):
            for c in cols:
                e -= (c @ e) * c
        norm = np.linalg.norm(e)
        if norm > 0.5:
            cols.append(e / norm)
            added += 1
    if added < extra:
        raise InstanceError(f"cannot complete {Y.shape[1]} columns by {extra} in dimension {M}")
    return np.column_stack(cols) if cols else np.zeros((M, 0))


@dataclass(frozen=True, eq=False)
class OrthonormalSystem:
    """Values f_i(x) of an orthonormal system on a weighted finite space.

    ``values[x, k]`` is the value of the function indexed by ``index[k]`` at
    measure point x. Validation on construction checks the weighted Gram
    matrix against the identity with tolerance ``tol``.
    """

    values: np.ndarray
    weights: np.ndarray
    index: tuple[GridPoint, ...]
    tol: float = ORTHONORMAL_TOL

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        weights = np.array(self.weights, dtype=float)
        index = tuple(GridPoint(int(i), int(j)) for i, j in self.index)
        if values.ndim != 2:
            raise InstanceError(f"system values must be a matrix, got shape {values.shape}")
        M, d = values.shape
        if weights.shape != (M,):
            raise InstanceError(f"expected {M} weights, got shape {weights.shape}")
        if not np.all(np.isfinite(values)) or not np.all(np.isfinite(weights)):
            raise InstanceError("non-finite values in instance")
        if np.any(weights <= 0):
            raise InstanceError("measure weights must be positive")
        if len(index) != d:
            raise InstanceError(f"index has {len(index)} points but system has {d} columns")
        if len(set(index)) != d:
            raise InstanceError("duplicate points in system index")
        if M < d:
            raise InstanceError(f"need at least d={d} measure points, got M={M}")
        values.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "index", index)
        object.__setattr__(self, "_pos", {p: k for k, p in enumerate(index)})
        res = self.gram_residual()
        if res > self.tol:
            raise InstanceError(f"system is not orthonormal: max |G - I| = {res:.3e} > {self.tol:g}")

    @property
    def M(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def gram(self) -> np.ndarray:
        return self.values.T @ (self.weights[:, None] * self.values)

    def gram_residual(self) -> float:
        if self.d == 0:
            return 0.0
        return float(np.max(np.abs(self.gram() - np.eye(self.d))))

    def position(self, p) -> int:
        try:
            return self._pos[GridPoint(*p)]
        except (KeyError, TypeError) as exc:
            raise InstanceError(f"index {p!r} is not in the system's ground set") from exc

    def positions(self, points: Iterable) -> list[int]:
        return [self.position(p) for p in points]

    def scaled(self) -> np.ndarray:
        """sqrt(w) * f: columns orthonormal in the plain Euclidean inner product."""
        return np.sqrt(self.weights)[:, None] * self.values

    @classmethod
    def from_scaled(cls, Y, weights, index, tol: float = ORTHONORMAL_TOL) -> "OrthonormalSystem":
        weights = np.asarray(weights, dtype=float)
        return cls(np.asarray(Y) / np.sqrt(weights)[:, None], weights, index, tol)

    @classmethod
    def random(cls, index: Sequence, M: int, rng: np.random.Generator,
               weights: Optional[np.ndarray] = None) -> "OrthonormalSystem":
        """Gaussian matrix made orthonormal with the polar factor."""
        weights = uniform_weights(M) if weights is None else np.asarray(weights, dtype=float)
        if M < len(index):
            raise InstanceError(f"need M >= d, got M={M}, d={len(index)}")
        Y = polar_factor(rng.standard_normal((M, len(index))))
        return cls.from_scaled(Y, weights, index)

    def orthonormalized(self) -> "OrthonormalSystem":
        return self.from_scaled(polar_factor(self.scaled()), self.weights, self.index, self.tol)


def _coeffs(system: OrthonormalSystem, coeffs) -> np.ndarray:
    a = np.asarray(coeffs, dtype=float)
    if a.shape != (system.d,):
        raise InstanceError(f"expected {system.d} coefficients, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InstanceError("non-finite coefficients")
    return a


def partial_sum(system: OrthonormalSystem, coeffs, index_set: Iterable) -> np.ndarray:
    """x -> sum_{i in I} a_i f_i(x); the empty set gives the zero function."""
    a = _coeffs(system, coeffs)
    pos = system.positions(index_set)
    out = np.zeros(system.M)
    for k in sorted(pos):
        out += a[k] * system.values[:, k]
    return out


def _check_family(system: OrthonormalSystem, family: IndexFamily) -> None:
    if len(family) == 0:
        raise InstanceError("sup over an empty family is undefined")
    for p in family.ground:
        system.position(p)


def partial_sums(system: OrthonormalSystem, coeffs, family: IndexFamily) -> np.ndarray:
    """All member partial sums at once, shape (len(family), M)."""
    a = _coeffs(system, coeffs)
    _check_family(system, family)
    B = family.membership(system.index)
    return B @ (a[:, None] * system.values.T)


def maximal_function(system: OrthonormalSystem, coeffs, family: IndexFamily,
                     method: str = "incremental") -> np.ndarray:
    """x -> max over members I of |partial_sum(I)(x)|.

    ``method="incremental"`` walks the family's nesting chains and adds only
    the newly included terms; ``method="naive"`` re-sums every member.
    """
    a = _coeffs(system, coeffs)
    _check_family(system, family)
    if method == "naive":
        return np.max(np.abs(partial_sums(system, a, family)), axis=0)
    if method != "incremental":
        raise ValueError(f"unknown method {method!r}")
    terms = a[None, :] * system.values
    out = np.zeros(system.M)
    for chain in family.chains:
        running = np.zeros(system.M)
        prev: frozenset = frozenset()
        for k in chain:
            member = family.members[k]
            if not prev <= member:
                raise InstanceError("family chain is not nested")
            for p in sorted(member - prev):
                running += terms[:, system.position(p)]
            np.maximum(out, np.abs(running), out=out)
            prev = member
    return out


def weighted_l2(weights: np.ndarray, values: np.ndarray) -> float:
    return math.sqrt(math.fsum((np.asarray(weights) * np.asarray(values) ** 2).tolist()))


def operator_value(system: OrthonormalSystem, coeffs, family: IndexFamily,
                   method: str = "incremental") -> float:
    """Weighted L2 norm of the maximal function (fsum for the final reduction)."""
    return weighted_l2(system.weights, maximal_function(system, coeffs, family, method))


class IntervalInstance(NamedTuple):
    system: OrthonormalSystem
    coeffs: np.ndarray
    family: IndexFamily


def reduce_rectangles_to_intervals(system: OrthonormalSystem, coeffs, m: int, n: int) -> IntervalInstance:
    """Collapse each column of an m x n rectangle instance into one function.

    g_i = sum_j a_ij f_ij are orthogonal with |g_i|^2 = b_i^2, so with
    f'_i = g_i / b_i and a'_i = b_i every rectangle partial sum becomes an
    interval partial sum. Columns with b_i = 0 get completion directions.
    """
    a = _coeffs(system, coeffs)
    rect = {GridPoint(i, j) for i in range(1, m + 1) for j in range(1, n + 1)}
    if set(system.index) != rect:
        raise InstanceError(f"system ground set is not the {m}x{n} rectangle lattice")
    M = system.M
    Y = system.scaled()
    b = np.zeros(m)
    cols: dict[int, np.ndarray] = {}
    for i in range(1, m + 1):
        pos = [system.position((i, j)) for j in range(1, n + 1)]
        b[i - 1] = math.sqrt(math.fsum((a[pos] ** 2).tolist()))
        if b[i - 1] > 0:
            g = Y[:, pos] @ a[pos]
            cols[i - 1] = g / b[i - 1]
    missing = [k for k in range(m) if k not in cols]
    base = np.column_stack([cols[k] for k in sorted(cols)]) if cols else np.zeros((M, 0))
    full = complete_columns(base, len(missing))
    out = np.zeros((M, m))
    for c, k in enumerate(sorted(cols)):
        out[:, k] = full[:, c]
    for c, k in enumerate(missing):
        out[:, k] = full[:, len(cols) + c]
    fam = enumerate_family(FamilyDescriptor.intervals(m))
    reduced = OrthonormalSystem.from_scaled(out, system.weights, fam.ground, system.tol)
    return IntervalInstance(reduced, b, fam)

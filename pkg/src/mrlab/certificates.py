"""Explicit arithmetic for the upper-bound recursion on right-triangle families.

Everything here is reported up to the configured absolute constants: the
recurrences are asymptotic statements and their constants are inputs.
"""
from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import BoundaryCaseError, GeometryError

SQRT3 = math.sqrt(3.0)
GAMMA = 2.0 + SQRT3
SQRT_GAMMA = math.sqrt(GAMMA)
LN2 = math.log(2.0)
# log_2 sqrt(2 + sqrt 3)
TRI_EXPONENT = math.log(GAMMA) / (2.0 * LN2)

QUADRATIC_FORM = np.array([
    [2.0, 1.0, 0.0, 1.0],
    [1.0, 2.0, 0.0, 1.0],
    [0.0, 0.0, 1.0, 0.0],
    [1.0, 1.0, 0.0, 1.0],
])

MAX_K = 60


def check_constants() -> float:
    """Residual of gamma^2 = 4 gamma - 1, the minimal polynomial of 2 + sqrt 3."""
    return abs(GAMMA * GAMMA - (4.0 * GAMMA - 1.0))


class GammaCertificate(NamedTuple):
    value: float
    eigenvector: np.ndarray
    closed_form_error: float
    eigen_residual: float
    charpoly_residual: float
    iterations: int


def power_iteration(A: np.ndarray, tol: float = 1e-15, max_iter: int = 10_000):
    """Dominant eigenpair of a symmetric positive definite matrix."""
    A = np.asarray(A, dtype=float)
    x = np.ones(A.shape[0]) / math.sqrt(A.shape[0])
    lam = 0.0
    for it in range(1, max_iter + 1):
        y = A @ x
        x_new = y / np.linalg.norm(y)
        lam = float(x_new @ A @ x_new)
        if np.linalg.norm(A @ x_new - lam * x_new) <= tol * lam or np.linalg.norm(x_new - x) == 0:
            return lam, x_new, it
        x = x_new
    return lam, x, max_iter


def gamma_eigenvalue() -> GammaCertificate:
    """Largest eigenvalue of the triangle-recursion quadratic form, with cross-checks."""
    lam, v, its = power_iteration(QUADRATIC_FORM)
    if v[0] < 0:
        v = -v
    charpoly = np.poly(QUADRATIC_FORM)
    return GammaCertificate(
        value=lam,
        eigenvector=v,
        closed_form_error=abs(lam - GAMMA),
        eigen_residual=float(np.linalg.norm(QUADRATIC_FORM @ v - lam * v)),
        charpoly_residual=abs(float(np.polyval(charpoly, GAMMA))),
        iterations=its,
    )


def gamma_eigenvector_closed_form() -> np.ndarray:
    v = np.array([1.0, 1.0, 0.0, SQRT3 - 1.0])
    return v / np.linalg.norm(v)


def quadratic_form(p) -> float | np.ndarray:
    """p1^2 + p2^2 + p3^2 + (p1 + p2 + p4)^2; vectorized over leading axes."""
    p = np.asarray(p, dtype=float)
    p1, p2, p3, p4 = p[..., 0], p[..., 1], p[..., 2], p[..., 3]
    out = p1 ** 2 + p2 ** 2 + p3 ** 2 + (p1 + p2 + p4) ** 2
    return float(out) if out.ndim == 0 else out


class Recurrence(NamedTuple):
    """T(n) <= a T(n/b) + f(n) with f(n) = O(n^c ln^logPower n)."""

    a: float
    b: float
    c: float
    log_power: int = 0


class MasterResult(NamedTuple):
    case: int
    exponent: float


BOUNDARY_MESSAGE = "boundary case c = log_b(a) is not covered by the Master Theorem as stated"


def master_exponent(r: Recurrence, rel_tol: float = 1e-12) -> MasterResult:
    """Growth exponent of a divide-and-conquer recurrence (strict cases only).

    Case 1 (c < log_b a) gives log_b a; case 2 (c > log_b a) gives c. A
    logarithmic factor in f does not change the exponent in either strict case.
    """
    if not r.a > 0:
        raise ValueError(f"need a > 0, got {r.a}")
    if not r.b > 1:
        raise ValueError(f"need b > 1, got {r.b}")
    if r.log_power < 0:
        raise ValueError("log power must be nonnegative")
    crit = math.log(r.a) / math.log(r.b)
    if abs(r.c - crit) <= rel_tol * max(1.0, abs(crit)):
        raise BoundaryCaseError(BOUNDARY_MESSAGE)
    if r.c < crit:
        return MasterResult(1, crit)
    return MasterResult(2, float(r.c))


def tri_recurrence() -> Recurrence:
    return Recurrence(SQRT_GAMMA, 2.0, 0.5, 1)


@dataclass(frozen=True)
class BoundCertificate:
    """Constants of the upper-bound recursion.

    ``alpha`` is the classical interval constant; ``beta(m)`` bounds
    mr(S_m) (default alpha ln m + 1) and ``rho(m)`` bounds mr(REC_{m,n})
    (default beta, by the rectangle-to-interval reduction).
    """

    alpha: float = 1.0 / 3.0
    c5: float = 1.0
    base: float = 1.0
    beta: Optional[Callable[[int], float]] = field(default=None, compare=False)
    rho: Optional[Callable[[int], float]] = field(default=None, compare=False)

    def __post_init__(self):
        if not 0 < self.alpha <= 1.0 / 3.0:
            raise ValueError(f"alpha must lie in (0, 1/3], got {self.alpha}")
        if self.c5 < 0 or self.base <= 0:
            raise ValueError("c5 must be >= 0 and the base bound positive")

    def beta_of(self, m: int) -> float:
        if self.beta is not None:
            return float(self.beta(m))
        return self.alpha * math.log(m) + 1.0

    def rho_of(self, m: int) -> float:
        return float(self.rho(m)) if self.rho is not None else self.beta_of(m)


def unroll_htri(k: int, m: int, cert: BoundCertificate = BoundCertificate()) -> float:
    """(sqrt 2)^k beta(m) + sum_{l=1}^{k-1} (sqrt 2)^{k-1-l} rho(m), summed exactly."""
    if k < 0 or m < 1:
        raise ValueError("need k >= 0 and m >= 1")
    beta, rho = cert.beta_of(m), cert.rho_of(m)
    terms = [math.sqrt(2.0) ** k * beta]
    terms += [math.sqrt(2.0) ** (k - 1 - l) * rho for l in range(1, k)]
    return math.fsum(terms)


def tri_step_bound(p, A: float, R: float, H: float) -> float:
    """One step of the four-term triangle-inequality bound, as displayed.

    p are the masses on T1..T4; A, R, H bound mr(TRI_{n/2}), mr(REC_{n/2,n/2})
    and mr(HTRI_{n/2,n/2}).
    """
    if min(A, R, H) < 0:
        raise ValueError("bounds must be nonnegative")
    p1, p2, p3, p4 = (float(t) for t in p)
    if min(p1, p2, p3, p4) < 0:
        raise ValueError("masses must be nonnegative")
    q = math.sqrt(p3 * p3 + p4 * p4)
    terms = [
        (p3 * A) ** 2,
        (p1 * A + q * (R + H)) ** 2,
        (p2 * A + q * (R + H)) ** 2,
        ((p1 + p2 + p4) * A + q) ** 2,
    ]
    return math.sqrt(math.fsum(terms))


class TableRow(NamedTuple):
    k: int
    n: int
    bound: float
    envelope: float


def tri_bound_table(K: int, cert: BoundCertificate = BoundCertificate()) -> tuple[list[TableRow], float]:
    """B(2^k) = sqrt(gamma) B(2^{k-1}) + c5 sqrt(2^k) ln 2^k for k = 0..K.

    Returns the rows and the envelope constant C, the smallest C with
    B(n) <= C n^{log_2 sqrt gamma} on the computed range.
    """
    if K < 0:
        raise ValueError("K must be nonnegative")
    if K > MAX_K:
        raise ValueError(f"K={K} exceeds the overflow guard {MAX_K}")
    bounds = [float(cert.base)]
    for k in range(1, K + 1):
        n = 2 ** k
        bounds.append(SQRT_GAMMA * bounds[-1] + cert.c5 * math.sqrt(n) * k * LN2)
    C = max(b / (2.0 ** k) ** TRI_EXPONENT for k, b in enumerate(bounds))
    # guard the envelope against rounding in the power
    C = math.nextafter(C, math.inf)
    rows = [TableRow(k, 2 ** k, b, C * (2.0 ** k) ** TRI_EXPONENT) for k, b in enumerate(bounds)]
    return rows, C


def k_for(n: int) -> int:
    """Smallest K with 2^K >= n (monotonicity: mr(TRI_n) <= mr(TRI_{2^K}))."""
    if n < 1:
        raise GeometryError("n must be positive")
    return (n - 1).bit_length()


def mr_trivial_envelope(family) -> float:
    """sqrt(|S|): the union bound on mr for a finite family."""
    return math.sqrt(len(family))


def sqrt2_weakening_holds(A: float, B: float) -> bool:
    """Exact check of (A + B)^2 + A^2 <= (sqrt 2 A + B)^2 for A, B >= 0.

    Both sides share 2A^2 + B^2, leaving 2AB <= 2 sqrt(2) AB; with AB >= 0
    this squares to 4(AB)^2 <= 8(AB)^2, decided in rational arithmetic.
    """
    a, b = Fraction(A), Fraction(B)
    if a < 0 or b < 0:
        raise ValueError("A and B must be nonnegative")
    ab = a * b
    return 4 * ab * ab <= 8 * ab * ab

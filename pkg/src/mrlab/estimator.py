"""Lower-bound search for mr(S) by alternating maximization with restarts.

For fixed coefficients a and a fixed selector (member I(x), sign s(x) at each
measure point) the squared objective is a convex quadratic in the system,
sum_x (sum_i a_i h_i(x) y_i(x))^2 with h_i(x) = s(x)[i in I(x)], written in the
scaled coordinates y = sqrt(w) f whose columns are Euclidean-orthonormal.
Each cycle re-selects pointwise, ascends the system on the Stiefel manifold
(polar retraction, backtracking), and takes one conditional-gradient step in
the coefficients. Every reported value is recomputed from scratch after an
exact re-orthonormalization, so it is a genuine lower bound on mr(S) up to
rounding.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import FamilyError, InstanceError
from .families import IndexFamily
from .operator import (
    OrthonormalSystem,
    complete_columns,
    operator_value,
    polar_factor,
    uniform_weights,
)

log = logging.getLogger(__name__)

INNER_STEPS = 50
REL_TOL = 1e-9
FINAL_GRAM_TOL = 1e-12


class AscentError(FloatingPointError):
    pass


@dataclass(frozen=True, eq=False)
class SelectorAssignment:
    """Pointwise argmax witness: member index and sign at every measure point."""

    member: np.ndarray
    sign: np.ndarray
    signed: np.ndarray = field(repr=False)  # (M, d) matrix h_i(x)


class CoeffStep(NamedTuple):
    coeffs: np.ndarray
    stalled: bool


@dataclass(frozen=True, eq=False)
class EstimateRecord:
    family: str
    kind: str
    n: Optional[int]
    mode: str
    restart: int
    iters: int
    value: float
    gram_residual: float
    seed: int
    history: tuple = field(default=(), repr=False)
    system: Optional[OrthonormalSystem] = field(default=None, repr=False)
    coeffs: Optional[np.ndarray] = field(default=None, repr=False)
    aborted: bool = False
    diagnostic: str = ""


# ---------------------------------------------------------------------------
# array-level kernels; Y is the scaled (M, d) system, B the (|S|, d) membership


def _partials(B, a, Y):
    return B @ (a[:, None] * Y.T)


def _objective(B, a, Y) -> float:
    P = _partials(B, a, Y)
    m = np.max(np.abs(P), axis=0)
    return float(np.sqrt(m @ m))


def _select(B, a, Y):
    P = _partials(B, a, Y)
    S, M = P.shape
    V = np.empty((2 * S, M))
    V[0::2] = P
    V[1::2] = -P
    # argmax returns the first maximizer: smallest member, then sign +1
    k = np.argmax(V, axis=0)
    member = k // 2
    sign = np.where(k % 2 == 0, 1.0, -1.0)
    return member, sign, B[member] * sign[:, None]


def _quad(C, Y):
    s = np.einsum("xi,xi->x", C, Y)
    return float(s @ s), s


def _ascend(H, a, Y, max_steps=INNER_STEPS, grad_tol=1e-12):
    C = H * a[None, :]
    val, s = _quad(C, Y)
    trace = [val]
    t = 1.0
    for _ in range(max_steps):
        G = 2.0 * s[:, None] * C
        YtG = Y.T @ G
        R = G - Y @ (0.5 * (YtG + YtG.T))
        if not np.all(np.isfinite(R)):
            raise AscentError("non-finite Riemannian gradient")
        if np.linalg.norm(R) <= grad_tol * max(1.0, val):
            break
        for _ in range(60):
            Yn = polar_factor(Y + t * R)
            vn, sn = _quad(C, Yn)
            if not np.isfinite(vn):
                raise AscentError("non-finite objective during system ascent")
            if vn > val:
                Y, val, s = Yn, vn, sn
                trace.append(val)
                t = min(2.0 * t, 1e6)
                break
            t *= 0.5
        else:
            break
    return Y, trace


def _coeff_step(H, a, Y):
    L = H * Y
    La = L @ a
    Fa = float(np.linalg.norm(La))
    if Fa == 0.0:
        return a, True
    g = L.T @ La / Fa
    gn = float(np.linalg.norm(g))
    if gn == 0.0 or not np.isfinite(gn):
        return a, True
    return g / gn, False


# ---------------------------------------------------------------------------
# public operations on validated objects


def _membership(system: OrthonormalSystem, family: IndexFamily) -> np.ndarray:
    for p in family.ground:
        system.position(p)
    return family.membership(system.index)


def improve_selector(system: OrthonormalSystem, coeffs, family: IndexFamily) -> SelectorAssignment:
    """Pick (I, sign) maximizing sign * partial_sum(I)(x) at every point x."""
    B = _membership(system, family)
    member, sign, H = _select(B, np.asarray(coeffs, dtype=float), system.scaled())
    return SelectorAssignment(member, sign, H)


def selector_objective(selector: SelectorAssignment, system: OrthonormalSystem, coeffs) -> float:
    """Squared weighted L2 norm of the selectorized partial sums."""
    C = selector.signed * np.asarray(coeffs, dtype=float)[None, :]
    return _quad(C, system.scaled())[0]


def ascend_system(selector: SelectorAssignment, coeffs, system: OrthonormalSystem,
                  max_steps: int = INNER_STEPS) -> OrthonormalSystem:
    """Gradient ascent of the selectorized objective over orthonormal systems."""
    Y, _ = _ascend(selector.signed, np.asarray(coeffs, dtype=float), system.scaled(), max_steps)
    return OrthonormalSystem.from_scaled(Y, system.weights, system.index, system.tol)


def ascend_coeffs(system: OrthonormalSystem, family: IndexFamily, coeffs) -> CoeffStep:
    """One conditional-gradient step a <- g/|g| for the convex functional a -> operator_value.

    g is the gradient of |L a| where L is assembled from the current selector;
    F(g/|g|) >= <g, g/|g|> = |g| >= <g, a> = F(a). Returns the input unchanged,
    flagged as stalled, when g vanishes.
    """
    a = np.asarray(coeffs, dtype=float)
    B = _membership(system, family)
    Y = system.scaled()
    _, _, H = _select(B, a, Y)
    return CoeffStep(*_coeff_step(H, a, Y))


# ---------------------------------------------------------------------------
# restarts


def restart_rng(seed: int, restart: int) -> np.random.Generator:
    """Counter-based stream for one restart, keyed by seed + restart index."""
    return np.random.Generator(np.random.Philox(seed + restart))


def split_points(system: OrthonormalSystem, M: int) -> OrthonormalSystem:
    """Refine the measure space to M points by splitting points in half.

    A point of weight w becomes two points of weight w/2 carrying the same
    values, which leaves the Gram matrix and every operator value unchanged.
    """
    if M < system.M:
        raise InstanceError(f"cannot shrink a measure space from {system.M} to {M} points")
    F = [row for row in system.values]
    w = list(system.weights)
    k = 0
    while len(w) < M:
        F.append(F[k].copy())
        w[k] /= 2.0
        w.append(w[k])
        k += 1
    return OrthonormalSystem(np.array(F), np.array(w), system.index, system.tol)


def extend_candidate(system: OrthonormalSystem, coeffs, ground, M: int):
    """Embed a candidate on a sub-ground-set into a larger ground set.

    New indices get zero coefficients and completion directions, so the
    operator value of any family over the larger ground set is at least the
    old one for families containing the old members.
    """
    system = split_points(system, max(M, system.M))
    ground = tuple(ground)
    old = {p: k for k, p in enumerate(system.index)}
    missing = [p for p in ground if p not in old]
    if len(old) + len(missing) != len(ground):
        raise InstanceError("candidate ground set is not contained in the target ground set")
    Y0 = system.scaled()
    full = complete_columns(Y0, len(missing))
    Y = np.zeros((system.M, len(ground)))
    a = np.zeros(len(ground))
    coeffs = np.asarray(coeffs, dtype=float)
    for c, p in enumerate(ground):
        if p in old:
            Y[:, c] = Y0[:, old[p]]
            a[c] = coeffs[old[p]]
        else:
            Y[:, c] = full[:, system.d + missing.index(p)]
    return OrthonormalSystem.from_scaled(Y, system.weights, ground, system.tol), a


def run_restart(family: IndexFamily, M: int, iters: int, seed: int, restart: int,
                init: Optional[tuple[OrthonormalSystem, np.ndarray]] = None) -> EstimateRecord:
    desc = family.descriptor
    meta = dict(family=desc.label(), kind=desc.kind, n=desc.n, mode=desc.mode,
                restart=restart, seed=seed)
    ground = family.ground
    B = family.membership(ground)
    if init is None:
        rng = restart_rng(seed, restart)
        weights = uniform_weights(M)
        Y = polar_factor(rng.standard_normal((M, len(ground))))
        a = rng.standard_normal(len(ground))
    else:
        sys0, a = extend_candidate(init[0], init[1], ground, M)
        weights = sys0.weights
        Y = sys0.scaled()
    a = a / np.linalg.norm(a)
    history = [_objective(B, a, Y)]
    done = 0
    try:
        for done in range(1, iters + 1):
            _, _, H = _select(B, a, Y)
            Y, _ = _ascend(H, a, Y)
            f1 = _objective(B, a, Y)
            _, _, H = _select(B, a, Y)
            a, stalled = _coeff_step(H, a, Y)
            f2 = _objective(B, a, Y)
            prev = history[-1]
            history += [f1, f2]
            if not np.isfinite(f2):
                raise AscentError("non-finite objective")
            if stalled or f2 - prev <= REL_TOL * max(prev, 1e-300):
                break
    except AscentError as exc:
        log.warning("restart %d aborted: %s", restart, exc)
        return EstimateRecord(**meta, iters=done, value=float("nan"), gram_residual=float("nan"),
                              history=tuple(history), aborted=True, diagnostic=str(exc))
    Y = polar_factor(Y)
    a = a / np.linalg.norm(a)
    system = OrthonormalSystem.from_scaled(Y, weights, ground)
    residual = system.gram_residual()
    if residual > FINAL_GRAM_TOL:
        raise AssertionError(f"final Gram residual {residual:.3e} exceeds {FINAL_GRAM_TOL}")
    value = operator_value(system, a, family, method="naive")
    log.info("restart %d: value %.12f after %d cycles", restart, value, done)
    return EstimateRecord(**meta, iters=done, value=value, gram_residual=residual,
                          history=tuple(history), system=system, coeffs=a)


def best_record(records) -> EstimateRecord:
    """Lexicographic max by (value, restart id); aborted runs never win."""
    ok = [r for r in records if not r.aborted]
    if not ok:
        raise RuntimeError("every restart aborted")
    return max(ok, key=lambda r: (r.value, r.restart))


def run_restarts(family: IndexFamily, M: Optional[int] = None, restarts: int = 8,
                 iters: int = 100, seed: int = 0, workers: int = 1,
                 init: Optional[tuple[OrthonormalSystem, np.ndarray]] = None) -> list[EstimateRecord]:
    """Independent restarts, returned in restart order.

    With ``init`` an extra run (restart id -1) starts from that candidate,
    extended to the family's ground set.
    """
    if len(family) == 0:
        raise FamilyError("family has no members")
    d = family.d
    if d == 0:
        raise FamilyError("family has no index points")
    M = 2 * d if M is None else int(M)
    if M < d:
        raise InstanceError(f"need M >= d, got M={M}, d={d}")
    if restarts < 0 or iters < 1:
        raise ValueError("restarts must be >= 0 and iters >= 1")
    jobs = [(r, None) for r in range(restarts)]
    if init is not None:
        jobs.insert(0, (-1, init))
    if not jobs:
        raise ValueError("nothing to run: no restarts and no initial candidate")

    def job(spec):
        r, start = spec
        return run_restart(family, M, iters, seed, r, start)

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(job, jobs))
    else:
        records = [job(j) for j in jobs]
    return records


def estimate_mr(family: IndexFamily, M: Optional[int] = None, restarts: int = 8,
                iters: int = 100, seed: int = 0, workers: int = 1,
                init=None) -> EstimateRecord:
    """Best lower bound on mr(family) over all restarts."""
    return best_record(run_restarts(family, M, restarts, iters, seed, workers, init))

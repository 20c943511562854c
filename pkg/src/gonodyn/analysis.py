"""Fixed points, stability, trajectories and limit sets.

Everything here works on the simplex map ``V`` (normalized coordinates)
unless a function says otherwise; ``lift`` turns a normalized point back
into a full state of ``S_a``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.linalg import null_space
from scipy.stats import qmc

from gonodyn._kernels import run_chunk, run_orbit
from gonodyn.errors import NotAFixedPoint, WholeIntervalFixed
from gonodyn.model import FullState, NormalizedState, ReducedState
from gonodyn.operators import GonosomalOperator, QuadraticMap1D, UOperator

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-11
NEWTON_TOL = 1e-12
DEDUP_RADIUS = 1e-7
HYSTERESIS = 1e-9
FIXED_CHECK_TOL = 1e-9
ROOT_SLACK = 1e-12


class Stability(str, Enum):
    ATTRACTING = "attracting"
    REPELLING = "repelling"
    NEUTRAL = "neutral"
    SADDLE = "saddle"
    NON_HYPERBOLIC = "non-hyperbolic"


@dataclass(frozen=True, eq=False)
class FixedPointRecord:
    """A fixed point of the simplex map with its local type.

    ``spectrum`` holds eigenvalue magnitudes of the Jacobian restricted to
    the tangent space ``sum(delta) = 0``; the scalar n=2 analysis stores
    the slope ``T'(x)`` in ``slope`` instead and leaves ``spectrum`` empty.
    """

    u: NormalizedState
    residual: float
    classification: Stability
    spectrum: tuple = ()
    slope: float | None = None
    branch: str | None = None

    def full_state(self, rate) -> FullState:
        return FullState(rate.a * self.u.u, rate.b * self.u.u)

    def as_dict(self) -> dict:
        return {
            "u": [float(v) for v in self.u.u],
            "residual": float(self.residual),
            "classification": self.classification.value,
            "spectrum": [float(v) for v in self.spectrum],
            "slope": self.slope,
            "branch": self.branch,
        }


class LimitKind(str, Enum):
    FIXED_POINT = "fixed_point"
    CYCLE = "cycle"
    BOUNDARY_ATTRACTED = "boundary_attracted"
    UNDETERMINED = "undetermined"


@dataclass(frozen=True, eq=False)
class LimitReport:
    """Estimated omega-limit set of one trajectory, in normalized coordinates.

    For cycles ``points`` lists one period in orbit order, starting from the
    lexicographically smallest point.  For the last two kinds it holds
    samples from the tail of the trajectory.
    """

    kind: LimitKind
    period: int
    points: tuple
    steps_used: int
    final_gap: float
    polish_shift: float = 0.0

    def as_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "period": self.period,
            "points": [[float(v) for v in p.u] for p in self.points],
            "steps_used": self.steps_used,
            "final_gap": float(self.final_gap),
            "polish_shift": float(self.polish_shift),
        }


# ---------------------------------------------------------------------------
# the scalar n = 2 case


def n2_branch(tmap: QuadraticMap1D) -> str:
    """Which closed form applies: ``identity``, ``affine`` or ``quadratic``."""
    if tmap.theta1 == 1.0 and tmap.theta2 == 1.0 and tmap.theta3 == 0.0:
        return "identity"
    if tmap.leading == 0.0:
        return "affine"
    return "quadratic"


def _n2_roots(tmap: QuadraticMap1D) -> list[float]:
    a, t2, t3 = tmap.a, tmap.theta2, tmap.theta3
    A = tmap.leading
    if t3 == 0.0:
        # T(x) - x = x (A x / a + theta2 - 1)
        roots = [0.0]
        if A != 0.0:
            roots.append((1.0 - t2) * a / A)
        return roots
    # T(x) - x = A x^2 / a - N x + theta3 a; the cancellation-free pair of
    # root formulas, which also stays finite on the affine locus A = 0
    N = 1.0 + 2.0 * t3 - t2
    sqrt_d = math.sqrt(max(tmap.discriminant, 0.0))
    q = 0.5 * (N + math.copysign(sqrt_d, N))
    if q == 0.0:
        return []
    roots = [t3 * a / q]
    if A != 0.0:
        roots.append(a * q / A)
    return roots


def classify_1d(tmap: QuadraticMap1D, x: float, hysteresis: float = HYSTERESIS) -> Stability:
    """Attracting if ``|T'(x)| < 1``, repelling if ``> 1``, neutral on the band."""
    if abs(tmap(x) - x) > FIXED_CHECK_TOL:
        raise NotAFixedPoint(f"T({x!r}) - {x!r} = {tmap(x) - x!r}")
    slope = abs(tmap.derivative(x))
    if slope < 1.0 - hysteresis:
        return Stability.ATTRACTING
    if slope > 1.0 + hysteresis:
        return Stability.REPELLING
    return Stability.NEUTRAL


def fixed_points_n2(tmap: QuadraticMap1D) -> list[FixedPointRecord]:
    """All fixed points of the scalar map in ``[0, a]``, in increasing order.

    Raises:
        WholeIntervalFixed: for the identity map ``theta = (1, 1, 0)``.
    """
    branch = n2_branch(tmap)
    if branch == "identity":
        raise WholeIntervalFixed(tmap.a)
    a = tmap.a
    found: list[float] = []
    for x in _n2_roots(tmap):
        if not (-ROOT_SLACK * a <= x <= a * (1.0 + ROOT_SLACK)):
            continue
        x = min(max(x, 0.0), a)
        if all(abs(x - y) > 1e-10 * a for y in found):
            found.append(x)
    records = []
    for x in sorted(found):
        r = x / a
        records.append(FixedPointRecord(
            u=NormalizedState([r, 1.0 - r]),
            residual=abs(tmap(x) - x) / a,
            classification=classify_1d(tmap, x),
            slope=float(tmap.derivative(x)),
            branch=branch,
        ))
    return records


# ---------------------------------------------------------------------------
# general n: Newton multistart


def tangent_basis(n: int) -> np.ndarray:
    """Orthonormal basis (n x (n-1)) of ``{delta : sum(delta) = 0}``."""
    return null_space(np.ones((1, n)))


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    n = v.size
    s = np.sort(v)[::-1]
    css = np.cumsum(s) - 1.0
    ind = np.arange(1, n + 1)
    rho = ind[s - css / ind > 0][-1]
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def simplex_seeds(n: int, count: int) -> np.ndarray:
    """Vertices, barycenter and ``count`` Halton points mapped onto the simplex."""
    seeds = [np.eye(n), np.full((1, n), 1.0 / n)]
    if count > 0 and n > 1:
        h = qmc.Halton(d=n, scramble=False).random(count + 1)[1:]
        e = -np.log1p(-np.clip(h, 0.0, 1.0 - 1e-16))
        seeds.append(e / e.sum(axis=1, keepdims=True))
    return np.vstack(seeds)


def _residual(op: GonosomalOperator, u: np.ndarray) -> float:
    return float(np.max(np.abs(op.bilinear(u, u) - u)))


def newton_fixed_point(op: GonosomalOperator, u0, basis=None, tol: float = NEWTON_TOL,
                       max_iter: int = 100) -> tuple[np.ndarray, float]:
    """Newton on ``V(u) - u`` inside the hyperplane ``sum(u) = 1``.

    Iterates are projected onto the simplex after each step.  The loop runs
    until the step falls below machine resolution (not merely below
    ``tol``) so that degenerate roots, where Newton only halves the error,
    still land close enough to be deduplicated.
    """
    n = op.n
    B = tangent_basis(n) if basis is None else basis
    u = project_simplex(np.asarray(u0, dtype=float))
    eye = np.eye(n)
    if n == 1:
        return u, _residual(op, u)
    res = _residual(op, u)
    for _ in range(max_iter):
        F = op.bilinear(u, u) - u
        Jt = B.T @ (op.jacobian_normalized(u) - eye) @ B
        xi = np.linalg.lstsq(Jt, -B.T @ F, rcond=None)[0]
        step = B @ xi
        cand = project_simplex(u + step)
        cand_res = _residual(op, cand)
        t = 1.0
        while cand_res > res and t > 1e-3:
            t /= 2.0
            cand = project_simplex(u + t * step)
            cand_res = _residual(op, cand)
        moved = float(np.max(np.abs(cand - u)))
        u, res = cand, cand_res
        if moved < 1e-15 or (res == 0.0) or (moved < tol * 1e-3 and res < tol):
            break
    return u, res


def tangent_spectrum(op: GonosomalOperator, u) -> np.ndarray:
    n = op.n
    if n == 1:
        return np.zeros(0)
    B = tangent_basis(n)
    J = B.T @ op.jacobian_normalized(u) @ B
    return np.sort(np.abs(np.linalg.eigvals(J)))[::-1]


def _classify_spectrum(mags, hysteresis: float = HYSTERESIS) -> Stability:
    mags = np.asarray(mags)
    if mags.size == 0:
        return Stability.ATTRACTING
    if np.any(np.abs(mags - 1.0) <= hysteresis):
        return Stability.NON_HYPERBOLIC
    if np.all(mags < 1.0):
        return Stability.ATTRACTING
    if np.all(mags > 1.0):
        return Stability.REPELLING
    return Stability.SADDLE


def classify_nd(op: GonosomalOperator, u, hysteresis: float = HYSTERESIS) -> tuple[Stability, tuple]:
    """Type of a fixed point from the tangent-space eigenvalue magnitudes.

    Returns:
        ``(classification, spectrum)`` with magnitudes sorted descending.
    """
    if isinstance(u, FixedPointRecord):
        u = u.u
    u = u.u if isinstance(u, NormalizedState) else np.asarray(u, dtype=float)
    if _residual(op, u) > FIXED_CHECK_TOL:
        raise NotAFixedPoint(f"residual {_residual(op, u)!r} at {u}")
    mags = tangent_spectrum(op, u)
    return _classify_spectrum(mags, hysteresis), tuple(float(m) for m in mags)


def enumerate_fixed_points(op: GonosomalOperator, seeds: int = 200,
                           residual_tol: float = RESIDUAL_TOL,
                           dedup_radius: float = DEDUP_RADIUS,
                           newton_tol: float = NEWTON_TOL) -> list[FixedPointRecord]:
    """Fixed points of the simplex map by multistart Newton.

    Raises:
        WholeIntervalFixed: for n=2 tensors whose scalar map is the identity.
    """
    n = op.n
    if n == 2 and n2_branch(op.quadratic_map()) == "identity":
        raise WholeIntervalFixed(op.a)
    B = tangent_basis(n) if n > 1 else None
    hits = []
    for seed in simplex_seeds(n, seeds):
        u, res = newton_fixed_point(op, seed, basis=B, tol=newton_tol)
        if res < residual_tol:
            hits.append((u, res))
    if not hits:
        log.warning("no fixed point found from %d seeds", seeds)
        return []
    hits.sort(key=lambda h: tuple(h[0]))
    clusters: list[list] = []
    for u, res in hits:
        for cl in clusters:
            if np.max(np.abs(cl[0] - u)) <= dedup_radius:
                if res < cl[1]:
                    cl[0], cl[1] = u, res
                break
        else:
            clusters.append([u, res])
    records = []
    for u, res in clusters:
        cls_, mags = classify_nd(op, u)
        records.append(FixedPointRecord(NormalizedState(u, tol=1e-9), res, cls_, mags))
    return records


# ---------------------------------------------------------------------------
# trajectories


def iterate(op: GonosomalOperator, z0: FullState, steps: int) -> list[FullState]:
    """``[z0, W(z0), ..., W^steps(z0)]`` using the full operator."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    traj = [z0]
    for _ in range(steps):
        traj.append(op.apply_full(traj[-1]))
    return traj


def normalized_start(op: GonosomalOperator, start) -> tuple[np.ndarray, int]:
    """First point of the simplex-map trajectory generated from ``start``.

    A full state whose female and male type distributions differ needs one
    application of the full operator before the dynamics reduce to ``V``;
    the second return value counts that step.
    """
    if isinstance(start, NormalizedState):
        return np.array(start.u), 0
    if isinstance(start, ReducedState):
        return start.x / start.x.sum(), 0
    if isinstance(start, FullState):
        u = start.x / start.x.sum()
        v = start.y / start.y.sum()
        if np.max(np.abs(u - v)) <= 1e-15:
            return u, 0
        s = op.bilinear(u, v)
        return s / s.sum(), 1
    u = np.asarray(start, dtype=float)
    return u / u.sum(), 0


def orbit(op: GonosomalOperator, u0, steps: int) -> np.ndarray:
    """Array of shape ``(steps + 1, n)`` with the normalized trajectory."""
    u = np.array(u0.u if isinstance(u0, NormalizedState) else u0, dtype=float)
    out = np.empty((steps + 1, u.size))
    run_orbit(op.flat, u, steps, out)
    return out


@dataclass
class OmegaOptions:
    max_steps: int = 100_000
    tol: float = 1e-9
    max_period: int = 64
    tail_window: int = 1024
    confirm: int = 32
    check_every: int = 32
    boundary_tol: float | None = None
    boundary_exit: bool = False
    min_separation: float = 1e-6
    polish: bool = True
    polish_radius: float = 1e-3
    tail_samples: int = 16

    def __post_init__(self):
        if self.tail_window < self.max_period + self.confirm:
            raise ValueError("tail_window must hold max_period + confirm points")


def _canonical_cycle(points: np.ndarray) -> np.ndarray:
    start = min(range(len(points)), key=lambda i: tuple(points[i]))
    return np.roll(points, -start, axis=0)


def _find_period(tail: np.ndarray, opts: OmegaOptions) -> int | None:
    """Smallest period ``p >= 2`` confirmed on the last ``confirm`` points."""
    c = opts.confirm
    L = tail.shape[0]
    top = min(opts.max_period, L - c)
    if top < 2:
        return None
    periods = np.arange(2, top + 1)
    now = np.arange(L - c, L)
    diffs = np.abs(tail[now][None, :, :] - tail[now[None, :] - periods[:, None]])
    ok = np.nonzero(diffs.max(axis=(1, 2)) < opts.tol)[0]
    if ok.size == 0:
        return None
    p = int(periods[ok[0]])
    pts = tail[-p:]
    gaps = np.max(np.abs(pts - np.roll(pts, 1, axis=0)), axis=1)
    if np.min(gaps) <= opts.min_separation:
        # an oscillation still contracting onto a fixed point
        return None
    return p


def omega_limit(op: GonosomalOperator, start, opts: OmegaOptions | None = None, **kw) -> LimitReport:
    """Estimate the omega-limit set of the trajectory from ``start``.

    Detection order: fixed point (``confirm`` consecutive steps shorter than
    ``tol``), then the smallest confirmed period up to ``max_period``, then
    boundary attraction (every tail point has a coordinate below
    ``boundary_tol``), else ``undetermined``.

    With ``boundary_exit`` the run stops as soon as a full tail window has
    stayed near the boundary, instead of spending the whole step budget.
    """
    if opts is None:
        opts = OmegaOptions(**kw)
    elif kw:
        raise TypeError("pass either opts or keyword options, not both")
    btol = opts.tol if opts.boundary_tol is None else opts.boundary_tol
    u, steps = normalized_start(op, start)
    W = opts.tail_window
    tail = u[None, :].copy()
    chunk = np.empty((opts.check_every, op.n))
    still = 0
    near_boundary = 1 if u.min() < btol else 0
    gap = math.inf
    done = 0
    while done < opts.max_steps:
        todo = min(opts.check_every, opts.max_steps - done)
        k, still, near_boundary, gap = run_chunk(
            op.flat, u, todo, opts.tol, btol, still, near_boundary, opts.confirm, chunk)
        done += k
        u = chunk[k - 1].copy()
        tail = np.concatenate([tail, chunk[:k]])[-W:]
        if still >= opts.confirm:
            return _fixed_report(op, u, steps + done, gap, opts)
        if tail.shape[0] >= opts.max_period + opts.confirm:
            p = _find_period(tail, opts)
            if p is not None:
                pts = _canonical_cycle(tail[-p:])
                dev = float(np.max(np.abs(tail[-p:] - tail[-2 * p:-p])))
                return LimitReport(LimitKind.CYCLE, p,
                                   tuple(NormalizedState(q, tol=1e-9) for q in pts), steps + done, dev)
        if opts.boundary_exit and near_boundary >= W:
            return _tail_report(LimitKind.BOUNDARY_ATTRACTED, tail, steps + done, gap, opts)
    kind = LimitKind.BOUNDARY_ATTRACTED if np.max(tail.min(axis=1)) < btol else LimitKind.UNDETERMINED
    return _tail_report(kind, tail, steps + done, gap, opts)


def _fixed_report(op, u, steps, gap, opts) -> LimitReport:
    shift = 0.0
    if opts.polish and op.n > 1:
        polished, res = newton_fixed_point(op, u)
        moved = float(np.max(np.abs(polished - u)))
        if res <= _residual(op, u) and moved <= opts.polish_radius:
            u, shift = polished, moved
    return LimitReport(LimitKind.FIXED_POINT, 1, (NormalizedState(u, tol=1e-9),), steps, gap, shift)


def _tail_report(kind, arr, steps, gap, opts) -> LimitReport:
    idx = np.unique(np.linspace(0, arr.shape[0] - 1, min(opts.tail_samples, arr.shape[0])).astype(int))
    pts = tuple(NormalizedState(arr[i], tol=1e-9) for i in idx)
    return LimitReport(kind, 0, pts, steps, gap)


# ---------------------------------------------------------------------------
# predicted limits


@dataclass(frozen=True, eq=False)
class PredictedLimit:
    """Limit predicted by the closed-form tables, at the reduced level.

    ``points`` are female blocks (each summing to ``a``); a cycle lists its
    points in orbit order starting from the initial one.  ``attracting``
    records whether the predicted fixed point has ``|T'| < 1``; it is
    ``None`` for cycles and for the identity map.
    """

    kind: str
    points: tuple
    a: float
    rule: str
    attracting: bool | None = None

    def full_states(self, beta: float) -> list[np.ndarray]:
        return [np.concatenate([p, beta * p]) for p in self.points]

    def normalized(self) -> list[np.ndarray]:
        return [p / self.a for p in self.points]

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "rule": self.rule,
            "points": [[float(v) for v in p] for p in self.points],
            "attracting": self.attracting,
        }


def _n2_point(x: float, a: float) -> np.ndarray:
    return np.array([x, a - x])


def predict_limit_n2(tmap: QuadraticMap1D, x0: float) -> PredictedLimit:
    """Limit of ``T^m(x0)`` from the two-type limit table.

    Special cases are checked before the general rows because the rows
    overlap: the identity map, the involution ``T(x) = a - x``, starts
    sitting exactly on a boundary fixed point, and the affine locus
    ``theta1 + theta3 = theta2``.
    """
    t1, t2, t3, a = tmap.theta1, tmap.theta2, tmap.theta3, tmap.a

    def fixed(x, rule):
        x = min(max(x, 0.0), a)
        att = abs(tmap.derivative(x)) < 1.0 - HYSTERESIS
        return PredictedLimit("fixed_point", (_n2_point(x, a),), a, rule, bool(att))

    if (t1, t2, t3) == (1.0, 1.0, 0.0):
        return PredictedLimit("identity", (_n2_point(x0, a),), a, "identity")
    if (t1, t2, t3) == (0.0, 1.0, 1.0):
        if x0 == a - x0:
            return fixed(x0, "involution-center")
        return PredictedLimit("cycle", (_n2_point(x0, a), _n2_point(a - x0, a)), a, "involution")
    if x0 == 0.0 and t3 == 0.0:
        return fixed(0.0, "fixed-start")
    if x0 == a and t1 == 1.0:
        return fixed(a, "fixed-start")
    if t1 + t3 == t2:
        return fixed(t3 * a / (1.0 - t2 + 2.0 * t3), "affine")
    if t1 < 1 and t2 <= 1 and t3 == 0:
        return fixed(0.0, "row1")
    if t1 == 1 and 1 <= t2 <= 2 and t3 > 0:
        return fixed(a, "row2")
    if t1 < 1 and t3 > 0:
        N = 1.0 + 2.0 * t3 - t2
        return fixed(2.0 * t3 * a / (N + math.sqrt(tmap.discriminant)), "row3")
    if t1 == 1 and t2 < 1 and t3 > 0:
        return fixed(t3 * a / (t3 - t2 + 1.0), "row4")
    if t1 == 1 and t2 < 1 and t3 == 0:
        return fixed(0.0, "row5")
    if t1 == 1 and 1 < t2 < 2 and t3 == 0:
        return fixed(a, "row6")
    if t2 > 1 and t3 == 0:
        return fixed((1.0 - t2) * a / (t1 - t2), "row7")
    raise AssertionError(f"limit table does not cover theta={(t1, t2, t3)}")


def predict_limit_U(uop: UOperator, x0: ReducedState) -> PredictedLimit:
    """Limit of the U-family trajectory; the ``x0_j == a`` edge uses exact equality."""
    a = x0.a
    target = uop.l
    rule = "j=l"
    if uop.j != uop.l:
        if x0.x[uop.j] == a:
            target, rule = uop.j, "x_j=a"
        else:
            rule = "x_j!=a"
    point = np.zeros(uop.n)
    point[target] = a
    return PredictedLimit("fixed_point", (point,), a, rule)

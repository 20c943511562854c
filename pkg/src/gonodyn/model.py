"""Parameters, heredity tensors and population states.

Three coordinate levels are used throughout the package:

* ``FullState``: female masses ``x`` and male masses ``y`` with
  ``sum(x) + sum(y) == 1``.  Points of ``S`` and of its invariant slice
  ``S_a`` (``sum(x) == a``) are both full states.
* ``ReducedState``: the female block alone, ``sum(x) == a``.
* ``NormalizedState``: ``u = x / a`` on the standard simplex.

All types are immutable.  Arrays are copied on construction and marked
read-only.
"""

from __future__ import annotations

from dataclasses import InitVar, dataclass, field

import numpy as np

from gonodyn.errors import DegenerateRate, InvalidParams, InvalidState, NotStochastic, ZeroSexMass

SUM_TOL = 1e-12
TENSOR_TOL = 1e-12


def _frozen_array(values, ndim=1) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise InvalidState(f"expected a {ndim}-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidState("array contains non-finite values")
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# temperature parameters and the mixing rate


@dataclass(frozen=True)
class TemperatureParams:
    """Incubation-temperature probabilities and per-environment sex ratios.

    ``tau1``, ``tau2`` and ``tau3`` are the chances that an egg sits at
    feminizing, masculinizing or transition temperatures.  ``mu_r`` and
    ``mu_r_bar`` are the female and male fractions hatched in environment
    ``r``.
    """

    tau1: float
    tau2: float
    tau3: float
    mu1: float
    mu1_bar: float
    mu2: float
    mu2_bar: float

    def __post_init__(self):
        taus = (self.tau1, self.tau2, self.tau3)
        if min(taus) < 0:
            raise InvalidParams(f"temperature probabilities must be >= 0, got {taus}")
        if abs(sum(taus) - 1.0) > SUM_TOL:
            raise InvalidParams(f"tau1 + tau2 + tau3 must equal 1, got {sum(taus)!r}")
        if abs(self.mu1 + self.mu1_bar - 1.0) > SUM_TOL:
            raise InvalidParams("mu1 + mu1_bar must equal 1")
        if abs(self.mu2 + self.mu2_bar - 1.0) > SUM_TOL:
            raise InvalidParams("mu2 + mu2_bar must equal 1")
        if not (self.mu1 >= self.mu1_bar >= 0):
            raise InvalidParams("feminizing environment needs mu1 >= mu1_bar >= 0")
        if not (0 <= self.mu2 <= self.mu2_bar):
            raise InvalidParams("masculinizing environment needs 0 <= mu2 <= mu2_bar")

    @classmethod
    def from_mu(cls, tau, mu1: float, mu2: float) -> "TemperatureParams":
        """Build from ``(tau1, tau2, tau3)`` and the two female fractions."""
        tau1, tau2, tau3 = tau
        return cls(tau1, tau2, tau3, mu1, 1.0 - mu1, mu2, 1.0 - mu2)


@dataclass(frozen=True)
class MixingRate:
    """Probability ``a`` that an egg develops female, and ``b = 1 - a``.

    Only ``0 < a < 1`` is accepted: with one sex missing the evolution
    operator divides by zero.
    """

    a: float
    b: float = None
    beta: float = field(init=False)

    def __post_init__(self):
        a = float(self.a)
        if not np.isfinite(a) or a <= 0.0 or a >= 1.0:
            raise DegenerateRate(f"female rate a must lie in (0, 1), got {self.a!r}")
        b = 1.0 - a if self.b is None else float(self.b)
        if abs(a + b - 1.0) > SUM_TOL:
            raise InvalidParams(f"a + b must equal 1, got {a + b!r}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "beta", b / a)


def derive_rates(params: TemperatureParams) -> MixingRate:
    """Female/male rates from the temperature model.

    ``a = mu1*tau1 + mu2*tau2 + tau3/2`` and symmetrically for ``b`` with
    the male fractions.

    Raises:
        DegenerateRate: if ``a`` is 0 or 1.
    """
    a = params.mu1 * params.tau1 + params.mu2 * params.tau2 + 0.5 * params.tau3
    b = params.mu1_bar * params.tau1 + params.mu2_bar * params.tau2 + 0.5 * params.tau3
    return MixingRate(a, b)


# ---------------------------------------------------------------------------
# heredity tensor


@dataclass(frozen=True)
class RowViolation:
    i: int
    p: int
    row_sum: float
    min_entry: float


@dataclass(frozen=True)
class TensorReport:
    ok: bool
    n: int
    violations: tuple = ()
    shape_error: str | None = None

    def as_dict(self) -> dict:
        """JSON-ready view with 1-based indices."""
        return {
            "ok": self.ok,
            "n": self.n,
            "shape_error": self.shape_error,
            "violations": [
                {"i": v.i + 1, "p": v.p + 1, "row_sum": v.row_sum, "min_entry": v.min_entry}
                for v in self.violations
            ],
        }


def validate_tensor(theta, tol: float = TENSOR_TOL) -> TensorReport:
    """Check nonnegativity and ``sum_k theta[i, p, k] == 1`` for every pair.

    Never raises on bad values; every offending ``(i, p)`` pair is listed so
    callers can print them all at once.  Indices in the report are 0-based.
    """
    arr = np.asarray(theta, dtype=float)
    if arr.ndim != 3 or not (arr.shape[0] == arr.shape[1] == arr.shape[2]) or arr.shape[0] < 1:
        return TensorReport(False, 0, (), f"expected an n x n x n array, got shape {arr.shape}")
    n = arr.shape[0]
    if not np.all(np.isfinite(arr)):
        return TensorReport(False, n, (), "tensor contains non-finite values")
    sums = arr.sum(axis=2)
    mins = arr.min(axis=2)
    bad = (np.abs(sums - 1.0) > tol) | (mins < 0.0)
    violations = tuple(
        RowViolation(int(i), int(p), float(sums[i, p]), float(mins[i, p]))
        for i, p in zip(*np.nonzero(bad))
    )
    return TensorReport(not violations, n, violations)


@dataclass(frozen=True, eq=False)
class HeredityTensor:
    """Offspring-type proportions ``theta[i, p, k]`` (0-based).

    Entry ``(i, p, k)`` is the share of type ``k`` eggs laid by a type ``i``
    female crossed with a type ``p`` male.  No symmetry in ``(i, p)`` is
    assumed.
    """

    theta: np.ndarray

    def __post_init__(self):
        report = validate_tensor(self.theta)
        if not report.ok:
            if report.shape_error:
                raise InvalidParams(report.shape_error)
            raise NotStochastic(report)
        object.__setattr__(self, "theta", _frozen_array(self.theta, ndim=3))

    @property
    def n(self) -> int:
        return self.theta.shape[0]

    @classmethod
    def from_sparse(cls, n: int, entries) -> "HeredityTensor":
        """Build from ``(i, p, k, value)`` tuples, 0-based; unlisted entries are 0."""
        theta = np.zeros((n, n, n))
        for i, p, k, value in entries:
            theta[i, p, k] = value
        return cls(theta)


# ---------------------------------------------------------------------------
# states


@dataclass(frozen=True, eq=False)
class FullState:
    """A point ``z = (x, y)`` of ``S``: both sexes present, total mass 1."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = _frozen_array(self.x)
        y = _frozen_array(self.y)
        if x.shape != y.shape:
            raise InvalidState(f"x and y differ in length ({x.size} vs {y.size})")
        if x.size == 0:
            raise InvalidState("empty state")
        if x.min() < 0 or y.min() < 0:
            raise InvalidState("masses must be nonnegative")
        sx, sy = x.sum(), y.sum()
        if sx <= 0 or sy <= 0:
            raise ZeroSexMass("both female and male mass must be positive")
        if abs(sx + sy - 1.0) > SUM_TOL:
            raise InvalidState(f"total mass must be 1, got {sx + sy!r}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.size

    def in_Sa(self, a: float, tol: float = SUM_TOL) -> bool:
        return abs(self.x.sum() - a) <= tol and abs(self.y.sum() - (1.0 - a)) <= tol

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.y])


@dataclass(frozen=True, eq=False)
class ReducedState:
    """Female block ``x`` of a state in ``S_a``; ``sum(x) == a``."""

    x: np.ndarray
    a: float

    def __post_init__(self):
        x = _frozen_array(self.x)
        if x.size == 0:
            raise InvalidState("empty state")
        if x.min() < 0:
            raise InvalidState("masses must be nonnegative")
        if abs(x.sum() - self.a) > SUM_TOL:
            raise InvalidState(f"reduced state must sum to a={self.a!r}, got {x.sum()!r}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "a", float(self.a))

    @property
    def n(self) -> int:
        return self.x.size


@dataclass(frozen=True, eq=False)
class NormalizedState:
    """A probability vector ``u`` on the standard simplex."""

    u: np.ndarray
    tol: InitVar[float] = SUM_TOL

    def __post_init__(self, tol):
        u = _frozen_array(self.u)
        if u.size == 0:
            raise InvalidState("empty state")
        if u.min() < 0:
            raise InvalidState("probabilities must be nonnegative")
        if abs(u.sum() - 1.0) > tol:
            raise InvalidState(f"probabilities must sum to 1, got {u.sum()!r}")
        object.__setattr__(self, "u", u)

    @property
    def n(self) -> int:
        return self.u.size


def normalize(x: ReducedState) -> NormalizedState:
    """``u = x / a``."""
    return NormalizedState(x.x / x.a, tol=SUM_TOL / x.a)


def lift(u: NormalizedState, rate: MixingRate) -> FullState:
    """Embed ``u`` in ``S_a`` with males proportional to females, ``y = beta * x``."""
    return FullState(rate.a * u.u, rate.b * u.u)


def reduce(z: FullState, rate: MixingRate) -> ReducedState:
    """Female block of a state in ``S_a``."""
    return ReducedState(z.x, rate.a)

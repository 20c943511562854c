"""Evolution operators of the sex-linked population and their builders.

One ``GonosomalOperator`` evaluates the dynamics at every coordinate level:

=================  ========================================================
``apply_full``     ``W_a`` on ``S``: ``x'_k = a * s_k / (sum x * sum y)``
``apply_restricted`` ``W`` on ``S_a``: ``x'_k = s_k / (1-a)``, ``y'_k = s_k / a``
``apply_reduced``  female block: ``x'_k = sum_ip theta_ipk x_i x_p / a``
``apply_normalized`` simplex map: ``u'_k = sum_ip theta_ipk u_i u_p``
=================  ========================================================

where ``s_k = sum_ip theta_ipk x_i y_p``.  All indices are 0-based here;
the CLI converts from the 1-based indices used in config files.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from gonodyn._kernels import simplex_step
from gonodyn.errors import (
    BadPartition,
    BadPattern,
    HalfForbidden,
    IndexOutOfRange,
    InvalidParams,
    NotInSa,
    ZeroSexMass,
)
from gonodyn.model import (
    FullState,
    HeredityTensor,
    MixingRate,
    NormalizedState,
    ReducedState,
)

SA_TOL = 1e-9
PARAM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class GonosomalOperator:
    """Quadratic evolution operator for heredity tensor ``theta`` and rate ``a``."""

    theta: HeredityTensor
    rate: MixingRate
    flat: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.theta.n
        object.__setattr__(self, "flat", np.ascontiguousarray(self.theta.theta.reshape(n * n, n)))

    @property
    def n(self) -> int:
        return self.theta.n

    @property
    def a(self) -> float:
        return self.rate.a

    def bilinear(self, x, y) -> np.ndarray:
        """``s_k = sum_{i,p} theta[i, p, k] * x[i] * y[p]`` for raw arrays."""
        return np.outer(x, y).ravel() @ self.flat

    def step(self, u) -> np.ndarray:
        """One normalized step on a raw array, projected back onto the simplex.

        ``sum(V(u)) = sum(u)**2``, so the hyperplane ``sum(u) = 1`` repels
        rounding errors at rate 2; dividing by the output sum removes that
        drift without changing the map on the simplex.
        """
        out = np.empty(self.n)
        simplex_step(self.flat, np.asarray(u, dtype=float), out)
        return out

    def apply_full(self, z: FullState) -> FullState:
        sx, sy = z.x.sum(), z.y.sum()
        if sx <= 0 or sy <= 0:
            raise ZeroSexMass("operator undefined without both sexes")
        s = self.bilinear(z.x, z.y) / (sx * sy)
        return FullState(self.a * s, (1.0 - self.a) * s)

    def apply_restricted(self, z: FullState) -> FullState:
        if not z.in_Sa(self.a, tol=SA_TOL):
            raise NotInSa(
                f"state has female mass {z.x.sum()!r} and male mass {z.y.sum()!r}, "
                f"expected {self.a!r} and {1.0 - self.a!r}"
            )
        s = self.bilinear(z.x, z.y)
        return FullState(s / (1.0 - self.a), s / self.a)

    def apply_reduced(self, x: ReducedState) -> ReducedState:
        return ReducedState(self.bilinear(x.x, x.x) / x.a, x.a)

    def apply_normalized(self, u: NormalizedState) -> NormalizedState:
        return NormalizedState(self.bilinear(u.u, u.u))

    def jacobian_normalized(self, u) -> np.ndarray:
        """Matrix ``J[k, m] = d u'_k / d u_m`` of the simplex map.

        ``J[k, m] = sum_p theta[m, p, k] u_p + sum_i theta[i, m, k] u_i``.
        Accepts a ``NormalizedState`` or a raw array.
        """
        u = u.u if isinstance(u, NormalizedState) else np.asarray(u, dtype=float)
        th = self.theta.theta
        return np.einsum("mpk,p->km", th, u) + np.einsum("imk,i->km", th, u)

    def quadratic_map(self) -> "QuadraticMap1D":
        return QuadraticMap1D.from_tensor(self.theta, self.a)


# ---------------------------------------------------------------------------
# the n = 2 scalar map


@dataclass(frozen=True)
class QuadraticMap1D:
    """Scalar map on ``[0, a]`` induced by a two-type tensor.

    ``T(x) = (theta1 + theta3 - theta2) x**2 / a + (theta2 - 2 theta3) x + theta3 a``
    with ``theta1 = theta[0,0,0]``, ``theta2 = theta[0,1,0] + theta[1,0,0]``
    and ``theta3 = theta[1,1,0]``.
    """

    theta1: float
    theta2: float
    theta3: float
    a: float

    def __post_init__(self):
        for name, value, hi in (("theta1", self.theta1, 1.0), ("theta2", self.theta2, 2.0),
                                ("theta3", self.theta3, 1.0)):
            if not (-PARAM_TOL <= value <= hi + PARAM_TOL):
                raise InvalidParams(f"{name}={value!r} outside [0, {hi:g}]")
        # a = 1 is allowed here: the scalar map is defined on [0, 1], only the
        # full operator needs both sexes
        if not (0.0 < self.a <= 1.0):
            raise InvalidParams(f"a={self.a!r} outside (0, 1]")

    @classmethod
    def from_tensor(cls, theta: HeredityTensor, a: float) -> "QuadraticMap1D":
        if theta.n != 2:
            raise InvalidParams(f"the scalar map needs n=2, got n={theta.n}")
        th = theta.theta
        return cls(float(th[0, 0, 0]), float(th[0, 1, 0] + th[1, 0, 0]), float(th[1, 1, 0]), a)

    @property
    def leading(self) -> float:
        """Quadratic coefficient ``theta1 + theta3 - theta2`` (before dividing by a)."""
        return self.theta1 + self.theta3 - self.theta2

    @property
    def discriminant(self) -> float:
        return (self.theta2 - 1.0) ** 2 + 4.0 * self.theta3 * (1.0 - self.theta1)

    def __call__(self, x1):
        return self.leading / self.a * x1 * x1 + (self.theta2 - 2.0 * self.theta3) * x1 + self.theta3 * self.a

    def derivative(self, x1):
        return 2.0 * self.leading / self.a * x1 + self.theta2 - 2.0 * self.theta3

    def tensor(self) -> HeredityTensor:
        return n2_tensor(self.theta1, self.theta2, self.theta3)


def n2_tensor(theta1: float, theta2: float, theta3: float) -> HeredityTensor:
    """Two-type tensor with the given effective coefficients, mixed pairs split evenly."""
    half = theta2 / 2.0
    th = np.array([
        [[theta1, 1.0 - theta1], [half, 1.0 - half]],
        [[half, 1.0 - half], [theta3, 1.0 - theta3]],
    ])
    return HeredityTensor(th)


# ---------------------------------------------------------------------------
# operator families


def build_C1(n: int, values: Mapping) -> HeredityTensor:
    """Volterra-pattern tensor: offspring of ``(i, p)`` are of type ``i`` or ``p``.

    Args:
        n: number of types.
        values: maps each pair ``(i, p)`` to ``{k: theta_ipk}``.  Diagonal
            pairs may be omitted (they default to ``theta_iii = 1``).

    Raises:
        BadPattern: mass on a type ``k`` outside ``{i, p}``.
        HalfForbidden: any coefficient equal to 1/2.
        NotStochastic: a pair's row does not sum to 1.
    """
    theta = np.zeros((n, n, n))
    for i in range(n):
        theta[i, i, i] = 1.0
    for (i, p), row in values.items():
        if not (0 <= i < n and 0 <= p < n):
            raise IndexOutOfRange(f"pair ({i}, {p}) outside 0..{n - 1}")
        theta[i, p, :] = 0.0
        for k, value in row.items():
            if not 0 <= k < n:
                raise IndexOutOfRange(f"type {k} outside 0..{n - 1}")
            if value != 0 and k not in (i, p):
                raise BadPattern(f"theta[{i},{p},{k}]={value!r}: offspring type must be {i} or {p}")
            if abs(value - 0.5) <= PARAM_TOL:
                raise HalfForbidden(f"theta[{i},{p},{k}] must differ from 1/2")
            theta[i, p, k] = value
    return HeredityTensor(theta)


def random_C1(n: int, rng: np.random.Generator, symmetric: bool = True) -> HeredityTensor:
    """Random tensor of class C1; symmetric in ``(i, p)`` unless asked otherwise."""
    values = {}
    for i in range(n):
        for p in range(n):
            if i == p or (symmetric and p < i):
                continue
            t = rng.uniform()
            while abs(t - 0.5) <= PARAM_TOL:
                t = rng.uniform()
            values[(i, p)] = {i: t, p: 1.0 - t}
            if symmetric:
                values[(p, i)] = {i: t, p: 1.0 - t}
    return build_C1(n, values)


def build_C2(n: int, m: int, cross, mirror=None) -> HeredityTensor:
    """Tensor of class C2 with type 0 absorbing all within-group matings.

    Types split into ``{0}``, ``F = {1..m-1}`` and ``M = {m..n-1}``
    (``m`` counts as in the 1-based partition ``{1}, {2..m}, {m+1..n}``).
    Pairs inside ``F + {0}`` or inside ``M + {0}`` produce type 0 only.

    Args:
        cross: array ``(m-1, n-m, n)`` of offspring rows for female in F,
            male in M.
        mirror: rows for female in M, male in F; defaults to the transpose
            of ``cross``.
    """
    if not (2 <= m <= n - 1):
        raise BadPartition(f"need 2 <= m <= n-1, got m={m}, n={n}")
    cross = np.asarray(cross, dtype=float)
    if cross.shape != (m - 1, n - m, n):
        raise BadPartition(f"cross block must have shape {(m - 1, n - m, n)}, got {cross.shape}")
    mirror = cross.transpose(1, 0, 2) if mirror is None else np.asarray(mirror, dtype=float)
    if mirror.shape != (n - m, m - 1, n):
        raise BadPartition(f"mirror block must have shape {(n - m, m - 1, n)}, got {mirror.shape}")
    theta = np.zeros((n, n, n))
    theta[:, :, 0] = 1.0
    F = np.arange(1, m)
    M = np.arange(m, n)
    theta[np.ix_(F, M)] = cross
    theta[np.ix_(M, F)] = mirror
    return HeredityTensor(theta)


def random_C2(n: int, m: int, rng: np.random.Generator) -> HeredityTensor:
    cross = rng.dirichlet(np.ones(n), size=(m - 1, n - m))
    mirror = rng.dirichlet(np.ones(n), size=(n - m, m - 1))
    return build_C2(n, m, cross, mirror)


def build_C3(c: float) -> HeredityTensor:
    """Three-type tensor with the periodic simplex map

    ``u1' = c u3^2 + 2 u2 u3``, ``u2' = (1-c) u3^2 + 2 u1 u3``, ``u3' = (u1 + u2)^2``.
    """
    if not (0.0 <= c <= 1.0):
        raise InvalidParams(f"c={c!r} outside [0, 1]")
    theta = np.zeros((3, 3, 3))
    for i in (0, 1):
        for p in (0, 1):
            theta[i, p, 2] = 1.0
    theta[0, 2, 1] = theta[2, 0, 1] = 1.0
    theta[1, 2, 0] = theta[2, 1, 0] = 1.0
    theta[2, 2, 0] = c
    theta[2, 2, 1] = 1.0 - c
    return HeredityTensor(theta)


@dataclass(frozen=True)
class UOperator:
    """Operator where every mating with a male of type ``j`` copies the mother's
    type and every other mating yields type ``l``.

    On ``S_a^{n-1}`` the female map simplifies to
    ``x'_k = x_k x_j / a`` for ``k != l`` and ``x'_l = x_l x_j / a + (a - x_j)``.
    """

    n: int
    j: int
    l: int

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParams(f"n must be positive, got {self.n}")
        for name, idx in (("j", self.j), ("l", self.l)):
            if not 0 <= idx < self.n:
                raise IndexOutOfRange(f"{name}={idx} outside 0..{self.n - 1}")

    def tensor(self) -> HeredityTensor:
        n, j, l = self.n, self.j, self.l
        theta = np.zeros((n, n, n))
        theta[:, :, l] = 1.0
        theta[:, j, :] = np.eye(n)
        return HeredityTensor(theta)

    def operator(self, rate: MixingRate) -> GonosomalOperator:
        return GonosomalOperator(self.tensor(), rate)

    def apply_reduced(self, x: ReducedState) -> ReducedState:
        a, xs = x.a, x.x
        xj = xs[self.j]
        out = xs * xj / a
        out[self.l] += a - xj
        return ReducedState(out, a)


def build_U(n: int, j: int, l: int) -> UOperator:
    return UOperator(n, j, l)


__all__ = [
    "GonosomalOperator",
    "QuadraticMap1D",
    "UOperator",
    "build_C1",
    "build_C2",
    "build_C3",
    "build_U",
    "n2_tensor",
    "random_C1",
    "random_C2",
]

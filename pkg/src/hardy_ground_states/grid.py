"""Log-uniform radial grids and sampled radial fields.

A radial function u(r) on R^N is stored by its samples at r_i = exp(s_i).
Integrals use the Emden-Fowler profile v(s) = r^((N-2)/2) u(r), for which

    ||u||_lam^2      = |S^{N-1}| int (v'^2 + m^2 v^2) ds,   m^2 = Lambda_N - lam,
    int |u|^{2*}     = |S^{N-1}| int |v|^{2*} ds,
    int |u|^a |w|^b  = |S^{N-1}| int |v|^a |y|^b ds        (a + b = 2*).

The discrete forms are second order (forward differences for v', trapezoid
weights otherwise). Beyond either end of the grid the field is continued by
its known asymptotics v ~ exp(-m |s|) (that is u ~ r^(-a) at the origin and
u ~ r^(-(N-2-a)) at infinity); the resulting tails enter as closed-form
boundary terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .extremals import sphere_area

MIN_NODES = 64


class GridError(ValueError):
    """Structural mismatch or an unusable grid."""


@dataclass(frozen=True, eq=False)
class RadialGrid:
    N: int
    r_min: float = 1e-4
    r_max: float = 1e4
    M: int = 512

    def __post_init__(self):
        if not 0 < self.r_min < self.r_max < math.inf:
            raise GridError("need 0 < r_min < r_max < inf")
        if self.M < MIN_NODES:
            raise GridError(f"grid needs at least {MIN_NODES} nodes, got {self.M}")
        s = np.linspace(math.log(self.r_min), math.log(self.r_max), self.M)
        s.setflags(write=False)
        object.__setattr__(self, "s", s)
        r = np.exp(s)
        r.setflags(write=False)
        object.__setattr__(self, "r", r)

    @property
    def spacing(self) -> str:
        return "log_uniform"

    @property
    def nodes(self):
        return self.r

    @property
    def h(self) -> float:
        return (self.s[-1] - self.s[0]) / (self.M - 1)

    @property
    def k(self) -> float:
        return (self.N - 2) / 2.0

    @property
    def area(self) -> float:
        return sphere_area(self.N)

    @property
    def weights(self):
        """Trapezoid weights in s."""
        w = np.full(self.M, self.h)
        w[0] = w[-1] = self.h / 2
        return w

    def refined(self) -> "RadialGrid":
        """Grid with spacing halved; every old node is kept."""
        return RadialGrid(self.N, self.r_min, self.r_max, 2 * self.M - 1)

    def matches(self, other: "RadialGrid") -> bool:
        return (self.N == other.N and self.M == other.M
                and self.r_min == other.r_min and self.r_max == other.r_max)

    def to_profile(self, u):
        return self.r**self.k * np.asarray(u, dtype=float)

    def from_profile(self, v):
        return np.asarray(v, dtype=float) * self.r ** (-self.k)


@dataclass(frozen=True, eq=False)
class RadialField:
    """Samples u(r_i) of one radial component."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.M,):
            raise GridError(f"expected {self.grid.M} samples, got shape {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_profile(cls, grid: RadialGrid, v) -> "RadialField":
        return cls(grid, grid.from_profile(v))

    @classmethod
    def from_function(cls, grid: RadialGrid, fn) -> "RadialField":
        return cls(grid, fn(grid.r))

    @property
    def profile(self):
        return self.grid.to_profile(self.values)

    def scaled(self, t: float) -> "RadialField":
        return RadialField(self.grid, t * self.values)


# ---------------------------------------------------------------------------
# discrete integrals on profiles v (arrays of length M)


def dirichlet_form(grid: RadialGrid, v, m: float) -> float:
    """Discrete ||u||_lam^2 for the profile ``v`` (decay rate ``m``)."""
    dv = np.diff(v)
    core = np.sum(dv * dv) / grid.h + m * m * np.dot(grid.weights, v * v)
    return grid.area * (core + m * (v[0] ** 2 + v[-1] ** 2))


def dirichlet_gradient(grid: RadialGrid, v, m: float):
    """Gradient of :func:`dirichlet_form` with respect to the samples of v."""
    return 2.0 * grid.area * stiffness_apply(grid, v, m)


def stiffness_bands(grid: RadialGrid, m: float):
    """(diagonal, off-diagonal) of the symmetric tridiagonal form matrix K.

    ``dirichlet_form(v) = area * v^T K v``.
    """
    h = grid.h
    diag = np.full(grid.M, 2.0 / h) + m * m * grid.weights
    diag[0] += -1.0 / h + m
    diag[-1] += -1.0 / h + m
    off = np.full(grid.M - 1, -1.0 / h)
    return diag, off


def stiffness_apply(grid: RadialGrid, v, m: float):
    diag, off = stiffness_bands(grid, m)
    out = diag * v
    out[:-1] += off * v[1:]
    out[1:] += off * v[:-1]
    return out


def power_integral(grid: RadialGrid, v, p: float, m: float) -> float:
    """Discrete int |u|^p with p = 2*, including the asymptotic tails."""
    a = np.abs(v)
    core = np.dot(grid.weights, a**p)
    tails = (a[0] ** p + a[-1] ** p) / (p * m)
    return grid.area * (core + tails)


def mixed_integral(grid: RadialGrid, v, y, p: float, q: float,
                   m_v: float, m_y: float) -> float:
    """Discrete int |u|^p |w|^q with p + q = 2*, including tails."""
    av, ay = np.abs(v), np.abs(y)
    core = np.dot(grid.weights, av**p * ay**q)
    rate = p * m_v + q * m_y
    tails = (av[0] ** p * ay[0] ** q + av[-1] ** p * ay[-1] ** q) / rate
    return grid.area * (core + tails)


def tail_weights(grid: RadialGrid, rate: float):
    """Weights w with sum(w * g) = trapezoid + tails for a density g."""
    w = grid.weights.copy()
    w[0] += 1.0 / rate
    w[-1] += 1.0 / rate
    return w

"""Energy functional, Nehari constraints and threshold predicates.

For a tuple (u_1, ..., u_r) every quantity used here is a polynomial in
three families of integrals,

    A_j  = ||u_j||_{lam_j}^2,
    P_j  = int |u_j|^{2*},
    M_jk = int |u_j|^{alpha_jk} |u_k|^{alpha_kj}     (symmetric in j, k),

so both sampled tuples (:class:`StateTuple`) and closed-form bubble tuples
(:class:`BubbleTuple`) only need to provide :meth:`integrals`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import grid as g
from .extremals import (Bubble, DomainError, HardyParams, bubble_integrals,
                        critical_exponent, hardy_limit, mixed_bubble_integral,
                        theta_single)

DEFECT_RTOL = 1e-8
ZERO_NORM = 1e-14
ALPHA_SUM_TOL = 1e-12


class ProjectionError(ArithmeticError):
    """The diagonal Nehari projection is undefined (int F <= 0)."""


class PredicateNotApplicable(ValueError):
    """A sign hypothesis of a threshold predicate is violated."""


@dataclass(frozen=True, eq=False)
class CouplingSpec:
    """Interaction data of the r-component system.

    ``self_weights`` multiplies the pure power u_j^{2*-1}; the model proper
    has all weights equal to one, the N = 4 gamma-system uses gamma_jj.
    Diagonal entries of ``alphas`` are ignored and stored as NaN.
    """

    N: int
    lambdas: Sequence[float]
    betas: np.ndarray
    alphas: np.ndarray
    self_weights: Sequence[float] | None = None

    def __post_init__(self):
        lam = np.array(self.lambdas, dtype=float)
        r = lam.size
        if r < 2:
            raise DomainError("need at least two components")
        for value in lam:
            HardyParams(self.N, value)
            if value <= 0:
                raise DomainError("Hardy coefficients must be positive")
        beta = np.array(self.betas, dtype=float)
        alpha = np.array(self.alphas, dtype=float)
        if beta.shape != (r, r) or alpha.shape != (r, r):
            raise DomainError("betas and alphas must be r x r")
        if not np.allclose(np.diag(beta), 0.0):
            raise DomainError("betas must have zero diagonal")
        if not np.allclose(beta, beta.T, rtol=0, atol=1e-14):
            raise DomainError("betas must be symmetric")
        crit = critical_exponent(self.N)
        off = ~np.eye(r, dtype=bool)
        if np.any(alpha[off] <= 1):
            raise DomainError("coupling exponents must exceed 1")
        if np.any(np.abs((alpha + alpha.T)[off] - crit) > ALPHA_SUM_TOL):
            raise DomainError(f"alpha_jk + alpha_kj must equal 2* = {crit}")
        np.fill_diagonal(alpha, np.nan)
        w = np.ones(r) if self.self_weights is None else np.array(self.self_weights, float)
        if w.shape != (r,):
            raise DomainError("self_weights must have length r")
        for name, arr in (("lambdas", lam), ("betas", beta), ("alphas", alpha),
                          ("self_weights", w)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def r(self) -> int:
        return self.lambdas.size

    @property
    def crit(self) -> float:
        return critical_exponent(self.N)

    def params(self, j: int) -> HardyParams:
        return HardyParams(self.N, float(self.lambdas[j]))

    def decay_rates(self):
        return np.sqrt(hardy_limit(self.N) - self.lambdas)

    def with_betas(self, betas) -> "CouplingSpec":
        return CouplingSpec(self.N, self.lambdas, betas, _alpha_input(self.alphas),
                            self.self_weights)

    def permuted(self, order) -> "CouplingSpec":
        order = np.asarray(order)
        ix = np.ix_(order, order)
        return CouplingSpec(self.N, self.lambdas[order], self.betas[ix],
                            _alpha_input(self.alphas)[ix], self.self_weights[order])

    @classmethod
    def uniform(cls, N: int, lambdas, beta: float, alpha: float | None = None):
        """All pairs share one beta and one exponent (default 2*/2)."""
        r = len(lambdas)
        crit = critical_exponent(N)
        a = crit / 2 if alpha is None else alpha
        alphas = np.full((r, r), a)
        if a != crit / 2:
            iu = np.triu_indices(r, 1)
            alphas[(iu[1], iu[0])] = crit - a
        betas = np.full((r, r), float(beta))
        np.fill_diagonal(betas, 0.0)
        return cls(N, lambdas, betas, alphas)

    def to_dict(self) -> dict:
        return {"N": self.N, "lambdas": self.lambdas.tolist(),
                "betas": self.betas.tolist(),
                "alphas": _alpha_input(self.alphas).tolist(),
                "self_weights": self.self_weights.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "CouplingSpec":
        return cls(d["N"], d["lambdas"], d["betas"], d["alphas"], d.get("self_weights"))


def _alpha_input(alphas):
    a = np.array(alphas, dtype=float)
    np.fill_diagonal(a, 0.0)
    return a


@dataclass(frozen=True)
class Integrals:
    norms: np.ndarray
    powers: np.ndarray
    mixed: np.ndarray

    def scaled(self, t, spec: CouplingSpec) -> "Integrals":
        t = np.broadcast_to(np.asarray(t, dtype=float), (spec.r,))
        tt = np.abs(t)
        al = np.nan_to_num(spec.alphas)
        mix = np.zeros_like(self.mixed)
        off = ~np.eye(spec.r, dtype=bool)
        factor = tt[:, None] ** al * tt[None, :] ** al.T
        mix[off] = self.mixed[off] * factor[off]
        return Integrals(self.norms * tt**2, self.powers * tt**spec.crit, mix)


# ---------------------------------------------------------------------------
# tuples


@dataclass(frozen=True, eq=False)
class StateTuple:
    """r sampled radial components on one common grid."""

    components: tuple
    spec: CouplingSpec

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) != self.spec.r:
            raise g.GridError(f"expected {self.spec.r} components, got {len(comps)}")
        grid0 = comps[0].grid
        for c in comps:
            if not c.grid.matches(grid0):
                raise g.GridError("all components must share one grid")
        if grid0.N != self.spec.N:
            raise g.GridError("grid dimension differs from the coupling spec")
        object.__setattr__(self, "components", comps)

    @property
    def grid(self) -> g.RadialGrid:
        return self.components[0].grid

    @classmethod
    def from_profiles(cls, spec, grid, profiles) -> "StateTuple":
        return cls(tuple(g.RadialField.from_profile(grid, v) for v in profiles), spec)

    def profiles(self) -> np.ndarray:
        return np.array([c.profile for c in self.components])

    def scaled(self, t) -> "StateTuple":
        t = np.broadcast_to(np.asarray(t, dtype=float), (self.spec.r,))
        return StateTuple(tuple(c.scaled(tj) for c, tj in zip(self.components, t)),
                          self.spec)

    def zero_components(self) -> np.ndarray:
        w = self.grid.weights
        return np.array([math.sqrt(np.dot(w, v * v)) < ZERO_NORM for v in self.profiles()])

    def integrals(self) -> Integrals:
        spec, grid = self.spec, self.grid
        V = self.profiles()
        m = spec.decay_rates()
        r = spec.r
        A = np.array([g.dirichlet_form(grid, V[j], m[j]) for j in range(r)])
        P = np.array([g.power_integral(grid, V[j], spec.crit, m[j]) for j in range(r)])
        Mx = np.zeros((r, r))
        for j in range(r):
            for k in range(j + 1, r):
                a, b = spec.alphas[j, k], spec.alphas[k, j]
                Mx[j, k] = Mx[k, j] = g.mixed_integral(grid, V[j], V[k], a, b, m[j], m[k])
        return Integrals(A, P, Mx)


@dataclass(frozen=True, eq=False)
class BubbleTuple:
    """Closed-form tuple (t_1 z^1_{mu_1}, ..., t_r z^r_{mu_r}).

    Integrals are evaluated by adaptive quadrature of the closed forms.
    """

    spec: CouplingSpec
    bubbles: tuple
    amplitudes: np.ndarray = None
    _unit: Integrals = field(default=None, repr=False)

    def __post_init__(self):
        bubbles = tuple(self.bubbles)
        if len(bubbles) != self.spec.r:
            raise g.GridError(f"expected {self.spec.r} bubbles, got {len(bubbles)}")
        for j, b in enumerate(bubbles):
            if b.params.N != self.spec.N or b.params.lam != self.spec.lambdas[j]:
                raise DomainError(f"bubble {j} does not match the spec parameters")
        amps = np.ones(len(bubbles)) if self.amplitudes is None else \
            np.array(self.amplitudes, dtype=float)
        object.__setattr__(self, "bubbles", bubbles)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def of_spec(cls, spec: CouplingSpec, mus=None, amplitudes=None, convention=None):
        mus = np.ones(spec.r) if mus is None else mus
        bubbles = tuple(Bubble(spec.params(j), float(mus[j]), convention)
                        for j in range(spec.r))
        return cls(spec, bubbles, amplitudes)

    @cached_property
    def unit_integrals(self) -> Integrals:
        if self._unit is not None:
            return self._unit
        spec, r = self.spec, self.spec.r
        A = np.empty(r)
        P = np.empty(r)
        for j, b in enumerate(self.bubbles):
            A[j], P[j] = bubble_integrals(b)
        Mx = np.zeros((r, r))
        for j in range(r):
            for k in range(j + 1, r):
                Mx[j, k] = Mx[k, j] = mixed_bubble_integral(
                    self.bubbles[j], self.bubbles[k], spec.alphas[j, k], spec.alphas[k, j])
        return Integrals(A, P, Mx)

    def integrals(self) -> Integrals:
        return self.unit_integrals.scaled(self.amplitudes, self.spec)

    def scaled(self, t) -> "BubbleTuple":
        t = np.broadcast_to(np.asarray(t, dtype=float), (self.spec.r,))
        return BubbleTuple(self.spec, self.bubbles, self.amplitudes * t,
                           self.unit_integrals)

    def zero_components(self) -> np.ndarray:
        return self.amplitudes == 0

    def sample(self, grid: g.RadialGrid) -> StateTuple:
        comps = tuple(g.RadialField(grid, a * b(grid.r))
                      for a, b in zip(self.amplitudes, self.bubbles))
        return StateTuple(comps, self.spec)


# ---------------------------------------------------------------------------
# functionals


def _offdiag_sum(mat) -> float:
    return float(np.sum(mat) - np.trace(mat))


def energy(u) -> float:
    """J(u) = sum_j I_{lam_j}(u_j) - 1/2 sum_{j != k} beta_jk M_jk."""
    spec = u.spec
    I = u.integrals()
    return (0.5 * I.norms.sum() - np.dot(spec.self_weights, I.powers) / spec.crit
            - 0.5 * _offdiag_sum(spec.betas * I.mixed))


def _defects_from(spec: CouplingSpec, I: Integrals):
    coup = np.nan_to_num(spec.betas * spec.alphas) * I.mixed
    return I.norms - spec.self_weights * I.powers - coup.sum(axis=1)


def nehari_defect(u) -> np.ndarray:
    """Residual of each constraint ||u_j||^2 = int|u_j|^{2*} + coupling.

    Zero components are not in the manifold; their entry is ``inf``.
    """
    d = _defects_from(u.spec, u.integrals())
    d[u.zero_components()] = np.inf
    return d


def quadratic_and_quartic(u):
    """(int E, int F): the two homogeneous parts of J along rays."""
    spec = u.spec
    I = u.integrals()
    E = I.norms.sum()
    F = np.dot(spec.self_weights, I.powers) + 0.5 * spec.crit * _offdiag_sum(
        spec.betas * I.mixed)
    return E, F


def diagonal_scaling(u) -> float:
    """t* > 0 maximizing t -> J(t u), = (int E / int F)^(1/(2*-2))."""
    E, F = quadratic_and_quartic(u)
    if not F > 0:
        raise ProjectionError(f"int F = {F} <= 0, diagonal projection undefined")
    return (E / F) ** (1.0 / (u.spec.crit - 2))


def nehari_project_diagonal(u):
    """Return (t*, t* u), the maximizer of J along the ray through u."""
    t = diagonal_scaling(u)
    return t, u.scaled(t)


def theta_prime_quotient(u, literal: bool = False) -> float:
    """(1/N) [int E / (int F)^(2/2*)]^(N/2) = max_t J(t u).

    ``literal=True`` drops the 2/2* power on int F, for comparison only;
    that form does not equal max_t J(t u).
    """
    E, F = quadratic_and_quartic(u)
    if not F > 0:
        raise ProjectionError(f"int F = {F} <= 0, quotient undefined")
    N = u.spec.N
    denom = F if literal else F ** (2.0 / u.spec.crit)
    return (E / denom) ** (N / 2.0) / N


@dataclass
class NehariReport:
    energy_J: float
    norms: np.ndarray
    nehari_defects: np.ndarray
    theta_prime_quotient: float
    diagonal_defect: float
    norm_level: float
    tol: float

    @property
    def in_manifold(self) -> bool:
        return bool(np.all(np.abs(self.nehari_defects) <= self.tol * self.norms))

    @property
    def energy_norm_gap(self) -> float:
        """|J - (1/N) sum ||u_j||^2|; vanishes on the Nehari manifold."""
        return abs(self.energy_J - self.norm_level)

    def to_dict(self) -> dict:
        return {"energy_J": self.energy_J, "norms": self.norms.tolist(),
                "nehari_defects": self.nehari_defects.tolist(),
                "theta_prime_quotient": self.theta_prime_quotient,
                "diagonal_defect": self.diagonal_defect, "tol": self.tol}


def nehari_report(u, tol: float = DEFECT_RTOL) -> NehariReport:
    spec = u.spec
    I = u.integrals()
    d = _defects_from(spec, I)
    d[u.zero_components()] = np.inf
    E, F = quadratic_and_quartic(u)
    try:
        q = theta_prime_quotient(u)
    except ProjectionError:
        q = math.nan
    return NehariReport(energy(u), I.norms, d, q, E - F, I.norms.sum() / spec.N, tol)


# ---------------------------------------------------------------------------
# threshold predicates


@dataclass(frozen=True)
class ThresholdCheck:
    holds: bool
    lhs: float
    rhs: float
    B_matrix: np.ndarray
    hardy_ratios: np.ndarray


def b_table(spec: CouplingSpec) -> np.ndarray:
    """B[j, l] = 1 + sum_{k not in {j, l}} beta_jk alpha_jk; NaN on j = l."""
    ba = np.nan_to_num(spec.betas * spec.alphas)
    row = ba.sum(axis=1)
    B = 1.0 + row[:, None] - ba
    np.fill_diagonal(B, np.nan)
    return B


def existence_threshold_predicate(spec: CouplingSpec) -> ThresholdCheck:
    """Sufficient condition for a positive ground state when all beta > 0.

    Components are sorted by ascending Hardy coefficient first, so the
    result does not depend on their order.
    """
    off = ~np.eye(spec.r, dtype=bool)
    if np.any(spec.betas[off] <= 0):
        raise PredicateNotApplicable("existence predicate needs all beta_jk > 0")
    s = spec.permuted(np.argsort(spec.lambdas, kind="stable"))
    Lam = hardy_limit(s.N)
    d = (Lam - s.lambdas) / (Lam - s.lambdas[-1])
    B = b_table(s)
    lhs = (s.r + 0.5 * s.crit * _offdiag_sum(s.betas)) / np.nanmax(B)
    rhs = (1.0 + d[:-1].sum()) ** (s.N / (s.N - 2))
    return ThresholdCheck(bool(lhs > rhs), float(lhs), float(rhs), B, d)


def existence_energy_bound(spec: CouplingSpec) -> float:
    """min over l and j != l of B[j, l]^(-(N-2)/2) theta_single(lam_j)."""
    B = b_table(spec)
    th = np.array([theta_single(spec.params(j)) for j in range(spec.r)])
    vals = B ** (-(spec.N - 2) / 2.0) * th[:, None]
    return float(np.nanmin(vals))


def nonexistence_level(spec: CouplingSpec) -> float:
    """The unattained infimum sum_j theta_single(lam_j) when all beta < 0."""
    off = ~np.eye(spec.r, dtype=bool)
    if np.any(spec.betas[off] >= 0):
        raise PredicateNotApplicable("nonexistence level needs all beta_jk < 0")
    return float(sum(theta_single(spec.params(j)) for j in range(spec.r)))

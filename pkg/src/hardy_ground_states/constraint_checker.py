"""Nonlinear constraint principle and the two-component coupling thresholds.

The principle: if f: (0, inf)^r -> R^r has a nonsingular Jacobian whose
inverse has positive column sums, then the only point with
sum(x) <= sum(c) and f(x) >= f(c) componentwise is x = c. (The inverse
column sums are the derivatives of sum_s x_s along the coordinate
directions of y = f(x).)

For two components with exponents alpha + beta = 2* and coupling nu,

    f1 = x1^(p-1) + nu alpha x1^(alpha/2 - 1) x2^(beta/2),
    f2 = x2^(p-1) + nu beta  x1^(alpha/2) x2^(beta/2 - 1),     p = 2*/2,

and the principle holds everywhere once nu exceeds (p-1)/min(d1, d2, d3).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.stats import qmc

from .extremals import DomainError, critical_exponent

FEAS_TOL = 1e-10
SAME_POINT_TOL = 1e-6


@dataclass(frozen=True)
class ConstraintSystem:
    """f(x) and its Jacobian J[j, i] = d f_j / d x_i, plus a reference point c."""

    f: Callable
    jac: Callable
    c: np.ndarray
    name: str = ""

    @property
    def r(self) -> int:
        return len(self.c)


def identity_system(r: int, c=None) -> ConstraintSystem:
    c = np.ones(r) if c is None else np.asarray(c, float)
    return ConstraintSystem(lambda x: np.asarray(x, float), lambda x: np.eye(r), c, "identity")


def rank_one_system(c=(1.0, 1.0)) -> ConstraintSystem:
    """f1 = f2 = x1 + x2; the Jacobian is singular everywhere."""
    return ConstraintSystem(lambda x: np.array([x[0] + x[1]] * 2),
                            lambda x: np.ones((2, 2)), np.asarray(c, float), "rank-one")


def broken_system(c=(1.0, 1.0)) -> ConstraintSystem:
    """f1 = x1, f2 = 2 x1 + x2: invertible, but one inverse column sum is -1.

    From c = (1, 1) the point (1.5, 0.1) is feasible, so the conclusion fails.
    """
    return ConstraintSystem(lambda x: np.array([x[0], 2 * x[0] + x[1]]),
                            lambda x: np.array([[1.0, 0.0], [2.0, 1.0]]),
                            np.asarray(c, float), "broken")


def inverse_column_sums(J) -> np.ndarray:
    return np.linalg.inv(J).sum(axis=0)


@dataclass
class PrincipleCheck:
    det_nonzero: bool
    inverse_sums_positive: bool
    witness: np.ndarray | None
    samples: int
    mode: str

    @property
    def holds(self) -> bool:
        return self.det_nonzero and self.inverse_sums_positive


def check_principle_conditions(sys: ConstraintSystem, box, n_random: int = 10_000,
                               grid_per_axis: int = 9, mode: str = "strict",
                               seed: int = 0, det_tol: float = 1e-12) -> PrincipleCheck:
    """Sample the Jacobian over ``box`` and test the principle's hypotheses.

    ``box`` is ``(lo, hi)`` with scalars or length-r arrays; sampling is
    log-uniform (scrambled Sobol points plus a log grid including corners).
    ``mode="relaxed"`` accepts nonnegative inverse column sums provided one
    of them is positive. This is a finite-sample check, not a proof.
    """
    if mode not in ("strict", "relaxed"):
        raise ValueError(f"unknown mode {mode!r}")
    r = sys.r
    lo = np.broadcast_to(np.asarray(box[0], float), (r,))
    hi = np.broadcast_to(np.asarray(box[1], float), (r,))
    if np.any(lo <= 0) or np.any(hi < lo):
        raise DomainError("box must lie in the open positive orthant")
    llo, lhi = np.log(lo), np.log(hi)
    axes = [np.linspace(a, b, grid_per_axis) for a, b in zip(llo, lhi)]
    mesh = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    pts = [mesh]
    if n_random > 0:
        sob = qmc.Sobol(d=r, scramble=True, seed=seed)
        n = 1 << max(1, math.ceil(math.log2(n_random)))
        pts.append(qmc.scale(sob.random(n), llo, np.where(lhi > llo, lhi, llo + 1e-300)))
    X = np.exp(np.concatenate(pts))
    det_sign = 0
    for x in X:
        J = np.asarray(sys.jac(x), float)
        det = np.linalg.det(J)
        scale = max(1.0, float(np.max(np.abs(J)))) ** r
        if not np.isfinite(det) or abs(det) <= det_tol * scale:
            return PrincipleCheck(False, False, x, len(X), mode)
        sgn = int(np.sign(det))
        if det_sign == 0:
            det_sign = sgn
        elif sgn != det_sign:
            return PrincipleCheck(False, False, x, len(X), mode)
        s = inverse_column_sums(J)
        ok = np.all(s > 0) if mode == "strict" else (np.all(s >= 0) and np.any(s > 0))
        if not ok:
            return PrincipleCheck(True, False, x, len(X), mode)
    return PrincipleCheck(True, True, None, len(X), mode)


@dataclass
class ConclusionResult:
    verdict: bool | None
    witness: np.ndarray | None
    feasible_runs: int
    failed_runs: int


def search_constraint_conclusion(sys: ConstraintSystem, starts: int = 100, seed: int = 0,
                                 spread: float = 4.0) -> ConclusionResult:
    """Multi-start SLSQP for a feasible point other than c.

    Maximizes sum(c - x) subject to f_j(x) >= f_j(c) from log-uniform starts
    in [c/spread, c*spread]. ``verdict`` is False with a witness when some
    feasible x != c has sum(x) <= sum(c), True when every run converged to
    a point that is either infeasible for the sum constraint or equal to c,
    and None when no run produced a usable answer.
    """
    c = np.asarray(sys.c, float)
    fc = np.asarray(sys.f(c), float)
    rng = np.random.default_rng(seed)
    cons = {"type": "ineq", "fun": lambda x: np.asarray(sys.f(x), float) - fc,
            "jac": lambda x: np.asarray(sys.jac(x), float)}
    bounds = [(1e-9 * ci, spread * 4 * ci) for ci in c]
    feasible = failed = 0
    cs = c.sum()
    for _ in range(starts):
        x0 = c * np.exp(rng.uniform(-math.log(spread), math.log(spread), sys.r))
        try:
            with warnings.catch_warnings():
                # SLSQP clips trial points to the bounds and warns each time
                warnings.simplefilter("ignore", RuntimeWarning)
                res = minimize(lambda x: np.sum(x) - cs, x0, jac=lambda x: np.ones_like(x),
                               method="SLSQP", bounds=bounds, constraints=[cons],
                               options={"ftol": 1e-14, "maxiter": 500})
        except (ValueError, FloatingPointError, np.linalg.LinAlgError):
            failed += 1
            continue
        x = res.x
        g = np.asarray(sys.f(x), float) - fc
        if not np.all(np.isfinite(g)):
            failed += 1
            continue
        if np.min(g) < -FEAS_TOL * max(1.0, float(np.max(np.abs(fc)))):
            if not res.success:
                failed += 1
            continue
        feasible += 1
        if np.sum(x) <= cs + FEAS_TOL * cs and np.max(np.abs(x - c)) > SAME_POINT_TOL * max(1, cs):
            return ConclusionResult(False, x, feasible, failed)
    if feasible == 0:
        return ConclusionResult(None, None, 0, failed)
    return ConclusionResult(True, None, feasible, failed)


def verify_constraint_conclusion(sys: ConstraintSystem, candidate=None, starts: int = 100,
                                 seed: int = 0) -> bool | None:
    """True if no second feasible point is found, False if one is, None if inconclusive.

    When ``candidate`` is given it is tested directly first.
    """
    if candidate is not None:
        x = np.asarray(candidate, float)
        c = np.asarray(sys.c, float)
        feas = (np.sum(x) <= np.sum(c) * (1 + FEAS_TOL)
                and np.all(np.asarray(sys.f(x)) - np.asarray(sys.f(c)) >= -FEAS_TOL))
        if feas and np.max(np.abs(x - c)) > SAME_POINT_TOL * max(1.0, float(np.sum(c))):
            return False
    return search_constraint_conclusion(sys, starts=starts, seed=seed).verdict


# ---------------------------------------------------------------------------
# two components


def alpha_range(N: int):
    """Open interval of admissible alpha (with beta = 2* - alpha in (1, 2) as well)."""
    crit = critical_exponent(N)
    return max(1.0, crit - 2.0), min(2.0, crit - 1.0)


@dataclass(frozen=True)
class TwoComponentSpec:
    N: int
    alpha: float
    beta: float
    nu: float

    def __post_init__(self):
        if self.N < 5:
            raise DomainError("exponents in (1, 2) summing to 2* need N >= 5")
        crit = critical_exponent(self.N)
        if abs(self.alpha + self.beta - crit) > 1e-12:
            raise DomainError(f"alpha + beta must equal 2* = {crit}")
        for v in (self.alpha, self.beta):
            if not 1 < v < 2:
                raise DomainError(f"exponent {v} outside (1, 2)")

    @classmethod
    def from_alpha(cls, N: int, alpha: float, nu: float) -> "TwoComponentSpec":
        return cls(N, alpha, critical_exponent(N) - alpha, nu)

    @property
    def p(self) -> float:
        return critical_exponent(self.N) / 2.0

    def f(self, x):
        x1, x2 = x
        a, b, p, nu = self.alpha, self.beta, self.p, self.nu
        return np.array([x1 ** (p - 1) + nu * a * x1 ** (a / 2 - 1) * x2 ** (b / 2),
                         x2 ** (p - 1) + nu * b * x1 ** (a / 2) * x2 ** (b / 2 - 1)])

    def F(self, x1, x2):
        """Jacobian F[j, i] = d f_j / d x_i (symmetric)."""
        a, b, p, nu = self.alpha, self.beta, self.p, self.nu
        off = 0.5 * nu * a * b * x1 ** (a / 2 - 1) * x2 ** (b / 2 - 1)
        F11 = (p - 1) * x1 ** (p - 2) + nu * a * (a / 2 - 1) * x1 ** (a / 2 - 2) * x2 ** (b / 2)
        F22 = (p - 1) * x2 ** (p - 2) + nu * b * (b / 2 - 1) * x1 ** (a / 2) * x2 ** (b / 2 - 2)
        return np.array([[F11, off], [off, F22]])

    def reduced_det(self, x):
        """det F / (x1 x2)^(p-2) as a function of x = x1/x2."""
        a, b, p, nu = self.alpha, self.beta, self.p, self.nu
        return ((p - 1) ** 2 + nu * nu * a * b * (1 - p) * x ** (a - p)
                + (p - 1) * nu * b * (b / 2 - 1) * x ** (a / 2)
                + (p - 1) * nu * a * (a / 2 - 1) * x ** (-b / 2))

    def system(self, c) -> ConstraintSystem:
        return ConstraintSystem(self.f, lambda x: self.F(x[0], x[1]), np.asarray(c, float),
                                f"two-component nu={self.nu}")


def _validate_pair(alpha, beta, N):
    s = alpha + beta
    if s <= 2:
        raise DomainError("alpha + beta must exceed 2")
    n_implied = 2 * s / (s - 2)
    if N is None:
        N = round(float(n_implied))
        if abs(float(n_implied) - N) > 1e-9:
            raise DomainError(f"alpha + beta = {float(s)} is not 2* for an integer N")
    if abs(float(s) - critical_exponent(N)) > 1e-12:
        raise DomainError(f"alpha + beta must equal 2* = {critical_exponent(N)}")
    return N


@dataclass(frozen=True)
class Thresholds:
    d1: float | Fraction
    d2: float | Fraction
    d3: float | Fraction
    nu_star: float | Fraction
    d2_literal: float | Fraction
    p: float | Fraction


def thresholds_d(alpha, beta, N: int | None = None) -> Thresholds:
    """Closed-form constants d1, d2, d3 and nu* = (p - 1)/min(d1, d2, d3).

    With alpha == beta every constant equals p and exact rationals are
    returned (nu* = 2/N). ``d2`` is the minimum of the function bounding
    F22 - F12, which equals d3 with the exponents exchanged; the
    differently arranged closed form is kept as ``d2_literal`` for
    comparison.
    """
    N = _validate_pair(alpha, beta, N)
    if not (0 < alpha < 2 and 0 < beta < 2):
        raise DomainError("the closed forms need both exponents in (0, 2)")
    if alpha == beta:
        p = Fraction(N, N - 2)
        return Thresholds(p, p, p, (p - 1) / p, p, p)
    a, b = float(alpha), float(beta)
    p = critical_exponent(N) / 2
    ua, ub = 1 - a / 2, 1 - b / 2
    d1 = 2 * p * ua ** (a / (2 * p)) * ub ** (b / (2 * p))
    d3 = a * ua ** (1 - b / 2) * ub ** (b / 2) + 0.5 * a * b * ua ** (1 - b / 2) * ub ** (b / 2 - 1)
    d2 = b * ub ** (1 - a / 2) * ua ** (a / 2) + 0.5 * a * b * ub ** (1 - a / 2) * ua ** (a / 2 - 1)
    d2p = b * ub ** (1 - a / 2) * ua ** (a / 2) + 0.5 * a * b * ua ** (1 - a / 2) * ub ** (a / 2 - 1)
    return Thresholds(d1, d2, d3, (p - 1) / min(d1, d2, d3), d2p, p)


def nu_star(alpha, beta, N: int | None = None):
    return thresholds_d(alpha, beta, N).nu_star


# the three scalar functions whose sign controls det F, F22 - F12, F11 - F21;
# each is (p - 1) - nu * q_i(x), so the condition is nu * min q_i > p - 1


def q1(x, alpha, beta):
    """Coupling part of the determinant bound: (p-1) + h1 = (p-1)(p-1 - nu q1)."""
    return beta * (1 - beta / 2) * x ** (alpha / 2) + alpha * (1 - alpha / 2) * x ** (-beta / 2)


def q2(x, alpha, beta):
    return beta * (1 - beta / 2) * x ** (alpha / 2) + 0.5 * alpha * beta * x ** (alpha / 2 - 1)


def q3(x, alpha, beta):
    return alpha * (1 - alpha / 2) * x ** (beta / 2) + 0.5 * alpha * beta * x ** (beta / 2 - 1)


def h1(x, alpha, beta, nu):
    p = (alpha + beta) / 2
    return -(p - 1) * nu * q1(x, alpha, beta)


def h2(x, alpha, beta, nu):
    return (alpha + beta) / 2 - 1 - nu * q2(x, alpha, beta)


def h3(x, alpha, beta, nu):
    return (alpha + beta) / 2 - 1 - nu * q3(x, alpha, beta)


def maximizers(alpha, beta) -> dict:
    """Stationary points of h1, h2, h3 on (0, inf)."""
    p = (alpha + beta) / 2
    ua, ub = 1 - alpha / 2, 1 - beta / 2
    return {"h1": (ua / ub) ** (1 / p), "h2": ua / ub, "h3": ub / ua}


def grid_minimum(q, alpha, beta, lo=1e-4, hi=1e4, n=200_001):
    """Minimum of q on a log grid, refined by bounded scalar minimization."""
    s = np.linspace(math.log(lo), math.log(hi), n)
    vals = q(np.exp(s), alpha, beta)
    i = int(np.argmin(vals))
    a, b = s[max(i - 1, 0)], s[min(i + 1, n - 1)]
    res = minimize_scalar(lambda t: q(math.exp(t), alpha, beta), bounds=(a, b),
                          method="bounded", options={"xatol": 1e-12})
    return float(res.fun), float(math.exp(res.x))


@dataclass
class FConditions:
    detF_neg: bool
    F22_minus_F12_neg: bool
    F11_minus_F21_neg: bool

    @property
    def all(self) -> bool:
        return self.detF_neg and self.F22_minus_F12_neg and self.F11_minus_F21_neg


def check_matrix_F_conditions(spec: TwoComponentSpec, x1: float, x2: float) -> FConditions:
    if x1 <= 0 or x2 <= 0:
        raise DomainError("x1, x2 must be positive")
    F = spec.F(x1, x2)
    return FConditions(bool(np.linalg.det(F) < 0), bool(F[1, 1] - F[0, 1] < 0),
                       bool(F[0, 0] - F[1, 0] < 0))


def F_conditions_on_grid(spec: TwoComponentSpec, lo=1e-3, hi=1e3, n=61):
    """Evaluate the three sign conditions on a log grid of ratios x1/x2 (x2 = 1)."""
    out = []
    for x in np.geomspace(lo, hi, n):
        out.append((x, check_matrix_F_conditions(spec, float(x), 1.0)))
    return out

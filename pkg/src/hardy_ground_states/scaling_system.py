"""Coupled scaling equations for putting each component on its constraint.

Given integrals A_j = ||u_j||^2, B_j = int|u_j|^{2*} and
D_jk = |beta_jk| alpha_jk int |u_j|^{alpha_jk}|u_k|^{alpha_kj}, find t > 0 with

    A_j t_j^2 = B_j t_j^{2*} - s sum_k D_jk t_j^{alpha_jk} t_k^{alpha_kj},

where s = +1 for repulsive coupling (all beta < 0) and s = -1 for attractive
coupling. In the repulsive case the equations are equivalent to the fixed
point form t_j = (A_j/B_j)^(1/alpha) (1 + f_j(t))^(1/alpha), alpha = 2* - 2,
with

    f_j(t) = (1/A_j) sum_k D_jk t_j^(alpha_jk - 2) t_k^alpha_kj,

solved here by Picard iteration under an explicit Lipschitz certificate and,
independently, by multi-start damped Newton.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .extremals import DomainError, critical_exponent

STEP_TOL = 1e-12
RESIDUAL_RTOL = 1e-10
DEDUP_TOL = 1e-8
MAX_PICARD = 10_000


class SolvabilityError(ValueError):
    """The contraction certificate does not hold; Picard is not started."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class BoxExitError(ArithmeticError):
    """A Picard iterate left the a-priori box."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


class ContractionViolation(ArithmeticError):
    """Successive Picard steps grew faster than the certified ratio d."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True, eq=False)
class ScalingProblem:
    N: int
    A: np.ndarray
    B: np.ndarray
    D: np.ndarray
    alphas: np.ndarray
    attractive: bool = False

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        B = np.array(self.B, dtype=float)
        D = np.array(self.D, dtype=float)
        al = np.array(self.alphas, dtype=float)
        r = A.size
        if r < 1 or B.shape != (r,) or D.shape != (r, r) or al.shape != (r, r):
            raise DomainError("inconsistent problem shapes")
        if np.any(A <= 0) or np.any(B <= 0):
            raise DomainError("A and B must be positive")
        off = ~np.eye(r, dtype=bool)
        if np.any(D[off] < 0) or np.any(np.diag(D) != 0):
            raise DomainError("D must be nonnegative with zero diagonal")
        crit = critical_exponent(self.N)
        if r > 1:
            if np.any(al[off] <= 1):
                raise DomainError("coupling exponents must exceed 1")
            if np.any(np.abs((al + al.T)[off] - crit) > 1e-12):
                raise DomainError("alpha_jk + alpha_kj must equal 2*")
        np.fill_diagonal(al, 0.0)
        for name, arr in (("A", A), ("B", B), ("D", D), ("alphas", al)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def r(self) -> int:
        return self.A.size

    @property
    def alpha_exp(self) -> float:
        return critical_exponent(self.N) - 2.0

    @property
    def crit(self) -> float:
        return critical_exponent(self.N)

    @property
    def sign(self) -> float:
        return -1.0 if self.attractive else 1.0

    def scaled_coupling(self, s: float) -> "ScalingProblem":
        return ScalingProblem(self.N, self.A, self.B, s * self.D, self.alphas, self.attractive)

    @property
    def base_point(self):
        """(A_j/B_j)^(1/alpha): the solution when D = 0."""
        return (self.A / self.B) ** (1.0 / self.alpha_exp)

    def coupling_integrals(self):
        """D_jk / alpha_jk, the bare interaction integrals (times |beta|)."""
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(self.D > 0, self.D / np.where(self.alphas > 0, self.alphas, 1), 0.0)
        return out

    def C(self, form: str = "literal"):
        """Constants controlling the a-priori upper bound.

        ``literal``: B_j - sum_k (alpha_jk^2 - alpha_jk alpha_kj)/2* Dbar_jk.
        ``corrected``: B_j - sum_k D_jk, which is what summing the Young
        inequality bounds actually produces.
        """
        if form == "literal":
            Dbar = self.coupling_integrals()
            al = self.alphas
            return self.B - np.sum((al * al - al * al.T) / self.crit * Dbar, axis=1)
        if form == "corrected":
            return self.B - self.D.sum(axis=1)
        raise ValueError(f"unknown form {form!r}")

    def box(self, form: str = "literal"):
        """(T1, T2) or (T1, nan) when min C <= 0."""
        T1 = float(np.min(self.base_point))
        c = np.min(self.C(form))
        T2 = (self.A.sum() / c) ** (1.0 / self.alpha_exp) if c > 0 else math.nan
        return T1, float(T2)

    # -- maps ---------------------------------------------------------------

    def _monomials(self, t):
        """T[j, k] = t_j^(alpha_jk - 2) t_k^alpha_kj (zero diagonal)."""
        t = np.asarray(t, dtype=float)
        al = self.alphas
        T = t[:, None] ** (al - 2.0) * t[None, :] ** al.T
        np.fill_diagonal(T, 0.0)
        return T

    def f(self, t):
        return np.sum(self.D * self._monomials(t), axis=1) / self.A

    def f_jacobian(self, t):
        """J[j, m] = d f_j / d t_m."""
        t = np.asarray(t, dtype=float)
        W = self.D * self._monomials(t) / self.A[:, None]
        J = W * self.alphas.T / t[None, :]
        np.fill_diagonal(J, 0.0)
        J[np.diag_indices(self.r)] = np.sum(W * (self.alphas - 2.0), axis=1) / t
        return J

    def picard_map(self, t):
        g = 1.0 + self.sign * self.f(t)
        return self.base_point * np.maximum(g, 0.0) ** (1.0 / self.alpha_exp)

    def residual(self, t):
        """Residual of the Nehari scaling equations, in their original form."""
        t = np.asarray(t, dtype=float)
        coup = np.sum(self.D * self._monomials(t), axis=1) * t**2
        return self.A * t**2 - self.B * t**self.crit + self.sign * coup

    def reduced_residual(self, t):
        """g_j = t_j^alpha - (A_j/B_j)(1 + s f_j), the residual divided by B_j t_j^2."""
        t = np.asarray(t, dtype=float)
        return t**self.alpha_exp - (self.A / self.B) * (1.0 + self.sign * self.f(t))

    def reduced_jacobian(self, t):
        t = np.asarray(t, dtype=float)
        J = -self.sign * (self.A / self.B)[:, None] * self.f_jacobian(t)
        J[np.diag_indices(self.r)] += self.alpha_exp * t ** (self.alpha_exp - 1.0)
        return J

    # -- serialization ----------------------------------------------------------

    def to_dict(self) -> dict:
        return {"N": self.N, "A": self.A.tolist(), "B": self.B.tolist(),
                "D": self.D.tolist(), "alphas": self.alphas.tolist(),
                "attractive": self.attractive}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "ScalingProblem":
        return cls(d["N"], d["A"], d["B"], d["D"], d["alphas"], d.get("attractive", False))

    @classmethod
    def from_json(cls, text: str) -> "ScalingProblem":
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_integrals(cls, spec, integrals, attractive=None):
        """Build from a coupling spec and a tuple's :class:`Integrals`."""
        al = np.nan_to_num(spec.alphas)
        D = np.abs(spec.betas) * al * integrals.mixed
        np.fill_diagonal(D, 0.0)
        B = spec.self_weights * integrals.powers
        off = ~np.eye(spec.r, dtype=bool)
        if attractive is None:
            if np.all(spec.betas[off] < 0):
                attractive = False
            elif np.all(spec.betas[off] > 0):
                attractive = True
            else:
                raise DomainError("mixed-sign couplings need an explicit sign")
        return cls(spec.N, integrals.norms, B, D, al, attractive)


# ---------------------------------------------------------------------------


def _corners(T1, T2, r):
    grids = np.meshgrid(*([[T1, T2]] * r), indexing="ij")
    return np.stack([gg.ravel() for gg in grids], axis=1)


def _abs_partial_bound(p: ScalingProblem, t):
    """Posynomial majorant of |d f_j / d t_m| at t (same as the partial off the diagonal)."""
    t = np.asarray(t, dtype=float)
    W = p.D * p._monomials(t) / p.A[:, None]
    J = W * p.alphas.T / t[None, :]
    np.fill_diagonal(J, 0.0)
    J[np.diag_indices(p.r)] = np.sum(W * np.abs(p.alphas - 2.0), axis=1) / t
    return J


@dataclass
class SolvabilityReport:
    C: np.ndarray
    C_corrected: np.ndarray
    d: float
    box: tuple
    box_corrected: tuple
    max_f: float
    max_partial: float
    box_invariant: bool
    solvable: bool

    def to_dict(self) -> dict:
        return {"C": self.C.tolist(), "C_corrected": self.C_corrected.tolist(),
                "d": self.d, "box": list(self.box), "box_corrected": list(self.box_corrected),
                "max_f": self.max_f, "max_partial": self.max_partial,
                "box_invariant": self.box_invariant, "solvable": self.solvable}


def check_solvability(p: ScalingProblem, form: str = "literal") -> SolvabilityReport:
    """Contraction certificate d of the Picard map on the a-priori box.

    f_j and the majorants of |df_j/dt_m| are posynomials, hence log-convex
    and maximal at a corner of the box, so corner evaluation is exact for
    the majorants. ``box_invariant`` additionally records whether the map
    sends the box into itself (again checked at the corners).
    """
    if p.attractive:
        raise DomainError("the contraction certificate is for repulsive coupling")
    C = p.C(form)
    Cc = p.C("corrected")
    box = p.box(form)
    boxc = p.box("corrected")
    if not np.all(C > 0):
        return SolvabilityReport(C, Cc, math.inf, box, boxc, math.inf, math.inf, False, False)
    T1, T2 = box
    if not np.any(p.D > 0):
        return SolvabilityReport(C, Cc, 0.0, box, boxc, 0.0, 0.0, True, True)
    corners = _corners(T1, T2, p.r)
    max_f = max(float(np.max(p.f(c))) for c in corners)
    max_df = max(float(np.max(_abs_partial_bound(p, c))) for c in corners)
    d = (p.r / p.alpha_exp) * float(np.max(p.base_point)) * (1.0 + max_f) * max_df
    phi = np.array([p.picard_map(c) for c in corners])
    invariant = bool(np.all(phi >= T1 * (1 - 1e-14)) and np.all(phi <= T2 * (1 + 1e-14)))
    return SolvabilityReport(C, Cc, d, box, boxc, max_f, max_df, invariant, bool(d < 1))


@dataclass
class ScalingSolution:
    t: np.ndarray
    iterations: int
    contraction_ratio_d: float
    bounds: tuple
    residual: float
    steps: list = field(default_factory=list, repr=False)

    @property
    def lower(self):
        return self.bounds[0]

    @property
    def upper(self):
        return self.bounds[1]

    def in_box(self, slack: float = 1e-12) -> bool:
        lo, hi = self.bounds
        return bool(np.all(self.t >= np.asarray(lo) * (1 - slack))
                    and np.all(self.t <= hi * (1 + slack)))

    def to_dict(self) -> dict:
        return {"t": self.t.tolist(), "iterations": self.iterations,
                "contraction_ratio_d": self.contraction_ratio_d,
                "bounds": {"lower": np.asarray(self.bounds[0]).tolist(),
                           "upper": self.bounds[1]},
                "residual": self.residual}


def solve_picard(p: ScalingProblem, t0=None, tol: float = STEP_TOL,
                 max_iter: int = MAX_PICARD, require_certificate: bool = True,
                 form: str = "literal") -> ScalingSolution:
    """Fixed-point iteration t <- (A/B)^(1/alpha) (1 + f(t))^(1/alpha).

    Every iterate is checked against the a-priori box, and every step
    against the contraction inequality sum|t_{n+1}-t_n| <= d sum|t_n-t_{n-1}|.
    """
    rep = check_solvability(p, form)
    if require_certificate and not rep.solvable:
        raise SolvabilityError(f"certificate fails: min C = {np.min(rep.C):.3g}, d = {rep.d:.3g}",
                               rep)
    T1, T2 = rep.box
    lower = p.base_point
    t = lower.copy() if t0 is None else np.array(t0, dtype=float)
    trace = [t.copy()]
    steps = []
    slack = 1e-12
    check_box = require_certificate or np.isfinite(T2)

    def inside(x):
        return np.all(x >= T1 * (1 - slack)) and np.all(x <= T2 * (1 + slack))

    if check_box and not inside(t):
        raise BoxExitError("initial iterate outside the a-priori box", trace)
    d = rep.d
    for n in range(1, max_iter + 1):
        t_new = p.picard_map(t)
        trace.append(t_new.copy())
        step = float(np.sum(np.abs(t_new - t)))
        if steps and np.isfinite(d):
            bound = d * steps[-1] + 4 * np.finfo(float).eps * float(np.sum(t_new))
            if step > bound:
                raise ContractionViolation(
                    f"step {n}: {step:.3e} > d * previous = {bound:.3e}", trace)
        steps.append(step)
        if check_box and not inside(t_new):
            raise BoxExitError(f"iterate {n} left the box [{T1:.6g}, {T2:.6g}]", trace)
        t = t_new
        if np.max(np.abs(steps[-1])) < tol * max(1.0, float(np.max(t))):
            break
    else:
        raise ArithmeticError(f"Picard did not reach step tolerance in {max_iter} iterations")
    res = float(np.max(np.abs(p.residual(t))))
    return ScalingSolution(t, n, d, (lower, T2), res, steps)


def newton_solve(p: ScalingProblem, t0, tol: float = 1e-14, max_iter: int = 100):
    """Damped Newton on the reduced residual in log variables. Returns t or None."""
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return _newton(p, t0, tol, max_iter)


def _newton(p: ScalingProblem, t0, tol: float, max_iter: int):
    x = np.log(np.asarray(t0, dtype=float))
    scale = float(np.max(p.A / p.B))
    for _ in range(max_iter):
        t = np.exp(x)
        g = p.reduced_residual(t)
        gn = float(np.max(np.abs(g)))
        if not np.isfinite(gn):
            return None
        if gn < tol * scale:
            return t
        Jx = p.reduced_jacobian(t) * t[None, :]
        try:
            dx = np.linalg.solve(Jx, -g)
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        while lam > 1e-10:
            xt = x + lam * dx
            gt = p.reduced_residual(np.exp(xt))
            if np.all(np.isfinite(gt)) and np.max(np.abs(gt)) < (1 - 1e-4 * lam) * gn:
                break
            lam *= 0.5
        else:
            return None
        x = xt
    t = np.exp(x)
    return t if np.max(np.abs(p.reduced_residual(t))) < 1e3 * tol * scale else None


def solve_newton_oracle(p: ScalingProblem, starts: int = 64, seed: int = 0,
                        box=None, tol: float = 1e-14) -> list:
    """All distinct positive roots found by damped Newton from random starts.

    Starts are drawn log-uniformly from ``box`` (default: the smallest box
    containing both the literal and the corrected a-priori boxes, widened by
    a factor 2 when an upper bound is undefined). Roots that differ by less
    than 1e-8 (relative) are merged.
    """
    rng = np.random.default_rng(seed)
    if box is None:
        T1 = float(np.min(p.base_point))
        uppers = [b[1] for b in (p.box("literal"), p.box("corrected")) if np.isfinite(b[1])]
        T2 = max(uppers) if uppers else 4.0 * float(np.max(p.base_point)) * (1 + p.r)
        if p.attractive:
            T1, T2 = 1e-3 * T1, 4.0 * T2
        box = (T1, max(T2, T1 * 1.0001))
    lo, hi = math.log(box[0]), math.log(box[1])
    cands = [p.base_point] + [np.exp(rng.uniform(lo, hi, p.r)) for _ in range(starts - 1)]
    roots = []
    for c in cands:
        t = newton_solve(p, c, tol=tol)
        if t is None or np.any(t <= 0):
            continue
        if any(np.max(np.abs(t - q) / np.maximum(np.abs(q), 1e-300)) < DEDUP_TOL for q in roots):
            continue
        roots.append(t)
    return roots


def random_admissible_problem(rng, r: int, N: int, target_d: float | None = None,
                              max_tries: int = 200) -> ScalingProblem:
    """Random repulsive instance with d < 1 (by shrinking D if needed)."""
    crit = critical_exponent(N)
    A = rng.uniform(0.5, 2.0, r)
    B = rng.uniform(0.5, 2.0, r)
    al = np.zeros((r, r))
    iu = np.triu_indices(r, 1)
    lo, hi = 1.0, crit - 1.0
    pick = rng.uniform(lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo), len(iu[0]))
    al[iu] = pick
    al[(iu[1], iu[0])] = crit - pick
    bar = np.zeros((r, r))
    bar[iu] = rng.uniform(0.0, 1.0, len(iu[0]))
    bar = bar + bar.T
    scale = 10 ** rng.uniform(-3, 0)
    for _ in range(max_tries):
        p = ScalingProblem(N, A, B, scale * al * bar, al)
        rep = check_solvability(p)
        if rep.solvable and (target_d is None or rep.d <= target_d):
            return p
        scale *= 0.5
    raise RuntimeError("could not build an admissible problem")


def limit_law_table(p: ScalingProblem, scales=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)):
    """[(s, max_j |t_j(s) - base_j|)] for D scaled by s."""
    out = []
    for s in scales:
        sol = solve_picard(p.scaled_coupling(s), require_certificate=False)
        out.append((s, float(np.max(np.abs(sol.t - p.base_point)))))
    return out

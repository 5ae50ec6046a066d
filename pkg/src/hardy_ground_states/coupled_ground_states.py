"""Explicit ground states built from one scalar bubble.

Two constructions are supported.

* ``gamma_linear`` (N = 4, cubic coupling matrix gamma): the tuple
  (sqrt(c_1) z, ..., sqrt(c_r) z) with gamma c = 1 solves the system, and its
  energy is sum(c) * theta_single.
* ``two_component`` (N >= 5, exponents alpha + beta = 2*): the pair
  (sqrt(c_1) z, sqrt(c_2) z) with f1(c) = f2(c) = 1 solves the system, with
  energy (c_1 + c_2) * theta_single.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from . import grid as g
from .constraint_checker import TwoComponentSpec, thresholds_d
from .extremals import Bubble, DomainError, HardyParams, bubble_integrals, theta_single
from .nehari import CouplingSpec, StateTuple, energy

GAMMA_LINEAR = "gamma_linear"
TWO_COMPONENT = "two_component"
MAX_CONDITION = 1e8


class HypothesisError(ValueError):
    """A sign or invertibility hypothesis of the construction fails."""


class RootNotFoundError(ArithmeticError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True, eq=False)
class GammaSpec:
    lam: float
    gamma: np.ndarray
    N: int = 4

    def __post_init__(self):
        if self.N != 4:
            raise DomainError("the cubic gamma-system lives in dimension 4")
        HardyParams(self.N, self.lam)
        if self.lam <= 0:
            raise DomainError("lambda must be positive")
        G = np.array(self.gamma, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1] or G.shape[0] < 2:
            raise DomainError("gamma must be a square matrix of size >= 2")
        if not np.allclose(G, G.T, rtol=0, atol=1e-14):
            raise DomainError("gamma must be symmetric")
        G.setflags(write=False)
        object.__setattr__(self, "gamma", G)

    @property
    def r(self) -> int:
        return self.gamma.shape[0]

    @property
    def params(self) -> HardyParams:
        return HardyParams(self.N, self.lam)

    def coupling_spec(self) -> CouplingSpec:
        """The same system written with beta_jk = gamma_jk / 2 and weights gamma_jj."""
        betas = self.gamma / 2.0
        np.fill_diagonal(betas, 0.0)
        return CouplingSpec(self.N, [self.lam] * self.r, betas, np.full((self.r, self.r), 2.0),
                            np.diag(self.gamma).copy())

    def to_dict(self) -> dict:
        return {"lam": self.lam, "gamma": self.gamma.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "GammaSpec":
        return cls(d["lam"], d["gamma"])


@dataclass
class ExactGroundState:
    c: np.ndarray
    mu: float
    energy: float
    construction: str
    params: HardyParams
    ground_state: bool | None = None
    other_roots: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"c": np.asarray(self.c).tolist(), "mu": self.mu, "energy": self.energy,
                "construction": self.construction, "N": self.params.N,
                "lam": self.params.lam, "ground_state": self.ground_state,
                "other_roots": [np.asarray(x).tolist() for x in self.other_roots],
                "diagnostics": self.diagnostics}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def random_gamma(rng, r: int, spd: bool = True, max_tries: int = 1000) -> np.ndarray:
    """Random symmetric gamma meeting the positive inverse-row-sum hypothesis."""
    for _ in range(max_tries):
        Q = rng.normal(size=(r, r))
        if spd:
            G = Q @ Q.T / r + rng.uniform(0.2, 1.0) * np.eye(r)
        else:
            G = (Q + Q.T) / 2
        if np.all(np.linalg.solve(G, np.ones(r)) > 0) and np.linalg.cond(G) < 1e6:
            return G
    raise RuntimeError("no admissible gamma found")


def solve_gamma_system(spec: GammaSpec, mu: float = 1.0) -> ExactGroundState:
    """Solve gamma c = 1 and attach the energy sum(c) * theta_single."""
    G = spec.gamma
    cond = float(np.linalg.cond(G))
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise HypothesisError(f"gamma is singular or ill-conditioned (cond = {cond:.3g})")
    ones = np.ones(spec.r)
    c = np.linalg.solve(G, ones)
    # one step of iterative refinement keeps the residual near machine precision
    c = c + np.linalg.solve(G, ones - G @ c)
    if np.any(c <= 0):
        raise HypothesisError("inverse row sums sum_k gamma^{kj} > 0 fail: "
                              f"gamma c = 1 gives c = {c}")
    th = theta_single(spec.params)
    res = float(np.max(np.abs(G @ c - 1.0)))
    return ExactGroundState(c, mu, float(c.sum() * th), GAMMA_LINEAR, spec.params, True,
                            diagnostics={"condition": cond, "residual": res})


def sum_c_derivative_fd(spec: GammaSpec, m: int, l: int, step: float = 1e-5) -> float:
    """Central difference of sum(c) in the single entry gamma[m, l]."""

    def total(delta):
        G = spec.gamma.copy()
        G[m, l] += delta
        return float(np.linalg.solve(G, np.ones(spec.r)).sum())

    return (total(step) - total(-step)) / (2 * step)


def sum_c_derivative_errors(spec: GammaSpec, step: float = 1e-5) -> np.ndarray:
    """|FD d(sum c)/d gamma_ml + c_m c_l| for every entry (m, l)."""
    c = solve_gamma_system(spec).c
    r = spec.r
    err = np.empty((r, r))
    for m in range(r):
        for l in range(r):
            err[m, l] = abs(sum_c_derivative_fd(spec, m, l, step) + c[m] * c[l])
    return err


# ---------------------------------------------------------------------------
# two components


def _x2_from_x1(spec: TwoComponentSpec, x1):
    """Solve f1(x1, x2) = 1 for x2."""
    a, b, p, nu = spec.alpha, spec.beta, spec.p, spec.nu
    base = (1.0 - x1 ** (p - 1)) * x1 ** (1 - a / 2) / (nu * a)
    return np.maximum(base, 0.0) ** (2.0 / b)


def reduced_equation(spec: TwoComponentSpec, x1):
    """f2(x1, x2(x1)) - 1, with x2 from the first equation; -1 at 0+, +inf at 1-."""
    x1 = np.asarray(x1, dtype=float)
    x2 = _x2_from_x1(spec, x1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return spec.f(np.array([x1, x2]))[1] - 1.0


def _newton_polish(spec: TwoComponentSpec, x, tol=1e-14, max_iter=50):
    x = np.array(x, dtype=float)
    for _ in range(max_iter):
        F = spec.f(x) - 1.0
        if np.max(np.abs(F)) < tol:
            break
        J = spec.F(x[0], x[1])
        step = np.linalg.solve(J, -F)
        lam = 1.0
        while np.any(x + lam * step <= 0):
            lam *= 0.5
        x = x + lam * step
    return x


def _logit_nodes(n: int, span: float = 36.0):
    t = np.linspace(-span, span, n + 1)
    return 1.0 / (1.0 + np.exp(-t))


def two_component_roots(spec: TwoComponentSpec, n_sub: int = 10_000):
    """All positive solutions of f1 = f2 = 1 found by a sign-change scan."""
    if spec.nu <= 0:
        raise DomainError("the construction needs nu > 0")
    xs = _logit_nodes(n_sub)
    vals = reduced_equation(spec, xs)
    roots = []
    ok = np.isfinite(vals)
    for i in range(n_sub):
        if not (ok[i] and ok[i + 1]):
            continue
        if vals[i] == 0:
            x1 = xs[i]
        elif vals[i] * vals[i + 1] < 0:
            x1 = brentq(lambda s: float(reduced_equation(spec, s)), xs[i], xs[i + 1],
                        xtol=1e-15, rtol=4 * np.finfo(float).eps)
        else:
            continue
        x = _newton_polish(spec, [x1, float(_x2_from_x1(spec, x1))])
        if not any(np.max(np.abs(x - y) / y) < 1e-9 for y in roots):
            roots.append(x)
    if not roots:
        raise RootNotFoundError("no sign change of the reduced equation in (0, 1)",
                                trace=(xs, vals))
    return roots


def solve_two_component(spec: TwoComponentSpec, lam: float, mu: float = 1.0,
                        n_sub: int = 10_000) -> ExactGroundState:
    """Positive (c1, c2) with f1 = f2 = 1 of least c1 + c2.

    ``ground_state`` is True exactly when nu exceeds the threshold nu*.
    Every returned root satisfies both equations to 1e-12.
    """
    params = HardyParams(spec.N, lam)
    roots = two_component_roots(spec, n_sub)
    res = [float(np.max(np.abs(spec.f(x) - 1.0))) for x in roots]
    good = [(x, r) for x, r in zip(roots, res) if r < 1e-12]
    if not good:
        raise RootNotFoundError(f"Newton polish did not reach 1e-12 (best {min(res):.3g})")
    good.sort(key=lambda xr: xr[0].sum())
    c, r0 = good[0]
    th = theta_single(params)
    ns = float(thresholds_d(spec.alpha, spec.beta, spec.N).nu_star)
    return ExactGroundState(c, mu, float(c.sum() * th), TWO_COMPONENT, params,
                            bool(spec.nu > ns), [x for x, _ in good[1:]],
                            diagnostics={"residual": r0, "nu_star": ns, "roots": len(good)})


def symmetric_two_component_c(N: int, nu: float) -> float:
    """c1 = c2 = (1 + nu p)^(-1/(p-1)) when alpha = beta = p."""
    p = N / (N - 2)
    return (1 + nu * p) ** (-1 / (p - 1))


def two_component_coupling_spec(spec: TwoComponentSpec, lam: float) -> CouplingSpec:
    al = np.array([[0.0, spec.alpha], [spec.beta, 0.0]])
    be = np.array([[0.0, spec.nu], [spec.nu, 0.0]])
    return CouplingSpec(spec.N, [lam, lam], be, al)


# ---------------------------------------------------------------------------


def state_coupling_spec(gs: ExactGroundState, source) -> CouplingSpec:
    if isinstance(source, GammaSpec):
        return source.coupling_spec()
    if isinstance(source, TwoComponentSpec):
        return two_component_coupling_spec(source, gs.params.lam)
    if isinstance(source, CouplingSpec):
        return source
    raise TypeError("source must be a GammaSpec, TwoComponentSpec or CouplingSpec")


def assemble_state(gs: ExactGroundState, grid: g.RadialGrid, source,
                   convention: str | None = None) -> StateTuple:
    """Sample (sqrt(c_1) z_mu, ..., sqrt(c_r) z_mu) on ``grid``."""
    spec = state_coupling_spec(gs, source)
    z = Bubble(gs.params, gs.mu, convention)(grid.r)
    comps = tuple(g.RadialField(grid, math.sqrt(cj) * z) for cj in gs.c)
    return StateTuple(comps, spec)


@dataclass
class UniquenessReport:
    mixed_ok: bool
    ratio_ok: bool
    energy_ok: bool
    derivative_ok: bool
    mixed_error: float
    ratio_error: float
    energy_error: float
    derivative_error: float

    @property
    def passed(self) -> bool:
        return self.mixed_ok and self.ratio_ok and self.energy_ok and self.derivative_ok

    def to_dict(self) -> dict:
        return dict(self.__dict__, passed=self.passed)


def verify_uniqueness_certificate(spec: GammaSpec, candidate: StateTuple,
                                  rtol_mixed: float = 1e-6, rtol_ratio: float = 1e-8,
                                  rtol_energy: float = 1e-4, fd_tol: float = 1e-6,
                                  convention: str | None = None) -> UniquenessReport:
    """Fingerprints shared by every least energy solution of the gamma system.

    (i) int u_m^2 u_l^2 = c_m c_l int z^4, (ii) u_k / u_1 = sqrt(c_k / c_1)
    pointwise, (iii) J = sum(c) theta_single, and (iv) the identity
    d(sum c)/d gamma_ml = -c_m c_l checked by central differences.
    """
    gs = solve_gamma_system(spec)
    c = gs.c
    grid = candidate.grid
    V = candidate.profiles()
    m = math.sqrt(spec.params.Lambda - spec.lam)
    z4 = bubble_integrals(Bubble(spec.params, 1.0, convention))[1]
    mix_err = 0.0
    for i in range(spec.r):
        for j in range(spec.r):
            val = g.mixed_integral(grid, V[i], V[j], 2.0, 2.0, m, m)
            mix_err = max(mix_err, abs(val - c[i] * c[j] * z4) / (c[i] * c[j] * z4))
    u = np.array([f.values for f in candidate.components])
    ref = u[0]
    mask = np.abs(ref) > 1e-12 * np.max(np.abs(ref))
    ratio_err = 0.0
    for k in range(1, spec.r):
        want = math.sqrt(c[k] / c[0])
        ratio_err = max(ratio_err, float(np.max(np.abs(u[k][mask] / ref[mask] - want))) / want)
    e_err = abs(energy(candidate) - gs.energy) / gs.energy
    d_err = float(np.max(sum_c_derivative_errors(spec)))
    return UniquenessReport(mix_err < rtol_mixed, ratio_err < rtol_ratio, e_err < rtol_energy,
                            d_err < fd_tol, mix_err, ratio_err, e_err, d_err)

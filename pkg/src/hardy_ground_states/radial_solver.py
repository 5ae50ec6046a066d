"""Radial discretization, residuals and the constrained energy minimizer.

Everything runs on Emden-Fowler profiles v_j(s) = r^((N-2)/2) u_j(r) on a
log-uniform grid. In these variables the system reads

    -v_j'' + m_j^2 v_j = mu_j |v_j|^(2*-2) v_j
                        + sum_k beta_jk alpha_jk |v_j|^(alpha_jk-2) v_j |v_k|^alpha_kj,

with m_j^2 = Lambda_N - lam_j, and its left side equals r^((N+2)/2) times the
original residual. The minimizer is a Sobolev-preconditioned gradient flow
for the scale-invariant quotient max_t J(t u), followed after every step by
the diagonal Nehari rescaling, so each iterate lies on the single-constraint
manifold and its energy is the current estimate.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from . import grid as g
from .constraint_checker import TwoComponentSpec
from .coupled_ground_states import (GammaSpec, HypothesisError, RootNotFoundError,
                                    solve_gamma_system, solve_two_component)
from .extremals import Bubble, DomainError, HardyParams, critical_exponent, theta_single
from .grid import GridError, RadialField, RadialGrid  # noqa: F401  (re-exported)
from .nehari import (BubbleTuple, CouplingSpec, PredicateNotApplicable, ProjectionError,
                     StateTuple, energy, nehari_defect, quadratic_and_quartic)
from .scaling_system import (ScalingProblem, check_solvability, newton_solve,
                             solve_picard)

BOUNDARY_SKIP = 3


class ConvergenceError(ArithmeticError):
    """The flow could not make progress (repeated projection failures)."""


# ---------------------------------------------------------------------------
# residual


def _nonlinearity(spec: CouplingSpec, V):
    r = spec.r
    out = spec.self_weights[:, None] * np.abs(V) ** (spec.crit - 2) * V
    for j in range(r):
        for k in range(r):
            if j == k or spec.betas[j, k] == 0:
                continue
            a, b = spec.alphas[j, k], spec.alphas[k, j]
            out[j] += spec.betas[j, k] * a * np.abs(V[j]) ** (a - 2) * V[j] * np.abs(V[k]) ** b
    return out


def pde_residual(u: StateTuple, skip: int = BOUNDARY_SKIP) -> np.ndarray:
    """Per-component L2(ds) norms of the weighted residual r^((N+2)/2) R_j.

    Second-order central differences in s; ``skip`` nodes at each end are
    excluded.
    """
    grid = u.grid
    if grid.M < g.MIN_NODES:
        raise GridError(f"grid needs at least {g.MIN_NODES} nodes")
    V = u.profiles()
    h = grid.h
    m2 = u.spec.decay_rates() ** 2
    d2 = (V[:, 2:] - 2 * V[:, 1:-1] + V[:, :-2]) / (h * h)
    with np.errstate(divide="ignore", invalid="ignore"):
        rhs = np.nan_to_num(_nonlinearity(u.spec, V))
    R = -d2 + m2[:, None] * V[:, 1:-1] - rhs[:, 1:-1]
    core = R[:, skip - 1: R.shape[1] - (skip - 1)]
    return np.sqrt(h * np.sum(core * core, axis=1))


# ---------------------------------------------------------------------------
# discrete model


class _Model:
    """Discrete J, its homogeneous parts and gradients for profile arrays V."""

    def __init__(self, grid: RadialGrid, m, crit, weights, betas=None, alphas=None):
        self.grid = grid
        self.m = np.asarray(m, float)
        self.r = self.m.size
        self.crit = crit
        self.mu = np.asarray(weights, float)
        self.betas = np.zeros((self.r, self.r)) if betas is None else np.asarray(betas, float)
        self.alphas = np.zeros((self.r, self.r)) if alphas is None else np.nan_to_num(alphas)
        self.area = grid.area
        self.bands = [g.stiffness_bands(grid, mj) for mj in self.m]
        self.ab = []
        for diag, off in self.bands:
            ab = np.zeros((3, grid.M))
            ab[0, 1:] = off
            ab[1] = diag
            ab[2, :-1] = off
            self.ab.append(ab)
        self.pw = [g.tail_weights(grid, crit * mj) for mj in self.m]
        self.pairs = []
        for j in range(self.r):
            for k in range(j + 1, self.r):
                if self.betas[j, k] != 0:
                    a, b = self.alphas[j, k], self.alphas[k, j]
                    self.pairs.append((j, k, a, b, g.tail_weights(grid, a * self.m[j] + b * self.m[k])))

    @classmethod
    def from_spec(cls, spec: CouplingSpec, grid: RadialGrid):
        return cls(grid, spec.decay_rates(), spec.crit, spec.self_weights, spec.betas, spec.alphas)

    def K(self, j, v):
        diag, off = self.bands[j]
        out = diag * v
        out[:-1] += off * v[1:]
        out[1:] += off * v[:-1]
        return out

    def parts(self, V):
        """(A_j, P_j, [(j, k, M_jk)]) with tails."""
        A = np.array([self.area * np.dot(V[j], self.K(j, V[j])) for j in range(self.r)])
        P = np.array([self.area * np.dot(self.pw[j], np.abs(V[j]) ** self.crit)
                      for j in range(self.r)])
        M = [(j, k, self.area * np.dot(w, np.abs(V[j]) ** a * np.abs(V[k]) ** b))
             for j, k, a, b, w in self.pairs]
        return A, P, M

    def EF(self, V):
        A, P, M = self.parts(V)
        E = A.sum()
        F = np.dot(self.mu, P) + sum(self.crit * self.betas[j, k] * mjk for j, k, mjk in M)
        return E, F

    def EF_grad(self, V):
        E, F = self.EF(V)
        gE = np.array([2 * self.area * self.K(j, V[j]) for j in range(self.r)])
        gF = np.array([self.mu[j] * self.crit * self.area * self.pw[j]
                       * np.abs(V[j]) ** (self.crit - 2) * V[j] for j in range(self.r)])
        for j, k, a, b, w in self.pairs:
            c = self.crit * self.betas[j, k] * self.area * w
            aj, ak = np.abs(V[j]), np.abs(V[k])
            with np.errstate(divide="ignore", invalid="ignore"):
                gF[j] += np.nan_to_num(c * a * aj ** (a - 2) * V[j] * ak ** b)
                gF[k] += np.nan_to_num(c * b * ak ** (b - 2) * V[k] * aj ** a)
        return E, F, gE, gF

    def quotient(self, V):
        E, F = self.EF(V)
        if not F > 0:
            raise ProjectionError(f"int F = {F} <= 0")
        N = self.grid.N
        return (E / F ** (2.0 / self.crit)) ** (N / 2.0) / N

    def quotient_grad(self, V):
        E, F, gE, gF = self.EF_grad(V)
        if not F > 0:
            raise ProjectionError(f"int F = {F} <= 0")
        N = self.grid.N
        Q = (E / F ** (2.0 / self.crit)) ** (N / 2.0) / N
        return Q, Q * (0.5 * N * gE / E - 0.5 * (N - 2) * gF / F)

    def precondition(self, G):
        """Riesz representer of the gradient in the discrete energy inner product."""
        return np.array([solve_banded((1, 1), self.ab[j], G[j]) / self.area
                         for j in range(self.r)])

    def energy_norm(self, W):
        return math.sqrt(sum(self.area * np.dot(W[j], self.K(j, W[j])) for j in range(self.r)))

    def inner(self, W, Z):
        return sum(self.area * np.dot(W[j], self.K(j, Z[j])) for j in range(self.r))

    def project(self, V):
        E, F = self.EF(V)
        if not F > 0:
            raise ProjectionError(f"int F = {F} <= 0")
        return V * (E / F) ** (1.0 / (self.crit - 2))


# ---------------------------------------------------------------------------
# minimizer


@dataclass
class MinimizeOptions:
    tol: float = 1e-8
    max_iter: int = 5000
    armijo: float = 1e-4
    initial_step: float = 0.1
    max_backtracks: int = 40
    clamp: bool = True
    checkpoint_every: int = 10
    seed: int = 0
    # stop once the quotient drops by less than ftol * |Q| over ftol_window steps
    ftol: float = 1e-13
    ftol_window: int = 100
    # finish with the per-component Nehari scaling (attractive case only)
    refine: bool = False


@dataclass
class MinimizeReport:
    theta_estimate: float
    iterations: int
    final_gradient_norm: float
    initial_gradient_norm: float
    per_component_norms: np.ndarray
    symmetry_deviation: float
    residual_norms: np.ndarray
    nehari_defects: np.ndarray
    diagonal_defect: float
    converged: bool
    init: str
    history: list = field(default_factory=list)
    stop_reason: str = ""
    state: StateTuple | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "theta_estimate": self.theta_estimate, "iterations": self.iterations,
            "final_gradient_norm": self.final_gradient_norm,
            "initial_gradient_norm": self.initial_gradient_norm,
            "per_component_norms": np.asarray(self.per_component_norms).tolist(),
            "symmetry_deviation": self.symmetry_deviation,
            "residual_norms": np.asarray(self.residual_norms).tolist(),
            "nehari_defects": np.asarray(self.nehari_defects).tolist(),
            "diagonal_defect": self.diagonal_defect, "converged": self.converged,
            "init": self.init, "history": [list(h) for h in self.history],
            "stop_reason": self.stop_reason}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "MinimizeReport":
        d = dict(d)
        for key in ("per_component_norms", "residual_norms", "nehari_defects"):
            d[key] = np.asarray(d[key])
        d["history"] = [tuple(h) for h in d.get("history", [])]
        return cls(**d)


def _flow(model: _Model, V0, opts: MinimizeOptions):
    """Preconditioned BB gradient descent on the quotient, projecting each step."""
    V = model.project(np.maximum(V0, 0.0) if opts.clamp else V0)
    Q, G = model.quotient_grad(V)
    D = model.precondition(G)
    gnorm0 = gnorm = model.energy_norm(D)
    vnorm = model.energy_norm(V)
    step = opts.initial_step * vnorm / max(gnorm, 1e-300)
    history = [(0, Q, gnorm)]
    qs = [Q]
    prev = None
    it = 0
    converged = gnorm == 0
    reason = "gradient" if converged else "max-iter"
    failures = 0
    while not converged and it < opts.max_iter:
        it += 1
        if prev is not None:
            dV, dD = V - prev[0], D - prev[1]
            denom = model.inner(dV, dD)
            if denom > 0:
                step = model.inner(dV, dV) / denom
        slope = model.inner(D, D)
        accepted = False
        for _ in range(opts.max_backtracks):
            trial = V - step * D
            if opts.clamp:
                trial = np.maximum(trial, 0.0)
            try:
                trial = model.project(trial)
                Qt = model.quotient(trial)
            except ProjectionError:
                step *= 0.25
                continue
            # the slack lets the search move once decreases reach roundoff level
            if Qt <= Q - opts.armijo * step * slope + 64 * np.finfo(float).eps * abs(Q):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            failures += 1
            if failures > 3:
                reason = "line-search"
                break
            prev = None
            step = opts.initial_step * vnorm / max(gnorm, 1e-300)
            continue
        failures = 0
        prev = (V, D)
        V = trial
        Q, G = model.quotient_grad(V)
        D = model.precondition(G)
        gnorm = model.energy_norm(D)
        qs.append(Q)
        if it % opts.checkpoint_every == 0:
            history.append((it, Q, gnorm))
        if gnorm < opts.tol * gnorm0:
            converged, reason = True, "gradient"
        elif len(qs) > opts.ftol_window and qs[-opts.ftol_window - 1] - Q <= opts.ftol * abs(Q):
            converged, reason = True, "energy-stagnation"
    history.append((it, Q, gnorm))
    return V, Q, it, gnorm, gnorm0, converged, history, reason


def _bubble_profiles(spec: CouplingSpec, grid: RadialGrid, mus=None, amps=None, convention=None):
    mus = np.ones(spec.r) if mus is None else mus
    amps = np.ones(spec.r) if amps is None else amps
    return np.array([amps[j] * grid.to_profile(Bubble(spec.params(j), float(mus[j]), convention)(grid.r))
                     for j in range(spec.r)])


def _coupled_amplitudes(spec: CouplingSpec):
    """sqrt(c_j) from the explicit constructions when the spec has that form."""
    equal_lam = np.allclose(spec.lambdas, spec.lambdas[0])
    off = ~np.eye(spec.r, dtype=bool)
    try:
        if equal_lam and spec.N == 4 and np.allclose(spec.alphas[off], 2.0):
            G = 2.0 * spec.betas
            np.fill_diagonal(G, spec.self_weights)
            return np.sqrt(solve_gamma_system(GammaSpec(float(spec.lambdas[0]), G)).c)
        if equal_lam and spec.r == 2 and spec.N >= 5 and np.allclose(spec.self_weights, 1):
            ts = TwoComponentSpec(spec.N, float(spec.alphas[0, 1]), float(spec.alphas[1, 0]),
                                  float(spec.betas[0, 1]))
            return np.sqrt(solve_two_component(ts, float(spec.lambdas[0])).c)
    except (HypothesisError, RootNotFoundError, DomainError):
        pass
    return None


def initial_profiles(spec: CouplingSpec, grid: RadialGrid, preset: str, seed: int = 0,
                     convention=None):
    if preset == "independent-bubbles":
        return _bubble_profiles(spec, grid, convention=convention)
    if preset == "coupled-bubble":
        amps = _coupled_amplitudes(spec)
        if amps is None:
            return _bubble_profiles(spec, grid, convention=convention)
        lam0 = float(np.min(spec.lambdas))
        z = grid.to_profile(Bubble(HardyParams(spec.N, lam0), 1.0, convention)(grid.r))
        return np.array([a * z for a in amps])
    if preset == "random":
        rng = np.random.default_rng(seed)
        mus = np.exp(rng.uniform(-1.0, 1.0, spec.r))
        amps = rng.uniform(0.5, 1.5, spec.r)
        return _bubble_profiles(spec, grid, mus, amps, convention)
    raise ValueError(f"unknown init preset {preset!r}")


def _report(spec, model, V, Q, it, gnorm, gnorm0, converged, history, reason,
            init) -> MinimizeReport:
    st = StateTuple.from_profiles(spec, model.grid, V)
    E, F = quadratic_and_quartic(st)
    A, _, _ = model.parts(V)
    with np.errstate(invalid="ignore"):
        defects = nehari_defect(st)
    return MinimizeReport(float(energy(st)), it, float(gnorm), float(gnorm0), np.sqrt(A), 0.0,
                          pde_residual(st), defects, float(E - F), bool(converged), init,
                          history, reason, st)


def minimize_theta(spec: CouplingSpec, grid: RadialGrid, init="multi-start",
                   opts: MinimizeOptions | None = None) -> MinimizeReport:
    """Estimate the least energy level on the radial class.

    ``init`` is a :class:`StateTuple` or one of ``"coupled-bubble"``,
    ``"independent-bubbles"``, ``"random"`` and ``"multi-start"`` (the first
    two, keeping the lower energy). With all couplings zero each component
    is minimized on its own and the levels add up.
    """
    opts = opts or MinimizeOptions()
    if grid.N != spec.N:
        raise GridError("grid dimension differs from the spec")
    off = ~np.eye(spec.r, dtype=bool)
    if np.all(spec.betas[off] == 0):
        return _minimize_decoupled(spec, grid, init, opts)
    if np.any(spec.betas[off] < 0):
        raise PredicateNotApplicable("the minimizer targets attractive coupling (beta >= 0)")
    if init == "multi-start":
        reps = [minimize_theta(spec, grid, p, opts) for p in ("coupled-bubble", "independent-bubbles")]
        return min(reps, key=lambda rep: rep.theta_estimate)
    model = _Model.from_spec(spec, grid)
    if isinstance(init, StateTuple):
        if not init.grid.matches(grid):
            raise GridError("initial tuple lives on a different grid")
        V0, name = init.profiles(), "tuple"
    else:
        V0, name = initial_profiles(spec, grid, init, opts.seed), init
    out = _flow(model, V0, opts)
    rep = _report(spec, model, *out, name)
    if opts.refine:
        t, st = nehari_project_componentwise(rep.state)
        rep = _report(spec, model, st.profiles(), None, *out[2:], name + "+componentwise")
    return rep


def nehari_project_componentwise(u: StateTuple):
    """Scale each component onto its own constraint, (t, t * u) with t_j > 0.

    Solves the attractive scaling system by damped Newton from t = 1 (the
    contraction certificate covers only the repulsive sign). Raises
    :class:`ConvergenceError` if Newton fails.
    """
    prob = ScalingProblem.from_integrals(u.spec, u.integrals(), attractive=True)
    t = newton_solve(prob, np.ones(u.spec.r))
    if t is None:
        raise ConvergenceError("componentwise Nehari scaling did not converge from t = 1")
    return t, u.scaled(t)


def _minimize_decoupled(spec, grid, init, opts) -> MinimizeReport:
    if isinstance(init, StateTuple):
        V0 = init.profiles()
        name = "tuple"
    else:
        name = "independent-bubbles" if init == "multi-start" else init
        V0 = initial_profiles(spec, grid, "independent-bubbles" if name == "coupled-bubble" else name,
                              opts.seed)
    m = spec.decay_rates()
    Vs, its, gns, g0s, conv, hist, reasons = [], 0, [], [], True, [], []
    for j in range(spec.r):
        model = _Model(grid, [m[j]], spec.crit, [spec.self_weights[j]])
        V, Q, it, gn, g0, c, h, why = _flow(model, V0[j:j + 1], opts)
        reasons.append(why)
        Vs.append(V[0])
        its = max(its, it)
        gns.append(gn)
        g0s.append(g0)
        conv = conv and c
        hist.extend((j,) + tuple(x) for x in h)
    model = _Model.from_spec(spec, grid)
    V = np.array(Vs)
    return _report(spec, model, V, None, its, max(gns), max(g0s), conv, hist,
                   ",".join(reasons), name)


def interpolate_profiles(V, coarse: RadialGrid, fine: RadialGrid):
    return np.array([np.interp(fine.s, coarse.s, v) for v in V])


@dataclass
class RichardsonResult:
    coarse: float
    fine: float
    extrapolated: float
    M: int


def richardson_theta(spec: CouplingSpec, grid: RadialGrid, init="multi-start",
                     opts: MinimizeOptions | None = None) -> RichardsonResult:
    """(4 theta_{h/2} - theta_h)/3 from runs on ``grid`` and its refinement."""
    rep = minimize_theta(spec, grid, init, opts)
    fine = grid.refined()
    V = interpolate_profiles(rep.state.profiles(), grid, fine)
    rep2 = minimize_theta(spec, fine, StateTuple.from_profiles(spec, fine, V), opts)
    a, b = rep.theta_estimate, rep2.theta_estimate
    return RichardsonResult(a, b, (4 * b - a) / 3, grid.M)


# ---------------------------------------------------------------------------
# separated bubbles


@dataclass
class SeparatedRow:
    mu: float
    t: np.ndarray
    J: float
    certified: bool
    solvable: bool
    contraction_d: float

    def to_dict(self) -> dict:
        return {"mu": self.mu, "t": np.asarray(self.t).tolist(), "J": self.J,
                "certified": self.certified, "solvable": self.solvable,
                "contraction_d": self.contraction_d}


def separated_bubble_experiment(spec: CouplingSpec, mu_schedule=(4, 16, 64, 256),
                                convention=None) -> list:
    """Energy of the Nehari-scaled tuple (z^1_{mu^0}, z^2_{mu^1}, ...).

    Component j is dilated by mu^j. The scaling t(mu) comes from the
    certified Picard solver when its contraction bound holds and from
    damped Newton otherwise (``certified`` records which one).
    """
    off = ~np.eye(spec.r, dtype=bool)
    if np.any(spec.betas[off] >= 0):
        raise PredicateNotApplicable("the experiment needs all beta_jk < 0")
    rows = []
    for mu in mu_schedule:
        mus = float(mu) ** np.arange(spec.r)
        bt = BubbleTuple.of_spec(spec, mus, convention=convention)
        prob = ScalingProblem.from_integrals(spec, bt.integrals())
        rep = check_solvability(prob)
        t = None
        certified = False
        if rep.solvable:
            try:
                t = solve_picard(prob).t
                certified = True
            except ArithmeticError:
                t = None
        if t is None:
            t = newton_solve(prob, prob.base_point)
        if t is None:
            rows.append(SeparatedRow(float(mu), np.full(spec.r, np.nan), math.nan, False,
                                     False, rep.d))
            continue
        rows.append(SeparatedRow(float(mu), t, float(energy(bt.scaled(t))), certified, True,
                                 rep.d))
    return rows


def nonexistence_infimum(spec: CouplingSpec) -> float:
    return float(sum(theta_single(spec.params(j)) for j in range(spec.r)))


# ---------------------------------------------------------------------------
# symmetry


def probe_directions(N: int, count: int, seed: int = 0):
    """Coordinate axes (both signs) followed by seeded random unit vectors."""
    if count < 2:
        raise DomainError("need at least two probe directions")
    axes = np.vstack([np.eye(N), -np.eye(N)])
    if count <= len(axes):
        return axes[:count] if count > 1 else axes[:2]
    rng = np.random.default_rng(seed)
    extra = rng.normal(size=(count - len(axes), N))
    extra /= np.linalg.norm(extra, axis=1, keepdims=True)
    return np.vstack([axes, extra])


def symmetry_diagnostic(u, probe_count: int = 8, N: int | None = None, radii=None,
                        seed: int = 0) -> float:
    """Relative L2 deviation between profiles of ``u`` along probe rays.

    Radial-class objects (:class:`StateTuple`, :class:`RadialField`) give 0.
    A callable ``u(x)`` taking points of shape (n, N) and returning (n,) or
    (n, r) values is sampled along each ray; the result is the largest
    ||P_a - P_b|| / mean(||P_a||, ||P_b||) over pairs of rays, in L2 with
    the radial measure r^(N-1) dr.
    """
    if probe_count < 2:
        raise DomainError("need at least two probe directions")
    if isinstance(u, (StateTuple, RadialField, BubbleTuple)):
        return 0.0
    if N is None:
        raise DomainError("dimension N is required for sampled candidates")
    radii = np.geomspace(1e-2, 1e2, 400) if radii is None else np.asarray(radii, float)
    s = np.log(radii)
    wt = radii ** N  # r^(N-1) dr = r^N ds
    dirs = probe_directions(N, probe_count, seed)
    prof = []
    for d in dirs:
        vals = np.asarray(u(radii[:, None] * d[None, :]), float)
        prof.append(vals.reshape(len(radii), -1))

    def norm(f):
        return math.sqrt(np.trapezoid(wt[:, None] * f * f, s, axis=0).sum())

    worst = 0.0
    for a in range(len(prof)):
        for b in range(a + 1, len(prof)):
            scale = 0.5 * (norm(prof[a]) + norm(prof[b]))
            if scale > 0:
                worst = max(worst, norm(prof[a] - prof[b]) / scale)
    return worst


# ---------------------------------------------------------------------------
# output


def fields_csv(u: StateTuple) -> str:
    """CSV with columns r, u1..ur at 17 significant digits."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["r"] + [f"u{j + 1}" for j in range(u.spec.r)])
    U = np.array([c.values for c in u.components])
    for i, r in enumerate(u.grid.r):
        w.writerow([f"{r:.17g}"] + [f"{x:.17g}" for x in U[:, i]])
    return buf.getvalue()

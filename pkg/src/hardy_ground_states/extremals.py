"""Closed-form Hardy-Sobolev extremals and their constants.

The scalar critical problem

    -u'' - (N-1)/r u' - lam/r^2 u = u^(2*-1),   r > 0,

has the explicit one-parameter family of positive solutions

    z_mu(r) = mu^(-(N-2)/2) z_1(r/mu),
    z_1(r) = amp / (r^a (1 + r^q)^((N-2)/2)),   q = 2 - 4a/(N-2).

All integrals are computed in the logarithmic variable s = ln r, where the
singular behaviour r^(-a) at the origin and the algebraic tail at infinity
both become exponential decay with rate sqrt(Lambda_N - lam).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

PAPER_LITERAL = "paper_literal"
TALENTI_POWER = "talenti_power"
CONVENTIONS = (PAPER_LITERAL, TALENTI_POWER)

QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-12
TAIL_TOL = 1e-12


class DomainError(ValueError):
    """A parameter lies outside the admissible range of the model."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to meet its tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


def hardy_limit(N: int) -> float:
    """Sharp Hardy constant Lambda_N = (N-2)^2 / 4."""
    return (N - 2) ** 2 / 4.0


def critical_exponent(N: int) -> float:
    """Critical Sobolev exponent 2* = 2N/(N-2)."""
    return 2.0 * N / (N - 2)


def sphere_area(N: int) -> float:
    """Surface area of the unit sphere in R^N."""
    return 2.0 * math.pi ** (N / 2) / math.gamma(N / 2)


@dataclass(frozen=True)
class HardyParams:
    """Dimension and Hardy coefficient of one component.

    ``lam = 0`` is accepted for reference computations (the Aubin-Talenti
    case); the coupled model itself requires ``0 < lam < Lambda_N``.
    """

    N: int
    lam: float

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 3:
            raise DomainError(f"N must be an integer >= 3, got {self.N!r}")
        if not (0.0 <= self.lam < hardy_limit(self.N)):
            raise DomainError(
                f"lam={self.lam!r} outside [0, {hardy_limit(self.N)}) for N={self.N}"
            )

    @property
    def Lambda(self) -> float:
        return hardy_limit(self.N)

    @property
    def crit(self) -> float:
        return critical_exponent(self.N)

    @property
    def k(self) -> float:
        """Half the conformal weight, (N-2)/2."""
        return (self.N - 2) / 2.0

    @property
    def decay_rate(self) -> float:
        """sqrt(Lambda_N - lam); the exponential rate in s = ln r."""
        return math.sqrt(self.Lambda - self.lam)

    @property
    def a(self) -> float:
        return a_lambda(self)

    @property
    def q(self) -> float:
        return 2.0 - 4.0 * self.a / (self.N - 2)

    @property
    def A(self) -> float:
        """The constant A(N, lam) = N (N-2-2a)^2 / (N-2)."""
        return self.N * (self.N - 2 - 2 * self.a) ** 2 / (self.N - 2)


def a_lambda(params: HardyParams) -> float:
    """Singular exponent a = (N-2)/2 - sqrt((N-2)^2/4 - lam)."""
    return (params.N - 2) / 2.0 - math.sqrt(params.Lambda - params.lam)


def amplitude(params: HardyParams, convention: str) -> float:
    """Prefactor of the unit bubble under ``convention``.

    ``paper_literal`` uses A(N, lam) itself as the prefactor; ``talenti_power`` uses
    A(N, lam)^((N-2)/4), which reduces to (N(N-2))^((N-2)/4) at lam = 0.
    """
    if convention == PAPER_LITERAL:
        return params.A
    if convention == TALENTI_POWER:
        return params.A ** ((params.N - 2) / 4.0)
    raise ValueError(f"unknown amplitude convention {convention!r}")


@dataclass(frozen=True)
class Bubble:
    """The extremal z_mu for one set of Hardy parameters."""

    params: HardyParams
    mu: float = 1.0
    convention: str = field(default=None)

    def __post_init__(self):
        if not self.mu > 0:
            raise DomainError(f"dilation mu must be positive, got {self.mu!r}")
        if self.convention is None:
            object.__setattr__(self, "convention", default_convention(self.params))
        elif self.convention not in CONVENTIONS:
            raise ValueError(f"unknown amplitude convention {self.convention!r}")

    @property
    def amp(self) -> float:
        return amplitude(self.params, self.convention)

    def with_mu(self, mu: float) -> "Bubble":
        return Bubble(self.params, mu, self.convention)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise DomainError("bubble is singular at the origin; need r > 0")
        p = self.params
        rho = r / self.mu
        log_g = -p.a * np.log(rho) - p.k * np.logaddexp(0.0, p.q * np.log(rho))
        return self.amp * self.mu ** (-p.k) * np.exp(log_g)

    def derivatives(self, r):
        """Return (u, u', u'') at radii ``r`` from the closed form."""
        r = np.asarray(r, dtype=float)
        p = self.params
        u = self(r)
        rho = r / self.mu
        rq = rho ** p.q
        dL = -p.a / rho - p.k * p.q * rho ** (p.q - 1) / (1 + rq)
        d2L = p.a / rho**2 - p.k * p.q * rho ** (p.q - 2) * (p.q - 1 - rq) / (1 + rq) ** 2
        du = u * dL / self.mu
        d2u = u * (dL**2 + d2L) / self.mu**2
        return u, du, d2u

    def profile(self, s):
        """Emden-Fowler profile v(s) = r^k u(r) at r = e^s.

        v depends on s only through s - ln(mu), so dilation is a shift.
        """
        p = self.params
        t = np.asarray(s, dtype=float) - math.log(self.mu)
        return self.amp * np.exp((p.k - p.a) * t - p.k * np.logaddexp(0.0, p.q * t))


def bubble_value(b: Bubble, r):
    """Evaluate z_mu(r); raises :class:`DomainError` for r <= 0."""
    return b(r)


def hardy_residual(b: Bubble, r):
    """Pointwise residual -u'' - (N-1)/r u' - lam/r^2 u - u^(2*-1)."""
    p = b.params
    u, du, d2u = b.derivatives(r)
    r = np.asarray(r, dtype=float)
    return -d2u - (p.N - 1) / r * du - p.lam / r**2 * u - u ** (p.crit - 1)


def weighted_residual_norm(b: Bubble, r_min=1e-3, r_max=1e3, M=1024) -> float:
    """Dilation-invariant L2 norm of the closed-form residual.

    The residual is weighted by r^((N+2)/2) and integrated against ds = dr/r
    (trapezoid on an M-node log-uniform grid); this is the L2 norm of the
    residual of the equivalent autonomous equation in s = ln r.
    """
    s = np.linspace(math.log(r_min), math.log(r_max), M)
    r = np.exp(s)
    w = r ** ((b.params.N + 2) / 2.0) * hardy_residual(b, r)
    return math.sqrt(integrate.trapezoid(w**2, s))


@lru_cache(maxsize=None)
def _selected_convention(N: int, lam: float) -> str:
    params = HardyParams(N, lam)
    scores = {
        c: weighted_residual_norm(Bubble(params, 1.0, c)) for c in CONVENTIONS
    }
    return min(scores, key=scores.get)


def default_convention(params: HardyParams) -> str:
    """Convention whose bubble has the smaller equation residual."""
    return _selected_convention(params.N, float(params.lam))


def residual_scores(params: HardyParams) -> dict:
    """Residual norm of each amplitude convention, for reporting."""
    return {c: weighted_residual_norm(Bubble(params, 1.0, c)) for c in CONVENTIONS}


# ---------------------------------------------------------------------------
# quadrature in s = ln r


def _tail_halfwidth(rate: float, scale: float = 1.0) -> float:
    # integrand ~ scale * exp(-rate |t|) beyond the core
    return (math.log(max(scale, 1.0) / TAIL_TOL) + 10.0) / rate


def log_radial_quad(f, centers, rate: float, N: int, scale: float = 1.0):
    """Integrate ``f(s)`` over the real line, times the sphere area |S^{N-1}|.

    ``f`` must decay like exp(-rate |s - c|) away from the given centers; the
    domain is truncated where the neglected tail is below ``TAIL_TOL``. The
    integral is split at every center and at s = 0 (r = 1).
    """
    centers = np.atleast_1d(np.asarray(centers, dtype=float))
    L = _tail_halfwidth(rate, scale)
    lo, hi = centers.min() - L, centers.max() + L
    cuts = sorted({lo, hi, *[c for c in (0.0, *centers) if lo < c < hi]})
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        val, err = integrate.quad(f, a, b, epsabs=QUAD_EPSABS * 1e-2,
                                  epsrel=QUAD_EPSREL, limit=400)
        if not np.isfinite(val) or err > max(QUAD_EPSABS, 1e-9 * abs(val)):
            raise QuadratureError("quadrature did not converge",
                                  {"interval": (a, b), "value": val, "error": err})
        total += val
    return sphere_area(N) * total


def bubble_integrals(b: Bubble):
    """Return (||z||_lam^2, |z|_{2*}^{2*}) by adaptive quadrature.

    The Dirichlet form is taken literally, int(|u'|^2 - lam u^2/r^2) r^(N-1)
    dr, using the analytic derivative (no integration by parts).
    """
    p = b.params
    m = p.decay_rate
    c = math.log(b.mu)

    def dirichlet(s):
        r = math.exp(s)
        u, du, _ = b.derivatives(r)
        return (r * r * du * du - p.lam * u * u) * r ** (p.N - 2)

    def power(s):
        r = math.exp(s)
        return float(b(r)) ** p.crit * r**p.N

    scale = b.amp ** p.crit + b.amp**2
    norm_sq = log_radial_quad(dirichlet, c, 2 * m, p.N, scale)
    pow_int = log_radial_quad(power, c, p.crit * m, p.N, scale)
    return norm_sq, pow_int


def bubble_energy(b: Bubble) -> float:
    """I_lam(z_mu) = ||z||^2/2 - |z|_{2*}^{2*}/2* by quadrature."""
    norm_sq, pow_int = bubble_integrals(b)
    return 0.5 * norm_sq - pow_int / b.params.crit


def rayleigh_quotient(b: Bubble) -> float:
    """||z||_lam^2 / |z|_{2*}^2 computed by quadrature."""
    norm_sq, pow_int = bubble_integrals(b)
    return norm_sq / pow_int ** (2.0 / b.params.crit)


@lru_cache(maxsize=None)
def sharp_sobolev_constant(N: int) -> float:
    """Best constant of D^{1,2}(R^N) -> L^{2*}, from the lam=0 bubble."""
    return rayleigh_quotient(Bubble(HardyParams(N, 0.0), 1.0, TALENTI_POWER))


@dataclass(frozen=True)
class SobolevConstants:
    S: float
    S_lambda: float
    theta_single: float


def hardy_sobolev_factor(params: HardyParams) -> float:
    """(1 - 4 lam/(N-2)^2)^((N-1)/N)."""
    return (1.0 - 4.0 * params.lam / (params.N - 2) ** 2) ** ((params.N - 1) / params.N)


def sobolev_constants(params: HardyParams) -> SobolevConstants:
    S = sharp_sobolev_constant(params.N)
    S_lam = hardy_sobolev_factor(params) * S
    return SobolevConstants(S, S_lam, S_lam ** (params.N / 2.0) / params.N)


def theta_single(params: HardyParams) -> float:
    """Least energy (1/N) S(lam)^(N/2) of the scalar problem."""
    return sobolev_constants(params).theta_single


@dataclass(frozen=True)
class ExponentReport:
    """Closed-form S(lam) against the Rayleigh quotient of the bubble."""

    closed_form: float
    oracle: float
    rel_diff: float


def sobolev_exponent_report(params: HardyParams) -> ExponentReport:
    closed_form = sobolev_constants(params).S_lambda
    oracle = rayleigh_quotient(Bubble(params))
    return ExponentReport(closed_form, oracle, abs(closed_form - oracle) / oracle)


@dataclass(frozen=True)
class IdentityReport:
    """Which form of the solution identity holds for a bubble.

    ``power_form``: ||z||^2 = |z|_{2*}^{2*};  ``square_form``:
    ||z||^2 = |z|_{2*}^2. Values are relative mismatches.
    """

    norm_sq: float
    pow_int: float
    power_form_mismatch: float
    square_form_mismatch: float

    @property
    def holding_form(self) -> str:
        if self.power_form_mismatch <= self.square_form_mismatch:
            return "power"
        return "square"


def solution_identity_report(b: Bubble) -> IdentityReport:
    norm_sq, pow_int = bubble_integrals(b)
    sq = pow_int ** (2.0 / b.params.crit)
    return IdentityReport(
        norm_sq, pow_int,
        abs(norm_sq - pow_int) / norm_sq,
        abs(norm_sq - sq) / norm_sq,
    )


def mixed_bubble_integral(b1: Bubble, b2: Bubble, p1: float, p2: float) -> float:
    """int z1^p1 z2^p2 over R^N by quadrature, for p1 + p2 = 2*."""
    N = b1.params.N
    if b2.params.N != N:
        raise DomainError("bubbles live in different dimensions")
    rate = p1 * b1.params.decay_rate + p2 * b2.params.decay_rate

    def integrand(s):
        r = math.exp(s)
        return float(b1(r)) ** p1 * float(b2(r)) ** p2 * r**N

    scale = b1.amp**p1 * b2.amp**p2
    return log_radial_quad(integrand, [math.log(b1.mu), math.log(b2.mu)], rate, N, scale)

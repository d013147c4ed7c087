"""Scalar analysis of the energy along a ray t -> t*w.

Everything here is algebra over a :class:`FunctionalTriple`; no grid work.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

from .domain import ProblemParams
from .functionals import FunctionalTriple


class FiberError(ValueError):
    """Root brackets could not be established on the ray."""


class RootCase(str, enum.Enum):
    TWO_ROOTS = "TwoRoots"
    ONE_ROOT = "OneRoot"
    NO_POSITIVE_PART = "NoPositivePart"


class NehariClass(str, enum.Enum):
    PLUS = "Plus"
    MINUS = "Minus"
    ZERO = "Zero"
    OFF = "Off"


def _check_t(t):
    if not t > 0.0:
        raise ValueError(f"t must be positive (got {t})")


def phi(triple: FunctionalTriple, params: ProblemParams, lam: float, t: float):
    """Energy along the ray and its first two t-derivatives."""
    _check_t(t)
    p, q, r = params.p, params.q, params.r
    n, a, b = triple.seminorm_p, triple.a_integral, triple.b_integral
    val = t ** p / p * n - t ** (1 - q) / (1 - q) * a - lam * t ** (r + 1) / (r + 1) * b
    d1 = t ** (p - 1) * n - t ** (-q) * a - lam * t ** r * b
    d2 = (p - 1) * t ** (p - 2) * n + q * t ** (-q - 1) * a - r * lam * t ** (r - 1) * b
    return val, d1, d2


def psi(triple: FunctionalTriple, params: ProblemParams, lam: float, t: float) -> float:
    """phi'(t) / t^r; its zeros are the Nehari crossings of the ray."""
    _check_t(t)
    p, q, r = params.p, params.q, params.r
    return (t ** (p - 1 - r) * triple.seminorm_p - t ** (-r - q) * triple.a_integral
            - lam * triple.b_integral)


def psi_derivatives(triple: FunctionalTriple, params: ProblemParams, t: float):
    _check_t(t)
    p, q, r = params.p, params.q, params.r
    n, a = triple.seminorm_p, triple.a_integral
    d1 = (p - 1 - r) * t ** (p - 2 - r) * n + (r + q) * t ** (-r - q - 1) * a
    d2 = ((p - 1 - r) * (p - 2 - r) * t ** (p - r - 3) * n
          - (r + q) * (r + q + 1) * t ** (-r - q - 2) * a)
    return d1, d2


def t_max(triple: FunctionalTriple, params: ProblemParams) -> float:
    """Unique maximizer of psi; requires A > 0."""
    if not triple.a_integral > 0.0:
        raise FiberError("A(w) = 0: psi has no interior maximum")
    p, q, r = params.p, params.q, params.r
    return ((r + q) * triple.a_integral / ((r - p + 1) * triple.seminorm_p)) ** (1.0 / (p - 1 + q))


def _bisect(f, lo, hi):
    """Root of f on [lo, hi] with f(lo) < 0 < f(hi) or the reverse, to full precision."""
    f_lo = f(lo)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid > 0.0) == (f_lo > 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    # endpoint with the smaller residual
    return lo if abs(f(lo)) <= abs(f(hi)) else hi


_EXPAND = 10.0
_CAP = 1e12


@dataclass(frozen=True)
class FiberReport:
    triple: FunctionalTriple
    lam: float
    case: RootCase
    t_max: float | None = None
    psi_at_tmax: float | None = None
    t1: float | None = None
    t2: float | None = None
    phi_second_at_roots: tuple = ()
    phi_at_roots: tuple = ()

    def as_dict(self) -> dict:
        return {
            "case": self.case.value,
            "lambda": self.lam,
            "triple": self.triple.as_dict(),
            "t_max": self.t_max,
            "psi_at_tmax": self.psi_at_tmax,
            "t1": self.t1,
            "t2": self.t2,
            "phi_at_roots": list(self.phi_at_roots),
            "phi_second_at_roots": list(self.phi_second_at_roots),
        }


def fiber_roots(triple: FunctionalTriple, params: ProblemParams, lam: float) -> FiberReport:
    """Locate the zeros of psi on either side of t_max by bracketed bisection.

    B > 0 gives two roots t1 < t_max < t2, B <= 0 a single root t1 < t_max.
    Brackets are grown geometrically by a factor 10 from t_max. The lower
    bracket is capped at t_max/1e12; the upper one at t_max*1e12 when
    r - p + 1 >= 1 and at t_max*10^(12/(r-p+1)) otherwise, since psi only
    decays like t^-(r-p+1) towards -lambda*B.
    """
    if not triple.a_integral > 0.0:
        return FiberReport(triple, lam, RootCase.NO_POSITIVE_PART)
    tm = t_max(triple, params)

    def f(t):
        return psi(triple, params, lam, t)

    top = f(tm)
    if not top > 0.0:
        raise FiberError(f"psi(t_max) = {top:.6g} <= 0: no Nehari point on this ray "
                         "(lambda at or above the threshold)")
    lo = tm
    while f(lo) >= 0.0:
        lo /= _EXPAND
        if lo < tm / _CAP:
            raise FiberError("could not bracket the lower root of psi")
    t1 = _bisect(f, lo, tm)
    roots = [t1]
    t2 = None
    if triple.b_integral > 0.0:
        hi = tm
        cap = _CAP ** (1.0 / min(1.0, params.r - params.p + 1))
        while f(hi) >= 0.0:
            hi *= _EXPAND
            if hi > tm * cap:
                raise FiberError("could not bracket the upper root of psi")
        t2 = _bisect(f, tm, hi)
        roots.append(t2)
    phis = [phi(triple, params, lam, t) for t in roots]
    return FiberReport(
        triple=triple,
        lam=lam,
        case=RootCase.TWO_ROOTS if t2 is not None else RootCase.ONE_ROOT,
        t_max=tm,
        psi_at_tmax=top,
        t1=t1,
        t2=t2,
        phi_at_roots=tuple(v[0] for v in phis),
        phi_second_at_roots=tuple(v[2] for v in phis),
    )


def nehari_classify(triple: FunctionalTriple, params: ProblemParams, lam: float,
                    tol_n: float = 1e-8, tol_0: float = 1e-10) -> NehariClass:
    n = triple.seminorm_p
    gap = n - triple.a_integral - lam * triple.b_integral
    if abs(gap) > tol_n * n:
        return NehariClass.OFF
    d = (params.p - 1 + params.q) * n - lam * (params.r + params.q) * triple.b_integral
    band = tol_0 * n
    if d > band:
        return NehariClass.PLUS
    if d < -band:
        return NehariClass.MINUS
    return NehariClass.ZERO


@dataclass(frozen=True)
class CoercivityBound:
    """rho(t) = alpha t^p - beta t^(1-q) bounds J from below on the Nehari set."""

    alpha: float
    beta: float
    t_min: float
    rho_min: float
    reduced_floor: float

    def rho(self, t: float, params: ProblemParams) -> float:
        return self.alpha * t ** params.p - self.beta * t ** (1.0 - params.q)

    def as_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "t_min": self.t_min,
                "rho_min": self.rho_min, "reduced_floor": self.reduced_floor}


def coercivity_bound(params: ProblemParams, norm_a: float, s_const: float) -> CoercivityBound:
    """Minimum of rho with the weight factor ||a|| S^-(1-q)/p kept in beta.

    ``reduced_floor`` is the closed form -(p-1+q)(r+1-p)/((1-q)(r+1)) *
    ((r+q)/(p(r+1-p)))^(p/(p-1+q)), which drops that factor; it is reported
    for comparison only and is not used as a bound.
    """
    p, q, r = params.p, params.q, params.r
    e = p - 1 + q
    alpha = 1.0 / p - 1.0 / (r + 1)
    beta = (1.0 / (1 - q) - 1.0 / (r + 1)) * norm_a * s_const ** (-(1 - q) / p)
    t_min = (beta * (1 - q) / (p * alpha)) ** (1.0 / e)
    rho_min = -(e / p) * beta ** (p / e) * ((1 - q) / (p * alpha)) ** ((1 - q) / e)
    reduced = (-(e * (r + 1 - p)) / ((1 - q) * (r + 1))
               * ((r + q) / (p * (r + 1 - p))) ** (p / e))
    return CoercivityBound(alpha, beta, t_min, rho_min, reduced)


def rho_derivative(bound: CoercivityBound, params: ProblemParams, t: float) -> float:
    return (bound.alpha * params.p * t ** (params.p - 1)
            - bound.beta * (1 - params.q) * t ** (-params.q))


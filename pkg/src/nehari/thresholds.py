"""Closed-form constants: the lambda threshold, E_lambda, the gap radii, the
blow-up constant and the (Q_lambda) rescaling.

The Sobolev constant is always injected by the caller. It is the best
constant S in ||w||^p >= S ||w||_{p*}^p, so S^(1/p) plays the role of the
p-th root appearing in the bounds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .domain import GridFunction, ParamError, ProblemParams
from .fiber import coercivity_bound


def _exps(params: ProblemParams):
    p, q, r = params.p, params.q, params.r
    return p - 1 + q, r - p + 1, r + q  # e_low, e_high, r+q


def lambda_star(params: ProblemParams, norm_a: float, norm_b: float, s_const: float) -> float:
    e_low, e_high, rq = _exps(params)
    log_val = (math.log(e_low / rq)
               + (e_high / e_low) * math.log(e_high / rq)
               - math.log(norm_b)
               + (rq * math.log(s_const) - e_high * math.log(norm_a)) / e_low)
    return math.exp(log_val)


def e_lambda(lam: float, params: ProblemParams, norm_a: float, norm_b: float, s_const: float) -> float:
    """Lower-bound coefficient psi(t_max) >= E_lambda ||w||^(r+1); affine in lambda."""
    e_low, e_high, rq = _exps(params)
    root_s = s_const ** (1.0 / params.p)
    first = (e_low / rq) * (e_high / rq) ** (e_high / e_low) \
        * (root_s ** (1 - params.q) / norm_a) ** (e_high / e_low)
    return first - lam * norm_b * root_s ** (-(params.r + 1))


def gap_radii(lam: float, params: ProblemParams, norm_a: float, norm_b: float,
              s_const: float) -> tuple[float, float]:
    """(A_lambda, A_0): N^- lies outside the first ball, N^+ inside the second."""
    if not lam > 0.0:
        raise ValueError("lambda must be positive")
    e_low, e_high, rq = _exps(params)
    root_s = s_const ** (1.0 / params.p)
    a_lam = (e_low / (lam * rq * norm_b) * root_s ** (params.r + 1)) ** (1.0 / e_high)
    a_zero = (rq / e_high * norm_a * root_s ** (-(1 - params.q))) ** (1.0 / e_low)
    return a_lam, a_zero


def blowup_constant(eps: float, params: ProblemParams, norm_a: float, s_const: float) -> float:
    """C_eps for r = p - 1 + eps; ``params.r`` is ignored."""
    if not eps > 0.0:
        raise ParamError("epsilon must be positive")
    if not params.p - 1 + eps < params.p_star - 1:
        raise ParamError(f"epsilon = {eps} puts r = p - 1 + eps outside (p - 1, p_s^* - 1)")
    e_low = params.p - 1 + params.q
    root_s = s_const ** (1.0 / params.p)
    return ((1 + e_low / eps) ** (1 / e_low) * norm_a ** (1 / e_low)
            * root_s ** (-(1 - params.q) / e_low))


def q_lambda_scaling(lam: float, params: ProblemParams) -> tuple[float, float]:
    """(mu, c): u = mu*w maps solutions of (P_lambda) to solutions of the
    problem with coefficients (c, 1), mu = lam^(1/(r-p+1)), c = lam^((p-1+q)/(r-p+1)).

    Substituting u = mu w requires mu^(r-p+1) = lam; an exponent 1/(r+p-1)
    would not cancel lambda in front of b.
    """
    if not lam > 0.0:
        raise ValueError("lambda must be positive")
    e_low, e_high, _ = _exps(params)
    return lam ** (1.0 / e_high), lam ** (e_low / e_high)


def q_lambda_transform(w: GridFunction, lam: float, params: ProblemParams):
    mu, coef = q_lambda_scaling(lam, params)
    return mu * w, coef


@dataclass(frozen=True)
class ThresholdReport:
    lam: float | None
    lambda_star: float
    e_lambda: float | None
    e_zero: float
    a_lambda: float | None
    a_zero: float
    s_value: float
    s_used: float
    norm_a: float
    norm_b: float
    rho_min: float
    t_min: float
    reduced_floor: float
    c_eps: float
    q_scaling_mu: float | None
    q_coefficient: float | None

    def as_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "lambda_star": self.lambda_star,
            "lambda_over_lambda_star": None if self.lam is None else self.lam / self.lambda_star,
            "e_lambda": self.e_lambda,
            "e_zero": self.e_zero,
            "a_lambda": self.a_lambda,
            "a_zero": self.a_zero,
            "s_value": self.s_value,
            "s_used": self.s_used,
            "norm_a": self.norm_a,
            "norm_b": self.norm_b,
            "rho_min": self.rho_min,
            "t_min": self.t_min,
            "reduced_floor": self.reduced_floor,
            "c_eps": self.c_eps,
            "q_scaling_mu": self.q_scaling_mu,
            "q_coefficient": self.q_coefficient,
            "notes": [
                "S enters all bounds as s_used = s_value * (1 - margin).",
                "reduced_floor drops the ||a|| S^-(1-q)/p factor of beta and is not a bound; "
                "rho_min is.",
                "(Q_lambda) scaling uses mu = lambda^(1/(r-p+1)); the exponent 1/(r+p-1) "
                "does not satisfy the rescaled equation.",
            ],
        }


def threshold_report(params: ProblemParams, norm_a: float, norm_b: float, s_value: float,
                     margin: float, lam: float | None = None) -> ThresholdReport:
    s_used = s_value * (1.0 - margin)
    lam_star = lambda_star(params, norm_a, norm_b, s_used)
    coerc = coercivity_bound(params, norm_a, s_used)
    eps = params.r - params.p + 1
    if lam is not None:
        a_lam, a_zero = gap_radii(lam, params, norm_a, norm_b, s_used)
        e_lam = e_lambda(lam, params, norm_a, norm_b, s_used)
        mu, coef = q_lambda_scaling(lam, params)
    else:
        a_lam = e_lam = mu = coef = None
        _, a_zero = gap_radii(1.0, params, norm_a, norm_b, s_used)
    return ThresholdReport(
        lam=lam,
        lambda_star=lam_star,
        e_lambda=e_lam,
        e_zero=e_lambda(0.0, params, norm_a, norm_b, s_used),
        a_lambda=a_lam,
        a_zero=a_zero,
        s_value=s_value,
        s_used=s_used,
        norm_a=norm_a,
        norm_b=norm_b,
        rho_min=coerc.rho_min,
        t_min=coerc.t_min,
        reduced_floor=coerc.reduced_floor,
        c_eps=blowup_constant(eps, params, norm_a, s_used),
        q_scaling_mu=mu,
        q_coefficient=coef,
    )

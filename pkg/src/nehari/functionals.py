"""Discrete Gagliardo energy, the weighted integrals A and B, the energy J and
its gradient, weight norms and the discrete Sobolev constant.

The seminorm model is the collocation double sum

    ||w||_h^p = sum_{i != j} h^2 |w_i - w_j|^p |x_i - x_j|^-(1+ps)
                + 2 sum_i h |w_i|^p kappa(x_i)

where kappa is the exact integral of the kernel over the exterior of (-1, 1).
Both pieces are exactly p-homogeneous.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .domain import Grid, GridFunction, ProblemParams, WeightPair
from .summation import dot, row_sums, total


@dataclass(frozen=True)
class FunctionalTriple:
    seminorm_p: float
    a_integral: float
    b_integral: float

    def scaled(self, t: float, params: ProblemParams) -> FunctionalTriple:
        """Triple of t*w from the triple of w (t > 0)."""
        return FunctionalTriple(
            t ** params.p * self.seminorm_p,
            t ** (1.0 - params.q) * self.a_integral,
            t ** (params.r + 1.0) * self.b_integral,
        )

    def as_dict(self) -> dict:
        return {"seminorm_p": self.seminorm_p, "a_integral": self.a_integral,
                "b_integral": self.b_integral}


def exterior_kernel_weight(x, params: ProblemParams):
    """Integral of |x - y|^-(1+ps) over |y| >= 1, for -1 < x < 1."""
    xa = np.asarray(x, dtype=float)
    if np.any(np.abs(xa) >= 1.0):
        raise ValueError("exterior kernel weight diverges at or outside the boundary")
    ps = params.ps
    val = ((1.0 + xa) ** (-ps) + (1.0 - xa) ** (-ps)) / ps
    return float(val) if np.ndim(val) == 0 else val


@lru_cache(maxsize=16)
def _kernel(num_nodes: int, ps: float):
    grid = Grid(num_nodes)
    x, h = grid.nodes, grid.h
    dist = np.abs(x[:, None] - x[None, :])
    np.fill_diagonal(dist, 1.0)
    k = h * h * dist ** (-(1.0 + ps))
    np.fill_diagonal(k, 0.0)
    kappa = ((1.0 + x) ** (-ps) + (1.0 - x) ** (-ps)) / ps
    k.flags.writeable = False
    kappa.flags.writeable = False
    return k, kappa


def kernel(grid: Grid, params: ProblemParams):
    """Pair weights h^2 |x_i - x_j|^-(1+ps) (zero diagonal) and exterior weights."""
    return _kernel(grid.num_nodes, params.ps)


@lru_cache(maxsize=16)
def _metric_factor(num_nodes: int, ps: float):
    k, kappa = _kernel(num_nodes, ps)
    h = Grid(num_nodes).h
    m = 2.0 * (np.diag(row_sums(k)) - k) + np.diag(2.0 * h * kappa)
    return cho_factor(m, lower=True)


def apply_metric_inverse(grid: Grid, params: ProblemParams, g: np.ndarray) -> np.ndarray:
    """Solve M d = g with M the Hessian of half the p = 2 energy.

    Used as the descent metric (a discrete H^s gradient) for every p.
    """
    return cho_solve(_metric_factor(grid.num_nodes, params.ps), g)


# ---------------------------------------------------------------------------
# array kernels (values only, no wrappers) used in the inner loops


def _seminorm_values(v, k, kappa, h, p):
    diff = np.abs(v[:, None] - v[None, :])
    inner = total(row_sums(k * diff ** p))
    outer = total(kappa * np.abs(v) ** p)
    return inner + 2.0 * h * outer


def _seminorm_gradient_values(v, k, kappa, h, p):
    """Gradient of (1/p)*||v||_h^p."""
    d = v[:, None] - v[None, :]
    flux = np.abs(d) ** (p - 1.0) * np.sign(d)
    return 2.0 * row_sums(k * flux) + 2.0 * h * kappa * np.abs(v) ** (p - 1.0) * np.sign(v)


def singularity_floor(v) -> float:
    return 1e-8 * max(1.0, float(np.max(np.abs(v))))


def _triple_values(v, a, b, k, kappa, h, params):
    vp = np.maximum(v, 0.0)
    return FunctionalTriple(
        _seminorm_values(v, k, kappa, h, params.p),
        h * total(a * vp ** (1.0 - params.q)),
        h * total(b * vp ** (params.r + 1.0)),
    )


def _gradient_values(v, a, b, k, kappa, h, params, a_coef, b_coef):
    q, r = params.q, params.r
    delta = singularity_floor(v)
    positive = v > 0.0
    sing = np.where(positive, np.maximum(v, delta) ** (-q), 0.0)
    sup = np.where(positive, np.maximum(v, 0.0) ** r, 0.0)
    return (_seminorm_gradient_values(v, k, kappa, h, params.p)
            - h * a_coef * a * sing - h * b_coef * b * sup)


# ---------------------------------------------------------------------------
# public operations


def seminorm_p(w: GridFunction, params: ProblemParams) -> float:
    k, kappa = kernel(w.grid, params)
    return _seminorm_values(w.values, k, kappa, w.grid.h, params.p)


def functional_triple(w: GridFunction, weights: WeightPair, params: ProblemParams) -> FunctionalTriple:
    k, kappa = kernel(w.grid, params)
    return _triple_values(w.values, weights.a.values, weights.b.values, k, kappa, w.grid.h, params)


def energy_from_triple(triple: FunctionalTriple, params: ProblemParams) -> float:
    lam = params.require_lambda()
    return (triple.seminorm_p / params.p
            - triple.a_integral / (1.0 - params.q)
            - lam * triple.b_integral / (params.r + 1.0))


def energy(w: GridFunction, weights: WeightPair, params: ProblemParams) -> float:
    return energy_from_triple(functional_triple(w, weights, params), params)


def first_variation(w: GridFunction, weights: WeightPair, params: ProblemParams,
                    a_coef: float = 1.0, b_coef: float | None = None) -> GridFunction:
    """Gradient of the discrete energy.

    The singular term uses max(w_i, delta)^-q on positive nodes (zero where
    w_i <= 0) with delta = 1e-8*max(1, sup|w|). ``a_coef`` and ``b_coef``
    replace the coefficients 1 and lambda in front of the two reaction terms.
    """
    if b_coef is None:
        b_coef = params.require_lambda()
    k, kappa = kernel(w.grid, params)
    g = _gradient_values(w.values, weights.a.values, weights.b.values, k, kappa,
                         w.grid.h, params, a_coef, b_coef)
    return GridFunction(w.grid, g)


def pairing(g: GridFunction, v: GridFunction) -> float:
    return dot(g.values, v.values)


def weight_exponents(params: ProblemParams) -> tuple[float, float]:
    """Lebesgue exponents of the norms of a and b."""
    ps_ = params.p_star
    return ps_ / (ps_ - 1.0 + params.q), ps_ / (ps_ - 1.0 - params.r)


def weight_norms(weights: WeightPair, params: ProblemParams) -> tuple[float, float]:
    m_a, m_b = weight_exponents(params)
    h = weights.grid.h
    norm_a = (h * total(np.abs(weights.a.values) ** m_a)) ** (1.0 / m_a)
    norm_b = (h * total(np.abs(weights.b.values) ** m_b)) ** (1.0 / m_b)
    return norm_a, norm_b


def critical_norm(w: GridFunction, params: ProblemParams) -> float:
    """(sum_i h |w_i|^{p_s^*})^{1/p_s^*}."""
    m = params.p_star
    return (w.grid.h * total(np.abs(w.values) ** m)) ** (1.0 / m)


# ---------------------------------------------------------------------------
# Sobolev constant


@dataclass(frozen=True)
class SobolevConfig:
    max_iters: int = 20000
    grad_tol: float = 1e-10
    step0: float = 1.0
    shrink: float = 0.5
    armijo_c: float = 1e-4
    margin: float = 1e-3

    def __post_init__(self):
        if self.max_iters < 1 or not 0.0 < self.shrink < 1.0 or self.grad_tol <= 0.0:
            raise ValueError("invalid Sobolev descent configuration")
        if not 0.0 <= self.margin < 1.0:
            raise ValueError("margin must lie in [0, 1)")


@dataclass(frozen=True)
class SobolevEstimate:
    s_value: float
    minimizer: GridFunction
    margin: float
    converged: bool
    iterations: int
    start_value: float

    @property
    def s_used(self) -> float:
        """Constant actually used inside inequalities, s_value*(1 - margin)."""
        return self.s_value * (1.0 - self.margin)

    def as_dict(self) -> dict:
        return {"s_value": self.s_value, "s_used": self.s_used, "margin": self.margin,
                "converged": self.converged, "iterations": self.iterations,
                "start_value": self.start_value}


def rayleigh_quotient(w: GridFunction, params: ProblemParams) -> float:
    return seminorm_p(w, params) / critical_norm(w, params) ** params.p


def _rayleigh_values(v, k, kappa, h, params):
    p, m = params.p, params.p_star
    num = _seminorm_values(v, k, kappa, h, p)
    den = h * total(np.abs(v) ** m)
    return num / den ** (p / m), num, den


def _rayleigh_gradient(v, k, kappa, h, params, num, den):
    p, m = params.p, params.p_star
    g_num = p * _seminorm_gradient_values(v, k, kappa, h, p)
    g_den = h * m * np.abs(v) ** (m - 1.0) * np.sign(v)
    scale = den ** (p / m)
    return g_num / scale - num * (p / m) * den ** (p / m - 1.0) * g_den / scale ** 2


def sobolev_estimate(grid: Grid, params: ProblemParams,
                     config: SobolevConfig = SobolevConfig()) -> SobolevEstimate:
    """Minimize the discrete Rayleigh quotient from the hat function.

    Gradient descent in the M-metric (see :func:`apply_metric_inverse`) with
    Armijo backtracking; iterates are renormalized to unit critical norm.
    Stops when the metric gradient norm relative to the quotient drops below
    ``grad_tol`` or when no decrease can be found.
    """
    k, kappa = kernel(grid, params)
    h = grid.h
    v = 1.0 - np.abs(grid.nodes)
    v = v / (h * total(v ** params.p_star)) ** (1.0 / params.p_star)
    f, num, den = _rayleigh_values(v, k, kappa, h, params)
    start = f
    step = config.step0
    converged = False
    it = 0
    for it in range(1, config.max_iters + 1):
        g = _rayleigh_gradient(v, k, kappa, h, params, num, den)
        d = -apply_metric_inverse(grid, params, g)
        slope = dot(g, d)
        if math.sqrt(max(-slope, 0.0)) <= config.grad_tol * f:
            converged = True
            break
        alpha = step
        accepted = False
        while alpha > 1e-20:
            trial = v + alpha * d
            ft, nt, dt = _rayleigh_values(trial, k, kappa, h, params)
            if ft <= f + config.armijo_c * alpha * slope:
                accepted = True
                break
            alpha *= config.shrink
        if not accepted:
            # no representable decrease left: stationary up to rounding
            converged = math.sqrt(max(-slope, 0.0)) <= 1e3 * config.grad_tol * f
            break
        scale = dt ** (1.0 / params.p_star)
        v = trial / scale
        f, num, den = _rayleigh_values(v, k, kappa, h, params)
        step = min(2.0 * alpha, 1e6)
    return SobolevEstimate(f, GridFunction(grid, v), config.margin, converged, it, start)

"""Two-branch minimization of the energy on the Nehari set.

A direction v is mapped onto the Nehari set by the root of psi selected by
the branch (t1 for Plus, t2 for Minus). Because phi'(1) = 0 there, the
gradient of v -> J(t(v) v) at a Nehari point is simply the energy gradient,
so descent needs no derivative of the root map.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from threadpoolctl import threadpool_limits

from . import functionals as fn
from .domain import Grid, GridFunction, ProblemParams, WeightPair
from .fiber import FiberError, NehariClass, RootCase, fiber_roots, nehari_classify
from .functionals import FunctionalTriple
from .summation import dot, total
from .thresholds import ThresholdReport, blowup_constant, threshold_report


class Branch(str, enum.Enum):
    PLUS = "Plus"
    MINUS = "Minus"


class ProjectionError(ValueError):
    """The ray through a direction has no point on the requested branch."""


class OutOfRangeError(ValueError):
    """lambda is not below the computed threshold."""


class NoAdmissibleStartError(ValueError):
    """No initial direction satisfies the branch requirements."""


@dataclass(frozen=True)
class SolveConfig:
    branch: Branch = Branch.PLUS
    max_iters: int = 500
    step0: float = 1.0
    shrink: float = 0.5
    armijo_c: float = 1e-4
    grad_tol: float = 1e-8
    seed: int = 42
    num_starts: int = 4

    def __post_init__(self):
        object.__setattr__(self, "branch", Branch(self.branch))
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink must lie in (0, 1)")
        if not self.grad_tol > 0.0:
            raise ValueError("grad_tol must be positive")
        if not 0.0 < self.armijo_c < 1.0:
            raise ValueError("armijo_c must lie in (0, 1)")
        if self.step0 <= 0.0 or self.num_starts < 1:
            raise ValueError("step0 must be positive and num_starts >= 1")

    def as_dict(self) -> dict:
        return {"branch": self.branch.value, "max_iters": self.max_iters, "step0": self.step0,
                "shrink": self.shrink, "armijo_c": self.armijo_c, "grad_tol": self.grad_tol,
                "seed": self.seed, "num_starts": self.num_starts}


class _Model:
    """Arrays and parameters shared by every evaluation of one problem."""

    def __init__(self, weights: WeightPair, params: ProblemParams):
        self.grid = weights.grid
        self.params = params
        self.lam = params.require_lambda()
        self.k, self.kappa = fn.kernel(self.grid, params)
        self.h = self.grid.h
        self.a = weights.a.values
        self.b = weights.b.values

    def triple(self, v) -> FunctionalTriple:
        return fn._triple_values(v, self.a, self.b, self.k, self.kappa, self.h, self.params)

    def gradient(self, v):
        return fn._gradient_values(v, self.a, self.b, self.k, self.kappa, self.h,
                                   self.params, 1.0, self.lam)

    def energy(self, triple: FunctionalTriple) -> float:
        return fn.energy_from_triple(triple, self.params)

    def project(self, v, branch: Branch):
        """Return (t*v, triple of t*v) on the requested branch."""
        tr = self.triple(v)
        if not tr.a_integral > 0.0:
            raise ProjectionError("A(w) = 0: the ray never meets the Nehari set")
        if branch is Branch.MINUS and not tr.b_integral > 0.0:
            raise ProjectionError("B(w) <= 0: the ray has no point in N^-")
        try:
            rep = fiber_roots(tr, self.params, self.lam)
        except FiberError as exc:
            raise ProjectionError(str(exc)) from None
        t = rep.t1 if branch is Branch.PLUS else rep.t2
        w = t * v
        return w, self.triple(w)


def project_to_nehari(w: GridFunction, weights: WeightPair, params: ProblemParams,
                      branch: Branch) -> GridFunction:
    model = _Model(weights, params)
    v, _ = model.project(w.values, Branch(branch))
    return GridFunction(w.grid, v)


def ray_parameter(w: GridFunction, weights: WeightPair, params: ProblemParams, branch: Branch) -> float:
    """The t with t*w on the branch."""
    tr = fn.functional_triple(w, weights, params)
    rep = fiber_roots(tr, params, params.require_lambda())
    if rep.case is RootCase.NO_POSITIVE_PART:
        raise ProjectionError("A(w) = 0")
    if Branch(branch) is Branch.PLUS:
        return rep.t1
    if rep.t2 is None:
        raise ProjectionError("B(w) <= 0: the ray has no point in N^-")
    return rep.t2


class Residual(NamedTuple):
    value: float
    floor_nodes: int


def floor_count(v) -> int:
    """Nodes at or below ten times the singularity floor."""
    return int(np.count_nonzero(v <= 10.0 * fn.singularity_floor(v)))


def residual_norm(w: GridFunction, weights: WeightPair, params: ProblemParams) -> Residual:
    """Euclidean norm of the full discrete gradient divided by ||w||^(p-1)."""
    nodes = floor_count(w.values)
    n = fn.seminorm_p(w, params)
    if n == 0.0:
        return Residual(math.nan, nodes)
    g = fn.first_variation(w, weights, params).values
    return Residual(math.sqrt(dot(g, g)) / n ** ((params.p - 1) / params.p), nodes)


def tangential_residual(v, g, seminorm: float, p: float) -> float:
    gt = g - (dot(g, v) / dot(v, v)) * v
    return math.sqrt(dot(gt, gt)) / seminorm ** ((p - 1) / p)


@dataclass(frozen=True)
class StartResult:
    index: int
    energy: float
    converged: bool
    iterations: int
    residual: float


@dataclass(frozen=True)
class SolutionReport:
    """Best multi-start result on one branch.

    ``branch_margin`` is (p-1+q) A - lambda (r-p+1) B, positive on N^+ and
    negative on N^-.
    """
    w: GridFunction
    branch: Branch
    energy: float
    norm: float
    triple: FunctionalTriple
    classification: NehariClass
    residual: float
    full_residual: float
    iterations: int
    converged: bool
    floor_violations: int
    start_index: int
    sobolev_violations: int
    min_observed_energy: float
    observed_points: int
    branch_margin: float = math.nan
    energy_trace: tuple = field(repr=False, default=())
    starts: tuple = field(repr=False, default=())
    config: SolveConfig | None = None

    def as_dict(self) -> dict:
        return {
            "branch": self.branch.value,
            "energy": self.energy,
            "norm": self.norm,
            "triple": self.triple.as_dict(),
            "classification": self.classification.value,
            "residual": self.residual,
            "full_residual": self.full_residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "floor_violations": self.floor_violations,
            "min_value": float(np.min(self.w.values)),
            "start_index": self.start_index,
            "sobolev_violations": self.sobolev_violations,
            "min_observed_energy": self.min_observed_energy,
            "observed_points": self.observed_points,
            "branch_margin": self.branch_margin,
            "starts": [s.__dict__ for s in self.starts],
        }


def random_direction(rng: np.random.Generator, x: np.ndarray, n_bumps: int = 3) -> np.ndarray:
    """Positive mixture of Gaussian bumps with random centers, widths and heights."""
    v = np.zeros_like(x)
    for _ in range(n_bumps):
        c = rng.uniform(-0.9, 0.9)
        sigma = rng.uniform(0.08, 0.6)
        amp = rng.uniform(0.5, 1.5)
        v += amp * np.exp(-(((x - c) / sigma) ** 2))
    return v


def initial_directions(model: _Model, branch: Branch, seed: int, count: int,
                       max_attempts: int = 1000) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    x = model.grid.nodes
    out = []
    for _ in range(count):
        for _attempt in range(max_attempts):
            v = random_direction(rng, x)
            if branch is Branch.PLUS:
                break
            if model.triple(v).b_integral > 0.0:
                break
        else:
            raise NoAdmissibleStartError(
                f"no direction with B > 0 after {max_attempts} attempts; "
                "the Minus branch needs b+ to be nontrivial")
        out.append(v)
    return out


@dataclass
class _Monitor:
    s_used: float | None
    energies: list = field(default_factory=list)
    sobolev_violations: int = 0

    def observe(self, v, triple: FunctionalTriple, energy: float, params: ProblemParams, h: float):
        self.energies.append(energy)
        if self.s_used is not None:
            crit = (h * total(np.abs(v) ** params.p_star)) ** (params.p / params.p_star)
            if crit * self.s_used > triple.seminorm_p * (1.0 + 1e-12):
                self.sobolev_violations += 1


def _descend(model: _Model, v0: np.ndarray, config: SolveConfig, monitor: _Monitor):
    branch = config.branch
    params = model.params
    p = params.p
    v, tr = model.project(v0, branch)
    f = model.energy(tr)
    monitor.observe(v, tr, f, params, model.h)
    trace = [f]
    step = config.step0
    converged = False
    res = math.inf
    it = 0
    for it in range(config.max_iters + 1):
        g = model.gradient(v)
        gt = g - (dot(g, v) / dot(v, v)) * v
        res = math.sqrt(dot(gt, gt)) / tr.seminorm_p ** ((p - 1) / p)
        if res <= config.grad_tol:
            converged = True
            break
        if it == config.max_iters:
            break
        d = -fn.apply_metric_inverse(model.grid, params, gt)
        slope = dot(gt, d)
        alpha = step
        accepted = False
        while alpha > 1e-16 * config.step0:
            try:
                vt, trt = model.project(v + alpha * d, branch)
            except ProjectionError:
                alpha *= config.shrink
                continue
            ft = model.energy(trt)
            monitor.observe(vt, trt, ft, params, model.h)
            if ft <= f + config.armijo_c * alpha * slope:
                accepted = True
                break
            alpha *= config.shrink
        if not accepted:
            break
        v, tr, f = vt, trt, ft
        trace.append(f)
        step = min(alpha / config.shrink, 1e4 * config.step0)
    return v, tr, f, res, converged, it, trace


def minimize_branch(weights: WeightPair, params: ProblemParams, config: SolveConfig,
                    thresholds: ThresholdReport, threads: int = 1) -> SolutionReport:
    """Multi-start descent of J over one Nehari branch.

    Starts are drawn from ``config.seed`` before any descent runs, so the
    outcome is independent of ``threads``. The lowest energy wins; ties
    within 1e-12 relative go to the lowest start index.
    """
    lam = params.require_lambda()
    if not lam < thresholds.lambda_star:
        raise OutOfRangeError(
            f"outside theorem range (lambda >= Lambda): lambda = {lam!r}, "
            f"Lambda = {thresholds.lambda_star!r}")
    model = _Model(weights, params)
    branch = config.branch
    with threadpool_limits(limits=1, user_api="blas"):
        starts = initial_directions(model, branch, config.seed, config.num_starts)
        monitors = [_Monitor(thresholds.s_used) for _ in starts]

        def run(k):
            return _descend(model, starts[k], config, monitors[k])

        if threads > 1 and len(starts) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(run, range(len(starts))))
        else:
            results = [run(k) for k in range(len(starts))]

        best = 0
        for k in range(1, len(results)):
            fk, fb = results[k][2], results[best][2]
            if fk < fb and not abs(fk - fb) <= 1e-12 * abs(fb):
                best = k
        v, tr, f, res, converged, it, trace = results[best]
        w = GridFunction(model.grid, v)
        full = residual_norm(w, weights, params)
    floor_nodes = floor_count(v)
    cls = nehari_classify(tr, params, lam)
    expected = NehariClass.PLUS if branch is Branch.PLUS else NehariClass.MINUS
    converged = converged and floor_nodes == 0 and cls is expected
    all_energies = [e for m in monitors for e in m.energies]
    margin = ((params.p - 1 + params.q) * tr.a_integral
              - lam * (params.r - params.p + 1) * tr.b_integral)
    return SolutionReport(
        w=w,
        branch=branch,
        energy=f,
        norm=tr.seminorm_p ** (1.0 / params.p),
        triple=tr,
        classification=cls,
        residual=res,
        full_residual=full.value,
        iterations=it,
        converged=converged,
        floor_violations=floor_nodes,
        start_index=best,
        sobolev_violations=sum(m.sobolev_violations for m in monitors),
        min_observed_energy=min(all_energies),
        observed_points=len(all_energies),
        branch_margin=margin,
        energy_trace=tuple(trace),
        starts=tuple(StartResult(k, r[2], r[4], r[5], r[3]) for k, r in enumerate(results)),
        config=config,
    )


@dataclass(frozen=True)
class GapReport:
    norm_plus: float
    norm_minus: float
    a_lambda: float
    a_zero: float
    ordering_ok: bool
    energies: tuple[float, float]
    both_converged: bool

    def as_dict(self) -> dict:
        return {"norm_plus": self.norm_plus, "norm_minus": self.norm_minus,
                "a_lambda": self.a_lambda, "a_zero": self.a_zero,
                "ordering_ok": self.ordering_ok, "energy_plus": self.energies[0],
                "energy_minus": self.energies[1], "both_converged": self.both_converged}


def verify_solution_pair(plus: SolutionReport, minus: SolutionReport,
                         thresholds: ThresholdReport) -> GapReport:
    """Check ||W|| > A_lambda > A_0 > ||w|| on the computed pair."""
    n_plus, n_minus = plus.norm, minus.norm
    a_lam, a_zero = thresholds.a_lambda, thresholds.a_zero
    ok = n_minus > a_lam and a_lam > a_zero and a_zero > n_plus
    return GapReport(n_plus, n_minus, a_lam, a_zero, bool(ok),
                     (plus.energy, minus.energy), plus.converged and minus.converged)


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    r: float
    lam: float
    lambda_star: float
    norm_w: float
    c_eps: float
    bound: float
    satisfied: bool
    converged: bool
    residual: float

    def as_dict(self) -> dict:
        return {"epsilon": self.epsilon, "r": self.r, "lambda": self.lam,
                "lambda_star": self.lambda_star, "norm_W": self.norm_w, "C_eps": self.c_eps,
                "bound": self.bound, "satisfied": self.satisfied, "converged": self.converged,
                "residual": self.residual}


def blowup_sweep(epsilons, theta: float, weights: WeightPair, base_params: ProblemParams,
                 config: SolveConfig, s_value: float, margin: float,
                 threads: int = 1) -> list[SweepRow]:
    """Minus-branch norms against C_eps (Lambda/lambda)^(1/eps), lambda = theta*Lambda.

    Each row depends only on its own epsilon.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    minus_cfg = SolveConfig(**{**config.__dict__, "branch": Branch.MINUS})
    rows = []
    for eps in epsilons:
        eps = float(eps)
        params = base_params.with_r(base_params.p - 1 + eps)
        norm_a, norm_b = fn.weight_norms(weights, params)
        probe = threshold_report(params, norm_a, norm_b, s_value, margin)
        lam = theta * probe.lambda_star
        params = params.with_lambda(lam)
        th = threshold_report(params, norm_a, norm_b, s_value, margin, lam)
        sol = minimize_branch(weights, params, minus_cfg, th, threads=threads)
        c_eps = blowup_constant(eps, params, norm_a, th.s_used)
        bound = c_eps * (1.0 / theta) ** (1.0 / eps)
        rows.append(SweepRow(eps, params.r, lam, th.lambda_star, sol.norm, c_eps, bound,
                             bool(sol.norm > bound), sol.converged, sol.residual))
    return rows


def bound_growth_slope(rows, log_correction: bool = False) -> float:
    """Least-squares slope of log(bound) against 1/epsilon.

    With ``log_correction`` a log(1/epsilon) column is added to the design so
    that the slope is taken net of the polynomial growth of C_eps.
    """
    inv = np.array([1.0 / row.epsilon for row in rows])
    y = np.log([row.bound for row in rows])
    cols = [inv, np.ones_like(inv)]
    if log_correction:
        cols.insert(1, np.log(inv))
    design = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return float(coef[0])

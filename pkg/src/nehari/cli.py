"""Command line front end.

Subcommands: thresholds, fiber, solve, sweep-blowup, sobolev.
Exit codes: 0 success, 2 config error, 3 outside the theorem range,
4 non-convergence.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from . import config as cfg
from . import functionals as fn
from .domain import GridFunction, WeightSpecError, build_grid, load_weight, load_weights, write_grid_function
from .fiber import FiberError, RootCase, fiber_roots, phi, psi
from .serialize import write_csv, write_json
from .solver import (Branch, NoAdmissibleStartError, OutOfRangeError, SolveConfig,
                     blowup_sweep, bound_growth_slope, minimize_branch, verify_solution_pair)
from .thresholds import threshold_report

log = logging.getLogger("nehari")

EXIT_OK, EXIT_CONFIG, EXIT_RANGE, EXIT_NONCONV = 0, 2, 3, 4


class _Setup:
    """Objects every subcommand needs: grid, weights, S and the norms."""

    def __init__(self, conf: cfg.RunConfig, need_sobolev: bool = True):
        self.conf = conf
        self.grid = build_grid(conf.num_nodes)
        try:
            self.weights = load_weights(conf.weight_a, conf.weight_b, self.grid, conf.base_dir)
        except (WeightSpecError, OSError) as exc:
            raise cfg.ConfigError(f"weights: {exc}") from None
        self.sobolev = None
        if conf.sobolev_override is not None:
            self.s_value = conf.sobolev_override
        elif need_sobolev:
            log.info("estimating the discrete Sobolev constant (N = %d)", conf.num_nodes)
            self.sobolev = fn.sobolev_estimate(self.grid, conf.params, conf.sobolev)
            self.s_value = self.sobolev.s_value
        self.margin = conf.sobolev.margin

    def thresholds(self, params, lam=None):
        norm_a, norm_b = fn.weight_norms(self.weights, params)
        return threshold_report(params, norm_a, norm_b, self.s_value, self.margin, lam)

    def resolve_lambda(self):
        conf = self.conf
        if conf.lambda_policy == "absolute":
            lam = conf.lambda_value
        else:
            lam = conf.lambda_value * self.thresholds(conf.params).lambda_star
        params = conf.params.with_lambda(lam)
        return params, self.thresholds(params, lam)

    def sobolev_dict(self):
        if self.sobolev is None:
            return {"s_value": self.s_value, "source": "override", "margin": self.margin}
        return {**self.sobolev.as_dict(), "source": "estimate"}


def _envelope(conf: cfg.RunConfig, command: str, body: dict) -> dict:
    return {"command": command, "version": __version__, "config": conf.resolved(), **body}


def cmd_thresholds(conf: cfg.RunConfig, out: Path, threads: int) -> int:
    setup = _Setup(conf)
    params, th = setup.resolve_lambda()
    write_json(out / "thresholds.json", _envelope(conf, "thresholds", {
        "params": params.as_dict(),
        "sobolev": setup.sobolev_dict(),
        "thresholds": th.as_dict(),
        "in_theorem_range": bool(params.lam < th.lambda_star),
    }))
    return EXIT_OK


def _curve_ts(rep, count: int) -> np.ndarray:
    special = [t for t in (rep.t1, rep.t_max, rep.t2) if t is not None]
    lo, hi = min(special) / 100.0, max(special) * 100.0
    ts = np.geomspace(lo, hi, count)
    return np.unique(np.concatenate([ts, special]))


def cmd_fiber(conf: cfg.RunConfig, out: Path, threads: int, direction: str | None = None) -> int:
    setup = _Setup(conf)
    params, th = setup.resolve_lambda()
    if not params.lam < th.lambda_star:
        raise OutOfRangeError(f"outside theorem range (lambda >= Lambda): lambda = {params.lam!r}, "
                              f"Lambda = {th.lambda_star!r}")
    spec = direction or conf.direction
    try:
        w = load_weight(spec, setup.grid, conf.base_dir)
    except (WeightSpecError, OSError) as exc:
        raise cfg.ConfigError(f"fiber.direction: {exc}") from None
    triple = fn.functional_triple(w, setup.weights, params)
    rep = fiber_roots(triple, params, params.lam)
    if rep.case is RootCase.NO_POSITIVE_PART:
        raise cfg.ConfigError("fiber.direction has A(w) = 0 (w+ vanishes); the fiber analysis needs A > 0")
    rows = []
    for t in _curve_ts(rep, conf.curve_points):
        val, d1, d2 = phi(triple, params, params.lam, t)
        rows.append((t, val, d1, d2, psi(triple, params, params.lam, t)))
    write_csv(out / "fiber_curve.csv", ("t", "phi", "dphi", "d2phi", "psi"), rows)
    write_json(out / "fiber.json", _envelope(conf, "fiber", {
        "params": params.as_dict(),
        "direction": spec,
        "thresholds": th.as_dict(),
        "fiber": rep.as_dict(),
    }))
    return EXIT_OK


def cmd_solve(conf: cfg.RunConfig, out: Path, threads: int) -> int:
    setup = _Setup(conf)
    params, th = setup.resolve_lambda()
    reports = {}
    for branch in (Branch.PLUS, Branch.MINUS):
        scfg = SolveConfig(**{**conf.solver.__dict__, "branch": branch})
        log.info("solving %s branch", branch.value)
        reports[branch] = minimize_branch(setup.weights, params, scfg, th, threads=threads)
    plus, minus = reports[Branch.PLUS], reports[Branch.MINUS]
    gap = verify_solution_pair(plus, minus, th)
    write_grid_function(plus.w, out / "solution_plus.csv")
    write_grid_function(minus.w, out / "solution_minus.csv")
    write_json(out / "gap.json", _envelope(conf, "solve", {
        "params": params.as_dict(),
        "sobolev": setup.sobolev_dict(),
        "thresholds": th.as_dict(),
        "plus": plus.as_dict(),
        "minus": minus.as_dict(),
        "gap": gap.as_dict(),
    }))
    if not (plus.converged and minus.converged):
        log.error("non-convergence: plus=%s minus=%s", plus.converged, minus.converged)
        return EXIT_NONCONV
    return EXIT_OK


def cmd_sweep_blowup(conf: cfg.RunConfig, out: Path, threads: int) -> int:
    setup = _Setup(conf)
    rows = blowup_sweep(conf.epsilons, conf.theta, setup.weights, conf.params, conf.solver,
                        setup.s_value, setup.margin, threads=threads)
    header = ("epsilon", "lambda", "norm_W", "C_eps", "bound", "satisfied", "converged")
    write_csv(out / "sweep_blowup.csv", header,
              [(r.epsilon, r.lam, r.norm_w, r.c_eps, r.bound, r.satisfied, r.converged)
               for r in rows])
    body = {"sobolev": setup.sobolev_dict(), "theta": conf.theta,
            "rows": [r.as_dict() for r in rows]}
    if len(rows) >= 2:
        body["log_bound_slope"] = bound_growth_slope(rows)
        body["log_bound_slope_net_of_log_term"] = (
            bound_growth_slope(rows, log_correction=True) if len(rows) >= 3 else None)
        body["reference_slope"] = math.log(1.0 / conf.theta)
    write_json(out / "sweep_blowup.json", _envelope(conf, "sweep-blowup", body))
    if not all(r.converged for r in rows):
        return EXIT_NONCONV
    return EXIT_OK


def cmd_sobolev(conf: cfg.RunConfig, out: Path, threads: int) -> int:
    grid = build_grid(conf.num_nodes)
    est = fn.sobolev_estimate(grid, conf.params, conf.sobolev)
    write_grid_function(est.minimizer, out / "sobolev_minimizer.csv")
    write_json(out / "sobolev.json", _envelope(conf, "sobolev", {
        "params": conf.params.as_dict(),
        "sobolev": est.as_dict(),
    }))
    return EXIT_OK if est.converged else EXIT_NONCONV


_COMMANDS = {
    "thresholds": cmd_thresholds,
    "fiber": cmd_fiber,
    "solve": cmd_solve,
    "sweep-blowup": cmd_sweep_blowup,
    "sobolev": cmd_sobolev,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nehari", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file (section.key = value lines)")
    common.add_argument("--out", help="output directory (overrides output.dir)")
    common.add_argument("--seed", type=int, help="override solver.seed")
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads for multi-starts (speed only)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key; repeatable")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "fiber":
            p.add_argument("--direction", help="direction spec, e.g. 'gaussian 0 0.4'")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"solver.seed={args.seed}")
    if args.out is not None:
        overrides.append(f"output.dir={args.out}")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        conf = cfg.load(args.config, overrides)
        out = conf.out_dir
        out.mkdir(parents=True, exist_ok=True)
        kwargs = {"direction": args.direction} if args.command == "fiber" else {}
        with threadpool_limits(limits=1, user_api="blas"):
            return _COMMANDS[args.command](conf, out, args.threads, **kwargs)
    except cfg.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OutOfRangeError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_RANGE
    except FiberError as exc:
        print(f"fiber analysis failed: {exc}", file=sys.stderr)
        return EXIT_RANGE
    except NoAdmissibleStartError as exc:
        print(f"no admissible start: {exc}", file=sys.stderr)
        return EXIT_NONCONV


if __name__ == "__main__":
    sys.exit(main())

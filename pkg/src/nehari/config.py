"""Run configuration: flat ``section.key = value`` text files.

Lines starting with ``#`` are comments. Every key has a default equal to the
reference setup (s = 0.4, p = 2, q = 0.5, r = 3, a = 1, b = cos(pi x),
N = 255, lambda = Lambda/2, seed 42), so an empty file is a valid config.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .domain import ParamError, ProblemParams
from .functionals import SobolevConfig
from .solver import SolveConfig


class ConfigError(ValueError):
    """Malformed or inadmissible configuration."""


_DEFAULTS = {
    "params.s": "0.4",
    "params.p": "2",
    "params.q": "0.5",
    "params.r": "3",
    "grid.num_nodes": "255",
    "weights.a": "constant 1",
    "weights.b": "cos 1",
    "lambda.policy": "fraction",
    "lambda.value": "0.5",
    "solver.max_iters": "500",
    "solver.step0": "1.0",
    "solver.shrink": "0.5",
    "solver.armijo_c": "1e-4",
    "solver.grad_tol": "1e-8",
    "solver.seed": "42",
    "solver.num_starts": "4",
    "sobolev.override": "",
    "sobolev.margin": "1e-3",
    "sobolev.max_iters": "20000",
    "sobolev.grad_tol": "1e-10",
    "sweep.epsilons": "0.5, 0.25, 0.125",
    "sweep.theta": "0.5",
    "fiber.direction": "gaussian 0 0.4",
    "output.dir": "out",
    "output.curve_points": "1000",
}


def parse_text(text: str) -> dict[str, str]:
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = value
    return entries


def _num(raw: dict, key: str, kind=float):
    try:
        value = kind(raw[key])
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw[key]!r} as {kind.__name__}") from None
    return value


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    params: ProblemParams
    num_nodes: int
    weight_a: str
    weight_b: str
    lambda_policy: str
    lambda_value: float
    solver: SolveConfig
    sobolev: SobolevConfig
    sobolev_override: float | None
    epsilons: tuple
    theta: float
    direction: str
    out_dir: Path
    curve_points: int
    base_dir: Path

    def resolved(self) -> dict:
        """Effective values of every key except ``output.dir``, for embedding in reports.

        The output location is left out so that reruns into different
        directories produce identical files.
        """
        return {k: v for k, v in sorted(self.raw.items()) if k != "output.dir"}


def build(entries: dict[str, str], base_dir=".") -> RunConfig:
    raw = {**_DEFAULTS, **entries}
    try:
        params = ProblemParams(_num(raw, "params.s"), _num(raw, "params.p"),
                               _num(raw, "params.q"), _num(raw, "params.r"))
    except ParamError as exc:
        raise ConfigError(str(exc)) from None

    policy = raw["lambda.policy"].strip().lower()
    if policy not in ("fraction", "absolute"):
        raise ConfigError("lambda.policy must be 'fraction' or 'absolute'")
    lam_value = _num(raw, "lambda.value")
    if not lam_value > 0.0:
        raise ConfigError("constraint lambda > 0 violated (lambda.value must be positive)")

    try:
        solver = SolveConfig(
            max_iters=_num(raw, "solver.max_iters", int),
            step0=_num(raw, "solver.step0"),
            shrink=_num(raw, "solver.shrink"),
            armijo_c=_num(raw, "solver.armijo_c"),
            grad_tol=_num(raw, "solver.grad_tol"),
            seed=_num(raw, "solver.seed", int),
            num_starts=_num(raw, "solver.num_starts", int),
        )
        sobolev = SobolevConfig(
            max_iters=_num(raw, "sobolev.max_iters", int),
            grad_tol=_num(raw, "sobolev.grad_tol"),
            margin=_num(raw, "sobolev.margin"),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None

    override = raw["sobolev.override"].strip()
    s_override = None
    if override:
        s_override = _num(raw, "sobolev.override")
        if not s_override > 0.0:
            raise ConfigError("sobolev.override must be positive")

    try:
        epsilons = tuple(float(t) for t in raw["sweep.epsilons"].replace(",", " ").split())
    except ValueError:
        raise ConfigError("sweep.epsilons must be a list of numbers") from None
    if not epsilons:
        raise ConfigError("sweep.epsilons is empty")
    for eps in epsilons:
        if not 0.0 < eps < params.p_star - params.p:
            raise ConfigError(
                f"sweep.epsilons: {eps} gives r = p - 1 + eps outside (p - 1, p_s^* - 1)")
    theta = _num(raw, "sweep.theta")
    if not 0.0 < theta < 1.0:
        raise ConfigError("sweep.theta must lie in (0, 1)")

    num_nodes = _num(raw, "grid.num_nodes", int)
    if num_nodes < 3:
        raise ConfigError("grid.num_nodes must be >= 3")
    curve_points = _num(raw, "output.curve_points", int)
    if curve_points < 2:
        raise ConfigError("output.curve_points must be >= 2")

    return RunConfig(
        raw=raw,
        params=params,
        num_nodes=num_nodes,
        weight_a=raw["weights.a"],
        weight_b=raw["weights.b"],
        lambda_policy=policy,
        lambda_value=lam_value,
        solver=solver,
        sobolev=sobolev,
        sobolev_override=s_override,
        epsilons=epsilons,
        theta=theta,
        direction=raw["fiber.direction"],
        out_dir=Path(raw["output.dir"]),
        curve_points=curve_points,
        base_dir=Path(base_dir),
    )


def load(path=None, overrides=()) -> RunConfig:
    """Read a config file (optional) and apply ``key=value`` overrides."""
    entries = {}
    base = Path(".")
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        entries = parse_text(text)
        base = path.parent
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = (part.strip() for part in item.split("=", 1))
        if key not in _DEFAULTS:
            raise ConfigError(f"unknown key {key!r}")
        entries[key] = value
    return build(entries, base)

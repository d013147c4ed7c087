"""Grid, grid functions and weight ingestion on the reference domain (-1, 1)."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .summation import total


class ParamError(ValueError):
    """A problem parameter violates one of the admissibility constraints."""


class WeightSpecError(ValueError):
    """A weight specification cannot be parsed or sampled."""


@dataclass(frozen=True)
class ProblemParams:
    """Exponents and coefficient of the 1-D problem.

    ``lam`` may be left as ``None`` while the threshold is still unknown
    (for example when lambda is given as a fraction of the threshold).
    """

    s: float
    p: float
    q: float
    r: float
    lam: float | None = None

    def __post_init__(self):
        for name in ("s", "p", "q", "r"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ParamError(f"{name} must be finite (got {v})")
        s, p, q, r = self.s, self.p, self.q, self.r
        if not 0.0 < s < 1.0:
            raise ParamError(f"constraint 0 < s < 1 violated (s = {s})")
        if not p > 1.0:
            raise ParamError(f"constraint p > 1 violated (p = {p})")
        if not p * s < 1.0:
            raise ParamError(f"constraint n = 1 > p*s violated (p*s = {p * s})")
        if not 0.0 < q < 1.0:
            raise ParamError(f"constraint 0 < q < 1 violated (q = {q})")
        if not q < p - 1.0:
            raise ParamError(f"constraint q < p - 1 violated (q = {q}, p - 1 = {p - 1})")
        if not p - 1.0 < r:
            raise ParamError(f"constraint p - 1 < r violated (r = {r}, p - 1 = {p - 1})")
        if not r < self.p_star - 1.0:
            raise ParamError(
                f"constraint r < p_s^* - 1 violated: r >= p_s^* - 1 "
                f"(r = {r}, p_s^* - 1 = {self.p_star - 1})"
            )
        if self.lam is not None and not (math.isfinite(self.lam) and self.lam > 0.0):
            raise ParamError(f"constraint lambda > 0 violated (lambda = {self.lam})")

    @property
    def ps(self) -> float:
        return self.p * self.s

    @property
    def p_star(self) -> float:
        """Fractional critical exponent np/(n - ps) with n = 1."""
        return self.p / (1.0 - self.p * self.s)

    def with_lambda(self, lam: float) -> ProblemParams:
        return ProblemParams(self.s, self.p, self.q, self.r, lam)

    def with_r(self, r: float) -> ProblemParams:
        return ProblemParams(self.s, self.p, self.q, r, self.lam)

    def require_lambda(self) -> float:
        if self.lam is None:
            raise ParamError("lambda has not been set")
        return self.lam

    def as_dict(self) -> dict:
        return {"n": 1, "s": self.s, "p": self.p, "q": self.q, "r": self.r,
                "lambda": self.lam, "p_star": self.p_star}


@dataclass(frozen=True)
class Grid:
    """Uniform interior grid x_i = -1 + i*h, i = 1..N, with h = 2/(N+1)."""

    num_nodes: int

    def __post_init__(self):
        if int(self.num_nodes) != self.num_nodes or self.num_nodes < 3:
            raise ValueError(f"num_nodes must be an integer >= 3 (got {self.num_nodes})")

    @property
    def h(self) -> float:
        return 2.0 / (self.num_nodes + 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        x = -1.0 + self.h * np.arange(1, self.num_nodes + 1)
        x.flags.writeable = False
        return x

    @cached_property
    def quad_weights(self) -> np.ndarray:
        wq = np.full(self.num_nodes, self.h)
        wq.flags.writeable = False
        return wq

    def is_symmetric(self) -> bool:
        return bool(np.all(self.nodes == -self.nodes[::-1]))


def build_grid(num_nodes: int) -> Grid:
    return Grid(num_nodes)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Nodal values on a grid; the function is zero on R \\ (-1, 1)."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.num_nodes,):
            raise ValueError(f"expected {self.grid.num_nodes} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __mul__(self, c: float) -> GridFunction:
        return GridFunction(self.grid, c * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> GridFunction:
        return GridFunction(self.grid, -self.values)

    def __len__(self) -> int:
        return self.grid.num_nodes

    def reflected(self) -> GridFunction:
        """w(x) -> w(-x); only meaningful on a symmetric grid."""
        return GridFunction(self.grid, self.values[::-1])

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True)
class WeightPair:
    """Coefficient a of the singular term and sign-changing weight b."""

    a: GridFunction
    b: GridFunction

    def __post_init__(self):
        if self.a.grid != self.b.grid:
            raise ValueError("weights a and b live on different grids")
        if not np.all(self.a.values > 0.0):
            raise WeightSpecError("weight a must be strictly positive at every node")
        if not np.any(self.b.values > 0.0):
            raise WeightSpecError("weight b must be positive somewhere (b+ not identically 0)")

    @property
    def grid(self) -> Grid:
        return self.a.grid

    @classmethod
    def unchecked(cls, a: GridFunction, b: GridFunction) -> "WeightPair":
        """Build a pair without the b+ check, e.g. to exercise an infeasible Minus branch."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "a", a)
        object.__setattr__(obj, "b", b)
        return obj


def positive_part(w: GridFunction) -> GridFunction:
    return GridFunction(w.grid, np.maximum(w.values, 0.0))


def lp_weighted_sum(f: GridFunction, exponent: float) -> float:
    """Discrete integral sum_i h * f_i**exponent."""
    if not exponent > 0.0:
        raise ValueError(f"exponent must be positive (got {exponent})")
    v = f.values
    if float(exponent).is_integer():
        powered = v ** int(exponent)
    else:
        if np.any(v < 0.0):
            raise ValueError("negative base with non-integer exponent")
        powered = v ** exponent
    return total(f.grid.h * powered)


# ---------------------------------------------------------------------------
# weight specifications


def _floats(tokens, n, spec):
    if len(tokens) != n:
        raise WeightSpecError(f"weight spec {spec!r} expects {n} numeric argument(s)")
    try:
        return [float(t) for t in tokens]
    except ValueError as exc:
        raise WeightSpecError(f"weight spec {spec!r}: {exc}") from None


def read_xy_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Two-column ``x,value`` file, header optional."""
    xs, ys = [], []
    with open(path, newline="") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row or not "".join(row).strip():
                continue
            if len(row) < 2:
                raise WeightSpecError(f"{path}: row {k + 1} has fewer than two columns")
            try:
                x, y = float(row[0]), float(row[1])
            except ValueError:
                if k == 0 and not xs:
                    continue  # header
                raise WeightSpecError(f"{path}: row {k + 1} is not numeric") from None
            xs.append(x)
            ys.append(y)
    return np.array(xs), np.array(ys)


def load_weight(spec: str, grid: Grid, base_dir=None) -> GridFunction:
    """Sample a weight specification at the grid nodes.

    Accepted forms::

        constant C
        cos K                  cos(K*pi*x)
        gaussian C SIGMA       exp(-((x - C)/SIGMA)**2)
        hat                    1 - |x|
        csv PATH               linear interpolation of an x,value table on [-1, 1]
    """
    tokens = spec.split()
    if not tokens:
        raise WeightSpecError("empty weight spec")
    kind, args = tokens[0].lower(), tokens[1:]
    x = grid.nodes
    if kind == "constant":
        (c,) = _floats(args, 1, spec)
        values = np.full(grid.num_nodes, c)
    elif kind == "cos":
        (k,) = _floats(args, 1, spec)
        values = np.cos(k * np.pi * x)
    elif kind == "gaussian":
        c, sigma = _floats(args, 2, spec)
        if sigma <= 0.0:
            raise WeightSpecError(f"weight spec {spec!r}: width must be positive")
        values = np.exp(-(((x - c) / sigma) ** 2))
    elif kind == "hat":
        _floats(args, 0, spec)
        values = 1.0 - np.abs(x)
    elif kind == "csv":
        if len(args) != 1:
            raise WeightSpecError(f"weight spec {spec!r} expects one path")
        path = Path(args[0])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        xs, ys = read_xy_csv(path)
        if xs.size < 2 or np.any(np.diff(xs) <= 0.0):
            raise WeightSpecError(f"{path}: x column must be strictly increasing with >= 2 rows")
        if xs[0] > -1.0 or xs[-1] < 1.0:
            raise WeightSpecError(f"{path}: table must cover [-1, 1] (spans [{xs[0]}, {xs[-1]}])")
        if not np.all(np.isfinite(ys)):
            raise WeightSpecError(f"{path}: non-finite values")
        values = np.interp(x, xs, ys)
    else:
        raise WeightSpecError(f"unknown weight spec {kind!r}")
    if not np.all(np.isfinite(values)):
        raise WeightSpecError(f"weight spec {spec!r} produced non-finite values")
    return GridFunction(grid, values)


def load_weights(a_spec: str, b_spec: str, grid: Grid, base_dir=None) -> WeightPair:
    return WeightPair(load_weight(a_spec, grid, base_dir), load_weight(b_spec, grid, base_dir))


def write_grid_function(w: GridFunction, path, column="w") -> None:
    """Write nodes and values as ``x,<column>`` with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        fh.write(f"x,{column}\n")
        for xi, vi in zip(w.grid.nodes, w.values):
            fh.write(f"{xi:.17g},{vi:.17g}\n")


def read_grid_function(path, grid: Grid) -> GridFunction:
    """Inverse of :func:`write_grid_function`; abscissas must match the grid."""
    xs, ys = read_xy_csv(path)
    if xs.shape != grid.nodes.shape or not np.allclose(xs, grid.nodes, rtol=0.0, atol=1e-12):
        raise ValueError(f"{path}: abscissas do not match a grid with N = {grid.num_nodes}")
    return GridFunction(grid, ys)

"""The manufactured benchmark problem and its exact solution.

    -eps Lap(u) + (2 - x) u_x + 1.5 u = f   on (0,1)^2,  u = 0 on the boundary

with u(x, y) = X(x) Y(y), where X carries an exponential layer at the outflow
x = 1 on top of a smooth part and Y carries characteristic layers at y = 0
and y = 1:

    X(x) = sin(pi x / 2) - (exp(-(1-x)/eps) - exp(-1/eps)) / (1 - exp(-1/eps))
    Y(y) = (1 - exp(-y/se)) (1 - exp(-(1-y)/se)) / (1 - exp(-1/se)),
    se = sqrt(eps).

Every evaluator works in the complement variables omx = 1-x, omy = 1-y where
cancellation would otherwise destroy the layers: with eps = 1e-16 the layer
width is far below the spacing of representable numbers near 1.0, so callers
that know exact complements (mesh grids store them) pass omx/omy explicitly.
Ratios like exp(-t)/eps are formed as exp(-t - ln eps) to keep intermediate
magnitudes representable, and the convection-diffusion combination
-eps X'' + b X' is evaluated in a grouped form whose layer part collapses to
-t exp(-t) / D, bounded by 1/e; recombining the separate derivative terms at
eps = 1e-16 would lose all significant digits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial

import numpy as np

from .assembly import Problem

_HALF_PI = 0.5 * math.pi


def _split(v, comp):
    """Coerce (value, complement) to float64, deriving 1 - v when missing."""
    v = np.asarray(v, dtype=np.float64)
    comp = 1.0 - v if comp is None else np.asarray(comp, dtype=np.float64)
    return v, comp


@dataclass(frozen=True)
class LayerFactors:
    """Multiplicative structure of u: smooth part and the two layer parts."""
    smooth: np.ndarray
    x_layer: np.ndarray
    y_layer: np.ndarray


@dataclass(frozen=True)
class ExactSolution:
    """Stable evaluators for the benchmark solution at one eps.

    All methods take scalars or arrays; the optional omx/omy arguments are
    exact complements 1-x and 1-y and default to computing them in floating
    point (fine away from the layers, lossy inside them).
    """
    eps: float

    def __post_init__(self):
        if not 0.0 < self.eps:
            raise ValueError(f"eps must be positive, got {self.eps}")

    @property
    def _d(self) -> float:
        # 1 - exp(-1/eps), the X layer normalizer
        return -math.expm1(-1.0 / self.eps)

    @property
    def _dy(self) -> float:
        # 1 - exp(-1/sqrt(eps)), the Y layer normalizer
        return -math.expm1(-1.0 / math.sqrt(self.eps))

    @property
    def _se(self) -> float:
        return math.sqrt(self.eps)

    def X(self, x, omx=None):
        x, omx = _split(x, omx)
        t = omx / self.eps
        return -np.expm1(-t) / self._d - 2.0 * np.sin(_HALF_PI * omx / 2.0) ** 2

    def dX(self, x, omx=None):
        x, omx = _split(x, omx)
        t = omx / self.eps
        # exp(-t)/eps formed in one exponential to avoid overflow of 1/eps
        layer = np.exp(-t - math.log(self.eps)) / self._d
        return _HALF_PI * np.sin(_HALF_PI * omx) - layer

    def d2X(self, x, omx=None):
        """Naive second derivative; magnitude ~ 1/eps^2 inside the layer."""
        x, omx = _split(x, omx)
        t = omx / self.eps
        layer = np.exp(-t - 2.0 * math.log(self.eps)) / self._d
        return -_HALF_PI ** 2 * np.cos(_HALF_PI * omx) - layer

    def conv_x(self, x, omx=None):
        """Grouped -eps X'' + (2 - x) X'; the layer part is -t exp(-t)/D."""
        x, omx = _split(x, omx)
        t = omx / self.eps
        smooth = (self.eps * _HALF_PI ** 2 * np.cos(_HALF_PI * omx)
                  + (1.0 + omx) * _HALF_PI * np.sin(_HALF_PI * omx))
        return smooth - t * np.exp(-t) / self._d

    def Y(self, y, omy=None):
        y, omy = _split(y, omy)
        se = self._se
        return np.expm1(-y / se) * np.expm1(-omy / se) / self._dy

    def dY(self, y, omy=None):
        y, omy = _split(y, omy)
        se = self._se
        return (np.exp(-y / se) - np.exp(-omy / se)) / (se * self._dy)

    def d2Y(self, y, omy=None):
        y, omy = _split(y, omy)
        se = self._se
        return -(np.exp(-y / se) + np.exp(-omy / se)) / (self.eps * self._dy)

    def neg_eps_d2Y(self, y, omy=None):
        """Grouped -eps Y''; stays O(1) for any eps."""
        y, omy = _split(y, omy)
        se = self._se
        return (np.exp(-y / se) + np.exp(-omy / se)) / self._dy

    def value(self, x, y, omx=None, omy=None):
        return self.X(x, omx) * self.Y(y, omy)

    def grad(self, x, y, omx=None, omy=None):
        """Returns (u_x, u_y) as broadcast arrays."""
        X, Y = self.X(x, omx), self.Y(y, omy)
        return self.dX(x, omx) * Y, X * self.dY(y, omy)

    def rhs(self, x, y, omx=None, omy=None):
        X, Y = self.X(x, omx), self.Y(y, omy)
        return (self.conv_x(x, omx) * Y + X * self.neg_eps_d2Y(y, omy)
                + 1.5 * X * Y)

    def factors(self, x, y, omx=None, omy=None) -> LayerFactors:
        x, omx = _split(x, omx)
        y, omy = _split(y, omy)
        se = self._se
        g = (np.exp(-omx / self.eps) - math.exp(-1.0 / self.eps)) / self._d
        return LayerFactors(
            smooth=np.cos(_HALF_PI * omx),
            x_layer=g,
            y_layer=np.exp(-y / se) + np.exp(-omy / se),
        )


def exact_u(x, y, eps: float, omx=None, omy=None):
    """Benchmark solution value; omx/omy are optional exact complements."""
    return ExactSolution(eps).value(x, y, omx=omx, omy=omy)


def exact_grad(x, y, eps: float, omx=None, omy=None):
    """Benchmark solution gradient (u_x, u_y)."""
    return ExactSolution(eps).grad(x, y, omx=omx, omy=omy)


def rhs_f(x, y, eps: float, omx=None, omy=None):
    """Right-hand side matching the benchmark coefficients."""
    return ExactSolution(eps).rhs(x, y, omx=omx, omy=omy)


def layer_factors(x, y, eps: float, omx=None, omy=None) -> LayerFactors:
    """Smooth / x-layer / y-layer multiplicative parts of the solution."""
    return ExactSolution(eps).factors(x, y, omx=omx, omy=omy)


def bench_convection(x, y, omx=None):
    """b(x, y) = 2 - x, formed as 1 + (1-x) when the complement is exact."""
    if omx is not None:
        return 1.0 + np.asarray(omx, dtype=np.float64)
    return 2.0 - np.asarray(x, dtype=np.float64)


def bench_convection_dx(x, y):
    return np.broadcast_to(-1.0, np.shape(x))


def bench_reaction(x, y):
    return np.broadcast_to(1.5, np.shape(x))


def _bench_rhs(eps, x, y, omx=None, omy=None):
    return ExactSolution(eps).rhs(x, y, omx=omx, omy=omy)


@dataclass(frozen=True)
class BenchmarkProblem(Problem):
    """The manufactured instance, carrying its exact solution."""
    exact: ExactSolution = None


def benchmark_problem(eps: float, mu0: float = 2.0) -> BenchmarkProblem:
    """Benchmark Problem instance; every field pickles for process fan-out.

    The data satisfy b = 2 - x >= 1 = beta and c - b_x/2 = 2, so any
    mu0 <= 2 is admissible.
    """
    if not 0.0 < mu0 <= 2.0:
        raise ValueError(f"mu0 must lie in (0, 2] for this problem, got {mu0}")
    return BenchmarkProblem(
        b=bench_convection,
        c=bench_reaction,
        f=partial(_bench_rhs, eps),
        eps=eps,
        beta=1.0,
        mu0=mu0,
        b_x=bench_convection_dx,
        exact=ExactSolution(eps),
    )

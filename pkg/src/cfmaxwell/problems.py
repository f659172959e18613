"""Manufactured-solution problems with piecewise-smooth fields.

Each problem carries closed-form fields and source terms for both
subdomains.  Jump data on the interface is never transcribed by hand: it is
the difference of the exact traces, so ``[[u]] = u+ - u-`` holds by
construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy import cos, exp, pi, sin
from numpy.typing import ArrayLike, NDArray

from .errors import UnknownProblem
from .geometry import MINUS, PLUS, LevelSet, unit_normal

Triple = tuple[NDArray, NDArray, NDArray]
FieldFn = Callable[[NDArray, NDArray, NDArray], Triple]


def _b(v, *args):
    """Broadcast ``v`` to the common shape of ``args``."""
    return np.broadcast_to(v, np.broadcast(*args).shape) + 0.0 * args[0]


@dataclass(frozen=True)
class Problem:
    """Level set, constants and per-side exact fields and sources."""

    name: str
    level_set: LevelSet
    fields_plus: FieldFn
    fields_minus: FieldFn
    sources_plus: FieldFn
    sources_minus: FieldFn
    mu: float = 1.0
    eps: float = 1.0
    sigma: float = 1.0
    T: float = 0.5

    def fields(self, side: int, x, y, t) -> Triple:
        fn = self.fields_plus if side == PLUS else self.fields_minus
        return tuple(np.asarray(v) for v in fn(*np.broadcast_arrays(x, y, t)))

    def sources(self, side: int, x, y, t) -> Triple:
        fn = self.sources_plus if side == PLUS else self.sources_minus
        return tuple(np.asarray(v) for v in fn(*np.broadcast_arrays(x, y, t)))

    def exact(self, x, y, t) -> Triple:
        """Fields of whichever side each point lies on."""
        x, y, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float), np.asarray(t, float))
        plus = self.level_set.eval(x, y) >= 0.0
        fp = self.fields(PLUS, x, y, t)
        fm = self.fields(MINUS, x, y, t)
        return tuple(np.where(plus, a, b) for a, b in zip(fp, fm))

    def jump(self, x, y, t) -> Triple:
        """``u+ - u-`` for each field component, anywhere in space."""
        fp = self.fields(PLUS, x, y, t)
        fm = self.fields(MINUS, x, y, t)
        return tuple(a - b for a, b in zip(fp, fm))

    def source_jump(self, x, y, t) -> Triple:
        sp = self.sources(PLUS, x, y, t)
        sm = self.sources(MINUS, x, y, t)
        return tuple(a - b for a, b in zip(sp, sm))


# -- circle family fields ---------------------------------------------------

def _circle_plus(x, y, t):
    s = sin(2 * pi * t)
    return (
        sin(2 * pi * x) * sin(2 * pi * y) * s,
        cos(2 * pi * x) * cos(2 * pi * y) * s,
        sin(2 * pi * x) * cos(2 * pi * y) * cos(2 * pi * t),
    )


def _circle_minus(x, y, t):
    s = sin(2 * pi * t)
    return (
        -2 * sin(2 * pi * x) * sin(2 * pi * y) * s + 5,
        -2 * cos(2 * pi * x) * cos(2 * pi * y) * s + 3,
        -2 * sin(2 * pi * x) * cos(2 * pi * y) * cos(2 * pi * t) + 2,
    )


def _circle_src_plus(x, y, t):
    z = _b(0.0, x, y, t)
    f2 = (2 * pi * sin(2 * pi * t) + cos(2 * pi * t)) * sin(2 * pi * x) * cos(2 * pi * y)
    return z, z.copy(), f2


def _circle_src_minus(x, y, t):
    z = _b(0.0, x, y, t)
    f2 = -(4 * pi * sin(2 * pi * t) + 2 * cos(2 * pi * t)) * sin(2 * pi * x) * cos(2 * pi * y) + 2
    return z, z.copy(), f2


# -- 5-star fields ------------------------------------------------------------

def _star_plus(x, y, t):
    c = cos(2 * pi * t)
    return (
        sin(4 * pi * x) * sin(4 * pi * y) * c,
        cos(4 * pi * x) * cos(4 * pi * y) * c,
        _b(0.0, x, y, t),
    )


def _star_minus(x, y, t):
    s = sin(2 * pi * t)
    e = exp(-x * y)
    return (
        (-x * e + 2) * s,
        (y * e + 3) * s,
        sin(2 * pi * x * y) * cos(2 * pi * t),
    )


def _star_src_plus(x, y, t):
    s, c = sin(2 * pi * t), cos(2 * pi * t)
    return (
        -2 * pi * sin(4 * pi * x) * sin(4 * pi * y) * s,
        -2 * pi * cos(4 * pi * x) * cos(4 * pi * y) * s,
        8 * pi * sin(4 * pi * x) * cos(4 * pi * y) * c,
    )


def _star_src_minus(x, y, t):
    s, c = sin(2 * pi * t), cos(2 * pi * t)
    e = exp(-x * y)
    return (
        (2 * pi * (-x * e + 2) + 2 * pi * x * cos(2 * pi * x * y)) * c,
        2 * pi * (y * e - y * cos(2 * pi * x * y) + 3) * c,
        (-2 * pi * sin(2 * pi * x * y) + y**2 * e + x**2 * e) * s + sin(2 * pi * x * y) * c,
    )


def _tricircle() -> LevelSet:
    r = np.sqrt(3.0) / 2.0
    return LevelSet.tricircle(((0.5 + r, 0.9), (0.5 - r, 0.9), (0.5, -0.6)), r)


_REGISTRY: dict[str, Callable[[], Problem]] = {
    "circle": lambda: Problem(
        "circle", LevelSet.circle(0.5, 0.5, 0.25),
        _circle_plus, _circle_minus, _circle_src_plus, _circle_src_minus,
    ),
    "star5": lambda: Problem(
        "star5", LevelSet.star(5, 0.5, 0.5, 0.25, 0.05),
        _star_plus, _star_minus, _star_src_plus, _star_src_minus,
    ),
    "star3": lambda: Problem(
        "star3", LevelSet.star(3, 0.55, 0.55, 0.25, 0.15),
        _circle_plus, _circle_minus, _circle_src_plus, _circle_src_minus,
    ),
    "nonsmooth": lambda: Problem(
        "nonsmooth", _tricircle(),
        _circle_plus, _circle_minus, _circle_src_plus, _circle_src_minus,
    ),
    # Interface pushed out of the domain: every node is in the minus region.
    "smooth": lambda: Problem(
        "smooth", LevelSet.plane(0.0, 1.0, -10.0),
        _circle_plus, _circle_plus, _circle_src_plus, _circle_src_plus,
    ),
}

PROBLEM_IDS = tuple(_REGISTRY)


def make_problem(pid: str) -> Problem:
    try:
        return _REGISTRY[pid]()
    except KeyError:
        raise UnknownProblem(pid) from None


def jump_data(problem: Problem, q: ArrayLike, t: float) -> tuple[float, float, float]:
    """Scalar interface data ``(a_s, b_s, d)`` at a point of Γ.

    ``a_s = [[Ez]]``, ``b_s = nx [[Hy]] - ny [[Hx]]`` and
    ``d = mu (nx [[Hx]] + ny [[Hy]])``.
    """
    q = np.asarray(q, dtype=float)
    nx, ny = unit_normal(problem.level_set, q)
    jx, jy, je = (float(v) for v in problem.jump(q[0], q[1], t))
    return je, nx * jy - ny * jx, problem.mu * (nx * jx + ny * jy)


def jump_data_batch(problem: Problem, x: NDArray, y: NDArray, t, nx: NDArray, ny: NDArray) -> Triple:
    """Vectorised :func:`jump_data` with precomputed normals."""
    jx, jy, je = problem.jump(x, y, t)
    return je, nx * jy - ny * jx, problem.mu * (nx * jx + ny * jy)


def _cstep(fn, args, k, h=1e-30):
    z = [np.asarray(a, dtype=complex) for a in args]
    z[k] = z[k] + 1j * h
    return [np.imag(v) / h for v in fn(*z)]


def pde_residual(problem: Problem, side: int, x, y, t) -> Triple:
    """Residuals of the TM_z equations for one side's exact fields.

    Derivatives use the complex step, so the result is exact to round-off for
    analytic closed-form fields.
    """
    fn = problem.fields_plus if side == PLUS else problem.fields_minus
    args = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float), np.asarray(t, float))
    dx = _cstep(fn, args, 0)
    dy = _cstep(fn, args, 1)
    dt = _cstep(fn, args, 2)
    _, _, ez = (np.asarray(v, dtype=float) for v in fn(*args))
    f1x, f1y, f2 = problem.sources(side, *args)
    mu, eps, sig = problem.mu, problem.eps, problem.sigma
    r1 = mu * dt[0] + dy[2] - f1x
    r2 = mu * dt[1] - dx[2] - f1y
    r3 = eps * dt[2] - dx[1] + dy[0] + sig * ez - f2
    return r1, r2, r3

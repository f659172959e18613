"""Staggered TM_z finite differences with interface corrections, RK4 in time.

A stencil centred on one side of the interface that reads a node from the
other side uses ``value + D`` (centre in the plus region) or ``value - D``
(centre in the minus region) instead of the raw value, where ``D = U+ - U-``
is the node's correction.  The stencils themselves never change.

Corrections enter every derivative through a sparse matrix ``K`` mapping
per-patch correction values to per-centre additive terms, so a stage costs
the plain stencil plus one sparse product per derivative.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray

from .cfm import Patch, PatchSet, Physics, build_patch, stage_values
from .errors import ConfigError, MissingCorrection
from .geometry import MINUS, PLUS, closest_point
from .grid import (
    DIV_STENCILS,
    FAMILIES,
    SCHEME_STENCILS,
    WEIGHTS,
    FieldSet,
    GridSpec,
    SideMasks,
    Stencil,
    centered_diff,
    classify_nodes,
)
from .problems import Problem

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SchemeConfig:
    order: int = 4
    cfl: float = 0.5
    physics: Physics = Physics()
    k: int = 3
    corrections: bool = True

    def __post_init__(self):
        if self.order not in (2, 4):
            raise ConfigError(f"scheme order must be 2 or 4, got {self.order}")
        if not self.cfl > 0:
            raise ConfigError("cfl must be positive")

    def dt(self, h: float) -> float:
        return self.cfl * h


def corrected_sample(value: float, node_side: int, target_side: int, dhat: float | None) -> float:
    """Value of a node as seen from a stencil centred on ``target_side``."""
    if node_side == target_side:
        return value
    if dhat is None:
        raise MissingCorrection("node read across the interface has no correction")
    return value + dhat if target_side == PLUS else value - dhat


def spatial_deriv(A: NDArray, spacing: float, axis: int, kind: str, order: int) -> NDArray:
    """Plain periodic centred derivative of a stored field."""
    return centered_diff(A, spacing, axis, kind, order)


@dataclass
class CorrectionTable:
    """One patch per corrected node and the stencil-to-patch coupling matrices."""

    keys: list[tuple[str, int, int]]
    index: dict[tuple[str, int, int], int]
    patches: PatchSet
    K: dict[str, sp.csr_matrix]
    n_scheme: int

    def __len__(self) -> int:
        return len(self.keys)

    def lookup(self, family: str, a: int, b: int) -> int:
        try:
            return self.index[(family, a, b)]
        except KeyError:
            raise MissingCorrection(f"no correction for {family}[{a}, {b}]") from None


def _choose_image(spec: GridSpec, ls, family: str, node: tuple[int, int], shifts: set[tuple[int, int]]):
    """Periodic image of a node lying closest to the interface, with its foot."""
    X, Y = spec.array_coords(family, node[0], node[1])
    Lx, Ly = spec.lengths
    cands = sorted({(0, 0)} | shifts)
    pts = np.array([[float(X) + sx * Lx, float(Y) + sy * Ly] for sx, sy in cands])
    feet = closest_point(ls, pts)
    d = np.hypot(*(pts - feet).T)
    i = int(np.argmin(d))
    return pts[i], feet[i]


def build_correction_table(
    spec: GridSpec, problem: Problem, masks: SideMasks, cfg: SchemeConfig
) -> CorrectionTable:
    ls = problem.level_set
    shifts: dict[tuple[str, int, int], set] = {}
    scheme_names = {s.name for s in SCHEME_STENCILS}
    keys: list[tuple[str, int, int]] = []
    for pass_scheme in (True, False):
        found = []
        for name, links in masks.links.items():
            if (name in scheme_names) != pass_scheme:
                continue
            st = _stencil(name)
            for l in links:
                key = (st.source, *l.node)
                shifts.setdefault(key, set()).add(l.shift)
                found.append(key)
        keys += sorted(set(found) - set(keys), key=lambda k: (FAMILIES.index(k[0]), k[1], k[2]))
        if pass_scheme:
            n_scheme = len(keys)
    index = {k: i for i, k in enumerate(keys)}
    patches: list[Patch] = []
    for fam, a, b in keys:
        pt, foot = _choose_image(spec, ls, fam, (a, b), shifts[(fam, a, b)])
        patches.append(build_patch(fam, pt, ls, spec.h, cfg.order, cfg.physics, cfg.k, owner=(a, b), foot=foot))
    K = {}
    for name, links in masks.links.items():
        st = _stencil(name)
        w = WEIGHTS[cfg.order]
        rows, cols, vals = [], [], []
        c_side = masks.sides[st.center]
        for l in links:
            a, b = l.center
            sgn = 1.0 if c_side[a, b] == PLUS else -1.0
            rows.append(a * spec.ny + b)
            cols.append(index[(st.source, *l.node)])
            vals.append(w[l.offset_index] * sgn / spec.spacing(st.axis))
        K[name] = sp.csr_matrix((vals, (rows, cols)), shape=(spec.nx * spec.ny, len(keys)))
    return CorrectionTable(keys, index, PatchSet(patches), K, n_scheme)


_ALL_STENCILS = {s.name: s for s in SCHEME_STENCILS + DIV_STENCILS}


def _stencil(name: str) -> Stencil:
    return _ALL_STENCILS[name]


State = tuple[NDArray, NDArray, NDArray]


def rk4_step(
    rhs: Callable[[State, float, int], State],
    U: Sequence[NDArray],
    t: float,
    dt: float,
) -> State:
    """Classical RK4; ``rhs(U, t, stage)`` receives the stage number 0..3."""
    U = tuple(U)
    k1 = rhs(U, t, 0)
    k2 = rhs(tuple(u + 0.5 * dt * k for u, k in zip(U, k1)), t + 0.5 * dt, 1)
    k3 = rhs(tuple(u + 0.5 * dt * k for u, k in zip(U, k2)), t + 0.5 * dt, 2)
    k4 = rhs(tuple(u + dt * k for u, k in zip(U, k3)), t + dt, 3)
    return tuple(u + dt / 6.0 * (a + 2 * b + 2 * c + d) for u, a, b, c, d in zip(U, k1, k2, k3, k4))


@dataclass
class StepRecord:
    t: float
    drift: float  # max change of the divergence on one-sided corners
    div_linf: float
    div_l1: float


@dataclass
class RunResult:
    fields: FieldSet
    dt: float
    steps: int
    errors: dict[str, tuple[float, float]]
    div_linf: float
    div_l1: float
    max_drift: float
    history: list[StepRecord] = field(default_factory=list)
    n_patches: int = 0


class Simulation:
    """Set-up and time stepping of one problem on one grid."""

    def __init__(self, problem: Problem, spec: GridSpec, cfg: SchemeConfig, divergence: bool = True):
        self.problem = problem
        self.spec = spec
        self.cfg = cfg
        self.dt = cfg.dt(spec.h)
        self.masks = classify_nodes(spec, problem.level_set, cfg.order, divergence=divergence)
        self.divergence = divergence
        if cfg.corrections:
            self.table = build_correction_table(spec, problem, self.masks, cfg)
        else:
            self.table = None
        self._coords = {f: spec.coords(f) for f in FAMILIES}
        self._plus = {f: self.masks.sides[f] == PLUS for f in FAMILIES}
        # corners whose divergence stencil stays on their own side
        self.one_sided = np.ones(spec.shape, dtype=bool)
        for st in DIV_STENCILS:
            for l in self.masks.links.get(st.name, []):
                self.one_sided[l.center] = False
        self._src_cache: tuple[float, State] | None = None

    @property
    def n_patches(self) -> int:
        return 0 if self.table is None else len(self.table)

    # -- data ---------------------------------------------------------------
    def exact_fields(self, t: float) -> FieldSet:
        out = []
        for comp, f in enumerate(FAMILIES):
            X, Y = self._coords[f]
            out.append(np.asarray(self.problem.exact(X, Y, t)[comp], dtype=float))
        return FieldSet(*out, t=t)

    def sources(self, t: float) -> State:
        if self._src_cache is not None and self._src_cache[0] == t:
            return self._src_cache[1]
        out = []
        for comp, f in enumerate(FAMILIES):
            X, Y = self._coords[f]
            sp_ = self.problem.sources(PLUS, X, Y, t)[comp]
            sm_ = self.problem.sources(MINUS, X, Y, t)[comp]
            out.append(np.where(self._plus[f], sp_, sm_))
        self._src_cache = (t, tuple(out))
        return self._src_cache[1]

    def correction_derivatives(self, t: float) -> NDArray:
        if self.table is None:
            return np.zeros((0, 4))
        return self.table.patches.derivatives(self.problem, t)

    # -- operators ----------------------------------------------------------
    def _deriv(self, A: NDArray, st: Stencil, dvals: NDArray | None) -> NDArray:
        d = spatial_deriv(A, self.spec.spacing(st.axis), st.axis, st.kind, self.cfg.order)
        if dvals is not None and self.table is not None:
            d = d + (self.table.K[st.name] @ dvals).reshape(self.spec.shape)
        return d

    def rhs(self, U: State, t: float, dvals: NDArray | None = None) -> State:
        """Time derivative of ``(Hx, Hy, Ez)`` with corrections ``dvals``."""
        Hx, Hy, Ez = U
        ph = self.cfg.physics
        f1x, f1y, f2 = self.sources(t)
        s = {st.name: st for st in SCHEME_STENCILS}
        dyE = self._deriv(Ez, s["dy_Ez@Hx"], dvals)
        dxE = self._deriv(Ez, s["dx_Ez@Hy"], dvals)
        dxHy = self._deriv(Hy, s["dx_Hy@Ez"], dvals)
        dyHx = self._deriv(Hx, s["dy_Hx@Ez"], dvals)
        return (
            (f1x - dyE) / ph.mu,
            (f1y + dxE) / ph.mu,
            (-ph.sigma * Ez + f2 + dxHy - dyHx) / ph.eps,
        )

    def divergence_field(self, fields: FieldSet, dvals: NDArray | None = None) -> NDArray:
        """Corner divergence of ``H``; corrected where ``dvals`` is given."""
        from .diagnostics import discrete_div

        return discrete_div(fields, self.spec, self.cfg.order, self.table, dvals)

    def step(self, U: State, t: float, derivs: NDArray | None = None) -> State:
        if self.table is None:
            return rk4_step(lambda V, s, _: self.rhs(V, s), U, t, self.dt)
        if derivs is None:
            derivs = self.correction_derivatives(t)
        stages = stage_values(derivs, self.dt)
        return rk4_step(lambda V, s, k: self.rhs(V, s, stages[:, k]), U, t, self.dt)

    # -- driver -------------------------------------------------------------
    def run(self, T: float, snapshot: Callable[[FieldSet], None] | None = None, snapshot_times=()) -> RunResult:
        from .diagnostics import error_norms, norms

        if T < 0:
            raise ConfigError("final time must be nonnegative")
        n_steps = int(round(T / self.dt))
        if not math.isclose(n_steps * self.dt, T, rel_tol=1e-9, abs_tol=1e-14):
            raise ConfigError(f"T={T} is not a multiple of dt={self.dt}")
        U = self.exact_fields(0.0)
        U = (U.Hx, U.Hy, U.Ez)
        pending = sorted(snapshot_times)
        div0 = None
        history: list[StepRecord] = []
        max_drift = 0.0
        for n in range(n_steps + 1):
            t = n * self.dt
            derivs = self.correction_derivatives(t)
            fs = FieldSet(*U, t=t)
            while pending and pending[0] <= t + 1e-12 and snapshot is not None:
                snapshot(fs)
                pending.pop(0)
            if self.divergence:
                dvals = derivs[:, 0] if self.table is not None else None
                plain = self.divergence_field(fs)
                if div0 is None:
                    div0 = plain
                drift = float(np.max(np.abs(plain - div0)[self.one_sided], initial=0.0))
                max_drift = max(max_drift, drift)
                div = self.divergence_field(fs, dvals)
                li, l1 = norms(div, self.spec)
                history.append(StepRecord(t, drift, li, l1))
            if n == n_steps:
                break
            U = self.step(U, t, derivs)
        final = FieldSet(*U, t=n_steps * self.dt)
        errs = error_norms(final, self.problem, self.spec, final.t)
        last = history[-1] if history else StepRecord(final.t, 0.0, float("nan"), float("nan"))
        return RunResult(final, self.dt, n_steps, errs, last.div_linf, last.div_l1, max_drift, history, self.n_patches)


def run(problem: Problem, spec: GridSpec, cfg: SchemeConfig, T: float | None = None, divergence: bool = True) -> RunResult:
    """Simulate ``problem`` up to ``T`` (the problem's final time by default)."""
    sim = Simulation(problem, spec, cfg, divergence=divergence)
    return sim.run(problem.T if T is None else T)

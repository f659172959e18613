"""Correction functions on space-time patches.

For a node whose value is read across the interface by some stencil, the
jump ``D = U+ - U-`` is approximated near that node by a polynomial in patch
coordinates

    xi = (x - c_x) / l,  eta = (y - c_y) / l,  tau = (t - t_n) / T,

with ``xi, eta`` in ``[-1/2, 1/2]`` and ``tau`` in ``[-1, 0]``.  ``D_H`` lives in
a divergence-free space-time space and ``D_Ez`` in a scalar one.  The
coefficients minimise a least-squares functional made of the TM_z equations
satisfied by ``D`` inside the patch plus the jump conditions on the interface.

The functional is scaled by ``1 / (l T)`` so its weights are O(1) in ``h``.  The
normal matrix depends only on geometry; it is factored once per patch and
reused at every time step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial

import numpy as np
import scipy.linalg as sla
from numpy.typing import ArrayLike, NDArray

from .errors import OutsidePatch, SingularNormalMatrix
from .geometry import InterfaceSegment, LevelSet, closest_point, gauss_unit, interface_segments
from .poly_basis import SpaceTimeBasis, divfree_basis, scalar_basis, spacetime_tensor

log = logging.getLogger(__name__)

PIVOT_TOL = 1e-14
N_TIME_Q = 4
# longest interface chord, as a fraction of the patch side
MAX_CHORD = 0.25


@dataclass(frozen=True)
class Physics:
    mu: float = 1.0
    eps: float = 1.0
    sigma: float = 1.0


def patch_length(h: float, scheme_order: int) -> float:
    """Side of the square patch: one cell for order 2, three for order 4."""
    return {2: 1.0, 4: 3.0}[scheme_order] * h


# -- factorisation ------------------------------------------------------------

@dataclass(frozen=True)
class SymmetricFactor:
    """Pivoted ``L D L^T`` of a diagonally equilibrated symmetric matrix."""

    lower: NDArray
    dblock: NDArray
    perm: NDArray
    scale: NDArray

    @property
    def n(self) -> int:
        return self.scale.size

    def solve(self, b: ArrayLike) -> NDArray:
        b = np.asarray(b, dtype=float)
        vec = b.ndim == 1
        B = (b.reshape(self.n, -1) * self.scale[:, None])[self.perm]
        u = sla.solve_triangular(self.lower, B, lower=True, unit_diagonal=True)
        v = np.linalg.solve(self.dblock, u)
        y = sla.solve_triangular(self.lower.T, v, lower=False, unit_diagonal=True)
        x = np.empty_like(y)
        x[self.perm] = y
        x *= self.scale[:, None]
        return x[:, 0] if vec else x


def factor_symmetric(M: ArrayLike, pivot_tol: float = PIVOT_TOL) -> SymmetricFactor:
    """Factor a symmetric matrix, refusing numerically singular ones."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("square matrix required")
    diag = np.abs(np.diag(M))
    if np.any(diag == 0.0):
        raise SingularNormalMatrix("zero diagonal entry")
    s = 1.0 / np.sqrt(diag)
    Ms = M * s[:, None] * s[None, :]
    lu, d, perm = sla.ldl(Ms, lower=True)
    # D is block diagonal with 1x1 and 2x2 blocks; its eigenvalues are the pivots
    piv = np.abs(np.linalg.eigvalsh(d))
    if piv.min() < pivot_tol * np.linalg.norm(Ms, 2):
        raise SingularNormalMatrix(f"pivot {piv.min():.3e} below threshold")
    return SymmetricFactor(lu[perm], d, perm, s)


# -- reference layout shared by all patches of one run ------------------------

def _tiled_gauss(n_tiles: int, n_pts: int) -> tuple[NDArray, NDArray]:
    """Composite Gauss rule on [-1/2, 1/2]; weights sum to one."""
    x, w = gauss_unit(n_pts)
    xs = np.concatenate([(t + x) / n_tiles for t in range(n_tiles)]) - 0.5
    ws = np.concatenate([w / n_tiles] * n_tiles)
    return xs, ws


@dataclass(frozen=True)
class Reference:
    """Bases, volume quadrature and the volume part of the normal matrix.

    Everything here depends only on ``(k, l, T, physics)``, so one instance
    serves every patch of a run.
    """

    k: int
    length: float
    dt_gamma: float
    physics: Physics
    basis_h: SpaceTimeBasis
    basis_e: SpaceTimeBasis
    vol_pts: NDArray  # (nv, 3) local (xi, eta, tau)
    vol_w: NDArray  # (3 nv,) row weights
    B_vol: NDArray  # (3 nv, n)
    M_vol: NDArray
    tau_pts: NDArray
    tau_w: NDArray

    @property
    def n_h(self) -> int:
        return self.basis_h.size

    @property
    def n(self) -> int:
        return self.basis_h.size + self.basis_e.size

    def local(self, center: NDArray, x, y, t, t_n: float):
        return (
            (np.asarray(x) - center[0]) / self.length,
            (np.asarray(y) - center[1]) / self.length,
            (np.asarray(t) - t_n) / self.dt_gamma,
        )

    def value_rows(self, xi, eta, tau, dtau: int = 0) -> tuple[NDArray, NDArray, NDArray]:
        """Rows mapping coefficients to ``(D_Hx, D_Hy, D_Ez)`` at local points."""
        VH = self.basis_h.eval(xi, eta, tau, dtau=dtau)
        VE = self.basis_e.eval(xi, eta, tau, dtau=dtau)
        ze = np.zeros((VH.shape[0], self.basis_e.size))
        rx = np.hstack([VH[..., 0], ze])
        ry = np.hstack([VH[..., 1], ze])
        re = np.hstack([np.zeros((VE.shape[0], self.n_h)), VE])
        return rx, ry, re

    def interface_rows(self, xi, eta, tau, nx, ny) -> NDArray:
        """Rows of the three interface residuals, stacked ``(3 m, n)``."""
        VH = self.basis_h.eval(xi, eta, tau)
        VE = self.basis_e.eval(xi, eta, tau)
        m = VE.shape[0]
        ze = np.zeros((m, self.basis_e.size))
        zh = np.zeros((m, self.n_h))
        ra = np.hstack([zh, VE])
        rb = np.hstack([nx[:, None] * VH[..., 1] - ny[:, None] * VH[..., 0], ze])
        rd = np.hstack([nx[:, None] * VH[..., 0] + ny[:, None] * VH[..., 1], ze])
        return np.vstack([ra, rb, rd])


def _volume_rows(bh: SpaceTimeBasis, be: SpaceTimeBasis, pts: NDArray, l: float, T: float, ph: Physics) -> NDArray:
    xi, eta, tau = pts.T
    H_t = bh.eval(xi, eta, tau, dtau=1)
    H_x = bh.eval(xi, eta, tau, dxi=1)
    H_y = bh.eval(xi, eta, tau, deta=1)
    E = be.eval(xi, eta, tau)
    E_t = be.eval(xi, eta, tau, dtau=1)
    E_x = be.eval(xi, eta, tau, dxi=1)
    E_y = be.eval(xi, eta, tau, deta=1)
    r1 = np.hstack([ph.mu / T * H_t[..., 0], E_y / l])
    r2 = np.hstack([ph.mu / T * H_t[..., 1], -E_x / l])
    r3 = np.hstack([(H_y[..., 0] - H_x[..., 1]) / l, ph.eps / T * E_t + ph.sigma * E])
    return np.vstack([r1, r2, r3])


@lru_cache(maxsize=16)
def make_reference(k: int, length: float, physics: Physics) -> Reference:
    T = float(np.sqrt(physics.eps * physics.mu)) * length
    bh = spacetime_tensor(divfree_basis(k), k)
    be = spacetime_tensor(scalar_basis(k), k)
    xs, ws = _tiled_gauss(2, 4)
    tq, tw = gauss_unit(N_TIME_Q)
    tq = tq - 1.0
    X, Y, Tq = np.meshgrid(xs, xs, tq, indexing="ij")
    WX, WY, WT = np.meshgrid(ws, ws, tw, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel(), Tq.ravel()])
    w = (WX * WY * WT).ravel() * length * length  # l_c * l with l_c = l
    B = _volume_rows(bh, be, pts, length, T, physics)
    W = np.tile(w, 3)
    M = B.T @ (W[:, None] * B)
    return Reference(k, length, T, physics, bh, be, pts, W, B, M, tq, tw)


# -- patches ------------------------------------------------------------------

@dataclass
class Patch:
    """Square space-time patch attached to one owner node."""

    family: str
    owner: tuple[int, int]
    node: NDArray  # owner node position (possibly a periodic image)
    foot: NDArray  # closest interface point to ``node``
    center: NDArray
    ref: Reference
    segments: list[InterfaceSegment]
    int_x: NDArray
    int_y: NDArray
    int_nx: NDArray
    int_ny: NDArray
    int_tau: NDArray
    B_int: NDArray
    W_int: NDArray
    factor: SymmetricFactor

    @property
    def length(self) -> float:
        return self.ref.length

    @property
    def scale(self) -> float:
        return self.ref.length

    @property
    def dt_gamma(self) -> float:
        return self.ref.dt_gamma

    @property
    def node_local(self) -> tuple[float, float]:
        l = self.ref.length
        return ((self.node[0] - self.center[0]) / l, (self.node[1] - self.center[1]) / l)

    def contains(self, point: ArrayLike, tol: float = 1e-12) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(np.abs(p - self.center) <= 0.5 * self.length * (1 + tol)))

    def normal_matrix(self) -> NDArray:
        return self.ref.M_vol + self.B_int.T @ (self.W_int[:, None] * self.B_int)


def build_patch(
    family: str,
    node: ArrayLike,
    ls: LevelSet,
    h: float,
    scheme_order: int,
    physics: Physics = Physics(),
    k: int = 3,
    owner: tuple[int, int] = (-1, -1),
    foot: ArrayLike | None = None,
) -> Patch:
    """Patch for the node at ``node`` (physical coordinates).

    The square is centred at the interface point closest to the node, shifted
    just enough to keep the node inside.
    """
    ref = make_reference(k, patch_length(h, scheme_order), physics)
    node = np.asarray(node, dtype=float)
    p = closest_point(ls, node) if foot is None else np.asarray(foot, dtype=float)
    half = 0.5 * ref.length
    center = node + np.clip(p - node, -half, half)
    segs = interface_segments(ls, center, ref.length, max_chord=MAX_CHORD)
    qx = np.concatenate([s.points[:, 0] for s in segs])
    qy = np.concatenate([s.points[:, 1] for s in segs])
    qw = np.concatenate([s.weights for s in segs])
    qn = np.concatenate([s.normals for s in segs])
    # interface space points x time points
    m_s, m_t = qx.size, ref.tau_pts.size
    ix = np.repeat(qx, m_t)
    iy = np.repeat(qy, m_t)
    inx = np.repeat(qn[:, 0], m_t)
    iny = np.repeat(qn[:, 1], m_t)
    it = np.tile(ref.tau_pts, m_s)
    w = (np.repeat(qw, m_t) / ref.length) * np.tile(ref.tau_w, m_s)
    xi = (ix - center[0]) / ref.length
    eta = (iy - center[1]) / ref.length
    B_int = ref.interface_rows(xi, eta, it, inx, iny)
    W_int = np.tile(w, 3)
    M = ref.M_vol + B_int.T @ (W_int[:, None] * B_int)
    fac = factor_symmetric(M)
    return Patch(family, owner, node, p, center, ref, segs, ix, iy, inx, iny, it, B_int, W_int, fac)


# -- data, right-hand side and solve ------------------------------------------

def _targets(patch: Patch, data, t_n: float) -> tuple[NDArray, NDArray]:
    """Residual targets ``g`` for the volume and interface rows at ``t_n``."""
    ref = patch.ref
    xi, eta, tau = ref.vol_pts.T
    x = patch.center[0] + ref.length * xi
    y = patch.center[1] + ref.length * eta
    t = t_n + ref.dt_gamma * tau
    g_vol = np.concatenate([np.asarray(v, float).ravel() for v in data.source_jump(x, y, t)])
    ti = t_n + ref.dt_gamma * patch.int_tau
    jx, jy, je = data.jump(patch.int_x, patch.int_y, ti)
    nx, ny = patch.int_nx, patch.int_ny
    g_int = np.concatenate([je, nx * jy - ny * jx, nx * jx + ny * jy])
    return g_vol, g_int


def assemble_rhs(patch: Patch, data, t_n: float) -> NDArray:
    """Right-hand side ``B^T W g`` of the normal equations.

    ``data`` exposes ``source_jump(x, y, t)`` and ``jump(x, y, t)``, each
    returning the three components of ``(.)+ - (.)-``.  A :class:`Problem`
    qualifies.  The normal-H condition target ``d / mu`` is the jump of the
    normal component, which is what ``jump`` provides.
    """
    g_vol, g_int = _targets(patch, data, t_n)
    ref = patch.ref
    return ref.B_vol.T @ (ref.vol_w * g_vol) + patch.B_int.T @ (patch.W_int * g_int)


@dataclass(frozen=True)
class CorrectionPoly:
    """Solved coefficients on one patch, anchored at ``t_n``."""

    coeffs: NDArray
    t_n: float
    patch: Patch = field(repr=False)

    @property
    def coeffs_h(self) -> NDArray:
        return self.coeffs[: self.patch.ref.n_h]

    @property
    def coeffs_e(self) -> NDArray:
        return self.coeffs[self.patch.ref.n_h :]


def solve_corrections(patch: Patch, rhs: ArrayLike, t_n: float = 0.0) -> CorrectionPoly:
    c = patch.factor.solve(np.asarray(rhs, dtype=float))
    return CorrectionPoly(c, t_n, patch)


def functional_value(cp: CorrectionPoly, data) -> float:
    """Scaled functional ``1/2 sum W (B c - g)^2`` at the solution."""
    p = cp.patch
    g_vol, g_int = _targets(p, data, cp.t_n)
    rv = p.ref.B_vol @ cp.coeffs - g_vol
    ri = p.B_int @ cp.coeffs - g_int
    return 0.5 * float(np.dot(p.ref.vol_w, rv * rv) + np.dot(p.W_int, ri * ri))


_COMPONENT = {"Hx": 0, "Hy": 1, "Ez": 2}


def eval_correction(cp: CorrectionPoly, family: str, point: ArrayLike, t: float, tau_deriv: int = 0) -> float:
    """``D`` of one component, or its ``tau_deriv``-th time derivative."""
    p = cp.patch
    if not 0 <= tau_deriv <= 3:
        raise ValueError("time derivative order must be 0..3")
    if not p.contains(point):
        raise OutsidePatch(f"{tuple(point)} outside patch centred at {tuple(p.center)}")
    T = p.dt_gamma
    if tau_deriv == 0 and not (cp.t_n - T - 1e-12 * T <= t <= cp.t_n + 1e-12 * T):
        raise OutsidePatch(f"t={t} outside [{cp.t_n - T}, {cp.t_n}]")
    xi, eta, tau = p.ref.local(p.center, [point[0]], [point[1]], [t], cp.t_n)
    rows = p.ref.value_rows(xi, eta, tau, dtau=tau_deriv)[_COMPONENT[family]]
    return float(rows[0] @ cp.coeffs) / T**tau_deriv


def stage_values(derivs: ArrayLike, dt: float) -> NDArray:
    """Taylor-extrapolated corrections for the four RK4 stages.

    ``derivs[..., d]`` holds the ``d``-th time derivative of ``D`` at ``t_n``.
    Returns an array with a trailing axis of length four.
    """
    D = np.asarray(derivs, dtype=float)
    d0, d1, d2, d3 = D[..., 0], D[..., 1], D[..., 2], D[..., 3]
    s2 = d0 + 0.5 * dt * d1
    return np.stack(
        [
            d0,
            s2,
            s2 + 0.25 * dt**2 * d2,
            d0 + dt * d1 + 0.5 * dt**2 * d2 + 0.25 * dt**3 * d3,
        ],
        axis=-1,
    )


def node_derivatives(cp: CorrectionPoly) -> NDArray:
    """``D, D', D'', D'''`` of the owner's component at the owner node, ``t_n``."""
    p = cp.patch
    return np.array([eval_correction(cp, p.family, p.node, cp.t_n, d) for d in range(4)])


def staged_corrections(cp: CorrectionPoly, dt: float) -> tuple[float, float, float, float]:
    return tuple(float(v) for v in stage_values(node_derivatives(cp), dt))


# -- batched evaluation -------------------------------------------------------

class PatchSet:
    """All patches of a run with precomputed node-evaluation operators.

    For each patch the map from residual targets to ``(D, D', D'', D''')`` of
    the owner's component at the owner node is linear; it is stored as
    ``P_vol`` (shared layout) and zero-padded ``P_int`` so one step costs a
    batched evaluation of the data plus two contractions.
    """

    def __init__(self, patches: list[Patch]):
        self.patches = patches
        n = len(patches)
        self.size = n
        if n == 0:
            return
        ref = patches[0].ref
        self.ref = ref
        self.centers = np.array([p.center for p in patches])
        m_int = max(p.int_x.size for p in patches)
        self.P_vol = np.empty((n, 4, ref.B_vol.shape[0]))
        self.P_int = np.zeros((n, 4, 3 * m_int))
        self.int_x = np.empty((n, m_int))
        self.int_y = np.empty((n, m_int))
        self.int_nx = np.zeros((n, m_int))
        self.int_ny = np.zeros((n, m_int))
        self.int_tau = np.zeros((n, m_int))
        T = ref.dt_gamma
        for i, p in enumerate(patches):
            xi, eta = p.node_local
            comp = _COMPONENT[p.family]
            E = np.vstack(
                [ref.value_rows([xi], [eta], [0.0], dtau=d)[comp][0] / T**d for d in range(4)]
            )
            X = p.factor.solve(E.T)  # (n, 4)
            self.P_vol[i] = (ref.B_vol @ X).T * ref.vol_w
            m = p.int_x.size
            Pi = ((p.B_int @ X).T * p.W_int).reshape(4, 3, m)
            self.P_int[i].reshape(4, 3, m_int)[:, :, :m] = Pi
            self.int_x[i, :m] = p.int_x
            self.int_y[i, :m] = p.int_y
            self.int_x[i, m:] = p.center[0]
            self.int_y[i, m:] = p.center[1]
            self.int_nx[i, :m] = p.int_nx
            self.int_ny[i, :m] = p.int_ny
            self.int_tau[i, :m] = p.int_tau
        xi, eta, tau = ref.vol_pts.T
        self.vol_x = self.centers[:, 0:1] + ref.length * xi[None, :]
        self.vol_y = self.centers[:, 1:2] + ref.length * eta[None, :]
        self.vol_tau = tau

    def __len__(self) -> int:
        return self.size

    def derivatives(self, data, t_n: float) -> NDArray:
        """``(n_patches, 4)`` array of ``D`` and its first three time derivatives."""
        if self.size == 0:
            return np.zeros((0, 4))
        T = self.ref.dt_gamma
        t = t_n + T * self.vol_tau[None, :]
        sv = data.source_jump(self.vol_x, self.vol_y, t)
        g_vol = np.concatenate([np.broadcast_to(v, self.vol_x.shape) for v in sv], axis=1)
        ti = t_n + T * self.int_tau
        jx, jy, je = data.jump(self.int_x, self.int_y, ti)
        nx, ny = self.int_nx, self.int_ny
        g_int = np.concatenate([je, nx * jy - ny * jx, nx * jx + ny * jy], axis=1)
        return np.einsum("pdr,pr->pd", self.P_vol, g_vol) + np.einsum("pdr,pr->pd", self.P_int, g_int)

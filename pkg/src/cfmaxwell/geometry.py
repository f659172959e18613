"""Level-set interfaces: evaluation, projection, normals and curve quadrature.

The sign convention is ``phi >= 0`` in the plus subdomain and ``phi < 0`` in
the minus subdomain; the interface is the zero set.  All evaluation routines
accept scalars or arrays and broadcast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import brentq
from skimage.measure import find_contours

from .errors import DegenerateGradient, EmptyIntersection, NonConvergence

PLUS = 1
MINUS = -1

_GAUSS_CACHE: dict[int, tuple[NDArray, NDArray]] = {}


def gauss_unit(n: int) -> tuple[NDArray, NDArray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    if n not in _GAUSS_CACHE:
        x, w = np.polynomial.legendre.leggauss(n)
        _GAUSS_CACHE[n] = (0.5 * (x + 1.0), 0.5 * w)
    return _GAUSS_CACHE[n]


@dataclass(frozen=True)
class LevelSet:
    """Implicit interface description.

    Use the constructors :meth:`circle`, :meth:`star`, :meth:`tricircle` and
    :meth:`plane` rather than instantiating directly.
    """

    kind: str
    params: tuple = field(default=())

    # -- constructors -----------------------------------------------------
    @classmethod
    def circle(cls, x0: float = 0.5, y0: float = 0.5, r0: float = 0.25) -> "LevelSet":
        return cls("circle", (float(x0), float(y0), float(r0)))

    @classmethod
    def star(cls, omega: int, x0: float, y0: float, r0: float, amp: float) -> "LevelSet":
        """Star-shaped interface with radius ``r0 + amp*sin(omega*theta)``."""
        return cls("star", (int(omega), float(x0), float(y0), float(r0), float(amp)))

    @classmethod
    def tricircle(cls, centers: Sequence[tuple[float, float]], radius: float) -> "LevelSet":
        """Union of disks; the region outside every disk is the minus side.

        At points where two circle functions tie, the first circle in
        ``centers`` supplies the gradient.
        """
        flat = tuple(float(c) for xy in centers for c in xy)
        return cls("tricircle", (float(radius),) + flat)

    @classmethod
    def plane(cls, a: float, b: float, c: float) -> "LevelSet":
        """Affine level set ``a*x + b*y + c``."""
        return cls("plane", (float(a), float(b), float(c)))

    # -- evaluation -------------------------------------------------------
    def _tri_parts(self, x, y):
        r = self.params[0]
        cs = np.asarray(self.params[1:]).reshape(-1, 2)
        vals = np.stack([r * r - (x - cx) ** 2 - (y - cy) ** 2 for cx, cy in cs])
        # argmax returns the first maximal index, which is the tie rule.
        return vals, np.argmax(vals, axis=0), cs

    def star_radius(self, theta: ArrayLike) -> NDArray:
        omega, _, _, r0, amp = self.params
        return r0 + amp * np.sin(omega * np.asarray(theta))

    def eval(self, x: ArrayLike, y: ArrayLike) -> NDArray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "circle":
            x0, y0, r0 = self.params
            return (x - x0) ** 2 + (y - y0) ** 2 - r0 * r0
        if self.kind == "star":
            _, x0, y0, _, _ = self.params
            dx, dy = x - x0, y - y0
            r = self.star_radius(np.arctan2(dy, dx))
            return dx * dx + dy * dy - r * r
        if self.kind == "tricircle":
            vals, _, _ = self._tri_parts(x, y)
            return vals.max(axis=0)
        if self.kind == "plane":
            a, b, c = self.params
            return a * x + b * y + c
        raise ValueError(f"unknown level-set kind {self.kind!r}")

    def grad(self, x: ArrayLike, y: ArrayLike) -> tuple[NDArray, NDArray]:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "circle":
            x0, y0, _ = self.params
            return 2.0 * (x - x0), 2.0 * (y - y0)
        if self.kind == "star":
            omega, x0, y0, r0, amp = self.params
            dx, dy = x - x0, y - y0
            rho2 = dx * dx + dy * dy
            theta = np.arctan2(dy, dx)
            r = r0 + amp * np.sin(omega * theta)
            dr = amp * omega * np.cos(omega * theta)
            with np.errstate(divide="ignore", invalid="ignore"):
                fac = 2.0 * r * dr / rho2
            return 2.0 * dx + fac * dy, 2.0 * dy - fac * dx
        if self.kind == "tricircle":
            _, idx, cs = self._tri_parts(x, y)
            cx = cs[idx, 0]
            cy = cs[idx, 1]
            return -2.0 * (x - cx), -2.0 * (y - cy)
        if self.kind == "plane":
            a, b, _ = self.params
            return np.full_like(x, a), np.full_like(y, b)
        raise ValueError(f"unknown level-set kind {self.kind!r}")

    def hessian(self, x: ArrayLike, y: ArrayLike, step: float = 1e-6):
        """Central-difference Hessian of the analytic gradient."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        gxp, gyp = self.grad(x + step, y)
        gxm, gym = self.grad(x - step, y)
        hxx = (gxp - gxm) / (2 * step)
        hyx = (gyp - gym) / (2 * step)
        gxp, gyp = self.grad(x, y + step)
        gxm, gym = self.grad(x, y - step)
        hxy = (gxp - gxm) / (2 * step)
        hyy = (gyp - gym) / (2 * step)
        sym = 0.5 * (hxy + hyx)
        return hxx, sym, hyy


def level_set_eval(ls: LevelSet, p: ArrayLike) -> NDArray | float:
    p = np.asarray(p, dtype=float)
    out = ls.eval(p[..., 0], p[..., 1])
    return float(out) if out.ndim == 0 else out


def side_of(ls: LevelSet, p: ArrayLike) -> NDArray | int:
    """``PLUS`` where ``phi >= 0`` and ``MINUS`` elsewhere."""
    p = np.asarray(p, dtype=float)
    s = np.where(ls.eval(p[..., 0], p[..., 1]) >= 0.0, PLUS, MINUS)
    return int(s) if s.ndim == 0 else s


def unit_normal(ls: LevelSet, q: ArrayLike) -> NDArray:
    """Unit normal pointing toward the plus side."""
    q = np.asarray(q, dtype=float)
    gx, gy = ls.grad(q[..., 0], q[..., 1])
    norm = np.hypot(gx, gy)
    if np.any(~(norm >= 1e-14)):
        raise DegenerateGradient("level-set gradient vanishes")
    return np.stack([gx / norm, gy / norm], axis=-1)


def _lattice_seed(ls: LevelSet, P: NDArray, n: int = 16) -> NDArray:
    """Nearest zero crossing of phi on a local lattice around each point.

    The lattice half-width starts from the first-order distance estimate and
    grows until the nearest crossing found lies within the lattice's inscribed
    disk, which guarantees the true closest point is inside the box.
    """
    px, py = P[:, 0], P[:, 1]
    phi = ls.eval(px, py)
    gx, gy = ls.grad(px, py)
    gn = np.hypot(gx, gy)
    with np.errstate(divide="ignore", invalid="ignore"):
        est = np.abs(phi) / gn
    est = np.where(np.isfinite(est), est, 0.05)
    half = np.clip(1.5 * est, 1e-6, None)
    seeds = np.full_like(P, np.nan)
    todo = np.arange(len(P))
    t = np.linspace(-1.0, 1.0, n + 1)
    for _ in range(40):
        if todo.size == 0:
            break
        hw = half[todo][:, None, None]
        X = px[todo][:, None, None] + hw * t[None, :, None]
        Y = py[todo][:, None, None] + hw * t[None, None, :]
        F = ls.eval(np.broadcast_to(X, (todo.size, n + 1, n + 1)),
                    np.broadcast_to(Y, (todo.size, n + 1, n + 1)))
        XX = np.broadcast_to(X, F.shape)
        YY = np.broadcast_to(Y, F.shape)
        cand_x, cand_y = [], []
        for sl_a, sl_b in (((slice(None), slice(None, -1), slice(None)),
                            (slice(None), slice(1, None), slice(None))),
                           ((slice(None), slice(None), slice(None, -1)),
                            (slice(None), slice(None), slice(1, None)))):
            fa, fb = F[sl_a], F[sl_b]
            cross = (fa >= 0) != (fb >= 0)
            with np.errstate(divide="ignore", invalid="ignore"):
                s = np.where(cross, fa / (fa - fb), np.nan)
            cand_x.append((XX[sl_a] + s * (XX[sl_b] - XX[sl_a])).reshape(todo.size, -1))
            cand_y.append((YY[sl_a] + s * (YY[sl_b] - YY[sl_a])).reshape(todo.size, -1))
        cx = np.concatenate(cand_x, axis=1)
        cy = np.concatenate(cand_y, axis=1)
        d = np.hypot(cx - px[todo][:, None], cy - py[todo][:, None])
        d = np.where(np.isnan(d), np.inf, d)
        k = np.argmin(d, axis=1)
        dmin = d[np.arange(todo.size), k]
        ok = dmin <= half[todo]
        idx = todo[ok]
        seeds[idx, 0] = cx[ok, k[ok]]
        seeds[idx, 1] = cy[ok, k[ok]]
        grow = todo[~ok]
        half[grow] = np.where(np.isfinite(dmin[~ok]), dmin[~ok] * 1.01, half[grow] * 2.0)
        todo = grow
    if todo.size:
        raise NonConvergence("no interface found near the query point")
    return seeds


def _closest_on_disk_union(ls: LevelSet, P: NDArray, phi_tol: float) -> NDArray:
    # The zero set is a union of circle arcs: project radially onto every
    # circle and keep the nearest projection lying on the interface.
    r = ls.params[0]
    cs = np.asarray(ls.params[1:]).reshape(-1, 2)
    best = np.full_like(P, np.nan)
    best_d = np.full(len(P), np.inf)
    for c in cs:
        v = P - c
        n = np.hypot(v[:, 0], v[:, 1])
        if np.any(n < 1e-14):
            raise DegenerateGradient("projection from a circle center")
        q = c + r * v / n[:, None]
        on = ls.eval(q[:, 0], q[:, 1]) <= phi_tol
        d = np.abs(n - r)
        take = on & (d < best_d)
        best[take] = q[take]
        best_d[take] = d[take]
    if np.any(~np.isfinite(best_d)):
        raise NonConvergence("no interface arc reachable from the query point")
    return best


def closest_point(
    ls: LevelSet,
    p: ArrayLike,
    max_iter: int = 50,
    phi_tol: float = 1e-12,
    par_tol: float = 1e-10,
) -> NDArray:
    """Project points onto the interface.

    A zero crossing on a local lattice seeds a damped Newton iteration on
    ``phi(q) = 0`` and ``(p - q) x grad phi(q) = 0``.  ``p`` may be a single
    point or an ``(n, 2)`` array.

    Raises:
        NonConvergence: if Newton exceeds ``max_iter`` iterations.
    """
    p = np.asarray(p, dtype=float)
    single = p.ndim == 1
    P = np.atleast_2d(p).astype(float)
    if ls.kind == "tricircle":
        out = _closest_on_disk_union(ls, P, phi_tol)
        return out[0] if single else out
    px, py = P[:, 0], P[:, 1]
    seed = _lattice_seed(ls, P)
    qx, qy = seed[:, 0].copy(), seed[:, 1].copy()

    def residual(qx, qy):
        f1 = ls.eval(qx, qy)
        gx, gy = ls.grad(qx, qy)
        gn = np.hypot(gx, gy)
        f2 = ((px - qx) * gy - (py - qy) * gx) / gn
        return f1, f2, gx, gy, gn

    def converged(f1, f2, qx, qy):
        dist = np.hypot(px - qx, py - qy)
        # below 1e-5 the tangential offset is judged absolutely (round-off floor)
        par = np.abs(f2) <= par_tol * np.maximum(dist, 1e-5)
        return (np.abs(f1) <= phi_tol) & par

    f1, f2, gx, gy, gn = residual(qx, qy)
    for _ in range(max_iter):
        done = converged(f1, f2, qx, qy)
        if np.all(done):
            break
        hxx, hxy, hyy = ls.hessian(qx, qy)
        # gradient norm in f2 is frozen in the Jacobian (quasi-Newton)
        ex, ey = px - qx, py - qy
        j21 = (-gy + ex * hxy - ey * hxx) / gn
        j22 = (gx + ex * hyy - ey * hxy) / gn
        det = gx * j22 - gy * j21
        det = np.where(np.abs(det) < 1e-300, 1e-300, det)
        dqx = np.where(done, 0.0, -(j22 * f1 - gy * f2) / det)
        dqy = np.where(done, 0.0, -(-j21 * f1 + gx * f2) / det)
        merit = (f1 / gn) ** 2 + f2 * f2
        lam = np.ones_like(qx)
        for _ in range(30):
            nx, ny = qx + lam * dqx, qy + lam * dqy
            n1, n2, ngx, ngy, ngn = residual(nx, ny)
            bad = ((n1 / ngn) ** 2 + n2 * n2 > merit) & ~done & (lam > 1e-6)
            if not np.any(bad):
                break
            lam = np.where(bad, 0.5 * lam, lam)
        qx, qy = nx, ny
        f1, f2, gx, gy, gn = n1, n2, ngx, ngy, ngn
    else:
        if not np.all(converged(f1, f2, qx, qy)):
            raise NonConvergence("closest-point projection did not converge")
    out = np.stack([qx, qy], axis=-1)
    return out[0] if single else out


@dataclass(frozen=True)
class InterfaceSegment:
    """A piece of the interface with its quadrature rule.

    ``points``, ``weights`` and ``normals`` have ``n_q`` rows; the weights are
    arclength weights so that ``weights.sum()`` is the segment's arc length.
    """

    endpoints: NDArray
    points: NDArray
    weights: NDArray
    normals: NDArray

    @property
    def length(self) -> float:
        return float(self.weights.sum())


def _refine_on_edge(ls, x0, y0, x1, y1):
    """Locate the zero of phi on the straight edge between two points."""
    f = lambda s: float(ls.eval(x0 + s * (x1 - x0), y0 + s * (y1 - y0)))  # noqa: E731
    fa, fb = f(0.0), f(1.0)
    if fa == 0.0:
        s = 0.0
    elif fb == 0.0:
        s = 1.0
    elif fa * fb > 0:
        s = 0.5
    else:
        s = brentq(f, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return x0 + s * (x1 - x0), y0 + s * (y1 - y0)


def _split_polyline(poly: NDArray, sagitta: float, max_vertices: int, max_len: float = np.inf) -> list[int]:
    """Greedy split of a polyline into short chords whose vertices stay close to them."""
    cuts = [0]
    n = len(poly)
    i = 0
    while i < n - 1:
        j = min(n - 1, i + max_vertices)
        while j > i + 1:
            a, b = poly[i], poly[j]
            d = b - a
            L = math.hypot(d[0], d[1])
            mid = poly[i + 1 : j]
            dev = np.abs((mid[:, 0] - a[0]) * d[1] - (mid[:, 1] - a[1]) * d[0]) / max(L, 1e-300)
            if dev.max() <= sagitta * L and L <= max_len:
                break
            j -= 1
        cuts.append(j)
        i = j
    return cuts


def _project_along(ls, ax, ay, nux, nuy, max_iter=60):
    """Solve phi(a + g*nu) = 0 for g by Newton, starting from g = 0."""
    g = np.zeros_like(ax)
    for _ in range(max_iter):
        x, y = ax + g * nux, ay + g * nuy
        f = ls.eval(x, y)
        gx, gy = ls.grad(x, y)
        df = gx * nux + gy * nuy
        if np.all(np.abs(f) <= 1e-14):
            return g
        step = f / np.where(np.abs(df) < 1e-300, 1e-300, df)
        g = g - step
    x, y = ax + g * nux, ay + g * nuy
    if np.any(np.abs(ls.eval(x, y)) > 1e-11):
        raise NonConvergence("interface quadrature point projection failed")
    return g


def interface_segments(
    ls: LevelSet,
    center: ArrayLike,
    length: float,
    n_q: int = 4,
    subgrid: int = 32,
    sagitta: float = 0.02,
    max_chord: float = math.inf,
) -> list[InterfaceSegment]:
    """Quadrature segments for the part of the interface inside a square.

    The square has side ``length`` and the given ``center``.  The level set is
    sampled on a ``subgrid x subgrid`` lattice of cells, the zero contour is
    traced by marching squares, and the resulting polylines are cut into
    nearly straight chords no longer than ``max_chord * length``.  Each chord
    carries ``n_q`` Gauss points moved onto the interface along the chord
    normal; weights include the arclength stretch so the rule integrates over
    the true curve.
    """
    cx, cy = (float(v) for v in center)
    half = 0.5 * length
    xs = np.linspace(cx - half, cx + half, subgrid + 1)
    ys = np.linspace(cy - half, cy + half, subgrid + 1)
    F = ls.eval(xs[:, None], ys[None, :])
    if F.min() > 0 or F.max() < 0:
        raise EmptyIntersection("interface does not cross the patch")
    contours = find_contours(F, 0.0)
    if not contours:
        raise EmptyIntersection("interface does not cross the patch")
    hs = length / subgrid
    s_nodes, s_weights = gauss_unit(n_q)
    segments: list[InterfaceSegment] = []
    last = float(subgrid)
    for c in contours:
        if len(c) < 2:
            continue
        pts = np.column_stack([cx - half + c[:, 0] * hs, cy - half + c[:, 1] * hs])
        closed = np.allclose(c[0], c[-1])
        # Move vertices onto the interface: border endpoints along the border,
        # the rest by closest-point projection.
        on_border = np.zeros(len(c), dtype=bool)
        if not closed:
            for k in (0, len(c) - 1):
                r, s = c[k]
                if r <= 1e-12 or r >= last - 1e-12:
                    edge = (r, math.floor(s), r, min(math.floor(s) + 1, subgrid))
                elif s <= 1e-12 or s >= last - 1e-12:
                    edge = (math.floor(r), s, min(math.floor(r) + 1, subgrid), s)
                else:
                    continue
                on_border[k] = True
                r0, s0, r1, s1 = edge
                if r0 == r1 and s0 == s1:
                    continue
                pts[k] = _refine_on_edge(
                    ls,
                    cx - half + r0 * hs, cy - half + s0 * hs,
                    cx - half + r1 * hs, cy - half + s1 * hs,
                )
        cuts = _split_polyline(pts, sagitta, max_vertices=subgrid, max_len=max_chord * length)
        ends = pts[cuts].copy()
        inner = [k for k, idx in enumerate(cuts) if not on_border[idx]]
        if inner:
            ends[inner] = closest_point(ls, ends[inner])
        for a, b in zip(ends[:-1], ends[1:]):
            d = b - a
            L = math.hypot(d[0], d[1])
            if L < 1e-14 * length:
                continue
            nu = np.array([-d[1], d[0]]) / L
            base = a[None, :] + s_nodes[:, None] * d[None, :]
            g = _project_along(ls, base[:, 0], base[:, 1], np.full(n_q, nu[0]), np.full(n_q, nu[1]))
            q = base + g[:, None] * nu[None, :]
            gx, gy = ls.grad(q[:, 0], q[:, 1])
            dg = -(gx * d[0] + gy * d[1]) / (gx * nu[0] + gy * nu[1])
            w = s_weights * np.sqrt(L * L + dg * dg)
            segments.append(
                InterfaceSegment(
                    endpoints=np.array([a, b]),
                    points=q,
                    weights=w,
                    normals=unit_normal(ls, q),
                )
            )
    if not segments:
        raise EmptyIntersection("interface does not cross the patch")
    return segments

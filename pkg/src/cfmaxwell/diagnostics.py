"""Error norms, convergence orders, discrete divergence and the mode symbol.

The symbol check concerns the homogeneous system satisfied by corrections:
for a Fourier mode ``exp(i k.x)`` it becomes ``dU/dt = A U`` with the 6x6
matrix ``A`` below, and perturbations cannot grow when no eigenvalue of ``A``
has a positive real part.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DegenerateData, MissingCorrection
from .grid import DIV_STENCILS, FAMILIES, FieldSet, GridSpec, centered_diff


def discrete_div(fields: FieldSet, spec: GridSpec, order: int, table=None, dvals: NDArray | None = None) -> NDArray:
    """Corner-centred divergence of ``(Hx, Hy)`` of the given order.

    With a correction ``table`` and per-patch values ``dvals``, H nodes read
    across the interface from a corner are corrected the same way the scheme
    corrects its samples.
    """
    st_x, st_y = DIV_STENCILS
    div = centered_diff(fields.Hx, spec.dx, 0, st_x.kind, order) + centered_diff(fields.Hy, spec.dy, 1, st_y.kind, order)
    if dvals is None:
        return div
    if table is None or st_x.name not in table.K:
        raise MissingCorrection("corrected divergence needs divergence links in the table")
    for st in (st_x, st_y):
        div = div + (table.K[st.name] @ dvals).reshape(spec.shape)
    return div


def norms(e: ArrayLike, spec: GridSpec) -> tuple[float, float]:
    """``(L_inf, L_1)`` of a nodal array; L_1 weights every node by ``dx dy``."""
    a = np.abs(np.asarray(e, dtype=float))
    return float(a.max(initial=0.0)), float(np.sum(a) * spec.dx * spec.dy)


def error_norms(fields: FieldSet, problem, spec: GridSpec, t: float) -> dict[str, tuple[float, float]]:
    """Per-component ``(L_inf, L_1)`` error against the problem's exact fields."""
    out = {}
    for comp, fam in enumerate(FAMILIES):
        X, Y = spec.coords(fam)
        ex = problem.exact(X, Y, t)[comp]
        out[fam] = norms(fields[fam] - ex, spec)
    return out


def convergence_order(h_list: ArrayLike, errors: ArrayLike) -> tuple[float, NDArray]:
    """Least-squares slope of ``log e`` against ``log h`` and pairwise orders."""
    h = np.asarray(h_list, dtype=float)
    e = np.asarray(errors, dtype=float)
    if h.size < 2 or h.size != e.size:
        raise DegenerateData("need at least two (h, error) pairs")
    if np.any(e <= 0) or np.any(h <= 0) or not np.all(np.isfinite(e)):
        raise DegenerateData("errors and mesh sizes must be positive and finite")
    lh, le = np.log(h), np.log(e)
    slope = np.polyfit(lh, le, 1)[0]
    pair = np.diff(le) / np.diff(lh)
    return float(slope), pair


COLUMNS = ("Linf_Hx", "L1_Hx", "Linf_Hy", "L1_Hy", "Linf_Ez", "L1_Ez", "Linf_divH", "L1_divH")


@dataclass
class ConvergenceReport:
    """Error table over a decreasing sequence of mesh sizes."""

    h: list[float] = field(default_factory=list)
    dt: list[float] = field(default_factory=list)
    rows: list[dict[str, float]] = field(default_factory=list)

    def add(self, h: float, dt: float, row: dict[str, float]) -> None:
        if self.h and not h < self.h[-1]:
            raise ValueError("mesh sizes must decrease")
        if any(v < 0 for v in row.values() if np.isfinite(v)):
            raise ValueError("errors must be nonnegative")
        self.h.append(h)
        self.dt.append(dt)
        self.rows.append(dict(row))

    def column(self, name: str) -> NDArray:
        return np.array([r.get(name, np.nan) for r in self.rows])

    def order(self, name: str) -> float:
        return convergence_order(self.h, self.column(name))[0]

    def orders(self) -> dict[str, float]:
        out = {}
        for c in COLUMNS:
            try:
                out[c] = self.order(c)
            except DegenerateData:
                out[c] = float("nan")
        return out


def row_from_result(res) -> dict[str, float]:
    e = res.errors
    return {
        "Linf_Hx": e["Hx"][0], "L1_Hx": e["Hx"][1],
        "Linf_Hy": e["Hy"][0], "L1_Hy": e["Hy"][1],
        "Linf_Ez": e["Ez"][0], "L1_Ez": e["Ez"][1],
        "Linf_divH": res.div_linf, "L1_divH": res.div_l1,
    }


# -- symbol ---------------------------------------------------------------

def symbol_matrix(k: ArrayLike, mu: float, eps: float, sigma: float) -> NDArray:
    """Matrix of the homogeneous system for the mode ``exp(i k.x)``.

    Unknowns are ``(H, E)``; ``dH/dt = -(i/mu) k x E`` and
    ``dE/dt = (i/eps) k x H - (sigma/eps) E``.
    """
    k1, k2, k3 = (float(v) for v in k)
    C = np.array([[0.0, -k3, k2], [k3, 0.0, -k1], [-k2, k1, 0.0]])
    A = np.zeros((6, 6), dtype=complex)
    A[:3, 3:] = -1j / mu * C
    A[3:, :3] = 1j / eps * C
    A[3:, 3:] = -sigma / eps * np.eye(3)
    return A


def closed_form_eigenvalues(k: ArrayLike, mu: float, eps: float, sigma: float) -> NDArray:
    """The distinct eigenvalues ``0``, ``-sigma/eps`` and the oscillating pair."""
    kk = float(np.dot(k, k))
    disc = complex(mu * (4 * eps * kk - mu * sigma**2))
    root = np.sqrt(disc)
    lam34 = [(-sigma * mu + 1j * root) / (2 * eps * mu), (-sigma * mu - 1j * root) / (2 * eps * mu)]
    return np.array([0.0, -sigma / eps, *lam34], dtype=complex)


def det_residual(A: NDArray, lam: complex) -> float:
    """``|det(A - lam I)|`` relative to ``prod(1 + |row|)`` for scale."""
    B = A - lam * np.eye(A.shape[0])
    scale = np.prod(1.0 + np.abs(B).sum(axis=1))
    return float(abs(np.linalg.det(B)) / scale)


def growth_check(A: NDArray) -> float:
    """Largest real part in the spectrum of ``A``."""
    return float(np.max(np.linalg.eigvals(A).real))

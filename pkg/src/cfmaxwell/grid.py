"""Periodic staggered TM_z grid: coordinates, storage and side bookkeeping.

Public indices follow the staggered half-integer convention with integer
labels: ``Hx(i, j)`` sits at ``(x_i, y_{j+1/2})``, ``Hy(i, j)`` at
``(x_{i+1/2}, y_j)`` and ``Ez(i, j)`` at ``(x_i, y_j)``, where
``x_i = x_l + (i - 1/2) dx`` and ``x_{i+1/2} = x_l + i dx``.

Arrays are stored zero-based with shape ``(Nx, Ny)`` and first axis ``x``:

=======  ===================================  =====================
family   array entry ``[a, b]`` located at    public index
=======  ===================================  =====================
Hx       ``((a + 1/2) dx, b dy)``             ``(a + 1, b)``
Hy       ``(a dx, (b + 1/2) dy)``             ``(a, b + 1)``
Ez       ``((a + 1/2) dx, (b + 1/2) dy)``     ``(a + 1, b + 1)``
corner   ``(a dx, b dy)``                     ``(a, b)``
=======  ===================================  =====================
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from numpy.typing import NDArray

from .errors import IndexOutOfRange
from .geometry import MINUS, PLUS, LevelSet

FAMILIES = ("Hx", "Hy", "Ez")

# Node offsets from the lower-left corner, in cells.
_SHIFT = {"Hx": (0.5, 0.0), "Hy": (0.0, 0.5), "Ez": (0.5, 0.5), "corner": (0.0, 0.0)}
# public index minus array index
_BASE = {"Hx": (1, 0), "Hy": (0, 1), "Ez": (1, 1), "corner": (0, 0)}

# Stencil weights and offsets (in array index units) for the centred derivative
# of a family sampled along one axis.  "back" stencils straddle the centre from
# below (e.g. Ez sampled at an Hx node along y); "fwd" from above.
WEIGHTS = {2: np.array([-1.0, 1.0]), 4: np.array([1.0, -27.0, 27.0, -1.0]) / 24.0}
OFFSETS = {
    ("back", 2): np.array([-1, 0]),
    ("back", 4): np.array([-2, -1, 0, 1]),
    ("fwd", 2): np.array([0, 1]),
    ("fwd", 4): np.array([-1, 0, 1, 2]),
}


def centered_diff(A: NDArray, spacing: float, axis: int, kind: str, order: int) -> NDArray:
    """Plain periodic centred difference of a stored field along ``axis``."""
    out = np.zeros_like(A, dtype=float)
    for w, o in zip(WEIGHTS[order], OFFSETS[(kind, order)]):
        out += w * np.roll(A, -int(o), axis=axis)
    return out / spacing


@dataclass(frozen=True)
class Stencil:
    """One directional derivative: centre family reads ``source`` along ``axis``."""

    name: str
    center: str
    source: str
    axis: int
    kind: str


# Every derivative taken by the scheme, keyed by name.
SCHEME_STENCILS = (
    Stencil("dy_Ez@Hx", "Hx", "Ez", 1, "back"),
    Stencil("dx_Ez@Hy", "Hy", "Ez", 0, "back"),
    Stencil("dx_Hy@Ez", "Ez", "Hy", 0, "fwd"),
    Stencil("dy_Hx@Ez", "Ez", "Hx", 1, "fwd"),
)
DIV_STENCILS = (
    Stencil("dx_Hx@corner", "corner", "Hx", 0, "back"),
    Stencil("dy_Hy@corner", "corner", "Hy", 1, "back"),
)


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on ``[x_l, x_r] x [y_b, y_t]``."""

    nx: int
    ny: int
    x_l: float = 0.0
    x_r: float = 1.0
    y_b: float = 0.0
    y_t: float = 1.0

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1 or self.x_r <= self.x_l or self.y_t <= self.y_b:
            raise ValueError("degenerate grid")

    @classmethod
    def unit_square(cls, n: int) -> "GridSpec":
        return cls(n, n)

    @property
    def dx(self) -> float:
        return (self.x_r - self.x_l) / self.nx

    @property
    def dy(self) -> float:
        return (self.y_t - self.y_b) / self.ny

    @property
    def h(self) -> float:
        return max(self.dx, self.dy)

    @property
    def lengths(self) -> tuple[float, float]:
        return (self.x_r - self.x_l, self.y_t - self.y_b)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    def spacing(self, axis: int) -> float:
        return self.dx if axis == 0 else self.dy

    def coords(self, family: str) -> tuple[NDArray, NDArray]:
        """Coordinate arrays ``(X, Y)`` of every stored node of ``family``."""
        sx, sy = _SHIFT[family]
        x = self.x_l + (np.arange(self.nx) + sx) * self.dx
        y = self.y_b + (np.arange(self.ny) + sy) * self.dy
        return np.meshgrid(x, y, indexing="ij")

    def array_coords(self, family: str, a, b) -> tuple[NDArray, NDArray]:
        """Coordinates of (possibly out-of-range) array indices, no wrapping."""
        sx, sy = _SHIFT[family]
        return (
            self.x_l + (np.asarray(a) + sx) * self.dx,
            self.y_b + (np.asarray(b) + sy) * self.dy,
        )


def _public_range(spec: GridSpec, family: str) -> tuple[range, range]:
    # integer labels run 1..N, half-integer labels 0..N-1
    bi, bj = _BASE[family]
    return range(bi, spec.nx + bi), range(bj, spec.ny + bj)


def node_coords(spec: GridSpec, family: str, i: int, j: int) -> tuple[float, float]:
    """Coordinates of the node with public index ``(i, j)``."""
    if family not in _BASE:
        raise KeyError(family)
    ri, rj = _public_range(spec, family)
    if i not in ri or j not in rj:
        raise IndexOutOfRange(f"{family}({i}, {j}) outside grid")
    bi, bj = _BASE[family]
    x, y = spec.array_coords(family, i - bi, j - bj)
    return float(x), float(y)


def wrap(spec: GridSpec, family: str, i: int, j: int) -> tuple[int, int]:
    """Periodic image of a public index inside the stored range."""
    bi, bj = _BASE[family]
    return (i - bi) % spec.nx + bi, (j - bj) % spec.ny + bj


def to_array_index(family: str, i: int, j: int) -> tuple[int, int]:
    bi, bj = _BASE[family]
    return i - bi, j - bj


def to_public_index(family: str, a: int, b: int) -> tuple[int, int]:
    bi, bj = _BASE[family]
    return a + bi, b + bj


@dataclass
class FieldSet:
    """Field values on the staggered grid at a single time."""

    Hx: NDArray
    Hy: NDArray
    Ez: NDArray
    t: float = 0.0

    @classmethod
    def zeros(cls, spec: GridSpec, t: float = 0.0) -> "FieldSet":
        return cls(np.zeros(spec.shape), np.zeros(spec.shape), np.zeros(spec.shape), t)

    def __getitem__(self, family: str) -> NDArray:
        return getattr(self, family)

    def copy(self) -> "FieldSet":
        return FieldSet(self.Hx.copy(), self.Hy.copy(), self.Ez.copy(), self.t)

    def items(self) -> Iterator[tuple[str, NDArray]]:
        for f in FAMILIES:
            yield f, getattr(self, f)


@dataclass(frozen=True)
class SampleLink:
    """A stencil of ``stencil`` centred at ``center`` reads ``node`` across Γ.

    ``node`` is the stored array index of the sampled node and ``shift`` the
    number of periods ``(sx, sy)`` separating the stencil's virtual sample
    position from it.
    """

    stencil: str
    center: tuple[int, int]
    offset_index: int
    node: tuple[int, int]
    shift: tuple[int, int]


@dataclass
class SideMasks:
    """Per-node sides and the nodes that some stencil samples across Γ."""

    order: int
    sides: dict[str, NDArray]
    links: dict[str, list[SampleLink]] = field(default_factory=dict)

    def corrected(self, family: str) -> list[tuple[int, int]]:
        """Sorted stored indices of ``family`` nodes needing a correction."""
        out = set()
        for name, lst in self.links.items():
            src = _STENCIL_BY_NAME[name].source
            if src == family:
                out.update(l.node for l in lst)
        return sorted(out)

    def corrected_count(self) -> int:
        return sum(len(self.corrected(f)) for f in FAMILIES)


_STENCIL_BY_NAME = {s.name: s for s in SCHEME_STENCILS + DIV_STENCILS}


def stencil_by_name(name: str) -> Stencil:
    return _STENCIL_BY_NAME[name]


def node_sides(spec: GridSpec, ls: LevelSet, family: str) -> NDArray:
    X, Y = spec.coords(family)
    return np.where(ls.eval(X, Y) >= 0.0, PLUS, MINUS).astype(np.int8)


def find_links(spec: GridSpec, sides: dict[str, NDArray], st: Stencil, order: int) -> list[SampleLink]:
    """All (centre, sample) pairs of one stencil whose sides disagree."""
    offs = OFFSETS[(st.kind, order)]
    n_ax = spec.shape[st.axis]
    c_side = sides[st.center]
    s_side = sides[st.source]
    out = []
    for k, o in enumerate(offs):
        sampled = np.roll(s_side, -o, axis=st.axis)
        bad = np.argwhere(sampled != c_side)
        for a, b in bad:
            c = [int(a), int(b)]
            v = list(c)
            v[st.axis] += int(o)
            node = list(v)
            node[st.axis] %= n_ax
            shift = [0, 0]
            shift[st.axis] = (v[st.axis] - node[st.axis]) // n_ax
            out.append(SampleLink(st.name, (c[0], c[1]), k, (node[0], node[1]), (shift[0], shift[1])))
    out.sort(key=lambda l: (l.center, l.offset_index))
    return out


def classify_nodes(spec: GridSpec, ls: LevelSet, scheme_order: int, divergence: bool = False) -> SideMasks:
    """Sides of every node and the cross-interface samples of the scheme.

    With ``divergence`` the corner divergence stencils are scanned as well, so
    H nodes read only by the divergence diagnostic get links too.
    """
    if scheme_order not in (2, 4):
        raise ValueError("scheme order must be 2 or 4")
    sides = {f: node_sides(spec, ls, f) for f in FAMILIES + ("corner",)}
    stencils = SCHEME_STENCILS + (DIV_STENCILS if divergence else ())
    links = {st.name: find_links(spec, sides, st, scheme_order) for st in stencils}
    return SideMasks(scheme_order, sides, links)

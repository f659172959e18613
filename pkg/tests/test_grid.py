import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cfmaxwell.errors import IndexOutOfRange
from cfmaxwell.geometry import LevelSet, side_of
from cfmaxwell.grid import (
    FAMILIES,
    SCHEME_STENCILS,
    FieldSet,
    GridSpec,
    centered_diff,
    classify_nodes,
    node_coords,
    to_array_index,
    to_public_index,
    wrap,
)

G20 = GridSpec.unit_square(20)
CIRCLE = LevelSet.circle(0.5, 0.5, 0.25)


def test_node_coords_examples():
    assert node_coords(G20, "Hx", 1, 0) == pytest.approx((0.025, 0.0))
    assert node_coords(G20, "Ez", 1, 1) == pytest.approx((0.025, 0.025))
    assert node_coords(G20, "Hy", 0, 1) == pytest.approx((0.0, 0.025))


@pytest.mark.parametrize("fam,i,j", [("Ez", 0, 1), ("Hx", 1, 20), ("Hy", 20, 1), ("Ez", 21, 3)])
def test_node_coords_out_of_range(fam, i, j):
    with pytest.raises(IndexOutOfRange):
        node_coords(G20, fam, i, j)


def test_wrap_examples():
    assert wrap(G20, "Ez", 21, 5) == (1, 5)
    assert wrap(G20, "Hx", 3, -1) == (3, 19)
    assert wrap(G20, "Hy", 7, 9) == (7, 9)


@given(
    st.sampled_from(FAMILIES),
    st.integers(-60, 60),
    st.integers(-60, 60),
    st.integers(3, 17),
    st.integers(3, 17),
)
def test_wrap_shifts_by_whole_periods(fam, i, j, nx, ny):
    spec = GridSpec(nx, ny, -1.0, 2.0, 0.5, 1.5)
    wi, wj = wrap(spec, fam, i, j)
    x, y = node_coords(spec, fam, wi, wj)
    a, b = to_array_index(fam, i, j)
    xr, yr = spec.array_coords(fam, a, b)
    Lx, Ly = spec.lengths
    kx = (xr - x) / Lx
    ky = (yr - y) / Ly
    assert abs(kx - round(kx)) < 1e-9 and abs(ky - round(ky)) < 1e-9


def test_index_maps_round_trip():
    for fam in FAMILIES:
        assert to_array_index(fam, *to_public_index(fam, 4, 7)) == (4, 7)


def test_fieldset_shapes_and_copy():
    fs = FieldSet.zeros(GridSpec(4, 6))
    for _, a in fs.items():
        assert a.shape == (4, 6)
    c = fs.copy()
    c.Hx[0, 0] = 1.0
    assert fs.Hx[0, 0] == 0.0


def test_gridspec_rejects_degenerate():
    with pytest.raises(ValueError):
        GridSpec(0, 4)


def test_classify_interface_outside_domain_is_empty():
    m = classify_nodes(G20, LevelSet.plane(0.0, 1.0, -10.0), 4)
    assert m.corrected_count() == 0


def _brute_force_corrected(spec, ls, order):
    """Walk every stencil geometrically: samples at centre +- 1/2 (and 3/2) cells."""
    reach = [-0.5, 0.5] if order == 2 else [-1.5, -0.5, 0.5, 1.5]
    out = {f: set() for f in FAMILIES}
    src_shift = {"Hx": (0.5, 0.0), "Hy": (0.0, 0.5), "Ez": (0.5, 0.5)}
    for st_ in SCHEME_STENCILS:
        X, Y = spec.coords(st_.center)
        for a in range(spec.nx):
            for b in range(spec.ny):
                c_side = side_of(ls, (X[a, b], Y[a, b]))
                for r in reach:
                    p = [X[a, b], Y[a, b]]
                    p[st_.axis] += r * spec.spacing(st_.axis)
                    if side_of(ls, p) == c_side:
                        continue
                    sx, sy = src_shift[st_.source]
                    ia = int(round(p[0] / spec.dx - sx)) % spec.nx
                    ib = int(round(p[1] / spec.dy - sy)) % spec.ny
                    out[st_.source].add((ia, ib))
    return out


@pytest.mark.parametrize("order", [2, 4])
def test_corrected_nodes_match_exhaustive_scan(order):
    m = classify_nodes(G20, CIRCLE, order)
    brute = _brute_force_corrected(G20, CIRCLE, order)
    for f in FAMILIES:
        assert set(m.corrected(f)) == brute[f]
    assert m.corrected_count() == sum(len(v) for v in brute.values())


@pytest.mark.parametrize("n", [20, 33])
def test_order4_corrected_contains_order2(n):
    spec = GridSpec.unit_square(n)
    ls = LevelSet.star(5, 0.5, 0.5, 0.25, 0.05)
    m2 = classify_nodes(spec, ls, 2)
    m4 = classify_nodes(spec, ls, 4)
    for f in FAMILIES:
        assert set(m2.corrected(f)) <= set(m4.corrected(f))


def test_corrected_nodes_near_interface():
    m = classify_nodes(G20, CIRCLE, 4)
    for f in FAMILIES:
        X, Y = G20.coords(f)
        for a, b in m.corrected(f):
            d = abs(np.hypot(X[a, b] - 0.5, Y[a, b] - 0.5) - 0.25)
            assert d <= 3 * G20.h * np.sqrt(2)


def test_sides_agree_with_side_of():
    m = classify_nodes(G20, CIRCLE, 2)
    for f in FAMILIES:
        X, Y = G20.coords(f)
        np.testing.assert_array_equal(m.sides[f], side_of(CIRCLE, np.stack([X, Y], -1)))


def test_centered_diff_exact_on_cubic_periodic_free_part():
    # derivative of a trigonometric field converges at the stencil order
    errs = {2: [], 4: []}
    for n in (16, 32):
        spec = GridSpec.unit_square(n)
        X, Y = spec.coords("Ez")
        A = np.sin(2 * np.pi * X) * np.cos(2 * np.pi * Y)
        # Ez read along x at Hy nodes (x = a dx)
        Xh, Yh = spec.coords("Hy")
        exact = 2 * np.pi * np.cos(2 * np.pi * Xh) * np.cos(2 * np.pi * Yh)
        for order in (2, 4):
            d = centered_diff(A, spec.dx, 0, "back", order)
            errs[order].append(np.abs(d - exact).max())
    assert np.log2(errs[2][0] / errs[2][1]) == pytest.approx(2.0, abs=0.1)
    assert np.log2(errs[4][0] / errs[4][1]) == pytest.approx(4.0, abs=0.1)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.interpolate import RegularGridInterpolator

from fittedpg.convergence import solve_on_shishkin
from fittedpg.mesh import shishkin_mesh
from fittedpg.problem import example1, example2
from fittedpg.solution import (
    GridFunction,
    export_grid,
    export_slice,
    read_grid,
    sup_diff,
)


def random_gf(seed, n=8, m=None, eps=2.0**-5):
    rng = np.random.default_rng(seed)
    mesh = shishkin_mesh(eps, 2.0, n, m)
    return GridFunction(mesh, rng.standard_normal(mesh.shape))


def from_function(mesh, fn):
    X, Y = np.meshgrid(mesh.x, mesh.y, indexing="ij")
    return GridFunction(mesh, fn(X, Y))


def test_eval_at_nodes_is_exact():
    gf = random_gf(1, 16, 8)
    X, Y = np.meshgrid(gf.mesh.x, gf.mesh.y, indexing="ij")
    np.testing.assert_array_equal(gf.eval(X, Y), gf.values)
    assert isinstance(gf.eval(gf.mesh.x[3], gf.mesh.y[2]), float)


def test_bilinear_functions_reproduced():
    def fn(x, y):
        return 1.5 - 2 * x + 0.7 * y + 3 * x * y

    gf = from_function(shishkin_mesh(2.0**-7, 2.0, 16), fn)
    rng = np.random.default_rng(2)
    x, y = rng.random(500), rng.random(500)
    np.testing.assert_allclose(gf.eval(x, y), fn(x, y), rtol=0, atol=1e-13)


def test_cell_centre_is_corner_average():
    gf = random_gf(3, 8, eps=1.0)  # uniform square cells
    m = gf.mesh
    xc = (m.x[2] + m.x[3]) / 2
    yc = (m.y[5] + m.y[6]) / 2
    U = gf.values
    assert gf.eval(xc, yc) == pytest.approx(U[2:4, 5:7].mean(), abs=1e-15)


def test_eval_continuous_across_edges():
    gf = random_gf(4, 16)
    x = gf.mesh.x[5]
    ys = np.linspace(0, 1, 37)
    left = gf.eval(np.nextafter(x, 0) * np.ones_like(ys), ys)
    right = gf.eval(np.nextafter(x, 1) * np.ones_like(ys), ys)
    np.testing.assert_allclose(left, right, atol=1e-10)


def test_eval_rejects_outside_points():
    gf = random_gf(5)
    with pytest.raises(ValueError):
        gf.eval(1.1, 0.5)
    with pytest.raises(ValueError):
        gf.eval(0.5, -0.1)
    with pytest.raises(ValueError):
        gf.eval(np.nan, 0.5)


def test_shape_mismatch_rejected():
    mesh = shishkin_mesh(0.1, 2.0, 8)
    with pytest.raises(ValueError):
        GridFunction(mesh, np.zeros((8, 8)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0, 1), st.floats(0, 1))
def test_interpolant_maximum_principle(seed, x, y):
    gf = random_gf(seed)
    v = gf.eval(x, y)
    assert gf.values.min() - 1e-15 <= v <= gf.values.max() + 1e-15


def test_sup_diff_trivial_cases():
    g = random_gf(6, 16)
    assert sup_diff(g, g) == 0.0
    h = GridFunction(g.mesh, g.values + np.random.default_rng(7).standard_normal(g.mesh.shape))
    assert sup_diff(g, h) == np.max(np.abs(g.values - h.values))


def _lipschitz(gf):
    U, x, y = gf.values, gf.mesh.x, gf.mesh.y
    lx = np.max(np.abs(np.diff(U, axis=0)) / np.diff(x)[:, None])
    ly = np.max(np.abs(np.diff(U, axis=1)) / np.diff(y)[None, :])
    return lx, ly


def _dense_max(a, b, n):
    s = np.linspace(0, 1, n)
    ia = RegularGridInterpolator((a.mesh.x, a.mesh.y), a.values)
    ib = RegularGridInterpolator((b.mesh.x, b.mesh.y), b.values)
    X, Y = np.meshgrid(s, s, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    return np.max(np.abs(ia(pts) - ib(pts))), s[1] - s[0]


def test_sup_diff_dense_sampling_oracle():
    p = example2()
    eps = 2.0**-6
    a = solve_on_shishkin(p, "fitted", eps, 8)
    b = solve_on_shishkin(p, "fitted", eps, 16)
    assert a.mesh.xmesh.transition != b.mesh.xmesh.transition
    exact = sup_diff(a, b)
    dense, step = _dense_max(a, b, 2049)
    lx = sum(_lipschitz(g)[0] for g in (a, b))
    ly = sum(_lipschitz(g)[1] for g in (a, b))
    bias = (lx + ly) * step / 2
    assert dense <= exact + 1e-12
    assert exact <= dense + bias + 1e-12


def test_sup_diff_random_pairs_against_sampling():
    rng = np.random.default_rng(11)
    for t in range(50):
        n1, n2 = rng.choice([8, 16], size=2)
        k1, k2 = rng.integers(0, 12, size=2)
        a = random_gf(int(rng.integers(1 << 30)), int(n1), eps=2.0**-int(k1))
        b = random_gf(int(rng.integers(1 << 30)), int(n2), eps=2.0**-int(k2))
        exact = sup_diff(a, b)
        dense, step = _dense_max(a, b, 257)
        lx = sum(_lipschitz(g)[0] for g in (a, b))
        ly = sum(_lipschitz(g)[1] for g in (a, b))
        assert dense <= exact + 1e-12
        assert exact <= dense + (lx + ly) * step / 2 + 1e-12


def test_grid_round_trip(tmp_path):
    gf = solve_on_shishkin(example1(), "fitted", 2.0**-16, 16)
    path = tmp_path / "g.csv"
    export_grid(gf, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,y,u"
    assert len(lines) == 1 + 17 * 17
    # y-major: the first N+1 rows share y_0
    assert all(row.split(",")[1] == "0.0" for row in lines[1:18])
    back = read_grid(path)
    np.testing.assert_array_equal(back.values, gf.values)
    np.testing.assert_array_equal(back.mesh.x, gf.mesh.x)
    np.testing.assert_array_equal(back.mesh.y, gf.mesh.y)


def test_slice_export(tmp_path):
    gf = solve_on_shishkin(example1(), "fitted", 2.0**-16, 32)
    path = tmp_path / "s.csv"
    export_slice(gf, "y", 0.0, path)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert path.read_text().startswith("coord,u\n")
    assert data.shape == (33, 2)
    assert np.all(data[:, 1] == 0.0)
    coords, vals = gf.slice("x", 0.5)
    assert len(coords) == 33
    with pytest.raises(ValueError):
        gf.slice("z", 0.5)


def test_export_failure_leaves_no_file(tmp_path):
    gf = random_gf(8)
    target = tmp_path / "missing" / "g.csv"
    with pytest.raises(OSError):
        export_grid(gf, target)
    assert not target.exists()

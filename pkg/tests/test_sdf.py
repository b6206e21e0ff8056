import numpy as np
import pytest

from scenemotion.datagen import box_mesh_arrays
from scenemotion.errors import ResourceLimitError
from scenemotion.scene import make_mesh
from scenemotion.sdf import SdfGrid, build_sdf, load_sdf, sample_sdf, sample_sdf_batch, save_sdf


def unit_cube():
    verts, faces = box_mesh_arrays([0.0, 0.0, 0.0], [1.0, 1.0, 1.0])
    return make_mesh(verts, faces)


# independent scalar oracle: exhaustive point-triangle distance + parity sign

def oracle_signed_distance(p, tris):
    best = np.inf
    for a, b, c in tris:
        best = min(best, _oracle_point_tri(p, a, b, c))
    votes = 0
    for axis in range(3):
        cnt = 0
        d = np.zeros(3)
        d[axis] = 1.0
        for a, b, c in tris:
            n = np.cross(b - a, c - a)
            if abs(n[axis]) < 1e-12:
                continue
            s = (n @ a - n @ p) / n[axis]
            if s <= 0:
                continue
            x = p + s * d
            v0, v1, v2 = b - a, c - a, x - a
            d00, d01, d11 = v0 @ v0, v0 @ v1, v1 @ v1
            d20, d21 = v2 @ v0, v2 @ v1
            den = d00 * d11 - d01 * d01
            bv = (d11 * d20 - d01 * d21) / den
            bw = (d00 * d21 - d01 * d20) / den
            if bv >= 0 and bw >= 0 and bv + bw <= 1:
                cnt += 1
        votes += cnt & 1
    return -best if votes >= 2 else best


def _oracle_point_tri(p, a, b, c):
    ab, ac, ap = b - a, c - a, p - a
    d1, d2 = ap @ ab, ap @ ac
    bp, cp = p - b, p - c
    d3, d4 = bp @ ab, bp @ ac
    d5, d6 = cp @ ab, cp @ ac
    if d1 <= 0 and d2 <= 0:
        q = a
    elif d3 >= 0 and d4 <= d3:
        q = b
    elif d6 >= 0 and d5 <= d6:
        q = c
    else:
        vc = d1 * d4 - d3 * d2
        vb = d5 * d2 - d1 * d6
        va = d3 * d6 - d5 * d4
        if vc <= 0 and d1 >= 0 and d3 <= 0:
            q = a + ab * (d1 / (d1 - d3))
        elif vb <= 0 and d2 >= 0 and d6 <= 0:
            q = a + ac * (d2 / (d2 - d6))
        elif va <= 0 and (d4 - d3) >= 0 and (d5 - d6) >= 0:
            q = b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)))
        else:
            den = va + vb + vc
            q = a + ab * (vb / den) + ac * (vc / den)
    return float(np.linalg.norm(p - q))


def test_cube_center_and_outside_nodes():
    grid = build_sdf(unit_cube(), cell=0.25, padding=1.0)
    val, _ = sample_sdf(grid, [0.0, 0.0, 0.0])
    assert abs(val - (-0.5)) <= 0.25 + 1e-9
    val, _ = sample_sdf(grid, [1.0, 0.0, 0.0])
    assert abs(val - 0.5) <= 0.25 + 1e-9


def test_grid_matches_bruteforce_oracle_on_random_boxes():
    rng = np.random.default_rng(11)
    verts, faces = [], []
    for _ in range(3):
        c = rng.uniform(-1.5, 1.5, 3)
        c[2] = abs(c[2]) + 0.2
        sz = rng.uniform(0.3, 1.0, 3)
        v, f = box_mesh_arrays(c, sz)
        faces.extend((np.asarray(f) + len(verts)).tolist())
        verts.extend(v.tolist())
    mesh = make_mesh(np.array(verts), np.array(faces))
    grid = build_sdf(mesh, cell=0.33, padding=0.7)
    tris = mesh.vertices[mesh.faces]
    xs, ys, zs = grid.node_positions()
    for _ in range(200):
        i = rng.integers(0, len(xs))
        j = rng.integers(0, len(ys))
        k = rng.integers(0, len(zs))
        p = np.array([xs[i], ys[j], zs[k]])
        assert abs(oracle_signed_distance(p, tris) - grid.values[i, j, k]) < 1e-6


def test_node_exact_sampling():
    grid = build_sdf(unit_cube(), cell=0.25, padding=0.75)
    xs, ys, zs = grid.node_positions()
    val, _ = sample_sdf(grid, [xs[3], ys[4], zs[5]])
    assert val == grid.values[3, 4, 5]


def test_trilinear_gradient_matches_fd():
    grid = build_sdf(unit_cube(), cell=0.25, padding=1.0)
    rng = np.random.default_rng(3)
    checked = 0
    while checked < 60:
        p = rng.uniform(-1.2, 1.2, 3)
        # stay away from cell boundaries so the FD stencil sees one cell
        local = (p - grid.origin) / grid.cell
        frac = local - np.floor(local)
        if np.any(frac < 0.01) or np.any(frac > 0.99):
            continue
        _, grad = sample_sdf(grid, p)
        h = 1e-5
        for i in range(3):
            pp, pm = p.copy(), p.copy()
            pp[i] += h
            pm[i] -= h
            fd = (sample_sdf(grid, pp)[0] - sample_sdf(grid, pm)[0]) / (2 * h)
            assert abs(grad[i] - fd) < 1e-4
        checked += 1


def test_continuity_across_cell_faces():
    grid = build_sdf(unit_cube(), cell=0.25, padding=1.0)
    xs, ys, zs = grid.node_positions()
    rng = np.random.default_rng(5)
    for _ in range(50):
        # approach a shared x-face from both sides
        x = xs[rng.integers(1, len(xs) - 1)]
        y = rng.uniform(ys[0], ys[-1])
        z = rng.uniform(zs[0], zs[-1])
        lo, _ = sample_sdf(grid, [x - 1e-10, y, z])
        hi, _ = sample_sdf(grid, [x + 1e-10, y, z])
        assert abs(lo - hi) < 1e-9


def test_outside_grid_clamped_plus_distance():
    grid = build_sdf(unit_cube(), cell=0.25, padding=0.5)
    hi = grid.upper
    outside = np.array([hi[0] + 2.0, 0.1, 0.2])
    val, grad = sample_sdf(grid, outside)
    boundary, _ = sample_sdf(grid, [hi[0], 0.1, 0.2])
    assert val == pytest.approx(boundary + 2.0, abs=1e-12)
    assert grad[0] == pytest.approx(1.0, abs=1e-12)  # unit component away from the box
    assert val > 0
    # diagonal exit: gradient points away from the box on every outside axis
    diag = hi + np.array([1.0, 2.0, 3.0])
    val_d, grad_d = sample_sdf(grid, diag)
    away = (diag - hi) / np.linalg.norm(diag - hi)
    np.testing.assert_allclose(grad_d, away, atol=1e-12)
    assert val_d > 0


def test_lipschitz_validation():
    grid = build_sdf(unit_cube(), cell=0.2, padding=0.6)
    assert grid.check_lipschitz()
    bad = SdfGrid(origin=np.zeros(3), cell=0.1,
                  values=np.array([[[0.0, 1.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]))
    with pytest.raises(ValueError):
        bad.check_lipschitz()


def test_node_budget_enforced():
    with pytest.raises(ResourceLimitError):
        build_sdf(unit_cube(), cell=0.001, padding=1.0, node_budget=1000)


def test_cache_round_trip(tmp_path):
    grid = build_sdf(unit_cube(), cell=0.25, padding=0.5)
    path = tmp_path / "cube.sdf"
    save_sdf(path, grid)
    loaded = load_sdf(path)
    assert loaded.dims == grid.dims
    assert loaded.cell == grid.cell
    np.testing.assert_allclose(loaded.origin, grid.origin)
    # cache stores float32 values
    np.testing.assert_allclose(loaded.values, grid.values, atol=1e-6)


def test_batch_matches_scalar():
    grid = build_sdf(unit_cube(), cell=0.25, padding=0.5)
    rng = np.random.default_rng(8)
    pts = rng.uniform(-1.5, 1.5, size=(40, 3))
    vals, grads = sample_sdf_batch(grid, pts)
    for p, v, g in zip(pts, vals, grads):
        v1, g1 = sample_sdf(grid, p)
        assert v == v1
        assert np.array_equal(g, g1)

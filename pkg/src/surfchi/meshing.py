"""Marching tetrahedra on a uniform grid, plus the implicit fixtures."""

from __future__ import annotations

import itertools

import numpy as np

from .errors import ParameterError, TopologyError
from .geometry import ImplicitSurface, TriangleMesh

# Kuhn decomposition: every tet runs 0 -> e_a -> e_a + e_b -> (1,1,1) along an
# axis permutation, so neighbouring cubes agree on their shared face diagonals.
_CORNERS = np.array([[i, j, k] for i in (0, 1) for j in (0, 1) for k in (0, 1)])


def _kuhn_tets():
    tets = []
    for perm in itertools.permutations(range(3)):
        p = np.zeros(3, int)
        chain = [p.copy()]
        for ax in perm:
            p[ax] = 1
            chain.append(p.copy())
        tets.append([4 * c[0] + 2 * c[1] + c[2] for c in chain])
    return np.array(tets)


_TETS = _kuhn_tets()
_TET_EDGES = np.array([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]])


def _edge_index(a, b):
    for k, (p, q) in enumerate(_TET_EDGES):
        if {p, q} == {a, b}:
            return k
    raise KeyError((a, b))


def _case_table():
    """For each 4-bit positive mask, up to two triangles as local edge ids."""
    table = -np.ones((16, 2, 3), dtype=np.int64)
    for mask in range(1, 15):
        pos = [c for c in range(4) if mask >> c & 1]
        neg = [c for c in range(4) if not mask >> c & 1]
        if len(pos) == 1 or len(neg) == 1:
            lone, rest = (pos[0], neg) if len(pos) == 1 else (neg[0], pos)
            table[mask, 0] = [_edge_index(lone, r) for r in rest]
        else:
            (a, b), (c, d) = pos, neg
            cyc = [_edge_index(a, c), _edge_index(a, d), _edge_index(b, d), _edge_index(b, c)]
            table[mask, 0] = [cyc[0], cyc[1], cyc[2]]
            table[mask, 1] = [cyc[0], cyc[2], cyc[3]]
    return table


_CASES = _case_table()


def mesh_implicit(surface: ImplicitSurface, resolution, project: int = 4) -> TriangleMesh:
    """Extract {f = 0} as a closed mesh whose normals follow grad f.

    `resolution` is the number of cells per axis (int or triple). Vertices are
    placed by linear interpolation and then pulled onto the level set with a
    few clamped Newton steps.
    """
    res = np.broadcast_to(np.asarray(resolution, dtype=np.int64), (3,))
    if np.any(res < 16):
        raise ParameterError(f"resolution must be >= 16 cells per axis, got {resolution!r}")
    lo, hi = (np.asarray(b, float) for b in surface.bbox)
    if np.any(hi <= lo):
        raise ParameterError("bounding box must have hi > lo on every axis")
    axes = [np.linspace(lo[d], hi[d], res[d] + 1) for d in range(3)]
    h = (hi - lo) / res
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    vals = np.asarray(surface.field(nodes), float)

    shape = tuple(res + 1)
    vgrid = vals.reshape(shape)
    boundary = np.zeros(shape, dtype=bool)
    boundary[[0, -1], :, :] = True
    boundary[:, [0, -1], :] = True
    boundary[:, :, [0, -1]] = True
    if np.any(vgrid[boundary] <= 0):
        raise TopologyError(
            "zero set touches the bounding box: the extracted surface would be open; "
            "enlarge the box or refine the grid"
        )

    # keep interpolated vertices a few percent of a cell away from grid nodes;
    # nodes this close to the level set are pushed to the outside
    near = np.abs(vals) < 0.2 * float(np.max(np.abs(vals)))
    idx = np.flatnonzero(near)
    gnorm = np.linalg.norm(np.asarray(surface.gradient(nodes[idx]), float), axis=1)
    tau = 0.05 * float(h.min()) * gnorm
    small = np.abs(vals[idx]) < tau
    vals = vals.copy()
    vals[idx[small]] = np.maximum(tau[small], 1e-300)
    vgrid = vals.reshape(shape)

    # cubes whose corners change sign
    nx, ny, nz = res
    corner_vals = np.stack(
        [vgrid[i:i + nx, j:j + ny, k:k + nz] for i, j, k in _CORNERS], axis=-1
    )
    active = np.argwhere((corner_vals.min(axis=-1) < 0) & (corner_vals.max(axis=-1) > 0))
    if len(active) == 0:
        raise TopologyError("no sign change inside the bounding box")
    strides = np.array([shape[1] * shape[2], shape[2], 1])
    base = active @ strides
    corner_ids = base[:, None] + _CORNERS @ strides  # (C, 8)
    tet_ids = corner_ids[:, _TETS].reshape(-1, 4)  # (6C, 4)
    tv = vals[tet_ids]
    mask = ((tv > 0) * (1 << np.arange(4))).sum(axis=1)
    keep = (mask > 0) & (mask < 15)
    tet_ids, tv, mask = tet_ids[keep], tv[keep], mask[keep]

    tris_local = _CASES[mask]  # (T, 2, 3)
    has = tris_local[:, :, 0] >= 0
    t_idx, s_idx = np.nonzero(has)
    local = tris_local[t_idx, s_idx]  # (K, 3) local edge ids
    ends = _TET_EDGES[local]  # (K, 3, 2)
    gids = np.take_along_axis(tet_ids[t_idx][:, None, :].repeat(3, 1), ends, axis=2)
    gvals = np.take_along_axis(tv[t_idx][:, None, :].repeat(3, 1), ends, axis=2)
    a, b = gids[..., 0], gids[..., 1]
    fa, fb = gvals[..., 0], gvals[..., 1]
    swap = a > b
    a, b = np.where(swap, b, a), np.where(swap, a, b)
    fa, fb = np.where(swap, fb, fa), np.where(swap, fa, fb)
    keys = a * len(nodes) + b
    uniq, first, inv = np.unique(keys.ravel(), return_index=True, return_inverse=True)
    ea, eb = a.ravel()[first], b.ravel()[first]
    va, vb = fa.ravel()[first], fb.ravel()[first]
    s = va / (va - vb)
    verts = nodes[ea] + s[:, None] * (nodes[eb] - nodes[ea])
    faces = inv.reshape(-1, 3)

    # orient each triangle toward its tet's positive corners
    tet_pts = nodes[tet_ids[t_idx]]
    posw = (tv[t_idx] > 0).astype(float)
    dirn = (tet_pts * posw[..., None]).sum(1) / posw.sum(1)[:, None] - (
        tet_pts * (1 - posw)[..., None]
    ).sum(1) / (1 - posw).sum(1)[:, None]
    p = verts[faces]
    nrm = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    flip = np.einsum("ij,ij->i", nrm, dirn) < 0
    faces[flip] = faces[flip][:, ::-1]

    if project:
        step_cap = 0.5 * float(h.min())
        for _ in range(int(project)):
            fv = np.asarray(surface.field(verts), float)
            g = np.asarray(surface.gradient(verts), float)
            gg = np.einsum("ij,ij->i", g, g)
            step = (fv / np.maximum(gg, 1e-300))[:, None] * g
            sn = np.linalg.norm(step, axis=1)
            scale = np.minimum(1.0, step_cap / np.maximum(sn, 1e-300))
            verts = verts - step * scale[:, None]

    diag = float(np.linalg.norm(hi - lo))
    return TriangleMesh(verts, faces, name=surface.name, eps_area=1e-12 * diag**2)


# --- presets ------------------------------------------------------------------


def sphere_field(radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> ImplicitSurface:
    c = np.asarray(center, float)

    def f(p):
        q = np.asarray(p, float) - c
        return np.einsum("ij,ij->i", q, q) - radius**2

    def grad(p):
        return 2.0 * (np.asarray(p, float) - c)

    def hess(p):
        return np.broadcast_to(2.0 * np.eye(3), (len(np.atleast_2d(p)), 3, 3)).copy()

    r2 = 2.0 * radius
    return ImplicitSurface(f, grad, (tuple(c - r2), tuple(c + r2)), hess, name="sphere")


def torus_field(R: float = 2.0, r: float = 1.0) -> ImplicitSurface:
    if not (R > r > 0):
        raise ParameterError(f"torus needs R > r > 0, got R={R}, r={r}")

    def f(p):
        p = np.asarray(p, float)
        rho = np.hypot(p[:, 0], p[:, 1])
        return (rho - R) ** 2 + p[:, 2] ** 2 - r**2

    def grad(p):
        p = np.asarray(p, float)
        rho = np.maximum(np.hypot(p[:, 0], p[:, 1]), 1e-300)
        k = 2.0 * (rho - R) / rho
        return np.stack([k * p[:, 0], k * p[:, 1], 2.0 * p[:, 2]], axis=1)

    e = R + r + 0.5
    bbox = ((-e, -e, -r - 0.5), (e, e, r + 0.5))
    return ImplicitSurface(f, grad, bbox, None, name="torus")


GENUS2_OFFSET = 0.02


def genus2_field(offset: float = GENUS2_OFFSET) -> ImplicitSurface:
    """Thickened figure-eight curve: (x^2 (1 - x^2) - y^2)^2 + z^2 / 2 - offset."""

    def parts(p):
        p = np.asarray(p, float)
        x, y, z = p[:, 0], p[:, 1], p[:, 2]
        g = x * x - x**4 - y * y
        return x, y, z, g

    def f(p):
        _, _, z, g = parts(p)
        return g * g + 0.5 * z * z - offset

    def grad(p):
        x, y, z, g = parts(p)
        gx = 2 * x - 4 * x**3
        gy = -2 * y
        return np.stack([2 * g * gx, 2 * g * gy, z], axis=1)

    def hess(p):
        x, y, z, g = parts(p)
        gx = 2 * x - 4 * x**3
        gy = -2 * y
        H = np.zeros((len(x), 3, 3))
        H[:, 0, 0] = 2 * gx * gx + 2 * g * (2 - 12 * x * x)
        H[:, 0, 1] = H[:, 1, 0] = 2 * gx * gy
        H[:, 1, 1] = 2 * gy * gy - 4 * g
        H[:, 2, 2] = 1.0
        return H

    bbox = ((-1.5, -1.0, -1.0), (1.5, 1.0, 1.0))
    return ImplicitSurface(f, grad, bbox, hess, name="genus2")


IMPLICIT_PRESETS = {
    "sphere": sphere_field,
    "torus": torus_field,
    "genus2": genus2_field,
}


def implicit_preset(name: str, **params) -> ImplicitSurface:
    try:
        factory = IMPLICIT_PRESETS[name]
    except KeyError:
        raise ParameterError(f"unknown implicit preset '{name}'") from None
    return factory(**params)

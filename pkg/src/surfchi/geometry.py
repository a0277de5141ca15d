"""Closed oriented surfaces in R^3: triangle meshes, parametric charts and
implicit level sets, plus the elementary measurements made on them."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DegenerateChartError, DegenerateFaceError, ParameterError, TopologyError
from .quadrature import axis_rule

TWO_PI = 2.0 * np.pi


def _readonly(a, dtype):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Closed, consistently oriented triangle mesh.

    Construction checks that every undirected edge is shared by exactly two
    faces traversing it in opposite directions and that no face is thinner
    than `eps_area` (default 1e-12 * diagonal**2).
    """

    vertices: np.ndarray
    faces: np.ndarray
    name: str = "mesh"
    eps_area: Optional[float] = None
    validate: bool = True

    def __post_init__(self):
        v = _readonly(self.vertices, np.float64)
        f = _readonly(self.faces, np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ParameterError("vertices must have shape (V, 3)")
        if f.ndim != 2 or f.shape[1] != 3:
            raise ParameterError("faces must have shape (F, 3)")
        if len(f) and (f.min() < 0 or f.max() >= len(v)):
            raise ParameterError("face index out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        if self.eps_area is None:
            object.__setattr__(self, "eps_area", 1e-12 * self.diagonal**2)
        if self.validate:
            self.check()

    def check(self):
        if len(self.faces) == 0:
            raise TopologyError("mesh has no faces")
        small = np.flatnonzero(self.face_areas <= self.eps_area)
        if len(small):
            raise DegenerateFaceError(
                f"{len(small)} face(s) with area <= {self.eps_area:.3g}, first is face {small[0]}"
            )
        f = self.faces
        if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
            raise DegenerateFaceError("face with a repeated vertex index")
        nv = len(self.vertices)
        a = f.ravel()
        b = np.roll(f, -1, axis=1).ravel()
        directed = a * nv + b
        uniq, counts = np.unique(directed, return_counts=True)
        if np.any(counts > 1):
            raise TopologyError(
                "an edge is traversed twice in the same direction "
                "(inconsistent orientation or non-manifold edge)"
            )
        reverse = b * nv + a
        found = np.isin(reverse, uniq, assume_unique=False)
        if not np.all(found):
            k = np.flatnonzero(~found)[0]
            raise TopologyError(
                f"boundary edge ({a[k]}, {b[k]}) found: the surface is not closed"
            )

    # --- derived quantities -------------------------------------------------

    @cached_property
    def diagonal(self) -> float:
        lo, hi = self.vertices.min(axis=0), self.vertices.max(axis=0)
        return float(np.linalg.norm(hi - lo))

    @cached_property
    def face_cross(self) -> np.ndarray:
        p = self.vertices[self.faces]
        return np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])

    @cached_property
    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.face_cross, axis=1)

    @cached_property
    def face_normals(self) -> np.ndarray:
        c = self.face_cross
        return c / np.linalg.norm(c, axis=1)[:, None]

    @cached_property
    def vertex_normals(self) -> np.ndarray:
        n = np.zeros_like(self.vertices)
        for k in range(3):
            np.add.at(n, self.faces[:, k], self.face_cross)
        norm = np.linalg.norm(n, axis=1)
        norm[norm == 0] = 1.0
        return n / norm[:, None]

    @cached_property
    def edges(self) -> np.ndarray:
        e = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    @cached_property
    def used_vertices(self) -> np.ndarray:
        return np.unique(self.faces)

    @cached_property
    def vertex_adjacency(self):
        """Sparse symmetric vertex adjacency matrix."""
        from scipy.sparse import coo_matrix

        e = self.edges
        nv = len(self.vertices)
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        return coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(nv, nv)).tocsr()

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def flipped(self) -> "TriangleMesh":
        return TriangleMesh(self.vertices, self.faces[:, ::-1], name=self.name, eps_area=self.eps_area)

    def translated(self, c) -> "TriangleMesh":
        return TriangleMesh(self.vertices + np.asarray(c, float), self.faces, name=self.name)

    def rotated(self, rot) -> "TriangleMesh":
        return TriangleMesh(self.vertices @ np.asarray(rot, float).T, self.faces, name=self.name)

    def signed_volume(self) -> float:
        p = self.vertices[self.faces]
        return float(np.einsum("ij,ij->i", p[:, 0], np.cross(p[:, 1], p[:, 2])).sum() / 6.0)


@dataclass(frozen=True)
class Chart:
    """One coordinate patch (u, v) -> R^3 with its first and second derivatives.

    `trusted` restricts where critical-point searches accept a solution; it
    keeps Newton iterations away from coordinate singularities (poles).
    """

    point: Callable
    first: Callable
    second: Callable
    domain: tuple
    periodic: tuple
    trusted: Optional[Callable] = None

    def is_trusted(self, u, v):
        if self.trusted is None:
            return np.ones(np.broadcast(u, v).shape, dtype=bool)
        return self.trusted(u, v)


@dataclass(frozen=True)
class ParametricSurface:
    kind: str
    params: tuple
    charts: tuple

    @property
    def name(self):
        return f"{self.kind}{dict(self.params)}"

    @property
    def primary(self) -> Chart:
        return self.charts[0]

    def param(self, key):
        return dict(self.params)[key]


@dataclass(frozen=True)
class ImplicitSurface:
    """Zero set of a scalar field, oriented by its gradient (f > 0 outside)."""

    field: Callable
    gradient: Callable
    bbox: tuple
    hessian: Optional[Callable] = None
    name: str = "implicit"

    def hess(self, p):
        p = np.atleast_2d(np.asarray(p, float))
        if self.hessian is not None:
            return self.hessian(p)
        h = 1e-5 * max(1.0, float(np.max(np.abs(np.asarray(self.bbox)))))
        out = np.empty((len(p), 3, 3))
        for k in range(3):
            d = np.zeros(3)
            d[k] = h
            out[:, :, k] = (self.gradient(p + d) - self.gradient(p - d)) / (2 * h)
        return 0.5 * (out + np.transpose(out, (0, 2, 1)))


# --- parametric families ----------------------------------------------------


def _sphere_like(a, b, c, rotated=False):
    """Ellipsoid chart with semi-axes (a, b, c); u is polar in [0, pi]."""

    def point(u, v):
        su, cu, sv, cv = np.sin(u), np.cos(u), np.sin(v), np.cos(v)
        if rotated:
            return np.stack([a * cu, b * su * cv, c * su * sv], axis=-1)
        return np.stack([a * su * cv, b * su * sv, c * cu], axis=-1)

    def first(u, v):
        su, cu, sv, cv = np.sin(u), np.cos(u), np.sin(v), np.cos(v)
        z = np.zeros(np.broadcast(u, v).shape)
        if rotated:
            xu = np.stack([-a * su + z, b * cu * cv, c * cu * sv], axis=-1)
            xv = np.stack([z, -b * su * sv, c * su * cv], axis=-1)
        else:
            xu = np.stack([a * cu * cv, b * cu * sv, -c * su + z], axis=-1)
            xv = np.stack([-a * su * sv, b * su * cv, z], axis=-1)
        return xu, xv

    def second(u, v):
        su, cu, sv, cv = np.sin(u), np.cos(u), np.sin(v), np.cos(v)
        z = np.zeros(np.broadcast(u, v).shape)
        if rotated:
            xuu = np.stack([-a * cu + z, -b * su * cv, -c * su * sv], axis=-1)
            xuv = np.stack([z, -b * cu * sv, c * cu * cv], axis=-1)
            xvv = np.stack([z, -b * su * cv, -c * su * sv], axis=-1)
        else:
            xuu = np.stack([-a * su * cv, -b * su * sv, -c * cu + z], axis=-1)
            xuv = np.stack([-a * cu * sv, b * cu * cv, z], axis=-1)
            xvv = np.stack([-a * su * cv, -b * su * sv, z], axis=-1)
        return xuu, xuv, xvv

    return Chart(
        point,
        first,
        second,
        domain=((0.0, np.pi), (0.0, TWO_PI)),
        periodic=(False, True),
        trusted=lambda u, v: np.sin(u) >= 0.45,
    )


def _torus_chart(R, r):
    def point(u, v):
        rho = R + r * np.cos(v)
        return np.stack([rho * np.cos(u), rho * np.sin(u), r * np.sin(v) + 0 * u], axis=-1)

    def first(u, v):
        rho = R + r * np.cos(v)
        z = np.zeros(np.broadcast(u, v).shape)
        xu = np.stack([-rho * np.sin(u), rho * np.cos(u), z], axis=-1)
        xv = np.stack(
            [-r * np.sin(v) * np.cos(u), -r * np.sin(v) * np.sin(u), r * np.cos(v) + z], axis=-1
        )
        return xu, xv

    def second(u, v):
        rho = R + r * np.cos(v)
        z = np.zeros(np.broadcast(u, v).shape)
        xuu = np.stack([-rho * np.cos(u), -rho * np.sin(u), z], axis=-1)
        xuv = np.stack([r * np.sin(v) * np.sin(u), -r * np.sin(v) * np.cos(u), z], axis=-1)
        xvv = np.stack(
            [-r * np.cos(v) * np.cos(u), -r * np.cos(v) * np.sin(u), -r * np.sin(v) + z], axis=-1
        )
        return xuu, xuv, xvv

    return Chart(point, first, second, domain=((0.0, TWO_PI), (0.0, TWO_PI)), periodic=(True, True))


def _positive(params, *keys):
    for k in keys:
        val = params.get(k)
        if val is None:
            raise ParameterError(f"missing parameter '{k}'")
        if not np.isfinite(val) or val <= 0:
            raise ParameterError(f"parameter '{k}' must be positive, got {val!r}")


def parametric_surface(kind: str, **params) -> ParametricSurface:
    if kind == "sphere":
        params.setdefault("R", params.pop("radius", 1.0))
        _positive(params, "R")
        R = float(params["R"])
        charts = (_sphere_like(R, R, R), _sphere_like(R, R, R, rotated=True))
    elif kind == "ellipsoid":
        _positive(params, "a", "b", "c")
        a, b, c = (float(params[k]) for k in "abc")
        charts = (_sphere_like(a, b, c), _sphere_like(a, b, c, rotated=True))
    elif kind == "torus":
        _positive(params, "R", "r")
        R, r = float(params["R"]), float(params["r"])
        if R <= r:
            raise ParameterError(f"torus needs R > r, got R={R}, r={r}")
        charts = (_torus_chart(R, r),)
    else:
        raise ParameterError(f"unknown parametric kind '{kind}'")
    return ParametricSurface(kind, tuple(sorted((k, float(v)) for k, v in params.items())), charts)


def _uv_sphere_mesh(chart, n_lon, n_lat):
    """Latitude/longitude triangulation with one vertex at each pole."""
    us = np.linspace(0.0, np.pi, n_lat + 1)[1:-1]
    vs = TWO_PI * np.arange(n_lon) / n_lon
    U, V = np.meshgrid(us, vs, indexing="ij")
    rings = chart.point(U, V).reshape(-1, 3)
    north = chart.point(np.array(0.0), np.array(0.0))
    south = chart.point(np.array(np.pi), np.array(0.0))
    verts = np.vstack([north[None], rings, south[None]])
    idx = lambda i, j: 1 + i * n_lon + (j % n_lon)  # noqa: E731
    faces = []
    j = np.arange(n_lon)
    faces.append(np.stack([np.zeros(n_lon, int), idx(0, j), idx(0, j + 1)], axis=1))
    for i in range(n_lat - 2):
        a, b = idx(i, j), idx(i, j + 1)
        c, d = idx(i + 1, j), idx(i + 1, j + 1)
        faces.append(np.stack([a, c, d], axis=1))
        faces.append(np.stack([a, d, b], axis=1))
    last = len(verts) - 1
    faces.append(np.stack([np.full(n_lon, last), idx(n_lat - 2, j + 1), idx(n_lat - 2, j)], axis=1))
    return verts, np.vstack(faces)


def _torus_mesh(chart, nu, nv):
    us = TWO_PI * np.arange(nu) / nu
    vs = TWO_PI * np.arange(nv) / nv
    U, V = np.meshgrid(us, vs, indexing="ij")
    verts = chart.point(U, V).reshape(-1, 3)
    i, j = np.meshgrid(np.arange(nu), np.arange(nv), indexing="ij")
    i, j = i.ravel(), j.ravel()
    a = i * nv + j
    b = ((i + 1) % nu) * nv + j
    c = ((i + 1) % nu) * nv + (j + 1) % nv
    d = i * nv + (j + 1) % nv
    faces = np.vstack([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
    return verts, faces


def _resolution_pair(resolution):
    if np.isscalar(resolution):
        return int(resolution), int(resolution)
    nu, nv = resolution
    return int(nu), int(nv)


def generate_parametric(kind: str, params: dict, resolution) -> tuple:
    """Build the exact chart object for `kind` and a consistent triangulation.

    `resolution` counts subdivisions per periodic direction (an int, or a pair
    for the torus). Sphere and ellipsoid use `resolution` longitudes and
    `resolution // 2` latitude bands.
    """
    surf = parametric_surface(kind, **dict(params))
    nu, nv = _resolution_pair(resolution)
    if min(nu, nv) < 3:
        raise ParameterError(f"resolution must be >= 3 per periodic direction, got {resolution!r}")
    if kind in ("sphere", "ellipsoid"):
        verts, faces = _uv_sphere_mesh(surf.primary, nu, max(nu // 2, 2))
    else:
        verts, faces = _torus_mesh(surf.primary, nu, nv)
    mesh = TriangleMesh(verts, faces, name=f"{kind}-{nu}x{nv}")
    check_immersion(surf)
    return surf, mesh


def icosphere(subdivisions: int, radius: float = 1.0) -> TriangleMesh:
    """Subdivided icosahedron with vertices on the sphere (20 * 4**n faces)."""
    if radius <= 0:
        raise ParameterError("radius must be positive")
    t = (1.0 + 5 ** 0.5) / 2.0
    verts = np.array(
        [[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
         [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
         [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]], float)
    faces = np.array(
        [[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
         [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
         [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
         [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]])
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    for _ in range(int(subdivisions)):
        e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
        e.sort(axis=1)
        uniq, inv = np.unique(e, axis=0, return_inverse=True)
        inv = inv.ravel()
        mid = verts[uniq[:, 0]] + verts[uniq[:, 1]]
        mid /= np.linalg.norm(mid, axis=1)[:, None]
        base = len(verts)
        verts = np.vstack([verts, mid])
        nf = len(faces)
        m01, m12, m20 = (base + inv[k * nf:(k + 1) * nf] for k in range(3))
        a, b, c = faces.T
        faces = np.vstack([
            np.stack([a, m01, m20], 1), np.stack([b, m12, m01], 1),
            np.stack([c, m20, m12], 1), np.stack([m01, m12, m20], 1)])
    return TriangleMesh(radius * verts, faces, name=f"icosphere-{subdivisions}")


def check_immersion(surf: ParametricSurface, n: int = 48, eps: float = 1e-10):
    """Sample each chart and require |x_u x x_v| > eps away from the poles."""
    for chart in surf.charts:
        (u0, u1), (v0, v1) = chart.domain
        u = np.linspace(u0, u1, n + 1)[:-1] + (u1 - u0) / (2 * n)
        v = np.linspace(v0, v1, n + 1)[:-1] + (v1 - v0) / (2 * n)
        U, V = np.meshgrid(u, v, indexing="ij")
        mask = chart.is_trusted(U, V)
        xu, xv = chart.first(U, V)
        jac = np.linalg.norm(np.cross(xu, xv), axis=-1)
        if np.any(jac[mask] <= eps):
            raise DegenerateChartError(f"chart of {surf.kind} is not an immersion on its sample grid")


# --- measurements -----------------------------------------------------------


def euler_characteristic_mesh(mesh: TriangleMesh) -> int:
    """V - E + F over the vertices actually used by faces."""
    if not mesh.validate:
        mesh.check()
    return int(len(mesh.used_vertices) - len(mesh.edges) + len(mesh.faces))


def triangle_area(v0, v1, v2) -> float:
    return 0.5 * float(np.linalg.norm(np.cross(np.subtract(v1, v0), np.subtract(v2, v0))))


def chart_rule(chart: Chart, phase_u=0.0, phase_v=0.0, min_points=(0, 0)):
    """Tensor rule (points, area weights) over the chart domain."""
    (u0, u1), (v0, v1) = chart.domain
    pu, wu = axis_rule(u0, u1, chart.periodic[0], phase_u, min_points[0])
    pv, wv = axis_rule(v0, v1, chart.periodic[1], phase_v, min_points[1])
    U, V = np.meshgrid(pu, pv, indexing="ij")
    xu, xv = chart.first(U, V)
    jac = np.linalg.norm(np.cross(xu, xv), axis=-1)
    w = (wu[:, None] * wv[None, :]) * jac
    return chart.point(U, V).reshape(-1, 3), w.ravel()


def total_area(surface) -> float:
    if isinstance(surface, TriangleMesh):
        return float(surface.face_areas.sum())
    if isinstance(surface, ParametricSurface):
        _, w = chart_rule(surface.primary, min_points=(512, 512))
        return float(w.sum())
    raise TypeError(f"total_area does not handle {type(surface).__name__}")


def fundamental_forms(chart: Chart, u, v):
    """(E, F, G, L, M, N) at (u, v) with the chart's outward normal."""
    xu, xv = chart.first(u, v)
    xuu, xuv, xvv = chart.second(u, v)
    n = np.cross(xu, xv)
    nn = np.linalg.norm(n, axis=-1)
    if np.any(nn < 1e-12):
        raise DegenerateChartError("chart is degenerate at the requested point")
    n = n / nn[..., None]
    dot = lambda a, b: np.sum(a * b, axis=-1)  # noqa: E731
    return dot(xu, xu), dot(xu, xv), dot(xv, xv), dot(xuu, n), dot(xuv, n), dot(xvv, n)


def gauss_curvature(surface: ParametricSurface, point, chart: int = 0) -> float:
    """K = (LN - M^2) / (EG - F^2) at chart coordinates `point` = (u, v)."""
    u, v = (np.asarray(c, float) for c in point)
    E, F, G, L, M, N = fundamental_forms(surface.charts[chart], u, v)
    det_g = E * G - F * F
    if np.any(det_g < 1e-12):
        raise DegenerateChartError(f"EG - F^2 = {float(np.min(det_g)):.3g} at {tuple(point)}")
    K = (L * N - M * M) / det_g
    return float(K) if np.ndim(K) == 0 else K


def angle_defect_total(mesh: TriangleMesh) -> float:
    """Sum over vertices of 2*pi minus the incident corner angles."""
    p = mesh.vertices[mesh.faces]
    total_angle = 0.0
    for k in range(3):
        a = p[:, (k + 1) % 3] - p[:, k]
        b = p[:, (k + 2) % 3] - p[:, k]
        cross = np.linalg.norm(np.cross(a, b), axis=1)
        total_angle += np.arctan2(cross, np.einsum("ij,ij->i", a, b)).sum()
    return float(TWO_PI * len(mesh.used_vertices) - total_angle)


def surface_points(surface, n: int = 96) -> np.ndarray:
    """A point sample covering the surface (vertices or a chart grid)."""
    if isinstance(surface, TriangleMesh):
        return surface.vertices[surface.used_vertices]
    if isinstance(surface, ParametricSurface):
        chart = surface.primary
        (u0, u1), (v0, v1) = chart.domain
        U, V = np.meshgrid(np.linspace(u0, u1, n), np.linspace(v0, v1, n), indexing="ij")
        return chart.point(U, V).reshape(-1, 3)
    raise TypeError(f"cannot sample {type(surface).__name__}")


def bounding_diagonal(surface) -> float:
    if isinstance(surface, TriangleMesh):
        return surface.diagonal
    if isinstance(surface, ImplicitSurface):
        lo, hi = np.asarray(surface.bbox, float)
        return float(np.linalg.norm(hi - lo))
    p = surface_points(surface)
    return float(np.linalg.norm(p.max(axis=0) - p.min(axis=0)))


# --- OBJ ---------------------------------------------------------------------


def write_obj(mesh: TriangleMesh, path, header: Sequence[str] = ()):
    path = Path(path)
    lines = [f"# {h}" for h in header]
    lines += [f"v {x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces.tolist()]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_obj(path, name: Optional[str] = None) -> TriangleMesh:
    verts, faces = [], []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tag, *rest = line.split()
        if tag == "v":
            verts.append([float(x) for x in rest[:3]])
        elif tag == "f":
            idx = [int(tok.split("/")[0]) for tok in rest]
            if len(idx) != 3:
                raise ParameterError(f"{path}:{lineno}: only triangular faces are supported")
            faces.append([i - 1 if i > 0 else len(verts) + i for i in idx])
    return TriangleMesh(np.array(verts), np.array(faces, dtype=np.int64), name=name or Path(path).stem)


def _segment_distance(p, a, b):
    ab = b - a
    t = np.clip(np.einsum("ij,ij->i", p - a, ab) / np.einsum("ij,ij->i", ab, ab), 0.0, 1.0)
    return np.linalg.norm(p - (a + t[:, None] * ab), axis=1)


def point_triangle_distances(x, tri) -> np.ndarray:
    """Exact Euclidean distance from point x to each triangle of (F, 3, 3)."""
    x = np.asarray(x, float)
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    n = np.cross(b - a, c - a)
    n = n / np.linalg.norm(n, axis=1)[:, None]
    h = np.einsum("ij,ij->i", x - a, n)
    proj = x - h[:, None] * n
    inside = np.ones(len(tri), dtype=bool)
    for p, q in ((a, b), (b, c), (c, a)):
        inside &= np.einsum("ij,ij->i", np.cross(q - p, proj - p), n) >= 0
    px = np.broadcast_to(x, a.shape)
    edge = np.minimum(np.minimum(_segment_distance(px, a, b), _segment_distance(px, b, c)),
                      _segment_distance(px, c, a))
    return np.where(inside, np.abs(h), edge)


def distance_to_surface(surface, x) -> float:
    """Distance from x to a mesh (exact) or to a parametric surface (dense sample
    polished by Newton along the chart)."""
    x = np.asarray(x, float).reshape(3)
    if isinstance(surface, TriangleMesh):
        return float(point_triangle_distances(x, surface.vertices[surface.faces]).min())
    if isinstance(surface, ParametricSurface):
        best = np.inf
        for chart in surface.charts:
            (u0, u1), (v0, v1) = chart.domain
            U, V = np.meshgrid(np.linspace(u0, u1, 129), np.linspace(v0, v1, 129), indexing="ij")
            P = chart.point(U, V)
            d = np.linalg.norm(P - x, axis=-1)
            i, j = np.unravel_index(np.argmin(d), d.shape)
            u, v = U[i, j], V[i, j]
            # full Newton: Gauss-Newton stalls once |r| exceeds the curvature radius
            for _ in range(30):
                p = chart.point(u, v)
                xu, xv = chart.first(u, v)
                xuu, xuv, xvv = chart.second(u, v)
                r = p - x
                J = np.array([[xu @ xu + r @ xuu, xu @ xv + r @ xuv],
                              [xu @ xv + r @ xuv, xv @ xv + r @ xvv]])
                step = np.linalg.lstsq(J, -np.array([r @ xu, r @ xv]), rcond=None)[0]
                step *= min(1.0, 0.2 / max(float(np.linalg.norm(step)), 1e-300))
                u, v = u + step[0], v + step[1]
            best = min(best, float(d.min()), float(np.linalg.norm(chart.point(u, v) - x)))
        return best
    raise TypeError(f"distance_to_surface does not handle {type(surface).__name__}")


def vertex_quadrics(mesh: TriangleMesh):
    """Least-squares quadric h = a x^2 + b xy + c y^2 + d x + e y over the
    2-ring of every vertex, in the frame (e1, e2, n) of its area-weighted normal.

    Returns (coef (V, 5), e1, e2, n)."""
    A = mesh.vertex_adjacency
    A2 = ((A @ A) + A).tocoo()
    keep = A2.row != A2.col
    i, j = A2.row[keep], A2.col[keep]
    n = mesh.vertex_normals
    trial = np.where(np.abs(n[:, [0]]) < 0.9, np.array([[1.0, 0, 0]]), np.array([[0, 1.0, 0]]))
    e1 = np.cross(n, trial)
    e1 /= np.linalg.norm(e1, axis=1)[:, None]
    e2 = np.cross(n, e1)
    d = mesh.vertices[j] - mesh.vertices[i]
    x = np.einsum("ij,ij->i", d, e1[i])
    y = np.einsum("ij,ij->i", d, e2[i])
    h = np.einsum("ij,ij->i", d, n[i])
    phi = np.stack([x * x, x * y, y * y, x, y], 1)
    nv = len(mesh.vertices)
    M = np.zeros((nv, 5, 5))
    rhs = np.zeros((nv, 5))
    np.add.at(M, i, phi[:, :, None] * phi[:, None, :])
    np.add.at(rhs, i, phi * h[:, None])
    used = np.zeros(nv, dtype=bool)
    used[mesh.used_vertices] = True
    M[~used] = np.eye(5)
    # light Tikhonov term keeps nearly flat or sparse rings solvable
    M += 1e-12 * np.trace(M, axis1=1, axis2=2)[:, None, None] * np.eye(5)
    coef = np.linalg.solve(M, rhs[..., None])[..., 0]
    return coef, e1, e2, n


def vertex_curvature(mesh: TriangleMesh):
    """Gauss curvature and unit normal at every vertex from vertex_quadrics."""
    coef, e1, e2, n = vertex_quadrics(mesh)
    a, b, c, dx, dy = coef.T
    K = (4 * a * c - b * b) / (1 + dx * dx + dy * dy) ** 2
    nrm = n - dx[:, None] * e1 - dy[:, None] * e2
    nrm /= np.linalg.norm(nrm, axis=1)[:, None]
    return K, nrm

"""Critical points of probe functions restricted to a surface, Morse
certificates, focal-point detection and the Morse counting polynomial.

Indices are counted for the Hessian of -psi: a minimum of psi has
index_minus = 2, a maximum has index_plus = 2. The amplitude attached to a
point is exp(i pi/4 (n_+ - n_-)) / sqrt|det|, so a minimum carries -i/sqrt(det).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import (ClearanceError, GenericitySearchError, NonMorseError, ParameterError)
from .geometry import (ImplicitSurface, ParametricSurface, TriangleMesh, bounding_diagonal,
                       distance_to_surface, fundamental_forms, vertex_quadrics)
from .probes import ProbeFunction

TOL_HESS = 1e-6
REL_TOL_GAP = 1e-3
CLEAR_FRACTION = 1e-3
MERGE_FRACTION = 1e-6
SEED_GRID = 64


class CoverageWarning(UserWarning):
    """Critical-point search may have missed points."""


@dataclass(frozen=True)
class CriticalPoint:
    position: tuple
    value: float
    index_minus: int
    index_plus: int
    hessian_det: float
    curvature: Optional[float] = None
    degenerate: bool = False

    @property
    def amplitude(self) -> complex:
        if self.hessian_det == 0.0:
            return complex("nan+nanj")
        phase = np.pi / 4 * (self.index_plus - self.index_minus)
        return complex(np.exp(1j * phase) / np.sqrt(abs(self.hessian_det)))

    @property
    def sign(self) -> int:
        """(-1)^{n_-}, this point's contribution to the Euler characteristic."""
        return -1 if self.index_minus % 2 else 1

    def swapped(self) -> "CriticalPoint":
        """The same point seen by -psi."""
        return CriticalPoint(self.position, -self.value, self.index_plus, self.index_minus,
                             self.hessian_det, self.curvature, self.degenerate)

    def to_dict(self) -> dict:
        a = self.amplitude
        return {
            "position": [float(c) for c in self.position],
            "value": float(self.value),
            "index_minus": int(self.index_minus),
            "index_plus": int(self.index_plus),
            "hessian_det": float(self.hessian_det),
            "curvature": None if self.curvature is None else float(self.curvature),
            "amplitude": {"re": float(a.real), "im": float(a.imag)},
            "degenerate": bool(self.degenerate),
        }


def _classify(h11, h12, h22, det_metric, tol_hess):
    """Indices of -H (orthonormalised by the metric) and det H / det g."""
    tr = h11 + h22
    det = (h11 * h22 - h12 * h12)
    disc = np.sqrt(np.maximum(0.25 * tr * tr - det, 0.0))
    e1, e2 = 0.5 * tr - disc, 0.5 * tr + disc  # eigenvalues of H
    n_plus = (-e1 > 0).astype(int) + (-e2 > 0).astype(int)
    n_minus = (-e1 < 0).astype(int) + (-e2 < 0).astype(int)
    hdet = det / det_metric
    degenerate = np.abs(hdet) <= tol_hess
    return n_minus, n_plus, hdet, degenerate


def _sort_points(points):
    return sorted(points, key=lambda p: (p.value, tuple(p.position)))


def _dedupe(pos, merge_radius, score):
    """Indices of representatives, one per cluster of nearby positions."""
    order = np.argsort(score, kind="stable")
    tree = cKDTree(pos)
    taken = np.zeros(len(pos), dtype=bool)
    keep = []
    for i in order:
        if taken[i]:
            continue
        keep.append(i)
        taken[tree.query_ball_point(pos[i], merge_radius)] = True
    return np.array(keep, dtype=int)


def _finish(points, strict, tol_hess):
    points = _sort_points(points)
    if strict:
        for p in points:
            if p.degenerate:
                raise NonMorseError(
                    f"degenerate critical point at {tuple(round(c, 6) for c in p.position)} "
                    f"(|det| = {abs(p.hessian_det):.3g} <= {tol_hess:g})", point=p)
    return points


def _check_clearance(surface, probe):
    if probe.kind != "distance":
        return
    diag = bounding_diagonal(surface)
    if isinstance(surface, ImplicitSurface):
        val = abs(float(surface.field(probe.point[None])[0]))
        grad = float(np.linalg.norm(surface.gradient(probe.point[None])[0]))
        d = val / max(grad, 1e-300)
    else:
        d = distance_to_surface(surface, probe.point)
    if d <= CLEAR_FRACTION * diag:
        raise ClearanceError(
            f"receiver at distance {d:.3g} from the surface, below {CLEAR_FRACTION:g} x diagonal")


# --- parametric charts ----------------------------------------------------------


def _chart_newton(chart, probe, U, V, iters=60):
    (u0, u1), (v0, v1) = chart.domain
    for k in range(iters):
        P = chart.point(U, V)
        xu, xv = chart.first(U, V)
        xuu, xuv, xvv = chart.second(U, V)
        g = probe.gradient(P)
        H = probe.hessian(P)
        F = np.stack([np.sum(g * xu, -1), np.sum(g * xv, -1)], -1)
        Hxu = np.einsum("nij,nj->ni", H, xu)
        Hxv = np.einsum("nij,nj->ni", H, xv)
        J = np.empty(U.shape + (2, 2))
        J[:, 0, 0] = np.sum(xu * Hxu, -1) + np.sum(g * xuu, -1)
        J[:, 0, 1] = J[:, 1, 0] = np.sum(xu * Hxv, -1) + np.sum(g * xuv, -1)
        J[:, 1, 1] = np.sum(xv * Hxv, -1) + np.sum(g * xvv, -1)
        ev, evec = np.linalg.eigh(J)
        scale = np.max(np.abs(ev), axis=1, keepdims=True)
        inv = np.where(np.abs(ev) > 1e-12 * np.maximum(scale, 1e-300), 1.0 / np.where(ev == 0, 1, ev), 0.0)
        coef = np.einsum("nji,nj->ni", evec, F) * inv
        step = -np.einsum("nij,nj->ni", evec, coef)
        sn = np.linalg.norm(step, axis=1)
        step *= np.minimum(1.0, 0.3 / np.maximum(sn, 1e-300))[:, None]
        U = U + step[:, 0]
        V = V + step[:, 1]
    for axis, (lo, hi), per in ((0, (u0, u1), chart.periodic[0]), (1, (v0, v1), chart.periodic[1])):
        if per:
            if axis == 0:
                U = lo + np.mod(U - lo, hi - lo)
            else:
                V = lo + np.mod(V - lo, hi - lo)
    return U, V, np.linalg.norm(F, axis=1), J, xu, xv


def _parametric_points(surface: ParametricSurface, probe, tol_hess, seeds):
    diag = bounding_diagonal(surface)
    cand_pos, cand_res, cand_data = [], [], []
    for ci, chart in enumerate(surface.charts):
        (u0, u1), (v0, v1) = chart.domain
        su = u0 + (u1 - u0) * (np.arange(seeds) + 0.5) / seeds
        sv = v0 + (v1 - v0) * (np.arange(seeds) + 0.5) / seeds
        U, V = (a.ravel() for a in np.meshgrid(su, sv, indexing="ij"))
        U, V, res, J, xu, xv = _chart_newton(chart, probe, U, V)
        gnorm = np.linalg.norm(xu, axis=1) + np.linalg.norm(xv, axis=1)
        ok = (res <= 1e-9 * np.maximum(gnorm, 1.0)) & chart.is_trusted(U, V)
        if not chart.periodic[0]:
            ok &= (U >= u0) & (U <= u1)
        if not chart.periodic[1]:
            ok &= (V >= v0) & (V <= v1)
        idx = np.flatnonzero(ok)
        P = chart.point(U[idx], V[idx])
        E = np.sum(xu[idx] ** 2, -1)
        Fm = np.sum(xu[idx] * xv[idx], -1)
        G = np.sum(xv[idx] ** 2, -1)
        det_g = E * G - Fm * Fm
        curv = None
        if probe.kind == "height":
            _, _, _, L, M, N = fundamental_forms(chart, U[idx], V[idx])
            curv = (L * N - M * M) / det_g
        for k, i in enumerate(idx):
            cand_pos.append(P[k])
            cand_res.append(res[i])
            cand_data.append((J[i], det_g[k], None if curv is None else curv[k]))
    if not cand_pos:
        return []
    pos = np.array(cand_pos)
    keep = _dedupe(pos, MERGE_FRACTION * diag, np.array(cand_res))
    points = []
    for i in keep:
        Jm, dg, curv = cand_data[i]
        nm, npl, hdet, degen = _classify(Jm[0, 0], Jm[0, 1], Jm[1, 1], dg, tol_hess)
        p = pos[i]
        points.append(CriticalPoint(tuple(float(c) for c in p), float(probe.value(p[None])[0]),
                                    int(nm), int(npl), float(hdet),
                                    None if curv is None else float(curv), bool(degen)))
    return points


# --- triangle meshes (piecewise-linear) ---------------------------------------------


def _vertex_frames(mesh, idx):
    n = mesh.vertex_normals[idx]
    trial = np.where(np.abs(n[:, [0]]) < 0.9, np.array([[1.0, 0, 0]]), np.array([[0, 1.0, 0]]))
    e1 = np.cross(n, trial)
    e1 /= np.linalg.norm(e1, axis=1)[:, None]
    e2 = np.cross(n, e1)
    return e1, e2, n


def pl_classification(mesh: TriangleMesh, vals: np.ndarray):
    """Per-vertex (lower-neighbour count, link sign changes) under the total
    order (value, vertex index)."""
    nv = len(mesh.vertices)
    rank = np.empty(nv, dtype=np.int64)
    rank[np.lexsort((np.arange(nv), vals))] = np.arange(nv)
    f = mesh.faces
    changes = np.zeros(nv, dtype=np.int64)
    for k in range(3):
        v, a, b = f[:, k], f[:, (k + 1) % 3], f[:, (k + 2) % 3]
        flip = (rank[a] < rank[v]) != (rank[b] < rank[v])
        np.add.at(changes, v, flip.astype(np.int64))
    e = mesh.edges
    lower = np.zeros(nv, dtype=np.int64)
    np.add.at(lower, e[:, 0], rank[e[:, 1]] < rank[e[:, 0]])
    np.add.at(lower, e[:, 1], rank[e[:, 0]] < rank[e[:, 1]])
    degree = np.zeros(nv, dtype=np.int64)
    np.add.at(degree, e.ravel(), 1)
    return lower, changes, degree


def _two_ring(adj, i):
    ring1 = adj.indices[adj.indptr[i]:adj.indptr[i + 1]]
    ring2 = np.unique(np.concatenate([adj.indices[adj.indptr[j]:adj.indptr[j + 1]] for j in ring1]))
    return ring2[ring2 != i]


def _quadric_refine(mesh, probe, i, e1, e2, n, adj):
    """Fit h = a x^2 + b xy + c y^2 + d x + e y over the 2-ring and polish the
    critical point of psi on that patch. Returns (position, J, det_g, K)."""
    v = mesh.vertices[i]
    nb = _two_ring(adj, i)
    d = mesh.vertices[nb] - v
    x, y, h = d @ e1, d @ e2, d @ n
    A = np.stack([x * x, x * y, y * y, x, y], 1)
    coef = np.linalg.lstsq(A, h, rcond=None)[0]
    a, b, c, dx, dy = coef
    reach = float(np.max(np.hypot(x, y)))

    def patch(s, t):
        hx = 2 * a * s + b * t + dx
        hy = b * s + 2 * c * t + dy
        hval = a * s * s + b * s * t + c * t * t + dx * s + dy * t
        X = v + s * e1 + t * e2 + hval * n
        Xs, Xt = e1 + hx * n, e2 + hy * n
        return X, Xs, Xt, hx, hy

    def system(s, t):
        X, Xs, Xt, hx, hy = patch(s, t)
        g = probe.gradient(X[None])[0]
        H = probe.hessian(X[None])[0]
        F = np.array([g @ Xs, g @ Xt])
        gn = g @ n
        J = np.array([[Xs @ H @ Xs + 2 * a * gn, Xs @ H @ Xt + b * gn],
                      [Xt @ H @ Xs + b * gn, Xt @ H @ Xt + 2 * c * gn]])
        return X, F, J, hx, hy

    s = t = 0.0
    for _ in range(12):
        X, F, J, hx, hy = system(s, t)
        try:
            step = -np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            break
        s, t = s + step[0], t + step[1]
        if np.hypot(s, t) > reach:
            s = t = 0.0
            break
    X, F, J, hx, hy = system(s, t)
    det_g = 1.0 + hx * hx + hy * hy
    K = ((2 * a) * (2 * c) - b * b) / det_g**2
    return X, J, det_g, K


def _mesh_points(mesh: TriangleMesh, probe, tol_hess):
    vals = probe.value(mesh.vertices)
    lower, changes, degree = pl_classification(mesh, vals)
    used = np.zeros(len(vals), dtype=bool)
    used[mesh.used_vertices] = True
    crit = np.flatnonzero(used & ((changes == 0) | (changes >= 4)))
    adj = mesh.vertex_adjacency
    e1, e2, nrm = _vertex_frames(mesh, crit)
    points = []
    for k, i in enumerate(crit):
        if changes[i] == 0:
            if lower[i] == 0:
                nm, npl = 2, 0
            else:
                nm, npl = 0, 2
            pl_sign = 1.0
        else:
            nm = npl = 1
            pl_sign = -1.0
        X, J, det_g, K = _quadric_refine(mesh, probe, i, e1[k], e2[k], nrm[k], adj)
        hdet = abs(np.linalg.det(J)) / det_g * pl_sign
        degenerate = changes[i] >= 6 or abs(hdet) <= tol_hess
        if changes[i] >= 6:
            # monkey saddle: its weight in the alternating count is 1 - changes/2
            nm = npl = 1
        points.append(CriticalPoint(
            tuple(float(c) for c in X), float(probe.value(X[None])[0]), nm, npl, float(hdet),
            float(K) if probe.kind == "height" else None, bool(degenerate)))
    return points


# --- implicit level sets ---------------------------------------------------------


def _implicit_points(surface: ImplicitSurface, probe, tol_hess, seed_mesh):
    if seed_mesh is None:
        from .meshing import mesh_implicit

        seed_mesh = mesh_implicit(surface, 48)
    seeds = np.array([p.position for p in _mesh_points(seed_mesh, probe, 0.0)])
    if len(seeds) == 0:
        return []
    P = seeds.copy()
    g0 = surface.gradient(P)
    m = np.einsum("ij,ij->i", probe.gradient(P), g0) / np.einsum("ij,ij->i", g0, g0)
    for _ in range(40):
        gf = surface.gradient(P)
        Hf = surface.hess(P)
        gp = probe.gradient(P)
        Hp = probe.hessian(P)
        F = np.concatenate([gp - m[:, None] * gf, surface.field(P)[:, None]], 1)
        J = np.zeros((len(P), 4, 4))
        J[:, :3, :3] = Hp - m[:, None, None] * Hf
        J[:, :3, 3] = -gf
        J[:, 3, :3] = gf
        try:
            step = -np.linalg.solve(J, F[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = -np.stack([np.linalg.lstsq(Jk, Fk, rcond=None)[0] for Jk, Fk in zip(J, F)])
        cap = 0.05 * bounding_diagonal(surface)
        sn = np.linalg.norm(step[:, :3], axis=1)
        step *= np.minimum(1.0, cap / np.maximum(sn, 1e-300))[:, None]
        P = P + step[:, :3]
        m = m + step[:, 3]
    gf = surface.gradient(P)
    res = np.linalg.norm(
        np.concatenate([probe.gradient(P) - m[:, None] * gf, surface.field(P)[:, None]], 1), axis=1)
    ok = res <= 1e-9
    diag = bounding_diagonal(surface)
    idx = np.flatnonzero(ok)
    keep = idx[_dedupe(P[idx], MERGE_FRACTION * diag, res[idx])] if len(idx) else idx
    points = []
    for i in keep:
        p, gfi = P[i], gf[i]
        nrm = gfi / np.linalg.norm(gfi)
        trial = np.array([1.0, 0, 0]) if abs(nrm[0]) < 0.9 else np.array([0, 1.0, 0])
        t1 = np.cross(nrm, trial)
        t1 /= np.linalg.norm(t1)
        E = np.stack([t1, np.cross(nrm, t1)], 1)
        Hf = surface.hess(p[None])[0]
        Hs = E.T @ (probe.hessian(p[None])[0] - m[i] * Hf) @ E
        nm, npl, hdet, degen = _classify(Hs[0, 0], Hs[0, 1], Hs[1, 1], 1.0, tol_hess)
        K = None
        if probe.kind == "height":
            K = float(np.linalg.det(E.T @ Hf @ E) / (gfi @ gfi))
        points.append(CriticalPoint(tuple(float(c) for c in p), float(probe.value(p[None])[0]),
                                    int(nm), int(npl), float(hdet), K, bool(degen)))
    return points


# --- public API -------------------------------------------------------------------


def critical_points(surface, probe: ProbeFunction, strict: bool = True,
                    tol_hess: float = TOL_HESS, seeds: int = SEED_GRID, seed_mesh=None):
    """Stationary points of probe|S sorted by value.

    With `strict`, a degenerate point raises NonMorseError; otherwise such
    points are returned with `degenerate=True`.
    """
    _check_clearance(surface, probe)
    if isinstance(surface, ParametricSurface):
        points = _parametric_points(surface, probe, tol_hess, seeds)
    elif isinstance(surface, TriangleMesh):
        points = _mesh_points(surface, probe, tol_hess)
    elif isinstance(surface, ImplicitSurface):
        points = _implicit_points(surface, probe, tol_hess, seed_mesh)
    else:
        raise ParameterError(f"critical_points does not handle {type(surface).__name__}")
    if sum(p.index_minus == 2 for p in points) == 0 or sum(p.index_plus == 2 for p in points) == 0:
        warnings.warn("no minimum or no maximum found; the seed grid may be too coarse",
                      CoverageWarning, stacklevel=2)
    return _finish(points, strict, tol_hess)


# --- fold margin -------------------------------------------------------------------


def _crossing_minimum(det, grad, pairs):
    """Smallest tangential gradient, linearly interpolated, on edges where the
    Hessian determinant changes sign."""
    a, b = pairs
    da, db = det[a], det[b]
    cross = (da > 0) != (db > 0)
    if not np.any(cross):
        return np.inf
    da, db = da[cross], db[cross]
    s = da / (da - db)
    g = grad[a[cross]] * (1 - s) + grad[b[cross]] * s
    return float(g.min())


def fold_margin(surface, probe: ProbeFunction, n: int = 256) -> float:
    """Smallest |grad_S psi| on the curve where the surface Hessian of psi is
    singular.

    Directions near that curve make psi almost degenerate somewhere: a pair of
    critical points is about to be born, and at finite bandwidth it already
    shows up as a spurious peak. For a height probe the margin is the sine of
    the angle between omega and the Gauss image of the parabolic curve.
    Returns inf when the Hessian never changes sign.
    """
    if isinstance(surface, TriangleMesh):
        coef, e1, e2, nrm = vertex_quadrics(surface)
        a, b, c, dx, dy = coef.T
        Xx = e1 + dx[:, None] * nrm
        Xy = e2 + dy[:, None] * nrm
        nu = nrm - dx[:, None] * e1 - dy[:, None] * e2
        scale = np.linalg.norm(nu, axis=1)
        nu /= scale[:, None]
        P = surface.vertices
        g = probe.gradient(P)
        H = probe.hessian(P)
        gn = np.einsum("ij,ij->i", g, nu)
        k = gn / scale
        h11 = np.einsum("ni,nij,nj->n", Xx, H, Xx) + 2 * a * k
        h12 = np.einsum("ni,nij,nj->n", Xx, H, Xy) + b * k
        h22 = np.einsum("ni,nij,nj->n", Xy, H, Xy) + 2 * c * k
        det = h11 * h22 - h12 * h12
        tang = np.sqrt(np.maximum(np.einsum("ij,ij->i", g, g) - gn * gn, 0.0))
        e = surface.edges
        return _crossing_minimum(det, tang, (e[:, 0], e[:, 1]))
    if isinstance(surface, ParametricSurface):
        best = np.inf
        for chart in surface.charts:
            (u0, u1), (v0, v1) = chart.domain
            pu, pv = chart.periodic
            # cell centres keep clear of chart singularities on the boundary
            us = u0 + (u1 - u0) * (np.arange(n) + 0.5) / n
            vs = v0 + (v1 - v0) * (np.arange(n) + 0.5) / n
            U, V = np.meshgrid(us, vs, indexing="ij")
            xu, xv = chart.first(U, V)
            E, F, G, L, M, N = fundamental_forms(chart, U, V)
            nu = np.cross(xu, xv)
            nu /= np.linalg.norm(nu, axis=-1)[..., None]
            P = chart.point(U, V)
            g = probe.gradient(P.reshape(-1, 3)).reshape(P.shape)
            H = probe.hessian(P.reshape(-1, 3)).reshape(P.shape + (3,))
            gn = np.sum(g * nu, -1)
            h11 = np.einsum("...i,...ij,...j->...", xu, H, xu) + gn * L
            h12 = np.einsum("...i,...ij,...j->...", xu, H, xv) + gn * M
            h22 = np.einsum("...i,...ij,...j->...", xv, H, xv) + gn * N
            det = (h11 * h22 - h12 * h12).ravel()
            tang = np.sqrt(np.maximum(np.sum(g * g, -1) - gn * gn, 0.0)).ravel()
            trusted = chart.is_trusted(U, V).ravel()
            ids = np.arange(n * n).reshape(n, n)
            pairs = [(ids[:-1, :], ids[1:, :]), (ids[:, :-1], ids[:, 1:])]
            if pu:
                pairs.append((ids[-1:, :], ids[:1, :]))
            if pv:
                pairs.append((ids[:, -1:], ids[:, :1]))
            for pa, pb in pairs:
                pa, pb = pa.ravel(), pb.ravel()
                ok = trusted[pa] & trusted[pb]
                best = min(best, _crossing_minimum(det, tang, (pa[ok], pb[ok])))
        return best
    raise ParameterError(f"fold_margin does not handle {type(surface).__name__}")


def _finite_or_none(x):
    return float(x) if x is not None and np.isfinite(x) else None


@dataclass
class GenericityReport:
    is_morse: bool
    is_excellent: bool
    min_curvature_at_crit: float
    min_value_gap: float
    offending: list = field(default_factory=list)
    n_points: int = 0
    min_amplitude_ratio: float = float("nan")
    euler_characteristic: Optional[int] = None
    fold_margin: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "fold_margin": _finite_or_none(self.fold_margin),
            "is_morse": bool(self.is_morse),
            "is_excellent": bool(self.is_excellent),
            "min_curvature_at_crit": float(self.min_curvature_at_crit),
            "min_value_gap": _finite_or_none(self.min_value_gap),
            "min_amplitude_ratio": _finite_or_none(self.min_amplitude_ratio),
            "n_points": int(self.n_points),
            "euler_characteristic": self.euler_characteristic,
            "offending": self.offending,
        }


def excellence_check(points, tol_gap: Optional[float] = None,
                     tol_hess: float = TOL_HESS) -> GenericityReport:
    """Morse: every |det| above tol_hess. Excellent: Morse and all critical
    values separated by more than tol_gap (default 1e-3 x value range)."""
    pts = _sort_points(points)
    if not pts:
        return GenericityReport(False, False, 0.0, 0.0, [{"reason": "no critical points"}], 0)
    vals = np.array([p.value for p in pts])
    dets = np.array([abs(p.hessian_det) for p in pts])
    if tol_gap is None:
        tol_gap = REL_TOL_GAP * float(vals.max() - vals.min())
    offending = []
    for p, d in zip(pts, dets):
        if p.degenerate or d <= tol_hess:
            offending.append({"reason": "degenerate", "position": [float(c) for c in p.position],
                              "value": float(p.value), "hessian_det": float(p.hessian_det)})
    is_morse = not offending
    gaps = np.diff(vals)
    min_gap = float(gaps.min()) if len(gaps) else float("inf")
    for k in np.flatnonzero(gaps <= tol_gap):
        offending.append({"reason": "close_values", "values": [float(vals[k]), float(vals[k + 1])],
                          "gap": float(gaps[k])})
    is_excellent = is_morse and not np.any(gaps <= tol_gap)
    with np.errstate(divide="ignore"):
        amps = 1.0 / np.sqrt(dets)
    ratio = float(amps.min() / amps.max()) if np.all(dets > 0) else 0.0
    chi = int(sum(p.sign for p in pts)) if is_morse else None
    return GenericityReport(is_morse, is_excellent, float(dets.min()), min_gap, offending,
                            len(pts), ratio, chi)


def morse_polynomial(points):
    """Counts (c0, c1, c2) of points with n_- = 0, 1, 2 and M(-1) = c0 - c1 + c2."""
    for p in points:
        if p.degenerate:
            raise NonMorseError("Morse polynomial needs non-degenerate critical points", point=p)
    c = [0, 0, 0]
    for p in points:
        c[p.index_minus] += 1
    return tuple(c), c[0] - c[1] + c[2]


def random_generic_direction(surface, seed, max_retries: int = 64, tol_gap=None,
                             tol_hess: float = TOL_HESS, min_gap: Optional[float] = None,
                             min_amplitude_ratio: Optional[float] = None,
                             min_fold_margin: Optional[float] = None, rng=None):
    """Draw unit directions from a seeded generator until one is certified.

    `min_gap`, `min_amplitude_ratio` and `min_fold_margin` tighten the
    certificate to what a band-limited recovery can resolve (see
    RECOVERY_GRADE). Returns (omega, report, points).
    """
    rng = np.random.default_rng(seed) if rng is None else rng
    last = None
    for attempt in range(max_retries):
        w = rng.standard_normal(3)
        w /= np.linalg.norm(w)
        probe = ProbeFunction.height(w)
        ok, rep, pts = certify(surface, probe, tol_gap=tol_gap, tol_hess=tol_hess,
                               min_gap=min_gap, min_amplitude_ratio=min_amplitude_ratio,
                               min_fold_margin=min_fold_margin)
        last = rep
        if ok:
            return w, rep, pts
    raise GenericitySearchError(
        f"no certified direction after {max_retries} draws (seed {seed}); last report: "
        f"morse={last.is_morse}, gap={last.min_value_gap:.3g}")


# thresholds under which recovery at the default bandwidth (Lambda = 200) is
# reliable on the fixtures: peaks at least 2.5 resolution cells apart, no
# amplitude below 0.3 of the largest (the peak threshold is 0.2), and a probe
# at least 0.2 away from birth of a critical pair
RECOVERY_GRADE = {"min_gap": 0.08, "min_amplitude_ratio": 0.3, "min_fold_margin": 0.2}


def certify(surface, probe: ProbeFunction, tol_gap=None, tol_hess: float = TOL_HESS,
            min_gap=None, min_amplitude_ratio=None, min_fold_margin=None):
    """Critical points plus certificate. Returns (passed, report, points)."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CoverageWarning)
        pts = critical_points(surface, probe, strict=False, tol_hess=tol_hess)
    rep = excellence_check(pts, tol_gap=tol_gap, tol_hess=tol_hess)
    ok = rep.is_excellent
    if ok and min_gap is not None and rep.min_value_gap < min_gap:
        ok = False
        rep.offending.append({"reason": "gap_below_recovery_limit", "gap": rep.min_value_gap})
    if ok and min_amplitude_ratio is not None and rep.min_amplitude_ratio < min_amplitude_ratio:
        ok = False
        rep.offending.append({"reason": "amplitude_ratio", "ratio": rep.min_amplitude_ratio})
    if ok and min_fold_margin is not None and not isinstance(surface, ImplicitSurface):
        rep.fold_margin = fold_margin(surface, probe)
        if rep.fold_margin < min_fold_margin:
            ok = False
            rep.offending.append({"reason": "near_fold", "margin": rep.fold_margin})
    return ok, rep, pts


def is_focal(surface, x, tol: Optional[float] = None) -> bool:
    """True if the squared distance to x has a degenerate critical point on S.

    At a critical point y of L = |x - y| the surface Hessian of L^2 is
    2 L Hess(L); its eigenvalues vanish exactly when 1 - L kappa_i = 0.
    """
    if tol is None:
        tol = 5e-2 if isinstance(surface, TriangleMesh) else TOL_HESS
    probe = ProbeFunction.distance(x)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CoverageWarning)
        pts = critical_points(surface, probe, strict=False, tol_hess=0.0)
    for p in pts:
        if p.degenerate:
            return True
        # smallest |eigenvalue| of 2 L Hess(L) is bounded by 2 L sqrt|det|
        # when the other eigenvalue is O(1); use the determinant directly
        if 2.0 * p.value * np.sqrt(abs(p.hessian_det)) <= tol:
            return True
    return False

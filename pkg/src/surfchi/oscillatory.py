"""Oscillatory pairings lambda -> integral over S of exp(-i lambda psi) dA.

Meshes with a height probe are integrated exactly facet by facet. Other
probes on meshes use the linear interpolant of psi on each (sub)facet, and
parametric charts use tensor rules sized to the phase variation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import AccuracyError, ConfigurationError, DegenerateFaceError, ParameterError
from .geometry import ParametricSurface, TriangleMesh, chart_rule, surface_points, total_area
from .probes import ProbeFunction

SCHEMA_VERSION = 1
SIGN_CONVENTION = "exp(-i*lambda*psi)"

# linear-phase facets are split until lambda * |psi''| * h^2 / 8 is below this
FACET_PHASE_TOL = 0.01
MAX_SUBDIVISION_LEVELS = 6
# relative agreement required between a chart rule and its 1.5x refinement
PARAMETRIC_RTOL = 1e-11
RATE_SAFETY = 1.25


def triangle_plane_wave(v0, v1, v2, k) -> complex:
    """Exact integral of exp(-i k.x) over the flat triangle (v0, v1, v2)."""
    v = np.array([v0, v1, v2], dtype=float)
    k = np.asarray(k, dtype=float)
    area2 = float(np.linalg.norm(np.cross(v[1] - v[0], v[2] - v[0])))
    scale = float(np.max(np.abs(v))) or 1.0
    if area2 <= 1e-14 * scale * scale:
        raise DegenerateFaceError("triangle has zero area")
    phi = np.sort(v @ k)
    q0, d1, d2 = _sorted_gaps(phi[None, :])
    return complex(area2 * _kernels.tri_value_batch(q0, d1, d2, 1.0)[0])


def _sorted_gaps(phi):
    phi = np.sort(phi, axis=1)
    return (
        np.ascontiguousarray(phi[:, 0]),
        np.ascontiguousarray(phi[:, 1] - phi[:, 0]),
        np.ascontiguousarray(phi[:, 2] - phi[:, 1]),
    )


def _subdivide(tri):
    """Split (F, 3, 3) triangles into four by edge midpoints."""
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
    return np.concatenate([
        np.stack([a, ab, ca], 1), np.stack([ab, b, bc], 1),
        np.stack([ca, bc, c], 1), np.stack([ab, bc, ca], 1)])


@dataclass
class FacetPhases:
    """Per-facet sorted phase data ready for the triangle kernels."""

    q0: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    w2: np.ndarray
    levels: int = 0
    n_facets: int = 0


def facet_phases(mesh: TriangleMesh, probe: ProbeFunction, lam_max: float,
                 tol: float = FACET_PHASE_TOL) -> FacetPhases:
    """Vertex phases per facet; facets are refined where psi bends too much
    for a linear phase to be accurate at `lam_max`."""
    if probe.kind == "height":
        proj = mesh.vertices @ probe.direction
        q0, d1, d2 = _sorted_gaps(proj[mesh.faces])
        w2 = 2.0 * mesh.face_areas
        return FacetPhases(q0, d1, d2, np.ascontiguousarray(w2), 0, len(w2))

    done = []
    tri = mesh.vertices[mesh.faces]
    levels = 0
    while True:
        cen = tri.mean(axis=1)
        hnorm = np.linalg.norm(probe.hessian(cen), ord=2, axis=(1, 2))
        edge = np.max(np.linalg.norm(tri - np.roll(tri, 1, axis=1), axis=2), axis=1)
        err = abs(lam_max) * hnorm * edge**2 / 8.0
        ok = err <= tol
        done.append(tri[ok])
        tri = tri[~ok]
        if len(tri) == 0:
            break
        if levels >= MAX_SUBDIVISION_LEVELS:
            raise AccuracyError(
                f"facet refinement budget exceeded: {len(tri)} facets still carry "
                f"phase error up to {float(err[~ok].max()):.3g} rad",
                achieved=float(err[~ok].max()),
            )
        tri = _subdivide(tri)
        levels += 1
    tri = np.concatenate(done)
    phi = probe.value(tri.reshape(-1, 3)).reshape(-1, 3)
    q0, d1, d2 = _sorted_gaps(phi)
    w2 = np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
    return FacetPhases(q0, d1, d2, np.ascontiguousarray(w2), levels, len(w2))


# --- parametric charts -------------------------------------------------------


def _phase_rates(surface: ParametricSurface, probe: ProbeFunction, n: int = 96):
    """Max |d psi / du| and |d psi / dv| over a sample grid of the chart."""
    chart = surface.primary
    (u0, u1), (v0, v1) = chart.domain
    U, V = np.meshgrid(np.linspace(u0, u1, n), np.linspace(v0, v1, n), indexing="ij")
    P = chart.point(U, V)
    xu, xv = chart.first(U, V)
    g = probe.gradient(P.reshape(-1, 3)).reshape(P.shape)
    ru = float(np.max(np.abs(np.sum(g * xu, axis=-1))))
    rv = float(np.max(np.abs(np.sum(g * xv, axis=-1))))
    return RATE_SAFETY * ru * (u1 - u0), RATE_SAFETY * rv * (v1 - v0)


def parametric_rule(surface: ParametricSurface, probe: ProbeFunction, lam: float,
                    factor: float = 1.0, rates=None):
    """Nodes (as phase values psi) and area weights good up to frequency lam."""
    su, sv = rates if rates is not None else _phase_rates(surface, probe)
    pts, w = chart_rule(surface.primary, factor * abs(lam) * su, factor * abs(lam) * sv)
    return np.ascontiguousarray(probe.value(pts)), np.ascontiguousarray(w)


def _parametric_pairing(surface, probe, lam, rtol=PARAMETRIC_RTOL, max_rounds=5):
    rates = _phase_rates(surface, probe)
    lam_arr = np.array([float(lam)])
    factor = 1.0
    g, w = parametric_rule(surface, probe, lam, factor, rates)
    val = _kernels.phase_sum(w, g, lam_arr)[0]
    scale = float(w.sum())
    for _ in range(max_rounds):
        factor *= 1.5
        g, w = parametric_rule(surface, probe, lam, factor, rates)
        finer = _kernels.phase_sum(w, g, lam_arr)[0]
        diff = abs(finer - val)
        val = finer
        if diff <= rtol * scale:
            return complex(val)
    raise AccuracyError(
        f"parametric quadrature did not settle at lambda={lam}: last change {diff:.3g}",
        achieved=diff / scale,
    )


# --- public API ---------------------------------------------------------------


def pairing(surface, probe: ProbeFunction, lam: float, conjugate: bool = False) -> complex:
    """Integral over S of exp(-i lam psi) dA (exp(+i lam psi) if `conjugate`)."""
    lam = float(lam)
    if not np.isfinite(lam):
        raise ParameterError("lambda must be finite")
    if isinstance(surface, TriangleMesh):
        fp = facet_phases(surface, probe, lam)
        val = complex(_kernels.tri_sum(fp.q0, fp.d1, fp.d2, fp.w2, np.array([lam]))[0])
    elif isinstance(surface, ParametricSurface):
        val = _parametric_pairing(surface, probe, lam)
    else:
        raise ParameterError(f"pairing does not handle {type(surface).__name__}")
    return val.conjugate() if conjugate else val


@dataclass
class LineSpectrum:
    probe: ProbeFunction
    lambdas: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def dlam(self) -> float:
        return float(self.metadata.get("dlam", self.lambdas[1] - self.lambdas[0]))

    @property
    def lam_max(self) -> float:
        return float(self.lambdas[-1])

    def __len__(self):
        return len(self.lambdas)

    def to_json(self) -> str:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "probe": self.probe.describe(),
            "metadata": self.metadata,
            "lambda": self.lambdas.tolist(),
            "re": self.values.real.tolist(),
            "im": self.values.imag.tolist(),
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "LineSpectrum":
        doc = json.loads(text)
        return cls(
            probe_from_description(doc["probe"]),
            np.array(doc["lambda"], float),
            np.array(doc["re"], float) + 1j * np.array(doc["im"], float),
            doc.get("metadata", {}),
        )

    def write_csv(self, path) -> Path:
        """CSV (lambda, re, im) with shortest round-trip float text, plus a
        JSON sidecar holding probe and metadata."""
        path = Path(path)
        rows = ["lambda,re,im"] + [
            f"{l!r},{v.real!r},{v.imag!r}"
            for l, v in zip(self.lambdas.tolist(), self.values.tolist())
        ]
        path.write_text("\n".join(rows) + "\n")
        side = {"schema_version": SCHEMA_VERSION, "probe": self.probe.describe(),
                "metadata": self.metadata}
        path.with_suffix(".json").write_text(json.dumps(side, sort_keys=True, indent=1) + "\n")
        return path

    @classmethod
    def read_csv(cls, path) -> "LineSpectrum":
        path = Path(path)
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        side = json.loads(path.with_suffix(".json").read_text())
        return cls(probe_from_description(side["probe"]), data[:, 0].copy(),
                   data[:, 1] + 1j * data[:, 2], side.get("metadata", {}))


def probe_from_description(desc: dict) -> ProbeFunction:
    if desc["kind"] == "height":
        return ProbeFunction.height(desc["direction"], normalize=False)
    if desc["kind"] == "distance":
        return ProbeFunction.distance(desc["point"])
    raise ParameterError("general probes cannot be rebuilt from a description")


def check_nyquist(surface, probe: ProbeFunction, dlam: float, N: int):
    if N < 64:
        raise ConfigurationError(f"spectrum needs N >= 64 samples, got {N}")
    if not dlam > 0:
        raise ConfigurationError("lambda step must be positive")
    bound = probe.bound(surface_points(surface))
    if np.pi / dlam < 1.2 * bound:
        raise ConfigurationError(
            f"aliasing: pi/dlam = {np.pi / dlam:.4g} must exceed 1.2 * max|psi| = "
            f"{1.2 * bound:.4g}; use dlam <= {np.pi / (1.2 * bound):.4g}"
        )
    return bound


def _surface_id(surface) -> str:
    if isinstance(surface, TriangleMesh):
        return f"{surface.name}[F={surface.n_faces}]"
    return surface.name


def spectrum(surface, probe: ProbeFunction, dlam: float, N: int, conjugate: bool = False,
             blocks: int = 8) -> LineSpectrum:
    """Samples s_j = pairing(surface, probe, j * dlam) for j = 0..N-1."""
    dlam = float(dlam)
    N = int(N)
    bound = check_nyquist(surface, probe, dlam, N)
    lambdas = dlam * np.arange(N)
    lam_max = float(lambdas[-1])
    meta = {
        "surface": _surface_id(surface),
        "dlam": dlam,
        "N": N,
        "psi_bound": bound,
        "sign": "exp(+i*lambda*psi)" if conjugate else SIGN_CONVENTION,
    }
    if isinstance(surface, TriangleMesh):
        fp = facet_phases(surface, probe, lam_max)
        values = _kernels.tri_sum_uniform(fp.q0, fp.d1, fp.d2, fp.w2, 0.0, dlam, N)
        meta.update(method="exact-facet" if probe.kind == "height" else "linear-phase-facet",
                    facets=fp.n_facets, refinement_levels=fp.levels)
    elif isinstance(surface, ParametricSurface):
        values, factor = _parametric_spectrum(surface, probe, dlam, N, blocks)
        meta.update(method="chart-tensor-rule", rule_factor=factor)
    else:
        raise ParameterError(f"spectrum does not handle {type(surface).__name__}")
    values = np.conj(values) if conjugate else values
    return LineSpectrum(probe, lambdas, values, meta)


def _parametric_spectrum(surface, probe, dlam, N, blocks):
    rates = _phase_rates(surface, probe)
    lam_max = dlam * (N - 1)
    area = total_area(surface)
    # settle the rule factor once at the top frequency
    factor = 1.0
    g, w = parametric_rule(surface, probe, lam_max, factor, rates)
    top = _kernels.phase_sum(w, g, np.array([lam_max]))[0]
    for _ in range(5):
        g, w = parametric_rule(surface, probe, lam_max, 1.5 * factor, rates)
        finer = _kernels.phase_sum(w, g, np.array([lam_max]))[0]
        if abs(finer - top) <= PARAMETRIC_RTOL * area:
            break
        factor *= 1.5
        top = finer
    else:
        raise AccuracyError(f"chart rule did not settle at lambda={lam_max}",
                            achieved=abs(finer - top) / area)
    values = np.empty(N, dtype=np.complex128)
    edges = np.unique(np.linspace(0, N, blocks + 1).astype(int))
    for lo, hi in zip(edges[:-1], edges[1:]):
        g, w = parametric_rule(surface, probe, dlam * (hi - 1), factor, rates)
        values[lo:hi] = _kernels.phase_sum_uniform(w, g, dlam * lo, dlam, hi - lo)
    return values, factor


@dataclass
class StationaryPhasePrediction:
    lambdas: np.ndarray
    terms: np.ndarray  # (n_points, n_lambda)
    total: np.ndarray
    skipped: list = field(default_factory=list)


def predict(points, lambda_grid) -> StationaryPhasePrediction:
    """Leading stationary-phase sum (2 pi / lam) * a(x) * exp(-i lam psi(x))."""
    lam = np.asarray(lambda_grid, dtype=float).ravel()
    zero = lam == 0.0
    skipped = [int(i) for i in np.flatnonzero(zero)]
    lam = lam[~zero]
    if not points:
        terms = np.zeros((0, len(lam)), dtype=complex)
    else:
        a = np.array([p.amplitude for p in points], dtype=complex)
        t = np.array([p.value for p in points], dtype=float)
        terms = (2 * np.pi / lam)[None, :] * a[:, None] * np.exp(-1j * np.outer(t, lam))
    return StationaryPhasePrediction(lam, terms, terms.sum(axis=0), skipped)

"""End-to-end routes from a surface to its Euler characteristic.

Every route ends in the same place: a list of (t_k, a_k) and
chi = sum of round(-Re(a_k^2) / |a_k|^2). They differ in how the line
spectrum is obtained:

    fourier  s(lambda) = integral of exp(-i lambda omega.y), exact per facet or by chart quadrature
    radon    binned area per unit height along omega, peaks from its derivative
    wave     s(lambda) = integral of exp(-i lambda |x - y|) for a receiver x
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import GenericityError, ParameterError
from .geometry import (ParametricSurface, TriangleMesh, angle_defect_total,
                       euler_characteristic_mesh, generate_parametric, icosphere,
                       parametric_surface)
from .meshing import implicit_preset, mesh_implicit
from .morse import (RECOVERY_GRADE, GenericityReport, certify, critical_points,
                    random_generic_direction)
from .oscillatory import LineSpectrum, predict, spectrum
from .probes import ProbeFunction
from .recovery import (DELTA_PHASE, REL_THRESHOLD, DiracDecomposition, TimeProfile,
                       detect_peaks, euler_characteristic, fit_amplitudes, synthesize_profile)
from .transforms import (RadonProfile, certify_receiver, radon_profile, radon_spectrum,
                         radon_to_profile_u, random_receiver, wave_normalized_spectrum)

DLAM = 0.05
LAMBDA = 200.0
# mesh used for the oracle and for mesh-only routes when the source is a chart
ORACLE_RESOLUTION = {"sphere": 128, "ellipsoid": 128, "torus": (256, 128)}
FIXTURES = ("sphere", "torus", "genus2")


def n_samples(dlam: float = DLAM, Lambda: float = LAMBDA) -> int:
    return int(round(Lambda / dlam)) + 1


@dataclass
class Fixture:
    name: str
    surface: object
    mesh: TriangleMesh

    @property
    def chi_mesh(self) -> int:
        return euler_characteristic_mesh(self.mesh)

    @property
    def chi_angle_defect(self) -> int:
        return int(round(angle_defect_total(self.mesh) / (2 * np.pi)))


def builtin_fixture(kind: str, resolution=None, **params) -> Fixture:
    """A chart surface plus the triangulation used for oracles and mesh routes.

    Without a resolution a sphere gets a level-6 icosphere: latitude rings of
    a UV mesh sit flat to slices along the axis and show up as false peaks.
    """
    if kind == "sphere" and resolution is None:
        surf = parametric_surface("sphere", **params)
        return Fixture(surf.name, surf, icosphere(6, surf.param("R")))
    res = ORACLE_RESOLUTION.get(kind, 128) if resolution is None else resolution
    surf, mesh = generate_parametric(kind, params, res)
    return Fixture(surf.name, surf, mesh)


def implicit_fixture(preset: str, resolution: int = 96, **params) -> Fixture:
    mesh = mesh_implicit(implicit_preset(preset, **params), resolution)
    return Fixture(mesh.name, mesh, mesh)


@lru_cache(maxsize=None)
def fixture(name: str) -> Fixture:
    """The standard fixtures: unit sphere, torus{R=2, r=1}, genus-2 level set at 96 cells."""
    if name == "sphere":
        return builtin_fixture("sphere", R=1.0)
    if name == "torus":
        return builtin_fixture("torus", R=2.0, r=1.0)
    if name == "genus2":
        return implicit_fixture("genus2", 96)
    raise ParameterError(f"unknown fixture '{name}'; choose from {', '.join(FIXTURES)}")


@dataclass
class RouteResult:
    route: str
    probe: ProbeFunction
    report: GenericityReport
    points: list
    spectrum: LineSpectrum
    profile: TimeProfile
    peaks: np.ndarray
    decomposition: DiracDecomposition
    chi: int
    contributions: list
    radon: Optional[RadonProfile] = None
    extra: dict = field(default_factory=dict)

    def summary(self, fx: Fixture) -> dict:
        return {
            "route": self.route,
            "probe": self.probe.describe(),
            "chi_recovered": self.chi,
            "chi_mesh_oracle": fx.chi_mesh,
            "chi_angle_defect": fx.chi_angle_defect,
            "chi_morse": self.report.euler_characteristic,
            "match": self.chi == fx.chi_mesh,
            "certified": bool(self.report.is_excellent),
            "peaks": [float(t) for t in self.peaks],
            "critical_values": [float(p.value) for p in self.points],
        }


def _certificate(grade: bool, overrides: dict):
    opts = dict(RECOVERY_GRADE) if grade else {}
    opts.update({k: v for k, v in overrides.items() if v is not None})
    return opts


def _direction(surface, direction, seed, grade, cert):
    opts = _certificate(grade, cert)
    if direction is not None:
        probe = ProbeFunction.height(direction)
        ok, rep, pts = certify(surface, probe, **opts)
        if not ok:
            raise GenericityError(f"direction {tuple(float(c) for c in probe.direction)} is not "
                                  f"certified: {rep.offending[:3]}")
        return probe, rep, pts
    w, rep, pts = random_generic_direction(surface, seed, **opts)
    return ProbeFunction.height(w), rep, pts


def _finish(route, probe, rep, pts, spec, profile, peaks, delta_phase, radon=None, extra=None):
    dec = fit_amplitudes(spec, peaks)
    chi, contrib = euler_characteristic(dec, delta_phase)
    return RouteResult(route, probe, rep, pts, spec, profile, peaks, dec, chi, contrib, radon,
                       extra or {})


def run_fourier(fx: Fixture, direction=None, seed=0, dlam: float = DLAM, N: Optional[int] = None,
                use_mesh: bool = False, rel_threshold: float = REL_THRESHOLD,
                delta_phase: float = DELTA_PHASE, grade: bool = True, **cert) -> RouteResult:
    """Height probe, spectrum on the chart surface (or the mesh), windowed
    profile, peaks, fit, chi."""
    surf = fx.mesh if use_mesh else fx.surface
    probe, rep, pts = _direction(surf, direction, seed, grade, cert)
    spec = spectrum(surf, probe, dlam, N or n_samples(dlam))
    prof = synthesize_profile(spec)
    peaks = detect_peaks(prof, rel_threshold)
    return _finish("fourier", probe, rep, pts, spec, prof, peaks, delta_phase)


def run_radon(fx: Fixture, direction=None, seed=0, dtau: Optional[float] = None,
              dlam: float = DLAM, N: Optional[int] = None, rel_threshold: float = REL_THRESHOLD,
              delta_phase: float = DELTA_PHASE, grade: bool = True, **cert) -> RouteResult:
    """Binned Radon profile of the mesh; peaks of its tau-derivative seed the
    fit on the profile's own Fourier samples."""
    probe, rep, pts = _direction(fx.mesh, direction, seed, grade, cert)
    N = N or n_samples(dlam)
    if dtau is None:
        dtau = np.pi / (8 * dlam * (N - 1))
    radon = radon_profile(fx.mesh, probe.direction, dtau=dtau)
    gap = rep.min_value_gap if np.isfinite(rep.min_value_gap) else None
    prof = radon_to_profile_u(radon, gap)
    peaks = detect_peaks(prof, rel_threshold)
    spec = radon_spectrum(radon, dlam, N)
    return _finish("radon", probe, rep, pts, spec, prof, peaks, delta_phase, radon=radon)


def run_wave(fx: Fixture, receiver=None, seed=0, dlam: float = DLAM, N: Optional[int] = None,
             use_mesh: Optional[bool] = None, rel_threshold: float = REL_THRESHOLD,
             delta_phase: float = DELTA_PHASE, grade: bool = True, **cert) -> RouteResult:
    """Distance probe from a certified receiver; chart surfaces are used
    directly unless use_mesh is set."""
    surf = fx.mesh if use_mesh or not isinstance(fx.surface, ParametricSurface) else fx.surface
    opts = _certificate(grade, cert)
    if receiver is None:
        x, rep, pts = random_receiver(surf, seed, **opts)
    else:
        x = np.asarray(receiver, float).reshape(3)
        ok, rep, pts = certify_receiver(surf, x, **opts)
        if not ok:
            raise GenericityError(f"receiver {tuple(float(c) for c in x)} is not certified: "
                                  f"{rep.offending[:3]}")
    spec = wave_normalized_spectrum(surf, x, dlam, N or n_samples(dlam), certify_first=False)
    prof = synthesize_profile(spec)
    peaks = detect_peaks(prof, rel_threshold)
    return _finish("wave", ProbeFunction.distance(x), rep, pts, spec, prof, peaks, delta_phase)


ROUTES = {"fourier": run_fourier, "radon": run_radon, "wave": run_wave}


def prediction_error(surface, probe: ProbeFunction, lambdas, points=None):
    """|pairing - leading stationary-phase term| on a lambda grid (lambda = 0 skipped).

    Returns (lambdas, spectrum values, prediction, error, skipped indices)."""
    lam = np.asarray(lambdas, float)
    if points is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            points = critical_points(surface, probe)
    pred = predict(points, lam)
    keep = lam != 0.0
    dlam = float(lam[1] - lam[0])
    if np.allclose(np.diff(lam), dlam) and lam[0] >= 0:
        spec = spectrum(surface, probe, dlam, len(lam) + int(round(lam[0] / dlam)))
        vals = spec.values[int(round(lam[0] / dlam)):]
    else:
        from .oscillatory import pairing
        vals = np.array([pairing(surface, probe, float(l)) for l in lam])
    vals = vals[keep]
    return lam[keep], vals, pred.total, np.abs(vals - pred.total), pred.skipped


def decay_slope(lambdas, err, bins: int = 12) -> float:
    """Slope of log(error envelope) against log(lambda).

    The error oscillates, so the envelope is taken as the maximum over
    log-spaced bins before the straight-line fit."""
    lam = np.asarray(lambdas, float)
    err = np.asarray(err, float)
    edges = np.geomspace(lam.min(), lam.max() * (1 + 1e-12), bins + 1)
    xs, ys = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (lam >= lo) & (lam < hi)
        if np.any(sel) and err[sel].max() > 0:
            k = np.flatnonzero(sel)[np.argmax(err[sel])]
            xs.append(np.log(lam[k]))
            ys.append(np.log(err[k]))
    if len(xs) < 2:
        return float("nan")
    return float(np.polyfit(xs, ys, 1)[0])

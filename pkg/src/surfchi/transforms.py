"""Plane-slice (Radon) profiles and spherical-mean receiver traces of the
surface measure, and their reduction to the recovery pipeline.

Both profiles are area densities: a Radon profile spreads the surface area over
the height omega . y, a wave trace over the distance |x - y| from a receiver.
Each flat facet spreads its area as a hat function between its sorted vertex
values, and that hat is integrated exactly over every bin, so the bins always
add up to the total area.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import _kernels
from .errors import (ClearanceError, ConfigurationError, GenericityError, GenericitySearchError,
                     ParameterError, ResolutionError)
from .geometry import TriangleMesh, distance_to_surface, surface_points
from .morse import (CLEAR_FRACTION, RECOVERY_GRADE, TOL_HESS, GenericityReport, certify,
                    is_focal)
from .oscillatory import SCHEMA_VERSION, LineSpectrum, facet_phases, spectrum
from .probes import ProbeFunction
from .recovery import TimeProfile

PAD_BINS = 2
MIN_BINS_PER_GAP = 8
# facets thinner than this fraction of a bin in the sliced direction count as flat
FLAT_FRACTION = 1e-9
# linearising |x - y| on a facet may move area by at most this fraction of a bin
WAVE_LINEAR_TOL = 0.01
SHELL = (1.5, 3.0)


class FocalWarning(UserWarning):
    pass


def _write_table(path, header, columns, meta):
    path = Path(path)
    rows = [",".join(header)]
    for row in zip(*(np.asarray(c).tolist() for c in columns)):
        rows.append(",".join(f"{v:.12g}" for v in row))
    path.write_text("\n".join(rows) + "\n")
    path.with_suffix(".json").write_text(
        json.dumps({"schema_version": SCHEMA_VERSION, **meta}, sort_keys=True, indent=2) + "\n")
    return path


def _read_table(path):
    path = Path(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    meta = json.loads(path.with_suffix(".json").read_text())
    return data, meta


def _uniform(grid, what):
    g = np.asarray(grid, float)
    if g.ndim != 1 or len(g) < 3:
        raise ParameterError(f"{what} grid needs at least 3 points")
    step = np.diff(g)
    if np.any(step <= 0) or np.ptp(step) > 1e-9 * step.mean():
        raise ParameterError(f"{what} grid must be uniform and increasing")
    return g, float(g[1] - g[0])


def _deposit(q0, d1, d2, area, grid, width, what):
    masses, flat, off = _kernels.deposit_hats(
        np.ascontiguousarray(q0), np.ascontiguousarray(d1), np.ascontiguousarray(d2),
        np.ascontiguousarray(area), float(grid[0] - 0.5 * width), width, len(grid),
        FLAT_FRACTION * width)
    if off:
        raise ParameterError(f"{what} grid misses {off} facets; widen it")
    return masses, int(flat)


# --- Radon route -----------------------------------------------------------------


@dataclass
class RadonProfile:
    omega: np.ndarray
    tau: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def dtau(self) -> float:
        return float(self.tau[1] - self.tau[0])

    @property
    def masses(self) -> np.ndarray:
        return self.values * self.dtau

    def write_csv(self, path) -> Path:
        meta = {"kind": "radon", "omega": [float(c) for c in self.omega], **self.metadata}
        return _write_table(path, ["tau", "value"], [self.tau, self.values], meta)

    @classmethod
    def read_csv(cls, path) -> "RadonProfile":
        data, meta = _read_table(path)
        omega = np.array(meta.pop("omega"), float)
        meta.pop("kind", None)
        meta.pop("schema_version", None)
        return cls(omega, data[:, 0], data[:, 1], meta)


def radon_grid(surface: TriangleMesh, omega, dtau: float) -> np.ndarray:
    """Bin centres covering the projection range plus PAD_BINS on each side."""
    w = ProbeFunction.height(omega).direction
    proj = surface.vertices[surface.used_vertices] @ w
    lo = np.floor(proj.min() / dtau) - PAD_BINS
    hi = np.ceil(proj.max() / dtau) + PAD_BINS
    return dtau * np.arange(lo, hi + 1)


def radon_profile(surface: TriangleMesh, omega, tau_grid=None,
                  dtau: Optional[float] = None) -> RadonProfile:
    """Area of the surface per unit height along omega, binned on tau_grid
    (uniform bin centres; default step 1e-3 of the projection width)."""
    if not isinstance(surface, TriangleMesh):
        raise ParameterError("radon_profile needs a triangle mesh")
    probe = ProbeFunction.height(omega)
    if tau_grid is None:
        proj = surface.vertices @ probe.direction
        dtau = 1e-3 * float(np.ptp(proj)) if dtau is None else float(dtau)
        tau_grid = radon_grid(surface, probe.direction, dtau)
    tau, width = _uniform(tau_grid, "tau")
    fp = facet_phases(surface, probe, 0.0)
    masses, flat = _deposit(fp.q0, fp.d1, fp.d2, 0.5 * fp.w2, tau, width, "tau")
    meta = {"surface": surface.name, "faces": surface.n_faces, "flat_faces": flat,
            "total_area": float(masses.sum())}
    return RadonProfile(probe.direction.copy(), tau, masses / width, meta)


def radon_to_profile_u(radon: RadonProfile, min_gap: Optional[float] = None) -> TimeProfile:
    """(1 / 2 i pi) d/dtau of the Radon profile by centred differences.

    `min_gap` is the smallest separation between critical heights, when
    known; fewer than MIN_BINS_PER_GAP bins across it raises ResolutionError.
    """
    h = radon.dtau
    if min_gap is not None and min_gap < MIN_BINS_PER_GAP * h:
        raise ResolutionError(
            f"bin width {h:.3g} leaves {min_gap / h:.1f} bins across the smallest gap "
            f"{min_gap:.3g}; need {MIN_BINS_PER_GAP}")
    v = np.asarray(radon.values, float)
    d = np.zeros_like(v)
    d[1:-1] = (v[2:] - v[:-2]) / (2 * h)
    u = d / (2j * np.pi)
    return TimeProfile(radon.tau.copy(), u, {"type": "centred-difference", "step": h}, 1.0,
                       one_sided=False, metadata={"source": radon.metadata.get("surface", ""),
                                                  "route": "radon"})


def radon_spectrum(radon: RadonProfile, dlam: float, N: int) -> LineSpectrum:
    """Fourier samples of the binned profile, s(lambda) = int R(tau) exp(-i lambda tau),
    treating each bin as uniformly filled."""
    h = radon.dtau
    if np.pi / dlam < 1.2 * float(np.max(np.abs(radon.tau))):
        raise ConfigurationError(f"dlam = {dlam} aliases heights up to {np.max(np.abs(radon.tau)):.3g}")
    lam = dlam * np.arange(int(N))
    vals = _kernels.phase_sum_uniform(radon.masses, radon.tau, 0.0, float(dlam), int(N))
    vals = vals * np.sinc(lam * h / (2 * np.pi))
    probe = ProbeFunction.height(radon.omega)
    meta = {"surface": radon.metadata.get("surface", ""), "dlam": float(dlam), "N": int(N),
            "psi_bound": float(np.max(np.abs(radon.tau))), "sign": "exp(-i*lambda*psi)",
            "method": "binned-radon", "route": "radon", "dtau": h}
    return LineSpectrum(probe, lam, vals, meta)


# --- wave route ------------------------------------------------------------------


@dataclass
class WaveTrace:
    x: np.ndarray
    t: np.ndarray
    values: np.ndarray
    density: np.ndarray
    odd_extension: bool = True
    metadata: dict = field(default_factory=dict)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def write_csv(self, path) -> Path:
        meta = {"kind": "wave", "x": [float(c) for c in self.x],
                "odd_extension": bool(self.odd_extension), **self.metadata}
        return _write_table(path, ["t", "value", "density"], [self.t, self.values, self.density],
                            meta)

    @classmethod
    def read_csv(cls, path) -> "WaveTrace":
        data, meta = _read_table(path)
        x = np.array(meta.pop("x"), float)
        odd = bool(meta.pop("odd_extension"))
        meta.pop("kind", None)
        meta.pop("schema_version", None)
        return cls(x, data[:, 0], data[:, 1], data[:, 2], odd, meta)


def _check_receiver(surface, x):
    from .geometry import bounding_diagonal
    d = distance_to_surface(surface, x)
    if d <= CLEAR_FRACTION * bounding_diagonal(surface):
        raise ClearanceError(f"receiver {tuple(float(c) for c in x)} lies on the surface "
                             f"(distance {d:.3g})")
    return d


def wave_trace(surface: TriangleMesh, x, t_grid) -> WaveTrace:
    """Spherical means u(t, x) = (1 / 4 pi t) * area density of |x - y| at t.

    t_grid holds uniform bin centres starting at or above 0. Facets are split
    until |x - y| is linear on each to WAVE_LINEAR_TOL of a bin.
    """
    if not isinstance(surface, TriangleMesh):
        raise ParameterError("wave_trace needs a triangle mesh")
    x = np.asarray(x, float).reshape(3)
    t, width = _uniform(t_grid, "t")
    if t[0] < -1e-12:
        raise ParameterError("t grid must start at t >= 0; negative times follow by oddness")
    dist = _check_receiver(surface, x)
    if is_focal(surface, x):
        warnings.warn(f"receiver {tuple(x)} is focal", FocalWarning, stacklevel=2)
    probe = ProbeFunction.distance(x)
    fp = facet_phases(surface, probe, 1.0 / width, tol=WAVE_LINEAR_TOL)
    masses, flat = _deposit(fp.q0, fp.d1, fp.d2, 0.5 * fp.w2, t, width, "t")
    density = masses / width
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.where(t > 0, density / (4 * np.pi * np.where(t > 0, t, 1.0)), 0.0)
    meta = {"surface": surface.name, "faces": surface.n_faces, "facets": fp.n_facets,
            "refinement_levels": fp.levels, "clearance": float(dist),
            "total_area": float(masses.sum())}
    return WaveTrace(x, t, values, density, True, meta)


def time_domain_operator(trace: WaveTrace) -> TimeProfile:
    """-2i (t d/dt + 1) u on the binned trace, with centred differences."""
    u = np.asarray(trace.values, float)
    du = np.zeros_like(u)
    du[1:-1] = (u[2:] - u[:-2]) / (2 * trace.dt)
    out = -2j * (trace.t * du + u)
    return TimeProfile(trace.t.copy(), out, {"type": "centred-difference", "step": trace.dt},
                       1.0, one_sided=False,
                       metadata={"source": trace.metadata.get("surface", ""), "route": "wave"})


def certify_receiver(surface, x, tol_gap=None, tol_hess: float = TOL_HESS, min_gap=None,
                     min_amplitude_ratio=None, min_fold_margin=None):
    """Excellence certificate for the distance function from x. Returns
    (passed, report, points); focal receivers fail."""
    x = np.asarray(x, float).reshape(3)
    _check_receiver(surface, x)
    if is_focal(surface, x):
        rep = GenericityReport(False, False, 0.0, 0.0, [{"reason": "focal"}], 0)
        return False, rep, []
    return certify(surface, ProbeFunction.distance(x), tol_gap=tol_gap, tol_hess=tol_hess,
                   min_gap=min_gap, min_amplitude_ratio=min_amplitude_ratio,
                   min_fold_margin=min_fold_margin)


def random_receiver(surface, seed, max_retries: int = 64, shell=SHELL, rng=None,
                    **certificate):
    """Draw receivers uniformly in the shell shell[0]..shell[1] times the
    circumradius around the bounding-box centre until one is certified.

    Keyword arguments go to certify_receiver; by default the recovery-grade
    thresholds apply. Returns (x, report, points).
    """
    rng = np.random.default_rng(seed) if rng is None else rng
    opts = dict(RECOVERY_GRADE)
    opts.update(certificate)
    pts = surface_points(surface)
    centre = 0.5 * (pts.min(axis=0) + pts.max(axis=0))
    radius = float(np.max(np.linalg.norm(pts - centre, axis=1)))
    r0, r1 = shell
    for _ in range(max_retries):
        d = rng.standard_normal(3)
        d /= np.linalg.norm(d)
        r = radius * np.cbrt(r0**3 + (r1**3 - r0**3) * rng.random())
        x = centre + r * d
        ok, rep, cps = certify_receiver(surface, x, **opts)
        if ok:
            return x, rep, cps
    raise GenericitySearchError(f"no certified receiver after {max_retries} draws (seed {seed})")


def wave_normalized_spectrum(surface, x, dlam: float, N: int, certify_first: bool = True,
                             **certificate) -> LineSpectrum:
    """s(lambda) = integral of exp(-i lambda |x - y|) over the surface.

    (lambda / 2 pi) s is the transform of -2i (t d/dt + 1) u(t, x), so the
    standard recovery applies. With certify_first the receiver must pass
    certify_receiver (GenericityError otherwise).
    """
    x = np.asarray(x, float).reshape(3)
    if certify_first:
        ok, rep, _ = certify_receiver(surface, x, **certificate)
        if not ok:
            raise GenericityError(f"receiver {tuple(float(c) for c in x)} is not certified: "
                                  f"{rep.offending[:3]}")
    spec = spectrum(surface, ProbeFunction.distance(x), dlam, N)
    spec.metadata.update(route="wave", receiver=[float(c) for c in x])
    return spec

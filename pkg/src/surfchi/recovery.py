"""From a line spectrum to its Dirac decomposition and the Euler characteristic.

The weighted spectrum (lambda / 2 pi) s(lambda) behaves like
sum_k a_k exp(-i lambda t_k) plus a tail of order 1/lambda. Peaks are located
on a windowed inverse transform and the (t_k, a_k) are then fitted on the raw
samples.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.optimize import least_squares

from . import _kernels
from .errors import (ClassificationError, ConditioningError, ConfigurationError,
                     EmptyDecompositionError, ParameterError)
from .oscillatory import SCHEMA_VERSION, LineSpectrum

DELTA_PHASE = 0.15
REL_THRESHOLD = 0.2
ABS_FLOOR = 1e-8
MAX_CONDITION = 1e8
POOR_FIT_RATIO = 0.05


class PoorFitWarning(UserWarning):
    pass


def _window(name, lam, lam_max):
    x = lam / lam_max
    if name == "hann":
        return np.cos(0.5 * np.pi * x) ** 2
    if name == "hann-onesided":
        return np.sin(np.pi * x) ** 2
    if name in ("rect", "none"):
        return np.ones_like(lam)
    raise ParameterError(f"unknown window '{name}'")


def _trapezoid_weights(lam):
    q = np.empty_like(lam)
    d = np.diff(lam)
    q[1:-1] = 0.5 * (d[1:] + d[:-1])
    q[0], q[-1] = 0.5 * d[0], 0.5 * d[-1]
    return q


@dataclass
class TimeProfile:
    t: np.ndarray
    values: np.ndarray
    window: dict
    normalization: float
    one_sided: bool = True
    metadata: dict = field(default_factory=dict)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def write_csv(self, path) -> Path:
        path = Path(path)
        rows = ["t,re,im,abs"] + [
            f"{t:.12g},{v.real:.12g},{v.imag:.12g},{abs(v):.12g}"
            for t, v in zip(self.t.tolist(), self.values.tolist())
        ]
        path.write_text("\n".join(rows) + "\n")
        return path


def synthesize_profile(spec: LineSpectrum, window: str = "hann", T: Optional[float] = None,
                       M: Optional[int] = None, one_sided: bool = True) -> TimeProfile:
    """Windowed inverse transform of (lambda / 2 pi) s(lambda) on [-T, T].

    Scaled so that a single term a * exp(-i lambda t0) gives the value a at t0.
    `one_sided` keeps only lambda >= 0; otherwise the samples are extended to
    lambda < 0 by w(-lambda) = -conj(w(lambda)).
    """
    lam = np.asarray(spec.lambdas, float)
    if np.any(lam < 0) or np.any(np.diff(lam) <= 0):
        raise ConfigurationError("spectrum must sit on an increasing grid of lambda >= 0")
    dlam = float(lam[1] - lam[0])
    nyq = np.pi / dlam
    if T is None:
        bound = spec.metadata.get("psi_bound")
        T = min(nyq, 1.25 * float(bound) + 0.5) if bound else nyq
    T = float(T)
    if T > nyq * (1 + 1e-12):
        raise ConfigurationError(f"T = {T:.4g} exceeds the Nyquist bound pi/dlam = {nyq:.4g}")
    N = len(lam)
    if M is None:
        M = max(2 * N, int(np.ceil(2 * T / (np.pi / lam[-1] / 4))))
    if M < 2 * N:
        raise ConfigurationError(f"need M >= 2N = {2 * N} time samples, got {M}")
    lam_max = float(lam[-1])
    w = _window(window, lam, lam_max) * _trapezoid_weights(lam)
    y = lam / (2 * np.pi) * np.asarray(spec.values, complex)
    t = np.linspace(-T, T, int(M))
    if one_sided:
        norm = float(w.sum())
        vals = _kernels.exp_sum_matrix(lam, t, (y * w).astype(complex)) / norm
    else:
        lam2 = np.concatenate([-lam[:0:-1], lam])
        w2 = np.concatenate([w[:0:-1], w])
        y2 = np.concatenate([-np.conj(y[:0:-1]), y])
        norm = float(w2.sum())
        vals = _kernels.exp_sum_matrix(lam2, t, (y2 * w2).astype(complex)) / norm
    return TimeProfile(t, vals, {"type": window, "Lambda": lam_max}, norm, one_sided,
                       {"source": spec.metadata.get("surface", "")})


def positive_frequency_part(values: np.ndarray) -> np.ndarray:
    """Keep the exp(+i lambda t) components with lambda > 0 (FFT over t)."""
    F = np.fft.fft(values)
    M = len(values)
    mask = np.zeros(M)
    mask[1:(M + 1) // 2] = 1.0
    mask[0] = 0.5
    if M % 2 == 0:
        mask[M // 2] = 0.5
    return np.fft.ifft(F * mask)


def detect_peaks(profile: TimeProfile, rel_threshold: float = REL_THRESHOLD,
                 abs_floor: float = ABS_FLOOR) -> np.ndarray:
    """Local maxima of |u| above rel_threshold * max |u|, refined by a parabola
    through the three samples around each maximum."""
    vals = profile.values if profile.one_sided else positive_frequency_part(profile.values)
    mag = np.abs(vals)
    top = float(mag.max()) if len(mag) else 0.0
    if top <= abs_floor:
        raise EmptyDecompositionError(f"profile is flat (max |u| = {top:.3g})")
    thr = max(rel_threshold * top, abs_floor)
    inner = mag[1:-1]
    is_peak = (inner > mag[:-2]) & (inner >= mag[2:]) & (inner >= thr)
    idx = np.flatnonzero(is_peak) + 1
    if len(idx) == 0:
        raise EmptyDecompositionError("no local maximum above threshold")
    y0, y1, y2 = mag[idx - 1], mag[idx], mag[idx + 1]
    den = y0 - 2 * y1 + y2
    off = np.where(den != 0, 0.5 * (y0 - y2) / np.where(den == 0, 1, den), 0.0)
    return np.sort(profile.t[idx] + off * profile.dt)


@dataclass
class DiracEntry:
    t: float
    a: complex
    c: complex

    @property
    def quantized(self) -> float:
        """-Re(a^2) / |a|^2."""
        return float(-(self.a * self.a).real / abs(self.a) ** 2)

    @property
    def parity(self) -> str:
        return "even" if self.quantized > 0 else "odd"


@dataclass
class DiracDecomposition:
    entries: list
    residual_rms: float
    fit_window: tuple
    relative_residual: float = 0.0
    warnings: list = field(default_factory=list)

    @property
    def times(self):
        return np.array([e.t for e in self.entries])

    @property
    def amplitudes(self):
        return np.array([e.a for e in self.entries])

    def to_dict(self, delta_phase: float = DELTA_PHASE) -> dict:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "entries": [
                {"t": float(e.t), "a": {"re": float(e.a.real), "im": float(e.a.imag)},
                 "c": {"re": float(e.c.real), "im": float(e.c.imag)},
                 "quantized": e.quantized, "parity": e.parity}
                for e in self.entries
            ],
            "residual_rms": float(self.residual_rms),
            "relative_residual": float(self.relative_residual),
            "fit_window": [float(x) for x in self.fit_window],
            "warnings": list(self.warnings),
        }
        try:
            chi, contrib = euler_characteristic(self, delta_phase)
            doc["contributions"] = contrib
            doc["euler_characteristic"] = chi
        except ClassificationError as exc:
            doc["contributions"] = None
            doc["euler_characteristic"] = None
            doc["classification_error"] = str(exc)
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _design(lam, t):
    E = np.exp(-1j * np.outer(lam, t))
    return np.concatenate([E, E / lam[:, None]], axis=1)


def _solve_linear(B, y):
    scale = np.linalg.norm(B, axis=0)
    coef, *_ = np.linalg.lstsq(B / scale, y, rcond=None)
    return coef / scale, scale


def fit_amplitudes(spec: LineSpectrum, t_init, lam_lo: Optional[float] = None,
                   lam_hi: Optional[float] = None, search: Optional[float] = None,
                   max_condition: float = MAX_CONDITION) -> DiracDecomposition:
    """Variable-projection fit of sum_k (a_k + c_k / lambda) exp(-i lambda t_k)
    to (lambda / 2 pi) s(lambda) on [lam_lo, lam_hi] (default [Lambda/4, Lambda]).

    The t_k move within +-search (default 2 pi / Lambda) of t_init.
    """
    t_init = np.sort(np.atleast_1d(np.asarray(t_init, float)))
    if len(t_init) == 0:
        raise EmptyDecompositionError("no initial peak positions")
    lam_all = np.asarray(spec.lambdas, float)
    Lam = float(lam_all[-1])
    res_cell = 2 * np.pi / Lam
    gaps = np.diff(t_init)
    if np.any(gaps <= 2 * res_cell):
        k = int(np.argmin(gaps))
        raise ConditioningError(
            f"peaks at t={t_init[k]:.4g} and t={t_init[k + 1]:.4g} are closer than "
            f"2 x 2pi/Lambda = {2 * res_cell:.3g}", pair=(float(t_init[k]), float(t_init[k + 1])))
    lam_lo = 0.25 * Lam if lam_lo is None else float(lam_lo)
    lam_hi = Lam if lam_hi is None else float(lam_hi)
    sel = (lam_all >= lam_lo) & (lam_all <= lam_hi) & (lam_all > 0)
    lam = lam_all[sel]
    y = lam / (2 * np.pi) * np.asarray(spec.values, complex)[sel]
    search = res_cell if search is None else float(search)
    half_gap = 0.45 * gaps.min() if len(gaps) else np.inf
    width = min(search, half_gap)

    def residual(t):
        B = _design(lam, t)
        coef, _ = _solve_linear(B, y)
        r = y - B @ coef
        return np.concatenate([r.real, r.imag])

    sol = least_squares(residual, t_init, bounds=(t_init - width, t_init + width),
                        x_scale=res_cell, xtol=1e-14, ftol=1e-14, gtol=1e-14, method="trf")
    t = sol.x
    B = _design(lam, t)
    coef, scale = _solve_linear(B, y)
    sv = np.linalg.svd(B / scale, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    if cond > max_condition:
        k = int(np.argmin(np.diff(t))) if len(t) > 1 else 0
        pair = (float(t[k]), float(t[min(k + 1, len(t) - 1)]))
        raise ConditioningError(f"design matrix condition {cond:.3g} exceeds {max_condition:.0e}; "
                                f"closest pair {pair}", pair=pair)
    r = y - B @ coef
    rms = float(np.sqrt(np.mean(np.abs(r) ** 2)))
    rel = rms / float(np.sqrt(np.mean(np.abs(y) ** 2)))
    K = len(t)
    entries = [DiracEntry(float(t[k]), complex(coef[k]), complex(coef[K + k])) for k in range(K)]
    notes = []
    if rel > POOR_FIT_RATIO:
        msg = f"poor fit: relative residual {rel:.3g} above {POOR_FIT_RATIO}"
        notes.append(msg)
        warnings.warn(msg, PoorFitWarning, stacklevel=2)
    for e in entries:
        if abs(e.a) == 0:
            raise ClassificationError(f"zero amplitude at t={e.t:.4g}")
    return DiracDecomposition(entries, rms, (lam_lo, lam_hi), rel, notes)


@dataclass
class ScalingEstimate:
    value: complex
    half: complex
    extrapolated: complex
    accuracy: float
    Lambda: float


def scaling_amplitude(spec: LineSpectrum, t0: float) -> ScalingEstimate:
    """Running average (1/L) int_0^L (lambda/2pi) s(lambda) exp(i lambda t0) dlambda
    at L = Lambda and L = Lambda / 2."""
    lam = np.asarray(spec.lambdas, float)
    dlam = float(lam[1] - lam[0])
    if abs(t0) > np.pi / dlam:
        raise ConfigurationError(f"t0 = {t0} outside the Nyquist range +-{np.pi / dlam:.4g}")
    g = lam / (2 * np.pi) * np.asarray(spec.values, complex) * np.exp(1j * lam * t0)

    def average(n):
        seg_l, seg_g = lam[:n], g[:n]
        return complex(np.sum(_trapezoid_weights(seg_l) * seg_g) / (seg_l[-1] - seg_l[0]))

    full = average(len(lam))
    half = average(len(lam) // 2 + 1)
    return ScalingEstimate(full, half, 2 * full - half, abs(full - half), float(lam[-1]))


def euler_characteristic(dec: DiracDecomposition, delta_phase: float = DELTA_PHASE):
    """chi = sum of round(-Re(a^2)/|a|^2) over entries; returns (chi, contributions)."""
    if not dec.entries:
        raise EmptyDecompositionError("decomposition has no entries")
    contrib = []
    for e in dec.entries:
        q = e.quantized
        if abs(q) < 1 - delta_phase:
            raise ClassificationError(
                f"entry at t={e.t:.4g} has -Re(a^2)/|a|^2 = {q:.3f}, not within {delta_phase} of +-1")
        contrib.append(int(np.sign(q)))
    return int(sum(contrib)), contrib


@dataclass
class Recovery:
    profile: TimeProfile
    peaks: np.ndarray
    decomposition: DiracDecomposition
    chi: int
    contributions: list


def recover(spec: LineSpectrum, rel_threshold: float = REL_THRESHOLD, window: str = "hann",
            delta_phase: float = DELTA_PHASE, T: Optional[float] = None) -> Recovery:
    """Profile, peaks, fit and chi in one call."""
    prof = synthesize_profile(spec, window=window, T=T)
    peaks = detect_peaks(prof, rel_threshold)
    dec = fit_amplitudes(spec, peaks)
    chi, contrib = euler_characteristic(dec, delta_phase)
    return Recovery(prof, peaks, dec, chi, contrib)

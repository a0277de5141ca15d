import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surfchi.errors import (ClassificationError, ConditioningError, ConfigurationError,
                            EmptyDecompositionError)
from surfchi.oscillatory import LineSpectrum
from surfchi.probes import ProbeFunction
from surfchi.recovery import (PoorFitWarning, detect_peaks, euler_characteristic,
                              fit_amplitudes, recover, scaling_amplitude, synthesize_profile)

LAM = np.arange(4001) * 0.05
PROBE = ProbeFunction.height([0, 0, 1])


def synthetic(times, amps, nuisance=None, lam=LAM):
    """Spectrum whose (lambda / 2 pi) s is exactly sum (a + c / lambda) exp(-i lambda t)."""
    nuisance = np.zeros(len(times)) if nuisance is None else nuisance
    safe = np.where(lam == 0, 1.0, lam)
    y = sum((a + c / safe) * np.exp(-1j * lam * t) for t, a, c in zip(times, amps, nuisance))
    vals = np.where(lam == 0, 0.0, 2 * np.pi * y / safe)
    return LineSpectrum(PROBE, lam, vals.astype(complex), {"psi_bound": max(abs(t) for t in times)})


def test_exact_model_is_fitted_to_round_off():
    t = [-1.3, -0.2, 0.7, 1.9]
    a = [-1j * 1.7, 0.8, -0.6, 1j * 0.5]
    c = [0.05, -0.1j, 0.02 + 0.03j, 0.0]
    spec = synthetic(t, a, c)
    dec = fit_amplitudes(spec, np.array(t) + 0.01)
    assert np.allclose(dec.times, t, atol=1e-8)
    assert np.allclose(dec.amplitudes, a, atol=1e-8)
    assert np.allclose([e.c for e in dec.entries], c, atol=1e-6)
    assert dec.relative_residual < 1e-10


def test_sphere_closed_form_recovers_two():
    lam = LAM
    vals = np.where(lam == 0, 4 * np.pi, 4 * np.pi * np.sin(lam) / np.where(lam == 0, 1, lam))
    spec = LineSpectrum(PROBE, lam, vals.astype(complex), {"psi_bound": 1.0})
    rec = recover(spec)
    assert rec.peaks == pytest.approx([-1, 1], abs=2e-3)
    # (lambda / 2 pi) s = 2 sin(lambda): amplitude -i at t = -1 and i at t = 1
    assert rec.decomposition.amplitudes == pytest.approx([-1j, 1j], abs=1e-8)
    assert rec.chi == 2 and rec.contributions == [1, 1]


def test_profile_peak_height_equals_amplitude():
    spec = synthetic([0.4], [2.0 - 1.0j])
    prof = synthesize_profile(spec)
    k = np.argmin(np.abs(prof.t - 0.4))
    assert abs(prof.values[k]) == pytest.approx(abs(2 - 1j), rel=5e-3)


def test_two_sided_profile_gives_same_peaks():
    spec = synthetic([-0.9, 0.3, 1.1], [1j, 1.0, -1j])
    one = detect_peaks(synthesize_profile(spec))
    two = detect_peaks(synthesize_profile(spec, one_sided=False))
    assert np.allclose(one, two, atol=5e-3)


amp_sets = st.lists(st.sampled_from([1j, -1j, 1.0, -1.0]), min_size=1, max_size=6)


@settings(max_examples=25)
@given(amp_sets, st.floats(0.5, 2.0), st.integers(0, 1000))
def test_chi_is_sum_of_parities(units, scale, seed):
    rng = np.random.default_rng(seed)
    n = len(units)
    times = np.sort(-2 + 0.5 * np.arange(n) + rng.uniform(-0.05, 0.05, n))
    amps = [u * scale * rng.uniform(0.5, 1.0) for u in units]
    rec = recover(synthetic(times, amps))
    want = sum(1 if u in (1j, -1j) else -1 for u in units)
    assert rec.chi == want


def test_close_peaks_raise_conditioning():
    spec = synthetic([0.0, 0.5], [1j, 1j])
    with pytest.raises(ConditioningError) as info:
        fit_amplitudes(spec, [0.0, 0.04])
    assert info.value.pair == pytest.approx((0.0, 0.04))


def test_bad_profile_settings():
    spec = synthetic([0.0], [1j])
    with pytest.raises(ConfigurationError):
        synthesize_profile(spec, T=1e3)
    with pytest.raises(ConfigurationError):
        synthesize_profile(spec, M=10)
    rev = LineSpectrum(PROBE, LAM[::-1], spec.values[::-1])
    with pytest.raises(ConfigurationError):
        synthesize_profile(rev)


def test_unquantized_phase_is_rejected():
    dec = fit_amplitudes(synthetic([0.0], [np.exp(1j * np.pi / 4)]), [0.0])
    with pytest.raises(ClassificationError):
        euler_characteristic(dec)


def test_flat_spectrum_is_empty():
    spec = LineSpectrum(PROBE, LAM, np.zeros(len(LAM), complex))
    with pytest.raises(EmptyDecompositionError):
        detect_peaks(synthesize_profile(spec, T=3.0))


def test_noise_triggers_poor_fit_warning():
    spec = synthetic([0.0], [1j])
    rng = np.random.default_rng(0)
    spec.values = spec.values + 3.0 * (rng.normal(size=len(LAM)) + 1j * rng.normal(size=len(LAM)))
    with pytest.warns(PoorFitWarning):
        dec = fit_amplitudes(spec, [0.0])
    assert dec.warnings


def test_scaling_average_converges_to_amplitude():
    spec = synthetic([-0.8, 0.6], [-1j * 2.0, 1.0])
    est = scaling_amplitude(spec, 0.6)
    # the other line contributes O(1 / (Lambda * gap))
    assert abs(est.value - 1.0) < 2e-2
    assert abs(est.value - 1.0) < 2 * est.accuracy
    alone = scaling_amplitude(synthetic([0.6], [1.0]), 0.6)
    # the synthetic sample at lambda = 0 is zero, which drops half a trapezoid cell
    assert alone.value == pytest.approx(1.0 - 0.05 / (2 * 200.0), abs=1e-12)
    with pytest.raises(ConfigurationError):
        scaling_amplitude(spec, 100.0)


def test_decomposition_json_has_chi():
    dec = fit_amplitudes(synthetic([-1, 1], [-1j, 1j]), [-1, 1])
    doc = dec.to_dict()
    assert doc["euler_characteristic"] == 2
    assert [e["parity"] for e in doc["entries"]] == ["even", "even"]

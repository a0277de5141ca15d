"""Euler characteristic of closed surfaces from oscillatory integrals of their
area measure: spectra, Radon profiles and wave traces, their Dirac
decompositions, and the Morse-theory checks that certify them."""

from .errors import *  # noqa: F401,F403
from .geometry import (ImplicitSurface, ParametricSurface, TriangleMesh, angle_defect_total,
                       euler_characteristic_mesh, gauss_curvature, generate_parametric,
                       icosphere, parametric_surface, read_obj, total_area, write_obj)
from .meshing import implicit_preset, mesh_implicit
from .morse import (CriticalPoint, GenericityReport, critical_points, excellence_check,
                    fold_margin, is_focal, morse_polynomial, random_generic_direction)
from .oscillatory import LineSpectrum, pairing, predict, spectrum, triangle_plane_wave
from .probes import ProbeFunction
from .recovery import (DiracDecomposition, TimeProfile, detect_peaks, euler_characteristic,
                       fit_amplitudes, recover, scaling_amplitude, synthesize_profile)
from .transforms import (RadonProfile, WaveTrace, radon_profile, radon_spectrum,
                         radon_to_profile_u, random_receiver, time_domain_operator, wave_trace,
                         wave_normalized_spectrum)

__version__ = "0.1.0"

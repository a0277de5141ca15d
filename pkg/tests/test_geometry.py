import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from surfchi.errors import DegenerateChartError, DegenerateFaceError, ParameterError, TopologyError
from surfchi.geometry import (TriangleMesh, angle_defect_total, distance_to_surface,
                              euler_characteristic_mesh, fundamental_forms, gauss_curvature,
                              generate_parametric, icosphere, parametric_surface, read_obj,
                              total_area, triangle_area, vertex_curvature, write_obj)

TETRA_V = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], float)
TETRA_F = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])


def tetra():
    return TriangleMesh(TETRA_V, TETRA_F, name="tetra")


def test_tetrahedron_chi_and_defect():
    m = tetra()
    assert euler_characteristic_mesh(m) == 2
    assert angle_defect_total(m) == pytest.approx(4 * np.pi, rel=1e-12)


@pytest.mark.parametrize("kind,params,chi", [
    ("sphere", {"R": 1.0}, 2),
    ("torus", {"R": 2.0, "r": 1.0}, 0),
    ("ellipsoid", {"a": 1.0, "b": 2.0, "c": 0.5}, 2),
])
def test_generated_meshes_are_closed_with_expected_chi(kind, params, chi):
    _, mesh = generate_parametric(kind, params, 64)
    assert euler_characteristic_mesh(mesh) == chi
    assert angle_defect_total(mesh) == pytest.approx(2 * np.pi * chi, abs=1e-9)
    assert mesh.signed_volume() > 0


def test_sphere_mesh_area_converges():
    _, mesh = generate_parametric("sphere", {"R": 1.0}, 128)
    assert abs(total_area(mesh) - 4 * np.pi) / (4 * np.pi) < 1e-3


def test_sphere_area_error_is_second_order():
    errs = []
    for n in (32, 64, 128):
        _, mesh = generate_parametric("sphere", {"R": 1.0}, n)
        errs.append(abs(total_area(mesh) - 4 * np.pi))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(rates - 2) < 0.2)


def test_parametric_areas():
    assert total_area(parametric_surface("sphere", R=1.0)) == pytest.approx(4 * np.pi, rel=1e-8)
    assert total_area(parametric_surface("torus", R=2.0, r=1.0)) == pytest.approx(
        8 * np.pi**2, rel=1e-6)


def test_right_triangle_area():
    assert triangle_area([0, 0, 0], [1, 0, 0], [0, 1, 0]) == 0.5


@pytest.mark.parametrize("kind,params", [
    ("sphere", {"R": -1.0}),
    ("torus", {"R": 1.0, "r": 2.0}),
    ("torus", {"R": 1.0, "r": 1.0}),
    ("ellipsoid", {"a": 1.0, "b": 0.0, "c": 1.0}),
    ("cube", {}),
])
def test_invalid_parameters_rejected(kind, params):
    with pytest.raises(ParameterError):
        generate_parametric(kind, params, 16)


def test_resolution_below_three_rejected():
    with pytest.raises(ParameterError):
        generate_parametric("torus", {"R": 2.0, "r": 1.0}, 2)


def test_open_mesh_rejected():
    with pytest.raises(TopologyError, match="boundary"):
        TriangleMesh(TETRA_V, TETRA_F[:3])


def test_inconsistent_orientation_rejected():
    f = TETRA_F.copy()
    f[0] = f[0, ::-1]
    with pytest.raises(TopologyError):
        TriangleMesh(TETRA_V, f)


def test_degenerate_face_rejected():
    v = np.vstack([TETRA_V, TETRA_V[0]])
    f = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
    TriangleMesh(v, f)  # unused extra vertex is fine
    v2 = TETRA_V.copy()
    v2[3] = 0.5 * (v2[0] + v2[1])
    with pytest.raises(DegenerateFaceError):
        TriangleMesh(v2, TETRA_F)


def test_flip_keeps_scalars_and_negates_normals():
    m = icosphere(2)
    f = m.flipped()
    assert np.allclose(f.face_normals, -m.face_normals)
    assert np.allclose(f.face_areas, m.face_areas)
    assert euler_characteristic_mesh(f) == euler_characteristic_mesh(m)
    assert angle_defect_total(f) == pytest.approx(angle_defect_total(m), rel=1e-12)


def test_gauss_curvature_sphere():
    assert gauss_curvature(parametric_surface("sphere", R=1.0), (0.7, 1.3)) == pytest.approx(1.0)
    assert gauss_curvature(parametric_surface("sphere", R=2.0), (1.1, 4.0)) == pytest.approx(0.25)


def test_gauss_curvature_torus_equators():
    # oracle: centred differences of an explicit parametrisation give
    # 0.3333333315 at (3,0,0) and -0.9999999945 at (1,0,0)
    t = parametric_surface("torus", R=2.0, r=1.0)
    assert gauss_curvature(t, (0.0, 0.0)) == pytest.approx(1 / 3, rel=1e-9)
    assert gauss_curvature(t, (0.0, np.pi)) == pytest.approx(-1.0, rel=1e-9)


@given(st.floats(0.3, 2.8), st.floats(0.0, 6.28))
def test_fundamental_forms_match_finite_differences(u, v):
    chart = parametric_surface("ellipsoid", a=1.0, b=1.5, c=0.7).primary
    E, F, G, L, M, N = fundamental_forms(chart, np.array(u), np.array(v))
    h = 1e-4
    X = chart.point
    xu = (X(u + h, v) - X(u - h, v)) / (2 * h)
    xv = (X(u, v + h) - X(u, v - h)) / (2 * h)
    xuu = (X(u + h, v) - 2 * X(u, v) + X(u - h, v)) / h**2
    xvv = (X(u, v + h) - 2 * X(u, v) + X(u, v - h)) / h**2
    xuv = (X(u + h, v + h) - X(u + h, v - h) - X(u - h, v + h) + X(u - h, v - h)) / (4 * h * h)
    n = np.cross(xu, xv)
    n /= np.linalg.norm(n)
    K_fd = ((xuu @ n) * (xvv @ n) - (xuv @ n) ** 2) / ((xu @ xu) * (xv @ xv) - (xu @ xv) ** 2)
    assert (L * N - M * M) / (E * G - F * F) == pytest.approx(K_fd, rel=1e-5)


def test_pole_is_degenerate_chart():
    with pytest.raises(DegenerateChartError):
        gauss_curvature(parametric_surface("sphere", R=1.0), (0.0, 0.0))


def test_obj_round_trip(tmp_path):
    m = icosphere(1)
    p = write_obj(m, tmp_path / "ico.obj", ["made in a test"])
    back = read_obj(p)
    assert np.array_equal(back.vertices, m.vertices)
    assert np.array_equal(back.faces, m.faces)
    assert p.read_text().startswith("# made in a test")


def test_obj_rejects_quads(tmp_path):
    p = tmp_path / "quad.obj"
    p.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    with pytest.raises(ParameterError):
        read_obj(p)


def test_distance_to_surface():
    s = parametric_surface("sphere", R=1.0)
    assert distance_to_surface(s, [2.0, 0.5, 0.0]) == pytest.approx(np.hypot(2, 0.5) - 1, rel=1e-9)
    m = icosphere(3)
    assert distance_to_surface(m, [0, 0, 3.0]) == pytest.approx(2.0, abs=1e-3)


def test_vertex_curvature_on_sphere():
    K, _ = vertex_curvature(icosphere(4))
    assert np.median(K) == pytest.approx(1.0, rel=1e-2)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_translation_keeps_measurements(x, y, z):
    m = icosphere(1)
    t = m.translated([x, y, z])
    assert total_area(t) == pytest.approx(total_area(m), rel=1e-12)
    assert euler_characteristic_mesh(t) == 2

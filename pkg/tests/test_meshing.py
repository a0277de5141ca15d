import numpy as np
import pytest

from surfchi.errors import ParameterError, TopologyError
from surfchi.geometry import ImplicitSurface, angle_defect_total, euler_characteristic_mesh
from surfchi.meshing import genus2_field, implicit_preset, mesh_implicit, sphere_field, torus_field


def test_sphere_level_set():
    m = mesh_implicit(sphere_field(), 32)
    assert euler_characteristic_mesh(m) == 2
    r = np.linalg.norm(m.vertices[m.used_vertices], axis=1)
    assert np.allclose(r, 1.0, atol=1e-8)


def test_torus_level_set():
    assert euler_characteristic_mesh(mesh_implicit(torus_field(2.0, 1.0), 64)) == 0


def test_genus2_fixture(genus2_fx):
    m = genus2_fx.mesh
    assert euler_characteristic_mesh(m) == -2
    assert angle_defect_total(m) == pytest.approx(-4 * np.pi, rel=1e-6)


def test_normals_follow_gradient():
    surf = genus2_field()
    m = mesh_implicit(surf, 48)
    cen = m.vertices[m.faces].mean(axis=1)
    g = surf.gradient(cen)
    assert np.all(np.einsum("ij,ij->i", g, m.face_normals) > 0)


def test_low_resolution_rejected():
    with pytest.raises(ParameterError):
        mesh_implicit(sphere_field(), 8)


def test_box_must_contain_surface():
    f = sphere_field()
    tight = ImplicitSurface(f.field, f.gradient, ((-0.9, -2, -2), (2, 2, 2)), f.hessian)
    with pytest.raises(TopologyError):
        mesh_implicit(tight, 32)


def test_unknown_preset():
    with pytest.raises(ParameterError):
        implicit_preset("klein")

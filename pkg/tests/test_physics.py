import math

import numpy as np
import pytest

from shiftpore import physics
from shiftpore.errors import ConfigurationError, UnsupportedConfigurationError

MAT = physics.BENCHMARK_MATERIAL


def test_benchmark_material_units():
    assert MAT.G == 22e3 and MAT.nu == 0.25
    assert MAT.lam == pytest.approx(22e3)
    assert MAT.gamma == pytest.approx(1.8e-7, rel=1e-12)
    # characteristic Darcy speed gamma p_max / L
    assert MAT.gamma * 24.0 / 1.0 == pytest.approx(4.32e-6, rel=1e-3)


def test_pore_pressure_only():
    np.testing.assert_allclose(physics.plane_strain_stress(np.zeros((2, 2)), 4.0, MAT), -np.eye(2))


def test_uniaxial_strain():
    s = physics.plane_strain_stress(np.diag([1e-4, 0.0]), 0.0, MAT)
    assert s[0, 0] == pytest.approx(6.6) and s[1, 1] == pytest.approx(2.2) and s[0, 1] == 0.0


def test_rotation_is_stress_free():
    w = np.array([[0.0, 3e-4], [-3e-4, 0.0]])
    assert np.abs(physics.plane_strain_stress(w, 0.0, MAT)).max() == 0.0


def test_wendland_values():
    src = physics.SourceTerm((0.1, -0.2), 0.1, 1e-5)
    assert physics.wendland(np.array([0.1, -0.2]), src) == pytest.approx(7 / (math.pi * 0.01), abs=1e-12)
    assert 7 / (math.pi * 0.01) == pytest.approx(222.8169, abs=1e-4)
    assert physics.wendland(np.array([0.2, -0.2]), src) == 0.0
    assert physics.wendland(np.array([0.5, 0.5]), src) == 0.0


def test_wendland_c2_at_support_edge():
    src = physics.SourceTerm((0.0, 0.0), 1.0, 1.0)
    h = 1e-3
    f = lambda r: float(physics.wendland(np.array([r, 0.0]), src))
    d1 = (f(1.0) - f(1.0 - h)) / h
    d2 = (f(1.0) - 2 * f(1.0 - h) + f(1.0 - 2 * h)) / h**2
    assert f(1.0) == 0.0
    assert abs(d1) < 1e-6 and abs(d2) < 1e-2


def test_frames_and_tensors():
    law = physics.InterfaceLaw(k_n=3.0, k_t=1.0)
    n, m = physics.interface_frame(np.array([0.0, 1.0]))
    np.testing.assert_array_equal(m, [-1.0, 0.0])
    np.testing.assert_allclose(physics.stiffness_tensor(law, [0.0, 1.0]), [[1.0, 0.0], [0.0, 3.0]])
    np.testing.assert_allclose(physics.stiffness_tensor(law, [1.0, 0.0]), [[3.0, 0.0], [0.0, 1.0]])
    iso = physics.InterfaceLaw(k_n=2.0, k_t=2.0)
    nh = np.array([-0.6, 1.0]) / math.sqrt(1.36)
    np.testing.assert_allclose(physics.stiffness_tensor(iso, nh), 2.0 * np.eye(2), atol=1e-15)


def test_tensors_psd():
    rng = np.random.default_rng(3)
    for _ in range(20):
        law = physics.InterfaceLaw(*rng.uniform(0, 10, size=5))
        th = rng.uniform(0, 2 * math.pi)
        nh = np.array([math.cos(th), math.sin(th)])
        for T in (physics.stiffness_tensor(law, nh), physics.viscosity_tensor(law, nh)):
            assert np.allclose(T, T.T)
            assert np.linalg.eigvalsh(T).min() >= -1e-12


def test_spring_traction():
    nh = np.array([0.6, 0.8])
    assert np.all(physics.spring_traction(np.zeros(2), np.zeros(2), physics.InterfaceLaw(k_n=1e8, k_t=1e8), nh) == 0)
    t = physics.spring_traction(1e-8 * nh, np.zeros(2), physics.InterfaceLaw(k_n=1e8, k_t=1e8), nh)
    np.testing.assert_allclose(t, nh, rtol=1e-14)
    assert np.all(physics.spring_traction(np.ones(2), np.ones(2), physics.InterfaceLaw(), nh) == 0)
    visc = physics.spring_traction(np.zeros(2), nh, physics.InterfaceLaw(h_n=2.0), nh)
    np.testing.assert_allclose(visc, 2 * nh)


def test_robin_flux():
    assert physics.robin_flux(3.0, physics.InterfaceLaw(T_n=0.0)) == 0.0
    assert physics.robin_flux(2.0, physics.InterfaceLaw(T_n=5.0)) == -10.0
    assert physics.robin_flux(0.0, physics.InterfaceLaw(T_n=5.0)) == 0.0


@pytest.mark.parametrize("kw", [dict(G=-1, nu=0.2, alpha=0.5, beta=1, gamma=1),
                                dict(G=1, nu=0.5, alpha=0.5, beta=1, gamma=1),
                                dict(G=1, nu=0.2, alpha=1.5, beta=1, gamma=1),
                                dict(G=1, nu=0.2, alpha=0.5, beta=0, gamma=1)])
def test_material_validation(kw):
    with pytest.raises(ConfigurationError):
        physics.MaterialParams(**kw)


def test_law_validation():
    with pytest.raises(ConfigurationError):
        physics.InterfaceLaw(T_n=-1.0)
    with pytest.raises(UnsupportedConfigurationError):
        physics.InterfaceLaw(k_nt=1.0)
    with pytest.raises(ConfigurationError):
        physics.SourceTerm((0, 0), 0.0, 1.0)

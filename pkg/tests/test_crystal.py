import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vortexlab import AlphaModel, Configuration, CrystalSpec, DomainError, build_crystal, center_intensity, velocity_field
from vortexlab.crystal import center_intensity_sum, stationarity_residual

from conftest import ALPHAS


def test_three_vortex_layout():
    Z = build_crystal(CrystalSpec(3))
    assert np.array_equal(Z.positions, [[-1.0, 0.0], [1.0, 0.0], [0.0, 0.0]])
    # ring vortices at distance 2 and 1 from each other/centre: a_N = -2^-alpha
    assert Z.intensities[-1] == pytest.approx(-0.5, abs=1e-15)


@pytest.mark.parametrize("alpha", ALPHAS)
def test_three_vortex_center_intensity(alpha):
    spec = CrystalSpec(3, AlphaModel(alpha))
    assert center_intensity(spec) == pytest.approx(-(2.0 ** -alpha), rel=1e-14)


def test_four_vortex_center_intensity_euler():
    # triangle of unit circumradius: side sqrt(3); sum over the two other ring vortices
    # of (1 - zeta^j)/|1 - zeta^j|^2 has real part 2 * (3/2)/3 = 1
    assert center_intensity(CrystalSpec(4)) == pytest.approx(-1.0, rel=1e-14)


@pytest.mark.parametrize("n", range(3, 13))
def test_center_intensity_sum_is_real(n):
    for alpha in ALPHAS:
        z = center_intensity_sum(CrystalSpec(n, AlphaModel(alpha)))
        assert abs(z.imag) < 1e-14 * max(1.0, abs(z.real))
        assert z.real < 0


@given(st.integers(3, 12), st.sampled_from(ALPHAS))
def test_crystal_is_stationary(n, alpha):
    model = AlphaModel(alpha)
    Z = build_crystal(CrystalSpec(n, model))
    assert stationarity_residual(model, Z) < 1e-12
    assert Z.n == n
    assert np.allclose(np.abs(Z.z[:-1]), 1.0, atol=1e-15)


def test_wrong_center_intensity_rotates():
    model = AlphaModel(1.0)
    Z = build_crystal(CrystalSpec(5, model))
    a = Z.intensities.copy()
    a[-1] *= 1.3
    from vortexlab.core import Configuration
    assert stationarity_residual(model, Configuration(Z.positions, a)) > 1e-3


@pytest.mark.parametrize("n", [2, 1, 3.5, 0])
def test_invalid_size(n):
    with pytest.raises(DomainError):
        CrystalSpec(n)


def test_seven_vortex_hexagon():
    Z = build_crystal(CrystalSpec(7))
    assert Z.intensities[-1] == pytest.approx(-2.5, rel=1e-14)
    assert np.all(Z.intensities[:-1] == 1.0)
    ring = Z.z[:-1]
    assert np.allclose(np.sort(np.angle(ring)), np.sort(np.angle(np.exp(1j * np.pi * np.arange(6) / 3))), atol=1e-15)


def test_perturbed_center_only_moves_the_ring():
    model = AlphaModel(1.25)
    Z = build_crystal(CrystalSpec(6, model))
    a = Z.intensities.copy()
    a[-1] += 0.1
    u = velocity_field(model, Configuration(Z.positions, a))
    speeds = np.hypot(u[:, 0], u[:, 1])
    assert np.all(speeds[:-1] > 1e-3)
    assert speeds[-1] < 1e-15


def test_displaced_vortex_residual_is_first_order():
    from vortexlab import jacobian_analytic

    model = AlphaModel(1.0)
    Z = build_crystal(CrystalSpec(3, model))
    J = jacobian_analytic(model, Z).entries
    remainders = []
    for h in (1e-3, 5e-4):
        dz = np.zeros(6)
        dz[2:4] = [0.6 * h, 0.8 * h]
        moved = Z.with_positions(Z.flat + dz)
        linear = J @ dz
        u = velocity_field(model, moved).reshape(-1)
        remainders.append(np.max(np.abs(u - linear)))
        assert stationarity_residual(model, moved) == pytest.approx(
            np.max(np.hypot(linear[0::2], linear[1::2])), rel=5e-3)
    # Taylor remainder is second order in the displacement
    assert remainders[0] / remainders[1] == pytest.approx(4.0, rel=0.05)

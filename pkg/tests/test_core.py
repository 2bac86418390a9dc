import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import gamma

from vortexlab import (
    AlphaModel,
    Configuration,
    DomainError,
    PointVortex,
    SingularityError,
    coupling_constant,
    invariants,
    kernel,
    velocity_field,
)
from vortexlab.core import green, min_separation, potential_coefficient

from conftest import ALPHAS, random_configuration

alphas = st.floats(1.0, 1.99)
coords = st.floats(-5, 5, allow_nan=False)


def test_euler_coupling_is_one_over_two_pi():
    assert coupling_constant(1.0) == pytest.approx(1 / (2 * math.pi), rel=1e-15)


@pytest.mark.parametrize("alpha", ALPHAS)
def test_coupling_constant_matches_gamma_formula(alpha):
    expected = gamma((alpha + 1) / 2) / (2 ** (2 - alpha) * math.pi * gamma((3 - alpha) / 2))
    assert coupling_constant(alpha) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("alpha", [0.99, 2.0, float("nan"), -1.0])
def test_alpha_out_of_range(alpha):
    with pytest.raises(DomainError):
        AlphaModel(alpha)


@pytest.mark.parametrize("alpha", ALPHAS)
def test_riesz_potential_gradient_matches_kernel(alpha):
    # d/dr of the pair potential is the kernel magnitude C_alpha / r^alpha
    model = AlphaModel(alpha)
    r, h = 0.7, 1e-6
    dG = (green(model, r + h) - green(model, r - h)) / (2 * h)
    assert dG == pytest.approx(model.c_alpha / r ** alpha, rel=1e-8)
    assert potential_coefficient(1.0) == pytest.approx(1 / (2 * math.pi))


@given(alphas, coords, coords, coords, coords)
def test_kernel_antisymmetric_and_perpendicular(alpha, x1, y1, x2, y2):
    x, y = np.array([x1, y1]), np.array([x2, y2])
    r = np.hypot(*(x - y))
    if r < 1e-3:
        return
    model = AlphaModel(alpha)
    kxy, kyx = kernel(model, x, y), kernel(model, y, x)
    scale = np.linalg.norm(kxy)
    assert np.max(np.abs(kxy + kyx)) <= 1e-15 * scale
    assert abs(np.dot(x - y, kxy)) <= 1e-13 * scale * r
    assert scale == pytest.approx(model.c_alpha / r ** alpha, rel=1e-13)


def test_kernel_accepts_complex_points():
    model = AlphaModel(1.0)
    assert np.allclose(kernel(model, 1 + 0j, 0j), [0.0, 1 / (2 * math.pi)])


def test_kernel_singularity():
    with pytest.raises(SingularityError):
        kernel(AlphaModel(1.5), (0.3, 0.3), (0.3, 0.3))


def test_velocity_field_matches_direct_kernel_sum(rng):
    for alpha in ALPHAS:
        model = AlphaModel(alpha)
        Z = random_configuration(rng, 6)
        u = velocity_field(model, Z)
        for i in range(Z.n):
            ref = sum(Z.intensities[j] * kernel(model, Z.positions[i], Z.positions[j])
                      for j in range(Z.n) if j != i)
            assert np.allclose(u[i], ref, rtol=1e-13, atol=1e-14)


def test_coincident_vortices_report_pair():
    Z = Configuration([[0, 0], [1, 0], [0, 0]], [1, 1, 1])
    with pytest.raises(SingularityError) as info:
        velocity_field(AlphaModel(1.0), Z)
    assert info.value.pair == (0, 2)


def test_single_vortex_is_at_rest():
    Z = Configuration([[0.2, 0.4]], [3.0])
    assert np.all(velocity_field(AlphaModel(1.3), Z) == 0)
    assert min_separation(Z) == math.inf


@pytest.mark.parametrize("bad", [
    dict(positions=[[0, 0]], intensities=[0.0]),
    dict(positions=[[0, 0], [1, 1]], intensities=[1.0]),
    dict(positions=[[np.nan, 0]], intensities=[1.0]),
    dict(positions=np.zeros((0, 2)), intensities=[]),
])
def test_configuration_validation(bad):
    with pytest.raises(DomainError):
        Configuration(**bad)


def test_point_vortex_rejects_zero_intensity():
    with pytest.raises(DomainError):
        PointVortex(0j, 0.0)


def test_configuration_is_immutable():
    Z = Configuration.from_complex([0, 1j], [1, 2])
    with pytest.raises(ValueError):
        Z.positions[0, 0] = 5.0
    assert np.allclose(Z.z, [0, 1j])
    assert np.allclose(Configuration.from_flat(Z.flat, Z.intensities).positions, Z.positions)


def test_total_momentum_and_impulse_are_stationary(rng):
    # d/dt sum a_i z_i = 0 and d/dt sum a_i |z_i|^2 = 0 for any configuration
    for alpha in ALPHAS:
        model = AlphaModel(alpha)
        Z = random_configuration(rng, 7)
        u = velocity_field(model, Z)
        a = Z.intensities
        scale = np.sum(np.abs(a)[:, None] * np.abs(u))
        assert np.max(np.abs(a @ u)) <= 1e-13 * scale
        assert abs(np.sum(a * np.einsum("ij,ij->i", Z.positions, u))) <= 1e-12 * scale * 2


def test_hamiltonian_gradient_is_velocity(rng):
    # a_i dz_i/dt = (grad_i H)^perp with H = sum_{i<j} a_i a_j G(|z_i - z_j|)
    for alpha in (1.0, 1.5):
        model = AlphaModel(alpha)
        Z = random_configuration(rng, 4)
        u = velocity_field(model, Z)
        h = 1e-6
        for i in range(Z.n):
            grad = np.zeros(2)
            for k in range(2):
                p, m = Z.positions.copy(), Z.positions.copy()
                p[i, k] += h
                m[i, k] -= h
                grad[k] = (invariants(model, Z.with_positions(p)).hamiltonian
                           - invariants(model, Z.with_positions(m)).hamiltonian) / (2 * h)
            expected = np.array([-grad[1], grad[0]]) / Z.intensities[i]
            assert np.allclose(u[i], expected, rtol=1e-6, atol=1e-8)


def test_kernel_reference_values():
    model = AlphaModel(1.0)
    assert np.allclose(kernel(model, (0, 0), (1, 0)), [0.0, -1 / (2 * math.pi)], atol=1e-17)
    assert np.linalg.norm(kernel(model, (0, 0), (2, 0))) == pytest.approx(1 / (4 * math.pi), rel=1e-15)


def test_coupling_constant_continuous_at_euler_endpoint():
    assert coupling_constant(1.0 + 1e-9) == pytest.approx(coupling_constant(1.0), rel=1e-8)


def test_symmetric_pair_velocities_and_invariants():
    model = AlphaModel(1.0)
    Z = Configuration([[1.0, 0.0], [-1.0, 0.0]], [1.0, 1.0])
    u = velocity_field(model, Z)
    assert np.allclose(u, [[0, 1 / (4 * math.pi)], [0, -1 / (4 * math.pi)]], atol=1e-17)
    snap = invariants(model, Z)
    assert snap.linear_momentum == (0.0, 0.0)
    assert snap.angular_impulse == 2.0
    assert snap.hamiltonian == pytest.approx(math.log(2) / (2 * math.pi))
    assert invariants(model, Configuration([[3.0, 1.0]], [2.0])).hamiltonian == 0.0

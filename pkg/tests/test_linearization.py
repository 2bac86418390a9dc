import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vortexlab import (
    AlphaModel,
    Configuration,
    CrystalSpec,
    DomainError,
    build_crystal,
    jacobian_analytic,
    jacobian_fd,
    linearize,
    spectrum,
)
from vortexlab.linearization import JacobianMatrix, kappa1, symmetry_defect

from conftest import ALPHAS, random_configuration


def lambda0_three(alpha):
    return AlphaModel(alpha).c_alpha * (2 - 2.0 ** -alpha) * math.sqrt(alpha)


@pytest.mark.parametrize("alpha", ALPHAS)
def test_three_vortex_spectrum(alpha):
    model = AlphaModel(alpha)
    rep = linearize(model, build_crystal(CrystalSpec(3, model)))
    lam = lambda0_three(alpha)
    ev = np.sort_complex(rep.eigenvalues)
    expected = np.sort_complex(np.array([-lam, 0, 0, 0, 0, lam], dtype=complex))
    assert np.max(np.abs(ev - expected)) < 1e-10
    assert rep.lambda0 == pytest.approx(lam, rel=1e-12)
    assert rep.dominant_is_real and rep.unstable


@pytest.mark.parametrize("alpha", ALPHAS)
def test_three_vortex_eigenvector_direction(alpha):
    model = AlphaModel(alpha)
    rep = linearize(model, build_crystal(CrystalSpec(3, model)))
    s = math.sqrt(alpha)
    u = np.array([-1, s, -1, s, -(2 ** (alpha + 1)), s * 2 ** (alpha + 1)])
    u /= np.linalg.norm(u)
    v = rep.unstable_eigenvector / np.linalg.norm(rep.unstable_eigenvector)
    assert min(np.linalg.norm(v - u), np.linalg.norm(v + u)) < 1e-9
    assert np.max(np.abs(rep.unstable_eigenvector)) == pytest.approx(1.0)
    assert rep.eigenvector_residual < 1e-12


@pytest.mark.parametrize("alpha", ALPHAS)
def test_three_vortex_matrix_entries(alpha):
    model = AlphaModel(alpha)
    a, b = 2.0 ** -(alpha + 1), 2.0 ** -alpha
    expected = model.c_alpha * np.array([
        [0, a, 0, a, 0, -b],
        [a * alpha, 0, a * alpha, 0, -b * alpha, 0],
        [0, a, 0, a, 0, -b],
        [a * alpha, 0, a * alpha, 0, -b * alpha, 0],
        [0, 1, 0, 1, 0, -2],
        [alpha, 0, alpha, 0, -2 * alpha, 0],
    ])
    M = jacobian_analytic(model, build_crystal(CrystalSpec(3, model))).entries
    assert np.max(np.abs(M - expected)) < 1e-12


def test_seven_vortex_matrix_entries():
    s3 = math.sqrt(3)
    r, s6, t8, e8, h3 = 1 / (2 * s3), 1 / 6, s3 / 8, 1 / 8, 1 / 3
    q2, hf, f4, g4 = s3 / 2, 1 / 2, 5 * s3 / 4, 5 / 4
    k24, k12, qt, g2 = 35 / 24, 35 / 12, 1 / 4, 5 / 2
    c1 = 1 / (2 * s3) - 13 * s3 / 8
    printed = np.array([
    [c1, -k24, 0, 1, -r, s6, -t8, -e8, 0, -h3, q2, -hf, f4, g4],
    [-k24, -c1, 1, 0, s6, r, -e8, t8, -h3, 0, -hf, -q2, g4, -f4],
    [0, 1, -c1, -k24, -q2, -hf, 0, -h3, t8, -e8, r, s6, -f4, g4],
    [1, 0, -k24, c1, -hf, q2, -h3, 0, -e8, -t8, s6, -r, g4, f4],
    [-r, s6, -q2, -hf, 0, k12, q2, -hf, r, s6, 0, qt, 0, -g2],
    [s6, r, -hf, q2, k12, 0, -hf, -q2, s6, -r, qt, 0, -g2, 0],
    [-t8, -e8, 0, -h3, q2, -hf, c1, -k24, 0, 1, -r, s6, f4, g4],
    [-e8, t8, -h3, 0, -hf, -q2, -k24, -c1, 1, 0, s6, r, g4, -f4],
    [0, -h3, t8, -e8, r, s6, 0, 1, -c1, -k24, -q2, -hf, -f4, g4],
    [-h3, 0, -e8, -t8, s6, -r, 1, 0, -k24, c1, -hf, q2, g4, f4],
    [q2, -hf, r, s6, 0, qt, -r, s6, -q2, -hf, 0, k12, 0, -g2],
    [-hf, -q2, s6, -r, qt, 0, s6, r, -hf, q2, k12, 0, -g2, 0],
    [-q2, -hf, q2, -hf, 0, 1, -q2, -hf, q2, -hf, 0, 1, 0, 0],
    [-hf, q2, -hf, -q2, 1, 0, -hf, q2, -hf, -q2, 1, 0, 0, 0],
    ]) / (2 * math.pi)
    model = AlphaModel(1.0)
    M = jacobian_analytic(model, build_crystal(CrystalSpec(7, model))).entries
    assert np.max(np.abs(M - printed)) < 1e-10


def test_seven_vortex_spectrum_euler():
    model = AlphaModel(1.0)
    rep = linearize(model, build_crystal(CrystalSpec(7, model)))
    pi = math.pi
    expected = [0, 0, 0, 0, 1j * math.sqrt(35) / (4 * pi), 1j * math.sqrt(35) / (4 * pi),
                -1j * math.sqrt(35) / (4 * pi), -1j * math.sqrt(35) / (4 * pi),
                2 / pi, 2 / pi, -2 / pi, -2 / pi, 9 / (4 * pi), -9 / (4 * pi)]
    ev = np.asarray(rep.eigenvalues)
    from scipy.optimize import linear_sum_assignment
    cost = np.abs(ev[:, None] - np.asarray(expected)[None, :])
    r, c = linear_sum_assignment(cost)
    assert cost[r, c].max() < 1e-8
    assert rep.lambda0 == pytest.approx(9 / (4 * pi), rel=1e-12)
    # both kappa2 conventions
    assert rep.kappa2_unscaled == pytest.approx(5 * math.sqrt(7) / 2, rel=1e-10)
    assert rep.kappa2 == pytest.approx(5 * math.sqrt(7) / (4 * pi), rel=1e-10)


def test_jacobian_oracle_random(rng):
    for k in range(50):
        alpha = ALPHAS[k % len(ALPHAS)]
        model = AlphaModel(alpha)
        Z = random_configuration(rng, 2 + k % 7)
        a = jacobian_analytic(model, Z).entries
        f = jacobian_fd(model, Z).entries
        assert np.max(np.abs(a - f)) <= 1e-6 * np.max(np.abs(a))


def test_jacobian_structure(rng):
    model = AlphaModel(1.4)
    Z = random_configuration(rng, 5)
    M = jacobian_analytic(model, Z)
    # divergence-free field: each 2x2 diagonal block and the full matrix are traceless
    assert abs(M.trace) < 1e-12 * np.abs(M.entries).max()
    for i in range(Z.n):
        assert abs(np.trace(M.block(i, i))) < 1e-12 * np.abs(M.entries).max()
    # rows of blocks sum to zero (translation invariance)
    total = sum(M.block(0, j) for j in range(Z.n))
    assert np.max(np.abs(total)) < 1e-12 * np.abs(M.entries).max()


@given(st.integers(3, 9), st.sampled_from(ALPHAS))
def test_spectrum_is_hamiltonian(n, alpha):
    model = AlphaModel(alpha)
    Z = build_crystal(CrystalSpec(n, model))
    rep = linearize(model, Z)
    scale = rep.kappa2
    assert symmetry_defect(rep.eigenvalues) < 1e-8 * scale
    ev = np.asarray(rep.eigenvalues)
    assert symmetry_defect(np.conj(ev)) < 1e-8 * scale
    assert rep.kappa2 >= rep.lambda0
    assert rep.lambda0 == pytest.approx(ev.real.max(), abs=1e-9 * scale)


def test_kappa1_two_vortices():
    model = AlphaModel(1.0)
    Z = Configuration([[0, 0], [2, 0]], [1.0, -3.0])
    # max over i of C |a_j| / r^2
    assert kappa1(model, Z) == pytest.approx(3.0 / (2 * math.pi * 4))


def test_spectrum_size_mismatch():
    model = AlphaModel(1.0)
    Z3 = build_crystal(CrystalSpec(3, model))
    Z4 = build_crystal(CrystalSpec(4, model))
    with pytest.raises(DomainError):
        spectrum(jacobian_analytic(model, Z3), model, Z4)


def test_jacobian_matrix_validation():
    with pytest.raises(DomainError):
        JacobianMatrix(np.zeros((3, 3)))
    J = JacobianMatrix(np.eye(4))
    with pytest.raises(ValueError):
        J.entries[0, 0] = 2.0


def test_neutral_configuration_has_no_eigenvector():
    model = AlphaModel(1.0)
    rep = linearize(model, Configuration([[0.3, 0.1]], [2.0]))
    assert rep.lambda0 == 0.0
    assert rep.unstable_eigenvector is None
    assert not rep.unstable


def test_corotating_pair_separates_linearly_in_fixed_frame():
    # the rotation shear gives real eigenvalues +-a/(pi d^2) in the inertial frame
    model = AlphaModel(1.0)
    rep = linearize(model, Configuration([[0, 0], [1, 0]], [1.0, 1.0]))
    assert rep.lambda0 == pytest.approx(1 / math.pi, rel=1e-12)


def test_seven_vortex_kappa1():
    # the centre sees six unit vortices at distance one
    model = AlphaModel(1.0)
    assert kappa1(model, build_crystal(CrystalSpec(7, model))) == pytest.approx(3 / math.pi, rel=1e-14)


def test_fd_jacobian_three_vortex_and_convergence():
    model = AlphaModel(1.0)
    Z = build_crystal(CrystalSpec(3, model))
    exact = jacobian_analytic(model, Z).entries
    assert np.max(np.abs(jacobian_fd(model, Z, 1e-6).entries - exact)) < 1e-6
    e1 = np.max(np.abs(jacobian_fd(model, Z, 2e-2).entries - exact))
    e2 = np.max(np.abs(jacobian_fd(model, Z, 1e-2).entries - exact))
    assert e1 / e2 == pytest.approx(4.0, rel=0.05)


def test_two_vortex_jacobian_by_hand():
    # u1 = a2 C (-y, x)/r^2 with (x, y) = z1 - z2: du1_x/dy = du1_y/dx = -a2 C/r^2 on the x-axis
    model = AlphaModel(1.0)
    d, a1, a2 = 1.5, 0.7, -1.3
    Z = Configuration([[0.0, 0.0], [d, 0.0]], [a1, a2])
    c = model.c_alpha / d ** 2
    expected = np.array([
        [0, -a2 * c, 0, a2 * c],
        [-a2 * c, 0, a2 * c, 0],
        [0, a1 * c, 0, -a1 * c],
        [a1 * c, 0, -a1 * c, 0],
    ])
    J = jacobian_analytic(model, Z).entries
    assert np.max(np.abs(J - expected)) < 1e-14
    assert np.max(np.abs(jacobian_fd(model, Z).entries - expected)) < 1e-8


@pytest.mark.parametrize("alpha", ALPHAS)
def test_three_vortex_kappas(alpha):
    model = AlphaModel(alpha)
    rep = linearize(model, build_crystal(CrystalSpec(3, model)))
    c = model.c_alpha
    assert rep.kappa1 == pytest.approx(2 * c, rel=1e-13)
    assert rep.kappa2 == pytest.approx(c * 2 ** -alpha * alpha * math.sqrt(3 * (1 + 2 ** (1 + 2 * alpha))), rel=1e-12)

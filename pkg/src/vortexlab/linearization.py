"""Jacobian of the point-vortex field at an equilibrium and its spectral data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import AlphaModel, Configuration, _find_coincident, _pair_geometry, velocity_field
from .errors import DomainError, NumericalError, SingularityError

__all__ = [
    "JacobianMatrix",
    "SpectralReport",
    "jacobian_analytic",
    "jacobian_fd",
    "spectrum",
    "kappa1",
    "symmetry_defect",
    "linearize",
]


@dataclass(frozen=True, eq=False)
class JacobianMatrix:
    """Dense ``2N x 2N`` Jacobian in the ordering ``(p_1, q_1, ..., p_N, q_N)``."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.array(self.entries, dtype=float, copy=True)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
            raise DomainError(f"expected a square matrix of even size, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise NumericalError("Jacobian has non-finite entries")
        m.flags.writeable = False
        object.__setattr__(self, "entries", m)

    @property
    def n(self) -> int:
        return self.entries.shape[0] // 2

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries))

    def block(self, i: int, j: int) -> np.ndarray:
        return self.entries[2 * i:2 * i + 2, 2 * j:2 * j + 2]


@dataclass(frozen=True, eq=False)
class SpectralReport:
    """Spectrum of the linearization plus the confinement constants.

    ``kappa2`` is the spectral norm of the full Jacobian (coupling constant
    included); ``kappa2_unscaled`` is the same norm with ``C_alpha`` divided
    out, i.e. the norm of the bracketed matrix when the Jacobian is written as
    ``C_alpha * (...)``.
    """

    eigenvalues: np.ndarray
    lambda0: float
    unstable_eigenvector: np.ndarray | None
    kappa1: float
    kappa2: float
    kappa2_unscaled: float
    dominant_eigenvalue: complex
    dominant_is_real: bool
    eigenvector_residual: float | None

    @property
    def unstable(self) -> bool:
        return self.lambda0 > 0.0


def jacobian_analytic(model: AlphaModel, Z: Configuration) -> JacobianMatrix:
    """Closed-form Jacobian of the alpha-model field.

    Off-diagonal block ``(i, j)`` is ``a_j C_alpha`` times the linearized
    kernel at ``z_i - z_j = (p, q)``::

        [[-(a+1) p q / r^(a+3),          1/r^(a+1) - (a+1) q^2 / r^(a+3)],
         [(a+1) p^2 / r^(a+3) - 1/r^(a+1),       (a+1) p q / r^(a+3)]]

    and each diagonal block is minus the sum of the (weighted) off-diagonal
    blocks of its row, by translation invariance of the field.
    """
    n = Z.n
    if n == 1:
        return JacobianMatrix(np.zeros((2, 2)))
    d, r2 = _pair_geometry(Z.positions)
    pair = _find_coincident(r2)
    if pair is not None:
        raise SingularityError(f"vortices {pair[0]} and {pair[1]} coincide", pair=pair)
    np.fill_diagonal(r2, 1.0)
    a = model.alpha
    p, q = d[..., 0], d[..., 1]
    inv1 = r2 ** (-(a + 1.0) / 2.0)
    inv3 = (a + 1.0) * r2 ** (-(a + 3.0) / 2.0)
    blocks = np.empty((n, n, 2, 2))
    blocks[..., 0, 0] = -inv3 * p * q
    blocks[..., 0, 1] = inv1 - inv3 * q * q
    blocks[..., 1, 0] = inv3 * p * p - inv1
    blocks[..., 1, 1] = inv3 * p * q
    idx = np.arange(n)
    blocks[idx, idx] = 0.0
    blocks *= (model.c_alpha * Z.intensities)[None, :, None, None]
    blocks[idx, idx] = -blocks.sum(axis=1)
    return JacobianMatrix(blocks.transpose(0, 2, 1, 3).reshape(2 * n, 2 * n))


def jacobian_fd(model: AlphaModel, Z: Configuration, step: float = 1e-6) -> JacobianMatrix:
    """Central finite differences of :func:`velocity_field`, one coordinate at a time."""
    if not step > 0.0:
        raise DomainError(f"finite-difference step must be positive, got {step!r}")
    x0 = Z.flat
    m = np.empty((x0.size, x0.size))
    for k in range(x0.size):
        xp = x0.copy()
        xm = x0.copy()
        xp[k] += step
        xm[k] -= step
        fp = velocity_field(model, Z.with_positions(xp)).reshape(-1)
        fm = velocity_field(model, Z.with_positions(xm)).reshape(-1)
        m[:, k] = (fp - fm) / (2.0 * step)
    return JacobianMatrix(m)


def kappa1(model: AlphaModel, Z: Configuration) -> float:
    """Leading-order Lipschitz constant of the exterior field:
    ``C_alpha max_i sum_{j != i} |a_j| / |z_i - z_j|^(alpha+1)``."""
    if Z.n == 1:
        return 0.0
    _, r2 = _pair_geometry(Z.positions)
    np.fill_diagonal(r2, np.inf)
    w = np.abs(Z.intensities)[None, :] * r2 ** (-(model.alpha + 1.0) / 2.0)
    return float(model.c_alpha * np.max(w.sum(axis=1)))


def _sorted_eigenvalues(ev: np.ndarray) -> np.ndarray:
    # round before sorting so that values equal up to rounding keep a fixed order
    key = np.lexsort((np.round(ev.imag, 9), np.round(ev.real, 9)))
    return ev[key]


def _real_null_vector(m: np.ndarray, lam: float) -> np.ndarray:
    _, _, vt = np.linalg.svd(m - lam * np.eye(m.shape[0]))
    v = vt[-1]
    v = v / np.max(np.abs(v))
    nz = np.flatnonzero(np.abs(v) > 1e-12)
    if nz.size and v[nz[0]] < 0:
        v = -v
    return v


def symmetry_defect(eigenvalues) -> float:
    """Largest mismatch of the best pairing between the spectrum and its negation."""
    ev = np.asarray(eigenvalues, dtype=complex)
    cost = np.abs(ev[:, None] + ev[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def spectrum(M: JacobianMatrix, model: AlphaModel, Z: Configuration, max_n: int = 16) -> SpectralReport:
    """Eigen-decomposition of the Jacobian and the derived constants.

    ``lambda0`` is the largest real part, clamped to zero when it is below
    ``1e-9 * ||M||``.  Among eigenvalues attaining it a real one is preferred;
    the unstable eigenvector is then the (real) null vector of
    ``M - lambda0 I``, scaled to unit sup-norm with its first nonzero
    coordinate positive.  Complex-only maxima leave the eigenvector unset.
    """
    if M.n != Z.n:
        raise DomainError(f"Jacobian is for {M.n} vortices but configuration has {Z.n}")
    if M.n > max_n:
        raise DomainError(f"dense eigensolve limited to N <= {max_n}, got {M.n}")
    m = M.entries
    try:
        ev = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed ({exc}); cond(M) = {np.linalg.cond(m):.3e}") from exc
    ev = _sorted_eigenvalues(ev)
    norm = float(np.linalg.norm(m, 2))
    tol = 1e-9 * max(norm, 1e-300)
    top = float(ev.real.max())
    lambda0 = top if top > tol else 0.0

    cand = ev[ev.real >= top - tol]
    real_cand = cand[np.abs(cand.imag) <= tol]
    if real_cand.size:
        dominant = complex(real_cand.real.max(), 0.0)
        is_real = True
    else:
        dominant = complex(cand[np.argmax(np.abs(cand.imag))])
        is_real = False

    vec = None
    resid = None
    if lambda0 > 0.0 and is_real:
        vec = _real_null_vector(m, dominant.real)
        resid = float(np.max(np.abs(m @ vec - dominant.real * vec)))
    return SpectralReport(
        eigenvalues=ev,
        lambda0=lambda0,
        unstable_eigenvector=vec,
        kappa1=kappa1(model, Z),
        kappa2=norm,
        kappa2_unscaled=norm / model.c_alpha,
        dominant_eigenvalue=dominant,
        dominant_is_real=is_real,
        eigenvector_residual=resid,
    )


def linearize(model: AlphaModel, Z: Configuration) -> SpectralReport:
    """Analytic Jacobian followed by :func:`spectrum`."""
    return spectrum(jacobian_analytic(model, Z), model, Z)

"""Alpha-model interaction kernel, point-vortex vector field and first integrals.

Positions are stored as ``(N, 2)`` float64 arrays; the complex identification
``z = p + i q`` is only used at API boundaries.  The flat state ordering used
by the integrator and the Jacobian is ``(p_1, q_1, ..., p_N, q_N)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gamma

from .errors import DomainError, SingularityError

__all__ = [
    "AlphaModel",
    "PointVortex",
    "Configuration",
    "InvariantSnapshot",
    "coupling_constant",
    "potential_coefficient",
    "green",
    "kernel",
    "velocity_field",
    "pair_velocities",
    "invariants",
    "min_separation",
]


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (1.0 <= alpha < 2.0) or not math.isfinite(alpha):
        raise DomainError(f"alpha must lie in [1, 2), got {alpha!r}")
    return alpha


def coupling_constant(alpha: float) -> float:
    """Coupling constant of the alpha-model Biot-Savart kernel.

    ``C_alpha = Gamma((alpha+1)/2) / (2**(2-alpha) * pi * Gamma((3-alpha)/2))``,
    the modulus of the gradient coefficient of the fundamental solution of
    the fractional Laplacian of order ``s = (3 - alpha)/2``.  Equals
    ``1/(2 pi)`` for the Euler case ``alpha = 1``.
    """
    alpha = _check_alpha(alpha)
    return float(gamma((alpha + 1.0) / 2.0) / (2.0 ** (2.0 - alpha) * math.pi * gamma((3.0 - alpha) / 2.0)))


def potential_coefficient(alpha: float) -> float:
    """Coefficient of the Riesz potential ``r**(1-alpha)`` for ``alpha > 1``.

    With ``s = (3 - alpha)/2`` this is ``Gamma(1-s) / (2**(2s) pi Gamma(s))``.
    At ``alpha = 1`` the potential is logarithmic and this returns ``1/(2 pi)``.
    """
    alpha = _check_alpha(alpha)
    if alpha == 1.0:
        return 1.0 / (2.0 * math.pi)
    s = (3.0 - alpha) / 2.0
    return float(gamma(1.0 - s) / (2.0 ** (2.0 * s) * math.pi * gamma(s)))


@dataclass(frozen=True)
class AlphaModel:
    """Interaction exponent ``alpha`` in ``[1, 2)`` and its coupling constant."""

    alpha: float = 1.0
    c_alpha: float = field(init=False)

    def __post_init__(self):
        alpha = _check_alpha(self.alpha)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "c_alpha", coupling_constant(alpha))

    @property
    def s(self) -> float:
        """Fractional order of the inverse Laplacian, ``(3 - alpha)/2``."""
        return (3.0 - self.alpha) / 2.0


def green(model: AlphaModel, r):
    """Pair potential at separation ``r``: log at alpha = 1, Riesz otherwise.

    The sign makes ``dG/dr = C_alpha / r**alpha`` for every alpha, so the
    field is the symplectic gradient of the same Hamiltonian in both cases.
    """
    r = np.asarray(r, dtype=float)
    if model.alpha == 1.0:
        return np.log(r) / (2.0 * math.pi)
    return -potential_coefficient(model.alpha) * r ** (1.0 - model.alpha)


@dataclass(frozen=True)
class PointVortex:
    position: complex
    intensity: float

    def __post_init__(self):
        if not self.intensity or not math.isfinite(self.intensity):
            raise DomainError("vortex intensity must be finite and nonzero")


@dataclass(frozen=True, eq=False)
class Configuration:
    """N planar positions with their real intensities.

    Arrays are copied and made read-only on construction, so instances can be
    shared freely.  Pairwise distinctness is checked by the operations that
    need it (they report the offending pair), not here.
    """

    positions: np.ndarray
    intensities: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.positions)
        if np.iscomplexobj(raw):
            raw = raw.reshape(-1)
            pos = np.column_stack([raw.real, raw.imag]).astype(float)
        else:
            pos = np.array(raw, dtype=float, copy=True).reshape(-1, 2)
        gam = np.array(self.intensities, dtype=float, copy=True).reshape(-1)
        if pos.shape[0] < 1:
            raise DomainError("a configuration needs at least one vortex")
        if gam.shape[0] != pos.shape[0]:
            raise DomainError(f"{pos.shape[0]} positions but {gam.shape[0]} intensities")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(gam))):
            raise DomainError("positions and intensities must be finite")
        if np.any(gam == 0.0):
            raise DomainError("vortex intensities must be nonzero")
        pos.flags.writeable = False
        gam.flags.writeable = False
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "intensities", gam)

    @classmethod
    def from_complex(cls, z: Iterable[complex], a: Iterable[float]) -> "Configuration":
        z = np.asarray(list(z), dtype=complex)
        return cls(np.column_stack([z.real, z.imag]), np.asarray(list(a), dtype=float))

    @classmethod
    def from_vortices(cls, vortices: Sequence[PointVortex]) -> "Configuration":
        return cls.from_complex([v.position for v in vortices], [v.intensity for v in vortices])

    @classmethod
    def from_flat(cls, state, intensities) -> "Configuration":
        return cls(np.asarray(state, dtype=float).reshape(-1, 2), intensities)

    def __len__(self) -> int:
        return self.positions.shape[0]

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def z(self) -> np.ndarray:
        """Positions as complex numbers."""
        return self.positions[:, 0] + 1j * self.positions[:, 1]

    @property
    def flat(self) -> np.ndarray:
        """State vector ``(p_1, q_1, ..., p_N, q_N)`` (a copy)."""
        return self.positions.reshape(-1).copy()

    @property
    def vortices(self) -> list[PointVortex]:
        return [PointVortex(complex(p, q), float(a)) for (p, q), a in zip(self.positions, self.intensities)]

    def with_positions(self, positions) -> "Configuration":
        return Configuration(np.asarray(positions, dtype=float).reshape(-1, 2), self.intensities)

    def sup_distance(self, other: "Configuration") -> float:
        """``|Z - Z'|_inf``: the largest Euclidean displacement of any vortex."""
        d = self.positions - other.positions
        return float(np.max(np.hypot(d[:, 0], d[:, 1])))


@dataclass(frozen=True)
class InvariantSnapshot:
    hamiltonian: float
    linear_momentum: tuple[float, float]
    angular_impulse: float


def _as_point(x) -> np.ndarray:
    if isinstance(x, (complex, np.complexfloating)):
        return np.array([x.real, x.imag])
    arr = np.asarray(x, dtype=float).reshape(-1)
    if arr.shape != (2,):
        raise DomainError("planar points need exactly two coordinates")
    return arr


def kernel(model: AlphaModel, x, y) -> np.ndarray:
    """``K(x, y) = C_alpha (x - y)^perp / |x - y|^(alpha + 1)`` with ``(p, q)^perp = (-q, p)``."""
    d = _as_point(x) - _as_point(y)
    r = math.hypot(d[0], d[1])
    if r == 0.0:
        raise SingularityError("kernel evaluated at coincident points")
    return model.c_alpha * np.array([-d[1], d[0]]) / r ** (model.alpha + 1.0)


def _pair_geometry(positions: np.ndarray):
    d = positions[:, None, :] - positions[None, :, :]
    r2 = d[..., 0] ** 2 + d[..., 1] ** 2
    return d, r2


def _find_coincident(r2: np.ndarray):
    off = r2.copy()
    np.fill_diagonal(off, np.inf)
    i, j = np.unravel_index(np.argmin(off), off.shape)
    return (int(min(i, j)), int(max(i, j))) if off[i, j] == 0.0 else None


def min_separation(Z: Configuration) -> float:
    """Smallest pairwise distance (``inf`` for a single vortex)."""
    if Z.n < 2:
        return math.inf
    _, r2 = _pair_geometry(Z.positions)
    np.fill_diagonal(r2, np.inf)
    return float(np.sqrt(r2.min()))


def pair_velocities(alpha: float, c_alpha: float, positions: np.ndarray, intensities: np.ndarray,
                    mask: np.ndarray | None = None, floor: float = 0.0) -> np.ndarray:
    """Raw O(n^2) alpha-kernel sum over all ordered pairs.

    ``mask[i, j]`` (optional, boolean) switches individual interactions off;
    ``floor`` bounds the squared distance from below.  No singularity check is
    performed here; callers validate separation first.
    """
    d, r2 = _pair_geometry(positions)
    if floor > 0.0:
        r2 = np.maximum(r2, floor)
    np.fill_diagonal(r2, 1.0)
    if alpha == 1.0:
        w = 1.0 / r2
    else:
        w = r2 ** (-(alpha + 1.0) / 2.0)
    np.fill_diagonal(w, 0.0)
    if mask is not None:
        w = np.where(mask, w, 0.0)
    w = w * intensities[None, :]
    u = np.empty_like(positions)
    u[:, 0] = -np.sum(w * d[..., 1], axis=1)
    u[:, 1] = np.sum(w * d[..., 0], axis=1)
    return c_alpha * u


def velocity_field(model: AlphaModel, Z: Configuration) -> np.ndarray:
    """Velocities ``f(Z)_i = sum_{j != i} a_j K(z_i, z_j)`` as an ``(N, 2)`` array."""
    if Z.n == 1:
        return np.zeros((1, 2))
    _, r2 = _pair_geometry(Z.positions)
    pair = _find_coincident(r2)
    if pair is not None:
        raise SingularityError(f"vortices {pair[0]} and {pair[1]} coincide", pair=pair)
    return pair_velocities(model.alpha, model.c_alpha, Z.positions, Z.intensities)


def invariants(model: AlphaModel, Z: Configuration) -> InvariantSnapshot:
    """Hamiltonian, linear momentum ``sum a_i z_i`` and angular impulse ``sum a_i |z_i|^2``."""
    pos, a = Z.positions, Z.intensities
    if Z.n > 1:
        _, r2 = _pair_geometry(pos)
        pair = _find_coincident(r2)
        if pair is not None:
            raise SingularityError(f"vortices {pair[0]} and {pair[1]} coincide", pair=pair)
        iu = np.triu_indices(Z.n, k=1)
        ham = float(np.sum(a[iu[0]] * a[iu[1]] * green(model, np.sqrt(r2[iu]))))
    else:
        ham = 0.0
    mom = a @ pos
    ang = float(np.sum(a * (pos[:, 0] ** 2 + pos[:, 1] ** 2)))
    return InvariantSnapshot(ham, (float(mom[0]), float(mom[1])), ang)

"""Stationary vortex crystals: a regular (N-1)-gon of unit vortices around a
compensating central vortex."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import AlphaModel, Configuration, velocity_field
from .errors import DomainError

__all__ = ["CrystalSpec", "center_intensity", "center_intensity_sum", "build_crystal", "stationarity_residual"]


@dataclass(frozen=True)
class CrystalSpec:
    n_total: int
    model: AlphaModel = field(default_factory=AlphaModel)

    def __post_init__(self):
        if int(self.n_total) != self.n_total or self.n_total < 3:
            raise DomainError(f"a crystal needs n_total >= 3, got {self.n_total!r}")
        object.__setattr__(self, "n_total", int(self.n_total))


def _ring(n_total: int) -> np.ndarray:
    j = np.arange(1, n_total)
    return np.exp(2j * math.pi * j / (n_total - 1))


def center_intensity_sum(spec: CrystalSpec) -> complex:
    """The complex defining sum ``-sum_{j=1}^{N-2} (1 - zeta^j)/|1 - zeta^j|^(alpha+1)``.

    Its imaginary part cancels by conjugate pairing of the ring; it is
    returned unreduced so that cancellation can be inspected.
    """
    zeta = _ring(spec.n_total)[:-1]
    d = 1.0 - zeta
    return complex(-np.sum(d / np.abs(d) ** (spec.model.alpha + 1.0)))


def center_intensity(spec: CrystalSpec) -> float:
    """Intensity of the central vortex that makes the crystal stationary (negative)."""
    return center_intensity_sum(spec).real


def build_crystal(spec: CrystalSpec) -> Configuration:
    """Ring vortices ``z_j = zeta^j`` (``j = 1..N-1``) with ``a_j = 1`` plus the centre.

    Vortex ``N-1`` sits at ``(1, 0)`` and the centre is last, so for ``N = 3``
    the order is ``(-1, 0), (1, 0), (0, 0)``.
    """
    z = np.append(_ring(spec.n_total), 0.0)
    # the ring points are exact on the axes where they should be
    z = np.where(np.abs(z.real) < 1e-15, 1j * z.imag, z)
    z = np.where(np.abs(z.imag) < 1e-15, z.real + 0j, z)
    a = np.ones(spec.n_total)
    a[-1] = center_intensity(spec)
    return Configuration.from_complex(z, a)


def stationarity_residual(model: AlphaModel, Z: Configuration) -> float:
    """``||f(Z)||_inf``: the largest vortex speed."""
    u = velocity_field(model, Z)
    return float(np.max(np.hypot(u[:, 0], u[:, 1])))

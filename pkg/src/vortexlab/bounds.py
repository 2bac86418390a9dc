"""Closed-form thresholds: concentration exponent nu, exit-time factor xi_1, and
the saddle criteria for a single vortex in a conformally mapped domain."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .core import AlphaModel
from .crystal import CrystalSpec, build_crystal
from .errors import DomainError, NoInstabilityError
from .linearization import linearize

__all__ = [
    "C0",
    "ThresholdReport",
    "NuCurvePoint",
    "DomainThresholds",
    "phi",
    "nu_threshold",
    "beta0_for",
    "threshold_report",
    "g_closed_form",
    "nu_curve",
    "nu_curve_details",
    "xi1_threshold",
    "domain_thresholds",
    "domain_thresholds_delta",
]

#: Ratio ``|T'''|/|T'|^3`` above which nu = 4 is admissible in a domain.
C0 = (15.0 + 9.0 * math.sqrt(65.0)) / 28.0


def _check_instability(lambda0: float, kappa2: float | None = None):
    if not lambda0 > 0.0:
        raise NoInstabilityError(f"lambda0 must be positive, got {lambda0!r}")
    if kappa2 is not None and kappa2 < lambda0 * (1.0 - 1e-12):
        raise DomainError(f"kappa2 = {kappa2!r} is below lambda0 = {lambda0!r}")


def phi(beta: float, kappa1: float, kappa2: float, lambda0: float) -> float:
    """``phi(beta) = 2 ((kappa1 + kappa2)/lambda0) (1 - beta) + 2 beta``.

    Decreasing on ``[0, 1]`` whenever ``kappa2 >= lambda0``.
    """
    _check_instability(lambda0)
    ratio = (kappa1 + kappa2) / lambda0
    return 2.0 * ratio * (1.0 - beta) + 2.0 * beta


def nu_threshold(alpha: float, kappa1: float, kappa2: float, lambda0: float) -> float:
    """Open lower bound on nu: ``phi((4 - 2 alpha)/(5 - alpha))``.

    Equivalently ``(2/(5-alpha)) ((1+alpha)(kappa1+kappa2)/lambda0 + 4 - 2 alpha)``.
    """
    if not (1.0 <= alpha < 2.0):
        raise DomainError(f"alpha must lie in [1, 2), got {alpha!r}")
    _check_instability(lambda0, kappa2)
    return 2.0 / (5.0 - alpha) * ((1.0 + alpha) * (kappa1 + kappa2) / lambda0 + 4.0 - 2.0 * alpha)


def beta0_for(nu: float, kappa1: float, kappa2: float, lambda0: float) -> float | None:
    """Smallest ``beta`` in ``[0, 1]`` with ``phi(beta) <= nu``.

    ``phi`` is affine, so the root is solved exactly.  Returns ``0.0`` when
    ``nu`` already exceeds ``phi(0)`` and ``None`` when ``nu <= 2`` (no
    admissible beta below one).
    """
    _check_instability(lambda0, kappa2)
    ratio = (kappa1 + kappa2) / lambda0
    if nu <= 2.0:
        return None
    if nu >= 2.0 * ratio:
        return 0.0
    return (2.0 * ratio - nu) / (2.0 * (ratio - 1.0))


@dataclass(frozen=True)
class ThresholdReport:
    nu_min: float
    xi1_factor: float
    beta0: float | None
    beta_critical: float
    alpha: float
    kappa1: float
    kappa2: float
    lambda0: float
    nu: float | None = None


def threshold_report(alpha: float, kappa1: float, kappa2: float, lambda0: float,
                     nu: float | None = None) -> ThresholdReport:
    """Bundle nu_min, the xi_1 coefficient ``1/lambda0`` and, for a chosen nu, beta_0."""
    nu_min = nu_threshold(alpha, kappa1, kappa2, lambda0)
    return ThresholdReport(
        nu_min=nu_min,
        xi1_factor=1.0 / lambda0,
        beta0=None if nu is None else beta0_for(nu, kappa1, kappa2, lambda0),
        beta_critical=(4.0 - 2.0 * alpha) / (5.0 - alpha),
        alpha=alpha,
        kappa1=kappa1,
        kappa2=kappa2,
        lambda0=lambda0,
        nu=nu,
    )


def g_closed_form(alpha: float) -> float:
    """nu threshold of the three-vortex crystal as an explicit function of alpha."""
    num = 2.0 + 2.0 ** (-alpha) * alpha * math.sqrt(3.0 * (1.0 + 2.0 ** (1.0 + 2.0 * alpha)))
    den = (2.0 - 2.0 ** (-alpha)) * math.sqrt(alpha)
    return 2.0 / (5.0 - alpha) * ((1.0 + alpha) * num / den + 4.0 - 2.0 * alpha)


class NuCurvePoint(NamedTuple):
    alpha: float
    nu_min: float
    lambda0: float
    kappa1: float
    kappa2: float
    dominant_is_real: bool


def nu_curve_details(n_total: int, alphas: Iterable[float]) -> list[NuCurvePoint]:
    """Crystal -> linearization -> nu threshold for each alpha.

    The denominator is the largest real part of the spectrum, taken literally
    even when it belongs to a complex pair; ``dominant_is_real`` flags those
    points.
    """
    out = []
    for alpha in alphas:
        model = AlphaModel(float(alpha))
        Z = build_crystal(CrystalSpec(n_total, model))
        rep = linearize(model, Z)
        nu = nu_threshold(model.alpha, rep.kappa1, rep.kappa2, rep.lambda0)
        out.append(NuCurvePoint(model.alpha, nu, rep.lambda0, rep.kappa1, rep.kappa2, rep.dominant_is_real))
    return out


def nu_curve(n_total: int, alphas: Iterable[float]) -> list[tuple[float, float]]:
    """``[(alpha, nu_min), ...]`` over an alpha grid."""
    return [(p.alpha, p.nu_min) for p in nu_curve_details(n_total, alphas)]


def xi1_threshold(beta: float, lambda0: float) -> float:
    """``(1 - beta)/lambda0``: the open lower bound on xi_1."""
    if not (0.0 < beta < 1.0):
        raise DomainError(f"beta must lie in (0, 1), got {beta!r}")
    _check_instability(lambda0)
    return (1.0 - beta) / lambda0


@dataclass(frozen=True)
class DomainThresholds:
    saddle: bool
    lambda_plus: float
    lambda_minus: float
    lambda0: float
    nu_min: float | None
    kappa1: float
    kappa2: float
    ratio: float


def domain_thresholds(t1: float, t3: float, a: float = 1.0) -> DomainThresholds:
    """Saddle data of the Robin function at a critical point, from ``|T'|`` and ``|T'''|``.

    ``lambda_pm = (2 t1^2 +- t3/t1)/(2 pi)`` are the Hessian eigenvalues; the
    point is a saddle iff ``t3 > 2 t1^3``, in which case
    ``lambda0 = |a| sqrt(t3^2 - 4 t1^6)/(4 pi t1)`` and
    ``nu_min = ((5/3) t3 + 2 t1^3)/sqrt(t3^2 - 4 t1^6) + 1``.
    """
    if not t1 > 0.0:
        raise DomainError(f"|T'| must be positive (degenerate map), got {t1!r}")
    if t3 < 0.0:
        raise DomainError(f"|T'''| must be nonnegative, got {t3!r}")
    lam_p = (2.0 * t1 ** 2 + t3 / t1) / (2.0 * math.pi)
    lam_m = (2.0 * t1 ** 2 - t3 / t1) / (2.0 * math.pi)
    disc = t3 ** 2 - 4.0 * t1 ** 6
    saddle = t3 > 2.0 * t1 ** 3 and disc > 0.0
    if saddle:
        root = math.sqrt(disc)
        lambda0 = abs(a) * root / (4.0 * math.pi * t1)
        nu_min = ((5.0 / 3.0) * t3 + 2.0 * t1 ** 3) / root + 1.0
    else:
        lambda0 = 0.0
        nu_min = None
    return DomainThresholds(
        saddle=saddle,
        lambda_plus=lam_p,
        lambda_minus=lam_m,
        lambda0=lambda0,
        nu_min=nu_min,
        kappa1=abs(a) * t3 / (6.0 * math.pi * t1),
        kappa2=abs(a) * (2.0 * t1 ** 2 + t3 / t1) / (4.0 * math.pi),
        ratio=t3 / t1 ** 3,
    )


def domain_thresholds_delta(delta: float, a: float = 1.0) -> DomainThresholds:
    """:func:`domain_thresholds` with the hexagonal family's Taylor data ``t1 = 1``, ``t3 = |6 delta - 2|``."""
    return domain_thresholds(1.0, abs(6.0 * delta - 2.0), a)


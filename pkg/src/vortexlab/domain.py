"""Hexagonal Schwarz-Christoffel domains, their Robin function and single-vortex
dynamics.

The map ``S`` sends the unit disk onto a hexagon with prevertices
``v_k = exp(i k pi/3)`` and exponents ``e = 1 - 2 delta`` at ``v = +-1`` and
``e = delta`` at the four others:

    S'(w) = prod_k (1 - w/v_k)^(-e_k) = (1 - w^2)^(3 delta - 1) / (1 - w^6)^delta

Each factor uses the principal logarithm of ``1 - w/v_k``, whose cut is the
ray ``{s v_k : s >= 1}`` pointing radially out of the disk, so ``S'`` is
continuous on the closed disk minus the prevertices and ``S'(0) = 1``.
Interior angles are ``pi (1 - e_k)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import DomainError, InversionError, NumericalError, QuadratureError, SingularityError
from .export import csv_text, write_text
from .ode import EscapeResult, IntegratorSettings, escape_run, solve

__all__ = [
    "HexDomain",
    "TaylorData",
    "RobinValue",
    "RobinField",
    "DomainEscape",
    "sc_derivative",
    "sc_map",
    "inverse_map",
    "robin_data",
    "robin_value",
    "robin_gradient",
    "robin_gradient_fd",
    "robin_field",
    "domain_vortex_rhs",
    "rhs_jacobian",
    "domain_escape",
    "domain_orbit",
    "level_line_drift",
    "boundary_csv",
    "robin_csv",
]

PREVERTICES = np.exp(1j * np.pi * np.arange(6) / 3.0)
_GL_X, _GL_W = roots_legendre(16)
_MAX_PANELS = 4000


@dataclass(frozen=True)
class TaylorData:
    s1: complex
    s2: complex
    s3: complex
    t1: complex
    t2: complex
    t3: complex


class HexDomain:
    """Hexagonal domain for a given ``delta`` with its cached map data.

    All caches (Taylor data, boundary polyline, inversion seed grid) are
    built in the constructor and never mutated, so instances may be shared
    between threads.
    """

    def __init__(self, delta: float, order: int = 16, boundary_points: int = 48):
        delta = float(delta)
        if not (0.0 < delta < 1.0):
            raise DomainError(f"delta must lie in (0, 1), got {delta!r}")
        if order < 4:
            raise DomainError("quadrature order must be at least 4")
        self.delta = delta
        self.order = int(order)
        self.exponents = np.array([1 - 2 * delta, delta, delta, 1 - 2 * delta, delta, delta])
        self._gl = (_GL_X, _GL_W) if order == 16 else roots_legendre(order)
        self.taylor = self._taylor_analytic()
        self.vertices = np.array([self._vertex_image(k) for k in range(6)])
        self.boundary = self._trace_boundary(boundary_points)
        self._seed_w, self._seed_z = self._seed_grid()

    def __repr__(self):
        return f"HexDomain(delta={self.delta!r})"

    # -- derivative -----------------------------------------------------
    def log_derivative(self, w):
        """``log S'(w)`` on the fixed branch, accurate for small ``|w|``."""
        w = np.asarray(w, dtype=complex)
        u = w[..., None] / PREVERTICES
        # log(1 - u) with log1p on the modulus so that tiny |u| keeps full precision
        re = 0.5 * np.log1p(u.real * u.real + u.imag * u.imag - 2.0 * u.real)
        im = np.arctan2(-u.imag, 1.0 - u.real)
        return -np.sum(self.exponents * (re + 1j * im), axis=-1)

    def log_derivative_prime(self, w):
        """``S''/S' = sum e_k/(v_k - w)``."""
        w = np.asarray(w, dtype=complex)
        return np.sum(self.exponents / (PREVERTICES - w[..., None]), axis=-1)

    def log_derivative_second(self, w):
        w = np.asarray(w, dtype=complex)
        return np.sum(self.exponents / (PREVERTICES - w[..., None]) ** 2, axis=-1)

    def _check_disk(self, w, closed: bool = True):
        a = np.abs(w)
        lim = 1.0 + 1e-14 if closed else 1.0
        if np.any(a > lim) or (not closed and np.any(a >= 1.0)):
            raise DomainError(f"point outside the {'closed' if closed else 'open'} unit disk (|w| = {a.max():.17g})")
        near = np.min(np.abs(np.asarray(w, dtype=complex)[..., None] - PREVERTICES), axis=-1)
        if np.any(near < 1e-15):
            raise SingularityError("map derivative is singular at a prevertex")

    def derivative(self, w):
        w = np.asarray(w, dtype=complex)
        self._check_disk(w)
        return np.exp(self.log_derivative(w))

    # -- Taylor data at the origin --------------------------------------
    def _taylor_analytic(self) -> TaylorData:
        conj_v = np.conj(PREVERTICES)
        s1 = 1.0 + 0j
        l1 = complex(np.sum(self.exponents * conj_v))
        l2 = complex(np.sum(self.exponents * conj_v ** 2))
        s2 = s1 * l1
        s3 = s1 * (l1 * l1 + l2)
        return _with_inverse(s1, s2, s3)

    def taylor_cauchy(self, radius: float = 0.5, n: int = 256) -> TaylorData:
        """Independent route: Cauchy integrals of ``S'`` on a circle (trapezoid rule)."""
        th = 2.0 * np.pi * np.arange(n) / n
        w = radius * np.exp(1j * th)
        f = self.derivative(w)
        # coefficient c_m of w^m in S': mean of f w^-m
        c = [complex(np.mean(f * np.exp(-1j * m * th)) / radius ** m) for m in range(3)]
        return _with_inverse(c[0], c[1], 2.0 * c[2])

    # -- path quadrature -------------------------------------------------
    def _panel(self, a: complex, b: complex) -> tuple[complex, float]:
        # value and L1 size; the latter bounds the rounding noise of the value
        x, wt = self._gl
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        f = wt * np.exp(self.log_derivative(mid + half * x))
        return complex(half * np.sum(f)), float(abs(half) * np.sum(np.abs(f)))

    def integrate_segment(self, a: complex, b: complex, tol: float = 1e-14) -> complex:
        """``int_a^b S'`` along the straight segment, adaptive composite Gauss-Legendre.

        Panels are bisected until the two-half estimate agrees with the
        whole-panel estimate to ``tol`` (scaled by panel length), which
        grades them dyadically toward endpoints near the unit circle.
        """
        a, b = complex(a), complex(b)
        if a == b:
            return 0j
        total = abs(b - a)
        stack = [(a, b, self._panel(a, b)[0], 0)]
        acc = 0j
        panels = 0
        smallest = total
        while stack:
            pa, pb, whole, depth = stack.pop()
            m = 0.5 * (pa + pb)
            (left, l1a), (right, l1b) = self._panel(pa, m), self._panel(m, pb)
            halves = left + right
            panels += 1
            frac = abs(pb - pa) / total
            limit = max(tol * frac, 64.0 * np.finfo(float).eps * (l1a + l1b))
            if abs(halves - whole) <= limit:
                acc += halves
                continue
            if depth >= 60 or panels >= _MAX_PANELS:
                smallest = min(smallest, abs(pb - pa))
                raise QuadratureError(
                    f"quadrature from {a} to {b} did not converge: {panels} panels, "
                    f"smallest {smallest:.3e}, last estimate change {abs(halves - whole):.3e}")
            stack.append((m, pb, right, depth + 1))
            stack.append((pa, m, left, depth + 1))
        return acc

    def _vertex_image(self, k: int) -> complex:
        # int_0^1 (1 - s)^(-e_k) g(s) ds with g the remaining (smooth) factors
        v = PREVERTICES[k]
        e = self.exponents[k]
        head = self.integrate_segment(0j, 0.5 * v)
        x, wt = roots_jacobi(32, -e, 0.0)
        s = 0.75 + 0.25 * x
        others = np.delete(np.arange(6), k)
        u = (s * v)[:, None] / PREVERTICES[others]
        logs = 0.5 * np.log1p(u.real ** 2 + u.imag ** 2 - 2.0 * u.real) + 1j * np.arctan2(-u.imag, 1.0 - u.real)
        g = np.exp(-np.sum(self.exponents[others] * logs, axis=1))
        tail = v * 4.0 ** e / 4.0 * np.sum(wt * g)
        return complex(head + tail)

    def map(self, w: complex) -> complex:
        w = complex(w)
        for k in range(6):
            if w == PREVERTICES[k]:
                return complex(self.vertices[k])
        self._check_disk(np.asarray(w))
        return self.integrate_segment(0j, w)

    # -- caches -----------------------------------------------------------
    def _trace_boundary(self, per_side: int) -> np.ndarray:
        pts = []
        for k in range(6):
            pts.append(self.vertices[k])
            th0 = k * np.pi / 3.0
            for j in range(1, per_side):
                w = np.exp(1j * (th0 + j * np.pi / 3.0 / per_side))
                pts.append(self.integrate_segment(0j, w))
        return np.array(pts)

    def _seed_grid(self):
        radii = np.array([0.0, 0.2, 0.4, 0.55, 0.7, 0.8, 0.87, 0.92, 0.95, 0.97])
        ang = 2.0 * np.pi * np.arange(48) / 48
        ws = [0j]
        zs = [0j]
        for th in ang:
            prev_w, prev_z = 0j, 0j
            for r in radii[1:]:
                w = r * np.exp(1j * th)
                z = prev_z + self.integrate_segment(prev_w, w)
                ws.append(w)
                zs.append(z)
                prev_w, prev_z = w, z
        return np.array(ws), np.array(zs)

    def contains(self, z: complex) -> bool:
        """Ray-casting test against the cached boundary polyline."""
        x, y = z.real, z.imag
        px, py = self.boundary.real, self.boundary.imag
        qx, qy = np.roll(px, -1), np.roll(py, -1)
        crosses = (py > y) != (qy > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = px + (y - py) * (qx - px) / (qy - py)
        return bool(np.sum(crosses & (x < xint)) % 2)

    def inverse(self, z: complex, max_iter: int = 50, tol: float = 1e-12) -> complex:
        z = complex(z)
        if not self.contains(z):
            raise DomainError(f"z = {z} lies outside the traced boundary")
        k = int(np.argmin(np.abs(self._seed_z - z)))
        w, s = complex(self._seed_w[k]), complex(self._seed_z[k])
        for _ in range(max_iter):
            res = s - z
            if abs(res) < 0.1 * tol:
                break
            step = -res / complex(np.exp(self.log_derivative(w)))
            w_new = w + step
            while abs(w_new) >= 1.0:
                step *= 0.5
                w_new = w + step
            s = s + self.integrate_segment(w, w_new)
            w = w_new
        final = abs(self.map(w) - z)
        if not final < tol:
            raise InversionError(f"Newton inversion of z = {z} failed: residual {final:.3e} after {max_iter} iterations")
        return w


def _with_inverse(s1: complex, s2: complex, s3: complex) -> TaylorData:
    # T = S^-1: T' = 1/S', T'' = -S''/S'^3, T''' = -S'''/S'^4 + 3 S''^2/S'^5
    t1 = 1.0 / s1
    t2 = -s2 / s1 ** 3
    t3 = -s3 / s1 ** 4 + 3.0 * s2 ** 2 / s1 ** 5
    return TaylorData(complex(s1), complex(s2), complex(s3), complex(t1), complex(t2), complex(t3))


def sc_derivative(domain: HexDomain, w) -> complex:
    return complex(domain.derivative(complex(w)))


def sc_map(domain: HexDomain, w) -> complex:
    return domain.map(w)


def inverse_map(domain: HexDomain, z) -> complex:
    return domain.inverse(complex(z))


@dataclass(frozen=True)
class RobinValue:
    gamma_tilde: float
    conformal_radius: float


def robin_data(domain: HexDomain, w) -> RobinValue:
    """Conformal radius ``|S'(w)| (1 - |w|^2)`` and ``gamma~ = -ln(r)/(2 pi)`` at ``S(w)``."""
    w = complex(w)
    if not abs(w) < 1.0:
        raise DomainError(f"robin_data needs |w| < 1, got |w| = {abs(w)!r}")
    log_r = float(domain.log_derivative(w).real) + math.log1p(-(w.real ** 2 + w.imag ** 2))
    return RobinValue(-log_r / (2.0 * math.pi), math.exp(log_r))


def robin_value(domain: HexDomain, z) -> float:
    return robin_data(domain, domain.inverse(complex(z))).gamma_tilde


def _grad_w(domain: HexDomain, w: complex) -> complex:
    lp = complex(domain.log_derivative_prime(w))
    return -(lp.conjugate() - 2.0 * w / (1.0 - abs(w) ** 2)) / (2.0 * math.pi)


def robin_gradient(domain: HexDomain, z) -> np.ndarray:
    """``grad gamma~`` at ``z``: w-plane gradient divided by ``conj(S'(w))``."""
    w = domain.inverse(complex(z))
    g = _grad_w(domain, w) / complex(np.exp(domain.log_derivative(w))).conjugate()
    return np.array([g.real, g.imag])


def robin_gradient_fd(domain: HexDomain, z, step: float = 1e-6) -> np.ndarray:
    """Central differences of :func:`robin_value`; test oracle only."""
    z = complex(z)
    gx = (robin_value(domain, z + step) - robin_value(domain, z - step)) / (2.0 * step)
    gy = (robin_value(domain, z + 1j * step) - robin_value(domain, z - 1j * step)) / (2.0 * step)
    return np.array([gx, gy])


def domain_vortex_rhs(domain: HexDomain, a: float, z) -> np.ndarray:
    """``(a/2) perp(grad gamma~)`` with ``perp(p, q) = (-q, p)``."""
    g = robin_gradient(domain, z)
    return 0.5 * a * np.array([-g[1], g[0]])


def rhs_jacobian(domain: HexDomain, a: float, z=0j, step: float = 1e-6) -> np.ndarray:
    z = complex(z)
    cols = []
    for dz in (step, 1j * step):
        cols.append((domain_vortex_rhs(domain, a, z + dz) - domain_vortex_rhs(domain, a, z - dz)) / (2.0 * step))
    return np.column_stack(cols)


@dataclass(frozen=True, eq=False)
class RobinField:
    w: np.ndarray
    z: np.ndarray
    gamma_tilde: np.ndarray
    conformal_radius: np.ndarray


def robin_field(domain: HexDomain, n_radii: int = 24, n_angles: int = 72, r_max: float = 0.98) -> RobinField:
    """Polar grid in the disk with the image points and Robin data."""
    radii = np.linspace(0.0, r_max, n_radii)
    ws, zs, gs, rs = [], [], [], []
    for th in 2.0 * np.pi * np.arange(n_angles) / n_angles:
        prev_w, prev_z = 0j, 0j
        for r in radii:
            w = r * np.exp(1j * th)
            z = prev_z + domain.integrate_segment(prev_w, w)
            prev_w, prev_z = w, z
            rv = robin_data(domain, w)
            ws.append(w)
            zs.append(z)
            gs.append(rv.gamma_tilde)
            rs.append(rv.conformal_radius)
    return RobinField(np.array(ws), np.array(zs), np.array(gs), np.array(rs))


@dataclass(frozen=True, eq=False)
class DomainEscape:
    delta: float
    intensity: float
    escape: EscapeResult
    lambda0_closed: float
    lambda0_fd: float
    level_drift: float


def _rhs_flat(domain: HexDomain, a: float):
    def fun(_t, y):
        return domain_vortex_rhs(domain, a, complex(y[0], y[1]))
    return fun


def level_line_drift(domain: HexDomain, states: np.ndarray, z_star: complex = 0j) -> float:
    """Largest change of ``gamma~`` along the states, relative to the quadratic
    scale ``(1/2) max|lambda_pm| max|z - z*|^2`` of the Robin function there."""
    from .bounds import domain_thresholds

    t = domain.taylor
    th = domain_thresholds(abs(t.t1), abs(t.t3))
    curv = max(abs(th.lambda_plus), abs(th.lambda_minus))
    zs = states[:, 0] + 1j * states[:, 1]
    g = np.array([robin_value(domain, z) for z in zs])
    scale = 0.5 * curv * float(np.max(np.abs(zs - z_star))) ** 2
    return float(np.max(np.abs(g - g[0])) / scale)


def domain_escape(domain: HexDomain, epsilon: float, beta: float, a: float = 1.0,
                  settings: IntegratorSettings = IntegratorSettings(), *, horizon: float | None = None,
                  window: tuple[float, float] | None = None, drift_samples: int = 60) -> DomainEscape:
    """Escape of a single vortex from the Robin saddle at 0.

    The direction is the unstable eigenvector of the finite-difference
    Jacobian of :func:`domain_vortex_rhs` at the origin.
    """
    from .bounds import domain_thresholds

    t = domain.taylor
    closed = domain_thresholds(abs(t.t1), abs(t.t3), a)
    J = rhs_jacobian(domain, a)
    ev, vecs = np.linalg.eig(J)
    k = int(np.argmax(ev.real))
    lam = float(ev[k].real)
    if not (lam > 0.0 and abs(ev[k].imag) <= 1e-9 * abs(ev[k])):
        raise NumericalError(f"no real unstable eigenvalue at the origin (eigenvalues {ev})")
    v = np.real(vecs[:, k])
    res = escape_run(_rhs_flat(domain, a), np.zeros(2), v, epsilon, beta, lam, settings,
                     horizon=horizon, window=window)
    sol = res.trajectory
    ts = np.linspace(0.0, res.tau_z, drift_samples)
    drift = level_line_drift(domain, sol.sample(ts))
    return DomainEscape(domain.delta, a, res, closed.lambda0, lam, drift)


def domain_orbit(domain: HexDomain, z0: complex, t_end: float, a: float = 1.0,
                 settings: IntegratorSettings = IntegratorSettings()):
    """Free single-vortex trajectory (dense solution over ``[0, t_end]``)."""
    return solve(_rhs_flat(domain, a), np.array([z0.real, z0.imag]), 0.0, t_end, settings)


def boundary_csv(domain: HexDomain, path=None) -> str:
    text = csv_text(["x", "y"], ([z.real, z.imag] for z in domain.boundary))
    if path is not None:
        write_text(path, text)
    return text


def robin_csv(field: RobinField, path=None) -> str:
    rows = ([w.real, w.imag, z.real, z.imag, g, r]
            for w, z, g, r in zip(field.w, field.z, field.gamma_tilde, field.conformal_radius))
    text = csv_text(["w_re", "w_im", "x", "y", "gamma_tilde", "conformal_radius"], rows)
    if path is not None:
        write_text(path, text)
    return text

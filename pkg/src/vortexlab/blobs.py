"""Vortex blobs as marker clouds: uniform patches around each vortex of a
configuration, their evolution under the alpha-kernel, and the moment
diagnostics (barycenter, inertia, support radius, exit time)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import AlphaModel, Configuration, _pair_geometry, green, min_separation
from .crystal import CrystalSpec, build_crystal
from .errors import CollisionError, DomainError, NoInstabilityError
from .export import csv_text, write_text
from .linearization import linearize
from .ode import DenseSolution, IntegratorSettings, integrate, solve, sup_blocks

__all__ = [
    "PatchSpec",
    "CloudState",
    "CloudTrajectory",
    "BlobDiagnostics",
    "BlobEscapeResult",
    "GOLDEN_ANGLE",
    "sample_patch",
    "cloud_from_patches",
    "evolve_cloud",
    "cloud_invariants",
    "diagnostics",
    "blob_escape",
    "diagnostics_csv",
    "markers_csv",
]

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))
#: squared-distance floor applied to same-blob pairs that collide numerically
REGULARIZATION_FLOOR = 1e-12


@dataclass(frozen=True)
class PatchSpec:
    """Uniform disk of radius ``eps^(nu/2)/4`` carrying total intensity ``a``."""

    center: complex
    intensity: float
    epsilon: float
    nu: float
    markers: int

    def __post_init__(self):
        c = self.center
        if not isinstance(c, complex):
            c = complex(*c) if np.ndim(c) == 1 else complex(c)
        object.__setattr__(self, "center", c)
        if not (0.0 < self.epsilon < 1.0):
            raise DomainError(f"epsilon must lie in (0, 1), got {self.epsilon!r}")
        if not self.nu >= 2.0:
            raise DomainError(f"nu must be at least 2, got {self.nu!r}")
        if int(self.markers) != self.markers or self.markers < 1:
            raise DomainError(f"need at least one marker, got {self.markers!r}")
        if not self.intensity or not math.isfinite(self.intensity):
            raise DomainError("patch intensity must be finite and nonzero")
        object.__setattr__(self, "markers", int(self.markers))

    @property
    def radius(self) -> float:
        return self.epsilon ** (self.nu / 2.0) / 4.0

    @property
    def amplitude(self) -> float:
        """Vorticity level ``16 |a| eps^-nu / pi`` of the indicator patch (metadata only)."""
        return 16.0 * abs(self.intensity) * self.epsilon ** (-self.nu) / math.pi

    @property
    def inertia(self) -> float:
        """Exact moment of inertia of the continuous patch, ``eps^nu/32``."""
        return self.epsilon ** self.nu / 32.0


def sample_patch(spec: PatchSpec) -> np.ndarray:
    """Point-symmetric sunflower layout of ``M`` markers, returned as ``(M, 2)``.

    Half of the markers follow a Fibonacci spiral at radii
    ``R sqrt((k + 1/2)/K)``; the other half are their reflections through the
    centre, and odd ``M`` adds one marker at the centre.  The barycenter is
    therefore exact and, for even ``M``, so is the inertia ``R^2/2``.
    """
    M = spec.markers
    K = M // 2
    R = spec.radius
    pts = []
    if M % 2:
        pts.append(np.zeros((1, 2)))
    if K:
        k = np.arange(K)
        r = R * np.sqrt((k + 0.5) / K)
        th = k * GOLDEN_ANGLE
        half = np.column_stack([r * np.cos(th), r * np.sin(th)])
        pts.extend([half, -half])
    out = np.vstack(pts)
    out[:, 0] += spec.center.real
    out[:, 1] += spec.center.imag
    return out


@dataclass(frozen=True, eq=False)
class CloudState:
    """Markers of all blobs; marker ``m`` belongs to blob ``blob_index[m]`` and
    carries ``blob_intensity[b] / count[b]``."""

    positions: np.ndarray
    blob_index: np.ndarray
    blob_intensity: np.ndarray

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float, copy=True).reshape(-1, 2)
        idx = np.array(self.blob_index, dtype=int, copy=True).reshape(-1)
        gam = np.array(self.blob_intensity, dtype=float, copy=True).reshape(-1)
        if idx.shape[0] != pos.shape[0]:
            raise DomainError("one blob index per marker is required")
        if idx.min() < 0 or idx.max() >= gam.shape[0] or np.unique(idx).size != gam.shape[0]:
            raise DomainError("every blob needs at least one marker and indices must be in range")
        if not np.all(np.isfinite(pos)):
            raise DomainError("marker positions must be finite")
        for arr in (pos, idx, gam):
            arr.flags.writeable = False
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "blob_index", idx)
        object.__setattr__(self, "blob_intensity", gam)

    @property
    def n_blobs(self) -> int:
        return self.blob_intensity.shape[0]

    @property
    def n_markers(self) -> int:
        return self.positions.shape[0]

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.blob_index, minlength=self.n_blobs)

    @property
    def marker_intensities(self) -> np.ndarray:
        return (self.blob_intensity / self.counts)[self.blob_index]

    def with_positions(self, positions) -> "CloudState":
        return CloudState(positions, self.blob_index, self.blob_intensity)

    def circulations(self) -> np.ndarray:
        """Per-blob sum of marker intensities."""
        return np.bincount(self.blob_index, weights=self.marker_intensities, minlength=self.n_blobs)

    def barycenters(self) -> np.ndarray:
        w = self.marker_intensities
        num = np.column_stack([np.bincount(self.blob_index, weights=w * self.positions[:, c],
                                           minlength=self.n_blobs) for c in (0, 1)])
        return num / self.circulations()[:, None]

    def inertias(self) -> np.ndarray:
        d = self.positions - self.barycenters()[self.blob_index]
        w = self.marker_intensities
        return np.bincount(self.blob_index, weights=w * (d[:, 0] ** 2 + d[:, 1] ** 2),
                           minlength=self.n_blobs) / self.circulations()

    def support_radii(self) -> np.ndarray:
        d = self.positions - self.barycenters()[self.blob_index]
        r = np.hypot(d[:, 0], d[:, 1])
        out = np.zeros(self.n_blobs)
        np.maximum.at(out, self.blob_index, r)
        return out


def cloud_from_patches(patches: list[PatchSpec]) -> CloudState:
    pos = [sample_patch(p) for p in patches]
    idx = np.concatenate([np.full(p.markers, b) for b, p in enumerate(patches)])
    return CloudState(np.vstack(pos), idx, [p.intensity for p in patches])


class CloudTrajectory:
    """Dense cloud solution plus the regularization tally."""

    def __init__(self, template: CloudState, solution: DenseSolution, model: AlphaModel,
                 self_interaction: bool, regularizations: int):
        self.template = template
        self.solution = solution
        self.model = model
        self.self_interaction = self_interaction
        self.regularizations = regularizations

    @property
    def times(self) -> np.ndarray:
        return self.solution.times

    @property
    def quarantined(self) -> bool:
        """Runs that needed the collision floor are excluded from acceptance statistics."""
        return self.regularizations > 0

    def state_at(self, t: float) -> CloudState:
        return self.template.with_positions(self.solution.at(t))

    @property
    def states(self) -> list[CloudState]:
        return [self.template.with_positions(y) for y in self.solution.ys]


def _interaction_mask(state: CloudState, self_interaction: bool) -> np.ndarray:
    same = state.blob_index[:, None] == state.blob_index[None, :]
    mask = np.ones_like(same) if self_interaction else ~same
    np.fill_diagonal(mask, False)
    return mask


def evolve_cloud(model: AlphaModel, state: CloudState, t_end: float,
                 settings: IntegratorSettings = IntegratorSettings(), *,
                 self_interaction: bool = True, collision_floor: float = 0.0,
                 event=None) -> CloudTrajectory:
    """Direct-summation evolution of every marker.

    With ``self_interaction=False`` markers feel only the other blobs (each
    blob is then passively advected).  Same-blob pairs closer than
    ``1e-12`` have their squared distance floored and every activation is
    counted; markers of different blobs closer than ``collision_floor``
    raise :class:`CollisionError`.
    """
    if not t_end > 0.0:
        raise DomainError("t_end must be positive")
    _, r2 = _pair_geometry(state.positions)
    np.fill_diagonal(r2, np.inf)
    if np.any(r2 == 0.0):
        raise DomainError("markers must be pairwise distinct")
    mask = _interaction_mask(state, self_interaction)
    same = (state.blob_index[:, None] == state.blob_index[None, :]) & mask
    check_same = bool(same.any())
    weights = mask * state.marker_intensities[None, :]
    cross = state.blob_index[:, None] != state.blob_index[None, :]
    alpha, c_alpha = model.alpha, model.c_alpha
    tally = [0]
    floor2 = REGULARIZATION_FLOOR ** 2
    expo = -(alpha + 1.0) / 2.0

    def rhs(_t, y):
        x, q = y[0::2], y[1::2]
        dx = x[:, None] - x[None, :]
        dy = q[:, None] - q[None, :]
        rr = dx * dx
        rr += dy * dy
        if check_same:
            hit = same & (rr < floor2)
            if hit.any():
                tally[0] += int(hit.sum()) // 2
                rr[hit] = floor2
        np.fill_diagonal(rr, 1.0)
        if alpha == 1.0:
            np.reciprocal(rr, out=rr)
        else:
            np.power(rr, expo, out=rr)
        rr *= weights
        u = np.empty_like(y)
        u[0::2] = np.einsum("ij,ij->i", rr, dy)
        u[1::2] = np.einsum("ij,ij->i", rr, dx)
        u[0::2] *= -c_alpha
        u[1::2] *= c_alpha
        return u

    check = None
    if collision_floor > 0.0 and state.n_blobs > 1:
        def check(t, y):
            pos = y.reshape(-1, 2)
            _, rr = _pair_geometry(pos)
            rr = np.where(cross, rr, np.inf)
            k = int(np.argmin(rr))
            if rr.flat[k] < collision_floor ** 2:
                i, j = divmod(k, pos.shape[0])
                raise CollisionError(f"markers {i} and {j} of different blobs met at t = {t!r}",
                                     time=t, pair=(min(i, j), max(i, j)))

    sol = solve(rhs, state.positions.reshape(-1), 0.0, t_end, settings, event=event, check=check)
    return CloudTrajectory(state, sol, model, self_interaction, tally[0])


def cloud_invariants(model: AlphaModel, state: CloudState, self_interaction: bool = True):
    """``(H, momentum, circulations)`` of the marker system over active pairs."""
    g = state.marker_intensities
    _, r2 = _pair_geometry(state.positions)
    mask = np.triu(_interaction_mask(state, self_interaction), k=1)
    ham = float(np.sum((g[:, None] * g[None, :] * green(model, np.sqrt(np.where(mask, r2, 1.0))))[mask]))
    mom = g @ state.positions
    return ham, mom, state.circulations()


@dataclass(frozen=True, eq=False)
class BlobDiagnostics:
    times: np.ndarray
    barycenters: np.ndarray        # (T, N, 2)
    inertias: np.ndarray           # (T, N)
    support_radii: np.ndarray      # (T, N)
    exit_time: float | None


def _outside(state: CloudState, centers: np.ndarray, radius: float) -> bool:
    d = state.positions - centers[state.blob_index]
    return bool(np.any(d[:, 0] ** 2 + d[:, 1] ** 2 > radius * radius))


def diagnostics(trajectory: CloudTrajectory, Z_star: Configuration, epsilon: float, beta: float,
                times=None) -> BlobDiagnostics:
    """Moments per snapshot and the first exit of any marker from ``D(z_i*, eps^beta)``.

    Snapshots default to the accepted step times; the exit is bisected on
    the interpolant between the last inside and first outside snapshot.
    """
    ts = trajectory.times if times is None else np.asarray(times, dtype=float)
    if ts.size == 0:
        raise DomainError("trajectory has no snapshots")
    if Z_star.n != trajectory.template.n_blobs:
        raise DomainError("one stationary center per blob is required")
    centers = Z_star.positions
    radius = epsilon ** beta
    bary, inert, supp = [], [], []
    exit_time = None
    prev = None
    for t in ts:
        st = trajectory.state_at(t)
        bary.append(st.barycenters())
        inert.append(st.inertias())
        supp.append(st.support_radii())
        if exit_time is None and _outside(st, centers, radius):
            if prev is None:
                exit_time = float(t)
            else:
                a, b = prev, float(t)
                while b - a > 1e-10:
                    m = 0.5 * (a + b)
                    if _outside(trajectory.state_at(m), centers, radius):
                        b = m
                    else:
                        a = m
                exit_time = b
        prev = float(t)
    return BlobDiagnostics(ts.copy(), np.array(bary), np.array(inert), np.array(supp), exit_time)


@dataclass(frozen=True, eq=False)
class BlobEscapeResult:
    """Cloud run from a perturbed crystal next to its point-vortex oracle."""

    epsilon: float
    beta: float
    nu: float
    markers: int
    lambda0: float
    kappa1: float
    kappa2: float
    tau_z: float
    diagnostics: BlobDiagnostics
    gap: np.ndarray                # sup_i |B_i(t) - Z_i(t)| on diagnostics.times
    cloud: CloudTrajectory
    oracle: object                 # ode.Trajectory
    invariant_drift: dict

    @property
    def exit_time(self) -> float | None:
        return self.diagnostics.exit_time

    @property
    def prediction(self) -> float:
        return (1.0 - self.beta) / self.lambda0 * abs(math.log(self.epsilon))


def blob_escape(model: AlphaModel, spec: CrystalSpec, epsilon: float, nu: float, beta: float,
                markers: int, settings: IntegratorSettings = IntegratorSettings(), *,
                self_interaction: bool = False, n_times: int = 400,
                horizon: float | None = None) -> BlobEscapeResult:
    """Patches centred at ``Z* + (eps/2) v/|v|_inf`` evolved up to the oracle's exit time.

    The oracle is the point-vortex trajectory started from the initial
    barycenters; its first passage through sup-distance ``2 eps^beta`` from
    ``Z*`` fixes the run length ``tau_z``.
    """
    if spec.model != model:
        spec = CrystalSpec(spec.n_total, model)
    Z_star = build_crystal(spec)
    rep = linearize(model, Z_star)
    if rep.unstable_eigenvector is None:
        raise NoInstabilityError("crystal has no real unstable direction")
    v = rep.unstable_eigenvector / sup_blocks(rep.unstable_eigenvector)
    z0 = Z_star.flat + 0.5 * epsilon * v
    patches = [PatchSpec(complex(z0[2 * i], z0[2 * i + 1]), Z_star.intensities[i], epsilon, nu, markers)
               for i in range(Z_star.n)]
    cloud0 = cloud_from_patches(patches)
    B0 = cloud0.barycenters()
    exit_radius = 2.0 * epsilon ** beta
    if horizon is None:
        horizon = 4.0 * ((1.0 - beta) * abs(math.log(epsilon)) + math.log(4.0)) / rep.lambda0
    star = Z_star.flat

    oracle = integrate(model, Configuration(B0, Z_star.intensities), horizon, settings,
                       event=lambda _t, y: sup_blocks(y - star) - exit_radius)
    tau = oracle.solution.event_time
    if tau is None:
        raise NoInstabilityError("point-vortex oracle did not leave the exit radius")
    sep = min_separation(Z_star)
    cloud = evolve_cloud(model, cloud0, tau, settings, self_interaction=self_interaction,
                         collision_floor=1e-3 * sep)
    ts = np.linspace(0.0, tau, n_times)
    diag = diagnostics(cloud, Z_star, epsilon, beta, ts)
    zs = oracle.solution.sample(ts).reshape(len(ts), -1, 2)
    dv = diag.barycenters - zs
    gap = np.max(np.hypot(dv[..., 0], dv[..., 1]), axis=1)

    h0, p0, c0 = cloud_invariants(model, cloud0, self_interaction)
    dh = dp = dc = 0.0
    scale_p = float(np.sum(np.abs(cloud0.marker_intensities) * np.hypot(*cloud0.positions.T)))
    for y in cloud.solution.ys[1:]:
        h, p, c = cloud_invariants(model, cloud0.with_positions(y), self_interaction)
        dh = max(dh, abs(h - h0) / abs(h0))
        dp = max(dp, float(np.hypot(*(p - p0))) / scale_p)
        dc = max(dc, float(np.max(np.abs(c - c0) / np.abs(c0))))
    drift = {"hamiltonian": dh, "linear_momentum": dp, "circulation": dc}
    return BlobEscapeResult(epsilon, beta, nu, markers, rep.lambda0, rep.kappa1, rep.kappa2, tau,
                            diag, gap, cloud, oracle, drift)


def diagnostics_csv(diag: BlobDiagnostics, path=None) -> str:
    """``t`` then ``Bx_i, By_i, I_i, R_i`` per blob."""
    n = diag.barycenters.shape[1]
    header = ["t"] + [f"{c}{i + 1}" for i in range(n) for c in ("Bx", "By", "I", "R")]
    rows = []
    for k, t in enumerate(diag.times):
        row = [t]
        for i in range(n):
            row += [diag.barycenters[k, i, 0], diag.barycenters[k, i, 1],
                    diag.inertias[k, i], diag.support_radii[k, i]]
        rows.append(row)
    text = csv_text(header, rows)
    if path is not None:
        write_text(path, text)
    return text


def markers_csv(trajectory: CloudTrajectory, times, path=None) -> str:
    """Raw marker dump: one row per (snapshot, marker)."""
    rows = []
    for t in times:
        st = trajectory.state_at(t)
        for m in range(st.n_markers):
            rows.append([t, m, int(st.blob_index[m]), st.positions[m, 0], st.positions[m, 1]])
    text = csv_text(["t", "marker", "blob", "x", "y"], rows)
    if path is not None:
        write_text(path, text)
    return text

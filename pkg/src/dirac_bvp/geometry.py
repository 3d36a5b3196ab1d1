"""Stationary metrics in co-moving charts.

Every closure evaluates ``g_ij`` together with its analytic first
derivatives ``d_k g_ij`` at a chart point ``(t, r, angles...)``.  The chart is
co-moving with the Killing field, so ``K = d/dt`` and no component depends on
``t`` (nor on the azimuthal angle for the axisymmetric families).

Signature convention is ``(+, -, ..., -)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "GeometryError",
    "KerrParams",
    "MetricSample",
    "MetricClosure",
    "GaussianChart",
    "kerr_ef",
    "kerr_ef_sample",
    "ef_schwarzschild",
    "ef_charged_3d",
    "flat_polar",
    "flat_spherical",
    "flat_cartesian",
    "horizon_radii",
    "killing_norm",
    "find_timelike_mix",
    "christoffels",
    "gaussian_normal_chart",
]


class GeometryError(ValueError):
    """Raised for points outside a chart or violated metric preconditions."""


class InfeasibleMixError(GeometryError):
    """No Killing mix ``d_t + b d_phi`` is timelike on the whole boundary."""

    def __init__(self, message, best_b, deficit):
        super().__init__(message)
        self.best_b = best_b
        self.deficit = deficit


class ChartError(GeometryError):
    """Gaussian normal chart is not injective; ``r_max`` must shrink."""

    def __init__(self, message, suggested_r_max):
        super().__init__(message)
        self.suggested_r_max = suggested_r_max


@dataclass(frozen=True)
class KerrParams:
    M: float
    a: float = 0.0
    b: float = 0.0
    r0: float | None = None

    def __post_init__(self):
        if not self.M > 0:
            raise GeometryError(f"mass must be positive, got M={self.M}")
        if abs(self.a) >= self.M:
            raise GeometryError(f"extreme or over-extreme Kerr: |a|={abs(self.a)} >= M={self.M}")
        if self.r0 is None:
            return
        if not self.r0 > 0:
            raise GeometryError(f"inner boundary radius must be positive, got {self.r0}")
        rm, rp = horizon_radii(self.M, self.a)
        if math.isclose(self.r0, rm) or math.isclose(self.r0, rp):
            raise GeometryError(f"r0={self.r0} sits on a horizon")


@dataclass(frozen=True)
class MetricSample:
    """Metric data at one point: ``g``, ``dg[k, i, j] = d_k g_ij``, inverse, determinant."""

    g: np.ndarray
    dg: np.ndarray
    ginv: np.ndarray
    detg: float

    @classmethod
    def from_components(cls, g, dg):
        g = np.asarray(g, dtype=float)
        ginv = np.linalg.inv(g)
        ginv = 0.5 * (ginv + ginv.T)
        return cls(g=g, dg=np.asarray(dg, dtype=float), ginv=ginv, detg=float(np.linalg.det(g)))

    @property
    def d(self) -> int:
        return self.g.shape[0]

    @property
    def lapse_factor(self) -> float:
        """``g^{tt}``; positive iff the constant-t slice is spacelike."""
        return float(self.ginv[0, 0])

    @property
    def slice_metric(self) -> np.ndarray:
        """Riemannian metric ``g_N = -g_{ab}`` of the constant-t slice."""
        return -self.g[1:, 1:]


@dataclass(frozen=True, eq=False)
class MetricClosure:
    """Analytic metric in a co-moving chart.

    ``evaluate(x)`` returns ``(g, dg)`` with ``dg[k] = d_k g``.  The Killing
    field is ``killing`` in chart components (``K^t = 1``).
    """

    name: str
    d: int
    evaluate: Callable[[np.ndarray], tuple]
    coord_names: tuple
    radial_range: tuple = (0.0, math.inf)
    periodic: tuple = ()
    polar: int | None = None
    r0: float | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.coord_names) != self.d:
            raise GeometryError("one coordinate name per dimension required")

    @property
    def killing(self) -> np.ndarray:
        k = np.zeros(self.d)
        k[0] = 1.0
        return k

    @property
    def azimuthal(self) -> int | None:
        """Index of the rotational Killing coordinate, if the metric has one."""
        return self.periodic[-1] if self.periodic else None

    def check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise GeometryError(f"expected {self.d} coordinates, got shape {x.shape}")
        lo, hi = self.radial_range
        if not (lo < x[1] < hi):
            raise GeometryError(f"r={x[1]} outside chart range ({lo}, {hi})")
        if self.polar is not None:
            th = x[self.polar]
            if not (0.0 < th < math.pi):
                raise GeometryError(f"theta={th} at or beyond a pole")
        return x

    def sample(self, x) -> MetricSample:
        x = self.check_point(x)
        g, dg = self.evaluate(x)
        return MetricSample.from_components(g, dg)

    def speed_bound(self, x) -> float:
        """Largest radial characteristic coordinate speed ``|dr/dt|`` at ``x``."""
        s = self.sample(x)
        gtt, gtr, grr = s.ginv[0, 0], s.ginv[0, 1], s.ginv[1, 1]
        disc = gtr * gtr - gtt * grr
        if gtt <= 0 or disc < 0:
            raise GeometryError(f"no finite characteristic speed at {x}")
        root = math.sqrt(disc)
        return max(abs(gtr + root), abs(gtr - root)) / gtt


# --------------------------------------------------------------------------
# Kerr in horizon-penetrating Eddington-Finkelstein-type coordinates


def _kerr_components(M, a, r, th):
    """Components and (r, theta) derivatives in the non-rotating chart."""
    c, s1 = math.cos(th), math.sin(th)
    s = s1 * s1
    sig = r * r + a * a * c * c
    sig_r, sig_th = 2.0 * r, -2.0 * a * a * c * s1
    rho = 2.0 * M * r / sig
    rho_r = 2.0 * M / sig - 2.0 * M * r * sig_r / sig**2
    rho_th = -2.0 * M * r * sig_th / sig**2
    s_th = 2.0 * s1 * c

    g = np.zeros((4, 4))
    dr = np.zeros((4, 4))
    dth = np.zeros((4, 4))
    # index order: tau, r, theta, phi
    g[0, 0], dr[0, 0], dth[0, 0] = 1.0 - rho, -rho_r, -rho_th
    g[0, 1], dr[0, 1], dth[0, 1] = -rho, -rho_r, -rho_th
    g[0, 3] = rho * a * s
    dr[0, 3], dth[0, 3] = rho_r * a * s, a * (rho_th * s + rho * s_th)
    g[1, 1], dr[1, 1], dth[1, 1] = -(1.0 + rho), -rho_r, -rho_th
    g[1, 3] = (1.0 + rho) * a * s
    dr[1, 3], dth[1, 3] = rho_r * a * s, a * (rho_th * s + (1.0 + rho) * s_th)
    g[2, 2], dr[2, 2], dth[2, 2] = -sig, -sig_r, -sig_th
    g[3, 3] = -(1.0 + rho) * a * a * s * s - sig * s
    dr[3, 3] = -rho_r * a * a * s * s - sig_r * s
    dth[3, 3] = (-rho_th * a * a * s * s - (1.0 + rho) * a * a * 2.0 * s * s_th
                 - sig_th * s - sig * s_th)
    for m in (g, dr, dth):
        iu = np.triu_indices(4, 1)
        m[(iu[1], iu[0])] = m[iu]
    return g, dr, dth


def kerr_ef_sample(params: KerrParams, p) -> MetricSample:
    """Kerr metric at ``p = (tau, r, theta, phi')`` in the chart co-rotating with ``d_tau + b d_phi``.

    With ``phi' = phi - b tau`` the Killing field ``d_tau + b d_phi`` becomes
    the coordinate field of the new time, so downstream code always uses
    ``K = d_t``.
    """
    p = np.asarray(p, dtype=float)
    r, th = p[1], p[2]
    if r <= 0:
        raise GeometryError(f"r must be positive, got {r}")
    if not 0.0 < th < math.pi:
        raise GeometryError(f"theta={th} at or beyond a pole")
    g, dr, dth = _kerr_components(params.M, params.a, r, th)
    if params.b != 0.0:
        jac = np.eye(4)
        jac[3, 0] = params.b  # d phi = d phi' + b d tau
        g, dr, dth = (jac.T @ m @ jac for m in (g, dr, dth))
    dg = np.zeros((4, 4, 4))
    dg[1], dg[2] = dr, dth
    return MetricSample.from_components(g, dg)


def kerr_ef(M: float, a: float = 0.0, b: float = 0.0, r0: float | None = None) -> MetricClosure:
    """Closure for the Kerr family; ``b`` selects the co-rotating Killing mix."""
    params = KerrParams(M=M, a=a, b=b, r0=r0)

    def evaluate(x):
        s = kerr_ef_sample(params, x)
        return s.g, s.dg

    return MetricClosure(
        name="kerr_ef" if a != 0.0 else "ef_schwarzschild",
        d=4,
        evaluate=evaluate,
        coord_names=("t", "r", "theta", "phi"),
        periodic=(3,),
        polar=2,
        r0=r0,
        params={"M": M, "a": a, "b": b},
    )


def ef_schwarzschild(M: float, r0: float | None = None) -> MetricClosure:
    """Ingoing Eddington-Finkelstein Schwarzschild: the ``a = 0`` member of :func:`kerr_ef`."""
    return kerr_ef(M, 0.0, 0.0, r0)


def ef_charged_3d(M: float, Q: float = 0.0, r0: float | None = None) -> MetricClosure:
    """Three-dimensional EF-type test family with lapse ``f = 1 - 2M/r + Q^2/r^2``.

    ``ds^2 = f dt^2 - 2(1-f) dt dr - (2-f) dr^2 - r^2 dphi^2``.  The (t, r)
    block has determinant -1, ``g^{rr} = -f`` and ``g^{tt} = 2 - f``, so the
    horizons sit at the roots of ``f`` (``r = 2M`` when ``Q = 0``) and slices
    stay spacelike wherever ``f < 2``.
    """
    if not M > 0:
        raise GeometryError("mass must be positive")
    if abs(Q) >= M:
        raise GeometryError("|Q| must stay below M")

    def evaluate(x):
        r = x[1]
        f = 1.0 - 2.0 * M / r + Q * Q / (r * r)
        fr = 2.0 * M / (r * r) - 2.0 * Q * Q / r**3
        g = np.array([[f, -(1.0 - f), 0.0], [-(1.0 - f), -(2.0 - f), 0.0], [0.0, 0.0, -r * r]])
        dg = np.zeros((3, 3, 3))
        dg[1] = np.array([[fr, fr, 0.0], [fr, fr, 0.0], [0.0, 0.0, -2.0 * r]])
        return g, dg

    return MetricClosure(
        name="ef_charged_3d", d=3, evaluate=evaluate, coord_names=("t", "r", "phi"),
        periodic=(2,), r0=r0, params={"M": M, "Q": Q},
    )


def flat_polar(r0: float | None = None) -> MetricClosure:
    """Minkowski space in 2+1 dimensions, polar (cylindrical) chart ``(t, r, phi)``."""

    def evaluate(x):
        r = x[1]
        dg = np.zeros((3, 3, 3))
        dg[1, 2, 2] = -2.0 * r
        return np.diag([1.0, -1.0, -r * r]), dg

    return MetricClosure(
        name="flat", d=3, evaluate=evaluate, coord_names=("t", "r", "phi"), periodic=(2,), r0=r0,
    )


def flat_spherical(r0: float | None = None) -> MetricClosure:
    """Minkowski space in 3+1 dimensions, spherical chart ``(t, r, theta, phi)``."""

    def evaluate(x):
        r, th = x[1], x[2]
        s, c = math.sin(th), math.cos(th)
        dg = np.zeros((4, 4, 4))
        dg[1, 2, 2] = -2.0 * r
        dg[1, 3, 3] = -2.0 * r * s * s
        dg[2, 3, 3] = -2.0 * r * r * s * c
        return np.diag([1.0, -1.0, -r * r, -r * r * s * s]), dg

    return MetricClosure(
        name="flat", d=4, evaluate=evaluate, coord_names=("t", "r", "theta", "phi"),
        periodic=(3,), polar=2, r0=r0,
    )


def flat_cartesian(d: int = 3) -> MetricClosure:
    """Minkowski space in Cartesian coordinates; the first spatial one is named ``r``."""

    def evaluate(x):
        return np.diag([1.0] + [-1.0] * (d - 1)), np.zeros((d, d, d))

    return MetricClosure(
        name="flat_cartesian", d=d, evaluate=evaluate,
        coord_names=("t", "r") + tuple(f"x{i}" for i in range(2, d)),
        radial_range=(-math.inf, math.inf), periodic=(d - 1,),
    )


# --------------------------------------------------------------------------
# diagnostics


def horizon_radii(M: float, a: float) -> tuple[float, float]:
    """Cauchy and event horizon radii ``M -+ sqrt(M^2 - a^2)``."""
    if not M > 0:
        raise GeometryError("mass must be positive")
    if abs(a) >= M:
        raise GeometryError(f"|a|={abs(a)} >= M={M}: no non-extreme horizons")
    root = math.sqrt(M * M - a * a)
    return M - root, M + root


def killing_norm(closure: MetricClosure, p, killing=None) -> float:
    """``<K, K> = g_ij K^i K^j``; positive where ``K`` is timelike."""
    k = closure.killing if killing is None else np.asarray(killing, dtype=float)
    s = closure.sample(p)
    return float(k @ s.g @ k)


def find_timelike_mix(M, a, r0, b_range=(-2.0, 2.0), n_samples=64, n_b=401):
    """Pick ``b`` so that ``d_tau + b d_phi`` is timelike on the sphere ``r = r0``.

    Among the scanned feasible values, the one maximising the minimum over
    ``theta`` of ``<K, K>`` is refined by bounded scalar minimisation.
    """
    from scipy.optimize import minimize_scalar

    rm, rp = horizon_radii(M, a)
    if math.isclose(r0, rm) or math.isclose(r0, rp):
        raise GeometryError(f"r0={r0} lies on a horizon")
    thetas = (np.arange(n_samples) + 0.5) * math.pi / n_samples
    base = [_kerr_components(M, a, r0, th)[0] for th in thetas]

    def worst(b):
        vals = [g[0, 0] + 2.0 * b * g[0, 3] + b * b * g[3, 3] for g in base]
        return min(vals)

    bs = np.linspace(b_range[0], b_range[1], n_b)
    scores = np.array([worst(b) for b in bs])
    i = int(np.argmax(scores))
    lo, hi = bs[max(i - 1, 0)], bs[min(i + 1, n_b - 1)]
    res = minimize_scalar(lambda b: -worst(b), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    b_best, best = (res.x, -res.fun) if -res.fun >= scores[i] else (bs[i], scores[i])
    if best <= 0:
        raise InfeasibleMixError(
            f"no timelike Killing mix for b in {b_range} at r0={r0}", best_b=float(b_best),
            deficit=float(best))
    return float(b_best)


def christoffels(closure: MetricClosure, p) -> np.ndarray:
    """``Gamma[i, j, k] = 1/2 g^{il} (d_j g_lk + d_k g_lj - d_l g_jk)``."""
    s = closure.sample(p)
    return christoffels_from_sample(s)


def christoffels_from_sample(s: MetricSample) -> np.ndarray:
    # dg[l, j, k] = d_l g_jk ; term[l, j, k] = d_j g_lk + d_k g_lj - d_l g_jk
    term = np.einsum("jlk->ljk", s.dg) + np.einsum("klj->ljk", s.dg) - s.dg
    return 0.5 * np.einsum("il,ljk->ijk", s.ginv, term)


# --------------------------------------------------------------------------
# Gaussian normal coordinates of the slice near the inner boundary


@dataclass(frozen=True)
class GaussianChart:
    """Geodesic collar ``(rho, Omega) -> x`` of the inner boundary inside the slice.

    ``points[i, j]`` are the spatial chart coordinates of ``c(rho_i, Omega_j)``;
    ``g_rho_rho``, ``g_rho_omega`` and ``g_omega_omega`` are the pulled back
    slice metric components on the same lattice.
    """

    closure: MetricClosure
    rho: np.ndarray
    omega: np.ndarray
    omega_coord: int
    points: np.ndarray
    velocities: np.ndarray
    g_rho_rho: np.ndarray
    g_rho_omega: np.ndarray
    g_omega_omega: np.ndarray
    richardson_error: float

    @property
    def r_max(self) -> float:
        return float(self.rho[-1])

    def forward(self, rho: float, omega: float) -> np.ndarray:
        """Spatial point ``c(rho, omega)`` by integrating a single geodesic."""
        x0, u0 = _boundary_start(self.closure, self.omega_coord, omega)
        n = max(1, int(math.ceil(256 * rho / max(self.r_max, 1e-300))))
        path, _ = _integrate_geodesic(self.closure, x0, u0, rho / n if rho > 0 else 0.0, n)
        return path[-1]

    def inverse(self, x) -> tuple[float, float]:
        """Chart coordinates ``(rho, omega)`` of a spatial point in the collar."""
        from scipy.optimize import least_squares

        x = np.asarray(x, dtype=float)
        flat = self.points.reshape(-1, self.points.shape[-1])
        j = int(np.argmin(np.sum((flat - x) ** 2, axis=1)))
        i0, j0 = divmod(j, len(self.omega))
        c = self.omega_coord - 1

        def resid(z):
            y = self.forward(z[0], z[1])
            return (y - x)[[0, c]] if c != 0 else (y - x)[[0]]

        sol = least_squares(resid, [self.rho[i0], self.omega[j0]], xtol=1e-14, ftol=1e-14)
        return float(sol.x[0]), float(sol.x[1])


def _slice_christoffels(s: MetricSample) -> np.ndarray:
    gn = s.slice_metric
    dgn = -s.dg[1:, 1:, 1:]
    inv = np.linalg.inv(gn)
    term = np.einsum("jlk->ljk", dgn) + np.einsum("klj->ljk", dgn) - dgn
    return 0.5 * np.einsum("il,ljk->ijk", inv, term)


def _spacetime_point(y):
    return np.concatenate([[0.0], y])


def _boundary_start(closure, omega_coord, omega):
    x = np.zeros(closure.d - 1)
    x[0] = closure.r0
    if closure.polar is not None:
        x[closure.polar - 1] = math.pi / 2
    x[omega_coord - 1] = omega
    s = closure.sample(_spacetime_point(x))
    gn = s.slice_metric
    inv = np.linalg.inv(gn)
    u = inv[:, 0] / math.sqrt(inv[0, 0])  # unit normal to r = r0 pointing to larger r
    return x, u


def _integrate_geodesic(closure, x0, u0, h, n):
    def rhs(state):
        y, v = state[: len(x0)], state[len(x0):]
        gam = _slice_christoffels(closure.sample(_spacetime_point(y)))
        return np.concatenate([v, -np.einsum("ijk,j,k->i", gam, v, v)])

    state = np.concatenate([x0, u0])
    out_x, out_v = [x0.copy()], [u0.copy()]
    for _ in range(n):
        k1 = rhs(state)
        k2 = rhs(state + 0.5 * h * k1)
        k3 = rhs(state + 0.5 * h * k2)
        k4 = rhs(state + h * k3)
        state = state + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out_x.append(state[: len(x0)].copy())
        out_v.append(state[len(x0):].copy())
    return np.array(out_x), np.array(out_v)


def gaussian_normal_chart(closure: MetricClosure, r_max: float, boundary_grid: Sequence[float],
                          omega_coord: int | None = None, n_steps: int = 256,
                          injectivity_tol: float = 1e-3) -> GaussianChart:
    """Shoot slice geodesics normal to ``r = r0`` and record the collar chart.

    ``boundary_grid`` samples the boundary coordinate ``omega_coord`` (defaults
    to the last spatial coordinate).  Geodesics use classical RK4 with step
    ``r_max / n_steps``; a half-resolution rerun gives the Richardson error
    estimate.  Neighbouring geodesics approaching each other closer than
    ``injectivity_tol`` times their initial separation raise :class:`ChartError`.
    """
    if closure.r0 is None:
        raise GeometryError("closure has no inner boundary radius")
    if not r_max > 0:
        raise GeometryError("r_max must be positive")
    omega_coord = closure.d - 1 if omega_coord is None else omega_coord
    omega = np.asarray(boundary_grid, dtype=float)
    h = r_max / n_steps
    rho = np.arange(n_steps + 1) * h
    dom = 1e-6

    pts, vels, side = [], [], []
    richardson = 0.0
    for w in omega:
        x0, u0 = _boundary_start(closure, omega_coord, w)
        try:
            path, vel = _integrate_geodesic(closure, x0, u0, h, n_steps)
            coarse, _ = _integrate_geodesic(closure, x0, u0, 2 * h, n_steps // 2)
        except GeometryError as exc:
            raise ChartError(f"geodesic left the chart: {exc}", suggested_r_max=0.5 * r_max) from exc
        richardson = max(richardson, float(np.max(np.abs(path[::2] - coarse))) / 15.0)
        xp, up = _boundary_start(closure, omega_coord, w + dom)
        xm, um = _boundary_start(closure, omega_coord, w - dom)
        pp, _ = _integrate_geodesic(closure, xp, up, h, n_steps)
        pm, _ = _integrate_geodesic(closure, xm, um, h, n_steps)
        pts.append(path)
        vels.append(vel)
        side.append((pp - pm) / (2 * dom))
    pts = np.array(pts).transpose(1, 0, 2)
    vels = np.array(vels).transpose(1, 0, 2)
    side = np.array(side).transpose(1, 0, 2)

    shape = pts.shape[:2]
    grr, gro, goo = np.empty(shape), np.empty(shape), np.empty(shape)
    for i in range(shape[0]):
        for j in range(shape[1]):
            gn = closure.sample(_spacetime_point(pts[i, j])).slice_metric
            v, e = vels[i, j], side[i, j]
            grr[i, j] = v @ gn @ v
            gro[i, j] = v @ gn @ e
            goo[i, j] = e @ gn @ e

    spread = np.sqrt(np.maximum(goo, 0.0))
    ratio = spread / spread[0]
    bad = np.nonzero(np.min(ratio, axis=1) < injectivity_tol)[0]
    if bad.size:
        focal = float(rho[bad[0]])
        raise ChartError(
            f"neighbouring normal geodesics focus near rho={focal:.6g}; decrease r_max",
            suggested_r_max=0.5 * focal)
    return GaussianChart(closure=closure, rho=rho, omega=omega, omega_coord=omega_coord,
                         points=pts, velocities=vels, g_rho_rho=grr, g_rho_omega=gro,
                         g_omega_omega=goo, richardson_error=richardson)

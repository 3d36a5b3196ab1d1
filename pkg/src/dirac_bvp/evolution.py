"""Windowed Cauchy evolution by splitting data between the boundary collar and the interior.

Each window of length ``eps`` cuts the current data with ``eta``: the
collar part ``psi_B = eta psi`` is evolved on the double-boundary region X by
its eigenfunction series, the interior part ``psi_I = (1 - eta) psi`` by a
method-of-lines integrator on the grid with no condition on the inner face.
Finite propagation speed keeps each part away from the face it does not
control, and monitors turn any breach into a ``WindowViolation``.

Radial distances are measured in the chart, ``s = r - r0``; speeds are the
coordinate speeds ``|dr/dt|`` of the characteristic cone.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import GeometryError, MetricClosure
from .hamiltonian import DiscreteHamiltonian, Grid, assemble_hamiltonian
from .spectral import RegionX, SpectralBasis, build_region_X, eigendecompose_X

__all__ = [
    "WindowViolation",
    "InstabilityError",
    "EvolutionConfigError",
    "CutoffEta",
    "EvolutionConfig",
    "EvolutionTrace",
    "SplitSolver",
    "max_speed",
    "epsilon_from_lightcones",
    "split_initial",
    "CrankNicolson",
    "evolve_cauchy",
    "reference_evolve",
    "support_and_speed_check",
    "export_trace",
]


class WindowViolation(RuntimeError):
    """One part of the split data reached a face it must not touch within the window."""

    def __init__(self, message, amplitude, where):
        super().__init__(message)
        self.amplitude = amplitude
        self.where = where


class InstabilityError(RuntimeError):
    """The w-norm drifted beyond tolerance."""


class EvolutionConfigError(ValueError):
    """Inconsistent evolution parameters (step size, window)."""


# --------------------------------------------------------------------------
# cutoff and window length


def _phi(x):
    out = np.zeros_like(x, dtype=float)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


@dataclass(frozen=True)
class CutoffEta:
    """Smooth ``eta(s)``: equal to 1 for ``s <= r_max/8`` and 0 for ``s >= r_max/4``."""

    r_max: float

    @property
    def plateau(self) -> float:
        return self.r_max / 8

    @property
    def edge(self) -> float:
        return self.r_max / 4

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        t = (s - self.plateau) / (self.edge - self.plateau)
        a, b = _phi(1.0 - t), _phi(t)
        out = np.where(t <= 0, 1.0, 0.0)
        mid = (t > 0) & (t < 1)
        out[mid] = a[mid] / (a[mid] + b[mid])
        return out


def max_speed(closure: MetricClosure, points) -> float:
    """Largest radial characteristic coordinate speed over ``points``."""
    v = max(closure.speed_bound(x) for x in np.atleast_2d(points))
    if not math.isfinite(v) or v <= 0:
        raise GeometryError(f"characteristic speed bound {v} is not finite and positive")
    return float(v)


def epsilon_from_lightcones(closure: MetricClosure, grid: Grid, r_max: float) -> float:
    """``eps = r_max / (8 v_max)``.

    Within ``eps`` data from ``s < r_max/4`` stays in ``s < r_max/2`` and data
    from ``s > r_max/8`` stays in ``s > 0``; the first bound is the binding one.
    """
    v = max_speed(closure, grid.points())
    return min((r_max / 4) / v, (r_max / 8) / v)


def split_initial(psi0, eta_values):
    """``(psi_B, psi_I)`` with ``psi_B + psi_I == psi0`` exactly in floating point.

    Where ``eta >= 1/2`` the product ``eta psi0`` lies within a factor two of
    ``psi0``, so ``psi0 - psi_B`` is exact; elsewhere the roles are swapped.
    Real and imaginary parts are handled independently.
    """
    psi0 = np.asarray(psi0)
    eta = np.asarray(eta_values, dtype=float)
    if psi0.ndim == 1 and eta.shape != psi0.shape:
        eta = np.repeat(eta, psi0.size // eta.size)
    big = eta >= 0.5

    def part(x):
        b = np.empty_like(x)
        i = np.empty_like(x)
        b[big] = eta[big] * x[big]
        i[big] = x[big] - b[big]
        i[~big] = (1.0 - eta[~big]) * x[~big]
        b[~big] = x[~big] - i[~big]
        return b, i

    if np.iscomplexobj(psi0):
        br, ir = part(psi0.real.copy())
        bi, ii = part(psi0.imag.copy())
        return br + 1j * bi, ir + 1j * ii
    return part(psi0.astype(float))


# --------------------------------------------------------------------------
# configuration and trace


@dataclass(frozen=True)
class EvolutionConfig:
    T_final: float
    dt: float
    r_max: float
    scheme: str = "crank_nicolson"
    cfl: float = 1.0
    threshold: float = 1e-10
    window_tol: float = 1e-10
    norm_tol: float = 1e-8
    series_phases: str = "cayley"
    monitor_samples: int = 8
    window_fraction: float = 0.5

    def __post_init__(self):
        if self.scheme not in ("crank_nicolson", "rk4"):
            raise EvolutionConfigError(f"unknown scheme {self.scheme!r}")
        if self.series_phases not in ("exact", "cayley"):
            raise EvolutionConfigError(f"unknown series phase rule {self.series_phases!r}")
        for name in ("dt", "r_max", "cfl", "threshold"):
            if not getattr(self, name) > 0:
                raise EvolutionConfigError(f"{name} must be positive")
        if not 0 < self.window_fraction <= 1:
            raise EvolutionConfigError("window_fraction must lie in (0, 1]")
        if not math.isfinite(self.T_final):
            raise EvolutionConfigError("T_final must be finite")


@dataclass
class EvolutionTrace:
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    w_norm: list = field(default_factory=list)
    boundary_residual: list = field(default_factory=list)
    support_radius: list = field(default_factory=list)
    gluing_discrepancy: list = field(default_factory=list)

    def record(self, t, psi, norm, resid, radius, gluing):
        if self.times and not (abs(t) > abs(self.times[-1])):
            raise ValueError("snapshot times must advance monotonically")
        self.times.append(float(t))
        self.snapshots.append(np.array(psi, copy=True))
        self.w_norm.append(float(norm))
        self.boundary_residual.append(float(resid))
        self.support_radius.append(float(radius))
        self.gluing_discrepancy.append(float(gluing))


def export_trace(trace: EvolutionTrace, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["t", "w_norm", "boundary_residual", "support_radius", "gluing_discrepancy"])
        for row in zip(trace.times, trace.w_norm, trace.boundary_residual, trace.support_radius,
                       trace.gluing_discrepancy):
            out.writerow([repr(float(v)) for v in row])


# --------------------------------------------------------------------------
# time steppers


class CrankNicolson:
    """``(1 + i dt H/2) psi_{n+1} = (1 - i dt H/2) psi_n`` with a cached sparse LU."""

    def __init__(self, H, dt: float):
        H = sp.csc_matrix(H, dtype=complex)
        eye = sp.identity(H.shape[0], dtype=complex, format="csc")
        self.dt = dt
        self.rhs = (eye - 0.5j * dt * H).tocsr()
        try:
            self.lu = spla.splu((eye + 0.5j * dt * H).tocsc())
        except RuntimeError as exc:
            raise EvolutionConfigError(f"Crank-Nicolson factorisation failed: {exc}") from exc

    def step(self, v):
        return self.lu.solve(self.rhs @ v)


class RK4:
    def __init__(self, H, dt: float):
        self.H = sp.csr_matrix(H, dtype=complex)
        self.dt = dt

    def step(self, v):
        f = lambda u: -1j * (self.H @ u)
        k1 = f(v)
        k2 = f(v + 0.5 * self.dt * k1)
        k3 = f(v + 0.5 * self.dt * k2)
        k4 = f(v + self.dt * k3)
        return v + self.dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _stepper(scheme, H, dt):
    return CrankNicolson(H, dt) if scheme == "crank_nicolson" else RK4(H, dt)


# --------------------------------------------------------------------------
# the split solver


@dataclass(eq=False)
class SplitSolver:
    """Operators and spectral data shared by all windows of one configuration.

    ``reference`` has chiral conditions on both faces of the full grid,
    ``interior`` the same grid with an open inner face, and ``region`` the
    collar ``s <= r_max/2`` with chiral conditions on both of its faces.
    """

    closure: MetricClosure
    grid: Grid
    config: EvolutionConfig
    reference: DiscreteHamiltonian
    interior: DiscreteHamiltonian
    region: RegionX
    basis: SpectralBasis
    eta: CutoffEta
    eps: float
    v_max: float
    _steppers: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, closure: MetricClosure, grid: Grid, config: EvolutionConfig,
              B: Callable | None = None, m: float = 0.0) -> "SplitSolver":
        grid = grid.with_faces(("chiral", "chiral"))
        r0 = grid.radial.nodes[0]
        h = grid.radial.h
        if config.r_max > grid.radial.nodes[-1] - r0 + 1e-12:
            raise EvolutionConfigError("r_max exceeds the radial extent of the grid")
        v_max = max_speed(closure, grid.points())
        if config.dt > config.cfl * h / v_max * (1 + 1e-12):
            raise EvolutionConfigError(
                f"dt={config.dt} violates dt <= CFL h / v_max = {config.cfl * h / v_max:.4g}")
        r_mid = r0 + config.r_max / 2
        reference = assemble_hamiltonian(grid, closure, B=B, m=m)
        region = build_region_X(closure, grid, r_mid, B=B, m=m, shrink=False, data=reference.nodes)
        if abs(region.r_mid - r_mid) > 1e-9 * max(1.0, r_mid):
            raise EvolutionConfigError(f"r0 + r_max/2 = {r_mid} is not a radial grid node")
        interior = assemble_hamiltonian(grid.with_faces(("open", "chiral")), closure, B=B, m=m,
                                        data=reference.nodes)
        basis = eigendecompose_X(region.H.H, region.H.w)
        eps = config.window_fraction * epsilon_from_lightcones(closure, grid, config.r_max)
        return cls(closure=closure, grid=grid, config=config, reference=reference, interior=interior,
                   region=region, basis=basis, eta=CutoffEta(config.r_max), eps=eps, v_max=v_max)

    # -- helpers -----------------------------------------------------------

    @property
    def f(self) -> int:
        return self.reference.f

    def chart_radius(self) -> np.ndarray:
        s = self.grid.points()[:, 1] - self.grid.radial.nodes[0]
        return s

    def stepper(self, which: str, dt: float):
        key = (which, dt)
        if key not in self._steppers:
            H = self.reference.H if which == "reference" else self.interior.H
            self._steppers[key] = _stepper(self.config.scheme if which == "interior" else
                                           "crank_nicolson", H, dt)
        return self._steppers[key]

    def _steps(self, duration: float):
        n = max(1, int(math.ceil(abs(duration) / self.config.dt - 1e-9)))
        return n, duration / n

    def _region_nodes(self) -> int:
        return self.region.grid.n_nodes

    def support_radius(self, psi_full, center: float) -> float:
        amp = np.abs(np.asarray(psi_full).reshape(-1, self.f)).max(axis=1)
        top = amp.max()
        if top == 0:
            return 0.0
        r = self.grid.points()[:, 1]
        return float(np.max(np.abs(r[amp > self.config.threshold * top] - center)))

    # -- the two halves of a window ---------------------------------------

    def boundary_evolve(self, psi_B_full, duration: float):
        """Series evolution of the collar part on X, extended by zero; returns ``(psi, y_amp)``."""
        f = self.f
        n_x = self._region_nodes()
        psi_x = np.asarray(psi_B_full)[: n_x * f]
        scale = max(np.abs(psi_x).max(), 1e-300)
        c = self.region.H.to_reduced(psi_x)
        coef = self.basis.coefficients(c)
        y_nodes = self.region.grid.face_nodes("hi")
        y_amp = 0.0
        samples = np.linspace(0, duration, self.config.monitor_samples + 1)[1:]
        for t in samples:
            phase = self._phases(t)
            v = self.region.H.to_full(self.basis.vectors @ (phase * coef)).reshape(-1, f)
            y_amp = max(y_amp, float(np.abs(v[y_nodes]).max()) / scale)
        out = np.zeros(self.grid.n_nodes * f, dtype=complex)
        out[: n_x * f] = v.ravel()
        return out, y_amp

    def _phases(self, t):
        om = self.basis.omega
        if self.config.series_phases == "exact":
            return np.exp(-1j * om * t)
        n, dt = self._steps(t)
        z = 0.5j * dt * om
        return ((1 - z) / (1 + z)) ** n

    def interior_evolve(self, psi_I_full, duration: float):
        """Method of lines on the open-faced operator; returns ``(psi, inner_amp)``."""
        f = self.f
        H = self.interior
        scale = max(np.abs(psi_I_full).max(), 1e-300)
        c = H.to_reduced(psi_I_full)
        n, dt = self._steps(duration)
        step = self.stepper("interior", dt)
        inner = self.grid.face_nodes("lo")
        amp = 0.0
        for _ in range(n):
            c = step.step(c)
            v = (H.E[: (inner.max() + 1) * f] @ c).reshape(-1, f)
            amp = max(amp, float(np.abs(v[inner]).max()) / scale)
        return H.to_full(c), amp

    def window(self, psi_full, duration: float):
        """One split step; returns ``(psi_new_full, boundary_residual, gluing)``."""
        eta = self.eta(self.chart_radius())
        psi_B, psi_I = split_initial(psi_full, eta)
        scale = max(np.abs(psi_full).max(), 1e-300)
        out_B, y_amp = self.boundary_evolve(psi_B, duration)
        out_I, in_amp = self.interior_evolve(psi_I, duration)
        y_amp *= max(np.abs(psi_B).max(), 1e-300) / scale
        in_amp *= max(np.abs(psi_I).max(), 1e-300) / scale
        tol = self.config.window_tol
        if y_amp > tol:
            raise WindowViolation(f"collar data reached the outer face of X: {y_amp:.3e} > {tol:.1e}",
                                  y_amp, "Y")
        if in_amp > tol:
            raise WindowViolation(f"interior data reached the inner face: {in_amp:.3e} > {tol:.1e}",
                                  in_amp, "inner")
        psi = out_B + out_I
        resid = self.reference.boundary_residual(psi) / scale
        return psi, resid, max(y_amp, in_amp)


def _check_data(solver: SplitSolver, psi0) -> np.ndarray:
    psi0 = np.asarray(psi0, dtype=complex).ravel()
    if psi0.size != solver.grid.n_nodes * solver.f:
        raise ValueError("initial data must be a nodal spinor field on the full grid")
    resid = solver.reference.boundary_residual(psi0)
    if resid > 1e-12 * max(1.0, np.abs(psi0).max()):
        raise ValueError(f"initial data violate the boundary condition (residual {resid:.3e})")
    return psi0


def _center(solver: SplitSolver, psi0) -> float:
    amp = np.abs(psi0.reshape(-1, solver.f)).max(axis=1)
    r = solver.grid.points()[:, 1]
    mask = amp > solver.config.threshold * amp.max()
    return float(0.5 * (r[mask].min() + r[mask].max()))


def evolve_cauchy(solver: SplitSolver, psi0, T: float | None = None) -> EvolutionTrace:
    """Iterate split windows of length ``eps`` (the last one shortened) up to ``T``.

    Negative ``T`` runs backwards.  After each window the glued field is
    projected onto the boundary condition of the full grid.
    """
    T = solver.config.T_final if T is None else T
    psi = _check_data(solver, psi0)
    ref = solver.reference
    center = _center(solver, psi)
    norm0 = ref.full_norm(psi)
    trace = EvolutionTrace()
    trace.record(0.0, psi, norm0, 0.0, solver.support_radius(psi, center), 0.0)
    t = 0.0
    sign = 1.0 if T >= 0 else -1.0
    while abs(T - t) > 1e-12 * max(1.0, abs(T)):
        step = sign * min(solver.eps, abs(T - t))
        psi, resid, gluing = solver.window(psi, step)
        psi = ref.to_full(ref.to_reduced(psi))
        t += step
        norm = ref.full_norm(psi)
        if abs(norm - norm0) > solver.config.norm_tol * max(norm0, 1e-300):
            raise InstabilityError(f"w-norm drift {abs(norm - norm0):.3e} at t={t}")
        trace.record(t, psi, norm, resid, solver.support_radius(psi, center), gluing)
    return trace


def reference_evolve(solver: SplitSolver, psi0, T: float | None = None,
                     times=None) -> EvolutionTrace:
    """Monolithic Crank-Nicolson on the reduced operator of the full grid.

    Snapshots are taken at ``times`` (default: the window ends used by
    ``evolve_cauchy``), each reached with steps no longer than ``config.dt``.
    """
    T = solver.config.T_final if T is None else T
    psi = _check_data(solver, psi0)
    ref = solver.reference
    center = _center(solver, psi)
    if times is None:
        n_win = int(math.ceil(abs(T) / solver.eps - 1e-9))
        times = [math.copysign(min((i + 1) * solver.eps, abs(T)), T) for i in range(n_win)]
    c = ref.to_reduced(psi)
    trace = EvolutionTrace()
    trace.record(0.0, psi, ref.full_norm(psi), ref.boundary_residual(psi),
                 solver.support_radius(psi, center), 0.0)
    t = 0.0
    for target in times:
        n, dt = solver._steps(target - t)
        step = solver.stepper("reference", dt)
        for _ in range(n):
            c = step.step(c)
        t = target
        v = ref.to_full(c)
        trace.record(t, v, ref.full_norm(v), ref.boundary_residual(v),
                     solver.support_radius(v, center), 0.0)
    return trace


@dataclass(frozen=True)
class SpeedReport:
    growth: np.ndarray
    allowed: np.ndarray

    @property
    def ok(self) -> bool:
        return bool(np.all(self.growth <= self.allowed + 1e-12))

    @property
    def worst_margin(self) -> float:
        return float(np.max(self.growth - self.allowed))


def support_and_speed_check(trace: EvolutionTrace, v_max: float, h: float) -> SpeedReport:
    """Support radius growth between snapshots against ``v_max dt + 2 h``."""
    if len(trace.times) < 2:
        raise ValueError("need at least two snapshots")
    t = np.array(trace.times)
    rad = np.array(trace.support_radius)
    growth = np.diff(rad)
    allowed = v_max * np.abs(np.diff(t)) + 2 * h
    return SpeedReport(growth=growth, allowed=allowed)

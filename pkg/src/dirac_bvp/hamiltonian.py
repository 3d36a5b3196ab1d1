"""Discrete Dirac Hamiltonian on a mode-reduced spatial grid.

The Killing angle is separated as ``exp(i k phi)``; the remaining spatial
coordinates are discretised by summation-by-parts (SBP) first-derivative
operators.  Because the frame is adapted to the slice (``e_0 = nu``),
``S nu-slash`` is the identity and the slice product reduces to a positive
scalar weight per node: quadrature weight times ``sqrt(det g_N)``.

The chiral condition ``(n-slash - i) psi = 0`` is imposed on a face by keeping
only the ``ker P`` components of the boundary spinors, ``P = (i n-slash + 1)/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.optimize import brentq

from .geometry import GeometryError, MetricClosure, MetricSample
from .spinor import (CliffordRep, Vielbein, build_vielbein, curved_gammas, flat_clifford_rep,
                     slash, spin_connection)

__all__ = [
    "Axis",
    "Grid",
    "AssemblyError",
    "BoundaryProjector",
    "DiscreteHamiltonian",
    "SymbolSample",
    "radial_grid",
    "periodic_grid",
    "sbp_first_derivative",
    "assemble_hamiltonian",
    "principal_symbol",
    "locate_horizons",
    "boundary_projector",
    "symmetry_residual",
    "compatibility_residuals",
    "make_bump_data",
    "zero_potential",
    "scalar_potential",
    "export_coo",
]


class AssemblyError(GeometryError):
    """The Hamiltonian cannot be assembled at some grid node."""


# --------------------------------------------------------------------------
# grids and stencils


@dataclass(frozen=True)
class Axis:
    coord: int
    nodes: np.ndarray
    periodic: bool = False

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def h(self) -> float:
        if self.periodic:
            return float(self.nodes[1] - self.nodes[0])
        return float((self.nodes[-1] - self.nodes[0]) / (self.n - 1))


@dataclass(frozen=True)
class Grid:
    """Tensor grid over ``axes``; ``faces`` are the conditions at the two ends of ``axes[0]``.

    Each face is ``"chiral"`` (projector elimination) or ``"open"`` (no
    condition).  Nodes are numbered row-major over the axes and spinor
    components run fastest.
    """

    d: int
    axes: tuple
    mode_coord: int | None = None
    k: int = 0
    faces: tuple = ("chiral", "chiral")
    fixed: tuple = ()
    order: int = 2

    def __post_init__(self):
        for face in self.faces:
            if face not in ("chiral", "open"):
                raise ValueError(f"unknown face condition {face!r}")
        for ax in self.axes:
            if ax.n < 4:
                raise ValueError("every axis needs at least 4 nodes")
            if np.any(np.diff(ax.nodes) <= 0):
                raise ValueError("axis nodes must be strictly increasing")

    @property
    def shape(self) -> tuple:
        return tuple(ax.n for ax in self.axes)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def radial(self) -> Axis:
        return self.axes[0]

    def points(self) -> np.ndarray:
        """Chart coordinates of all nodes, shape ``(n_nodes, d)``."""
        mesh = np.meshgrid(*[ax.nodes for ax in self.axes], indexing="ij")
        pts = np.zeros((self.n_nodes, self.d))
        for ax, m in zip(self.axes, mesh):
            pts[:, ax.coord] = m.ravel()
        for coord, value in self.fixed:
            pts[:, coord] = value
        return pts

    def face_nodes(self, side: str) -> np.ndarray:
        idx = np.arange(self.n_nodes).reshape(self.shape)
        return (idx[0] if side == "lo" else idx[-1]).ravel()

    def with_faces(self, faces) -> "Grid":
        return Grid(self.d, self.axes, self.mode_coord, self.k, tuple(faces), self.fixed, self.order)

    def radial_slice(self, i_lo: int, i_hi: int, faces=("chiral", "chiral")) -> "Grid":
        """Sub-grid keeping radial nodes ``i_lo..i_hi`` inclusive."""
        ax = self.radial
        sub = Axis(ax.coord, ax.nodes[i_lo:i_hi + 1], ax.periodic)
        return Grid(self.d, (sub,) + tuple(self.axes[1:]), self.mode_coord, self.k, tuple(faces),
                    self.fixed, self.order)

    def radial_index(self) -> np.ndarray:
        """Radial node index of every node."""
        return np.repeat(np.arange(self.radial.n), self.n_nodes // self.radial.n)


def radial_grid(closure: MetricClosure, r_lo: float, r_hi: float, n_r: int, k: int = 0,
                n_theta: int | None = None, faces=("chiral", "chiral"), order: int = 2) -> Grid:
    """Grid in ``r`` (and ``theta`` for polar charts) with the azimuthal mode ``k``.

    Polar nodes sit at ``(j + 1/2) pi / n_theta``, so no node touches a pole.
    """
    axes = [Axis(1, np.linspace(r_lo, r_hi, n_r))]
    if closure.polar is not None:
        if n_theta is None:
            raise ValueError("polar chart needs n_theta")
        axes.append(Axis(closure.polar, (np.arange(n_theta) + 0.5) * math.pi / n_theta))
    covered = {ax.coord for ax in axes} | {0}
    mode = closure.azimuthal
    if mode is not None:
        covered.add(mode)
    fixed = tuple((c, 0.0) for c in range(closure.d) if c not in covered)
    return Grid(closure.d, tuple(axes), mode, k, tuple(faces), fixed, order)


def periodic_grid(closure: MetricClosure, length: float, n: int, k: int = 0, order: int = 2) -> Grid:
    """Periodic grid along the first spatial coordinate of a Cartesian chart."""
    ax = Axis(1, np.arange(n) * (length / n), periodic=True)
    return Grid(closure.d, (ax,), closure.azimuthal, k, ("open", "open"), (), order)


_SBP4_H = np.array([17 / 48, 59 / 48, 43 / 48, 49 / 48])
_SBP4_Q = np.array([
    [-1 / 2, 59 / 96, -1 / 12, -1 / 32, 0.0, 0.0],
    [-59 / 96, 0.0, 59 / 96, 0.0, 0.0, 0.0],
    [1 / 12, -59 / 96, 0.0, 59 / 96, -1 / 12, 0.0],
    [1 / 32, 0.0, -59 / 96, 0.0, 2 / 3, -1 / 12],
])


def sbp_first_derivative(n: int, h: float, order: int = 2, periodic: bool = False):
    """``(D, weights)`` with ``D = H^{-1} Q`` and ``Q + Q^T = diag(-1, 0, ..., 0, 1)``.

    ``order=2`` is the central operator with first-order closures; ``order=4``
    the diagonal-norm (4, 2) operator.  Periodic operators are plain central
    differences with uniform weights.
    """
    if order == 2:
        stencil = {-1: -0.5, 1: 0.5}
    elif order == 4:
        stencil = {-2: 1 / 12, -1: -2 / 3, 1: 2 / 3, 2: -1 / 12}
    else:
        raise ValueError(f"unsupported stencil order {order}")
    Q = sp.lil_matrix((n, n))
    for i in range(n):
        for off, c in stencil.items():
            j = i + off
            if periodic:
                Q[i, j % n] += c
            elif 0 <= j < n:
                Q[i, j] = c
    weights = np.full(n, h)
    if not periodic:
        if order == 2:
            for i in (0, n - 1):
                Q[i, :] = 0
            Q[0, 0], Q[0, 1] = -0.5, 0.5
            Q[n - 1, n - 2], Q[n - 1, n - 1] = -0.5, 0.5
            weights[0] = weights[-1] = 0.5 * h
        else:
            if n < 8:
                raise ValueError("fourth-order SBP needs at least 8 nodes")
            for i in range(4):
                Q[i, :] = 0
                Q[n - 1 - i, :] = 0
            for i in range(4):
                for j in range(6):
                    Q[i, j] = _SBP4_Q[i, j]
                    Q[n - 1 - i, n - 1 - j] = -_SBP4_Q[i, j]
            weights[:4] = h * _SBP4_H
            weights[-4:] = h * _SBP4_H[::-1]
    D = sp.diags(1.0 / weights) @ Q.tocsr()
    return D.tocsr(), weights


# --------------------------------------------------------------------------
# potentials


def zero_potential(f: int) -> Callable:
    zero = np.zeros((f, f), dtype=complex)
    return lambda x: zero


def scalar_potential(value: Callable | float, f: int) -> Callable:
    """``B(x) = V(x) 1``; spin-symmetric for real ``V``."""
    eye = np.eye(f, dtype=complex)
    if callable(value):
        return lambda x: value(x) * eye
    return lambda x: value * eye


# --------------------------------------------------------------------------
# boundary projector


@dataclass(frozen=True)
class BoundaryProjector:
    """``P = (i n-slash + 1)/2`` with an orthonormal basis ``kernel`` of ``ker P``."""

    n_slash: np.ndarray
    P: np.ndarray
    kernel: np.ndarray


def boundary_projector(sample: MetricSample, rep: CliffordRep, vb: Vielbein | None = None,
                       side: str = "lo") -> BoundaryProjector:
    """Chiral projector for the face ``r = const`` with inner normal pointing into the domain.

    The unit normal is ``n = c g^{-1} dr`` with ``c = -+1/sqrt(-g^{rr})`` for the
    lower/upper face.  ``g^{rr} >= 0`` means the face is not timelike.
    """
    vb = vb if vb is not None else build_vielbein(sample)
    grr = sample.ginv[1, 1]
    if not grr < 0:
        raise GeometryError(f"<n,n> = {-1 if grr < 0 else 'non-negative'}: face normal not spacelike "
                            f"(g^rr = {grr})")
    cov = np.zeros(sample.d)
    cov[1] = (-1.0 if side == "lo" else 1.0) / math.sqrt(-grr)
    n_slash = slash(rep, vb, cov)
    f = rep.f
    P = 0.5 * (1j * n_slash + np.eye(f))
    # ker P = range(1 - P); orthonormal basis from the SVD
    u, svals, _ = np.linalg.svd(np.eye(f) - P)
    kernel = u[:, : f // 2]
    return BoundaryProjector(n_slash=n_slash, P=P, kernel=kernel)


# --------------------------------------------------------------------------
# assembly


@dataclass(frozen=True)
class NodeData:
    """Per-node coefficients of ``H = sum_axis C_axis d_axis + Z``."""

    C: np.ndarray       # (n_nodes, n_axes, f, f)
    Z: np.ndarray       # (n_nodes, f, f)
    J: np.ndarray       # (n_nodes,) sqrt(det g_N)
    gtt: np.ndarray     # (n_nodes,)
    samples: list
    frames: list

    def head(self, n: int) -> "NodeData":
        """Data of the first ``n`` nodes (a radial prefix of the grid)."""
        return NodeData(C=self.C[:n], Z=self.Z[:n], J=self.J[:n], gtt=self.gtt[:n],
                        samples=self.samples[:n], frames=self.frames[:n])


def node_data(grid: Grid, closure: MetricClosure, rep: CliffordRep, B: Callable, m: float,
              h_frame: float = 1e-5, include_time_connection: bool = True) -> NodeData:
    f, d = rep.f, closure.d
    pts = grid.points()
    n = len(pts)
    C = np.zeros((n, len(grid.axes), f, f), dtype=complex)
    Z = np.zeros((n, f, f), dtype=complex)
    J = np.zeros(n)
    gtt = np.zeros(n)
    samples, frames = [], []
    for i, x in enumerate(pts):
        s = closure.sample(x)
        if not s.ginv[0, 0] > 0:
            raise AssemblyError(f"slice not spacelike at node {i} (x={x}): g^tt={s.ginv[0, 0]}")
        vb = build_vielbein(s)
        gam = curved_gammas(rep, vb)
        try:
            gt_inv = np.linalg.inv(gam[0])
        except np.linalg.LinAlgError as exc:
            raise AssemblyError(f"gamma^t singular at node {i}") from exc
        sc = spin_connection(closure, x, rep, h_frame)
        for a, ax in enumerate(grid.axes):
            C[i, a] = -1j * gt_inv @ gam[ax.coord]
        inner = sum(gam[al] @ sc.sigma[al] for al in range(1, d))
        inner = 1j * inner + B(x) - m * np.eye(f)
        if grid.mode_coord is not None:
            inner = inner + 1j * gam[grid.mode_coord] * (1j * grid.k)
        Z[i] = -gt_inv @ inner
        if include_time_connection:
            Z[i] -= 1j * sc.sigma[0]
        J[i] = math.sqrt(np.linalg.det(s.slice_metric))
        gtt[i] = s.ginv[0, 0]
        samples.append(s)
        frames.append(vb)
    return NodeData(C=C, Z=Z, J=J, gtt=gtt, samples=samples, frames=frames)


@dataclass(frozen=True, eq=False)
class DiscreteHamiltonian:
    """Assembled operator.

    ``H_full`` acts on nodal spinors (``f`` values per node) and carries no
    boundary condition.  ``E`` embeds reduced vectors (``ker P`` components on
    chiral faces) into nodal ones; ``H_raw = E^H H_full E`` is the compressed
    operator and ``H`` its symmetrisation in the weighted product ``w``.
    """

    grid: Grid
    f: int
    H_full: sp.csr_matrix
    w_full: np.ndarray
    E: sp.csr_matrix
    H_raw: sp.csr_matrix
    H: sp.csr_matrix
    w: np.ndarray
    projectors: dict
    nodes: NodeData = field(repr=False)

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    def to_reduced(self, psi_full) -> np.ndarray:
        return self.E.conj().T @ np.asarray(psi_full).ravel()

    def to_full(self, c) -> np.ndarray:
        return self.E @ np.asarray(c)

    def norm(self, c) -> float:
        c = np.asarray(c)
        return math.sqrt(float(np.sum(self.w * np.abs(c) ** 2)))

    def full_norm(self, psi_full) -> float:
        psi = np.asarray(psi_full).ravel()
        return math.sqrt(float(np.sum(self.w_full * np.abs(psi) ** 2)))

    def inner(self, a, b) -> complex:
        return complex(np.sum(self.w * np.conj(a) * b))

    def boundary_residual(self, psi_full) -> float:
        """``sqrt(sum |P psi|^2)`` over the nodes of chiral faces."""
        psi = np.asarray(psi_full).reshape(-1, self.f)
        total = 0.0
        for side, (nodes, projs) in self.projectors.items():
            for node, pr in zip(nodes, projs):
                total += float(np.sum(np.abs(pr.P @ psi[node]) ** 2))
        return math.sqrt(total)

    def raw_hermiticity(self) -> float:
        """``||H_raw - H_raw^{+w}||_F / ||H_raw||_F`` in the weighted product."""
        s = np.sqrt(self.w)
        hat = sp.diags(s) @ self.H_raw @ sp.diags(1.0 / s)
        skew = hat - hat.conj().T
        return float(sp.linalg.norm(skew) / sp.linalg.norm(hat))

    def hermiticity(self) -> float:
        s = np.sqrt(self.w)
        hat = sp.diags(s) @ self.H @ sp.diags(1.0 / s)
        return float(sp.linalg.norm(hat - hat.conj().T) / sp.linalg.norm(hat))

    def dense_hermitian(self) -> np.ndarray:
        """``W^{1/2} H W^{-1/2}`` as a dense, exactly Hermitian array."""
        s = np.sqrt(self.w)
        hat = (sp.diags(s) @ self.H @ sp.diags(1.0 / s)).toarray()
        return 0.5 * (hat + hat.conj().T)


def _axis_operators(grid: Grid):
    ops, weights = [], []
    for a, ax in enumerate(grid.axes):
        D, wq = sbp_first_derivative(ax.n, ax.h, grid.order, ax.periodic)
        mats = [sp.identity(other.n, format="csr") for other in grid.axes]
        mats[a] = D
        full = mats[0]
        for mat in mats[1:]:
            full = sp.kron(full, mat, format="csr")
        ops.append(full)
        weights.append(wq)
    quad = weights[0]
    for wq in weights[1:]:
        quad = np.kron(quad, wq)
    return ops, quad


def _block_diag(blocks: np.ndarray) -> sp.csr_matrix:
    n, f, _ = blocks.shape
    return sp.bsr_matrix((blocks, np.arange(n), np.arange(n + 1)), shape=(n * f, n * f)).tocsr()


def assemble_hamiltonian(grid: Grid, closure: MetricClosure, B: Callable | None = None,
                         m: float = 0.0, rep: CliffordRep | None = None, h_frame: float = 1e-5,
                         data: NodeData | None = None) -> DiscreteHamiltonian:
    """Assemble ``H = -(gamma^t)^{-1}(i gamma^a nabla_a + B - m) - i sigma_t`` on ``grid``.

    ``d_phi`` becomes ``i k``.  The time component of the spin connection
    enters through the Killing-parallel frame and keeps the continuum
    operator symmetric for stationary, non-static metrics.
    """
    rep = rep if rep is not None else flat_clifford_rep(closure.d)
    f = rep.f
    B = B if B is not None else zero_potential(f)
    nd = data if data is not None else node_data(grid, closure, rep, B, m, h_frame)
    ops, quad = _axis_operators(grid)
    eye_f = sp.identity(f, format="csr")
    H = _block_diag(nd.Z)
    for a, D in enumerate(ops):
        H = H + _block_diag(nd.C[:, a]) @ sp.kron(D, eye_f, format="csr")
    H = H.tocsr()
    w_node = quad * nd.J
    w_full = np.repeat(w_node, f)

    # embedding: keep ker P components on chiral faces
    projectors = {}
    replace = {}
    for side, face in zip(("lo", "hi"), grid.faces):
        if face != "chiral" or grid.radial.periodic:
            continue
        nodes = grid.face_nodes(side)
        projs = []
        for node in nodes:
            pr = boundary_projector(nd.samples[node], rep, nd.frames[node], side)
            projs.append(pr)
            replace[int(node)] = pr.kernel
        projectors[side] = (nodes, projs)
    rows, cols, vals, w_red = [], [], [], []
    col = 0
    for node in range(grid.n_nodes):
        basis = replace.get(node)
        if basis is None:
            for c in range(f):
                rows.append(node * f + c)
                cols.append(col)
                vals.append(1.0)
                w_red.append(w_node[node])
                col += 1
        else:
            for j in range(basis.shape[1]):
                for c in range(f):
                    rows.append(node * f + c)
                    cols.append(col)
                    vals.append(basis[c, j])
                w_red.append(w_node[node])
                col += 1
    E = sp.csr_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(grid.n_nodes * f, col))
    w_red = np.array(w_red)
    H_raw = (E.conj().T @ H @ E).tocsr()
    Wr = sp.diags(w_red)
    Wr_inv = sp.diags(1.0 / w_red)
    H_sym = (0.5 * (H_raw + Wr_inv @ H_raw.conj().T @ Wr)).tocsr()
    return DiscreteHamiltonian(grid=grid, f=f, H_full=H, w_full=w_full, E=E, H_raw=H_raw,
                               H=H_sym, w=w_red, projectors=projectors, nodes=nd)


def symmetry_residual(H: DiscreteHamiltonian, trials: int = 16, seed: int = 0,
                      raw: bool = True, modes: int = 4) -> float:
    """``max |(psi|H phi)_w - (H psi|phi)_w|`` over random smooth unit pairs.

    Test fields are random spinor combinations of the ``modes`` lowest
    Fourier modes on each axis, projected into the reduced space.
    """
    rng = np.random.default_rng(seed)
    op = H.H_raw if raw else H.H
    grid = H.grid

    def smooth():
        field = np.zeros((grid.n_nodes, H.f), dtype=complex)
        coords = [(ax.nodes - ax.nodes[0]) / (ax.nodes[-1] - ax.nodes[0] + ax.h * ax.periodic)
                  for ax in grid.axes]
        mesh = np.meshgrid(*coords, indexing="ij")
        for _ in range(modes):
            phase = sum(2 * math.pi * rng.integers(0, modes) * m_.ravel() for m_ in mesh)
            amp = rng.normal(size=H.f) + 1j * rng.normal(size=H.f)
            field += np.exp(1j * (phase + rng.uniform(0, 2 * math.pi)))[:, None] * amp[None, :]
        c = H.to_reduced(field.ravel())
        return c / H.norm(c)

    worst = 0.0
    for _ in range(trials):
        a, b = smooth(), smooth()
        lhs = H.inner(a, op @ b)
        rhs = H.inner(op @ a, b)
        worst = max(worst, abs(lhs - rhs))
    return worst


# --------------------------------------------------------------------------
# principal symbol and horizons


@dataclass(frozen=True)
class SymbolSample:
    x: np.ndarray
    xi: np.ndarray
    P: np.ndarray
    detP: complex
    det_formula: float


def principal_symbol(closure: MetricClosure, rep: CliffordRep | None, x, xi) -> SymbolSample:
    """Principal symbol ``P(x, xi) = (gamma^t)^{-1} gamma^a xi_a`` of ``H``.

    Obtained by replacing ``d_a`` with ``i xi_a`` in the first-order part.
    Its determinant is ``(g^{ab} xi_a xi_b / g^{tt})^{f/2}``, returned as
    ``det_formula``.  Where ``g^{ta} = 0`` this is the statement
    ``P^2 = -g^{ab} xi_a xi_b / g^{tt}``.
    """
    rep = rep if rep is not None else flat_clifford_rep(closure.d)
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    s = closure.sample(x)
    if not s.ginv[0, 0] > 0:
        raise GeometryError("g^tt <= 0: symbol undefined")
    gam = curved_gammas(rep, build_vielbein(s))
    P = np.linalg.inv(gam[0]) @ np.einsum("a,apq->pq", xi, gam[1:])
    q = xi @ s.ginv[1:, 1:] @ xi
    formula = (q / s.ginv[0, 0]) ** (rep.f // 2)
    return SymbolSample(x=x, xi=xi, P=P, detP=complex(np.linalg.det(P)), det_formula=float(formula))


def ellipticity_margin(closure: MetricClosure, x) -> float:
    """Largest eigenvalue of the spatial co-metric ``g^{ab}``; negative where elliptic."""
    s = closure.sample(x)
    return float(np.max(np.linalg.eigvalsh(s.ginv[1:, 1:])))


def locate_horizons(closure: MetricClosure, scan: Sequence[float], tol: float = 1e-10,
                    n_scan: int = 400, angles: Sequence[float] | None = None) -> list[float]:
    """Radii where the symbol degenerates on the conormal ``dr`` of the ``r = const`` foliation.

    ``g^{rr}`` is sampled on ``n_scan`` radii (and on ``angles`` for polar
    charts); every sign change common to all angles is bracketed and refined
    with Brent's method to ``tol``.
    """
    lo, hi = scan
    if closure.polar is not None:
        angles = np.linspace(0.2, math.pi - 0.2, 7) if angles is None else np.asarray(angles)
    else:
        angles = [None]

    def grr(r, th):
        x = np.zeros(closure.d)
        x[1] = r
        if th is not None:
            x[closure.polar] = th
        return closure.sample(x).ginv[1, 1]

    rs = np.linspace(lo, hi, n_scan)
    found = []
    for th in angles:
        vals = np.array([grr(r, th) for r in rs])
        roots = []
        for i in range(n_scan - 1):
            if vals[i] == 0.0:
                roots.append(rs[i])
            elif vals[i] * vals[i + 1] < 0:
                roots.append(brentq(grr, rs[i], rs[i + 1], args=(th,), xtol=tol, rtol=1e-15))
        found.append(roots)
    base = found[0]
    for other in found[1:]:
        if len(other) != len(base) or any(abs(a - b) > 10 * tol + 1e-9 for a, b in zip(base, other)):
            raise GeometryError("degeneracy locus of g^rr depends on the angle; not a horizon")
    return [float(r) for r in base]


# --------------------------------------------------------------------------
# compatibility and initial data


def compatibility_residuals(psi0, H: DiscreteHamiltonian, p_max: int = 4) -> list[float]:
    """``||P (H^p psi0)|_boundary||`` for ``p = 0..p_max`` using the nodal operator."""
    v = np.asarray(psi0, dtype=complex).ravel()
    out = []
    for _ in range(p_max + 1):
        out.append(H.boundary_residual(v))
        v = H.H_full @ v
    return out


def _bump(s):
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


def make_bump_data(grid: Grid, center, radius, profile, p_max: int = 4) -> np.ndarray:
    """Smooth compactly supported nodal spinor ``bump(|x - center| / radius) * profile``.

    ``center`` and ``radius`` list one value per grid axis.  Support must stay
    at least ``p_max + 1`` stencil widths away from the radial faces so that
    ``H^p psi`` never touches them for ``p <= p_max``.
    """
    profile = np.asarray(profile, dtype=complex)
    center = np.atleast_1d(np.asarray(center, dtype=float))
    radius = np.atleast_1d(np.asarray(radius, dtype=float))
    if radius.size == 1 and len(grid.axes) > 1:
        radius = np.full(len(grid.axes), radius[0])
    if np.all(radius == 0):
        return np.zeros(grid.n_nodes * len(profile), dtype=complex)
    width = (grid.order // 2 if grid.order == 2 else 5) * (p_max + 1)
    for ax, c, rad in zip(grid.axes[:1], center, radius):
        if ax.periodic:
            continue
        margin = width * ax.h
        if c - rad < ax.nodes[0] + margin or c + rad > ax.nodes[-1] - margin:
            raise ValueError(f"bump support [{c - rad}, {c + rad}] too close to a face of axis "
                             f"{ax.coord} (margin {margin})")
    pts = grid.points()
    s2 = np.zeros(grid.n_nodes)
    for ax, c, rad in zip(grid.axes, center, radius):
        s2 += ((pts[:, ax.coord] - c) / rad) ** 2
    amp = _bump(np.sqrt(s2))
    return (amp[:, None] * profile[None, :]).ravel()


def export_coo(matrix, path) -> None:
    """Write ``row col re im`` lines for every stored entry."""
    coo = sp.coo_matrix(matrix)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {float(v.real)!r} {float(v.imag)!r}\n")


def read_coo(path) -> sp.csr_matrix:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        shape = (int(header[1]), int(header[2]))
        data = np.loadtxt(fh, ndmin=2)
    if data.size == 0:
        return sp.csr_matrix(shape, dtype=complex)
    return sp.csr_matrix((data[:, 2] + 1j * data[:, 3], (data[:, 0].astype(int), data[:, 1].astype(int))),
                         shape=shape)

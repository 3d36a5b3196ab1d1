"""Double-boundary region X, its eigenbasis, and boundary/ellipticity certificates.

On X both faces carry the chiral condition, the reduced Hamiltonian is a
finite Hermitian matrix in the weighted product and the evolution is the
eigenfunction series ``sum_n c_n exp(-i omega_n t) psi_n``.

The boundary operator ``A`` lives on the inner face ``r = r0``.  Its
coordinates are Gaussian normal coordinates of the slice: ``rho`` is the
slice distance from the face and the ``Omega`` coordinates are constant
along the normal geodesics.  At ``rho = 0`` only first derivatives of the
chart enter, so ``d rho`` and ``d Omega`` are computed from the unit normal
and the geodesic integration is not needed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .geometry import GeometryError, MetricClosure, MetricSample
from .hamiltonian import (DiscreteHamiltonian, Grid, assemble_hamiltonian, sbp_first_derivative)
from .spinor import (CliffordRep, SignatureError, build_vielbein, curved_gammas, flat_clifford_rep,
                     killing_slash, slash)

__all__ = [
    "SpectralError",
    "RegionX",
    "SpectralBasis",
    "BoundaryOperator",
    "build_region_X",
    "eigendecompose_X",
    "series_evolve",
    "boundary_participation",
    "boundary_operator_A",
    "a_squared_certificate",
    "gaussian_covectors",
    "anticommutator_residual",
    "garding_estimate",
    "ellipticity_certificate",
    "export_spectrum",
]


class SpectralError(RuntimeError):
    """A spectral precondition (Hermiticity, reconstruction, ellipticity) failed."""


# --------------------------------------------------------------------------
# region X


@dataclass(frozen=True, eq=False)
class RegionX:
    grid: Grid
    H: DiscreteHamiltonian
    i_mid: int
    r0: float
    r_mid: float
    killing_min: float


def build_region_X(closure: MetricClosure, grid: Grid, r_mid: float, B: Callable | None = None,
                   m: float = 0.0, rep: CliffordRep | None = None, shrink: bool = True,
                   data=None) -> RegionX:
    """Sub-grid ``r0 <= r <= r_mid`` of ``grid`` with chiral conditions on both faces.

    ``r_mid`` is snapped to the nearest radial node at or below it.  If the
    Killing field fails to be timelike somewhere in the candidate region the
    outer face is moved inward (``shrink=True``) or an error is raised.
    ``data`` optionally supplies node coefficients already computed on ``grid``.
    """
    nodes = grid.radial.nodes
    i_mid = int(np.searchsorted(nodes, r_mid + 1e-12 * max(1.0, abs(r_mid)), side="right") - 1)
    if i_mid < 3:
        raise GeometryError(f"r_mid={r_mid} leaves fewer than 4 radial nodes in X")
    pts = grid.points()
    ridx = grid.radial_index()
    k = closure.killing
    knorm = np.array([k @ closure.sample(x).g @ k for x in pts])
    per_radius = np.array([knorm[ridx == i].min() for i in range(grid.radial.n)])
    bad = np.nonzero(per_radius[: i_mid + 1] <= 0)[0]
    if bad.size:
        if not shrink or bad[0] < 4:
            raise GeometryError(f"K is not timelike in X near r={nodes[bad[0]]}; no timelike sub-region")
        i_mid = int(bad[0] - 1)
    sub = grid.radial_slice(0, i_mid, ("chiral", "chiral"))
    sub_data = data.head(sub.n_nodes) if data is not None else None
    H = assemble_hamiltonian(sub, closure, B=B, m=m, rep=rep, data=sub_data)
    return RegionX(grid=sub, H=H, i_mid=i_mid, r0=float(nodes[0]), r_mid=float(nodes[i_mid]),
                   killing_min=float(per_radius[: i_mid + 1].min()))


# --------------------------------------------------------------------------
# eigenbasis and series evolution


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """``vectors[:, n]`` is the reduced-space eigenvector of ``omega[n]``, w-orthonormal."""

    omega: np.ndarray
    vectors: np.ndarray
    w: np.ndarray

    def coefficients(self, psi0) -> np.ndarray:
        return self.vectors.conj().T @ (self.w * np.asarray(psi0))

    def orthonormality_error(self) -> float:
        gram = self.vectors.conj().T @ (self.w[:, None] * self.vectors)
        return float(np.max(np.abs(gram - np.eye(len(self.omega)))))


def _weighted_hermiticity(H: np.ndarray, w: np.ndarray) -> float:
    s = np.sqrt(w)
    hat = s[:, None] * H / s[None, :]
    return float(np.linalg.norm(hat - hat.conj().T) / max(np.linalg.norm(hat), 1e-300))


def eigendecompose_X(H_X, w, tol: float = 1e-12, reconstruction_tol: float = 1e-9) -> SpectralBasis:
    """Dense eigendecomposition of an operator Hermitian in ``(a|b)_w = sum w conj(a) b``."""
    H = H_X.toarray() if sp.issparse(H_X) else np.asarray(H_X, dtype=complex)
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0):
        raise SpectralError("weights must be positive")
    resid = _weighted_hermiticity(H, w)
    if resid > tol:
        raise SpectralError(f"operator is not w-Hermitian: relative residual {resid:.3e} > {tol:.1e}")
    s = np.sqrt(w)
    hat = s[:, None] * H / s[None, :]
    hat = 0.5 * (hat + hat.conj().T)
    omega, U = sla.eigh(hat, driver="evr")
    vectors = U / s[:, None]
    recon = (vectors * omega[None, :]) @ (vectors.conj().T * w[None, :])
    err = np.linalg.norm(H - recon) / max(np.linalg.norm(H), 1e-300)
    if err > reconstruction_tol:
        raise SpectralError(f"reconstruction error {err:.3e} exceeds {reconstruction_tol:.1e}")
    return SpectralBasis(omega=omega, vectors=vectors, w=w)


def series_evolve(basis: SpectralBasis, psi0, t: float) -> np.ndarray:
    """``psi(t) = sum_n c_n exp(-i omega_n t) psi_n`` with ``c_n = (psi_n | psi0)_w``."""
    c = basis.coefficients(psi0)
    return basis.vectors @ (np.exp(-1j * basis.omega * t) * c)


def reduced_nodes(H: DiscreteHamiltonian) -> np.ndarray:
    """Grid node owning each reduced coordinate."""
    E = H.E.tocsc()
    return np.array([E.indices[E.indptr[j]] // H.f for j in range(E.shape[1])])


def boundary_participation(basis: SpectralBasis, H: DiscreteHamiltonian) -> np.ndarray:
    """Fraction of each eigenvector's w-norm carried by face nodes."""
    owner = reduced_nodes(H)
    face = np.zeros(H.grid.n_nodes, dtype=bool)
    face[H.grid.face_nodes("lo")] = True
    face[H.grid.face_nodes("hi")] = True
    mask = face[owner]
    dens = basis.w[:, None] * np.abs(basis.vectors) ** 2
    return dens[mask].sum(axis=0) / dens.sum(axis=0)


def export_spectrum(basis: SpectralBasis, H: DiscreteHamiltonian, path) -> None:
    part = boundary_participation(basis, H)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["index", "omega", "participation_at_boundary"])
        for i, (om, p) in enumerate(zip(basis.omega, part)):
            out.writerow([i, repr(float(om)), repr(float(p))])


# --------------------------------------------------------------------------
# Gaussian normal covectors at the face


def gaussian_covectors(sample: MetricSample, angles: tuple, side: str = "lo"):
    """``(d rho, [d Omega_a])`` as spacetime covectors at a point of ``r = const``.

    ``rho`` is slice distance increasing into the domain; ``Omega_a`` agrees
    with the chart angle ``a`` on the face and is constant along the slice
    normal ``u``, so ``d Omega_a = d theta_a - (u^a / u^r) dr``.
    """
    d = sample.d
    hinv = np.linalg.inv(sample.slice_metric)  # spatial indices 1..d-1
    hrr = hinv[0, 0]
    drho = np.zeros(d)
    drho[1] = (1.0 if side == "lo" else -1.0) / math.sqrt(hrr)
    domega = []
    for a in angles:
        v = np.zeros(d)
        v[a] = 1.0
        v[1] = -hinv[a - 1, 0] / hrr
        domega.append(v)
    return drho, domega


def _gaussian_inverse(sample: MetricSample, covs) -> np.ndarray:
    C = np.array(covs)
    return C @ sample.ginv @ C.T


def anticommutator_residual(closure: MetricClosure, x, rep: CliffordRep | None = None,
                            side: str = "lo", general: bool = True) -> float:
    """Residual of ``{X_a, X_b}`` with ``X_a = (gamma^rho)^{-1} gamma^{Omega_a}``.

    The reference is ``-2 g^{ab}/g^{rho rho}``, plus the terms
    ``2 (g^{a rho} gamma^rho gamma^b + g^{b rho} gamma^rho gamma^a)/(g^{rho rho})^2``
    when ``general`` is set; those vanish only if ``g^{rho Omega} = 0``.
    """
    rep = rep if rep is not None else flat_clifford_rep(closure.d)
    s = closure.sample(x)
    angles = tuple(range(2, closure.d))
    drho, doms = gaussian_covectors(s, angles, side)
    vb = build_vielbein(s)
    g_rho = slash(rep, vb, drho)
    g_om = [slash(rep, vb, c) for c in doms]
    ginv = _gaussian_inverse(s, [drho] + doms)
    grr = ginv[0, 0]
    inv_rho = np.linalg.inv(g_rho)
    X = [inv_rho @ g for g in g_om]
    worst = 0.0
    for a in range(len(X)):
        for b in range(len(X)):
            lhs = X[a] @ X[b] + X[b] @ X[a]
            rhs = -2.0 * ginv[a + 1, b + 1] / grr * np.eye(rep.f)
            if general:
                rhs = rhs + 2.0 * (ginv[a + 1, 0] * g_rho @ g_om[b]
                                   + ginv[b + 1, 0] * g_rho @ g_om[a]) / grr ** 2
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


# --------------------------------------------------------------------------
# boundary operator A


@dataclass(frozen=True, eq=False)
class BoundaryOperator:
    """``A0``, ``Z`` and ``A = A0 + Z`` on the face, with the ``K``-slash product ``G``.

    ``G`` is block diagonal: ``S K-slash`` times the induced area element and
    the quadrature weight at each node.
    """

    A0: np.ndarray
    Z: np.ndarray
    A: np.ndarray
    G: np.ndarray
    nodes: np.ndarray
    coord: int
    f: int
    prefactor: np.ndarray   # X_a blocks per node, shape (n, n_angles, f, f)

    def hermiticity(self) -> float:
        L = np.linalg.cholesky(self.G)
        hat = L.conj().T @ self.A @ np.linalg.inv(L.conj().T)
        return float(np.linalg.norm(hat - hat.conj().T) / max(np.linalg.norm(hat), 1e-300))

    def eigenvalues(self) -> np.ndarray:
        L = np.linalg.cholesky(self.G)
        hat = L.conj().T @ self.A @ np.linalg.inv(L.conj().T)
        return np.linalg.eigvalsh(0.5 * (hat + hat.conj().T))

    def product(self, u, v) -> complex:
        return complex(np.vdot(u, self.G @ v))

    def lumped_z_defect(self, u) -> float:
        """``||Z u - Z_lumped u||_G`` where ``Z_lumped`` sums each block row onto the diagonal."""
        n, f = len(self.nodes), self.f
        blocks = self.Z.reshape(n, f, n, f)
        lump = np.zeros_like(self.Z)
        for i in range(n):
            lump[i * f:(i + 1) * f, i * f:(i + 1) * f] = blocks[i].sum(axis=1)
        diff = (self.Z - lump) @ u
        return math.sqrt(max(self.product(diff, diff).real, 0.0))


def boundary_operator_A(closure: MetricClosure, r0: float, n: int, k: int = 0,
                        rep: CliffordRep | None = None, side: str = "lo") -> BoundaryOperator:
    """Discrete ``A`` on the face ``r = r0``.

    For ``d = 3`` the face is the azimuthal circle, sampled at ``n`` periodic
    nodes.  For ``d = 4`` it is the sphere: ``n`` polar nodes offset from the
    poles with summation-by-parts differences, and ``d_phi -> i k``.  The
    adjoint is taken in the ``K``-slash product and
    ``A = (A0 + A0^*)/2``, ``Z = -(A0 - A0^*)/2``.
    """
    rep = rep if rep is not None else flat_clifford_rep(closure.d)
    f = rep.f
    x = np.zeros(closure.d)
    x[1] = r0
    if closure.d == 3:
        coord = closure.azimuthal
        nodes = np.arange(n) * (2 * math.pi / n)
        D, quad = sbp_first_derivative(n, 2 * math.pi / n, 2, periodic=True)
        angles = (coord,)
    elif closure.d == 4:
        coord = closure.polar
        nodes = (np.arange(n) + 0.5) * math.pi / n
        D, quad = sbp_first_derivative(n, math.pi / n, 2)
        angles = (coord, closure.azimuthal)
    else:
        raise ValueError("boundary operator implemented for d = 3, 4")
    D = D.toarray()
    A0 = np.zeros((n * f, n * f), dtype=complex)
    G = np.zeros_like(A0)
    pref = np.zeros((n, len(angles), f, f), dtype=complex)
    for i, th in enumerate(nodes):
        xi = x.copy()
        xi[coord] = th
        s = closure.sample(xi)
        if not s.g[0, 0] > 0:
            raise SignatureError(f"<K,K> = {s.g[0, 0]} <= 0 at boundary node {i}")
        vb = build_vielbein(s)
        drho, doms = gaussian_covectors(s, angles, side)
        inv_rho = np.linalg.inv(slash(rep, vb, drho))
        for a, c in enumerate(doms):
            pref[i, a] = inv_rho @ slash(rep, vb, c)
        area = math.sqrt(np.linalg.det(-s.g[np.ix_(angles, angles)]))
        G[i * f:(i + 1) * f, i * f:(i + 1) * f] = quad[i] * area * (rep.S @ killing_slash(rep, vb, s))
    for i in range(n):
        rows = slice(i * f, (i + 1) * f)
        for j in np.nonzero(D[i])[0]:
            A0[rows, j * f:(j + 1) * f] += D[i, j] * pref[i, 0]
        if closure.d == 4:
            A0[rows, rows] += 1j * k * pref[i, 1]
    G = 0.5 * (G + G.conj().T)
    A0_star = np.linalg.solve(G, A0.conj().T @ G)
    Z = -0.5 * (A0 - A0_star)
    A = 0.5 * (A0 + A0_star)
    return BoundaryOperator(A0=A0, Z=Z, A=A, G=G, nodes=nodes, coord=coord, f=f, prefactor=pref)


@dataclass(frozen=True)
class ASquaredReport:
    frequencies: np.ndarray
    kappa_sq: np.ndarray
    rayleigh: np.ndarray
    fitted: float
    predicted: float

    @property
    def mismatch(self) -> float:
        return abs(abs(self.fitted) - abs(self.predicted)) / abs(self.predicted)


def a_squared_certificate(op: BoundaryOperator, closure: MetricClosure, r0: float,
                          band: tuple = (0.125, 0.25), side: str = "lo") -> ASquaredReport:
    """Fit ``(u|A^2 u)_G / (u|u)_G`` against ``kappa_m^2`` on plane waves of the circle.

    ``kappa_m = sin(m h)/h`` is the symbol of the central difference, so the
    fit isolates the second-order coefficient.  Frequencies ``m`` are taken
    from ``band`` (fractions of the node count); ``m = 0`` is excluded.  The
    prediction ``-g^{OmegaOmega}/g^{rhorho}`` follows from the anticommutator
    relation; only magnitudes are compared.
    """
    if closure.d != 3:
        raise ValueError("a_squared_certificate is implemented for the circle (d = 3)")
    n, f = len(op.nodes), op.f
    h = 2 * math.pi / n
    ms = np.arange(max(1, int(band[0] * n)), max(2, int(band[1] * n)) + 1)
    A2 = op.A @ op.A
    vals = []
    for m in ms:
        wave = np.exp(1j * m * op.nodes)
        acc = 0.0
        for c in range(f):
            chi = np.zeros(f)
            chi[c] = 1.0
            u = np.kron(wave, chi)
            acc += (op.product(u, A2 @ u) / op.product(u, u)).real
        vals.append(acc / f)
    vals = np.array(vals)
    kap2 = (np.sin(ms * h) / h) ** 2
    coeffs = np.polyfit(kap2, vals, 2) if len(ms) > 3 else np.polyfit(kap2, vals, 1)
    # leading coefficient of kappa^2: derivative of the fit at the band centre
    poly = np.poly1d(coeffs)
    fitted = float(poly.deriv()(np.mean(kap2)))
    x = np.zeros(3)
    x[1] = r0
    s = closure.sample(x)
    drho, doms = gaussian_covectors(s, (op.coord,), side)
    gi = _gaussian_inverse(s, [drho] + doms)
    predicted = float(-gi[1, 1] / gi[0, 0])
    return ASquaredReport(frequencies=ms, kappa_sq=kap2, rayleigh=vals, fitted=fitted,
                          predicted=predicted)


# --------------------------------------------------------------------------
# Garding and ellipticity


def _sobolev_matrix(H: DiscreteHamiltonian) -> np.ndarray:
    """Reduced matrix of ``||psi||^2 + sum w h^{ab} (d_a psi, d_b psi)``.

    Gradients are central differences on interior stencil rows; the
    one-sided closure rows at non-periodic ends are left out.
    """
    grid, f = H.grid, H.f
    nd = H.nodes
    coords = [ax.coord for ax in grid.axes]
    grads = []
    for a, ax in enumerate(grid.axes):
        D, _ = sbp_first_derivative(ax.n, ax.h, grid.order, ax.periodic)
        if not ax.periodic:
            # closure rows see the sawtooth doubler at O(1/h); keep interior rows only
            c = 1 if grid.order == 2 else 4
            keep = np.zeros(ax.n)
            keep[c:ax.n - c] = 1.0
            D = sp.diags(keep) @ D
        mats = [sp.identity(o.n, format="csr") for o in grid.axes]
        mats[a] = D
        full = mats[0]
        for mat in mats[1:]:
            full = sp.kron(full, mat, format="csr")
        grads.append(sp.kron(full, sp.identity(f), format="csr"))
    if grid.mode_coord is not None:
        coords.append(grid.mode_coord)
        grads.append(1j * grid.k * sp.identity(grid.n_nodes * f, format="csr"))
    w_node = H.w_full[::f]
    hinv = np.array([np.linalg.inv(s.slice_metric) for s in nd.samples])
    E = H.E
    dE = [(g @ E).toarray() for g in grads]
    N = (E.conj().T @ sp.diags(H.w_full) @ E).toarray()
    for a, ca in enumerate(coords):
        for b, cb in enumerate(coords):
            wab = np.repeat(w_node * hinv[:, ca - 1, cb - 1], f)
            N += dE[a].conj().T @ (wab[:, None] * dE[b])
    return 0.5 * (N + N.conj().T)


def garding_estimate(H: DiscreteHamiltonian, trials: int | None = None, seed: int = 0) -> float:
    """``C = sup ||psi||^2_{W12} / (||H psi||_w^2 + ||psi||_w^2)`` over the reduced space.

    With ``trials=None`` the supremum is the top eigenvalue of the generalised
    Hermitian problem; otherwise it is the maximum over ``trials`` random
    vectors (a lower bound).
    """
    N = _sobolev_matrix(H)
    Hd = H.H.toarray()
    W = np.diag(H.w)
    M = Hd.conj().T @ W @ Hd + W
    M = 0.5 * (M + M.conj().T)
    if trials is None:
        top = sla.eigh(N, M, eigvals_only=True, subset_by_index=[N.shape[0] - 1, N.shape[0] - 1])
        return float(top[0])
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(trials):
        v = rng.normal(size=N.shape[0]) + 1j * rng.normal(size=N.shape[0])
        best = max(best, float(np.real(np.vdot(v, N @ v) / np.vdot(v, M @ v))))
    return best


@dataclass(frozen=True)
class EllipticityReport:
    delta: float
    identity_residual: float


def ellipticity_certificate(closure: MetricClosure, points, rep: CliffordRep | None = None,
                            trials: int = 64, seed: int = 0) -> EllipticityReport:
    """Check ``||xi (gamma^t)^{-1} gamma psi||_x^2 = -g(xi, xi) ||(gamma^t)^{-1} psi||_x^2``.

    ``||psi||_x^2 = <psi | gamma^t K-slash gamma^t psi>``.  ``delta`` is the
    smallest value of ``-g^{ab} xi_a xi_b`` over the points and over
    slice-unit spatial covectors.
    """
    rep = rep if rep is not None else flat_clifford_rep(closure.d)
    rng = np.random.default_rng(seed)
    f, d = rep.f, closure.d
    delta = math.inf
    worst = 0.0
    for x in np.atleast_2d(points):
        s = closure.sample(x)
        if not s.g[0, 0] > 0:
            raise SignatureError(f"<K,K> <= 0 at {x}")
        vb = build_vielbein(s)
        gam = curved_gammas(rep, vb)
        ks = killing_slash(rep, vb, s)
        gt_inv = np.linalg.inv(gam[0])
        normx = rep.S @ gam[0] @ ks @ gam[0]
        hinv = np.linalg.inv(s.slice_metric)
        lam = sla.eigh(-s.ginv[1:, 1:], hinv, eigvals_only=True)
        delta = min(delta, float(lam[0]))
        for _ in range(trials // max(1, len(np.atleast_2d(points))) + 1):
            xi = rng.normal(size=d - 1)
            psi = rng.normal(size=f) + 1j * rng.normal(size=f)
            Y = gt_inv @ np.einsum("a,apq->pq", xi, gam[1:])
            lhs = np.vdot(Y @ psi, normx @ (Y @ psi)).real
            q = -(xi @ s.ginv[1:, 1:] @ xi)
            rhs = q * np.vdot(gt_inv @ psi, normx @ (gt_inv @ psi)).real
            worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))
    if delta <= 0:
        raise SpectralError(f"region not uniformly elliptic: delta = {delta:.3e}")
    return EllipticityReport(delta=delta, identity_residual=worst)

"""Dirac matrices, orthonormal frames, spin connection and spin products.

Basis conventions (see ``docs/conventions.md``):

* ``d = 3``: ``f = 2``, ``gamma^(0) = sigma_3``, ``gamma^(1) = i sigma_1``,
  ``gamma^(2) = i sigma_2``.
* ``d = 4``: ``f = 4``, chiral set ``gamma^(0) = [[0, 1], [1, 0]]``,
  ``gamma^(k) = [[0, sigma_k], [-sigma_k, 0]]``.

The spin product is ``<phi|psi> = phi^dagger S psi`` with ``S = gamma^(0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import GeometryError, MetricClosure, MetricSample, christoffels_from_sample

__all__ = [
    "CliffordRep",
    "Vielbein",
    "SpinConnection",
    "flat_clifford_rep",
    "build_vielbein",
    "curved_gammas",
    "spin_connection",
    "clifford_compatibility_residual",
    "spin_product",
    "slice_norm",
    "boundary_norm",
    "slash",
]

_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SZ = np.array([[1, 0], [0, -1]], dtype=complex)
_I2 = np.eye(2, dtype=complex)
_Z2 = np.zeros((2, 2), dtype=complex)


class SignatureError(ValueError):
    """A product that should be positive is evaluated where it is indefinite."""


@dataclass(frozen=True)
class CliffordRep:
    d: int
    gammas: tuple
    S: np.ndarray

    @property
    def f(self) -> int:
        return self.S.shape[0]

    @property
    def eta(self) -> np.ndarray:
        return np.diag([1.0] + [-1.0] * (self.d - 1))


def flat_clifford_rep(d: int) -> CliffordRep:
    if d == 3:
        gammas = (_SZ.copy(), 1j * _SX, 1j * _SY)
    elif d == 4:
        g0 = np.block([[_Z2, _I2], [_I2, _Z2]])
        gammas = (g0,) + tuple(np.block([[_Z2, s], [-s, _Z2]]) for s in (_SX, _SY, _SZ))
    else:
        raise ValueError(f"unsupported spacetime dimension d={d} (supported: 3, 4)")
    for g in gammas:
        g.setflags(write=False)
    return CliffordRep(d=d, gammas=gammas, S=gammas[0])


@dataclass(frozen=True)
class Vielbein:
    """Orthonormal frame; ``frame[a]`` holds the coordinate components of ``e_a``."""

    frame: np.ndarray
    coframe: np.ndarray

    @property
    def normal(self) -> np.ndarray:
        return self.frame[0]


def build_vielbein(sample: MetricSample) -> Vielbein:
    """Gram-Schmidt frame with ``e_0`` the future unit normal of the constant-t slice.

    The spatial legs follow the coordinate order ``r, theta, phi`` and each
    ``e_a`` has positive ``a``-th coordinate component.
    """
    g, ginv = sample.g, sample.ginv
    d = g.shape[0]
    gtt = ginv[0, 0]
    if not gtt > 0:
        raise GeometryError(f"g^tt = {gtt} <= 0: constant-t slice is not spacelike")
    gn = sample.slice_metric
    if np.min(np.linalg.eigvalsh(gn)) <= 0:
        raise GeometryError("slice metric is singular or indefinite")
    eta = np.diag([1.0] + [-1.0] * (d - 1))
    frame = np.zeros((d, d))
    frame[0] = ginv[0] / math.sqrt(gtt)
    for a in range(1, d):
        v = np.zeros(d)
        v[a] = 1.0
        for b in range(a):
            v = v - eta[b, b] * (frame[b] @ g @ v) * frame[b]
        nrm = v @ g @ v
        if not nrm < 0:
            raise GeometryError("degenerate spatial block in Gram-Schmidt")
        v = v / math.sqrt(-nrm)
        if v[a] < 0:
            v = -v
        frame[a] = v
    coframe = eta @ frame @ g
    return Vielbein(frame=frame, coframe=coframe)


def curved_gammas(rep: CliffordRep, vb: Vielbein) -> np.ndarray:
    """``gamma^j = e_a^j gamma^(a)``, stacked along the first axis."""
    flat = np.array(rep.gammas)
    return np.einsum("aj,apq->jpq", vb.frame, flat)


def slash(rep: CliffordRep, vb: Vielbein, covector) -> np.ndarray:
    """Clifford multiplication by a covector, ``v_j gamma^j``."""
    return np.einsum("j,jpq->pq", np.asarray(covector), curved_gammas(rep, vb))


@dataclass(frozen=True)
class SpinConnection:
    omega: np.ndarray
    sigma: np.ndarray
    dframe: np.ndarray


def _frame_derivatives(closure: MetricClosure, p, h_frame: float) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    d = closure.d
    dframe = np.zeros((d, d, d))
    for j in range(1, d):
        if j in closure.periodic:
            continue
        h = h_frame * max(1.0, abs(p[j])) if j == 1 else h_frame
        xp, xm = p.copy(), p.copy()
        xp[j] += h
        xm[j] -= h
        try:
            ep = build_vielbein(closure.sample(xp)).frame
            em = build_vielbein(closure.sample(xm)).frame
        except GeometryError as exc:
            raise GeometryError(f"frame differentiation failed near {p}: {exc}") from exc
        dframe[j] = (ep - em) / (2.0 * h)
    return dframe


def spin_connection(closure: MetricClosure, p, rep: CliffordRep | None = None,
                    h_frame: float = 1e-5) -> SpinConnection:
    """Connection coefficients ``omega_{jab}`` and spinor matrices ``sigma_j``.

    ``omega_{jab} = e_{a k} (d_j e_b^k + Gamma^k_{jl} e_b^l)`` and
    ``sigma_j = 1/4 omega_{jab} gamma^(a) gamma^(b)``, so that
    ``nabla_j psi = d_j psi + sigma_j psi``.  Frame derivatives are centred
    differences with step ``h_frame``; ``t`` and the Killing angles carry none.
    """
    rep = rep if rep is not None else flat_clifford_rep(closure.d)
    s = closure.sample(p)
    vb = build_vielbein(s)
    gam = christoffels_from_sample(s)
    dframe = _frame_derivatives(closure, p, h_frame)
    # nabla_j e_b = d_j e_b^k + Gamma^k_{jl} e_b^l
    cov = np.einsum("jbk->jbk", dframe) + np.einsum("kjl,bl->jbk", gam, vb.frame)
    lowered = vb.frame @ s.g  # e_{a k}
    omega = np.einsum("ak,jbk->jab", lowered, cov)
    omega = 0.5 * (omega - omega.transpose(0, 2, 1))
    flat = np.array(rep.gammas)
    sigma = 0.25 * np.einsum("jab,apq,bqr->jpr", omega, flat, flat)
    return SpinConnection(omega=omega, sigma=sigma, dframe=dframe)


def clifford_compatibility_residual(closure: MetricClosure, p, rep: CliffordRep | None = None,
                                    h_frame: float = 1e-5) -> float:
    """``max |d_j gamma^k + Gamma^k_{jl} gamma^l + [sigma_j, gamma^k]|``."""
    rep = rep if rep is not None else flat_clifford_rep(closure.d)
    s = closure.sample(p)
    vb = build_vielbein(s)
    sc = spin_connection(closure, p, rep, h_frame)
    gam = christoffels_from_sample(s)
    flat = np.array(rep.gammas)
    gk = curved_gammas(rep, vb)
    dg = np.einsum("jak,apq->jkpq", sc.dframe, flat)
    conn = np.einsum("kjl,lpq->jkpq", gam, gk)
    comm = (np.einsum("jpr,krq->jkpq", sc.sigma, gk) - np.einsum("kpr,jrq->jkpq", gk, sc.sigma))
    return float(np.max(np.abs(dg + conn + comm)))


def spin_product(rep: CliffordRep, phi, psi) -> complex:
    """Indefinite spin product ``phi^dagger S psi``."""
    return complex(np.vdot(phi, rep.S @ np.asarray(psi)))


def slice_norm(rep: CliffordRep, vb: Vielbein, psi) -> float:
    """``<psi | nu-slash psi>``, positive definite."""
    nu_slash = slash(rep, vb, vb.coframe[0])
    return float(np.real(np.vdot(psi, rep.S @ nu_slash @ np.asarray(psi))))


def boundary_norm(rep: CliffordRep, sample: MetricSample, psi) -> float:
    """``<psi | K-slash psi>`` for ``K = d_t``; requires ``K`` timelike."""
    kk = sample.g[0, 0]
    if not kk > 0:
        raise SignatureError(f"<K,K> = {kk} <= 0: boundary product is not positive")
    k_slash = killing_slash(rep, build_vielbein(sample), sample)
    return float(np.real(np.vdot(psi, rep.S @ k_slash @ np.asarray(psi))))


def killing_slash(rep: CliffordRep, vb: Vielbein, sample: MetricSample) -> np.ndarray:
    """``K-slash = g_{tj} gamma^j = gamma_t``."""
    return slash(rep, vb, sample.g[0])

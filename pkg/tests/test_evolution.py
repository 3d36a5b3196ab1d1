import math

import numpy as np
import pytest

from dirac_bvp.evolution import (CrankNicolson, CutoffEta, EvolutionConfig, EvolutionConfigError,
                                 InstabilityError, SplitSolver, WindowViolation, epsilon_from_lightcones,
                                 evolve_cauchy, export_trace, reference_evolve, split_initial,
                                 support_and_speed_check)
from dirac_bvp.geometry import flat_polar
from dirac_bvp.hamiltonian import make_bump_data, radial_grid


def test_cutoff_shape():
    eta = CutoffEta(1.0)
    s = np.linspace(0, 1, 401)
    v = eta(s)
    assert np.all(v[s <= 0.125] == 1.0)
    assert np.all(v[s >= 0.25] == 0.0)
    assert np.all(np.diff(v) <= 0)


def test_split_is_exact(rng):
    psi = rng.normal(size=200) + 1j * rng.normal(size=200)
    eta = CutoffEta(1.0)(np.linspace(0, 0.5, 100))
    b, i = split_initial(psi, eta)
    assert np.array_equal(b + i, psi)


def _solver(n=129, **kw):
    closure = flat_polar()
    h = 1.0 / (n - 1)
    opts = dict(T_final=0.25, dt=h / 2, r_max=1.0)
    opts.update(kw)
    return SplitSolver.build(closure, radial_grid(closure, 1.0, 2.0, n, k=1), EvolutionConfig(**opts), m=0.5)


def _bump(solver):
    return make_bump_data(solver.grid, [1.3], [0.15], [1.0, 0.5j])


def test_window_length():
    s = _solver(65, window_tol=1.0)
    assert epsilon_from_lightcones(s.closure, s.grid, 1.0) == pytest.approx(1 / 8)
    assert s.eps == pytest.approx(1 / 16)


def test_cfl_violation_rejected():
    with pytest.raises(EvolutionConfigError):
        _solver(65, dt=0.1)


def test_r_mid_must_be_a_node():
    with pytest.raises(EvolutionConfigError):
        _solver(64, dt=0.005)


def test_split_matches_reference_and_conserves_norm():
    s = _solver(513)
    psi0 = _bump(s)
    tr = evolve_cauchy(s, psi0)
    rf = reference_evolve(s, psi0)
    assert s.reference.full_norm(tr.snapshots[-1] - rf.snapshots[-1]) < 1e-12
    assert abs(tr.w_norm[-1] - tr.w_norm[0]) < 1e-12
    assert max(tr.boundary_residual) < 1e-12


def test_forward_backward_returns_initial_data():
    s = _solver(257, window_tol=1e-6)
    psi0 = _bump(s)
    fwd = evolve_cauchy(s, psi0, 0.25)
    back = evolve_cauchy(s, fwd.snapshots[-1], -0.25)
    assert s.reference.full_norm(back.snapshots[-1] - psi0) / s.reference.full_norm(psi0) < 1e-10


def test_coarse_grid_reports_window_violation():
    s = _solver(65)
    with pytest.raises(WindowViolation) as info:
        evolve_cauchy(s, _bump(s))
    assert info.value.where in ("inner", "Y")
    assert info.value.amplitude > 1e-10


def test_norm_contract():
    s = _solver(257, series_phases="exact", norm_tol=1e-14, window_tol=1e-6)
    with pytest.raises(InstabilityError):
        evolve_cauchy(s, _bump(s))


def test_boundary_violating_data_rejected():
    s = _solver(65, window_tol=1.0)
    psi = np.zeros(s.grid.n_nodes * 2, dtype=complex)
    psi[0] = 1.0
    with pytest.raises(ValueError):
        evolve_cauchy(s, psi)


def test_crank_nicolson_is_unitary(rng):
    s = _solver(65, window_tol=1.0)
    H = s.reference
    cn = CrankNicolson(H.H, 0.01)
    c = rng.normal(size=H.dim) + 0j
    n0 = H.norm(c)
    for _ in range(200):
        c = cn.step(c)
    assert H.norm(c) == pytest.approx(n0, rel=1e-13)


def test_trace_export_and_speed_report(tmp_path):
    s = _solver(257, window_tol=1e-6)
    tr = evolve_cauchy(s, _bump(s))
    path = tmp_path / "trace.csv"
    export_trace(tr, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,w_norm,boundary_residual,support_radius,gluing_discrepancy"
    assert len(lines) == len(tr.times) + 1
    rep = support_and_speed_check(tr, s.v_max, s.grid.radial.h)
    assert rep.growth.shape == rep.allowed.shape == (len(tr.times) - 1,)
    assert np.all(np.asarray(tr.support_radius) > 0)

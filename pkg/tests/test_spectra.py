import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rabistark.errors import ParameterError, SolverConvergenceError
from rabistark.model import FockTruncation, ModelParams, build_hamiltonian
from rabistark.oracle import solve_low_spectrum
from rabistark.spectra import (
    ConvergencePolicy,
    converge_truncation,
    energy_gap,
    ground_energy_derivatives,
    lowest_eigenpairs,
    solve_model,
    stencil_derivatives,
)


def rsm(g, u=1.0, delta=0.5):
    return ModelParams("RSM", delta, stark_u=u, coupling_g=g)


def test_qrm_decoupled_lowest_pairs():
    sol = lowest_eigenpairs(build_hamiltonian(ModelParams("QRM", 0.5), FockTruncation(10)), k=2)
    assert sol.eigenvalues[0] == pytest.approx(-0.25, abs=1e-14)
    # next level: |0,up> at +0.25, below |1,down> at 0.75
    assert sol.eigenvalues[1] == pytest.approx(0.25, abs=1e-14)


def test_sparse_path_against_dense_oracle():
    h = build_hamiltonian(rsm(0.3, u=0.7), FockTruncation(400))
    sol = lowest_eigenpairs(h, k=4, seed=3)
    dense = np.linalg.eigvalsh(h.to_dense())[:4]
    assert np.max(np.abs(sol.eigenvalues - dense)) < 1e-10
    norms = np.linalg.norm(sol.eigenvectors, axis=0)
    assert np.allclose(norms, 1.0, atol=1e-12)


def test_sparse_path_deterministic_given_seed():
    h = build_hamiltonian(rsm(0.2, u=0.5), FockTruncation(300))
    a = lowest_eigenpairs(h, k=2, seed=7)
    b = lowest_eigenpairs(h, k=2, seed=7)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert np.array_equal(a.eigenvectors, b.eigenvectors)


def test_sparse_nonconvergence_is_reported():
    h = build_hamiltonian(rsm(0.3, u=0.7), FockTruncation(400))
    with pytest.raises(SolverConvergenceError):
        lowest_eigenpairs(h, k=3, maxiter=1, tol=1e-14)


@settings(max_examples=40, deadline=None)
@given(
    kind=st.sampled_from(["RSM", "QRM"]),
    delta=st.floats(-1.5, 1.5),
    u=st.floats(-1.0, 1.0),
    g=st.floats(0, 1.5),
    n_tr=st.integers(1, 31),
)
def test_full_spectrum_matches_dense(kind, delta, u, g, n_tr):
    params = ModelParams(kind, delta, stark_u=u, coupling_g=g)
    trunc = FockTruncation(n_tr)
    dense = np.linalg.eigvalsh(build_hamiltonian(params, trunc).to_dense())
    sol = lowest_eigenpairs(build_hamiltonian(params, trunc), k=trunc.dim)
    assert np.max(np.abs(sol.eigenvalues - dense)) < 1e-10
    fast = solve_model(params, trunc, k=trunc.dim)
    assert np.max(np.abs(fast.eigenvalues - dense)) < 1e-10


@settings(max_examples=30, deadline=None)
@given(delta=st.floats(-1, 1), u=st.floats(-1, 1), g=st.floats(0.01, 1.2), n_tr=st.integers(2, 60))
def test_chain_solver_eigenvectors(delta, u, g, n_tr):
    params = ModelParams("RSM", delta, stark_u=u, coupling_g=g)
    trunc = FockTruncation(n_tr)
    sol = solve_model(params, trunc, k=3)
    h = build_hamiltonian(params, trunc)
    for i in range(3):
        v = sol.eigenvectors[:, i]
        assert np.linalg.norm(h.matvec(v) - sol.eigenvalues[i] * v) < 1e-9
        assert abs(np.linalg.norm(v) - 1) < 1e-12
        # gauge: largest component positive
        assert v[np.argmax(np.abs(v))] > 0
    assert np.all(np.diff(sol.eigenvalues) >= 0)


def test_ground_energy_matches_oracle_value():
    sol = solve_model(rsm(0.3), FockTruncation(512), k=2)
    # roots of the implicit level condition at delta=0.5, g=0.3
    assert sol.eigenvalues[0] == pytest.approx(-0.4481, abs=5e-5)
    assert sol.eigenvalues[0] == pytest.approx(solve_low_spectrum(0.5, 0.3, 0), abs=1e-10)
    assert sol.eigenvalues[1] == pytest.approx(solve_low_spectrum(0.5, 0.3, 1), abs=1e-10)


def test_gap_values():
    assert energy_gap(rsm(0.0), FockTruncation(16)) == 0.0
    gap = energy_gap(rsm(0.3), FockTruncation(512))
    assert gap == pytest.approx(0.0161, abs=1e-4)


@pytest.mark.parametrize("n_tr", [8, 32, 128])
def test_ground_energy_non_increasing_in_truncation(n_tr):
    p = rsm(0.45, u=0.9)
    e1 = solve_model(p, FockTruncation(n_tr), k=1).ground_energy
    e2 = solve_model(p, FockTruncation(n_tr + 7), k=1).ground_energy
    assert e2 <= e1 + 1e-13


def test_ground_state_parity_definite():
    sol = solve_model(rsm(0.3), FockTruncation(256), k=2)
    assert abs(sol.parities[0]) == 1
    assert sol.parities[0] != sol.parities[1]


def test_stencil_exact_on_polynomials():
    g = np.linspace(0.1, 0.5, 41)
    const = stencil_derivatives(g, np.full_like(g, 3.2))
    assert np.nanmax(np.abs(const.d1)) == 0 and np.nanmax(np.abs(const.d2)) == 0
    quad = stencil_derivatives(g, g ** 2)
    assert np.nanmax(np.abs(quad.d2 - 2)) < 1e-8
    assert np.isnan(quad.d2[:2]).all() and np.isnan(quad.d2[-2:]).all()
    assert np.isnan(quad.d1[0]) and np.isnan(quad.d1[-1])
    assert np.nanmax(np.abs(quad.d1[1:-1] - 2 * g[1:-1])) < 1e-12


def test_stencil_rejects_nonuniform():
    with pytest.raises(ParameterError):
        stencil_derivatives([0, 0.1, 0.3, 0.4, 0.5], np.zeros(5))


def test_ground_energy_derivatives_small():
    g = np.linspace(0.2, 0.3, 11)
    curve = ground_energy_derivatives(rsm(0.0), g, ConvergencePolicy(rel_tol=1e-12, n_tr_start=32))
    expected = [solve_low_spectrum(0.5, x, 0) for x in g]
    assert np.allclose(curve.e0, expected, atol=1e-12)
    assert np.all(curve.d2[2:-2] < 0)


def test_converge_truncation_small_coupling():
    conv = converge_truncation(rsm(0.1), "ground_energy")
    assert conv.n_tr <= 128
    assert abs(conv.value - solve_low_spectrum(0.5, 0.1, 0)) <= 1e-6 * abs(conv.value)


def test_converge_truncation_decoupled_stops_at_start():
    policy = ConvergencePolicy()
    conv = converge_truncation(ModelParams("QRM", 0.5), "ground_energy", policy)
    assert conv.value == -0.25
    # one rung to compare against
    assert conv.n_tr == next(policy.ladder()) * 2


def test_converge_truncation_near_critical_needs_large_truncation():
    g = 0.999 * 0.5
    conv = converge_truncation(rsm(g), "mean_photon")
    assert conv.n_tr >= 1000
    values = [v for _, v in conv.history]
    assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))


def test_converge_truncation_reports_cap():
    policy = ConvergencePolicy(n_tr_start=16, n_tr_cap=64)
    with pytest.raises(SolverConvergenceError) as info:
        converge_truncation(rsm(0.499), "mean_photon", policy)
    assert len(info.value.best) == 2


def test_policy_validation():
    for kw in (dict(growth_factor=1.0), dict(n_tr_start=1), dict(rel_tol=0), dict(n_tr_cap=8)):
        with pytest.raises(ParameterError):
            ConvergencePolicy(**kw)
    assert list(ConvergencePolicy(n_tr_start=64, n_tr_cap=300).ladder()) == [64, 128, 256, 300]

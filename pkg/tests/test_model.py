import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rabistark.errors import ParameterError
from rabistark.model import (
    Branch,
    FockTruncation,
    ModelParams,
    SparseOperator,
    build_coupling_operator,
    build_hamiltonian,
    build_parity_operator,
    critical_coupling,
    critical_point,
    effective_size,
    parity_chains,
    stark_u_for_size,
)


def rsm(delta=0.5, u=1.0, g=0.0):
    return ModelParams("RSM", delta, stark_u=u, coupling_g=g)


def test_diagonal_element_up_state():
    h = build_hamiltonian(rsm(g=0.37), FockTruncation(6))
    # <3,up|H|3,up> = delta/2 + U*3 + omega*3
    assert h.element(6, 6) == pytest.approx(6.25, abs=1e-15)


@pytest.mark.parametrize("kind", ["RSM", "QRM"])
def test_coupling_element(kind):
    h = build_hamiltonian(ModelParams(kind, 0.5, stark_u=0.3, coupling_g=0.4), FockTruncation(4))
    # <0,down|H|1,up>
    assert h.element(1, 2) == pytest.approx(0.4, abs=1e-15)
    assert h.element(2, 1) == pytest.approx(0.4, abs=1e-15)
    # <2,up|H|3,down> = g sqrt(3)
    assert h.element(4, 7) == pytest.approx(0.4 * math.sqrt(3), abs=1e-15)
    assert h.element(0, 2) == 0.0


def test_qrm_decoupled_ground_energy():
    h = build_hamiltonian(ModelParams("QRM", 0.5), FockTruncation(8))
    assert np.linalg.eigvalsh(h.to_dense())[0] == pytest.approx(-0.25, abs=1e-14)


def test_rsm_decoupled_degenerate_ground():
    n_tr = 7
    w = np.linalg.eigvalsh(build_hamiltonian(rsm(), FockTruncation(n_tr)).to_dense())
    assert np.allclose(w[: n_tr + 1], -0.25, atol=1e-14)
    assert w[n_tr + 1] > -0.25 + 0.1


def test_parity_operator_entries():
    p = build_parity_operator(FockTruncation(3))
    assert p.element(0, 0) == 1.0  # |0,up>
    assert p.element(2, 2) == -1.0  # |1,up>
    assert p.element(1, 1) == -1.0  # |0,down>
    assert p.element(3, 3) == 1.0  # |1,down>


params_strategy = st.builds(
    ModelParams,
    kind=st.sampled_from(["RSM", "QRM"]),
    delta=st.floats(-2, 2),
    omega=st.floats(0.2, 3),
    stark_u=st.floats(-1.5, 1.5),
    coupling_g=st.floats(0, 3),
)


@settings(max_examples=60, deadline=None)
@given(params=params_strategy, n_tr=st.integers(1, 40))
def test_hamiltonian_symmetric_and_parity_conserving(params, n_tr):
    trunc = FockTruncation(n_tr)
    h = build_hamiltonian(params, trunc).to_dense()
    p = build_parity_operator(trunc).to_dense()
    assert np.array_equal(h, h.T)
    assert np.array_equal(h @ p, p @ h)
    assert build_hamiltonian(params, trunc).is_symmetric()


@settings(max_examples=40, deadline=None)
@given(delta=st.floats(-2, 2), omega=st.floats(0.2, 3), g=st.floats(0, 3), n_tr=st.integers(1, 30))
def test_rsm_at_zero_stark_equals_qrm(delta, omega, g, n_tr):
    trunc = FockTruncation(n_tr)
    a = build_hamiltonian(ModelParams("RSM", delta, omega, 0.0, g), trunc).to_dense()
    b = build_hamiltonian(ModelParams("QRM", delta, omega, 0.7, g), trunc).to_dense()
    assert np.array_equal(a, b)


@settings(max_examples=40, deadline=None)
@given(params=params_strategy, n_tr=st.integers(1, 30))
def test_parity_chains_reassemble_hamiltonian(params, n_tr):
    trunc = FockTruncation(n_tr)
    full = build_hamiltonian(params, trunc).to_dense()
    rebuilt = np.zeros_like(full)
    for chain in parity_chains(params, trunc):
        block = np.diag(chain.diag) + np.diag(chain.offdiag, 1) + np.diag(chain.offdiag, -1)
        rebuilt[np.ix_(chain.index, chain.index)] = block
    assert np.allclose(full, rebuilt, atol=0, rtol=0)


def test_coupling_operator_is_derivative():
    trunc = FockTruncation(5)
    h1 = build_hamiltonian(rsm(g=0.3), trunc).to_dense()
    h0 = build_hamiltonian(rsm(g=0.0), trunc).to_dense()
    assert np.allclose((h1 - h0) / 0.3, build_coupling_operator(trunc).to_dense(), atol=1e-14)


def test_critical_points():
    assert critical_point(rsm(u=1.0)).g_c == pytest.approx(0.5)
    cd = critical_point(rsm(u=1.0, g=0.5))
    assert cd.e_c == pytest.approx(-0.75)
    assert cd.branch is Branch.PLUS
    minus = critical_point(rsm(u=-1.0, g=0.5))
    assert minus.g_c == pytest.approx(math.sqrt(0.75))
    assert minus.e_c == pytest.approx(0.25 - 0.5)
    assert critical_point(ModelParams("QRM", 1e8)).g_c == pytest.approx(5000.0)


def test_critical_point_errors():
    with pytest.raises(ParameterError):
        critical_coupling(1.0, Branch.PLUS)
    with pytest.raises(ParameterError):
        critical_point(rsm(u=0.5))


def test_effective_size():
    assert effective_size(rsm(u=0.99)) == pytest.approx(100)
    assert effective_size(rsm(u=-0.9)) == pytest.approx(10)
    assert effective_size(ModelParams("QRM", 1e8)) == 1e8
    with pytest.raises(ParameterError):
        effective_size(rsm(u=1.0))
    assert stark_u_for_size(1000, "minus") == pytest.approx(-0.999)


@pytest.mark.parametrize(
    "kwargs",
    [dict(delta=math.nan), dict(delta=0.5, omega=0.0), dict(delta=0.5, coupling_g=-0.1), dict(delta=math.inf)],
)
def test_params_validation(kwargs):
    with pytest.raises(ParameterError):
        ModelParams("RSM", **kwargs)


def test_truncation_validation():
    assert FockTruncation(3).dim == 8
    for bad in (0, -1, 2.5, True):
        with pytest.raises(ParameterError):
            FockTruncation(bad)


def test_sparse_operator_bounds():
    with pytest.raises(ParameterError):
        SparseOperator(2, [0, 2], [0, 0], [1.0, 1.0])


def test_params_roundtrip():
    p = rsm(g=0.3)
    assert ModelParams.from_dict(p.to_dict()) == p

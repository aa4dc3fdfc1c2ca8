"""Ground-state observables built from eigenpairs."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGroundStateError, IncompleteSumError, ParameterError
from .model import FockTruncation, ModelParams, SparseOperator, reference_coupling
from .spectra import EigenSolution, OBSERVABLE_IDS, solve_model

__all__ = [
    "ObservableRecord",
    "ChiMethod",
    "DEGENERACY_THRESHOLD",
    "mean_photon_number",
    "order_parameter",
    "position_moments",
    "position_variance",
    "parity_expectation",
    "ground_state",
    "fidelity",
    "fidelity_susceptibility",
    "evaluate",
]

log = logging.getLogger(__name__)

DEGENERACY_THRESHOLD = 1e-10
DEFAULT_REL_STEP = 1e-5
DEFAULT_K_STATES = 64


class ChiMethod(str, enum.Enum):
    FINITE_DIFFERENCE = "finite_difference"
    EIGENSTATE_SUM = "eigenstate_sum"
    DERIVATIVE_FORM = "derivative_form"


@dataclass(frozen=True)
class ObservableRecord:
    params: ModelParams
    n_tr: int
    name: str
    value: float
    converged: bool = True
    residual: float = 0.0


def _photon_index(trunc: FockTruncation, size: int) -> np.ndarray:
    if size != trunc.dim:
        raise ParameterError(f"state has length {size}, expected {trunc.dim}")
    return np.arange(size) // 2


def mean_photon_number(state: np.ndarray, trunc: FockTruncation) -> float:
    state = np.asarray(state)
    n = _photon_index(trunc, state.size)
    return float(np.sum(n * np.abs(state) ** 2))


def order_parameter(nbar: float) -> float:
    """Inverse photon number; +inf for the vacuum."""
    return math.inf if nbar <= 0 else 1.0 / nbar


def _apply_quadrature(state: np.ndarray, trunc: FockTruncation) -> np.ndarray:
    """(a^dag + a) on each spin component; the result lives on n = 0..n_tr+1."""
    psi = np.asarray(state).reshape(trunc.n_tr + 1, 2)
    amp = np.sqrt(np.arange(1, trunc.n_tr + 2, dtype=float))[:, None]
    out = np.zeros((trunc.n_tr + 2, 2), dtype=psi.dtype)
    out[1:] += amp * psi  # a^dag
    out[:-2] += amp[:-1] * psi[1:]  # a
    return out


def position_moments(state: np.ndarray, trunc: FockTruncation):
    """Return ``(<x>, var_x, clamped)`` with x = (a^dag + a)/sqrt(2).

    The untruncated ladder operators are used, so a component at n_tr still
    contributes its full n_tr + 1 to <x^2>.  A negative variance within
    1e-12 from roundoff is clamped to zero and flagged.
    """
    _photon_index(trunc, np.asarray(state).size)
    psi = np.asarray(state).reshape(trunc.n_tr + 1, 2)
    xpsi = _apply_quadrature(state, trunc) / math.sqrt(2.0)
    mean_x = float(np.real(np.vdot(psi, xpsi[: trunc.n_tr + 1])))
    x2 = float(np.real(np.vdot(xpsi, xpsi)))
    var = x2 - mean_x ** 2
    clamped = False
    if var < 0:
        if var < -1e-12 * max(1.0, x2):
            raise ParameterError(f"negative position variance {var:.3e}")
        var, clamped = 0.0, True
        log.warning("position variance clamped to zero (roundoff)")
    return mean_x, var, clamped


def position_variance(state: np.ndarray, trunc: FockTruncation) -> float:
    """Quadrature spread Delta x = sqrt(<x^2> - <x>^2)."""
    return math.sqrt(position_moments(state, trunc)[1])


def parity_expectation(state: np.ndarray, parity: SparseOperator) -> float:
    state = np.asarray(state)
    return float(np.real(np.vdot(state, parity.matvec(state))))


def _check_nondegenerate(sol: EigenSolution, where: str):
    if len(sol) > 1 and sol.eigenvalues[1] - sol.eigenvalues[0] < DEGENERACY_THRESHOLD:
        raise DegenerateGroundStateError(
            f"ground state degenerate at {where} (E1 - E0 = {sol.eigenvalues[1] - sol.eigenvalues[0]:.2e}); "
            "overlap is gauge-undefined"
        )


def ground_state(params: ModelParams, trunc: FockTruncation, check_degenerate: bool = True) -> EigenSolution:
    sol = solve_model(params, trunc, k=2)
    if check_degenerate:
        _check_nondegenerate(sol, f"g={params.coupling_g}")
    return sol


def _ground_in_sector(params, trunc, parity):
    sol = solve_model(params, trunc, k=1, parity=parity)
    return sol.ground_state


def _default_step(params: ModelParams, g: float) -> float:
    return DEFAULT_REL_STEP * max(reference_coupling(params), abs(g), 1e-300)


def fidelity(params: ModelParams, g: float, delta_g: float, trunc: FockTruncation) -> float:
    """|<psi0(g - dg/2) | psi0(g + dg/2)>|.

    Falls back to the one-sided pair (g, g + dg) when g - dg/2 would be a
    negative coupling.
    """
    if delta_g == 0:
        ground_state(params.with_coupling(g), trunc)
        return 1.0
    lo, hi = sorted((g - delta_g / 2, g + delta_g / 2))
    if lo < 0:
        lo, hi = g, g + abs(delta_g)
    a = ground_state(params.with_coupling(lo), trunc)
    b = ground_state(params.with_coupling(hi), trunc)
    overlap = abs(float(np.vdot(a.ground_state, b.ground_state)))
    return min(1.0, overlap)


def _chi_finite_difference(params, g, trunc, step):
    central = ground_state(params.with_coupling(g), trunc)
    parity = int(central.parities[0])
    symmetric = g - step >= 0

    def log_f(delta):
        if symmetric:
            a = _ground_in_sector(params.with_coupling(g - delta / 2), trunc, parity)
            b = _ground_in_sector(params.with_coupling(g + delta / 2), trunc, parity)
        else:
            a = central.ground_state
            b = _ground_in_sector(params.with_coupling(g + delta), trunc, parity)
        # for unit real vectors 1 - |<a|b>| = |a -/+ b|^2 / 2, which keeps the digits 1 - overlap loses
        sign = 1.0 if float(np.vdot(a, b)) >= 0 else -1.0
        one_minus = 0.5 * float(np.sum((sign * a - b) ** 2))
        if one_minus < 1e-28:
            raise ParameterError(f"delta_g={delta:.3e} is below the roundoff floor (1-F={one_minus:.1e})")
        return math.log1p(-one_minus)

    chi_h = -2.0 * log_f(step) / step ** 2
    chi_h2 = -2.0 * log_f(step / 2) / (step / 2) ** 2
    if symmetric:
        return (4.0 * chi_h2 - chi_h) / 3.0
    return 2.0 * chi_h2 - chi_h


def _aligned(vec, ref):
    return vec if float(np.vdot(ref, vec)) >= 0 else -vec


def _chi_derivative_form(params, g, trunc, step):
    central = ground_state(params.with_coupling(g), trunc)
    parity = int(central.parities[0])
    psi = central.ground_state

    def vec(x):
        return _aligned(_ground_in_sector(params.with_coupling(x), trunc, parity), psi)

    if g - step >= 0:
        def deriv(h):
            return (vec(g + h) - vec(g - h)) / (2 * h)
    else:
        def deriv(h):
            return (-3 * psi + 4 * vec(g + h) - vec(g + 2 * h)) / (2 * h)

    d = (4.0 * deriv(step / 2) - deriv(step)) / 3.0
    proj = float(np.vdot(psi, d))
    return float(np.vdot(d, d)) - proj * proj


def _chi_eigenstate_sum(params, g, trunc, k_states, rel_tol):
    central = ground_state(params.with_coupling(g), trunc)
    parity = int(central.parities[0])
    # H_I = dH/dg preserves parity, so only the ground state's sector contributes
    sol = solve_model(params.with_coupling(g), trunc, k=k_states + 1, parity=parity, embed=False)
    vecs = sol.eigenvectors
    psi0 = vecs[:, 0]
    amp = np.sqrt(np.arange(1, trunc.n_tr + 1, dtype=float))
    h_psi = np.zeros_like(psi0)
    h_psi[1:] += amp * psi0[:-1]
    h_psi[:-1] += amp * psi0[1:]
    elements = vecs.T @ h_psi
    gaps = sol.eigenvalues[1:] - sol.eigenvalues[0]
    if gaps.size and gaps[0] < DEGENERACY_THRESHOLD:
        raise DegenerateGroundStateError("ground state degenerate within its parity sector")
    terms = elements[1:] ** 2 / gaps ** 2
    total = float(terms.sum())
    if sol.eigenvalues.size < trunc.n_tr + 1:
        # sum rule: sum_n |<n|H_I|0>|^2 = <0|H_I^2|0>; missing weight can sit no lower than E_k
        missing = max(0.0, float(h_psi @ h_psi) - float(elements @ elements))
        bound = missing / gaps[-1] ** 2 if gaps.size else math.inf
        if bound > rel_tol * total:
            raise IncompleteSumError(
                f"eigenstate sum with k={k_states} may miss up to {bound:.3e} "
                f"({bound / total:.1e} relative); increase k_states",
                bound=bound,
            )
    return total


def fidelity_susceptibility(params: ModelParams, g: float | None = None,
                            method: ChiMethod | str = ChiMethod.DERIVATIVE_FORM,
                            trunc: FockTruncation | None = None, k_states: int = DEFAULT_K_STATES,
                            delta_g: float | None = None, sum_rel_tol: float = 1e-3) -> float:
    """Ground-state fidelity susceptibility with respect to g.

    ``finite_difference`` uses -2 ln F / dg^2 at dg and dg/2 with Richardson
    extrapolation.  ``eigenstate_sum`` sums |<n|H_I|0>|^2/(E_n-E_0)^2 over
    ``k_states`` excitations and fails if the sum-rule bound on the neglected
    tail exceeds ``sum_rel_tol``.  ``derivative_form`` differentiates the
    sign-aligned ground vector numerically (Richardson on central
    differences) and evaluates <d psi|d psi> - |<psi|d psi>|^2.
    """
    if trunc is None:
        raise ParameterError("a FockTruncation is required")
    g = params.coupling_g if g is None else float(g)
    if g < 0:
        raise ParameterError("coupling must be nonnegative")
    method = ChiMethod(method)
    step = delta_g if delta_g is not None else _default_step(params, g)
    if step <= 0:
        raise ParameterError("delta_g must be positive")
    if method is ChiMethod.FINITE_DIFFERENCE:
        chi = _chi_finite_difference(params, g, trunc, step)
    elif method is ChiMethod.DERIVATIVE_FORM:
        chi = _chi_derivative_form(params, g, trunc, step)
    else:
        chi = _chi_eigenstate_sum(params, g, trunc, k_states, sum_rel_tol)
    return max(0.0, chi)


def evaluate(params: ModelParams, n_tr: int, name: str,
             chi_method: ChiMethod | str = ChiMethod.DERIVATIVE_FORM, tol: float = 1e-9) -> ObservableRecord:
    """Evaluate one named observable at a fixed truncation.

    ``tol`` bounds the eigenpair residuals of the direct solve; the
    susceptibility methods use their own internal solves.
    """
    if name not in OBSERVABLE_IDS:
        raise ParameterError(f"unknown observable {name!r}; expected one of {OBSERVABLE_IDS}")
    trunc = FockTruncation(n_tr)
    if name == "fidelity_susceptibility":
        value = fidelity_susceptibility(params, method=chi_method, trunc=trunc)
        return ObservableRecord(params, n_tr, name, value)
    sol = solve_model(params, trunc, k=2, tol=tol)
    residual = float(sol.residuals.max())
    if name == "ground_energy":
        value = sol.ground_energy
    elif name == "gap":
        value = max(0.0, float(sol.eigenvalues[1] - sol.eigenvalues[0]))
    else:
        _check_nondegenerate(sol, f"g={params.coupling_g}")
        psi = sol.ground_state
        if name == "mean_photon":
            value = mean_photon_number(psi, trunc)
        elif name == "order_parameter":
            value = order_parameter(mean_photon_number(psi, trunc))
        elif name == "position_variance":
            value = position_variance(psi, trunc)
        else:
            value = float(sol.parities[0])
    return ObservableRecord(params, n_tr, name, float(value), True, residual)

"""Closed-form low-energy solution of the model at U = +omega (and its mirror at U = -omega).

At |U| = omega the spin-down (spin-up for U = -omega) projection decouples the
photon number from the Stark term and the bosonic part reduces to a squeezed
harmonic oscillator.  Energies here are in units of omega = 1.

The implicit level condition is solved through the substitution
E = (2n+1) w - 1 + delta/2, where w = sqrt(1 + 2 chi) satisfies the cubic

    (1 - w^2) (1 - delta - (2n+1) w) = 2 g^2,

whose left side decreases strictly on (0, min(1, (1 - delta)/(2n+1))).
Working in w keeps full precision close to the collapse point, where the
equivalent condition written in E has a root squeezed against a square-root
branch point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import OracleDomainError
from .model import Branch

__all__ = [
    "OracleLevel",
    "AnalyticObservables",
    "ExactObservables",
    "solve_low_spectrum",
    "implicit_residual",
    "oracle_level_data",
    "analytic_observables",
    "exact_observables",
    "oracle_gap",
]

_BISECT_TOL = 1e-15


@dataclass(frozen=True)
class OracleLevel:
    n: int
    energy: float
    chi: float
    r: float
    c_n: float
    d_n: float
    norm: float


@dataclass(frozen=True)
class AnalyticObservables:
    mean_photon: float
    delta_x: float
    chi_f_full: float
    chi_f_asymptotic: float


@dataclass(frozen=True)
class ExactObservables:
    """Observables evaluated on the squeezed-oscillator eigenfunction without asymptotic expansion."""

    mean_photon: float
    delta_x: float


def _effective_delta(delta: float, branch: Branch | str) -> float:
    return delta if Branch(branch) is Branch.PLUS else -delta


def _check_domain(delta: float, g: float, n: int, branch) -> float:
    if int(n) != n or n < 0:
        raise OracleDomainError(f"level index must be a nonnegative integer, got {n!r}")
    d = _effective_delta(delta, branch)
    if not 1.0 - d > 0:
        raise OracleDomainError(f"no critical point for delta={delta} on the {Branch(branch).value} branch")
    g_c = math.sqrt((1.0 - d) / 2.0)
    if not 0 < g < g_c:
        raise OracleDomainError(f"oracle needs 0 < g < g_c = {g_c:.12g}, got g={g}")
    return d


def _solve_w(d: float, g: float, n: int) -> float:
    m = 2 * n + 1
    a = 1.0 - d

    def f(w):
        return (1.0 - w * w) * (a - m * w) - 2.0 * g * g

    lo, hi = 0.0, min(1.0, a / m)
    if not f(lo) > 0 > f(hi):
        raise OracleDomainError(f"no sign change for level {n} at g={g}, delta={d}")
    # plain bisection: the bracket is tight and the function monotone, so this always terminates
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi) or hi - lo <= _BISECT_TOL * hi:
            break
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_low_spectrum(delta: float, g: float, n: int, branch: Branch | str = Branch.PLUS) -> float:
    """Energy of the n-th low-lying level for 0 < g < g_c."""
    d = _check_domain(delta, g, n, branch)
    w = _solve_w(d, g, n)
    return (2 * n + 1) * w - 1.0 + d / 2.0


def implicit_residual(delta: float, g: float, n: int, energy: float, branch: Branch | str = Branch.PLUS) -> float:
    """Residual of sqrt(-(d/2+E)) (E+1-d/2) / sqrt(-(d/2+E+2g^2)) - (2n+1)."""
    d = _effective_delta(delta, branch)
    s = d / 2.0 + energy
    if s >= 0 or s + 2 * g * g >= 0:
        return math.nan
    return math.sqrt(-s) * (energy + 1.0 - d / 2.0) / math.sqrt(-(s + 2 * g * g)) - (2 * n + 1)


def oracle_gap(delta: float, g: float, branch: Branch | str = Branch.PLUS) -> float:
    """E_1 - E_0 computed as 3 w_1 - w_0 without cancellation in the energies."""
    d = _check_domain(delta, g, 1, branch)
    return 3.0 * _solve_w(d, g, 1) - _solve_w(d, g, 0)


def oracle_level_data(delta: float, g: float, n: int, branch: Branch | str = Branch.PLUS) -> OracleLevel:
    d = _check_domain(delta, g, n, branch)
    w = _solve_w(d, g, n)
    energy = (2 * n + 1) * w - 1.0 + d / 2.0
    one_plus = w * w  # 1 + 2 chi
    chi = (one_plus - 1.0) / 2.0
    r = 0.25 * math.log(1.0 / one_plus)
    c_n = one_plus ** 0.25
    d_n = chi / g
    norm = math.sqrt(c_n ** 2 + (2 * n + 1) * d_n ** 2)
    return OracleLevel(n, energy, chi, r, c_n, d_n, norm)


def analytic_observables(delta: float, lam: float, n: int = 0,
                         branch: Branch | str = Branch.PLUS) -> AnalyticObservables:
    """Leading closed forms in lam = g/g_c; chi_f values are per unit lam^2."""
    if not 0 < lam < 1:
        raise OracleDomainError(f"lambda must lie in (0, 1), got {lam}")
    d = _effective_delta(delta, branch)
    if not 1.0 - d > 0:
        raise OracleDomainError(f"no critical point for delta={delta} on the {Branch(branch).value} branch")
    a = 1.0 - d
    l2 = lam * lam
    q = (2 * n + 1) ** 2 + 1
    mean_photon = 0.375 * q / (a * (1 - l2)) - 0.5 * (1 - a * l2)
    delta_x = math.sqrt(3.0 * q / (4.0 * a * (1 - l2)))
    asym = 1.5 * l2 / (1 - l2) ** 2
    full = a * a * (2 + l2 * l2) / (1 - l2) + asym + 4 * a * a * l2
    return AnalyticObservables(mean_photon, delta_x, full, asym)


def exact_observables(delta: float, g: float, n: int = 0, branch: Branch | str = Branch.PLUS) -> ExactObservables:
    """Photon number and quadrature spread of the n-th squeezed eigenfunction."""
    lv = oracle_level_data(delta, g, n, branch)
    r, c2, d2 = lv.r, lv.c_n ** 2, lv.d_n ** 2
    ch, sh2, s2r = math.cosh(2 * r), math.sinh(r) ** 2, math.sinh(2 * r)
    norm2 = lv.norm ** 2
    nbar = (c2 * (n * ch + sh2)
            + d2 * ((2 * n * n + n + 1) * ch + (2 * n + 1) * sh2 + n * (n + 1) * s2r)) / norm2
    var_x = math.exp(2 * r) / (2 * norm2) * (c2 * (2 * n + 1) + d2 * (6 * n * n + 6 * n + 3))
    return ExactObservables(nbar, math.sqrt(var_x))

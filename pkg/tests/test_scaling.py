import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rabistark.errors import CollapseError, FitError, PeakError
from rabistark.scaling import (
    Ansatz,
    PeakResult,
    SweepSeries,
    collapse,
    fit_power_law,
    locate_peak,
    optimize_exponents,
    peak_objective,
    rescale,
    scan_nu,
)
from rabistark.errors import DegenerateGroundStateError


def test_fit_exact_power_law():
    x = np.logspace(-3, -1, 9)
    fit = fit_power_law((x, 7 * x ** 3))
    assert fit.exponent == pytest.approx(3.0, abs=1e-12)
    assert 10 ** fit.log_intercept == pytest.approx(7.0, rel=1e-10)
    assert fit.r_squared == pytest.approx(1.0)
    assert all(s == pytest.approx(3.0) for _, s in fit.local_slopes)


@settings(max_examples=30, deadline=None)
@given(k=st.floats(-4, 4), c=st.floats(1e-3, 1e3))
def test_fit_recovers_any_exponent(k, c):
    x = np.logspace(0, 3, 6)
    assert fit_power_law((x, c * x ** k)).exponent == pytest.approx(k, abs=1e-9)


def test_fit_window_selects_points():
    x = np.logspace(-4, 0, 17)
    y = np.where(x < 1e-2, x ** 2, x ** 1)
    fit = fit_power_law((x, y), window=(1e-4, 1e-2 * 0.99))
    assert fit.exponent == pytest.approx(2.0)
    assert fit.n_points == 8


def test_fit_errors():
    with pytest.raises(FitError):
        fit_power_law(([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]))
    with pytest.raises(FitError):
        fit_power_law(([1.0, 2.0, 3.0, 4.0], [1.0, -2.0, 3.0, 4.0]))


def test_fit_accepts_series_in_any_order():
    x = np.array([4.0, 1.0, 3.0, 2.0])
    s = SweepSeries(1.0, "effective_L", x, x ** -0.5)
    assert fit_power_law(s).exponent == pytest.approx(-0.5)


def lorentz(g):
    return 1.0 / ((g - 0.4) ** 2 + 1e-4)


def test_locate_peak_precision():
    res = locate_peak(lorentz, (0.1, 0.9), scan_points=41)
    assert abs(res.g_m - 0.4) < 1e-6 * 0.4
    assert res.chi_max == pytest.approx(1e4, rel=1e-8)


@settings(max_examples=20, deadline=None)
@given(shift=st.floats(-0.2, 0.2))
def test_locate_peak_invariant_under_monotone_transform(shift):
    def f(g):
        return 1.0 / ((g - 0.4 - shift) ** 2 + 1e-3)

    a = locate_peak(f, (0.0, 1.0))
    b = locate_peak(lambda g: math.log(f(g)) * 3 + 1, (0.0, 1.0))
    assert a.g_m == pytest.approx(0.4 + shift, abs=1e-6)
    assert a.g_m == pytest.approx(b.g_m, abs=2e-6)


def test_peak_on_boundary_raises():
    with pytest.raises(PeakError):
        locate_peak(lambda g: g, (0.0, 1.0))


def test_peak_objective_maps_degeneracy():
    def f(g):
        if g > 0.5:
            raise DegenerateGroundStateError("doublet")
        return lorentz(g)

    assert peak_objective(f)(0.6) == -math.inf
    assert locate_peak(peak_objective(f), (0.1, 0.9)).g_m == pytest.approx(0.4, abs=1e-6)


def master_f(x):
    return 1.0 / (1.0 + x) + 0.3 * np.exp(-x)


def synthetic(sizes, beta, nu, ts):
    # M(t, L) = t^beta F(t L^nu) for both signs of t
    out = []
    for L in sizes:
        t = np.concatenate([-ts, ts])
        m = np.abs(t) ** beta * master_f(np.abs(t) * L ** nu)
        out.append(SweepSeries(L, "effective_L", t, m, "reduced_t"))
    return out


TS = np.logspace(-5, -1, 21)
SIZES = (1e2, 1e3, 1e4)


def test_synthetic_collapse_exact():
    res = collapse(synthetic(SIZES, 1.0, 1 / 3, TS), 1.0, 1 / 3, "order_parameter")
    assert res.residual < 1e-2  # piecewise-linear log interpolation of a smooth curve
    assert set(res.branch_residuals) == {-1, 1}
    bad = collapse(synthetic(SIZES, 1.0, 1 / 3, TS), 1.0, 0.5, "order_parameter")
    assert bad.residual > 10 * res.residual


def test_synthetic_collapse_on_power_law_master_is_exact():
    # a pure power-law master curve is linear in log-log, so interpolation is exact
    series = []
    for L in SIZES:
        t = TS
        series.append(SweepSeries(L, "effective_L", t, t ** 1.0 * (t * L ** 0.5) ** -0.7, "reduced_t"))
    res = collapse(series, 1.0, 0.5, "order_parameter")
    assert res.residual < 1e-8


def test_collapse_invariant_under_reordering_and_joint_scaling():
    s = synthetic(SIZES, 1.0, 1 / 3, TS)
    a = collapse(s, 1.0, 1 / 3, "order_parameter").residual
    b = collapse(s[::-1], 1.0, 1 / 3, "order_parameter").residual
    scaled = [SweepSeries(x.size_label, x.size_kind, x.abscissa, 5.0 * x.values, x.abscissa_kind) for x in s]
    c = collapse(scaled, 1.0, 1 / 3, "order_parameter").residual
    assert a == b
    assert c == pytest.approx(a, rel=1e-9)


def test_scan_nu_picks_true_exponent():
    s = synthetic(SIZES, 1.0, 1 / 3, TS)
    best, res = scan_nu(s, 1.0, [0.2, 1 / 3, 0.45, 0.6], "order_parameter")
    assert best == pytest.approx(1 / 3)
    beta, nu, r = optimize_exponents(s, 0.9, 0.4, Ansatz.ORDER_PARAMETER)
    assert nu == pytest.approx(1 / 3, rel=0.03)
    assert beta == pytest.approx(1.0, rel=0.03)


def test_fidelity_ratio_rescale():
    g = np.array([0.3, 0.4, 0.5])
    s = SweepSeries(10.0, "effective_L", g, np.array([1.0, 2.0, 4.0]))
    x, y, side = rescale(s, 1.0, 0.5, "fidelity_ratio", PeakResult(0.4, 4.0, 10.0))
    assert np.allclose(x, [0.1 * math.sqrt(10)] * 2)
    assert np.allclose(y, [3.0, 0.0])
    assert list(side) == [-1, 1]
    with pytest.raises(CollapseError):
        rescale(s, 1.0, 0.5, "fidelity_ratio")


def test_collapse_errors():
    s = synthetic(SIZES, 1.0, 1 / 3, TS)
    with pytest.raises(CollapseError):
        collapse(s[:2], 1.0, 1 / 3, "order_parameter")
    with pytest.raises(CollapseError):
        collapse([s[0], s[0], s[1]], 1.0, 1 / 3, "order_parameter")
    far = [SweepSeries(L, "effective_L", t, t, "reduced_t")
           for L, t in zip(SIZES, (np.array([1e-9, 2e-9]), np.array([0.1, 0.2]), np.array([10.0, 20.0])))]
    with pytest.raises(CollapseError):
        collapse(far, 1.0, 0.0, "order_parameter")


def test_series_rejects_non_finite():
    with pytest.raises(FitError):
        SweepSeries(1.0, "effective_L", np.array([1.0, 2.0]), np.array([1.0, np.nan]))

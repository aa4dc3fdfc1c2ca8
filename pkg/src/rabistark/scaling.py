"""Power-law fits, susceptibility peaks, data collapse and the exponent table."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import CollapseError, DegenerateGroundStateError, FitError, PeakError, RabiStarkError
from .model import Branch, ModelKind, ModelParams, critical_coupling, stark_u_for_size
from .spectra import ConvergencePolicy, converge_truncation

__all__ = [
    "SizeKind",
    "AbscissaKind",
    "Ansatz",
    "SweepSeries",
    "PowerLawFit",
    "PeakResult",
    "CollapseResult",
    "fit_power_law",
    "scan_peak",
    "locate_peak",
    "peak_objective",
    "rescale",
    "collapse",
    "scan_nu",
    "optimize_exponents",
    "TableConfig",
    "TableCell",
    "ExponentTable",
    "TABLE_TARGETS",
    "TABLE_TOLERANCES",
    "exponent_table",
]

log = logging.getLogger(__name__)


class SizeKind(str, enum.Enum):
    EFFECTIVE_L = "effective_L"
    TRUNCATION_N = "truncation_N"


class AbscissaKind(str, enum.Enum):
    COUPLING_G = "coupling_g"
    REDUCED_T = "reduced_t"


class Ansatz(str, enum.Enum):
    ORDER_PARAMETER = "order_parameter"
    FIDELITY_RATIO = "fidelity_ratio"
    GENERIC_OBSERVABLE = "generic_observable"


@dataclass(frozen=True)
class SweepSeries:
    size_label: float
    size_kind: SizeKind
    abscissa: np.ndarray
    values: np.ndarray
    abscissa_kind: AbscissaKind = AbscissaKind.COUPLING_G

    def __post_init__(self):
        x = np.asarray(self.abscissa, dtype=float)
        y = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise FitError("abscissa and values must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise FitError("series contains non-finite entries")
        order = np.argsort(x, kind="stable")
        x, y = x[order], y[order]
        for arr in (x, y):
            arr.setflags(write=False)
        object.__setattr__(self, "abscissa", x)
        object.__setattr__(self, "values", y)
        object.__setattr__(self, "size_kind", SizeKind(self.size_kind))
        object.__setattr__(self, "abscissa_kind", AbscissaKind(self.abscissa_kind))
        object.__setattr__(self, "size_label", float(self.size_label))

    @classmethod
    def from_points(cls, size_label, size_kind, points: Iterable[tuple[float, float]],
                    abscissa_kind=AbscissaKind.COUPLING_G) -> "SweepSeries":
        pts = list(points)
        x = [p[0] for p in pts]
        y = [p[1] for p in pts]
        return cls(size_label, size_kind, np.asarray(x, float), np.asarray(y, float), abscissa_kind)

    @property
    def points(self):
        return list(zip(self.abscissa.tolist(), self.values.tolist()))

    def __len__(self):
        return self.abscissa.size


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    log_intercept: float
    r_squared: float
    window: tuple[float, float]
    n_points: int
    local_slopes: tuple = field(default=(), compare=False)

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "log_intercept": self.log_intercept,
            "r_squared": self.r_squared,
            "window": list(self.window),
            "n_points": self.n_points,
            "local_slopes": [list(p) for p in self.local_slopes],
        }


def fit_power_law(series: SweepSeries | tuple, window: tuple[float, float] | None = None,
                  min_points: int = 4) -> PowerLawFit:
    """Least-squares line through (log10 x, log10 y) inside ``window``.

    ``series`` may also be a plain ``(x, y)`` pair.  The local-slope trace
    lists ``(sqrt(x_i x_{i+1}), slope)`` for neighbouring points so drift
    out of the scaling regime is visible.
    """
    if isinstance(series, SweepSeries):
        x, y = series.abscissa, series.values
    else:
        x, y = (np.asarray(a, dtype=float) for a in series)
        order = np.argsort(x)
        x, y = x[order], y[order]
    if window is not None:
        lo, hi = sorted(window)
        # tiny slack so grid points computed as lo*10^k land inside
        mask = (x >= lo * (1 - 1e-12)) & (x <= hi * (1 + 1e-12))
        x, y = x[mask], y[mask]
    if x.size < min_points:
        raise FitError(f"need at least {min_points} points in the window, got {x.size}")
    bad = [(float(a), float(b)) for a, b in zip(x, y) if not (a > 0 and b > 0)]
    if bad:
        raise FitError(f"non-positive data in fit window: {bad}")
    lx, ly = np.log10(x), np.log10(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    r2 = min(1.0, max(0.0, r2))
    local = tuple(
        (float(10 ** (0.5 * (lx[i] + lx[i + 1]))), float((ly[i + 1] - ly[i]) / (lx[i + 1] - lx[i])))
        for i in range(lx.size - 1)
    )
    return PowerLawFit(float(slope), float(intercept), r2, (float(x[0]), float(x[-1])), int(x.size), local)


@dataclass(frozen=True)
class PeakResult:
    g_m: float
    chi_max: float
    size_label: float = math.nan

    def to_dict(self) -> dict:
        return {"g_m": self.g_m, "chi_max": self.chi_max, "size_label": self.size_label}


def scan_peak(func: Callable[[float], float], grid: Sequence[float]):
    """Evaluate ``func`` on ``grid`` and return ``(index_of_max, values)``.

    Raises :class:`PeakError` when the largest sample sits on either end.
    """
    grid = np.asarray(grid, dtype=float)
    values = np.array([func(float(g)) for g in grid])
    i = int(np.argmax(values))
    if i == 0 or i == grid.size - 1:
        raise PeakError(
            f"maximum on the scan boundary at g={grid[i]:.6g}; widen the bracket [{grid[0]:.6g}, {grid[-1]:.6g}]"
        )
    return i, values


def locate_peak(func: Callable[[float], float], bracket: tuple[float, float], scan_points: int = 41,
                g_scale: float | None = None, rel_tol: float = 1e-6, size_label: float = math.nan) -> PeakResult:
    """Maximum of ``func`` inside ``bracket``.

    A uniform scan with ``scan_points`` samples picks the best interior
    triple, which golden-section search then refines until the bracket is
    narrower than ``rel_tol * g_scale`` (``g_scale`` defaults to the bracket
    midpoint).
    """
    lo, hi = sorted(bracket)
    if scan_points < 3:
        raise PeakError("need at least 3 scan points")
    grid = np.linspace(lo, hi, scan_points)
    i, values = scan_peak(func, grid)
    scale = abs(g_scale) if g_scale else 0.5 * (abs(lo) + abs(hi))
    a, b, c = grid[i - 1], grid[i], grid[i + 1]
    # scipy's golden stops when the bracket width <= xtol * (|x1| + |x2|)
    xtol = rel_tol * scale / (2.0 * max(abs(a), abs(c), 1e-300))
    res = minimize_scalar(lambda g: -func(g), bracket=(a, b, c), method="golden", options={"xtol": xtol})
    g_m, chi_max = float(res.x), float(-res.fun)
    if chi_max < values[i]:
        g_m, chi_max = float(grid[i]), float(values[i])
    if not lo < g_m < hi:
        raise PeakError(f"refined maximum {g_m:.6g} left the bracket [{lo:.6g}, {hi:.6g}]")
    return PeakResult(g_m, chi_max, size_label)


def peak_objective(func: Callable[[float], float]) -> Callable[[float], float]:
    """Wrap a susceptibility so gauge-undefined (degenerate) points score -inf.

    Above g_c the ground doublet becomes quasi-degenerate; such points can
    never be the peak, and excluding them keeps a wide scan usable.
    """

    def f(g):
        try:
            return func(g)
        except DegenerateGroundStateError:
            return -math.inf

    return f


@dataclass
class CollapseResult:
    beta_used: float
    nu_used: float
    ansatz: Ansatz
    residual: float
    overlap_range: tuple[float, float]
    branch_residuals: dict = field(default_factory=dict)
    n_compared: int = 0
    master: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "beta_used": self.beta_used,
            "nu_used": self.nu_used,
            "ansatz": self.ansatz.value,
            "residual": self.residual,
            "overlap_range": list(self.overlap_range),
            "branch_residuals": {str(k): v for k, v in self.branch_residuals.items()},
            "n_compared": self.n_compared,
        }


def rescale(series: SweepSeries, beta: float, nu: float, ansatz: Ansatz | str,
            peak: PeakResult | None = None):
    """Master-curve coordinates ``(x, y, side)`` for one series.

    order_parameter: abscissa is reduced t; x = |t| L^nu, y = M / |t|^beta.
    fidelity_ratio: abscissa is g; x = |g - g_m| L^nu, y = (chi_max - chi)/chi.
    generic_observable: abscissa is reduced t; x = |t| L^nu, y = O L^(-beta).
    ``side`` is the sign of t (or of g - g_m); points with zero offset are dropped.
    """
    ansatz = Ansatz(ansatz)
    size = series.size_label
    x0, y0 = series.abscissa, series.values
    if ansatz is Ansatz.FIDELITY_RATIO:
        if peak is None:
            raise CollapseError(f"fidelity_ratio collapse needs the peak of series L={size:g}")
        offset = x0 - peak.g_m
        keep = (offset != 0) & (y0 != 0)
        side = np.sign(offset[keep])
        x = np.abs(offset[keep]) * size ** nu
        y = (peak.chi_max - y0[keep]) / y0[keep]
    else:
        keep = x0 != 0
        side = np.sign(x0[keep])
        t = np.abs(x0[keep])
        x = t * size ** nu
        if ansatz is Ansatz.ORDER_PARAMETER:
            y = y0[keep] / t ** beta
        else:
            y = y0[keep] * size ** (-beta)
    return x, y, side


def _branch_deviations(curves, floor_frac):
    """Relative deviations of all but the largest size from the largest, on the common range."""
    curves = sorted(curves, key=lambda c: c[0])
    lo = max(float(np.min(c[1])) for c in curves)
    hi = min(float(np.max(c[1])) for c in curves)
    if not lo < hi:
        return None, (lo, hi)
    _, rx, ry = curves[-1]
    order = np.argsort(rx)
    rx, ry = rx[order], ry[order]
    in_ref = (rx >= lo) & (rx <= hi)
    scale = floor_frac * float(np.max(np.abs(ry[in_ref]))) if in_ref.any() else 0.0
    use_log = bool(np.all(ry > 0))
    devs = []
    for _, x, y in curves[:-1]:
        m = (x >= lo) & (x <= hi)
        if not m.any():
            continue
        if use_log and np.all(y[m] > 0):
            yr = np.exp(np.interp(np.log(x[m]), np.log(rx), np.log(ry)))
        else:
            yr = np.interp(x[m], rx, ry)
        devs.append((y[m] - yr) / np.maximum(np.abs(yr), max(scale, 1e-300)))
    if not devs:
        return None, (lo, hi)
    return np.concatenate(devs), (lo, hi)


def collapse(series_set: Sequence[SweepSeries], beta: float, nu: float, ansatz: Ansatz | str,
             peaks: Mapping[float, PeakResult] | None = None, min_series: int = 3,
             floor_frac: float = 1e-2) -> CollapseResult:
    """Collapse residual of ``series_set`` for the exponent pair ``(beta, nu)``.

    Each side (sign of t or of g - g_m) is collapsed separately against the
    largest-size series, interpolated piecewise linearly in log-log
    coordinates when its values are positive.  The residual is the RMS of
    relative deviations of the smaller sizes over the x-range shared by all
    series; deviations are measured against max(|y_ref|, floor_frac *
    max|y_ref|) so zero crossings of the master curve cannot blow it up.
    """
    ansatz = Ansatz(ansatz)
    labels = [s.size_label for s in series_set]
    if len(set(labels)) != len(labels):
        raise CollapseError("series must have distinct size labels")
    if len(series_set) < min_series:
        raise CollapseError(f"need at least {min_series} series, got {len(series_set)}")
    peaks = peaks or {}
    per_side = {}
    master = []
    for s in series_set:
        x, y, side = rescale(s, beta, nu, ansatz, peaks.get(s.size_label))
        for sgn in (-1.0, 1.0):
            m = side == sgn
            if m.sum() >= 2:
                per_side.setdefault(sgn, []).append((s.size_label, x[m], y[m]))
        master.extend((s.size_label, float(a), float(b), int(c)) for a, b, c in zip(x, y, side))
    all_devs, ranges, branch_res = [], [], {}
    for sgn, curves in sorted(per_side.items()):
        if len(curves) < 2:
            continue
        devs, rng = _branch_deviations(curves, floor_frac)
        if devs is None:
            continue
        all_devs.append(devs)
        ranges.append(rng)
        branch_res[int(sgn)] = float(np.sqrt(np.mean(devs ** 2)))
    if not all_devs:
        raise CollapseError("series have no overlapping x-range after rescaling")
    d = np.concatenate(all_devs)
    rng = (min(r[0] for r in ranges), max(r[1] for r in ranges))
    master.sort(key=lambda row: (row[3], row[0], row[1]))
    return CollapseResult(float(beta), float(nu), ansatz, float(np.sqrt(np.mean(d ** 2))), rng,
                          branch_res, int(d.size), master)


def scan_nu(series_set, beta: float, nus: Sequence[float], ansatz, peaks=None, **kw):
    """Residual for every nu in ``nus``; returns ``(best_nu, residuals)``."""
    res = []
    for nu in nus:
        try:
            res.append(collapse(series_set, beta, nu, ansatz, peaks, **kw).residual)
        except CollapseError:
            res.append(math.inf)
    res = np.asarray(res)
    return float(np.asarray(nus)[int(np.argmin(res))]), res


def optimize_exponents(series_set, beta0: float, nu0: float, ansatz, peaks=None, fix_beta: bool = False,
                       span: float = 0.5, sweeps: int = 4, **kw):
    """Coordinate search for the (beta, nu) minimizing the collapse residual.

    Diagnostic only; each coordinate is searched within +/- ``span`` times its
    starting value.
    """
    beta, nu = float(beta0), float(nu0)

    def resid(b, n):
        try:
            return collapse(series_set, b, n, ansatz, peaks, **kw).residual
        except CollapseError:
            return math.inf

    for _ in range(sweeps):
        lo, hi = sorted((nu * (1 - span), nu * (1 + span)))
        nu = float(minimize_scalar(lambda n: resid(beta, n), bounds=(lo, hi), method="bounded").x)
        if not fix_beta and ansatz is not Ansatz.FIDELITY_RATIO:
            lo, hi = sorted((beta * (1 - span), beta * (1 + span)))
            beta = float(minimize_scalar(lambda b: resid(b, nu), bounds=(lo, hi), method="bounded").x)
    return beta, nu, resid(beta, nu)


# ---------------------------------------------------------------- exponent table

TABLE_ROWS = ("gap", "order_parameter", "position_variance", "fidelity_susceptibility")
TABLE_TARGETS = {
    "gap": (2.0, -2.0 / 3.0, -2.0),
    "order_parameter": (1.0, -1.0 / 3.0, -1.0),
    "position_variance": (-0.5, 1.0 / 6.0, 0.5),
    "fidelity_susceptibility": (-2.0, 2.0 / 3.0, 2.0),
}
TABLE_TOLERANCES = {
    "gap": (0.05, 0.05, 0.1),
    "order_parameter": (0.05, 0.03, 0.05),
    "position_variance": (0.05, 0.03, 0.05),
    "fidelity_susceptibility": (0.1, 0.05, 0.1),
}
RATIO_TOLERANCE = 0.05


@dataclass
class TableConfig:
    """Sampling choices for the exponent table (U -> +omega branch by default).

    y: log-spaced reduced couplings ``t_window`` at U = +omega.
    y_L: g = g_c with U = 1 - 1/L; the susceptibility uses its peak value.
    y_N: g = g_c with U = +omega at fixed truncation N; the susceptibility
    uses its peak value.
    """

    delta: float = 0.5
    branch: Branch = Branch.PLUS
    t_window: tuple = (1e-3, 1e-2)
    t_points: int = 7
    sizes_L: tuple = (1e4, 1e5, 1e6)
    sizes_N: tuple = (256, 512, 1024, 2048)
    policy: ConvergencePolicy = field(default_factory=ConvergencePolicy)
    chi_method: str = "derivative_form"
    peak_n_tr: int = 4096
    peak_bracket_L: tuple = (0.8, 1.3)
    peak_bracket_N: tuple = (0.9, 1.2)
    peak_scan_points: int = 41
    rows: tuple = TABLE_ROWS

    def __post_init__(self):
        self.branch = Branch(self.branch)
        if isinstance(self.policy, dict):
            self.policy = ConvergencePolicy(**self.policy)
        self.t_window = tuple(self.t_window)
        self.sizes_L = tuple(float(s) for s in self.sizes_L)
        self.sizes_N = tuple(int(s) for s in self.sizes_N)
        self.peak_bracket_L = tuple(self.peak_bracket_L)
        self.peak_bracket_N = tuple(self.peak_bracket_N)
        self.rows = tuple(self.rows)

    @property
    def u_critical(self) -> float:
        return 1.0 if self.branch is Branch.PLUS else -1.0


@dataclass
class TableCell:
    observable: str
    column: str
    target: float
    tolerance: float
    value: float = math.nan
    r_squared: float = math.nan
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and abs(self.value - self.target) <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "observable": self.observable,
            "column": self.column,
            "value": self.value,
            "target": self.target,
            "tolerance": self.tolerance,
            "r_squared": self.r_squared,
            "passed": self.passed,
            "error": self.error,
        }


@dataclass
class ExponentTable:
    cells: list
    ratios: dict  # observable -> {"y_L/y_N": value, "nu": -y_L/y}
    data: dict = field(default_factory=dict, repr=False)

    def cell(self, observable: str, column: str) -> TableCell:
        for c in self.cells:
            if c.observable == observable and c.column == column:
                return c
        raise KeyError((observable, column))

    @property
    def all_passed(self) -> bool:
        ratios_ok = all(r.get("ratio_passed", False) for r in self.ratios.values())
        return ratios_ok and all(c.passed for c in self.cells)

    def to_dict(self) -> dict:
        return {"cells": [c.to_dict() for c in self.cells], "ratios": self.ratios, "all_passed": self.all_passed}


def _default_evaluator(chi_method):
    from .observables import evaluate

    def ev(params, n_tr, name):
        return evaluate(params, n_tr, name, chi_method=chi_method).value

    return ev


def exponent_table(config: TableConfig | None = None, evaluate: Callable | None = None) -> ExponentTable:
    """Fit every (y, y_L, y_N) cell and the derived ratios.

    ``evaluate(params, n_tr, name) -> float`` computes one observable at a
    fixed truncation; the runner passes a cached version.  A failing cell is
    recorded with its error message and the rest of the table still fills.
    """
    config = config or TableConfig()
    evaluate = evaluate or _default_evaluator(config.chi_method)
    g_c = critical_coupling(config.delta, config.branch)
    base = ModelParams(ModelKind.RSM, config.delta, stark_u=config.u_critical)
    ts = np.logspace(math.log10(config.t_window[0]), math.log10(config.t_window[1]), config.t_points)
    cells, data = [], {}

    def converged(params, name):
        return converge_truncation(params, name, config.policy, evaluate=evaluate).value

    def chi_peak(params, n_tr, bracket):
        f = peak_objective(lambda g: evaluate(params.with_coupling(g), n_tr, "fidelity_susceptibility"))
        return locate_peak(f, (bracket[0] * g_c, bracket[1] * g_c), config.peak_scan_points, g_scale=g_c)

    for name in config.rows:
        targets, tols = TABLE_TARGETS[name], TABLE_TOLERANCES[name]
        row = {}
        columns = (
            ("y", lambda: [(t, converged(base.with_coupling(g_c * (1 - t)), name)) for t in ts]),
            ("y_L", lambda: [
                (L, chi_peak(base.with_stark(stark_u_for_size(L, config.branch)), config.peak_n_tr,
                             config.peak_bracket_L).chi_max if name == "fidelity_susceptibility"
                 else converged(base.with_stark(stark_u_for_size(L, config.branch)).with_coupling(g_c), name))
                for L in config.sizes_L]),
            ("y_N", lambda: [
                (float(n), chi_peak(base, n, config.peak_bracket_N).chi_max if name == "fidelity_susceptibility"
                 else evaluate(base.with_coupling(g_c), n, name))
                for n in config.sizes_N]),
        )
        for col, (label, produce) in enumerate(columns):
            cell = TableCell(name, label, targets[col], tols[col])
            try:
                pts = produce()
                data[(name, label)] = pts
                fit = fit_power_law((np.array([p[0] for p in pts]), np.array([p[1] for p in pts])),
                                    min_points=3)
                cell.value, cell.r_squared = fit.exponent, fit.r_squared
            except RabiStarkError as exc:
                cell.error = f"{type(exc).__name__}: {exc}"
                log.warning("table cell %s/%s failed: %s", name, label, exc)
            row[label] = cell
            cells.append(cell)
    ratios = {}
    for name in config.rows:
        y, y_l, y_n = (next(c for c in cells if c.observable == name and c.column == k).value
                       for k in ("y", "y_L", "y_N"))
        ratio = y_l / y_n if y_n else math.nan
        nu = -y_l / y if y else math.nan
        ratios[name] = {
            "y_L/y_N": ratio,
            "nu": nu,
            "ratio_passed": bool(abs(ratio - 1.0 / 3.0) <= RATIO_TOLERANCE),
        }
    return ExponentTable(cells, ratios, data)

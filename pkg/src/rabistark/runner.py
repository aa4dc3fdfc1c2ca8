"""Sweep configuration, cached evaluation and dataset export."""

from __future__ import annotations

import copy
import csv
import enum
import hashlib
import io
import json
import logging
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from . import errors
from .errors import (
    DegenerateGroundStateError,
    IncompleteSumError,
    ParameterError,
    RabiStarkError,
    SolverConvergenceError,
)
from .model import (
    Branch,
    ModelKind,
    ModelParams,
    critical_coupling,
    critical_point,
    stark_u_for_size,
)
from .observables import ChiMethod, evaluate as evaluate_observable
from .scaling import AbscissaKind, PeakResult, SizeKind, SweepSeries, locate_peak, peak_objective
from .spectra import OBSERVABLE_IDS, ConvergencePolicy, converge_truncation, solve_count

__all__ = [
    "SweepAxis",
    "SweepConfig",
    "Cache",
    "CachedEvaluator",
    "PointResult",
    "SweepResult",
    "CACHE_ENV",
    "SCHEMA_VERSION",
    "cache_key",
    "canonical_json",
    "load_config",
    "apply_overrides",
    "recipe_path",
    "critical_coupling_of",
    "run_sweep",
    "sweep_peaks",
    "write_series_csv",
    "read_series_csv",
]

log = logging.getLogger(__name__)

CACHE_ENV = "RABISTARK_CACHE_DIR"
SCHEMA_VERSION = 1
CSV_COLUMNS = ("abscissa", "value", "n_tr", "converged", "residual")


class SweepAxis(str, enum.Enum):
    COUPLING_G = "coupling_g"
    STARK_U = "stark_u"
    TRUNCATION_N = "truncation_n"
    EFFECTIVE_SIZE = "effective_size"


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def canonical_json(obj: Any) -> str:
    """Sorted keys, floats as 17-significant-digit decimals."""

    def conv(o):
        if isinstance(o, bool) or o is None or isinstance(o, str):
            return o
        if isinstance(o, enum.Enum):
            return o.value
        if isinstance(o, (int, np.integer)):
            return int(o)
        if isinstance(o, (float, np.floating)):
            return {"__float__": fmt_float(o)}
        if isinstance(o, dict):
            return {str(k): conv(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [conv(v) for v in o]
        raise TypeError(f"cannot canonicalize {type(o).__name__}")

    return json.dumps(conv(obj), sort_keys=True, separators=(",", ":"))


def observable_tag(name: str, chi_method: str) -> str:
    return f"{name}[{ChiMethod(chi_method).value}]" if name == "fidelity_susceptibility" else name


def cache_key(params: ModelParams, n_tr: int, observable: str, tol: float) -> str:
    payload = {"params": params.to_dict(), "n_tr": int(n_tr), "observable": observable, "tol": float(tol)}
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


class Cache:
    """One JSON file per key; writes go through a temp file and an atomic rename."""

    def __init__(self, directory: str | os.PathLike | None):
        self.directory = Path(directory) if directory else None
        if self.directory:
            self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, digest):
        return self.directory / digest[:2] / f"{digest}.json"

    def get(self, digest: str):
        if not self.directory:
            return None
        path = self._path(digest)
        try:
            with open(path, encoding="utf-8") as fh:
                entry = json.load(fh)
        except FileNotFoundError:
            return None
        except json.JSONDecodeError:
            log.warning("ignoring unreadable cache entry %s", path)
            return None
        if "error" in entry:
            # deterministic failures are cached too, so reruns skip them without a solve
            cls = getattr(errors, entry["error"]["type"], RabiStarkError)
            raise cls(entry["error"]["message"])
        return entry.get("value")

    def put(self, digest: str, value: float, meta: dict | None = None):
        self._write(digest, {"value": value, "meta": meta or {}})

    def put_error(self, digest: str, exc: RabiStarkError, meta: dict | None = None):
        self._write(digest, {"error": {"type": type(exc).__name__, "message": str(exc)}, "meta": meta or {}})

    def _write(self, digest: str, entry: dict):
        if not self.directory:
            return
        path = self._path(digest)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(entry, fh)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


class CachedEvaluator:
    """``(params, n_tr, name) -> float`` backed by :class:`Cache`."""

    def __init__(self, cache: Cache, chi_method: str = "derivative_form", tol: float = 1e-9):
        self.cache = cache
        self.chi_method = ChiMethod(chi_method).value
        self.tol = tol
        self.hits = 0
        self.misses = 0
        self.keys = []

    def __call__(self, params: ModelParams, n_tr: int, name: str) -> float:
        digest = cache_key(params, n_tr, observable_tag(name, self.chi_method), self.tol)
        self.keys.append(digest)
        try:
            value = self.cache.get(digest)
        except RabiStarkError:
            self.hits += 1
            raise
        if value is not None:
            self.hits += 1
            return float(value)
        self.misses += 1
        meta = {"params": params.to_dict(), "n_tr": n_tr, "observable": name}
        try:
            value = evaluate_observable(params, n_tr, name, chi_method=self.chi_method, tol=self.tol).value
        except (DegenerateGroundStateError, IncompleteSumError, SolverConvergenceError) as exc:
            self.cache.put_error(digest, exc, meta)
            raise
        self.cache.put(digest, value, meta)
        return value


@dataclass
class SweepConfig:
    """One sweep: a model template, an axis, a grid and the observables to record.

    ``abscissa`` chooses how grid values map to couplings on the
    ``coupling_g`` axis: ``coupling_g`` uses them directly, ``reduced_t``
    treats them as t with g = g_c (1 - t), and ``peak_offset`` treats them as
    offsets in units of g_c from each size's susceptibility peak.  ``side``
    (below/above/both) selects the sign of t or of the offset.  ``sizes``
    turns one sweep into a family: effective sizes L set U = +/-(1 - 1/L) on
    ``branch``, truncation sizes N fix n_tr.  ``at_critical`` pins g = g_c
    for the U, L and n_tr axes.  ``n_tr`` set to an integer disables the
    convergence ladder.
    """

    model: ModelParams
    sweep_axis: SweepAxis = SweepAxis.COUPLING_G
    grid: list = field(default_factory=list)
    observables: list = field(default_factory=lambda: ["ground_energy"])
    convergence: ConvergencePolicy = field(default_factory=ConvergencePolicy)
    output_dir: str = "output"
    workers: int = 1
    abscissa: str = "coupling_g"
    side: str = "below"
    branch: Branch | None = None
    size_kind: SizeKind | None = None
    sizes: list = field(default_factory=list)
    n_tr: int | None = None
    at_critical: bool = False
    chi_method: str = "derivative_form"
    solver_tol: float = 1e-9
    peak: dict = field(default_factory=lambda: {"bracket": [0.8, 1.3], "scan_points": 41, "n_tr": 4096})
    name: str = "sweep"

    def __post_init__(self):
        if isinstance(self.model, dict):
            self.model = ModelParams.from_dict(self.model)
        if isinstance(self.convergence, dict):
            self.convergence = ConvergencePolicy(**self.convergence)
        self.sweep_axis = SweepAxis(self.sweep_axis)
        self.grid = expand_grid(self.grid)
        self.chi_method = ChiMethod(self.chi_method).value
        if self.branch is None:
            self.branch = Branch.MINUS if self.model.stark_u < 0 else Branch.PLUS
        self.branch = Branch(self.branch)
        if self.size_kind is not None:
            self.size_kind = SizeKind(self.size_kind)
        if self.sizes and self.size_kind is None:
            raise ParameterError("sizes given without size_kind")
        self.sizes = [float(s) for s in self.sizes]
        if self.size_kind is SizeKind.TRUNCATION_N:
            if any(s != int(s) or s < 1 for s in self.sizes):
                raise ParameterError("truncation sizes must be positive integers")
        if self.size_kind is SizeKind.EFFECTIVE_L and any(s < 1 for s in self.sizes):
            raise ParameterError("effective sizes must be >= 1")
        if self.sizes and self.sweep_axis is not SweepAxis.COUPLING_G:
            raise ParameterError("sizes are only supported on the coupling_g axis")
        if self.abscissa not in ("coupling_g", "reduced_t", "peak_offset"):
            raise ParameterError(f"unknown abscissa {self.abscissa!r}")
        if self.side not in ("below", "above", "both"):
            raise ParameterError(f"side must be below, above or both, got {self.side!r}")
        if self.workers < 1:
            raise ParameterError("workers must be >= 1")
        if not self.observables:
            raise ParameterError("at least one observable is required")
        for name in self.observables:
            if name not in OBSERVABLE_IDS:
                raise ParameterError(f"unknown observable {name!r}")
        if self.n_tr is not None:
            self.n_tr = int(self.n_tr)
        if self.sweep_axis is SweepAxis.TRUNCATION_N and any(v != int(v) or v < 1 for v in self.grid):
            raise ParameterError("truncation grid must hold positive integers")

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        return cls(**copy.deepcopy(data))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "model": self.model.to_dict(),
            "sweep_axis": self.sweep_axis.value,
            "grid": list(self.grid),
            "observables": list(self.observables),
            "convergence": self.convergence.to_dict(),
            "abscissa": self.abscissa,
            "side": self.side,
            "branch": self.branch.value,
            "size_kind": self.size_kind.value if self.size_kind else None,
            "sizes": list(self.sizes),
            "n_tr": self.n_tr,
            "at_critical": self.at_critical,
            "chi_method": self.chi_method,
            "solver_tol": self.solver_tol,
            "peak": dict(self.peak),
        }


def expand_grid(spec) -> list:
    """Explicit list, or ``{lo, hi, count, spacing}`` with spacing linear/log."""
    if isinstance(spec, dict):
        try:
            lo, hi, count = float(spec["lo"]), float(spec["hi"]), int(spec["count"])
        except KeyError as exc:
            raise ParameterError(f"grid spec missing {exc.args[0]!r}") from None
        spacing = spec.get("spacing", "linear")
        if count < 1:
            raise ParameterError("grid count must be positive")
        if spacing == "linear":
            values = np.linspace(lo, hi, count)
        elif spacing == "log":
            if lo <= 0 or hi <= 0:
                raise ParameterError("log grid needs positive bounds")
            values = np.logspace(math.log10(lo), math.log10(hi), count)
        else:
            raise ParameterError(f"unknown spacing {spacing!r}")
        values = [float(v) for v in values]
    else:
        values = [float(v) for v in spec]
    if not values:
        raise ParameterError("grid must be nonempty")
    diffs = np.diff(values)
    if values and len(values) > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ParameterError("grid must be strictly monotone")
    return values


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: dict, overrides: Sequence[str]) -> dict:
    """Apply ``dotted.key=value`` overrides; values are parsed as JSON when possible."""
    data = copy.deepcopy(data)
    for item in overrides:
        if "=" not in item:
            raise ParameterError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        node = data
        for part in parts[:-1]:
            if not isinstance(node.setdefault(part, {}), dict):
                raise ParameterError(f"cannot descend into {part!r} in override {item!r}")
            node = node[part]
        node[parts[-1]] = _parse_value(value)
    return data


def recipe_path(name: str) -> Path:
    """Path of a shipped recipe such as ``fig2a`` or ``table1.json``."""
    if not name.endswith(".json"):
        name += ".json"
    path = Path(str(resources.files("rabistark") / "recipes" / name))
    if not path.exists():
        raise ParameterError(f"no shipped recipe {name!r}")
    return path


def load_config(path: str | os.PathLike, overrides: Sequence[str] = ()) -> dict:
    p = Path(path)
    if not p.is_file() and os.sep not in str(path):
        p = recipe_path(str(path))
    try:
        with open(p, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParameterError(f"config {p} is not valid JSON: {exc}") from None
    return apply_overrides(data, overrides)


def critical_coupling_of(params: ModelParams, branch: Branch) -> float:
    if params.kind is ModelKind.QRM:
        return critical_point(params).g_c
    return critical_coupling(params.delta, branch, params.omega)


@dataclass
class PointResult:
    observable: str
    size_label: float
    index: int
    abscissa: float
    params: dict
    value: float = math.nan
    n_tr: int | None = None
    converged: bool = False
    residual: float = math.nan
    error: str | None = None
    cache_keys: list = field(default_factory=list)
    solves: int = 0
    hits: int = 0
    misses: int = 0

    def manifest_entry(self) -> dict:
        return {
            "observable": self.observable,
            "size_label": self.size_label,
            "index": self.index,
            "abscissa": self.abscissa,
            "params": self.params,
            "value": self.value,
            "n_tr": self.n_tr,
            "converged": self.converged,
            "residual": self.residual,
            "error": self.error,
            "cache_keys": self.cache_keys,
        }


@dataclass
class SweepResult:
    files: list
    manifest_path: Path
    points: list
    peaks: dict
    eigensolves: int
    cache_hits: int
    cache_misses: int

    @property
    def failures(self) -> list:
        return [p for p in self.points if p.error is not None]

    @property
    def ok(self) -> bool:
        return not self.failures


def size_params(config: SweepConfig, size: float) -> tuple[ModelParams, int | None]:
    """Model template and fixed truncation for one size label."""
    model, n_tr = config.model, config.n_tr
    if config.size_kind is SizeKind.EFFECTIVE_L:
        model = model.with_stark(stark_u_for_size(size, config.branch, model.omega))
    elif config.size_kind is SizeKind.TRUNCATION_N:
        n_tr = int(size)
    return model, n_tr


def _signed(values, side):
    if side == "below":
        return list(values)
    if side == "above":
        return [-v for v in values]
    mags = sorted({abs(v) for v in values})
    return [-v for v in reversed(mags)] + mags


def _peak_for(config: SweepConfig, size: float, evaluator) -> PeakResult:
    model, n_tr = size_params(config, size)
    n_tr = n_tr or int(config.peak.get("n_tr", 4096))
    g_c = critical_coupling_of(model, config.branch)
    lo, hi = config.peak.get("bracket", [0.8, 1.3])

    chi = peak_objective(lambda g: evaluator(model.with_coupling(g), n_tr, "fidelity_susceptibility"))

    res = locate_peak(chi, (lo * g_c, hi * g_c), int(config.peak.get("scan_points", 41)), g_scale=g_c,
                      size_label=size)
    return res


def _tasks(config: SweepConfig, peaks: dict) -> list[tuple]:
    tasks = []
    sizes = config.sizes or [math.nan]
    for name in config.observables:
        for size in sizes:
            model, n_tr = size_params(config, size)
            g_c = None
            if config.sweep_axis is SweepAxis.COUPLING_G:
                if config.abscissa == "coupling_g":
                    coords = [(g, g) for g in config.grid]
                else:
                    g_c = critical_coupling_of(model, config.branch)
                    signed = _signed(config.grid, config.side)
                    if config.abscissa == "reduced_t":
                        coords = [(t, g_c * (1 - t)) for t in signed]
                    else:
                        g_m = peaks[size].g_m
                        coords = [(g_m - o * g_c, g_m - o * g_c) for o in signed]
                for i, (x, g) in enumerate(coords):
                    if g < 0:
                        raise ParameterError(f"grid point maps to negative coupling g={g}")
                    tasks.append((name, size, i, x, model.with_coupling(g), n_tr))
            else:
                g = critical_coupling_of(model, config.branch) if config.at_critical else model.coupling_g
                for i, v in enumerate(config.grid):
                    if config.sweep_axis is SweepAxis.STARK_U:
                        p, n = model.with_stark(v).with_coupling(g), n_tr
                    elif config.sweep_axis is SweepAxis.EFFECTIVE_SIZE:
                        p, n = model.with_stark(stark_u_for_size(v, config.branch, model.omega)).with_coupling(g), n_tr
                    else:
                        p, n = model.with_coupling(g), int(v)
                    tasks.append((name, size, i, v, p, n))
    return tasks


def _evaluate_task(task, cache_dir, chi_method, tol, policy):
    name, size, index, x, params, n_tr = task
    before = solve_count()
    ev = CachedEvaluator(Cache(cache_dir), chi_method, tol)
    res = PointResult(name, size, index, x, params.to_dict())
    try:
        if n_tr is not None:
            res.value = ev(params, n_tr, name)
            res.n_tr, res.converged = n_tr, True
        else:
            conv = converge_truncation(params, name, policy, evaluate=ev)
            res.value, res.n_tr, res.converged, res.residual = conv.value, conv.n_tr, True, conv.rel_change
    except RabiStarkError as exc:
        res.error = f"{type(exc).__name__}: {exc}"
        best = getattr(exc, "best", None)
        if isinstance(best, tuple) and best:
            res.value = float(best[-1])
    res.cache_keys = list(dict.fromkeys(ev.keys))
    res.solves = solve_count() - before
    res.hits, res.misses = ev.hits, ev.misses
    return res


def size_tag(config: SweepConfig, size: float) -> str:
    if math.isnan(size):
        return ""
    prefix = "L" if config.size_kind is SizeKind.EFFECTIVE_L else "N"
    text = str(int(size)) if float(size).is_integer() else fmt_float(size)
    return f"__{prefix}={text}"


def write_series_csv(path: Path, rows: Sequence[tuple], meta: dict | None = None):
    """Write one series with the ``# schema=1`` header; floats use 17 significant digits."""
    buf = io.StringIO()
    buf.write(f"# schema={SCHEMA_VERSION}\n")
    for k, v in (meta or {}).items():
        buf.write(f"# {k}={fmt_float(v) if isinstance(v, float) else v}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for x, y, n, conv, res in rows:
        writer.writerow([fmt_float(x), fmt_float(y), "" if n is None else int(n), "true" if conv else "false", fmt_float(res)])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    os.replace(tmp, path)


def read_series_csv(path: str | os.PathLike, include_failed: bool = False):
    """Return ``(SweepSeries, meta)``; rows with converged=false are skipped unless asked for."""
    meta = {}
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != f"# schema={SCHEMA_VERSION}":
        raise ParameterError(f"{path}: missing '# schema={SCHEMA_VERSION}' header")
    body = []
    for line in lines[1:]:
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            meta[k.strip()] = v.strip()
        elif line.strip():
            body.append(line)
    reader = csv.DictReader(body)
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ParameterError(f"{path}: unexpected columns {reader.fieldnames}")
    xs, ys = [], []
    for row in reader:
        if row["converged"] != "true" and not include_failed:
            continue
        xs.append(float(row["abscissa"]))
        ys.append(float(row["value"]))
    size = float(meta.get("size_label", "nan"))
    kind = meta.get("size_kind") or SizeKind.EFFECTIVE_L.value
    abscissa = meta.get("abscissa_kind", AbscissaKind.COUPLING_G.value)
    series = SweepSeries(size, kind, np.asarray(xs), np.asarray(ys), abscissa)
    return series, meta


def resolve_cache_dir(config: SweepConfig, cache_dir) -> Path:
    if cache_dir:
        return Path(cache_dir)
    env = os.environ.get(CACHE_ENV)
    return Path(env) if env else Path(config.output_dir) / "cache"


def sweep_peaks(config: SweepConfig, evaluator) -> dict:
    return {size: _peak_for(config, size, evaluator) for size in (config.sizes or [math.nan])}


def run_sweep(config: SweepConfig, cache_dir: str | os.PathLike | None = None) -> SweepResult:
    """Evaluate every grid point cache-first and write CSVs plus ``manifest.json``.

    Output files depend only on the configuration: points are gathered by
    grid index before writing, so worker scheduling cannot reorder them.
    """
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cdir = resolve_cache_dir(config, cache_dir)
    cache = Cache(cdir)
    start_solves = solve_count()
    main_ev = CachedEvaluator(cache, config.chi_method, config.solver_tol)

    peaks = {}
    if config.abscissa == "peak_offset":
        peaks = sweep_peaks(config, main_ev)
    tasks = _tasks(config, peaks)
    args = (str(cdir), config.chi_method, config.solver_tol, config.convergence)
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_evaluate_task, tasks, *[[a] * len(tasks) for a in args]))
    else:
        results = [_evaluate_task(t, *args) for t in tasks]

    solves = solve_count() - start_solves
    if config.workers > 1 and len(tasks) > 1:
        solves += sum(r.solves for r in results)
    hits = main_ev.hits + sum(r.hits for r in results)
    misses = main_ev.misses + sum(r.misses for r in results)

    files = []
    abscissa_kind = "reduced_t" if config.abscissa == "reduced_t" else "coupling_g"
    sizes = config.sizes or [math.nan]
    for name in config.observables:
        for size in sizes:
            rows = sorted((r for r in results if r.observable == name and
                           (r.size_label == size or (math.isnan(size) and math.isnan(r.size_label)))),
                          key=lambda r: r.index)
            meta = {
                "observable": name,
                "size_label": size,
                "size_kind": config.size_kind.value if config.size_kind else "",
                "abscissa_kind": abscissa_kind,
                "sweep_axis": config.sweep_axis.value,
                "chi_method": config.chi_method,
            }
            if size in peaks:
                meta["g_m"] = peaks[size].g_m
                meta["chi_max"] = peaks[size].chi_max
            path = out / f"{name}{size_tag(config, size)}.csv"
            write_series_csv(path, [(r.abscissa, r.value, r.n_tr, r.error is None, r.residual) for r in rows], meta)
            files.append(path)

    manifest = {
        "schema": SCHEMA_VERSION,
        "code_version": __version__,
        "config": config.to_dict(),
        "files": [p.name for p in files],
        "peaks": {fmt_float(k) if not math.isnan(k) else "nan": v.to_dict() for k, v in peaks.items()},
        "points": [r.manifest_entry() for r in sorted(results, key=lambda r: (r.observable, _size_order(r), r.index))],
        "failed": sum(1 for r in results if r.error),
    }
    manifest_path = out / "manifest.json"
    tmp = manifest_path.with_suffix(".json.tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(manifest), fh, indent=1, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, manifest_path)
    log.info("sweep %s: %d points, %d eigensolves, %d cache hits, %d misses",
             config.name, len(results), solves, hits, misses)
    for r in results:
        if r.error:
            log.error("point %s[%s] #%d failed: %s", r.observable, r.size_label, r.index, r.error)
    return SweepResult(files, manifest_path, results, peaks, solves, hits, misses)


def _size_order(r):
    return -math.inf if math.isnan(r.size_label) else r.size_label


def _jsonable(obj):
    """Replace non-finite floats by strings so the manifest stays strict JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else repr(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj

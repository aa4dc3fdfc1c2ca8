"""Low-lying eigenpairs, gaps, ground-energy derivatives and truncation control."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as spla

from .errors import ParameterError, SolverConvergenceError
from .model import FockTruncation, ModelParams, ParityChain, SparseOperator, parity_chains

__all__ = [
    "EigenSolution",
    "ConvergencePolicy",
    "ConvergedValue",
    "DerivativeCurve",
    "DENSE_LIMIT",
    "lowest_eigenpairs",
    "solve_model",
    "energy_gap",
    "stencil_derivatives",
    "ground_energy_derivatives",
    "converge_truncation",
    "OBSERVABLE_IDS",
    "solve_count",
]

log = logging.getLogger(__name__)

DENSE_LIMIT = 256
"""Operators up to this dimension are diagonalized densely."""

OBSERVABLE_IDS = (
    "ground_energy",
    "gap",
    "mean_photon",
    "order_parameter",
    "position_variance",
    "fidelity_susceptibility",
    "parity",
)

_solves = 0


def solve_count() -> int:
    """Number of eigensolves performed in this process (diagnostics only)."""
    return _solves


def _bump():
    global _solves
    _solves += 1


@dataclass
class EigenSolution:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns
    residuals: np.ndarray
    n_tr_used: int | None = None
    parities: np.ndarray | None = None

    def __len__(self):
        return len(self.eigenvalues)

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def ground_state(self) -> np.ndarray:
        return self.eigenvectors[:, 0]


@dataclass(frozen=True)
class ConvergencePolicy:
    rel_tol: float = 1e-6
    n_tr_start: int = 64
    growth_factor: float = 2.0
    n_tr_cap: int = 32768

    def __post_init__(self):
        if self.growth_factor <= 1:
            raise ParameterError("growth_factor must exceed 1")
        if self.n_tr_start < 2:
            raise ParameterError("n_tr_start must be at least 2")
        if self.rel_tol <= 0:
            raise ParameterError("rel_tol must be positive")
        if self.n_tr_cap < self.n_tr_start:
            raise ParameterError("n_tr_cap must be >= n_tr_start")

    def ladder(self):
        n = self.n_tr_start
        while True:
            yield n
            if n >= self.n_tr_cap:
                return
            n = min(self.n_tr_cap, max(n + 1, math.ceil(self.growth_factor * n)))

    def to_dict(self) -> dict:
        return {
            "rel_tol": self.rel_tol,
            "n_tr_start": self.n_tr_start,
            "growth_factor": self.growth_factor,
            "n_tr_cap": self.n_tr_cap,
        }


@dataclass(frozen=True)
class ConvergedValue:
    value: float
    n_tr: int
    rel_change: float
    history: tuple = field(default=(), compare=False)


@dataclass
class DerivativeCurve:
    """Ground energy and its derivatives on a uniform grid.

    ``d1`` is NaN on the two end points and ``d2`` on the two outermost
    points on each side, where the stencils do not fit.
    """

    grid: np.ndarray
    e0: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    step: float

    def interior_min_d2(self, lo=None, hi=None):
        mask = np.isfinite(self.d2)
        if lo is not None:
            mask &= self.grid >= lo
        if hi is not None:
            mask &= self.grid <= hi
        if not mask.any():
            raise ParameterError("no interior second-derivative points in range")
        i = np.flatnonzero(mask)[np.argmin(self.d2[mask])]
        return float(self.grid[i]), float(self.d2[i])


def _fix_gauge(vecs: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude component of every column positive."""
    if vecs.size == 0:
        return vecs
    rows = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[rows, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def _residuals(matvec, values, vecs):
    out = np.empty(len(values))
    for i, lam in enumerate(values):
        v = vecs[:, i]
        out[i] = np.linalg.norm(matvec(v) - lam * v)
    return out


def lowest_eigenpairs(h: SparseOperator, k: int, tol: float = 1e-10, seed: int = 0,
                      maxiter: int | None = None) -> EigenSolution:
    """The ``k`` algebraically smallest eigenpairs of a real symmetric operator.

    Dense LAPACK below :data:`DENSE_LIMIT`, implicitly restarted Lanczos
    (ARPACK) above it, started from a seeded random vector.  Residuals
    larger than ``tol * max(1, ||H||_1)`` are reported as a failure.
    """
    if not 1 <= k <= h.dim:
        raise ParameterError(f"k must be in [1, {h.dim}], got {k}")
    if tol <= 0:
        raise ParameterError("tol must be positive")
    _bump()
    csr = h.to_csr()
    scale = max(1.0, float(abs(csr).sum(axis=0).max()))
    if h.dim <= DENSE_LIMIT or k >= h.dim - 1:
        values, vecs = la.eigh(csr.toarray(), subset_by_index=(0, k - 1))
    else:
        v0 = np.random.default_rng(seed).standard_normal(h.dim)
        try:
            values, vecs = spla.eigsh(csr, k=k, which="SA", tol=tol, v0=v0,
                                      maxiter=maxiter, ncv=min(h.dim, max(2 * k + 1, 40)))
        except spla.ArpackNoConvergence as exc:
            res = _residuals(csr.dot, exc.eigenvalues, exc.eigenvectors) if len(exc.eigenvalues) else None
            best = float(res.min()) if res is not None and res.size else None
            raise SolverConvergenceError(f"Lanczos did not converge for k={k}", best=best) from exc
        order = np.argsort(values)
        values, vecs = values[order], vecs[:, order]
    vecs = _fix_gauge(vecs)
    res = _residuals(csr.dot, values, vecs)
    if res.max() > tol * scale:
        raise SolverConvergenceError(
            f"eigenpair residual {res.max():.3e} exceeds {tol * scale:.3e}", best=float(res.min())
        )
    return EigenSolution(np.asarray(values), vecs, res)


def _chain_matvec(chain: ParityChain):
    d, e = chain.diag, chain.offdiag

    def mv(v):
        out = d * v
        out[:-1] += e * v[1:]
        out[1:] += e * v[:-1]
        return out

    return mv


# Bisection tolerance for the chain eigenvalues.  LAPACK's default (eps * ||T||_1)
# grows with n_tr and swamps near-critical gaps; a tiny absolute tolerance lets
# bisection run to relative machine precision instead.
_BISECTION_TOL = 1e-300


def _solve_chain(chain: ParityChain, k: int):
    size = chain.diag.size
    k = min(k, size)
    if size == 1:
        return chain.diag.copy(), np.ones((1, 1))
    if k >= size:
        return la.eigh_tridiagonal(chain.diag, chain.offdiag)
    return la.eigh_tridiagonal(chain.diag, chain.offdiag, select="i", select_range=(0, k - 1),
                               tol=_BISECTION_TOL)


def solve_model(params: ModelParams, trunc: FockTruncation, k: int = 2, parity: int | None = None,
                tol: float = 1e-9, embed: bool = True) -> EigenSolution:
    """Lowest eigenpairs of the model using its parity-resolved tridiagonal form.

    With ``parity`` set only that sector is searched.  Eigenvectors are
    returned in the full ``2*(n_tr+1)`` basis unless ``embed`` is False, in
    which case they stay in chain coordinates (photon-number order).
    """
    if k < 1:
        raise ParameterError("k must be positive")
    chains = parity_chains(params, trunc)
    if parity is not None:
        if parity not in (1, -1):
            raise ParameterError("parity must be +1 or -1")
        chains = tuple(c for c in chains if c.parity == parity)
    if embed is False and len(chains) != 1:
        raise ParameterError("chain coordinates need a single parity sector")
    _bump()

    vals, vecs, pars, res = [], [], [], []
    for chain in chains:
        w, v = _solve_chain(chain, k)
        mv = _chain_matvec(chain)
        for i in range(len(w)):
            col = v[:, i]
            vals.append(w[i])
            pars.append(chain.parity)
            res.append(np.linalg.norm(mv(col) - w[i] * col))
            if embed:
                full = np.zeros(trunc.dim)
                full[chain.index] = col
                vecs.append(full)
            else:
                vecs.append(col)
    order = np.argsort(np.asarray(vals), kind="stable")[:k]
    values = np.asarray(vals)[order]
    vec_mat = _fix_gauge(np.column_stack([vecs[i] for i in order]))
    residuals = np.asarray(res)[order]
    scale = max(1.0, float(np.abs(chains[0].diag).max() + 2 * np.abs(chains[0].offdiag).max(initial=0)))
    if residuals.max() > tol * scale:
        raise SolverConvergenceError(
            f"tridiagonal eigenpair residual {residuals.max():.3e} exceeds {tol * scale:.3e}",
            best=float(residuals.min()),
        )
    return EigenSolution(values, vec_mat, residuals, trunc.n_tr, np.asarray(pars)[order])


def energy_gap(params: ModelParams, trunc: FockTruncation) -> float:
    sol = solve_model(params, trunc, k=2)
    return max(0.0, float(sol.eigenvalues[1] - sol.eigenvalues[0]))


def stencil_derivatives(grid: Sequence[float], energies: Sequence[float]) -> DerivativeCurve:
    """Central first derivative and five-point second derivative on a uniform grid."""
    grid = np.asarray(grid, dtype=float)
    e0 = np.asarray(energies, dtype=float)
    if grid.ndim != 1 or grid.shape != e0.shape or grid.size < 5:
        raise ParameterError("need matching 1-d grid and energies with at least 5 points")
    steps = np.diff(grid)
    h = float(steps.mean())
    if h <= 0 or np.max(np.abs(steps - h)) > 1e-9 * abs(h) + 1e-12 * np.abs(grid).max():
        raise ParameterError("grid must be ascending and uniformly spaced")
    d1 = np.full_like(e0, np.nan)
    d2 = np.full_like(e0, np.nan)
    d1[1:-1] = (e0[2:] - e0[:-2]) / (2 * h)
    # written as differences from the centre so constants cancel exactly
    c = e0[2:-2]
    near = (e0[3:-1] - c) + (e0[1:-3] - c)
    far = (e0[4:] - c) + (e0[:-4] - c)
    d2[2:-2] = (16 * near - far) / (12 * h * h)
    return DerivativeCurve(grid, e0, d1, d2, h)


def ground_energy_derivatives(params: ModelParams, grid: Sequence[float],
                              policy: ConvergencePolicy | None = None,
                              evaluate: Callable | None = None) -> DerivativeCurve:
    """E0(g) over ``grid`` (converged point by point) and its stencil derivatives."""
    policy = policy or ConvergencePolicy()
    energies = []
    for g in grid:
        conv = converge_truncation(params.with_coupling(float(g)), "ground_energy", policy, evaluate=evaluate)
        energies.append(conv.value)
    return stencil_derivatives(grid, energies)


def _default_evaluate(params, n_tr, observable):
    from .observables import evaluate

    return evaluate(params, n_tr, observable).value


def converge_truncation(params: ModelParams, observable: str, policy: ConvergencePolicy | None = None,
                        evaluate: Callable | None = None) -> ConvergedValue:
    """Grow n_tr geometrically until the observable stops changing.

    ``evaluate(params, n_tr, observable) -> float`` defaults to
    :func:`rabistark.observables.evaluate`; the runner swaps in a cached one.
    """
    policy = policy or ConvergencePolicy()
    evaluate = evaluate or _default_evaluate
    history = []
    prev = None
    for n_tr in policy.ladder():
        value = float(evaluate(params, n_tr, observable))
        history.append((n_tr, value))
        if prev is not None:
            change = abs(value - prev)
            rel = change / abs(value) if value != 0 else change
            if change <= policy.rel_tol * abs(value) or (value == 0 and change == 0):
                log.debug("%s converged at n_tr=%d (rel change %.2e)", observable, n_tr, rel)
                return ConvergedValue(value, n_tr, rel, tuple(history))
        prev = value
    last = tuple(v for _, v in history[-2:])
    raise SolverConvergenceError(
        f"{observable} not converged at n_tr cap {policy.n_tr_cap} for {params}; last values {last}",
        best=last,
    )

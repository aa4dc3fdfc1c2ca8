"""Model parameters and truncated-Fock-space operators.

Basis convention: the state |n, s> (photon number n, spin s) sits at index
``2*n + s`` with ``s = 0`` for sigma_z = +1 (up) and ``s = 1`` for
sigma_z = -1 (down).  All matrix elements are real.

The Hamiltonian

    H = (delta/2 + U a^dag a) sigma_z + omega a^dag a + g (a^dag + a) sigma_x

conserves the parity P = sigma_z (-1)^{a^dag a}.  Inside each parity sector
the coupling only links |n, s_n> to |n+1, s_{n+1}>, so every sector is a
tridiagonal chain indexed by the photon number.  :func:`parity_chains`
exposes that structure for the fast eigensolver path.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .errors import ParameterError

__all__ = [
    "ModelKind",
    "Branch",
    "ModelParams",
    "FockTruncation",
    "SparseOperator",
    "CriticalData",
    "ParityChain",
    "build_hamiltonian",
    "build_coupling_operator",
    "build_parity_operator",
    "parity_chains",
    "critical_coupling",
    "critical_point",
    "effective_size",
    "reference_coupling",
    "stark_u_for_size",
]


class ModelKind(str, enum.Enum):
    RSM = "RSM"
    QRM = "QRM"


class Branch(str, enum.Enum):
    PLUS = "plus"
    MINUS = "minus"


def _finite(name, value):
    value = float(value)
    if not math.isfinite(value):
        raise ParameterError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class ModelParams:
    """Physical configuration of one computation.

    Energies are absolute; with the default ``omega = 1`` they are in units
    of the cavity frequency.  ``stark_u`` is ignored for the QRM.
    """

    kind: ModelKind
    delta: float
    omega: float = 1.0
    stark_u: float = 0.0
    coupling_g: float = 0.0

    def __post_init__(self):
        try:
            kind = ModelKind(self.kind)
        except ValueError:
            raise ParameterError(f"unknown model kind {self.kind!r}") from None
        object.__setattr__(self, "kind", kind)
        for name in ("delta", "omega", "stark_u", "coupling_g"):
            object.__setattr__(self, name, _finite(name, getattr(self, name)))
        if self.omega <= 0:
            raise ParameterError(f"omega must be positive, got {self.omega}")
        if self.coupling_g < 0:
            raise ParameterError(f"coupling_g must be nonnegative, got {self.coupling_g}")

    @property
    def u(self) -> float:
        """Stark coupling actually entering the Hamiltonian (0 for the QRM)."""
        return 0.0 if self.kind is ModelKind.QRM else self.stark_u

    def with_coupling(self, g: float) -> "ModelParams":
        return replace(self, coupling_g=g)

    def with_stark(self, u: float) -> "ModelParams":
        return replace(self, stark_u=u)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "delta": self.delta,
            "omega": self.omega,
            "stark_u": self.stark_u,
            "coupling_g": self.coupling_g,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        return cls(
            kind=data.get("kind", "RSM"),
            delta=data["delta"],
            omega=data.get("omega", 1.0),
            stark_u=data.get("stark_u", 0.0),
            coupling_g=data.get("coupling_g", 0.0),
        )


@dataclass(frozen=True)
class FockTruncation:
    """Keeps photon numbers 0..n_tr."""

    n_tr: int

    def __post_init__(self):
        if isinstance(self.n_tr, bool) or int(self.n_tr) != self.n_tr or self.n_tr < 1:
            raise ParameterError(f"n_tr must be a positive integer, got {self.n_tr!r}")
        object.__setattr__(self, "n_tr", int(self.n_tr))

    @property
    def dim(self) -> int:
        return 2 * (self.n_tr + 1)


@dataclass(frozen=True)
class SparseOperator:
    """Real symmetric operator stored as coordinate-format triplets."""

    dim: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        if not (rows.shape == cols.shape == values.shape):
            raise ParameterError("rows, cols and values must have equal length")
        if rows.size and (rows.min() < 0 or cols.min() < 0 or max(rows.max(), cols.max()) >= self.dim):
            raise ParameterError("operator entry outside [0, dim)")
        for arr in (rows, cols, values):
            arr.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "values", values)

    @property
    def entries(self):
        return list(zip(self.rows.tolist(), self.cols.tolist(), self.values.tolist()))

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    def to_csr(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.values, (self.rows, self.cols)), shape=(self.dim, self.dim))

    def to_dense(self) -> np.ndarray:
        return self.to_csr().toarray()

    def element(self, row: int, col: int) -> float:
        mask = (self.rows == row) & (self.cols == col)
        return float(self.values[mask].sum())

    def matvec(self, vec: np.ndarray) -> np.ndarray:
        return self.to_csr() @ vec

    def is_symmetric(self) -> bool:
        csr = self.to_csr()
        return (csr - csr.T).count_nonzero() == 0


@dataclass(frozen=True)
class CriticalData:
    g_c: float
    e_c: float
    branch: Branch


@dataclass(frozen=True)
class ParityChain:
    """One parity sector written as a tridiagonal matrix over photon number.

    ``index[n]`` is the position of the chain's n-th state in the full basis
    and ``spin[n]`` its sigma_z eigenvalue.
    """

    parity: int
    diag: np.ndarray
    offdiag: np.ndarray
    spin: np.ndarray
    index: np.ndarray


def _diagonal(params: ModelParams, n: np.ndarray, sz: np.ndarray) -> np.ndarray:
    return sz * (0.5 * params.delta + params.u * n) + params.omega * n


def build_hamiltonian(params: ModelParams, trunc: FockTruncation) -> SparseOperator:
    n = np.arange(trunc.n_tr + 1, dtype=np.float64)
    dim = trunc.dim
    diag = np.empty(dim)
    diag[0::2] = _diagonal(params, n, np.ones_like(n))
    diag[1::2] = _diagonal(params, n, -np.ones_like(n))

    coupling = build_coupling_operator(trunc)
    g = params.coupling_g
    idx = np.arange(dim)
    if g == 0.0:
        rows, cols, vals = idx, idx, diag
    else:
        rows = np.concatenate([idx, coupling.rows])
        cols = np.concatenate([idx, coupling.cols])
        vals = np.concatenate([diag, g * coupling.values])
    return SparseOperator(dim, rows, cols, vals)


def build_coupling_operator(trunc: FockTruncation) -> SparseOperator:
    """(a^dag + a) sigma_x, the derivative of H with respect to g."""
    m = np.arange(trunc.n_tr, dtype=np.int64)
    amp = np.sqrt(m + 1.0)
    # |m, up> <-> |m+1, down>  and  |m, down> <-> |m+1, up>
    upper_r = np.concatenate([2 * m, 2 * m + 1])
    upper_c = np.concatenate([2 * (m + 1) + 1, 2 * (m + 1)])
    rows = np.concatenate([upper_r, upper_c])
    cols = np.concatenate([upper_c, upper_r])
    vals = np.tile(amp, 4)
    return SparseOperator(trunc.dim, rows, cols, vals)


def build_parity_operator(trunc: FockTruncation) -> SparseOperator:
    n = np.arange(trunc.n_tr + 1)
    sign = np.where(n % 2 == 0, 1.0, -1.0)
    vals = np.empty(trunc.dim)
    vals[0::2] = sign
    vals[1::2] = -sign
    idx = np.arange(trunc.dim)
    return SparseOperator(trunc.dim, idx, idx, vals)


def parity_chains(params: ModelParams, trunc: FockTruncation) -> tuple[ParityChain, ParityChain]:
    """Both parity sectors of H as tridiagonal chains, P = +1 first."""
    n = np.arange(trunc.n_tr + 1)
    nf = n.astype(np.float64)
    offdiag = params.coupling_g * np.sqrt(nf[1:])
    chains = []
    for parity in (1, -1):
        sz = parity * np.where(n % 2 == 0, 1.0, -1.0)
        index = 2 * n + (sz < 0).astype(np.int64)
        chains.append(
            ParityChain(
                parity=parity,
                diag=_diagonal(params, nf, sz),
                offdiag=offdiag,
                spin=sz,
                index=index,
            )
        )
    return chains[0], chains[1]


def critical_coupling(delta: float, branch: Branch | str = Branch.PLUS, omega: float = 1.0) -> float:
    """Gap-closing coupling of the RSM at U = +omega (plus) or U = -omega (minus)."""
    branch = Branch(branch)
    sign = 1.0 if branch is Branch.PLUS else -1.0
    radicand = omega * (omega - sign * delta) / 2.0
    if radicand <= 0:
        raise ParameterError(
            f"no critical point on the {branch.value} branch for delta={delta}, omega={omega}"
        )
    return math.sqrt(radicand)


def _branch_of(params: ModelParams) -> Branch:
    return Branch.MINUS if params.stark_u < 0 else Branch.PLUS


def critical_point(params: ModelParams) -> CriticalData:
    if params.kind is ModelKind.QRM:
        if params.delta <= 0:
            raise ParameterError("QRM critical point needs delta > 0")
        # the QRM has no collapse energy
        return CriticalData(math.sqrt(params.omega * params.delta) / 2.0, math.nan, Branch.PLUS)
    if not math.isclose(abs(params.stark_u), params.omega, rel_tol=0, abs_tol=1e-12 * params.omega):
        raise ParameterError(
            f"critical point is defined for |U| = omega only, got U={params.stark_u}"
        )
    branch = _branch_of(params)
    g_c = critical_coupling(params.delta, branch, params.omega)
    sign = 1.0 if branch is Branch.PLUS else -1.0
    g = params.coupling_g
    e_c = -sign * params.delta / 2.0 - 2.0 * g * g / params.omega
    return CriticalData(g_c, e_c, branch)


def effective_size(params: ModelParams) -> float:
    if params.kind is ModelKind.QRM:
        if params.delta <= 0:
            raise ParameterError("QRM effective size needs delta > 0")
        return params.delta / params.omega
    ratio = params.stark_u / params.omega
    if abs(ratio) >= 1.0:
        raise ParameterError(f"effective size diverges for |U| >= omega (U={params.stark_u})")
    return 1.0 / (1.0 - abs(ratio))


def stark_u_for_size(size: float, branch: Branch | str = Branch.PLUS, omega: float = 1.0) -> float:
    """Inverse of :func:`effective_size` on the given branch."""
    if size < 1.0:
        raise ParameterError(f"effective size must be >= 1, got {size}")
    sign = 1.0 if Branch(branch) is Branch.PLUS else -1.0
    return sign * omega * (1.0 - 1.0 / size)


def reference_coupling(params: ModelParams) -> float:
    """Natural coupling scale used to size finite-difference steps.

    The critical coupling of the relevant branch when one exists, otherwise
    the cavity frequency.
    """
    try:
        if params.kind is ModelKind.QRM:
            return critical_point(params).g_c
        return critical_coupling(params.delta, _branch_of(params), params.omega)
    except ParameterError:
        return params.omega

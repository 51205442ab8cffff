"""Finite-dimensional states, operators and the linear algebra they need.

Conventions used everywhere in this package:

* Composite indices are row-major over the factor list, first factor
  slowest.  For a layout ``(3, N)`` the basis vector ``|a, n>`` sits at
  index ``a * N + n``.
* The three-level atomic basis is ordered ``(|g>, |e>, |i>)`` = indices
  ``(0, 1, 2)``; two-level (qubit) systems use ``(|g>, |e>) = (0, 1)``.
* All matrices are dense ``complex128``; total dimensions stay small
  (< ~100), so sparse machinery is deliberately avoided.

All objects are immutable after construction (the wrapped arrays are
marked read-only) and can be shared freely between trajectory workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, LayoutError, ValidationError

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-9
PSD_FLOOR = -1e-8
NORM_TOL = 1e-10


@dataclass(frozen=True)
class HilbertLayout:
    """Ordered subsystem dimensions of a tensor-product space."""

    factors: tuple[int, ...]

    def __post_init__(self):
        factors = tuple(int(f) for f in self.factors)
        if not factors:
            raise DimensionError("layout needs at least one factor")
        if any(f < 2 for f in factors):
            raise DimensionError(f"every factor dimension must be >= 2, got {factors}")
        object.__setattr__(self, "factors", factors)

    @property
    def total_dim(self) -> int:
        return math.prod(self.factors)

    @property
    def n_factors(self) -> int:
        return len(self.factors)

    def index_of(self, indices) -> int:
        """Composite (row-major) index of a product basis state."""
        if len(indices) != self.n_factors:
            raise LayoutError(f"expected {self.n_factors} indices, got {len(indices)}")
        idx = 0
        for k, d in zip(indices, self.factors):
            if not 0 <= k < d:
                raise LayoutError(f"basis index {k} out of range for factor dim {d}")
            idx = idx * d + k
        return idx


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.complex128, order="C", copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class StateVector:
    """Pure state |psi>, possibly unnormalised (``normalized=False``)."""

    layout: HilbertLayout
    amplitudes: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        amps = _readonly(np.asarray(self.amplitudes).reshape(-1))
        if amps.shape[0] != self.layout.total_dim:
            raise LayoutError(
                f"amplitude length {amps.shape[0]} != layout dim {self.layout.total_dim}"
            )
        if self.normalized:
            n2 = float(np.real(np.vdot(amps, amps)))
            if abs(n2 - 1.0) > NORM_TOL:
                raise ValidationError(f"|<psi|psi> - 1| = {abs(n2 - 1.0):.3e} exceeds {NORM_TOL}")
        object.__setattr__(self, "amplitudes", amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def unit(self) -> "StateVector":
        """Normalised copy of this state."""
        return StateVector(self.layout, self.amplitudes / self.norm(), normalized=True)

    def projector(self) -> "DensityMatrix":
        psi = self.amplitudes if self.normalized else self.amplitudes / self.norm()
        return DensityMatrix(self.layout, np.outer(psi, psi.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Mixed state rho; Hermitian, unit trace, positive up to a numerical floor."""

    layout: HilbertLayout
    entries: np.ndarray

    def __post_init__(self):
        d = self.layout.total_dim
        rho = _readonly(np.asarray(self.entries))
        if rho.shape != (d, d):
            raise LayoutError(f"entries shape {rho.shape} != ({d}, {d})")
        herm = float(np.max(np.abs(rho - rho.conj().T)))
        if herm > HERMITICITY_TOL:
            raise ValidationError(f"Hermiticity defect {herm:.3e} exceeds {HERMITICITY_TOL}")
        tr = complex(np.trace(rho))
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValidationError(f"|tr rho - 1| = {abs(tr - 1.0):.3e} exceeds {TRACE_TOL}")
        lo = float(np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))))
        if lo < PSD_FLOOR:
            raise ValidationError(f"min eigenvalue {lo:.3e} below floor {PSD_FLOOR}")
        object.__setattr__(self, "entries", rho)

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.entries)).copy()


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Complex square matrix acting on a declared layout."""

    layout: HilbertLayout
    entries: np.ndarray
    label: str = ""

    def __post_init__(self):
        d = self.layout.total_dim
        m = _readonly(np.asarray(self.entries))
        if m.shape != (d, d):
            raise LayoutError(f"entries shape {m.shape} != ({d}, {d})")
        object.__setattr__(self, "entries", m)

    def dag(self) -> "OperatorMatrix":
        return OperatorMatrix(self.layout, self.entries.conj().T, label=self.label + "^dag")

    def is_hermitian(self, tol: float = HERMITICITY_TOL) -> bool:
        return float(np.max(np.abs(self.entries - self.entries.conj().T))) <= tol

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        if self.layout != other.layout:
            raise LayoutError("operator product across different layouts")
        return OperatorMatrix(self.layout, self.entries @ other.entries)


# ---------------------------------------------------------------------------
# constructors

def annihilation_op(n_trunc: int) -> OperatorMatrix:
    """Truncated bosonic annihilation operator, <m-1|a|m> = sqrt(m)."""
    if n_trunc < 2:
        raise DimensionError(f"n_trunc must be >= 2, got {n_trunc}")
    a = np.diag(np.sqrt(np.arange(1, n_trunc, dtype=float)), 1).astype(np.complex128)
    return OperatorMatrix(HilbertLayout((n_trunc,)), a, label="a")


def number_op(n_trunc: int) -> OperatorMatrix:
    if n_trunc < 2:
        raise DimensionError(f"n_trunc must be >= 2, got {n_trunc}")
    n = np.diag(np.arange(n_trunc, dtype=float)).astype(np.complex128)
    return OperatorMatrix(HilbertLayout((n_trunc,)), n, label="n")


def identity_op(layout: HilbertLayout) -> OperatorMatrix:
    return OperatorMatrix(layout, np.eye(layout.total_dim, dtype=np.complex128), label="I")


def transition_op(dim: int, to_level: int, from_level: int) -> OperatorMatrix:
    """|to><from| on a single dim-``dim`` factor (e.g. sigma_- = |g><e|)."""
    if dim < 2:
        raise DimensionError(f"dim must be >= 2, got {dim}")
    m = np.zeros((dim, dim), dtype=np.complex128)
    m[to_level, from_level] = 1.0
    return OperatorMatrix(HilbertLayout((dim,)), m, label=f"|{to_level}><{from_level}|")


def basis_state(layout: HilbertLayout, indices) -> StateVector:
    amps = np.zeros(layout.total_dim, dtype=np.complex128)
    amps[layout.index_of(tuple(indices))] = 1.0
    return StateVector(layout, amps)


def fock_state(n_trunc: int, n: int) -> StateVector:
    return basis_state(HilbertLayout((n_trunc,)), (n,))


# ---------------------------------------------------------------------------
# composition and reduction

def tensor_product(a, b):
    """Kronecker composition; output layout concatenates the factor lists."""
    if isinstance(a, OperatorMatrix) and isinstance(b, OperatorMatrix):
        layout = HilbertLayout(a.layout.factors + b.layout.factors)
        label = f"{a.label}(x){b.label}" if (a.label or b.label) else ""
        return OperatorMatrix(layout, np.kron(a.entries, b.entries), label=label)
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        layout = HilbertLayout(a.layout.factors + b.layout.factors)
        return StateVector(
            layout,
            np.kron(a.amplitudes, b.amplitudes),
            normalized=a.normalized and b.normalized,
        )
    raise TypeError("tensor_product needs two OperatorMatrix or two StateVector inputs")


def partial_trace(rho: DensityMatrix, keep: int) -> DensityMatrix:
    """Reduced state on factor ``keep``; all other factors traced out."""
    factors = rho.layout.factors
    if not 0 <= keep < len(factors):
        raise LayoutError(f"keep={keep} does not index a factor of {factors}")
    reduced = partial_trace_entries(rho.entries, factors, keep)
    return DensityMatrix(HilbertLayout((factors[keep],)), reduced)


def partial_trace_entries(entries: np.ndarray, factors, keep: int) -> np.ndarray:
    """Partial trace on a raw matrix (no trace-one validation of the result)."""
    n = len(factors)
    t = np.asarray(entries).reshape(*factors, *factors)
    # einsum subscripts: traced factors share a letter on both sides
    letters = "abcdefghijkl"
    row = []
    col = []
    for k in range(n):
        if k == keep:
            row.append(letters[2 * n])
            col.append(letters[2 * n + 1])
        else:
            row.append(letters[k])
            col.append(letters[k])
    sub = "".join(row) + "".join(col) + "->" + letters[2 * n] + letters[2 * n + 1]
    return np.einsum(sub, t)


# ---------------------------------------------------------------------------
# scalar quantities

def expectation(state, op: OperatorMatrix) -> complex:
    """<O> = tr(rho O), or <psi|O|psi> for a pure state."""
    if isinstance(state, StateVector):
        if state.layout != op.layout:
            raise LayoutError("state and operator layouts differ")
        psi = state.amplitudes
        val = np.vdot(psi, op.entries @ psi)
        if not state.normalized:
            val /= np.real(np.vdot(psi, psi))
        return complex(val)
    if isinstance(state, DensityMatrix):
        if state.layout != op.layout:
            raise LayoutError("state and operator layouts differ")
        return complex(np.trace(state.entries @ op.entries))
    raise TypeError(f"unsupported state type {type(state)}")


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """(1/2) tr|rho - sigma| from the eigenvalues of the difference."""
    if rho.layout != sigma.layout:
        raise LayoutError("states live on different layouts")
    return trace_distance_entries(rho.entries, sigma.entries)


def trace_distance_entries(a: np.ndarray, b: np.ndarray) -> float:
    diff = a - b
    diff = 0.5 * (diff + diff.conj().T)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))

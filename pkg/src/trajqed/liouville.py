"""Lindblad generator and deterministic fixed-step time integration.

Models are constructed in the rotating (interaction) frame: free
frequencies are removed before building the Hamiltonian, so only
detunings and couplings appear.  The integrator is a classical
fixed-step RK4 with per-step re-Hermitisation; no adaptivity, so runs
are bit-reproducible across platforms for a given step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import LayoutError, StepSizeError, ValidationError
from .qstate import DensityMatrix, HilbertLayout, OperatorMatrix

TRACE_DRIFT_TOL = 1e-6
GRID_ALIGN_TOL = 1e-9
STIFFNESS_FACTOR = 0.1


@dataclass(frozen=True, eq=False)
class LindbladModel:
    """Hamiltonian (hbar = 1, angular-frequency units) plus rate/jump channels."""

    hamiltonian: OperatorMatrix
    channels: tuple

    def __post_init__(self):
        if not self.hamiltonian.is_hermitian():
            raise ValidationError("Hamiltonian is not Hermitian to 1e-10")
        chans = tuple((float(rate), op) for rate, op in self.channels)
        for rate, op in chans:
            if rate < 0.0:
                raise ValidationError(f"negative channel rate {rate}")
            if op.layout != self.hamiltonian.layout:
                raise LayoutError("channel operator layout differs from Hamiltonian")
        object.__setattr__(self, "channels", chans)

    @property
    def layout(self) -> HilbertLayout:
        return self.hamiltonian.layout

    def stiffness(self) -> float:
        """max(rates, spectral norm of H); bounds the usable step size."""
        rates = [rate for rate, _ in self.channels]
        h_norm = float(np.max(np.abs(np.linalg.eigvalsh(self.hamiltonian.entries))))
        return max(rates + [h_norm, 0.0])

    def drift_and_jumps(self):
        """A = -iH - (1/2) sum gamma c^dag c and the sqrt(gamma)-scaled jumps."""
        d = self.layout.total_dim
        drift = -1j * self.hamiltonian.entries.astype(np.complex128)
        jumps = []
        for rate, op in self.channels:
            if rate == 0.0:
                continue
            c = op.entries
            drift = drift - 0.5 * rate * (c.conj().T @ c)
            jumps.append(np.sqrt(rate) * c)
        stack = np.array(jumps, dtype=np.complex128) if jumps else np.zeros((0, d, d), complex)
        return np.ascontiguousarray(drift), np.ascontiguousarray(stack)


def dissipator(c: OperatorMatrix, rho) -> np.ndarray:
    """D[c]rho = c rho c^dag - (1/2)(c^dag c rho + rho c^dag c)."""
    r = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
    if r.shape != c.entries.shape:
        raise LayoutError("dissipator operands have different shapes")
    cc = c.entries.conj().T @ c.entries
    return c.entries @ r @ c.entries.conj().T - 0.5 * (cc @ r + r @ cc)


def lindblad_rhs(model: LindbladModel, rho) -> np.ndarray:
    """-i[H, rho] + sum_k rate_k D[c_k] rho."""
    r = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
    if r.shape[0] != model.layout.total_dim:
        raise LayoutError("state dimension does not match model layout")
    h = model.hamiltonian.entries
    out = -1j * (h @ r - r @ h)
    for rate, op in model.channels:
        if rate:
            out = out + rate * dissipator(op, r)
    return out


def _grid_to_steps(t_grid, step):
    steps = []
    prev = -1
    for t in t_grid:
        k = int(round(t / step))
        if abs(k * step - t) > GRID_ALIGN_TOL * max(1.0, abs(t)):
            raise StepSizeError(f"step {step} does not subdivide grid point t={t} exactly")
        if k < 0:
            raise ValueError("t_grid times must be non-negative")
        if steps and k <= prev:
            raise ValueError("t_grid must be strictly increasing")
        steps.append(k)
        prev = k
    return np.asarray(steps, dtype=np.int64)


def integrate(model: LindbladModel, rho0: DensityMatrix, t_grid, step: float):
    """Fixed-step RK4 evolution; returns one DensityMatrix per grid time.

    The step must resolve the stiffest rate in the model
    (``step <= 0.1 / max(rates, ||H||)``) and must subdivide every grid
    interval exactly.  Snapshots are re-validated against the density
    matrix invariants (trace, Hermiticity, positivity floor) on return.
    """
    if rho0.layout != model.layout:
        raise LayoutError("initial state layout does not match model")
    if step <= 0.0:
        raise StepSizeError("step must be positive")
    stiff = model.stiffness()
    if stiff > 0.0 and step > STIFFNESS_FACTOR / stiff:
        raise StepSizeError(
            f"step {step} exceeds {STIFFNESS_FACTOR}/max(rates, ||H||) = {STIFFNESS_FACTOR / stiff:.3e}"
        )
    snap_steps = _grid_to_steps(t_grid, step)
    n_steps = int(snap_steps[-1]) if len(snap_steps) else 0
    drift, jumps = model.drift_and_jumps()
    snaps = _kernels.lindblad_rk4_run(
        drift, jumps, np.array(rho0.entries, copy=True), step, n_steps,
        snap_steps, TRACE_DRIFT_TOL,
    )
    return [DensityMatrix(model.layout, snaps[k]) for k in range(snaps.shape[0])]

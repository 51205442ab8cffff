"""Pure-numpy reference implementation of the stepping kernels.

Semantics are kept in lockstep with the compiled module
(``trajqed._kernels._core``); the test suite cross-checks both backends
on identical inputs.  This backend is selected automatically when the
extension is unavailable, or explicitly via TRAJQED_FORCE_PYTHON=1.
"""

import numpy as np

from ..errors import DegenerateStateError, IntegrationError

PROB_FLOOR = 1e-15


def run_trajectory(ops, psi0, uniforms, sample_every):
    """Evolve one jump-unravelled trajectory.

    ops : (K, d, d) complex measurement operators for one time step
    psi0 : (d,) normalised initial state
    uniforms : (n_steps,) uniform draws in [0, 1), one per step
    sample_every : record the state every this many steps

    Returns ``(outcomes, samples)`` where outcomes is ``(n_steps,)`` uint8
    channel indices and samples is ``(n_steps // sample_every + 1, d)``
    with ``samples[0] = psi0``.
    """
    ops = np.asarray(ops, dtype=np.complex128)
    psi = np.array(psi0, dtype=np.complex128)
    u = np.asarray(uniforms, dtype=np.float64)
    n_steps = u.shape[0]
    if n_steps % sample_every != 0:
        raise ValueError("sample_every must divide the number of steps")
    n_samples = n_steps // sample_every + 1
    d = psi.shape[0]
    outcomes = np.empty(n_steps, dtype=np.uint8)
    samples = np.empty((n_samples, d), dtype=np.complex128)
    samples[0] = psi

    for step in range(n_steps):
        y = ops @ psi                       # (K, d)
        p = np.einsum("ki,ki->k", y.conj(), y).real
        if p.max() < PROB_FLOOR:
            raise DegenerateStateError(
                f"all channel probabilities below {PROB_FLOOR} at step {step}"
            )
        # inverse CDF over channel-index order on the renormalised p_k
        thresh = u[step] * p.sum()
        k = int(np.searchsorted(np.cumsum(p), thresh, side="right"))
        if k >= p.shape[0]:                 # u*s landed past the last edge
            k = int(np.max(np.nonzero(p > 0.0)[0]))
        psi = y[k] / np.sqrt(p[k])
        outcomes[step] = k
        if (step + 1) % sample_every == 0:
            samples[(step + 1) // sample_every] = psi

    return outcomes, samples


def _rhs(drift, jumps, jumps_dag, rho):
    out = drift @ rho
    out = out + out.conj().T
    if jumps.shape[0]:
        out += np.einsum("kij,jl,klm->im", jumps, rho, jumps_dag, optimize=True)
    return out


def lindblad_rk4_run(drift, jumps, rho0, h, n_steps, snap_steps, trace_tol):
    """Classical fixed-step RK4 for d(rho)/dt = A rho + rho A^dag + sum_k B_k rho B_k^dag.

    drift : (d, d) non-Hermitian drift matrix A = -iH - (1/2) sum_k gamma_k c_k^dag c_k
    jumps : (n_c, d, d) rate-scaled jump operators B_k = sqrt(gamma_k) c_k
    snap_steps : ascending step indices at which to record rho (0 = initial state)

    Re-Hermitises after every step and aborts with IntegrationError when
    |tr rho - 1| exceeds ``trace_tol``.
    """
    drift = np.asarray(drift, dtype=np.complex128)
    jumps = np.asarray(jumps, dtype=np.complex128).reshape(-1, drift.shape[0], drift.shape[0])
    jumps_dag = jumps.conj().transpose(0, 2, 1).copy()
    rho = np.array(rho0, dtype=np.complex128)
    snap_steps = np.asarray(snap_steps, dtype=np.int64)
    snaps = np.empty((snap_steps.shape[0], rho.shape[0], rho.shape[1]), dtype=np.complex128)

    j = 0
    while j < snap_steps.shape[0] and snap_steps[j] == 0:
        snaps[j] = rho
        j += 1
    for step in range(1, n_steps + 1):
        k1 = _rhs(drift, jumps, jumps_dag, rho)
        k2 = _rhs(drift, jumps, jumps_dag, rho + (0.5 * h) * k1)
        k3 = _rhs(drift, jumps, jumps_dag, rho + (0.5 * h) * k2)
        k4 = _rhs(drift, jumps, jumps_dag, rho + h * k3)
        rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        rho = 0.5 * (rho + rho.conj().T)
        tr = complex(np.trace(rho))
        if abs(tr.real - 1.0) + abs(tr.imag) > trace_tol:
            raise IntegrationError(
                f"trace drift {abs(tr - 1.0):.3e} beyond {trace_tol} at step {step}"
            )
        while j < snap_steps.shape[0] and snap_steps[j] == step:
            snaps[j] = rho
            j += 1
    if j != snap_steps.shape[0]:
        raise ValueError("snap_steps contains indices beyond n_steps")
    return snaps

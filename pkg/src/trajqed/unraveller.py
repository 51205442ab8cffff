"""Generalised jump-type trajectories with unitary channel mixing.

A time step is described by a :class:`ChannelSet`: an ordered family of
measurement operators ``M_k`` (index 0 is the no-jump channel before
mixing) built from rate/jump pairs, plus a unitary ``U`` acting on the
channel vector.  Any unitary recombination of channels -- including
recombinations that superpose the no-jump channel with jumps -- leaves
the summed back-action ``sum_k M_k^dag M_k`` invariant, which is why the
ensemble average reproduces the same master equation regardless of how
the environment is monitored.

Sampling uses fixed-dt generic measurement-operator stepping rather than
waiting-time draws: once channels are mixed, every channel can fire with
O(1) probability per step, so a single uniform stepping scheme covers
all unravellings handled here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DegenerateStateError, LayoutError, StepSizeError, ValidationError
from .qstate import DensityMatrix, HilbertLayout, OperatorMatrix, StateVector

MAX_RATE_DT = 0.05
UNITARITY_TOL = 1e-12

# SplitMix64 constants (Steele, Lea & Flood's published mixing function)
_SM64_GAMMA = 0x9E3779B97F4A7C15
_SM64_M1 = 0xBF58476D1CE4E5B9
_SM64_M2 = 0x94D049BB133111EB
_U64 = (1 << 64) - 1


def derive_seed(master_seed: int, index: int) -> int:
    """Per-trajectory seed: the ``index``-th output of a SplitMix64 stream.

    Fixed integer mixing of (master_seed, index) so that ensembles are
    reproducible regardless of scheduling or execution order.
    """
    z = (master_seed + (index + 1) * _SM64_GAMMA) & _U64
    z = ((z ^ (z >> 30)) * _SM64_M1) & _U64
    z = ((z ^ (z >> 27)) * _SM64_M2) & _U64
    return z ^ (z >> 31)


def _is_unitary(u: np.ndarray, tol: float = UNITARITY_TOL) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))) <= tol


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """Measurement operators for one step of length ``dt``.

    ``ops[0]`` is the no-jump channel by convention (before mixing);
    ``mixing`` records the unitary already applied to the raw channel
    vector (identity when unmixed); ``source_rates`` keeps the gamma_k
    used to build the raw jumps.
    """

    dt: float
    ops: tuple
    mixing: np.ndarray
    source_rates: tuple

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValidationError("dt must be positive")
        ops = tuple(self.ops)
        layout = ops[0].layout
        for op in ops:
            if op.layout != layout:
                raise LayoutError("channel operators live on different layouts")
        u = np.array(np.asarray(self.mixing), dtype=np.complex128)
        if u.shape != (len(ops), len(ops)):
            raise ValidationError("mixing matrix dimension must equal the channel count")
        if not _is_unitary(u):
            raise ValidationError(f"mixing matrix is not unitary to {UNITARITY_TOL}")
        u.setflags(write=False)
        rates = tuple(float(r) for r in self.source_rates)
        # second-order construction residual of sum M^dag M - 1
        bound = 10.0 * (max(rates, default=0.0) * self.dt) ** 2
        res = self.completeness_residual_of(ops)
        if res > max(bound, 1e-14):
            raise ValidationError(
                f"completeness residual {res:.3e} exceeds 10*(max gamma dt)^2 = {bound:.3e}"
            )
        object.__setattr__(self, "ops", ops)
        object.__setattr__(self, "mixing", u)
        object.__setattr__(self, "source_rates", rates)

    @staticmethod
    def completeness_residual_of(ops) -> float:
        d = ops[0].layout.total_dim
        acc = np.zeros((d, d), dtype=np.complex128)
        for op in ops:
            acc += op.entries.conj().T @ op.entries
        return float(np.max(np.abs(acc - np.eye(d))))

    @property
    def layout(self) -> HilbertLayout:
        return self.ops[0].layout

    @property
    def n_channels(self) -> int:
        return len(self.ops)

    def ops_stack(self) -> np.ndarray:
        """Fresh contiguous (K, d, d) array of the channel operators."""
        return np.ascontiguousarray(
            np.stack([op.entries for op in self.ops]), dtype=np.complex128
        )


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """Seeded outcome sequence plus observables sampled on a declared grid."""

    seed: int
    times: np.ndarray
    outcomes: np.ndarray
    observables: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "outcomes", np.asarray(self.outcomes, dtype=np.uint8))
        object.__setattr__(self, "times", np.asarray(self.times, dtype=np.float64))


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    """Projector-averaged state series plus the per-trajectory records."""

    times: np.ndarray
    states: list
    records: list


def build_jump_channels(rates, dt: float) -> ChannelSet:
    """First-order channel family {J_0, sqrt(gamma_k dt) L_k} for one step.

    ``rates`` is a sequence of ``(gamma_k, L_k)`` pairs.  The no-jump
    operator is ``1 - (dt/2) sum_k gamma_k L_k^dag L_k``; validity of the
    truncation requires ``dt * max gamma_k <= 0.05``.
    """
    rates = [(float(g), op) for g, op in rates]
    if not rates:
        raise ValidationError("need at least one rate/jump pair")
    gmax = max(g for g, _ in rates)
    if dt * gmax > MAX_RATE_DT:
        raise StepSizeError(
            f"dt*max(gamma) = {dt * gmax:.3e} exceeds {MAX_RATE_DT}; "
            "first-order no-jump truncation invalid"
        )
    layout = rates[0][1].layout
    d = layout.total_dim
    acc = np.zeros((d, d), dtype=np.complex128)
    jump_ops = []
    for g, op in rates:
        if op.layout != layout:
            raise LayoutError("jump operators live on different layouts")
        acc += g * (op.entries.conj().T @ op.entries)
        jump_ops.append(OperatorMatrix(layout, np.sqrt(g * dt) * op.entries,
                                       label=f"sqrt({g}*dt)*{op.label}"))
    no_jump = OperatorMatrix(layout, np.eye(d) - 0.5 * dt * acc, label="J0")
    ops = (no_jump, *jump_ops)
    return ChannelSet(dt=dt, ops=ops, mixing=np.eye(len(ops), dtype=np.complex128),
                      source_rates=tuple(g for g, _ in rates))


def mix_channels(cs: ChannelSet, u) -> ChannelSet:
    """Unitary recombination ops'_j = sum_k U_jk ops_k of the channel vector."""
    u = np.asarray(u, dtype=np.complex128)
    if u.shape != (cs.n_channels, cs.n_channels):
        raise ValidationError(
            f"mixing matrix shape {u.shape} does not match {cs.n_channels} channels"
        )
    if not _is_unitary(u):
        raise ValidationError(f"mixing matrix is not unitary to {UNITARITY_TOL}")
    stack = cs.ops_stack()
    mixed = np.einsum("jk,kab->jab", u, stack)
    ops = tuple(
        OperatorMatrix(cs.layout, mixed[j], label=f"mixed[{j}]")
        for j in range(cs.n_channels)
    )
    return ChannelSet(dt=cs.dt, ops=ops, mixing=u @ cs.mixing, source_rates=cs.source_rates)


def expand_jump_mixing(jump_block, n_channels: int) -> np.ndarray:
    """Embed a unitary acting on the jump channels only (no-jump untouched).

    ``jump_block`` is a (n_channels-1) x (n_channels-1) unitary over
    channels 1..K-1; channel 0 stays unmixed.
    """
    block = np.asarray(jump_block, dtype=np.complex128)
    if block.shape != (n_channels - 1, n_channels - 1):
        raise ValidationError("jump_block must act on all channels except the no-jump one")
    u = np.eye(n_channels, dtype=np.complex128)
    u[1:, 1:] = block
    return u


def trajectory_step(psi: StateVector, cs: ChannelSet, rng_draw: float):
    """One monitored step: sample a channel by inverse CDF, apply, renormalise.

    Probabilities ``p_k = <psi|M_k^dag M_k|psi>`` are renormalised to sum
    one; the channel is selected by inverse CDF in channel-index order, so
    ``rng_draw = 0`` picks the lowest-index channel with nonzero
    probability.  Returns ``(outcome index, new StateVector)``.
    """
    if psi.layout != cs.layout:
        raise LayoutError("state layout does not match channel set")
    y = cs.ops_stack() @ psi.amplitudes
    p = np.einsum("ki,ki->k", y.conj(), y).real
    if p.max() < 1e-15:
        raise DegenerateStateError("all channel probabilities below 1e-15")
    thresh = float(rng_draw) * p.sum()
    k = int(np.searchsorted(np.cumsum(p), thresh, side="right"))
    if k >= p.shape[0]:
        k = int(np.max(np.nonzero(p > 0.0)[0]))
    new_psi = StateVector(cs.layout, y[k] / np.sqrt(p[k]), normalized=True)
    return k, new_psi


def ensemble_average(cs: ChannelSet, psi0: StateVector, n_traj: int, t_final: float,
                     master_seed: int, *, sample_every: int = 1,
                     observables: dict | None = None) -> EnsembleResult:
    """Average ``n_traj`` independent seeded trajectories of the channel map.

    Per-trajectory seeds derive from ``derive_seed(master_seed, i)``; each
    trajectory consumes one uniform draw per step from its own PCG64
    stream, so results are independent of execution order and identical
    across reruns.  Returns the projector-averaged state on the sample
    grid plus one :class:`TrajectoryRecord` per trajectory.

    ``observables`` maps names to operators sampled as <psi|O|psi> along
    each trajectory.
    """
    if n_traj < 1:
        raise ValidationError("n_traj must be >= 1")
    if psi0.layout != cs.layout:
        raise LayoutError("initial state layout does not match channel set")
    n_steps = int(round(t_final / cs.dt))
    if abs(n_steps * cs.dt - t_final) > 1e-9 * max(1.0, t_final) or n_steps < 1:
        raise ValidationError("t_final must be a positive multiple of dt")
    if n_steps % sample_every != 0:
        raise ValidationError("sample_every must divide the number of steps")

    ops = cs.ops_stack()
    if ops.shape[0] > 255:
        raise ValidationError("at most 255 channels supported")
    obs = dict(observables or {})
    obs_mats = {}
    for name, op in obs.items():
        if op.layout != cs.layout:
            raise LayoutError(f"observable {name!r} layout does not match channel set")
        obs_mats[name] = op.entries

    n_samples = n_steps // sample_every + 1
    d = cs.layout.total_dim
    times = np.arange(n_samples) * (cs.dt * sample_every)
    rho_sum = np.zeros((n_samples, d, d), dtype=np.complex128)
    psi_arr = np.array(psi0.amplitudes, dtype=np.complex128)
    records = []
    for i in range(n_traj):
        seed = derive_seed(master_seed, i)
        rng = np.random.Generator(np.random.PCG64(seed))
        uniforms = rng.random(n_steps)
        try:
            outcomes, samples = _kernels.run_trajectory(ops, psi_arr, uniforms, sample_every)
        except DegenerateStateError as exc:
            raise DegenerateStateError(f"trajectory {i}: {exc}") from exc
        rho_sum += np.einsum("si,sj->sij", samples, samples.conj())
        series = {
            name: np.einsum("si,ij,sj->s", samples.conj(), mat, samples).real
            for name, mat in obs_mats.items()
        }
        records.append(TrajectoryRecord(seed=seed, times=times, outcomes=outcomes,
                                        observables=series))
    rho_sum /= n_traj
    states = [DensityMatrix(cs.layout, rho_sum[s]) for s in range(n_samples)]
    return EnsembleResult(times=times, states=states, records=records)

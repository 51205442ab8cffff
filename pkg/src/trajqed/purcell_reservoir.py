"""Stationary 3-level atom in a very lossy two-mode cavity.

The e-g transition couples to the left-polarised mode (``lambda_ge``)
and the i-e transition to the right-polarised one (``lambda_ie``); a
classical field of strength ``omega_drive`` drives g-i.  With the
cavity decay ``kappa`` dominating everything, both modes act as decay
channels: the atom acquires an effective decay ``4 lambda_ge^2 / kappa``
and, after adiabatic elimination of the top level, an effective
incoherent pump ``omega_drive^2 kappa / lambda_ie^2``, i.e. a thermal
qubit bath whose two rates are independently tunable.

Models are built in the frame rotating at the cavity/drive frequencies;
only the e-level detuning ``delta_ge`` survives, which reduces the
effective decay by the usual Lorentzian factor 1/(1 + 4 delta^2/kappa^2).
Both modes damp at the same kappa (one lossy cavity structure).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import HierarchyWarning, ValidationError
from .liouville import LindbladModel, integrate
from .qstate import (
    DensityMatrix,
    HilbertLayout,
    OperatorMatrix,
    annihilation_op,
    identity_op,
    partial_trace_entries,
    tensor_product,
    trace_distance_entries,
    transition_op,
)
from .unraveller import ChannelSet, build_jump_channels, expand_jump_mixing, mix_channels

ATOM_G, ATOM_E, ATOM_I = 0, 1, 2


@dataclass(frozen=True)
class SchemeBParams:
    """Physical rates of the lossy-cavity scheme (angular units, hbar = 1).

    The working hierarchy is kappa >> lambda_ie > lambda_ge > omega_drive
    >> gamma_nat, Gamma_nat; a soft check warns (HierarchyWarning) when the
    separations fall below (5, 2, 2, 10).  The frame frequencies omega_e,
    omega_i, omega_R, omega_L are carried for documentation only -- models
    are built directly in the rotating frame.
    """

    kappa: float
    lambda_ge: float
    lambda_ie: float
    omega_drive: float
    gamma_nat: float = 0.0
    Gamma_nat: float = 0.0
    delta_ge: float = 0.0
    n_trunc_R: int = 3
    n_trunc_L: int = 3
    omega_e: float = 0.0
    omega_i: float = 0.0
    omega_R: float = 0.0
    omega_L: float = 0.0

    def __post_init__(self):
        if self.kappa <= 0.0:
            raise ValidationError("kappa must be positive")
        if self.n_trunc_R < 2 or self.n_trunc_L < 2:
            raise ValidationError("mode truncations must be >= 2")
        checks = []
        if self.lambda_ie > 0:
            checks.append(("kappa/lambda_ie", self.kappa / self.lambda_ie, 5.0))
        if self.lambda_ge > 0:
            checks.append(("lambda_ie/lambda_ge", self.lambda_ie / self.lambda_ge, 2.0))
        if self.omega_drive > 0:
            checks.append(("lambda_ge/omega_drive", self.lambda_ge / self.omega_drive, 2.0))
        nat = max(self.gamma_nat, self.Gamma_nat)
        if nat > 0:
            checks.append(("omega_drive/max(gamma,Gamma)", self.omega_drive / nat, 10.0))
        for name, value, floor in checks:
            if value < floor:
                warnings.warn(
                    f"rate hierarchy weak: {name} = {value:.3g} < {floor}",
                    HierarchyWarning,
                    stacklevel=3,
                )

    @property
    def layout(self) -> HilbertLayout:
        return HilbertLayout((3, self.n_trunc_R, self.n_trunc_L))


def effective_rates(p: SchemeBParams):
    """(gamma_minus, gamma_plus, gamma_ie) of the engineered qubit bath.

    gamma_minus = 4 lambda_ge^2 / (kappa (1 + 4 delta_ge^2/kappa^2))
    gamma_ie    = 4 lambda_ie^2 / kappa
    gamma_plus  = omega_drive^2 kappa / lambda_ie^2
    """
    if p.kappa <= 0.0 or p.lambda_ie <= 0.0:
        raise ValidationError("effective rates need kappa > 0 and lambda_ie > 0")
    lorentz = 1.0 + 4.0 * p.delta_ge**2 / p.kappa**2
    gamma_minus = 4.0 * p.lambda_ge**2 / (p.kappa * lorentz)
    gamma_ie = 4.0 * p.lambda_ie**2 / p.kappa
    gamma_plus = p.omega_drive**2 * p.kappa / p.lambda_ie**2
    return gamma_minus, gamma_plus, gamma_ie


def full_model(p: SchemeBParams) -> LindbladModel:
    """Complete rotating-frame model on atom (x) mode_R (x) mode_L."""
    i3 = identity_op(HilbertLayout((3,)))
    iR = identity_op(HilbertLayout((p.n_trunc_R,)))
    iL = identity_op(HilbertLayout((p.n_trunc_L,)))
    aR_loc = annihilation_op(p.n_trunc_R)
    aL_loc = annihilation_op(p.n_trunc_L)

    def embed_atom(op):
        return tensor_product(tensor_product(op, iR), iL)

    aR = tensor_product(tensor_product(i3, aR_loc), iL)
    aL = tensor_product(tensor_product(i3, iR), aL_loc)
    sm_eg = embed_atom(transition_op(3, ATOM_G, ATOM_E))
    sp_eg = sm_eg.dag()
    sm_ie = embed_atom(transition_op(3, ATOM_E, ATOM_I))
    sp_ie = sm_ie.dag()
    sp_ig = embed_atom(transition_op(3, ATOM_I, ATOM_G))
    sm_ig = sp_ig.dag()
    proj_e = embed_atom(transition_op(3, ATOM_E, ATOM_E))

    h = (
        p.delta_ge * proj_e.entries
        + 1j * p.lambda_ge * (aL.entries @ sp_eg.entries - aL.dag().entries @ sm_eg.entries)
        + 1j * p.lambda_ie * (aR.entries @ sp_ie.entries - aR.dag().entries @ sm_ie.entries)
        + 1j * p.omega_drive * (sp_ig.entries - sm_ig.entries)
    )
    ham = OperatorMatrix(p.layout, h, label="H_schemeB")
    channels = (
        (p.gamma_nat, sm_eg),
        (p.Gamma_nat, sm_ie),
        (p.kappa, aR),
        (p.kappa, aL),
    )
    return LindbladModel(hamiltonian=ham, channels=channels)


def qubit_sigma_minus() -> OperatorMatrix:
    return transition_op(2, 0, 1)  # |g><e|


def effective_model(p: SchemeBParams) -> LindbladModel:
    """Two-level thermal bath on the (g, e) qubit after elimination."""
    gamma_minus, gamma_plus, _ = effective_rates(p)
    sm = qubit_sigma_minus()
    ham = OperatorMatrix(sm.layout, np.zeros((2, 2), dtype=np.complex128), label="0")
    return LindbladModel(hamiltonian=ham, channels=((gamma_minus, sm), (gamma_plus, sm.dag())))


def detector_basis(plate_in: bool) -> np.ndarray:
    """2x2 unitary over the (decay, pump) jump channels set by the detector.

    With the quarter-wave plate in, each circular polarisation maps to its
    own detector: channels stay (sigma_-, sigma_+) and the matrix is the
    identity.  With the plate out, the beam splitter detects balanced
    combinations, turning the jumps into (sigma_- + sigma_+)/sqrt2 and
    (sigma_- - sigma_+)/sqrt2 -- proportional to local unitaries when the
    two rates are equal.
    """
    if plate_in:
        return np.eye(2, dtype=np.complex128)
    inv = 1.0 / np.sqrt(2.0)
    return np.array([[inv, inv], [inv, -inv]], dtype=np.complex128)


def effective_jump_channels(p: SchemeBParams, dt: float, plate_in: bool = True) -> ChannelSet:
    """Per-step channel set {J_0, J_-, J_+} of the monitored effective qubit."""
    gamma_minus, gamma_plus, _ = effective_rates(p)
    sm = qubit_sigma_minus()
    cs = build_jump_channels([(gamma_minus, sm), (gamma_plus, sm.dag())], dt)
    if plate_in:
        return cs
    return mix_channels(cs, expand_jump_mixing(detector_basis(False), cs.n_channels))


def _grid_step(t_grid, stiffness: float) -> float:
    """Largest step that both resolves the stiffness and subdivides the grid."""
    diffs = np.diff(np.asarray(t_grid, dtype=float))
    dt_grid = float(diffs.min()) if diffs.size else 1.0
    if stiffness <= 0.0:
        return dt_grid
    n_sub = max(1, int(np.ceil(dt_grid * stiffness / 0.1 - 1e-12)))
    return dt_grid / n_sub


@dataclass(frozen=True, eq=False)
class ReducedComparison:
    """Full-model vs effective-qubit comparison on a common grid."""

    times: np.ndarray
    trace_distances: np.ndarray
    i_populations: np.ndarray
    max_trace_distance: float
    max_i_population: float
    max_top_pop_R: float
    max_top_pop_L: float
    qubit_blocks: np.ndarray       # (n, 2, 2) unnormalised (g,e) blocks of the full model
    effective_states: list         # DensityMatrix series of the effective model
    full_states: list              # DensityMatrix series of the full model


def reduced_compare(p: SchemeBParams, rho0_atom: DensityMatrix, t_grid,
                    step_full: float | None = None, step_eff: float | None = None) -> ReducedComparison:
    """Integrate both models from rho0_atom (x) vacuum (x) vacuum and compare.

    The comparison uses the (g, e) sub-block of the reduced atomic state
    without renormalisation; the |i> population is excluded from the
    trace distance and reported separately, since the effective model has
    no |i> level.  Top-level mode populations are monitored against the
    1e-4 truncation budget.
    """
    if rho0_atom.layout.factors != (3,):
        raise ValidationError("rho0_atom must be a 3-level atomic density matrix")
    t_grid = np.asarray(t_grid, dtype=float)
    full = full_model(p)
    if step_full is None:
        step_full = _grid_step(t_grid, full.stiffness())
    vac = np.zeros((p.n_trunc_R * p.n_trunc_L,) * 2, dtype=np.complex128)
    vac[0, 0] = 1.0
    rho0 = np.kron(rho0_atom.entries, vac)
    full_states = integrate(full, DensityMatrix(p.layout, rho0), t_grid, step_full)

    eff = effective_model(p)
    if step_eff is None:
        step_eff = _grid_step(t_grid, eff.stiffness())
    sub = rho0_atom.entries[:2, :2]
    tr = float(np.trace(sub).real)
    if tr <= 0.0:
        raise ValidationError("rho0_atom carries no weight in the (g, e) subspace")
    qubit0 = DensityMatrix(HilbertLayout((2,)), sub / tr)
    eff_states = integrate(eff, qubit0, t_grid, step_eff)

    factors = p.layout.factors
    n = len(full_states)
    tds = np.empty(n)
    pis = np.empty(n)
    blocks = np.empty((n, 2, 2), dtype=np.complex128)
    top_R = np.empty(n)
    top_L = np.empty(n)
    for k, st in enumerate(full_states):
        atom = partial_trace_entries(st.entries, factors, 0)
        blocks[k] = atom[:2, :2]
        pis[k] = atom[2, 2].real
        tds[k] = trace_distance_entries(blocks[k], eff_states[k].entries)
        mode_R = partial_trace_entries(st.entries, factors, 1)
        mode_L = partial_trace_entries(st.entries, factors, 2)
        top_R[k] = mode_R[-1, -1].real
        top_L[k] = mode_L[-1, -1].real
    return ReducedComparison(
        times=np.asarray(t_grid, dtype=float),
        trace_distances=tds,
        i_populations=pis,
        max_trace_distance=float(tds.max()),
        max_i_population=float(pis.max()),
        max_top_pop_R=float(top_R.max()),
        max_top_pop_L=float(top_L.max()),
        qubit_blocks=blocks,
        effective_states=eff_states,
        full_states=full_states,
    )

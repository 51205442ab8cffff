import numpy as np
import pytest

from trajqed.errors import LayoutError, StepSizeError, ValidationError
from trajqed.liouville import LindbladModel, dissipator, integrate, lindblad_rhs
from trajqed.qstate import (
    DensityMatrix,
    HilbertLayout,
    OperatorMatrix,
    annihilation_op,
    fock_state,
    identity_op,
    number_op,
    transition_op,
)

LAY2 = HilbertLayout((2,))
SIGMA_MINUS = transition_op(2, 0, 1)


def zero_h(layout):
    d = layout.total_dim
    return OperatorMatrix(layout, np.zeros((d, d), dtype=complex))


def field_model(gamma_minus, gamma_plus, n):
    a = annihilation_op(n)
    return LindbladModel(zero_h(a.layout), ((gamma_minus, a), (gamma_plus, a.dag())))


def thermal_state(n, ratio):
    """Detailed-balance Fock distribution p_m proportional to ratio^m."""
    p = ratio ** np.arange(n)
    p /= p.sum()
    return DensityMatrix(HilbertLayout((n,)), np.diag(p).astype(complex))


def test_dissipator_on_vacuum_is_zero():
    a = annihilation_op(4)
    vac = fock_state(4, 0).projector()
    np.testing.assert_allclose(dissipator(a, vac), 0.0, atol=1e-16)


def test_dissipator_single_photon():
    n = 3
    a = annihilation_op(n)
    one = fock_state(n, 1).projector()
    expected = fock_state(n, 0).projector().entries - one.entries
    np.testing.assert_allclose(dissipator(a, one), expected, atol=1e-15)


def test_dissipator_qubit_plus_state():
    plus = DensityMatrix(LAY2, 0.5 * np.ones((2, 2), dtype=complex))
    out = dissipator(SIGMA_MINUS, plus)
    # direct arithmetic: sm rho sp = |g><g|/2, {sp sm, rho}/2 = [[0,.25],[.25,.5]]
    expected = np.array([[0.5, -0.25], [-0.25, -0.5]], dtype=complex)
    np.testing.assert_allclose(out, expected, atol=1e-15)
    assert abs(np.trace(out)) <= 1e-15


def test_rhs_reduces_to_dissipator():
    model = field_model(0.7, 0.0, 4)
    one = fock_state(4, 1).projector()
    np.testing.assert_allclose(
        lindblad_rhs(model, one), 0.7 * dissipator(annihilation_op(4), one), atol=1e-15
    )


def test_rhs_thermal_steady_state():
    gm, gp = 0.8, 0.2
    model = field_model(gm, gp, 9)
    rho = thermal_state(9, gp / gm)  # mean n matches gp/(gm-gp) detailed balance
    np.testing.assert_allclose(lindblad_rhs(model, rho), 0.0, atol=1e-10)


def test_rhs_traceless_for_random_hermitian():
    rng = np.random.default_rng(5)
    n = 5
    h = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    ham = OperatorMatrix(HilbertLayout((n,)), 0.5 * (h + h.conj().T))
    model = LindbladModel(ham, ((0.3, annihilation_op(n)),))
    for _ in range(5):
        m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        rho = 0.5 * (m + m.conj().T)
        assert abs(np.trace(lindblad_rhs(model, rho))) <= 1e-12


def test_model_validation():
    a = annihilation_op(3)
    with pytest.raises(ValidationError):
        LindbladModel(OperatorMatrix(a.layout, a.entries), ())  # H not Hermitian
    with pytest.raises(ValidationError):
        LindbladModel(zero_h(a.layout), ((-0.1, a),))
    with pytest.raises(LayoutError):
        LindbladModel(zero_h(a.layout), ((0.1, annihilation_op(4)),))


def test_integrate_identity_when_frozen():
    model = LindbladModel(zero_h(LAY2), ((0.0, SIGMA_MINUS),))
    rho0 = DensityMatrix(LAY2, np.diag([0.25, 0.75]).astype(complex))
    out = integrate(model, rho0, [0.0, 1.0, 2.0], step=0.5)
    for st in out:
        np.testing.assert_allclose(st.entries, rho0.entries, atol=1e-15)


def test_integrate_qubit_decay_closed_form():
    gamma = 1.0
    model = LindbladModel(zero_h(LAY2), ((gamma, SIGMA_MINUS),))
    rho0 = DensityMatrix(LAY2, np.diag([0.0, 1.0]).astype(complex))
    ts = [0.0, 0.5, 1.0]
    out = integrate(model, rho0, ts, step=0.05)
    for t, st in zip(ts, out):
        assert st.entries[1, 1].real == pytest.approx(np.exp(-gamma * t), abs=1e-6)


def test_integrate_single_photon_decay():
    gm = 0.4
    n = 4
    model = field_model(gm, 0.0, n)
    rho0 = fock_state(n, 1).projector()
    ts = np.linspace(0.0, 1.0 / gm, 6)
    out = integrate(model, rho0, ts, step=1.0 / gm / 40)
    nop = number_op(n)
    for t, st in zip(ts, out):
        val = np.trace(st.entries @ nop.entries).real
        assert val == pytest.approx(np.exp(-gm * t), abs=1e-6)


def test_integrate_fourth_order_convergence():
    gamma = 1.0
    model = LindbladModel(zero_h(LAY2), ((gamma, SIGMA_MINUS),))
    rho0 = DensityMatrix(LAY2, np.diag([0.0, 1.0]).astype(complex))

    def err(h):
        (st,) = integrate(model, rho0, [1.0], step=h)
        exact = np.diag([1.0 - np.exp(-1.0), np.exp(-1.0)])
        return np.max(np.abs(st.entries - exact))

    ratio = err(0.1) / err(0.05)
    assert 12.0 <= ratio <= 20.0


def test_integrate_output_hygiene():
    model = field_model(0.5, 0.2, 5)
    rho0 = fock_state(5, 2).projector()
    out = integrate(model, rho0, np.linspace(0, 4, 9), step=0.05)
    for st in out:
        assert abs(np.trace(st.entries) - 1.0) <= 1e-9
        assert np.max(np.abs(st.entries - st.entries.conj().T)) <= 1e-10
        assert np.min(np.linalg.eigvalsh(st.entries)) >= -1e-8


def test_integrate_step_guards():
    model = LindbladModel(zero_h(LAY2), ((2.0, SIGMA_MINUS),))
    rho0 = DensityMatrix(LAY2, np.diag([0.0, 1.0]).astype(complex))
    with pytest.raises(StepSizeError):
        integrate(model, rho0, [0.0, 1.0], step=0.2)  # > 0.1/gamma
    with pytest.raises(StepSizeError):
        integrate(model, rho0, [0.0, 0.13], step=0.05)  # grid not divisible
    with pytest.raises(StepSizeError):
        integrate(model, rho0, [0.0, 1.0], step=-0.1)


def test_integrate_hamiltonian_rotation():
    # pure Hamiltonian evolution: Rabi rotation of a qubit under sx
    sx = OperatorMatrix(LAY2, np.array([[0, 1], [1, 0]], dtype=complex))
    model = LindbladModel(sx, ())
    rho0 = DensityMatrix(LAY2, np.diag([1.0, 0.0]).astype(complex))
    t = 0.4
    (st,) = integrate(model, rho0, [t], step=0.004)
    assert st.entries[1, 1].real == pytest.approx(np.sin(t) ** 2, abs=1e-8)

import numpy as np
import pytest

from trajqed.errors import DimensionError, LayoutError, ValidationError
from trajqed.qstate import (
    DensityMatrix,
    HilbertLayout,
    OperatorMatrix,
    StateVector,
    annihilation_op,
    basis_state,
    expectation,
    fock_state,
    identity_op,
    number_op,
    partial_trace,
    tensor_product,
    trace_distance,
    transition_op,
)

SZ = np.diag([1.0, -1.0]).astype(complex)


def random_density(rng, d):
    """Random full-rank density matrix (Ginibre construction)."""
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def test_layout_validation():
    lay = HilbertLayout((3, 4))
    assert lay.total_dim == 12
    assert lay.index_of((1, 0)) == 4  # row-major, first factor slowest
    with pytest.raises(DimensionError):
        HilbertLayout((1, 4))
    with pytest.raises(LayoutError):
        lay.index_of((3, 0))


def test_annihilation_matrix_elements():
    a2 = annihilation_op(2)
    np.testing.assert_array_equal(a2.entries, np.array([[0, 1], [0, 0]], dtype=complex))
    a4 = annihilation_op(4)
    np.testing.assert_allclose(a4.dag().entries @ a4.entries, np.diag([0, 1, 2, 3]), atol=0)
    # truncation defect: [a, a^dag] = diag(1, ..., 1, -(N-1))
    for n in (2, 5, 9):
        a = annihilation_op(n).entries
        comm = a @ a.conj().T - a.conj().T @ a
        np.testing.assert_allclose(comm, np.diag([1.0] * (n - 1) + [-(n - 1.0)]), atol=1e-14)
    with pytest.raises(DimensionError):
        annihilation_op(1)


def test_number_operator_exact():
    n = 6
    nop = number_op(n)
    a = annihilation_op(n)
    np.testing.assert_array_equal(nop.entries, a.dag().entries @ a.entries)
    for m in range(n):
        psi = fock_state(n, m)
        assert expectation(psi, nop) == m


def test_tensor_product_identities():
    i2 = identity_op(HilbertLayout((2,)))
    i3 = identity_op(HilbertLayout((3,)))
    i6 = tensor_product(i2, i3)
    np.testing.assert_array_equal(i6.entries, np.eye(6))
    assert i6.layout.factors == (2, 3)


def test_tensor_product_basis_indexing():
    n = 5
    atom_e = basis_state(HilbertLayout((3,)), (1,))
    vac = fock_state(n, 0)
    joint = tensor_product(atom_e, vac)
    expected = np.zeros(3 * n)
    expected[1 * n + 0] = 1.0
    np.testing.assert_array_equal(joint.amplitudes, expected)


def test_tensor_product_operator_factorisation():
    # (sz x I)(I x sz) = sz x sz, by direct matrix arithmetic
    lay2 = HilbertLayout((2,))
    sz = OperatorMatrix(lay2, SZ)
    i2 = identity_op(lay2)
    left = tensor_product(sz, i2).entries @ tensor_product(i2, sz).entries
    np.testing.assert_allclose(left, tensor_product(sz, sz).entries, atol=1e-15)


def test_tensor_product_associativity():
    rng = np.random.default_rng(7)
    mats = []
    for d in (2, 3, 2):
        m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        mats.append(OperatorMatrix(HilbertLayout((d,)), m))
    a, b, c = mats
    left = tensor_product(tensor_product(a, b), c)
    right = tensor_product(a, tensor_product(b, c))
    assert left.layout.factors == right.layout.factors == (2, 3, 2)
    np.testing.assert_allclose(left.entries, right.entries, atol=1e-14)


def test_partial_trace_product_state():
    rng = np.random.default_rng(11)
    rho_a = random_density(rng, 3)
    rho_b = random_density(rng, 4)
    joint = DensityMatrix(HilbertLayout((3, 4)), np.kron(rho_a, rho_b))
    np.testing.assert_allclose(partial_trace(joint, 0).entries, rho_a, atol=1e-12)
    np.testing.assert_allclose(partial_trace(joint, 1).entries, rho_b, atol=1e-12)


def test_partial_trace_bell_marginal():
    amps = np.zeros(4, dtype=complex)
    amps[0] = amps[3] = 1 / np.sqrt(2)
    bell = StateVector(HilbertLayout((2, 2)), amps).projector()
    for keep in (0, 1):
        np.testing.assert_allclose(partial_trace(bell, keep).entries, np.eye(2) / 2, atol=1e-14)
    with pytest.raises(LayoutError):
        partial_trace(bell, 2)


def test_partial_trace_two_stage_state_oracle():
    # Brute-force construction of the post-two-stage atom-field state with the
    # field starting in vacuum: only the |e,0> and |g,1> branches survive.
    s1, s2 = 0.04, 0.07
    n = 4
    lay = HilbertLayout((3, n))
    a = annihilation_op(n).entries
    ad = a.conj().T
    vec = np.zeros(3 * n, dtype=complex)
    phi = np.zeros(n, dtype=complex)
    phi[0] = 1.0
    # assemble term by term (atom blocks: g=0, e=1, i=2)
    vec[1 * n: 2 * n] += phi - 0.5 * s1**2 * (a @ ad @ phi) - 0.5 * s2**2 * (ad @ a @ phi)
    vec[0 * n: 1 * n] += -1j * s1 * (ad @ phi)
    vec[2 * n: 3 * n] += -1j * s2 * (a @ phi)
    norm2 = float(np.real(np.vdot(vec, vec)))
    rho = DensityMatrix(lay, np.outer(vec, vec.conj()) / norm2)
    atom = partial_trace(rho, 0)
    assert atom.entries[0, 0].real == pytest.approx(s1**2 / norm2, rel=1e-12)
    assert atom.entries[2, 2].real == pytest.approx(0.0, abs=1e-15)
    assert np.trace(atom.entries).real == pytest.approx(1.0, abs=1e-12)


def test_partial_trace_preserves_trace():
    rng = np.random.default_rng(3)
    for factors in ((2, 3), (2, 2, 4), (3, 2, 2)):
        d = int(np.prod(factors))
        rho = DensityMatrix(HilbertLayout(factors), random_density(rng, d))
        for keep in range(len(factors)):
            red = partial_trace(rho, keep)
            assert abs(np.trace(red.entries) - 1.0) <= 1e-12


def test_expectation_and_trace_distance():
    n = 4
    vac = fock_state(n, 0)
    assert expectation(vac, number_op(n)) == 0
    rho = vac.projector()
    assert trace_distance(rho, rho) == 0.0
    one = fock_state(n, 1).projector()
    assert trace_distance(rho, one) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(LayoutError):
        expectation(vac, number_op(5))


def test_expectation_unnormalised_state():
    n = 3
    amps = 2.0 * fock_state(n, 1).amplitudes
    psi = StateVector(HilbertLayout((n,)), amps, normalized=False)
    assert expectation(psi, number_op(n)).real == pytest.approx(1.0)


def test_density_matrix_invariants_enforced():
    lay = HilbertLayout((2,))
    with pytest.raises(ValidationError):
        DensityMatrix(lay, np.array([[0.5, 0.5], [0.1, 0.5]]))  # not Hermitian
    with pytest.raises(ValidationError):
        DensityMatrix(lay, np.diag([0.7, 0.7]))  # trace 1.4
    with pytest.raises(ValidationError):
        DensityMatrix(lay, np.array([[1.2, 0.0], [0.0, -0.2]]))  # negative eigenvalue


def test_state_vector_norm_flag():
    lay = HilbertLayout((2,))
    with pytest.raises(ValidationError):
        StateVector(lay, np.array([1.0, 1.0]))
    st = StateVector(lay, np.array([1.0, 1.0]), normalized=False)
    assert st.norm() == pytest.approx(np.sqrt(2.0))
    assert st.unit().normalized


def test_arrays_are_immutable():
    op = annihilation_op(3)
    with pytest.raises(ValueError):
        op.entries[0, 0] = 5.0
    st = fock_state(3, 1)
    with pytest.raises(ValueError):
        st.amplitudes[0] = 1.0


def test_transition_op_basis_order():
    # atomic order (g, e, i) = (0, 1, 2); sigma_-^(eg) lowers e into g
    sm = transition_op(3, 0, 1)
    vec = np.zeros(3)
    vec[1] = 1.0
    np.testing.assert_array_equal(sm.entries @ vec, [1.0, 0.0, 0.0])

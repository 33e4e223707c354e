import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncphase.analytic import averaged_coefficients
from ncphase.core import ModelParams
from ncphase.fockspace import (
    BasisError,
    build_basis,
    interior_mask,
    particle_aux_basis,
    partial_vacuum_block,
    sub_basis,
)
from ncphase.hamiltonians import (
    QuadraticForm,
    auxiliary_fock,
    averaged_fock,
    averaged_hamiltonian,
    delta_h_fock,
    free_particle_fock,
    oscillator_fock,
    quadratic_form_at,
    quadratic_form_fock,
    squared_representation_fock,
    system_fock,
    total_fock,
)
from ncphase.representation import NcVectors, rotate_vectors
from ncphase.solvers import IndefiniteFormError, dense_eigen, williamson

NC = ModelParams(c_theta=0.1, c_eta=0.1)
BOTH = particle_aux_basis(4, 1.0, 1.0, 3, 3)
B_ONLY = particle_aux_basis(4, 1.0, 1.0, None, 3)


def ket_interior(op, guard=2) -> float:
    """max |<i|op|j>| over all bras i and interior kets j."""
    cols = op.matrix[:, np.flatnonzero(interior_mask(op.basis, guard))]
    return float(np.abs(cols.data).max()) if cols.nnz else 0.0


@pytest.mark.parametrize("c_th, c_et", [(0.1, 0.1), (0.7, 0.3), (0.0, 0.9)])
def test_two_path_oscillator(c_th, c_et):
    p = ModelParams(c_theta=c_th, c_eta=c_et, mass=1.3, omega=0.8)
    expanded = oscillator_fock(BOTH, p)
    squared = squared_representation_fock(BOTH, p, "oscillator")
    assert ket_interior(expanded - squared) <= 1e-12
    assert expanded.is_hermitian() and expanded.is_real


def test_two_path_free():
    p = ModelParams(c_eta=0.4, mass=0.7)
    expanded = free_particle_fock(B_ONLY, p)
    assert ket_interior(expanded - squared_representation_fock(B_ONLY, p, "free")) <= 1e-12
    kinetic = free_particle_fock(B_ONLY, ModelParams(mass=0.7))
    assert ket_interior(kinetic - squared_representation_fock(B_ONLY, ModelParams(mass=0.7), "free")) <= 1e-14


def _particle_average(op):
    return partial_vacuum_block(op, [0, 1, 2])


def test_partial_trace_reproduces_averaged_coefficients():
    p = NC
    block = _particle_average(oscillator_fock(BOTH, p))
    sb = sub_basis(BOTH, [0, 1, 2])
    np.testing.assert_allclose(block, averaged_fock(sb, p, "oscillator").dense(), atol=1e-12)
    a, b = averaged_coefficients(p)
    assert a == pytest.approx(0.5 * 1.0025, rel=1e-15) and b == pytest.approx(0.5 * 1.0025, rel=1e-15)
    free = ModelParams(c_eta=0.1)
    block = _particle_average(free_particle_fock(B_ONLY, free))
    np.testing.assert_allclose(block, averaged_fock(sub_basis(B_ONLY, [0, 1, 2]), free, "free").dense(), atol=1e-12)


@pytest.mark.parametrize("system, basis", [("oscillator", BOTH), ("free", B_ONLY)])
def test_delta_h(system, basis):
    p = ModelParams(c_theta=0.3, c_eta=0.5, mass=1.2, omega=0.9)
    dh = delta_h_fock(basis, p, system)
    assert dh.is_hermitian()
    assert np.abs(_particle_average(dh)).max() <= 1e-12
    identity_check = dh - system_fock(basis, p, system) + averaged_fock(basis, p, system)
    assert ket_interior(identity_check) <= 1e-12
    assert delta_h_fock(basis, ModelParams(), system).max_abs() == 0.0


def test_auxiliary():
    b = particle_aux_basis(2, 1.0, 1.0, 4, None)
    h = auxiliary_fock(b, ModelParams(omega_osc=100.0), "a")
    diag = np.diag(h.dense())
    assert diag[0] == pytest.approx(150.0, rel=1e-15)
    occ = b.occupation_table()[:, 3:].sum(axis=1)
    interior = interior_mask(b, 1)
    np.testing.assert_allclose(diag[interior], 100.0 * (occ[interior] + 1.5), rtol=1e-14)
    with pytest.raises(BasisError):
        auxiliary_fock(b, ModelParams(), "b")
    with pytest.raises(ValueError):
        auxiliary_fock(b, ModelParams(), "c")


def test_total_offsets():
    p = ModelParams(c_eta=0.1, omega_osc=100.0)
    free = total_fock(B_ONLY, p, "free")
    assert free.offset == 150.0 and free.dropped == ("a",)
    both = total_fock(BOTH, NC, "oscillator")
    assert both.offset == 0.0 and both.dropped == ()
    partial = build_basis([3] * 5, [1.0] * 5,
                          roles=["particle-x", "particle-y", "particle-z", "aux-b-1", "aux-b-2"])
    with pytest.raises(BasisError):
        total_fock(partial, ModelParams(), "free")
    with pytest.raises(BasisError):
        oscillator_fock(B_ONLY, NC)
    with pytest.raises(ValueError):
        total_fock(BOTH, NC, "rotor")


def test_total_commutative_is_decoupled():
    b = particle_aux_basis(3, 1.0, 1.0, 2, 2)
    p = ModelParams(omega_osc=10.0)
    total = total_fock(b, p, "oscillator")
    vals = np.linalg.eigvalsh(total.operator.dense())
    particle = np.linalg.eigvalsh(oscillator_fock(sub_basis(b, [0, 1, 2]), p).dense())
    aux = np.sort(np.add.outer(np.arange(2)[:, None] + np.arange(2), np.arange(2)).ravel())
    aux_single = 10.0 * (np.add.outer(np.add.outer(np.arange(2), np.arange(2)), np.arange(2)).ravel() + 1.5)
    expected = np.sort(np.add.outer(particle, np.add.outer(aux_single, aux_single).ravel()).ravel())
    assert aux.size == 8
    np.testing.assert_allclose(vals, expected, atol=1e-10)


def test_averaged_hamiltonian():
    free = averaged_hamiltonian(ModelParams(c_eta=0.1), "free")
    assert free.matrix[0, 0] == pytest.approx(0.0025, rel=1e-14)
    assert free.matrix[3, 3] == 1.0
    osc = averaged_hamiltonian(NC, "oscillator")
    np.testing.assert_allclose(np.diag(osc.matrix), [1.0025] * 6, rtol=1e-15)
    plain = averaged_hamiltonian(ModelParams(mass=2.0, omega=3.0), "oscillator")
    np.testing.assert_allclose(np.diag(plain.matrix), [18.0] * 3 + [0.5] * 3, rtol=1e-15)


def test_quadratic_form_examples():
    zero = NcVectors(np.zeros(3), np.zeros(3))
    m = quadratic_form_at(ModelParams(mass=2.0, omega=3.0), zero, "oscillator").matrix
    np.testing.assert_allclose(m, np.diag([18.0] * 3 + [0.5] * 3))
    # Landau: ((p_x + h y/2)^2 + (p_y - h x/2)^2) / 2m, hand expanded
    h, mass = 0.7, 1.9
    land = quadratic_form_at(ModelParams(mass=mass), NcVectors(np.zeros(3), [0, 0, h]), "free").matrix
    ref = np.zeros((6, 6))
    ref[0, 0] = ref[1, 1] = h**2 / (4 * mass)
    ref[3, 3] = ref[4, 4] = ref[5, 5] = 1 / mass
    ref[1, 3] = ref[3, 1] = h / (2 * mass)
    ref[0, 4] = ref[4, 0] = -h / (2 * mass)
    np.testing.assert_allclose(land, ref, atol=1e-15)
    # L_z = x p_y - y p_x enters as -t/2 L_z
    t = 0.3
    lz = quadratic_form_at(ModelParams(), NcVectors([0, 0, t], np.zeros(3)), "oscillator")
    z = np.array([1.0, 0, 0, 0, 1.0, 0])  # x = 1, p_y = 1, L_z = 1
    expected = 0.5 * (1.0 + 1.0) + 0.5 * 0.25 * t**2 * 1.0 - t / 2
    assert lz.energy(z) == pytest.approx(expected, rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(-1, 1), min_size=6, max_size=6),
    st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 0.1),
    st.floats(0, 2 * np.pi),
)
def test_rotation_invariance(vec, axis, angle):
    axis = np.asarray(axis) / np.linalg.norm(axis)
    v = NcVectors(vec[:3], vec[3:])
    p = ModelParams(mass=1.1, omega=0.9)
    a = williamson(quadratic_form_at(p, v, "oscillator")).frequencies
    b = williamson(quadratic_form_at(p, rotate_vectors(v, axis, angle), "oscillator")).frequencies
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_quadratic_form_validation_and_csv():
    with pytest.raises(ValueError):
        QuadraticForm(np.eye(3))
    with pytest.raises(ValueError):
        QuadraticForm(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        QuadraticForm(np.eye(4), n_dof=3)
    form = quadratic_form_at(NC, NcVectors([0.1, 0.2, 0.3], [0.3, -0.2, 0.1]), "oscillator")
    text = form.to_csv()
    assert text.startswith("# n_dof=3\n")
    back = QuadraticForm.from_csv(text)
    np.testing.assert_array_equal(back.matrix, form.matrix)
    with pytest.raises(ValueError):
        QuadraticForm.from_csv("1,0\n0,1\n")


def test_free_form_is_semidefinite():
    form = quadratic_form_at(ModelParams(c_eta=0.2), NcVectors(np.zeros(3), [0.1, 0.4, -0.2]), "free")
    spec = williamson(form)
    assert spec.zero_modes == 2 and spec.n_dof == 3
    with pytest.raises(IndefiniteFormError):
        williamson(QuadraticForm(np.diag([1.0, -1.0])))


def test_weyl_form_in_fock_space():
    form = QuadraticForm(np.array([[2.0, 0.0], [0.0, 0.5]]))
    b = build_basis([30], [1.0], [2.0])
    vals = dense_eigen(quadratic_form_fock(b, form).dense())[0]
    np.testing.assert_allclose(vals[:5], np.arange(5) + 0.5, atol=1e-12)

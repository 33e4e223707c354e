import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from ncphase.core import ModelParams
from ncphase.fockspace import AUX_A_ROLES, AUX_B_ROLES, BasisError, Poly, build_basis, compose, particle_aux_basis
from ncphase.representation import (
    NcVectors,
    audit_algebra,
    build_nc_operators,
    levi_civita,
    rotate_vectors,
    rotation_matrix,
)

SMALL = particle_aux_basis(4, 1.0, 1.0, 3, 3)


def _independent_xp(cap, scale, swapped):
    # ladder-operator construction written out directly
    a = np.diag(np.sqrt(np.arange(1, cap)), 1)
    if swapped:
        return 1j * (a.T - a) / math.sqrt(2 * scale), -math.sqrt(scale / 2) * (a + a.T)
    return (a + a.T) / math.sqrt(2 * scale), 1j * math.sqrt(scale / 2) * (a.T - a)


def _embed(basis, mode, m):
    mats = [sp.identity(c) for c in basis.mode_caps]
    mats[mode] = sp.csr_matrix(m)
    out = mats[0]
    for nxt in mats[1:]:
        out = sp.kron(out, nxt, format="csr")
    return out


def test_levi_civita():
    assert levi_civita(0, 1, 2) == 1 and levi_civita(1, 0, 2) == -1 and levi_civita(0, 0, 1) == 0


def test_commutative_limit_exact():
    b = particle_aux_basis(4, 1.3, 0.7)
    ops = build_nc_operators(b, ModelParams())
    for k in range(3):
        x = compose(b, Poly.x(k))
        p = compose(b, Poly.p(k))
        assert (ops.X[k] - x).max_abs() == 0.0
        assert (ops.P[k] - p).max_abs() == 0.0


def test_bopp_shift_against_independent_build():
    # X and P contain products on distinct modes only, so they are exact in any truncation
    b = particle_aux_basis(3, 1.0, 0.8, 2, 2)
    c_th, c_et = 0.4, 0.7
    ops = build_nc_operators(b, ModelParams(c_theta=c_th, c_eta=c_et))
    xs = [_embed(b, k, _independent_xp(3, 0.8, False)[0]) for k in range(3)]
    ps = [_embed(b, k, _independent_xp(3, 0.8, False)[1]) for k in range(3)]
    th = [c_th * _embed(b, b.mode(r), _independent_xp(2, 1.0, True)[0]) for r in AUX_A_ROLES]
    et = [c_et * _embed(b, b.mode(r), _independent_xp(2, 1.0, False)[1]) for r in AUX_B_ROLES]
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        X = xs[i] + 0.5 * (th[j] @ ps[k] - th[k] @ ps[j])
        P = ps[i] - 0.5 * (et[j] @ xs[k] - et[k] @ xs[j])
        assert abs(ops.X[i].matrix - X).max() <= 1e-15
        assert abs(ops.P[i].matrix - P).max() <= 1e-15


def test_hermiticity_and_missing_modes():
    ops = build_nc_operators(SMALL, ModelParams(c_theta=0.8, c_eta=0.5))
    for op in ops.X + ops.P:
        assert op.hermiticity_error() <= 1e-14
    with pytest.raises(BasisError):
        build_nc_operators(particle_aux_basis(3, 1.0, 1.0, None, 3), ModelParams(c_theta=0.1))
    with pytest.raises(BasisError):
        build_nc_operators(particle_aux_basis(3, 1.0, 1.0, 3, None), ModelParams(c_eta=0.1))
    with pytest.raises(BasisError):
        build_nc_operators(build_basis([3], [1.0]), ModelParams())


def test_xx_commutator_closed_form():
    b = SMALL
    ops = build_nc_operators(b, ModelParams(c_theta=0.3))
    a3 = compose(b, Poly.x(b.mode("aux-a-3")))
    c = ops.X[0] @ ops.X[1] - ops.X[1] @ ops.X[0] - a3 * (0.3j)
    from ncphase.fockspace import interior_residual

    assert interior_residual(c, 2) <= 1e-12


def test_audit_reference_case():
    report = audit_algebra(build_nc_operators(SMALL, ModelParams(c_theta=0.3, c_eta=0.3)), guard=2)
    names = [r.identity for r in report.rows]
    assert sum(n.startswith("[X") and ",X" in n for n in names) == 9
    assert sum(n.startswith("[P") for n in names) == 9
    assert sum(n.startswith("gamma") for n in names) == 9
    assert any(n.startswith("[theta1") for n in names) and any(n.startswith("[pb3") for n in names)
    assert report.passed(1e-12)
    assert report.to_csv().splitlines()[0] == "identity,max_residual,guard,dim"


def test_audit_zero_theta():
    report = audit_algebra(build_nc_operators(SMALL, ModelParams(c_eta=0.5)), guard=2)
    xx = [r.max_residual for r in report.rows if r.identity.startswith("[X") and ",X" in r.identity]
    assert xx == [0.0] * 9


def test_audit_detects_wrong_algebra():
    # X built with the wrong sign of the shift breaks [X_i, P_j]
    ops = build_nc_operators(SMALL, ModelParams(c_theta=0.3, c_eta=0.3))
    X = tuple(compose(SMALL, 2 * ops.polys.x[i] - ops.polys.X[i]) for i in range(3))
    flipped = type(ops)(X, ops.P, ops.theta_op, ops.eta_op, ops.params, ops.polys)
    report = audit_algebra(flipped, guard=2)
    bad = {r.identity for r in report.rows if r.max_residual > 1e-12}
    assert "[X1,X2]" in bad and "[X1,P2]" in bad and "gamma[X1,P2]" in bad
    assert "[P1,P2]" not in bad


@settings(max_examples=6, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_audit_random_constants(c_th, c_et):
    report = audit_algebra(build_nc_operators(SMALL, ModelParams(c_theta=c_th, c_eta=c_et)), guard=2)
    assert report.max_residual <= 1e-12


def test_guard_range():
    ops = build_nc_operators(SMALL, ModelParams(c_theta=0.1, c_eta=0.1))
    with pytest.raises(BasisError):
        audit_algebra(ops, guard=3)


def test_rotations():
    v = NcVectors([0.3, -0.2, 0.9], [0.1, 0.5, -0.4])
    axis = np.array([1.0, 2.0, 2.0]) / 3.0
    np.testing.assert_array_equal(rotation_matrix(axis, 0.0), np.eye(3))
    np.testing.assert_allclose(rotation_matrix(axis, 2 * np.pi), np.eye(3), atol=1e-15)
    r = rotate_vectors(v, axis, 1.234)
    assert np.linalg.norm(r.theta) == pytest.approx(np.linalg.norm(v.theta), abs=1e-14)
    assert np.linalg.norm(r.eta) == pytest.approx(np.linalg.norm(v.eta), abs=1e-14)
    assert r.theta @ r.eta == pytest.approx(v.theta @ v.eta, abs=1e-14)
    with pytest.raises(ValueError):
        rotation_matrix([1.0, 1.0, 0.0], 0.3)
    with pytest.raises(ValueError):
        NcVectors([np.nan, 0, 0], [0, 0, 0])
    with pytest.raises(ValueError):
        v.theta[0] = 1.0

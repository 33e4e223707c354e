"""Bopp-shift realization of the noncommuting coordinates and momenta.

    X_i = x_i + 1/2 [theta x p]_i,    P_i = p_i - 1/2 [eta x x]_i,

with the operator-valued vectors theta_i = c_theta a~_i (a-oscillator
coordinates) and eta_i = c_eta p~b_i (b-oscillator momenta).
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .core import ModelParams
from .fockspace import (
    AUX_A_ROLES,
    AUX_B_ROLES,
    PARTICLE_ROLES,
    BasisError,
    FockBasis,
    FockOperator,
    Poly,
    compose,
    interior_mask,
)

EPS = np.zeros((3, 3, 3))
for _i, _j, _k in itertools.permutations(range(3)):
    EPS[_i, _j, _k] = np.linalg.det(np.eye(3)[[_i, _j, _k]])


def levi_civita(i: int, j: int, k: int) -> float:
    return EPS[i, j, k]


@dataclass(frozen=True)
class NcVectors:
    """c-number samples of the theta and eta vectors."""

    theta: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        for name in ("theta", "eta"):
            v = np.asarray(getattr(self, name), dtype=float).reshape(3)
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} has non-finite components")
            v.setflags(write=False)
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class NcPolys:
    """Symbolic X, P, theta, eta as polynomials in basis mode factors."""

    X: tuple[Poly, Poly, Poly]
    P: tuple[Poly, Poly, Poly]
    theta: tuple[Poly, Poly, Poly]
    eta: tuple[Poly, Poly, Poly]
    x: tuple[Poly, Poly, Poly]
    p: tuple[Poly, Poly, Poly]


@dataclass(frozen=True)
class NcOperators:
    X: tuple[FockOperator, ...]
    P: tuple[FockOperator, ...]
    theta_op: tuple[FockOperator, ...]
    eta_op: tuple[FockOperator, ...]
    params: ModelParams
    polys: NcPolys

    @property
    def basis(self) -> FockBasis:
        return self.X[0].basis


def _require(basis: FockBasis, roles, why: str):
    missing = [r for r in roles if r not in basis.roles]
    if missing:
        raise BasisError(f"{why} needs modes {missing} absent from the basis")


def nc_polys(basis: FockBasis, params: ModelParams) -> NcPolys:
    _require(basis, PARTICLE_ROLES, "particle coordinates")
    pm = basis.modes(PARTICLE_ROLES)
    x = tuple(Poly.x(k) for k in pm)
    p = tuple(Poly.p(k) for k in pm)
    if params.c_theta != 0.0:
        _require(basis, AUX_A_ROLES, "c_theta > 0")
        theta = tuple(params.c_theta * Poly.x(k) for k in basis.modes(AUX_A_ROLES))
    else:
        theta = (Poly(),) * 3
    if params.c_eta != 0.0:
        _require(basis, AUX_B_ROLES, "c_eta > 0")
        eta = tuple(params.c_eta * Poly.p(k) for k in basis.modes(AUX_B_ROLES))
    else:
        eta = (Poly(),) * 3
    X = tuple(x[i] + 0.5 * cross(theta, p)[i] for i in range(3))
    P = tuple(p[i] - 0.5 * cross(eta, x)[i] for i in range(3))
    return NcPolys(X, P, theta, eta, x, p)


def cross(u, v):
    """[u x v] for 3-sequences of polynomials (or numbers)."""
    return tuple(
        sum((EPS[i, j, k] * (u[j] * v[k]) for j in range(3) for k in range(3) if EPS[i, j, k]), Poly())
        for i in range(3)
    )


def dot(u, v):
    return sum((u[i] * v[i] for i in range(3)), Poly())


def build_nc_operators(basis: FockBasis, params: ModelParams) -> NcOperators:
    polys = nc_polys(basis, params)

    def build(seq):
        return tuple(compose(basis, q) for q in seq)

    return NcOperators(
        X=build(polys.X),
        P=build(polys.P),
        theta_op=build(polys.theta),
        eta_op=build(polys.eta),
        params=params,
        polys=polys,
    )


# --------------------------------------------------------------------------
# algebra audit


@dataclass(frozen=True)
class AuditRow:
    identity: str
    max_residual: float
    guard: int
    dim: int


@dataclass(frozen=True)
class AuditReport:
    rows: tuple[AuditRow, ...]

    @property
    def max_residual(self) -> float:
        return max((r.max_residual for r in self.rows), default=0.0)

    def passed(self, tol: float = 1e-12) -> bool:
        return self.max_residual <= tol

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["identity", "max_residual", "guard", "dim"])
        for r in self.rows:
            w.writerow([r.identity, f"{r.max_residual:.17g}", r.guard, r.dim])
        return buf.getvalue()


class _Interior:
    """Commutators and products applied to interior kets, with every bra kept.

    Each audited product raises any occupation by at most two, so with guard
    2 no intermediate state reaches the truncation edge and the columns are
    exact.  Keeping all rows makes the check strictly stronger than the
    two-sided interior block, which for small auxiliary caps would only see
    the auxiliary vacuum, where theta and eta vanish.
    """

    def __init__(self, basis: FockBasis, guard: int):
        if guard < 0 or guard >= min(basis.mode_caps):
            raise BasisError(f"guard {guard} must lie in 0..{min(basis.mode_caps) - 1}")
        self.idx = np.flatnonzero(interior_mask(basis, guard))
        self.dim = basis.dim

    def commutator(self, a: FockOperator, b: FockOperator) -> np.ndarray:
        i = self.idx
        return (a.matrix @ b.matrix[:, i] - b.matrix @ a.matrix[:, i]).toarray()

    def block(self, op: FockOperator) -> np.ndarray:
        return op.matrix[:, self.idx].toarray()

    def product(self, a: FockOperator, b: FockOperator) -> np.ndarray:
        return (a.matrix @ b.matrix[:, self.idx]).toarray()

    def identity(self) -> np.ndarray:
        out = np.zeros((self.dim, len(self.idx)))
        out[self.idx, np.arange(len(self.idx))] = 1.0
        return out


def _res(m: np.ndarray) -> float:
    return float(np.abs(m).max()) if m.size else 0.0


def audit_algebra(ops: NcOperators, guard: int = 2) -> AuditReport:
    """Residuals of every commutation relation of the algebra on interior kets.

    Covers [X_i, X_j], [P_i, P_j], [X_i, P_j] against their closed forms,
    [X_i, P_j] against delta_ij + gamma_ij with gamma built from the
    antisymmetric tensors theta_ik, eta_jk, and the vanishing commutators of
    the auxiliary operators with X and P.
    """
    basis = ops.basis
    it = _Interior(basis, guard)
    c_th, c_et = ops.params.c_theta, ops.params.c_eta
    rows: list[AuditRow] = []
    ident = it.identity()

    def add(name, residual):
        rows.append(AuditRow(name, residual, guard, basis.dim))

    theta = [it.block(t) for t in ops.theta_op]
    eta = [it.block(e) for e in ops.eta_op]
    for i in range(3):
        for j in range(3):
            rhs = 1j * sum(EPS[i, j, k] * theta[k] for k in range(3))
            add(f"[X{i+1},X{j+1}]", _res(it.commutator(ops.X[i], ops.X[j]) - rhs))
    for i in range(3):
        for j in range(3):
            rhs = 1j * sum(EPS[i, j, k] * eta[k] for k in range(3))
            add(f"[P{i+1},P{j+1}]", _res(it.commutator(ops.P[i], ops.P[j]) - rhs))

    a_ops = p_ops = None
    if basis.has(*AUX_A_ROLES) and basis.has(*AUX_B_ROLES):
        a_ops = [compose(basis, Poly.x(k)) for k in basis.modes(AUX_A_ROLES)]
        p_ops = [compose(basis, Poly.p(k)) for k in basis.modes(AUX_B_ROLES)]
    for i in range(3):
        for j in range(3):
            xp = it.commutator(ops.X[i], ops.P[j])
            rhs = 1j * (i == j) * ident
            if a_ops is not None and c_th * c_et != 0.0:
                k4 = c_th * c_et / 4.0
                adotp = sum(it.product(a_ops[k], p_ops[k]) for k in range(3))
                rhs = rhs + 1j * k4 * ((i == j) * adotp - it.product(a_ops[j], p_ops[i]))
            add(f"[X{i+1},P{j+1}]", _res(xp - rhs))

    # gamma_ij = sum_k theta_ik eta_jk / 4 with theta_ik = sum_l eps_ikl theta_l
    theta_t = [[sum(EPS[i, k, l] * ops.polys.theta[l] for l in range(3)) for k in range(3)] for i in range(3)]
    eta_t = [[sum(EPS[j, k, l] * ops.polys.eta[l] for l in range(3)) for k in range(3)] for j in range(3)]
    for i in range(3):
        for j in range(3):
            g = sum((theta_t[i][k] * eta_t[j][k] for k in range(3)), Poly())
            gamma = it.block(compose(basis, 0.25 * g, hermitian=False)) if len(g) else 0.0
            xp = it.commutator(ops.X[i], ops.P[j])
            add(f"gamma[X{i+1},P{j+1}]", _res(xp - 1j * ((i == j) * ident + gamma)))

    aux = []
    if basis.has(*AUX_A_ROLES):
        aux += [(f"a{k+1}", compose(basis, Poly.x(m))) for k, m in enumerate(basis.modes(AUX_A_ROLES))]
    if basis.has(*AUX_B_ROLES):
        aux += [(f"pb{k+1}", compose(basis, Poly.p(m))) for k, m in enumerate(basis.modes(AUX_B_ROLES))]
    aux += [(f"theta{k+1}", t) for k, t in enumerate(ops.theta_op) if t.nnz]
    aux += [(f"eta{k+1}", e) for k, e in enumerate(ops.eta_op) if e.nnz]
    for name, a in aux:
        for label, seq in (("X", ops.X), ("P", ops.P)):
            for i in range(3):
                add(f"[{name},{label}{i+1}]", _res(it.commutator(a, seq[i])))
    return AuditReport(tuple(rows))


# --------------------------------------------------------------------------
# rotations


def rotation_matrix(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float).reshape(3)
    if abs(np.linalg.norm(axis) - 1.0) > 1e-12:
        raise ValueError(f"rotation axis must be a unit vector, |axis| = {np.linalg.norm(axis)}")
    return Rotation.from_rotvec(angle * axis).as_matrix()


def rotate_vectors(v: NcVectors, axis, angle: float) -> NcVectors:
    r = rotation_matrix(axis, angle)
    return NcVectors(r @ v.theta, r @ v.eta)

"""Hamiltonians of the free particle and the oscillator.

Two realizations are provided: Fock operators with the quantum
noncommutativity vectors, and quadratic forms with theta and eta frozen to
c-numbers.  Quadratic forms use H = 1/2 z^T M z with z = (x1, x2, x3, p1,
p2, p3).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .analytic import averaged_coefficients
from .core import ModelParams, mean_eta_sq, mean_theta_sq
from .fockspace import (
    AUX_A_ROLES,
    AUX_B_ROLES,
    PARTICLE_ROLES,
    BasisError,
    FockBasis,
    FockOperator,
    Poly,
    compose,
)
from .representation import EPS, NcVectors, build_nc_operators, cross, dot, nc_polys

SYSTEMS = ("free", "oscillator")


def _check_system(system: str):
    if system not in SYSTEMS:
        raise ValueError(f"system must be one of {SYSTEMS}, got {system!r}")


def system_params(params: ModelParams, system: str) -> ModelParams:
    """Parameters with omega forced to 0 for the free particle.

    c_theta is zeroed as well since coordinate noncommutativity does not
    enter the free Hamiltonian.
    """
    _check_system(system)
    return params.with_(omega=0.0, c_theta=0.0) if system == "free" else params


# --------------------------------------------------------------------------
# symbolic builders


def _sq(seq) -> Poly:
    return dot(seq, seq)


def hamiltonian_poly(basis: FockBasis, params: ModelParams, system: str) -> Poly:
    """Expanded Hamiltonian: kinetic, trap, the two L couplings and the two squares."""
    params = system_params(params, system)
    q = nc_polys(basis, params)
    m, w2 = params.mass, params.omega**2
    ang = cross(q.x, q.p)
    h = (1 / (2 * m)) * _sq(q.p) - (1 / (2 * m)) * dot(q.eta, ang)
    h = h + (1 / (8 * m)) * _sq(cross(q.eta, q.x))
    if w2:
        h = h + (m * w2 / 2) * _sq(q.x) - (m * w2 / 2) * dot(q.theta, ang)
        h = h + (m * w2 / 8) * _sq(cross(q.theta, q.p))
    return h


def averaged_poly(basis: FockBasis, params: ModelParams, system: str) -> Poly:
    a, b = averaged_coefficients(system_params(params, system))
    pm = basis.modes(PARTICLE_ROLES)
    return sum((a * Poly.p(k) * Poly.p(k) + b * Poly.x(k) * Poly.x(k) for k in pm), Poly())


def delta_poly(basis: FockBasis, params: ModelParams, system: str) -> Poly:
    """The perturbation written out term by term.

    For the oscillator the quartic theta term is m w^2 [theta x p]^2 / 8,
    matching the expanded Hamiltonian.
    """
    params = system_params(params, system)
    q = nc_polys(basis, params)
    m, w2 = params.mass, params.omega**2
    ang = cross(q.x, q.p)
    d = -(1 / (2 * m)) * dot(q.eta, ang) + (1 / (8 * m)) * _sq(cross(q.eta, q.x))
    d = d - (mean_eta_sq(params) / (12 * m)) * _sq(q.x)
    if w2:
        d = d - (m * w2 / 2) * dot(q.theta, ang) + (m * w2 / 8) * _sq(cross(q.theta, q.p))
        d = d - (m * w2 * mean_theta_sq(params) / 12) * _sq(q.p)
    return d


def auxiliary_poly(basis: FockBasis, params: ModelParams, which: str) -> Poly:
    roles = {"a": AUX_A_ROLES, "b": AUX_B_ROLES}[which]
    if not basis.has(*roles):
        raise BasisError(f"basis lacks the {which}-oscillator modes")
    w = params.omega_osc
    return sum(
        ((w / 2) * (Poly.p(k) * Poly.p(k) + Poly.x(k) * Poly.x(k)) for k in basis.modes(roles)),
        Poly(),
    )


# --------------------------------------------------------------------------
# Fock realizations


def _needs(basis: FockBasis, params: ModelParams, system: str):
    if not basis.has(*PARTICLE_ROLES):
        raise BasisError("basis lacks particle modes")
    if params.c_eta != 0.0 and not basis.has(*AUX_B_ROLES):
        raise BasisError("c_eta > 0 needs the b-oscillator modes")
    if system == "oscillator" and params.omega != 0.0 and params.c_theta != 0.0 and not basis.has(*AUX_A_ROLES):
        raise BasisError("c_theta > 0 with omega > 0 needs the a-oscillator modes")


def free_particle_fock(basis: FockBasis, params: ModelParams) -> FockOperator:
    _needs(basis, params, "free")
    return compose(basis, hamiltonian_poly(basis, params, "free"))


def oscillator_fock(basis: FockBasis, params: ModelParams) -> FockOperator:
    _needs(basis, params, "oscillator")
    return compose(basis, hamiltonian_poly(basis, params, "oscillator"))


def system_fock(basis: FockBasis, params: ModelParams, system: str) -> FockOperator:
    _check_system(system)
    return free_particle_fock(basis, params) if system == "free" else oscillator_fock(basis, params)


def squared_representation_fock(basis: FockBasis, params: ModelParams, system: str) -> FockOperator:
    """sum P_i^2/2m (+ m w^2 X_i^2/2) from products of the built X, P operators."""
    params = system_params(params, system)
    ops = build_nc_operators(basis, params)
    m, w2 = params.mass, params.omega**2
    h = sum((ops.P[i] @ ops.P[i] for i in range(1, 3)), ops.P[0] @ ops.P[0]) * (1 / (2 * m))
    if w2:
        h = h + sum((ops.X[i] @ ops.X[i] for i in range(1, 3)), ops.X[0] @ ops.X[0]) * (m * w2 / 2)
    return h


def auxiliary_fock(basis: FockBasis, params: ModelParams, which: str) -> FockOperator:
    if which not in ("a", "b"):
        raise ValueError(f"which must be 'a' or 'b', got {which!r}")
    return compose(basis, auxiliary_poly(basis, params, which))


def averaged_fock(basis: FockBasis, params: ModelParams, system: str) -> FockOperator:
    return compose(basis, averaged_poly(basis, params, system))


def delta_h_fock(basis: FockBasis, params: ModelParams, system: str) -> FockOperator:
    _check_system(system)
    _needs(basis, params, system)
    return compose(basis, delta_poly(basis, params, system))


@dataclass(frozen=True)
class TotalHamiltonian:
    """System plus auxiliary Hamiltonians with dropped oscillators accounted for.

    ``offset`` is the zero-point energy 3 omega_osc / 2 of each auxiliary
    oscillator absent from the basis; eigenvalues of ``operator`` plus
    ``offset`` are total energies.
    """

    operator: FockOperator
    offset: float
    dropped: tuple[str, ...]
    aux_zero_point: float

    def particle_energies(self, eigenvalues) -> np.ndarray:
        """Eigenvalues shifted by the zero point of both auxiliary oscillators."""
        return np.asarray(eigenvalues) + self.offset - self.aux_zero_point


def total_fock(basis: FockBasis, params: ModelParams, system: str) -> TotalHamiltonian:
    _check_system(system)
    _needs(basis, params, system)
    poly = hamiltonian_poly(basis, params, system)
    offset, dropped = 0.0, []
    for which, roles in (("a", AUX_A_ROLES), ("b", AUX_B_ROLES)):
        present = [r in basis.roles for r in roles]
        if all(present):
            poly = poly + auxiliary_poly(basis, params, which)
        elif any(present):
            raise BasisError(f"basis holds only part of the {which}-oscillator modes")
        else:
            offset += 1.5 * params.omega_osc
            dropped.append(which)
    return TotalHamiltonian(compose(basis, poly), offset, tuple(dropped), 3.0 * params.omega_osc)


# --------------------------------------------------------------------------
# quadratic forms


@dataclass(frozen=True)
class QuadraticForm:
    """Symmetric phase-space matrix M of H = 1/2 z^T M z, z = (x, p)."""

    matrix: np.ndarray
    n_dof: int = field(default=0)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
            raise ValueError(f"quadratic form needs a square even-sized matrix, got {m.shape}")
        n = m.shape[0] // 2
        if n < 1:
            raise ValueError("n_dof must be >= 1")
        if self.n_dof not in (0, n):
            raise ValueError(f"n_dof {self.n_dof} inconsistent with matrix size {m.shape}")
        if np.abs(m - m.T).max() > 1e-14 * max(1.0, np.abs(m).max()):
            raise ValueError("quadratic form matrix is not symmetric")
        m = (m + m.T) / 2
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "n_dof", n)

    def energy(self, z) -> float:
        z = np.asarray(z, dtype=float)
        return 0.5 * float(z @ self.matrix @ z)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# n_dof={self.n_dof}\n")
        w = csv.writer(buf, lineterminator="\n")
        for row in self.matrix:
            w.writerow([f"{v:.17g}" for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "QuadraticForm":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = lines[0]
        if not header.startswith("# n_dof="):
            raise ValueError("missing '# n_dof=' header")
        n = int(header.split("=", 1)[1])
        rows = [[float(v) for v in ln.split(",")] for ln in lines[1:]]
        return cls(np.array(rows), n)


def averaged_hamiltonian(params: ModelParams, system: str) -> QuadraticForm:
    a, b = averaged_coefficients(system_params(params, system))
    return QuadraticForm(np.diag([2 * b] * 3 + [2 * a] * 3))


def _cross_matrix(v) -> np.ndarray:
    """C with C[j, k] = sum_i v_i eps_ijk, so v . (x cross p) = x^T C p."""
    return np.einsum("i,ijk->jk", np.asarray(v, dtype=float), EPS)


def quadratic_form_at(params: ModelParams, nc: NcVectors, system: str) -> QuadraticForm:
    params = system_params(params, system)
    m, w2 = params.mass, params.omega**2
    th, et = nc.theta, nc.eta
    eye = np.eye(3)
    mxx = (et @ et * eye - np.outer(et, et)) / (4 * m) + m * w2 * eye
    mpp = eye / m + m * w2 * (th @ th * eye - np.outer(th, th)) / 4
    mxp = -_cross_matrix(et) / (2 * m) - m * w2 * _cross_matrix(th) / 2
    return QuadraticForm(np.block([[mxx, mxp], [mxp.T, mpp]]))


def quadratic_form_poly(basis: FockBasis, form: QuadraticForm, modes=None) -> Poly:
    """Weyl-ordered operator 1/2 sum_ab M_ab (z_a z_b + z_b z_a)/2."""
    n = form.n_dof
    modes = list(range(n)) if modes is None else list(modes)
    if len(modes) != n:
        raise ValueError("need one mode per degree of freedom")
    z = [Poly.x(k) for k in modes] + [Poly.p(k) for k in modes]
    h = Poly()
    mat = form.matrix
    for a in range(2 * n):
        for b in range(2 * n):
            if mat[a, b]:
                h = h + (0.25 * mat[a, b]) * (z[a] * z[b] + z[b] * z[a])
    return h


def quadratic_form_fock(basis: FockBasis, form: QuadraticForm, modes=None) -> FockOperator:
    return compose(basis, quadratic_form_poly(basis, form, modes))

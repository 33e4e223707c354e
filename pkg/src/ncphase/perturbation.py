"""Rayleigh-Schroedinger corrections from Delta H = H - <H>_ab.

The unperturbed Hamiltonian is the auxiliary-averaged particle Hamiltonian
plus both auxiliary oscillators.  Its eigenstates are (eigenvectors of the
averaged particle Hamiltonian in the truncated basis) x (auxiliary number
states).  Particle modes must come first in the basis.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass

import numpy as np

from .core import ModelParams
from .fockspace import AUX_A_ROLES, AUX_B_ROLES, PARTICLE_ROLES, BasisError, FockBasis, compose, sub_basis
from .hamiltonians import (
    QuadraticForm,
    averaged_hamiltonian,
    averaged_poly,
    delta_h_fock,
    quadratic_form_at,
    system_params,
)
from .representation import NcVectors


class DegenerateDenominatorError(ArithmeticError):
    pass


@dataclass(frozen=True)
class UnperturbedSpectrum:
    particle_energies: np.ndarray
    particle_vectors: np.ndarray
    aux_energies: np.ndarray
    particle_dim: int
    aux_dim: int

    def state(self, index: int) -> np.ndarray:
        if not 0 <= index < self.particle_dim:
            raise IndexError(f"particle state {index} outside 0..{self.particle_dim - 1}")
        vac = np.zeros(self.aux_dim)
        vac[0] = 1.0
        return np.kron(self.particle_vectors[:, index], vac)

    def energy(self, index: int) -> float:
        return float(self.particle_energies[index] + self.aux_energies[0])


def _particle_modes(basis: FockBasis) -> list[int]:
    pm = basis.modes(PARTICLE_ROLES)
    if pm != [0, 1, 2]:
        raise BasisError("particle modes must be the first three modes of the basis")
    return pm


def unperturbed_spectrum(basis: FockBasis, params: ModelParams, system: str) -> UnperturbedSpectrum:
    pm = _particle_modes(basis)
    pb = sub_basis(basis, pm)
    h = compose(pb, averaged_poly(pb, params, system)).dense()
    eps, vecs = np.linalg.eigh(h)
    aux_modes = [k for k in range(basis.n_modes) if k not in pm]
    aux_caps = [basis.mode_caps[k] for k in aux_modes]
    occ = np.indices(aux_caps).reshape(len(aux_caps), -1).sum(axis=0) if aux_caps else np.zeros(1)
    n_osc = sum(basis.has(*roles) for roles in (AUX_A_ROLES, AUX_B_ROLES))
    aux_e = params.omega_osc * (occ + 1.5 * n_osc)
    return UnperturbedSpectrum(eps, vecs, np.asarray(aux_e, dtype=float), pb.dim, int(np.prod(aux_caps)))


def first_order_correction(basis: FockBasis, params: ModelParams, system: str, particle_state_index: int) -> float:
    spec = unperturbed_spectrum(basis, params, system)
    psi = spec.state(particle_state_index)
    dh = delta_h_fock(basis, params, system)
    return float(np.real(np.vdot(psi, dh.matrix @ psi)))


@dataclass(frozen=True)
class SecondOrderResult:
    correction: float
    tail_bound: float
    n_terms: int
    unperturbed_energy: float
    skipped_degenerate: int


def second_order_correction(
    basis: FockBasis,
    params: ModelParams,
    system: str,
    particle_state_index: int,
    n_intermediate: int | None = None,
    degenerate_tol: float = 1e-12,
) -> SecondOrderResult:
    """sum_{k != 0} |<k|dH|0>|^2 / (E_0 - E_k) over intermediate states sorted by energy.

    By default all intermediate states within 3 omega_osc of E_0 are kept.
    States degenerate with E_0 must have vanishing coupling; otherwise
    ``DegenerateDenominatorError`` is raised.
    """
    spec = unperturbed_spectrum(basis, params, system)
    psi = spec.state(particle_state_index)
    dh = delta_h_fock(basis, params, system)
    coupled = (dh.matrix @ psi).reshape(spec.particle_dim, spec.aux_dim)
    amp = spec.particle_vectors.conj().T @ coupled
    num = (np.abs(amp) ** 2).ravel()
    energies = (spec.particle_energies[:, None] + spec.aux_energies[None, :]).ravel()
    e0 = spec.energy(particle_state_index)
    self_index = particle_state_index * spec.aux_dim
    gap = e0 - energies
    degenerate = np.abs(gap) < degenerate_tol * max(1.0, abs(e0))
    degenerate[self_index] = False
    bad = degenerate & (num > degenerate_tol)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise DegenerateDenominatorError(
            f"intermediate state {k} is degenerate with the reference state but couples with "
            f"|<k|dH|0>|^2 = {num[k]:.3g}"
        )
    keep = ~degenerate
    keep[self_index] = False
    idx = np.flatnonzero(keep)
    idx = idx[np.argsort(energies[idx], kind="stable")]
    if n_intermediate is None:
        idx = idx[energies[idx] - e0 <= 3.0 * params.omega_osc + 1e-9 * params.omega_osc]
    else:
        idx = idx[:n_intermediate]
    terms = num[idx] / gap[idx]
    tail = float(abs(terms[-1])) if terms.size else 0.0
    return SecondOrderResult(float(terms.sum()), tail, int(idx.size), e0, int(degenerate.sum()))


@dataclass(frozen=True)
class AverageCheck:
    max_difference: float
    quadrature_average: QuadraticForm
    closed_form: QuadraticForm
    n_points: int


def gaussian_average_check(params: ModelParams, system: str, quadrature_order: int = 3) -> AverageCheck:
    """Gauss-Hermite average of the fixed-(theta, eta) form against the closed form.

    theta and eta are Gaussian with per-component variances c_theta^2/2 and
    c_eta^2/2, the ground-state distributions of c_theta a~ and c_eta p~b.
    """
    if quadrature_order < 3:
        raise ValueError("quadrature_order must be >= 3")
    x, w = np.polynomial.hermite_e.hermegauss(quadrature_order)
    w = w / w.sum()
    sp = system_params(params, system)
    s_th, s_et = sp.c_theta / np.sqrt(2.0), sp.c_eta / np.sqrt(2.0)
    # accumulate deviations from the theta = eta = 0 form so that vanishing
    # constants give an exactly zero difference
    base = quadratic_form_at(params, NcVectors(np.zeros(3), np.zeros(3)), system).matrix
    acc = np.zeros((6, 6))
    count = 0
    for idx in itertools.product(range(quadrature_order), repeat=6):
        i = np.array(idx)
        weight = np.prod(w[i])
        nc = NcVectors(s_th * x[i[:3]], s_et * x[i[3:]])
        acc += weight * (quadratic_form_at(params, nc, system).matrix - base)
        count += 1
    acc = base + acc
    avg = QuadraticForm((acc + acc.T) / 2)
    ref = averaged_hamiltonian(params, system)
    return AverageCheck(float(np.abs(avg.matrix - ref.matrix).max()), avg, ref, count)


def scaling_csv(rows) -> str:
    """Rows of (omega_osc, state, correction, tail_bound) as CSV."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["omega_osc", "state", "order2_correction", "tail_bound"])
    for wosc, state, corr, tail in rows:
        w.writerow([f"{wosc:.17g}", state, f"{corr:.17g}", f"{tail:.17g}"])
    return buf.getvalue()

"""Closed-form spectra, effective mass/frequency and minimal lengths."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

from .core import ModelParams, mean_eta_sq, mean_theta_sq

PROVENANCES = ("analytic", "fock-numeric", "williamson")


@dataclass(frozen=True)
class SpectrumTable:
    """Energies labelled by three oscillator quantum numbers.

    Rows are ``(n1, n2, n3, energy)`` sorted by energy with ties broken
    lexicographically on the quantum numbers.
    """

    rows: tuple[tuple[int, int, int, float], ...]
    provenance: str = "analytic"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        rows = tuple(sorted(
            ((int(a), int(b), int(c), float(e)) for a, b, c, e in self.rows),
            key=lambda r: (r[3], r[0], r[1], r[2]),
        ))
        if not all(math.isfinite(r[3]) for r in rows):
            raise ValueError("non-finite energy in spectrum table")
        object.__setattr__(self, "rows", rows)

    def __len__(self):
        return len(self.rows)

    @property
    def energies(self) -> list[float]:
        return [r[3] for r in self.rows]

    def energy(self, n1: int, n2: int, n3: int) -> float:
        for row in self.rows:
            if row[:3] == (n1, n2, n3):
                return row[3]
        raise KeyError((n1, n2, n3))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n1", "n2", "n3", "energy"])
        for n1, n2, n3, e in self.rows:
            w.writerow([n1, n2, n3, f"{e:.17g}"])
        return buf.getvalue()


def _ladder_table(quantum: float, n_max: int, metadata: dict) -> SpectrumTable:
    if n_max < 0:
        raise ValueError(f"n_max must be >= 0, got {n_max}")
    rows = [
        (n1, n2, n3, quantum * (n1 + n2 + n3 + 1.5))
        for n1 in range(n_max + 1)
        for n2 in range(n_max + 1 - n1)
        for n3 in range(n_max + 1 - n1 - n2)
    ]
    return SpectrumTable(tuple(rows), "analytic", dict(metadata, quantum=quantum))


def free_particle_frequency(params: ModelParams) -> float:
    """Oscillator frequency sqrt(<eta^2>/(6 m^2)) acquired by a free particle."""
    return math.sqrt(mean_eta_sq(params) / (6.0 * params.mass**2))


def free_particle_spectrum(params: ModelParams, n_max: int) -> SpectrumTable:
    return _ladder_table(free_particle_frequency(params), n_max, {"system": "free"})


def averaged_coefficients(params: ModelParams) -> tuple[float, float]:
    """Coefficients (A, B) of the auxiliary-averaged Hamiltonian A p^2 + B x^2."""
    m, w = params.mass, params.omega
    a = 1.0 / (2.0 * m) + m * w**2 * mean_theta_sq(params) / 12.0
    b = m * w**2 / 2.0 + mean_eta_sq(params) / (12.0 * m)
    return a, b


def effective_mass(params: ModelParams) -> float:
    m, w = params.mass, params.omega
    return 6.0 * m / (6.0 + m**2 * w**2 * mean_theta_sq(params))


def effective_frequency(params: ModelParams) -> float:
    m, w = params.mass, params.omega
    return math.sqrt(
        (m * w**2 + mean_eta_sq(params) / (6.0 * m))
        * (1.0 / m + m * w**2 * mean_theta_sq(params) / 6.0)
    )


def oscillator_spectrum(params: ModelParams, n_max: int) -> SpectrumTable:
    return _ladder_table(effective_frequency(params), n_max, {"system": "oscillator"})


def length_sq_quantum(params: ModelParams) -> float:
    """Level spacing of alpha^2 P^2 + beta^2 X^2."""
    a, b = params.alpha, params.beta
    if a == 0.0 and b == 0.0:
        raise ValueError("alpha = beta = 0 gives the zero operator")
    return math.sqrt(
        (2.0 * b**2 + a**2 * mean_eta_sq(params) / 3.0)
        * (2.0 * a**2 + b**2 * mean_theta_sq(params) / 3.0)
    )


def length_sq_spectrum(params: ModelParams, n_max: int) -> SpectrumTable:
    return _ladder_table(
        length_sq_quantum(params), n_max,
        {"system": "length", "alpha": params.alpha, "beta": params.beta},
    )


def length_operator_as_oscillator(params: ModelParams) -> ModelParams:
    """Mass 1/(2 alpha^2) and frequency 2 alpha beta turning Q^2 into an oscillator."""
    if params.alpha**2 == 0.0:
        raise ValueError("alpha = 0 has no finite oscillator mass")
    return params.with_(mass=1.0 / (2.0 * params.alpha**2), omega=2.0 * params.alpha * params.beta)


@dataclass(frozen=True)
class MinimalLengths:
    q_min: float
    r_min: float
    p_min: float
    # Printed closed forms that do not equal sqrt(ground eigenvalue).
    printed_q_min: float
    printed_r_min: float
    printed_p_min: float

    @property
    def footnotes(self) -> list[str]:
        notes = []
        if not math.isclose(self.q_min, self.printed_q_min, rel_tol=1e-12, abs_tol=1e-300):
            notes.append(
                "q_min: fourth-root closed form without the (3/2)^(1/2) ground factor gives "
                f"{self.printed_q_min:.17g}; reported value is sqrt(q^2_000)"
            )
        if not math.isclose(self.r_min, self.printed_r_min, rel_tol=1e-12, abs_tol=1e-300):
            notes.append(
                "r_min: closed form sqrt(3 <theta^2>/2) equals r^2_000 itself "
                f"({self.printed_r_min:.17g}); reported value is sqrt(r^2_000)"
            )
        return notes


def minimal_lengths(params: ModelParams) -> MinimalLengths:
    """Square roots of the ground eigenvalues of Q^2, R^2 and P^2."""
    th, et = mean_theta_sq(params), mean_eta_sq(params)
    r_sq = math.sqrt(2.0 * th / 3.0) * 1.5
    p_sq = math.sqrt(2.0 * et / 3.0) * 1.5
    a, b = params.alpha, params.beta
    if a == 0.0 and b == 0.0:
        q_sq = printed_q = 0.0
    else:
        q_sq = length_sq_quantum(params) * 1.5
        printed_q = (2 * b**2 + a**2 * et / 3) ** 0.25 * (2 * a**2 + b**2 * th / 3) ** 0.25
    return MinimalLengths(
        q_min=math.sqrt(q_sq),
        r_min=math.sqrt(r_sq),
        p_min=math.sqrt(p_sq),
        printed_q_min=printed_q,
        printed_r_min=math.sqrt(1.5 * th),
        printed_p_min=(1.5 * et) ** 0.25,
    )

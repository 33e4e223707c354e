import numpy as np
import pytest

from ncphase.analytic import effective_frequency, effective_mass
from ncphase.core import ModelParams
from ncphase.fockspace import BasisError, build_basis, particle_aux_basis
from ncphase.perturbation import (
    DegenerateDenominatorError,
    first_order_correction,
    gaussian_average_check,
    scaling_csv,
    second_order_correction,
    unperturbed_spectrum,
)

NC = ModelParams(c_theta=0.1, c_eta=0.1)


def osc_basis(p, cap=3, aux=2):
    return particle_aux_basis(cap, effective_mass(p), effective_frequency(p), aux, aux)


def test_first_order_examples():
    b = osc_basis(NC)
    for state in range(4):
        assert abs(first_order_correction(b, NC, "oscillator", state)) <= 1e-10
    plain = ModelParams()
    assert first_order_correction(osc_basis(plain), plain, "oscillator", 0) == 0.0
    with pytest.raises(IndexError):
        first_order_correction(b, NC, "oscillator", b.dim)


def test_first_order_randomized():
    rng = np.random.default_rng(2024)
    cases = 0
    for _ in range(26):
        p = ModelParams(c_theta=rng.uniform(0, 1), c_eta=rng.uniform(0, 1),
                        mass=rng.uniform(0.3, 3), omega=rng.uniform(0.1, 3), omega_osc=rng.uniform(20, 400))
        b = osc_basis(p, cap=3, aux=2)
        for state in range(4):
            assert abs(first_order_correction(b, p, "oscillator", state)) <= 1e-10
            cases += 1
    assert cases >= 100


def test_particle_modes_must_lead():
    b = build_basis([2] * 4, [1.0] * 4, roles=["aux-b-1", "particle-x", "particle-y", "particle-z"])
    with pytest.raises(BasisError):
        unperturbed_spectrum(b, ModelParams(), "free")


def test_second_order_zero_without_noncommutativity():
    p = ModelParams()
    res = second_order_correction(osc_basis(p), p, "oscillator", 0)
    assert res.correction == 0.0 and res.tail_bound == 0.0


def test_second_order_free_scaling():
    base = ModelParams(c_eta=0.1, omega=0.0)
    b = particle_aux_basis(5, 1.0, 0.05, None, 3)
    lo = second_order_correction(b, base.with_(omega_osc=100.0), "free", 0)
    hi = second_order_correction(b, base.with_(omega_osc=200.0), "free", 0)
    assert lo.correction < 0
    assert abs(hi.correction) <= 0.6 * abs(lo.correction)


def test_second_order_oscillator_small():
    for w in (100.0, 200.0):
        p = NC.with_(omega_osc=w)
        res = second_order_correction(osc_basis(p, cap=4, aux=3), p, "oscillator", 0)
        assert abs(res.correction) / res.unperturbed_energy < 1e-4
        assert res.n_terms > 0 and res.tail_bound <= abs(res.correction)


def test_second_order_truncation_and_resolution():
    p = NC
    b = osc_basis(p, cap=4, aux=3)
    full = second_order_correction(b, p, "oscillator", 1)
    few = second_order_correction(b, p, "oscillator", 1, n_intermediate=5)
    assert few.n_terms == 5
    assert abs(few.correction) <= abs(full.correction)
    coarse = second_order_correction(osc_basis(p, cap=3, aux=3), p, "oscillator", 1)
    assert coarse.correction == pytest.approx(full.correction, rel=0.1)


def test_degenerate_denominator_reported():
    # omega_osc = omega_free puts (level 0) + (two b quanta) on top of level 2,
    # and the [eta x x]^2 term connects them
    free = ModelParams(c_eta=0.5, omega=0.0)
    wf = effective_frequency(free)
    p = free.with_(omega_osc=wf)
    b = particle_aux_basis(3, 1.0, wf, None, 3)
    spec = unperturbed_spectrum(b, p, "free")
    state = 4
    assert spec.particle_energies[state] == pytest.approx(3.5 * wf, rel=1e-12)
    with pytest.raises(DegenerateDenominatorError):
        second_order_correction(b, p, "free", state)
    # a large auxiliary gap lifts the degeneracy
    ok = second_order_correction(b, free.with_(omega_osc=100.0), "free", state)
    assert ok.skipped_degenerate >= 0 and np.isfinite(ok.correction)


def test_gaussian_average_check():
    p = ModelParams(c_theta=0.35, c_eta=0.8, mass=1.7, omega=0.6)
    assert gaussian_average_check(p, "oscillator", 3).max_difference <= 1e-12
    assert gaussian_average_check(p, "oscillator", 5).max_difference <= 1e-12
    free = gaussian_average_check(ModelParams(c_eta=0.1), "free", 3)
    assert abs(free.quadrature_average.matrix[0, 0] - free.closed_form.matrix[0, 0]) <= 1e-13
    assert gaussian_average_check(ModelParams(), "oscillator", 3).max_difference == 0.0
    assert free.n_points == 3**6
    with pytest.raises(ValueError):
        gaussian_average_check(p, "oscillator", 2)


def test_scaling_csv():
    rows = [(100.0, 0, -1.5e-5, 2e-9), (200.0, 3, -7.25e-6, 0.0)]
    lines = scaling_csv(rows).splitlines()
    assert lines[0] == "omega_osc,state,order2_correction,tail_bound"
    parsed = [tuple(float(v) for v in ln.split(",")) for ln in lines[1:]]
    assert parsed == [tuple(float(v) for v in r) for r in rows]

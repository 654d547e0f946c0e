"""Ring kinematics, smoothing multipliers, and the continuum probes."""

import math

import numpy as np
import pytest

from flab.channels import SwapDiffusion
from flab.errors import NumericalError
from flab.lattice import (
    BandlimitedField,
    ContinuumField,
    RingLattice,
    continuum_inner_convergence,
    continuum_mode_multiplier,
    diffusion_semigroup_on_sector,
    dispersion_bound,
    lattice_mode_multiplier,
    mode_contraction_k1,
    sample_field,
    smoother_apply,
    high_momentum_suppression_probe,
    swap_factorization_probe,
)
from flab.operators import basis_pure_density

from conftest import assert_close


def test_ring_validation_and_kinematics():
    with pytest.raises(ValueError):
        RingLattice(7, 1.0)  # odd
    with pytest.raises(ValueError):
        RingLattice(4, 1.0)  # too small
    with pytest.raises(ValueError):
        RingLattice(8, 0.0)
    lat = RingLattice(16, 0.5)
    assert lat.length == 8.0
    assert abs(lat.nyquist - 2 * math.pi) < 1e-15
    assert lat.mode_indices() == list(range(-7, 9))
    assert abs(lat.momentum(2) - 4 * math.pi / 8.0) < 1e-15


def test_plane_wave_is_laplacian_eigenvector():
    lat = RingLattice(12, 1.0)
    lap = lat.laplacian()
    for m in (1, 3, 5):
        wave = lat.plane_wave(m)
        u = lat.momentum(m) * lat.spacing
        eig = -(2.0 - 2.0 * math.cos(u))
        assert_close(lap @ wave, eig * wave, tol=1e-12)
        assert abs(np.linalg.norm(wave) - 1.0) < 1e-12


def test_field_rejects_nyquist_and_asymmetry():
    lat = RingLattice(8, 1.0)
    with pytest.raises(ValueError):
        BandlimitedField(lat, {4: 1.0})
    with pytest.raises(ValueError):
        BandlimitedField(lat, {1: 1.0 + 1j})  # missing conjugate partner
    with pytest.raises(ValueError):
        BandlimitedField(lat, {3: 0.1, -3: 0.1}, cutoff=lat.momentum(2))


def test_field_sample_roundtrip():
    lat = RingLattice(16, 1.0)
    f = BandlimitedField(lat, {0: 0.2, 2: 0.3 - 0.1j, -2: 0.3 + 0.1j})
    values = sample_field(f)
    assert values.dtype == float
    back = BandlimitedField.from_samples(lat, values)
    for m, c in f.coefficients.items():
        assert abs(back.coefficients[m] - c) < 1e-12
    # samples with Nyquist weight are not reconstructible
    nyq = np.cos(math.pi * np.arange(16))
    with pytest.raises(NumericalError):
        BandlimitedField.from_samples(lat, nyq)


def test_smoother_multiplier_and_composition():
    lat = RingLattice(16, 1.0)
    f = BandlimitedField(lat, {1: 0.5, -1: 0.5, 3: 0.2, -3: 0.2})
    s = smoother_apply(f, 2.0)
    for m, c in f.coefficients.items():
        want = c * math.exp(-0.5 * (2.0 * lat.momentum(m)) ** 2)
        assert abs(s.coefficients[m] - want) < 1e-15
    # two smoothings compose in quadrature
    twice = smoother_apply(smoother_apply(f, 1.0), 2.0)
    once = smoother_apply(f, math.sqrt(5.0))
    for m in f.coefficients:
        assert abs(twice.coefficients[m] - once.coefficients[m]) < 1e-15


def test_mode_contraction_closed_form():
    lat = RingLattice(16, 1.0)
    y, sigma = 2.0, 1.0
    for m in (1, 2, 5, 7):
        got = mode_contraction_k1(lat, sigma, y, m)
        u = lat.momentum(m) * lat.spacing
        want = math.exp(-((sigma / lat.spacing) ** 2) * (1.0 - math.cos(u))) / y
        assert abs(got - want) < 1e-10


def test_dispersion_bound_dominates_multiplier_gap():
    lat = RingLattice(32, 1.0)
    sigma = 2.0
    for m in lat.mode_indices():
        if m == 0:
            continue
        gap = abs(
            lattice_mode_multiplier(lat, sigma, m)
            - continuum_mode_multiplier(sigma, lat.momentum(m))
        )
        assert gap <= dispersion_bound(lat, sigma, m) + 1e-12


def test_diffusion_semigroup_sector_validation():
    lat = RingLattice(8, 1.0)
    sd = SwapDiffusion(lat, 1.0)
    out = diffusion_semigroup_on_sector(sd, 1, np.ones(8))
    assert_close(out, np.ones(8), tol=1e-10)  # uniform profile is stationary
    with pytest.raises(ValueError):
        diffusion_semigroup_on_sector(sd, 3, np.ones(8))
    with pytest.raises(ValueError):
        diffusion_semigroup_on_sector(sd, 1, np.ones(7))


def test_continuum_field_profile():
    f = ContinuumField(2 * math.pi, {1: 0.5, -1: 0.5})
    xs = np.linspace(0.0, 2 * math.pi, 7)
    assert_close(f.profile_at(xs), np.cos(xs), tol=1e-12)
    assert f.max_mode() == 1
    with pytest.raises(ValueError):
        ContinuumField(2 * math.pi, {1: 1j})
    with pytest.raises(ValueError):
        ContinuumField(-1.0, {})


def test_continuum_inner_convergence_basics():
    state = basis_pure_density(2)
    L = 2 * math.pi
    f = ContinuumField(L, {1: 0.1, -1: 0.1})
    g = ContinuumField(L, {1: 0.1, -1: 0.1})
    out = continuum_inner_convergence(state, f, g, [L / 16, L / 32])
    assert out["quadrature_gap"] < 1e-14
    assert out["deviations"][1] < out["deviations"][0]
    # rings must stay even and large enough
    with pytest.raises(ValueError):
        continuum_inner_convergence(state, f, g, [L / 10.5])
    # amplitudes too large for the site product to make sense
    loud = ContinuumField(L, {1: 4.0, -1: 4.0})
    with pytest.raises(NumericalError):
        continuum_inner_convergence(state, loud, loud, [L / 16])


def test_high_momentum_suppression_probe_k1_respects_mode_bound():
    lat = RingLattice(16, 1.0)
    out = high_momentum_suppression_probe(lat, 2.0, 2.0, cutoff=0.5 * lat.nyquist, k=1, samples=8)
    assert out["k"] == 1
    assert out["max_contraction"] <= out["mode_bound"] * (1 + 1e-10) + 1e-13
    assert out["gaussian_claim"] <= out["mode_bound"] + 1e-15


def test_high_momentum_suppression_probe_k2_reports():
    lat = RingLattice(12, 1.0)
    out = high_momentum_suppression_probe(lat, 1.0, 2.0, cutoff=0.5 * lat.nyquist, k=2, samples=4)
    assert out["k"] == 2
    assert out["max_contraction"] >= 0.0
    with pytest.raises(ValueError):
        high_momentum_suppression_probe(lat, 1.0, 2.0, cutoff=0.5 * lat.nyquist, k=3)


def test_swap_factorization_probe_j1_within_dispersion():
    lat = RingLattice(24, 1.0)
    out = swap_factorization_probe(lat, 2.0, 1)
    assert out["j"] == 1
    assert out["max_gap"] <= out["bound_at_max"] + 1e-12


def test_swap_factorization_probe_j2_smoothing_decreases_deviation():
    lat = RingLattice(16, 1.0)
    devs = [swap_factorization_probe(lat, s, 2)["sup_deviation"] for s in (2.0, 4.0)]
    assert devs[1] < devs[0]
    assert swap_factorization_probe(lat, 2.0, 2)["word_count"] > 0

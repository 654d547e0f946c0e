"""Metric pairings, whitening, and contraction spectra."""

import numpy as np
import pytest

from flab.channels import DepolarizingChannel, ProductChannel, homogeneous_coarse_graining
from flab.errors import NumericalError
from flab.geometry import (
    bures_inner,
    bures_norm,
    channel_gns_matrix,
    channel_pairing_matrix,
    complex_gram,
    contraction_ratio,
    contraction_spectrum,
    gns_build,
    gns_inner,
    klocal_decay_check,
    omega_apply,
    omega_inverse_apply,
    pushforward_norm,
    symmetric_sector_dense_spectrum,
    whiten_psd,
)
from flab.operators import (
    DensityMatrix,
    QuditSystem,
    basis_pure_density,
    maximally_mixed_density,
    single_site_zero_mean_basis,
)
from flab.sampling import (
    random_cptp_channel,
    random_positive_density,
    random_zero_mean_hermitian,
    task_rng,
)

from conftest import assert_close


def test_omega_roundtrip_full_rank():
    rng = task_rng(1)
    rho = random_positive_density(3, rng, min_eigenvalue=0.05)
    x = random_zero_mean_hermitian(rho, rng)
    assert_close(omega_apply(rho, x), 0.5 * (rho.matrix @ x + x @ rho.matrix))
    back = omega_inverse_apply(rho, omega_apply(rho, x))
    assert_close(back, x, tol=1e-10)


def test_omega_inverse_rejects_out_of_range():
    rho = basis_pure_density(2)
    # sigma_x |0><0| sector overlaps the kernel complement, but the pure
    # z-direction |1><1| is outside the range of the anticommutator map
    bad = np.diag([0.0, 1.0]).astype(complex)
    with pytest.raises(NumericalError):
        omega_inverse_apply(rho, bad)


def test_inner_products():
    rng = task_rng(2)
    rho = random_positive_density(2, rng, min_eigenvalue=0.1)
    a = random_zero_mean_hermitian(rho, rng)
    b = random_zero_mean_hermitian(rho, rng)
    direct = np.trace(rho.matrix @ a.conj().T @ b)
    assert abs(gns_inner(rho, a, b) - direct) < 1e-12
    assert abs(bures_inner(rho, a, b) - direct.real) < 1e-12
    assert abs(bures_norm(rho, a) - np.sqrt(gns_inner(rho, a, a).real)) < 1e-12


def test_pushforward_identity_channel_is_isometric():
    rng = task_rng(3)
    rho = random_positive_density(3, rng, min_eigenvalue=0.05)
    ident = DepolarizingChannel(1.0, 3)
    for _ in range(5):
        a = random_zero_mean_hermitian(rho, rng)
        assert abs(pushforward_norm(rho, ident, a) - bures_norm(rho, a)) < 1e-9


def test_pushforward_against_dense_reimplementation():
    # independent route: build Omega at the coarse state explicitly and
    # invert it on the pushed tangent vector
    rng = task_rng(4)
    rho = random_positive_density(3, rng, min_eigenvalue=0.05)
    ch = random_cptp_channel(3, 3, rng)
    a = random_zero_mean_hermitian(rho, rng)
    coarse = ch.apply(rho.matrix)
    pushed = ch.apply(omega_apply(rho, a))
    vals, vecs = np.linalg.eigh(coarse)
    xt = vecs.conj().T @ pushed @ vecs
    denom = 0.5 * (vals[:, None] + vals[None, :])
    solved = vecs @ (xt / denom) @ vecs.conj().T
    want = np.sqrt(np.trace(pushed.conj().T @ solved).real)
    got = pushforward_norm(rho, ch, a)
    assert abs(got - want) < 1e-9


def test_pushforward_never_expands():
    rng = task_rng(5)
    for i in range(20):
        dim = 2 + (i % 3)
        rho = random_positive_density(dim, rng, min_eigenvalue=0.02)
        ch = random_cptp_channel(dim, 3, rng)
        a = random_zero_mean_hermitian(rho, rng)
        fine = bures_norm(rho, a)
        assert pushforward_norm(rho, ch, a) <= fine * (1 + 1e-10)
        assert contraction_ratio(rho, ch, a) <= 1 + 1e-10


def test_whiten_psd():
    gram = np.array([[2.0, 0.0], [0.0, 0.5]])
    w, kept = whiten_psd(gram)
    assert_close(w.T @ gram @ w, np.eye(2), tol=1e-12)
    # rank-deficient gram drops the null direction
    w2, kept2 = whiten_psd(np.array([[1.0, 1.0], [1.0, 1.0]]))
    assert w2.shape == (2, 1)
    assert len(kept2) == 1
    with pytest.raises(NumericalError):
        whiten_psd(np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_gns_build_rank_and_hermiticity_check():
    pure = basis_pure_density(2)
    letters = single_site_zero_mean_basis(pure)
    space = gns_build(pure, letters)
    # the diagonal letter is null at the pure state; the two quadratures
    # collapse to one complex ray but stay independent over the reals
    assert space.rank == 2
    assert complex_gram(pure, letters).shape == (3, 3)
    with pytest.raises(NumericalError):
        gns_build(pure, [np.array([[0.0, 1.0], [0.0, 0.0]])])


def test_channel_pairing_matrix_against_loops():
    rng = task_rng(6)
    rho = random_positive_density(2, rng, min_eigenvalue=0.1)
    ch = random_cptp_channel(2, 2, rng)
    coarse = DensityMatrix(ch.apply(rho.matrix), check=False)
    fine_letters = single_site_zero_mean_basis(rho)
    coarse_letters = single_site_zero_mean_basis(coarse)
    out_space = gns_build(rho, fine_letters)
    in_space = gns_build(coarse, coarse_letters)
    got = channel_pairing_matrix(ch, out_space, in_space)
    want = np.zeros_like(got)
    for a, e in enumerate(fine_letters):
        for b, f in enumerate(coarse_letters):
            want[a, b] = np.trace(rho.matrix @ e.conj().T @ ch.adjoint_apply(f)).real
    assert_close(got, want, tol=1e-12)


def test_channel_gns_matrix_identity():
    rng = task_rng(7)
    rho = random_positive_density(2, rng, min_eigenvalue=0.1)
    letters = single_site_zero_mean_basis(rho)
    space = gns_build(rho, letters)
    ident = DepolarizingChannel(1.0, 2)
    m = channel_gns_matrix(ident, space, space)
    assert_close(m, np.eye(3), tol=1e-10)


def test_contraction_spectrum_identity_channel():
    rng = task_rng(8)
    rho = random_positive_density(2, rng, min_eigenvalue=0.1)
    letters = single_site_zero_mean_basis(rho)
    spectrum = contraction_spectrum(DepolarizingChannel(1.0, 2), rho, letters)
    assert_close(spectrum.eigenvalues, np.ones(3), tol=1e-10)
    assert_close(spectrum.contraction_factors(), np.ones(3), tol=1e-10)


def test_contraction_spectrum_depolarizing_mixed_site():
    # at the maximally mixed state the centered letters are traceless and
    # the depolarizing adjoint scales each by 1/y, so every factor is 1/y
    y = 3.0
    rho = maximally_mixed_density(2)
    letters = single_site_zero_mean_basis(rho)
    spectrum = contraction_spectrum(DepolarizingChannel(y, 2), rho, letters)
    assert_close(spectrum.eigenvalues, np.full(3, y**-2), tol=1e-12)
    op = spectrum.eigen_operator(0)
    assert op.shape == (2, 2)


def test_dense_sector_spectrum_matches_closed_form(qubit_triple, pure_triple):
    from flab.focklimit import symmetric_sector_spectrum

    dense = symmetric_sector_dense_spectrum(qubit_triple, pure_triple, 2.0, 2)
    closed = symmetric_sector_spectrum(3, 2, 2.0, 2, include_identity=True)
    want = np.sort(closed["eigenvalues"])[::-1]
    got = np.sort(dense.eigenvalues)[::-1]
    assert len(got) == len(want)
    assert_close(got, want, tol=1e-10, what="dense vs closed-form spectrum")
    assert_close(want, [1.0, 0.25, 0.25, 0.1, 0.1], tol=1e-12)


def test_klocal_decay_check_output_and_validation():
    out = klocal_decay_check(2, 2, [3.0, 4.0], k_max=0, samples=5)
    assert out["y_values"] == [3.0, 4.0]
    assert set(out["k"]) == {0}
    entry = out["k"][0]
    assert len(entry["max_contraction"]) == 2
    assert entry["expected_slope"] == -1
    assert entry["bound_checked"] is True
    with pytest.raises(ValueError):
        klocal_decay_check(2, 2, [0.5], k_max=0)
    with pytest.raises(ValueError):
        klocal_decay_check(2, 2, [3.0], k_max=2)

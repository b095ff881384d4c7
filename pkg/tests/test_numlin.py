import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qgtquench import models
from qgtquench.numlin import (
    ContractError,
    ConvergenceError,
    GaugeSingularityError,
    dagger,
    hermitian_eig,
    lowdin,
    polar_unitary,
    subspace_align,
    unitary_exp,
)


def random_hermitian(seed: int, n: int) -> np.ndarray:
    r = np.random.default_rng(seed)
    a = r.normal(size=(n, n)) + 1j * r.normal(size=(n, n))
    return a + a.conj().T


def random_frame(r, n=4, k=2):
    x = r.normal(size=(n, k)) + 1j * r.normal(size=(n, k))
    q, _ = np.linalg.qr(x)
    return q


def test_diagonal_input():
    evals, evecs = hermitian_eig(np.diag([2.0, -1.0]))
    np.testing.assert_array_equal(evals, [-1.0, 2.0])
    np.testing.assert_array_equal(np.abs(evecs), [[0, 1], [1, 0]])


def test_alpha_x_spectrum():
    evals, _ = hermitian_eig(models.ALPHA[0])
    np.testing.assert_allclose(evals, [-1, -1, 1, 1], atol=1e-14)
    # brute-force characteristic polynomial cross-check
    roots = np.sort(np.roots(np.poly(models.ALPHA[0])).real)
    np.testing.assert_allclose(evals, roots, atol=1e-7)


def test_zero_matrix():
    evals, evecs = hermitian_eig(np.zeros((3, 3)))
    np.testing.assert_array_equal(evals, 0.0)
    np.testing.assert_array_equal(evecs, np.eye(3))


def test_non_hermitian_rejected():
    with pytest.raises(ContractError, match="not Hermitian"):
        hermitian_eig(np.array([[0, 1], [0, 0]], dtype=complex))


def test_non_finite_rejected():
    with pytest.raises(ContractError):
        hermitian_eig(np.array([[np.nan, 0], [0, 1]]))


def test_convergence_error_reports_sweeps():
    with pytest.raises(ConvergenceError) as info:
        hermitian_eig(random_hermitian(0, 4), max_sweeps=0)
    assert info.value.sweeps == 0 and info.value.residual > 0


@given(st.integers(0, 10_000), st.integers(1, 8))
def test_reconstruction(seed, n):
    h = random_hermitian(seed, n)
    evals, v = hermitian_eig(h)
    assert np.all(np.diff(evals) >= 0)
    assert np.abs(dagger(v) @ v - np.eye(n)).max() <= 1e-12
    assert np.abs(v @ np.diag(evals) @ dagger(v) - h).max() <= 1e-10
    resid = np.linalg.norm(h @ v - v * evals, axis=0)
    assert np.all(resid <= 1e-10 * (1 + np.abs(evals)))


def test_batch_independent_of_neighbours():
    hs = np.stack([random_hermitian(s, 4) for s in range(6)])
    _, batch = hermitian_eig(hs)
    for i in range(6):
        _, single = hermitian_eig(hs[i])
        assert np.array_equal(single, batch[i])
    _, shuffled = hermitian_eig(hs[::-1])
    assert np.array_equal(shuffled[::-1], batch)


def test_deterministic_bits():
    h = random_hermitian(3, 5)
    a = hermitian_eig(h)
    b = hermitian_eig(h.copy())
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert np.array_equal(a.eigenvectors, b.eigenvectors)


def test_unitary_exp_examples():
    np.testing.assert_array_equal(unitary_exp(np.zeros((2, 2)), 0.5), np.eye(2))
    u = unitary_exp(np.diag([1.0, -1.0]), np.pi)
    np.testing.assert_allclose(u, -np.eye(2), atol=1e-15)


def test_unitary_exp_matches_taylor():
    a = models.ALPHA[2] * 0.01
    taylor = np.eye(4, dtype=complex)
    term = np.eye(4, dtype=complex)
    for k in range(1, 20):
        term = term @ (-1j * a) / k
        taylor = taylor + term
    assert np.abs(unitary_exp(models.ALPHA[2], 0.01) - taylor).max() <= 1e-14


@given(st.integers(0, 10_000), st.floats(-3, 3), st.floats(-3, 3))
def test_unitary_exp_group_law(seed, t1, t2):
    h = random_hermitian(seed, 4)
    u1, u2 = unitary_exp(h, t1), unitary_exp(h, t2)
    assert np.abs(dagger(u1) @ u1 - np.eye(4)).max() <= 1e-12
    assert np.abs(u1 @ u2 - unitary_exp(h, t1 + t2)).max() <= 1e-11


def test_unitary_exp_rejects_nan_time():
    with pytest.raises(ContractError):
        unitary_exp(np.eye(2), float("nan"))


def test_align_identity_and_swap(rng):
    ref = random_frame(rng)
    np.testing.assert_allclose(subspace_align(ref, ref), ref, atol=1e-14)
    swapped = ref[:, ::-1]
    assert np.abs(subspace_align(swapped, ref) - ref).max() <= 1e-12


@given(st.integers(0, 10_000))
def test_align_gives_positive_hermitian_overlap(seed):
    r = np.random.default_rng(seed)
    ref = random_frame(r)
    basis = random_frame(r)
    aligned = subspace_align(basis, ref)
    w = dagger(ref) @ aligned
    assert np.abs(w - dagger(w)).max() <= 1e-12
    assert np.linalg.eigvalsh(w).min() > 0
    # same span, orthonormal, idempotent
    p1, p2 = basis @ dagger(basis), aligned @ dagger(aligned)
    assert np.abs(p1 - p2).max() <= 1e-12
    assert np.abs(dagger(aligned) @ aligned - np.eye(2)).max() <= 1e-12
    assert np.abs(subspace_align(aligned, ref) - aligned).max() <= 1e-12


def test_align_recovers_rotated_frame(rng):
    ref = random_frame(rng)
    u, _ = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
    assert np.abs(subspace_align(ref @ u, ref) - ref).max() <= 1e-12


def test_align_singular_overlap():
    ref = np.eye(4)[:, :2].astype(complex)
    basis = np.eye(4)[:, 2:].astype(complex)
    with pytest.raises(GaugeSingularityError) as info:
        subspace_align(basis, ref)
    assert info.value.sigma_min < 1e-8


def test_align_shape_mismatch():
    with pytest.raises(ContractError):
        subspace_align(np.eye(4)[:, :2], np.eye(4)[:, :3])


def test_polar_and_lowdin(rng):
    w = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    u, smin = polar_unitary(w)
    assert np.abs(dagger(u) @ u - np.eye(2)).max() <= 1e-12
    assert smin == pytest.approx(np.linalg.svd(w, compute_uv=False)[-1])
    x = rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2))
    o = lowdin(x)
    assert np.abs(dagger(o) @ o - np.eye(2)).max() <= 1e-12
    # Loewdin is the polar factor of x
    uu, _, vh = np.linalg.svd(x, full_matrices=False)
    assert np.abs(o - uu @ vh).max() <= 1e-12

"""Small dense complex linear algebra.

Everything here accepts either a single matrix of shape ``(n, n)`` or a stack
``(..., n, n)`` and works element-wise over the leading axes, so a batch of a
few hundred thousand 4x4 Hamiltonians costs a handful of numpy calls per
Jacobi rotation instead of a Python loop per matrix.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

HERMITIAN_RTOL = 1e-12
JACOBI_RTOL = 1e-14
JACOBI_MAX_SWEEPS = 100
ALIGN_SIGMA_FLOOR = 1e-8


class ContractError(ValueError):
    """Input violates a documented precondition."""


class ConvergenceError(RuntimeError):
    def __init__(self, sweeps: int, residual: float):
        super().__init__(
            f"Jacobi iteration did not converge after {sweeps} sweeps "
            f"(worst off-diagonal norm {residual:.3e})"
        )
        self.sweeps = sweeps
        self.residual = residual


class GaugeSingularityError(ValueError):
    def __init__(self, sigma_min: float, floor: float = ALIGN_SIGMA_FLOOR):
        super().__init__(
            f"overlap matrix is near-singular: smallest singular value "
            f"{sigma_min:.3e} < {floor:.1e}"
        )
        self.sigma_min = sigma_min


class SpectralDecomposition(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def hermiticity_residual(a: np.ndarray) -> np.ndarray:
    """``max|A - A^dagger| / max(1, max|A|)`` per matrix."""
    a = np.asarray(a)
    diff = np.abs(a - dagger(a)).max(axis=(-2, -1))
    scale = np.maximum(1.0, np.abs(a).max(axis=(-2, -1)))
    return diff / scale


def check_hermitian(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ContractError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ContractError(f"{name} has non-finite entries")
    res = hermiticity_residual(a)
    if np.any(res > HERMITIAN_RTOL):
        raise ContractError(
            f"{name} is not Hermitian (relative residual {float(res.max()):.3e})"
        )
    return a


def _offdiag_norm(a: np.ndarray) -> np.ndarray:
    n = a.shape[-1]
    mask = ~np.eye(n, dtype=bool)
    return np.sqrt(np.sum(np.abs(a[..., mask]) ** 2, axis=-1))


def hermitian_eig(
    h: np.ndarray,
    *,
    rtol: float = JACOBI_RTOL,
    max_sweeps: int = JACOBI_MAX_SWEEPS,
) -> SpectralDecomposition:
    """Eigen-decomposition of Hermitian matrices by cyclic complex Jacobi.

    Eigenvalues come back ascending; ties keep the order the rotations left
    them in, so degenerate eigenvectors are an arbitrary basis of their
    eigenspace. Each matrix in a stack stops rotating once its own
    off-diagonal Frobenius norm falls below ``rtol * ||H||_F``; the result for
    one matrix is therefore independent of what else is in the batch.
    """
    a = check_hermitian(h, "H").copy()
    batch_shape = a.shape[:-2]
    n = a.shape[-1]
    a = a.reshape((-1, n, n))
    # symmetrise exactly so the upper triangle alone defines the matrix
    a = 0.5 * (a + dagger(a))
    v = np.broadcast_to(np.eye(n, dtype=complex), a.shape).copy()
    target = rtol * np.sqrt(np.sum(np.abs(a) ** 2, axis=(-2, -1)))

    sweeps = 0
    active = _offdiag_norm(a) > target
    while np.any(active):
        if sweeps >= max_sweeps:
            raise ConvergenceError(sweeps, float(_offdiag_norm(a)[active].max()))
        for p in range(n - 1):
            for q in range(p + 1, n):
                _rotate(a, v, p, q, active)
        sweeps += 1
        active = active & (_offdiag_norm(a) > target)

    evals = np.real(np.diagonal(a, axis1=-2, axis2=-1)).copy()
    order = np.argsort(evals, axis=-1, kind="stable")
    evals = np.take_along_axis(evals, order, axis=-1)
    v = np.take_along_axis(v, order[:, None, :], axis=-1)
    return SpectralDecomposition(
        evals.reshape(batch_shape + (n,)), v.reshape(batch_shape + (n, n))
    )


def _rotate(a: np.ndarray, v: np.ndarray, p: int, q: int, active: np.ndarray) -> None:
    """One complex Jacobi rotation annihilating a[:, p, q], in place."""
    apq = a[:, p, q]
    mag = np.abs(apq)
    work = active & (mag > 0.0)
    if not np.any(work):
        return
    safe = np.where(work, mag, 1.0)
    phase = np.where(work, np.conj(apq) / safe, 1.0)  # e^{-i alpha}
    app = a[:, p, p].real
    aqq = a[:, q, q].real
    tau = (aqq - app) / (2.0 * safe)
    sgn = np.where(tau >= 0.0, 1.0, -1.0)
    t = sgn / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
    t = np.where(work, t, 0.0)
    c = 1.0 / np.sqrt(1.0 + t * t)
    s = t * c
    # J restricted to (p, q): [[c, s], [-s e^{-ia}, c e^{-ia}]]
    jpp, jpq = c, s
    jqp, jqq = -s * phase, c * phase

    col_p = a[:, :, p].copy()
    col_q = a[:, :, q].copy()
    new_p = col_p * jpp[:, None] + col_q * jqp[:, None]
    new_q = col_p * jpq[:, None] + col_q * jqq[:, None]
    a[:, :, p] = np.where(work[:, None], new_p, col_p)
    a[:, :, q] = np.where(work[:, None], new_q, col_q)

    row_p = a[:, p, :].copy()
    row_q = a[:, q, :].copy()
    new_rp = np.conj(jpp)[:, None] * row_p + np.conj(jqp)[:, None] * row_q
    new_rq = np.conj(jpq)[:, None] * row_p + np.conj(jqq)[:, None] * row_q
    a[:, p, :] = np.where(work[:, None], new_rp, row_p)
    a[:, q, :] = np.where(work[:, None], new_rq, row_q)
    a[:, p, q] = np.where(work, 0.0, a[:, p, q])
    a[:, q, p] = np.where(work, 0.0, a[:, q, p])

    vp = v[:, :, p].copy()
    vq = v[:, :, q].copy()
    v[:, :, p] = np.where(work[:, None], vp * jpp[:, None] + vq * jqp[:, None], vp)
    v[:, :, q] = np.where(work[:, None], vp * jpq[:, None] + vq * jqq[:, None], vq)


def unitary_exp(h: np.ndarray, dt) -> np.ndarray:
    """``exp(-i H dt)`` built from the spectral decomposition of ``H``."""
    dt = np.asarray(dt, dtype=float)
    if not np.all(np.isfinite(dt)):
        raise ContractError("dt must be finite")
    evals, evecs = hermitian_eig(h)
    phases = np.exp(-1j * evals * dt[..., None])
    return (evecs * phases[..., None, :]) @ dagger(evecs)


def polar_unitary(w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unitary polar factor of ``w`` and its smallest singular value."""
    u, s, vh = np.linalg.svd(w)
    return u @ vh, s[..., -1]


def subspace_align(
    basis: np.ndarray, reference: np.ndarray, *, sigma_floor: float = ALIGN_SIGMA_FLOOR
) -> np.ndarray:
    """Rotate ``basis`` (columns) within its span to best match ``reference``.

    Returns ``basis @ V`` with ``V`` the unitary minimising
    ``||basis @ V - reference||_F``. After alignment the overlap
    ``reference^dagger @ aligned`` is Hermitian positive definite.
    """
    basis = np.asarray(basis, dtype=complex)
    reference = np.asarray(reference, dtype=complex)
    if basis.shape != reference.shape:
        raise ContractError(
            f"basis {basis.shape} and reference {reference.shape} differ in shape"
        )
    w = dagger(reference) @ basis
    u, s, vh = np.linalg.svd(w)
    smin = s[..., -1]
    if np.any(smin < sigma_floor):
        raise GaugeSingularityError(float(np.min(smin)), sigma_floor)
    return basis @ (dagger(vh) @ dagger(u))


def lowdin(x: np.ndarray, *, sigma_floor: float = ALIGN_SIGMA_FLOOR) -> np.ndarray:
    """Symmetric (Loewdin) orthonormalisation of the columns of ``x``."""
    x = np.asarray(x, dtype=complex)
    gram = dagger(x) @ x
    gram = 0.5 * (gram + dagger(gram))
    evals, evecs = hermitian_eig(gram)
    if np.any(evals[..., 0] < sigma_floor**2):
        raise GaugeSingularityError(
            float(np.sqrt(max(float(np.min(evals[..., 0])), 0.0))), sigma_floor
        )
    inv_sqrt = (evecs * (1.0 / np.sqrt(evals))[..., None, :]) @ dagger(evecs)
    return x @ inv_sqrt

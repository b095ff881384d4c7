"""Quantum geometry of the degenerate ground bundle.

The finite-difference oracle works on a gauge-fixed frame ``C`` (n x N) at
the centre point. Frames at stencil points are rotated onto ``C`` by the
polar factor of their overlap before differencing, so the within-bundle part
of the derivative vanishes at the centre and

    Q[mu, nu] = D_mu^dagger (1 - P) D_nu

is the tensor in the frame ``C``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import NamedTuple

import numpy as np

from . import models
from .models import ModelSpec, ParameterPoint
from .numlin import (
    ContractError,
    GaugeSingularityError,
    dagger,
    hermitian_eig,
    lowdin,
    subspace_align,
)

DEFAULT_FD_STEP = 1e-4
CLUSTER_RTOL = 1e-8
GAP_FLOOR = 1e-6
# projected canonical pairs with a smaller Gram eigenvalue are passed over
REFERENCE_PAIR_FLOOR = 1e-3

GAUGES = ("analytic", "reference-projection", "eigensolver-raw")
_ANALYTIC_FAMILIES = ("dirac3d-eff", "dirac3d-lattice", "experimental-4level")


class GapCollapseError(ValueError):
    """Ground and excited levels touch (a monopole / Dirac point)."""


class ClusterMismatchError(ValueError):
    """The lowest eigenvalue cluster does not have the model's degeneracy."""


class SingularNormalizationError(ValueError):
    pass


def default_gauge(spec: ModelSpec) -> str:
    return "analytic" if spec.family in _ANALYTIC_FAMILIES else "reference-projection"


# ---------------------------------------------------------------------------
# spectra and projectors


def _as_batch(coords, dim: int) -> tuple[np.ndarray, tuple]:
    x = np.asarray(coords, dtype=float)
    if x.shape[-1] != dim:
        raise ContractError(f"expected {dim} coordinates, got shape {x.shape}")
    return x.reshape(-1, dim), x.shape[:-1]


def cluster_eigen(spec: ModelSpec, coords) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decompose ``H`` at each point and validate the ground cluster."""
    x, _ = _as_batch(coords, spec.dim)
    evals, evecs = hermitian_eig(models.hamiltonian_at(spec, x))
    n_ground = spec.degeneracy
    n = evals.shape[-1]
    scale = 1.0 + np.abs(evals)
    # eigenvalue k starts a new cluster when it sits above k-1 by more than tol
    jumps = np.diff(evals, axis=-1) > CLUSTER_RTOL * scale[:, 1:]
    if n_ground >= n:
        raise ClusterMismatchError("no excited states left for the given degeneracy")
    gap = evals[:, n_ground] - evals[:, n_ground - 1]
    if np.any(gap <= GAP_FLOOR):
        bad = int(np.argmin(gap))
        raise GapCollapseError(
            f"spectral gap {gap[bad]:.3e} <= {GAP_FLOOR:.0e} at coords {x[bad].tolist()}"
        )
    inner = jumps[:, : n_ground - 1]
    if np.any(inner):
        bad = int(np.argmax(np.any(inner, axis=-1)))
        raise ClusterMismatchError(
            f"ground cluster at {x[bad].tolist()} is smaller than degeneracy {n_ground}: "
            f"energies {evals[bad].tolist()}"
        )
    return evals, evecs


def ground_projector(spec: ModelSpec, coords) -> np.ndarray:
    """Projector onto the degenerate ground space, shape ``(B, n, n)``."""
    x, _ = _as_batch(coords, spec.dim)
    if models.is_dirac_form(spec):
        d = models.coefficients(spec, x)
        norm = np.sqrt(np.sum(d * d, axis=-1))
        if np.any(2.0 * norm <= GAP_FLOOR):
            bad = int(np.argmin(norm))
            raise GapCollapseError(
                f"spectral gap {2 * norm[bad]:.3e} <= {GAP_FLOOR:.0e} at coords {x[bad].tolist()}"
            )
        unit = np.tensordot(d / norm[:, None], models.gamma_matrices(spec), axes=([1], [0]))
        return 0.5 * (np.eye(unit.shape[-1]) - unit)
    _, evecs = cluster_eigen(spec, x)
    g = evecs[..., : spec.degeneracy]
    return g @ dagger(g)


# ---------------------------------------------------------------------------
# gauge-fixed frames


def appendix_eigenstates(d) -> np.ndarray:
    """Orthonormal eigenvectors of ``d . alpha`` as columns ``beta_1..beta_4``.

    ``beta_1, beta_2`` have energy ``-|d|``, ``beta_3, beta_4`` have ``+|d|``.
    """
    cols = _appendix_columns(np.asarray(d, dtype=float)[None, :], ground_only=False)
    return cols[0]


def _appendix_columns(d: np.ndarray, ground_only: bool = True) -> np.ndarray:
    dx, dy, dz = d[:, 0], d[:, 1], d[:, 2]
    norm = np.sqrt(dx * dx + dy * dy + dz * dz)
    minus = 2 * norm * norm - 2 * norm * dz
    plus = 2 * norm * norm + 2 * norm * dz
    if np.any(minus < 1e-20) or (not ground_only and np.any(plus < 1e-20)):
        raise SingularNormalizationError(
            "closed-form eigenstate normalisation vanishes (d parallel to the z axis)"
        )
    zero = np.zeros_like(dx)
    nm = 1.0 / np.sqrt(minus)
    b1 = nm[:, None] * np.stack([-dx, norm - dz, dy, zero], axis=-1)
    b2 = nm[:, None] * np.stack([dy, zero, dx, norm - dz], axis=-1)
    if ground_only:
        return np.stack([b1, b2], axis=-1).astype(complex)
    np_ = 1.0 / np.sqrt(plus)
    b3 = np_[:, None] * np.stack([-dx, -norm - dz, dy, zero], axis=-1)
    b4 = np_[:, None] * np.stack([-dy, zero, -dx, norm + dz], axis=-1)
    return np.stack([b1, b2, b3, b4], axis=-1).astype(complex)


def _dirac3d_vector(spec: ModelSpec, x: np.ndarray) -> np.ndarray:
    if spec.family == "experimental-4level":
        return models.coefficients(ModelSpec("dirac3d-eff", sign=spec.sign), x)
    return models.coefficients(spec, x)


def reference_frame(projector: np.ndarray, n_ground: int) -> np.ndarray:
    """Project canonical basis vectors onto the ground space and orthonormalise.

    The pair ``(e_1, e_2)`` is used wherever its projection is well
    conditioned; otherwise the first canonical pair (in lexicographic order)
    whose projected Gram matrix has smallest eigenvalue above
    ``REFERENCE_PAIR_FLOOR``, or failing that the best-conditioned pair.
    """
    n = projector.shape[-1]
    pairs = list(combinations(range(n), n_ground))
    scores = np.empty((projector.shape[0], len(pairs)))
    for i, cols in enumerate(pairs):
        sub = projector[:, list(cols)][:, :, list(cols)]
        scores[:, i] = hermitian_eig(0.5 * (sub + dagger(sub))).eigenvalues[:, 0]
    ok = scores >= REFERENCE_PAIR_FLOOR
    choice = np.where(ok.any(axis=1), np.argmax(ok, axis=1), np.argmax(scores, axis=1))
    frames = np.empty(projector.shape[:2] + (n_ground,), dtype=complex)
    for i, cols in enumerate(pairs):
        sel = choice == i
        if np.any(sel):
            frames[sel] = lowdin(projector[sel][:, :, list(cols)])
    return frames


def frames(spec: ModelSpec, coords, gauge: str | None = None) -> np.ndarray:
    """Gauge-fixed ground frames ``(B, n, N)`` at a batch of raw coordinates."""
    gauge = gauge or default_gauge(spec)
    x, _ = _as_batch(coords, spec.dim)
    if gauge == "analytic":
        if spec.family not in _ANALYTIC_FAMILIES:
            raise ContractError(f"no analytic eigenstates for family {spec.family}")
        try:
            return _appendix_columns(_dirac3d_vector(spec, x))
        except SingularNormalizationError as exc:
            raise GaugeSingularityError(0.0, 1e-20) from exc
    if gauge == "reference-projection":
        return reference_frame(ground_projector(spec, x), spec.degeneracy)
    if gauge == "eigensolver-raw":
        _, evecs = cluster_eigen(spec, x)
        return evecs[..., : spec.degeneracy]
    raise ContractError(f"unknown gauge {gauge!r}; expected one of {GAUGES}")


def aligned_frames(spec: ModelSpec, coords, reference: np.ndarray) -> np.ndarray:
    """Ground frames at ``coords`` rotated to best match ``reference``.

    Dirac-form models use the closed-form projector and Loewdin-normalise
    ``P @ reference``, which is exactly the polar-aligned frame; other models
    diagonalise and call :func:`subspace_align`.
    """
    x, _ = _as_batch(coords, spec.dim)
    if models.is_dirac_form(spec):
        return lowdin(ground_projector(spec, x) @ reference)
    _, evecs = cluster_eigen(spec, x)
    return subspace_align(evecs[..., : spec.degeneracy], reference)


@dataclass(frozen=True)
class GroundBundle:
    point: ParameterPoint
    ground: np.ndarray
    excited: np.ndarray
    energies: np.ndarray
    gauge: str

    @property
    def N(self) -> int:
        return self.ground.shape[1]

    @property
    def M(self) -> int:
        return self.excited.shape[1]

    @property
    def projector(self) -> np.ndarray:
        return self.ground @ self.ground.conj().T

    def orthonormality_residual(self) -> float:
        allv = np.concatenate([self.ground, self.excited], axis=1)
        return float(np.abs(allv.conj().T @ allv - np.eye(allv.shape[1])).max())


def ground_bundle(spec: ModelSpec, p: ParameterPoint, gauge: str | None = None) -> GroundBundle:
    if p.chart != spec.chart or p.dim != spec.dim:
        raise models.ChartError(f"{spec.family} needs a {spec.chart} point, got {p.chart}")
    gauge = gauge or default_gauge(spec)
    evals, evecs = cluster_eigen(spec, p.array)
    n_ground = spec.degeneracy
    ground = frames(spec, p.array, gauge)[0]
    return GroundBundle(p, ground, evecs[0, :, n_ground:], evals[0], gauge)


# ---------------------------------------------------------------------------
# finite-difference QGT


def qgt_fd_batch(
    spec: ModelSpec,
    coords,
    gauge: str | None = None,
    h: float = DEFAULT_FD_STEP,
    directions=None,
) -> np.ndarray:
    """Central-difference QGT at a batch of points, shape ``(B, D, D, N, N)``.

    ``directions`` restricts the derivative axes (others are left NaN).
    """
    x, _ = _as_batch(coords, spec.dim)
    dim = spec.dim
    center = frames(spec, x, gauge)
    proj = center @ dagger(center)
    comp = np.eye(proj.shape[-1]) - proj
    dirs = range(dim) if directions is None else sorted(set(directions))
    residual = {}
    for mu in dirs:
        step = np.zeros(dim)
        step[mu] = h
        plus = aligned_frames(spec, x + step, center)
        minus = aligned_frames(spec, x - step, center)
        residual[mu] = comp @ ((plus - minus) / (2.0 * h))
    n_ground = center.shape[-1]
    q = np.full((x.shape[0], dim, dim, n_ground, n_ground), np.nan, dtype=complex)
    for mu in dirs:
        for nu in dirs:
            q[:, mu, nu] = dagger(residual[mu]) @ residual[nu]
    return q


def qgt_fd(
    spec: ModelSpec, p: ParameterPoint, gauge: str | None = None, h: float = DEFAULT_FD_STEP
) -> np.ndarray:
    """QGT blocks ``Q[mu, nu]`` (each N x N) at one point, shape ``(D, D, N, N)``."""
    if p.chart != spec.chart or p.dim != spec.dim:
        raise models.ChartError(f"{spec.family} needs a {spec.chart} point, got {p.chart}")
    return qgt_fd_batch(spec, p.array[None, :], gauge, h)[0]


def big_q(q: np.ndarray) -> np.ndarray:
    """Assemble ``(D, D, N, N)`` blocks into the ``DN x DN`` matrix."""
    dim, _, n, _ = q.shape[-4:]
    return np.swapaxes(q, -3, -2).reshape(q.shape[:-4] + (dim * n, dim * n))


@dataclass(frozen=True)
class MetricTensor:
    """Non-Abelian metric blocks ``g[mu, nu]`` (N x N each), array ``(D, D, N, N)``."""

    blocks: np.ndarray

    @property
    def D(self) -> int:
        return self.blocks.shape[0]

    @property
    def N(self) -> int:
        return self.blocks.shape[-1]

    def component(self, mu: int, nu: int, j: int, jp: int) -> complex:
        return complex(self.blocks[mu, nu, j, jp])

    def matrix(self) -> np.ndarray:
        return big_q(self.blocks)

    def violations(self, tol: float = 1e-10) -> list[str]:
        b = self.blocks
        out = []
        herm = np.nanmax(np.abs(b - dagger(b)))
        if herm > tol:
            out.append(f"blocks not Hermitian ({herm:.2e})")
        sym = np.nanmax(np.abs(b - np.swapaxes(b, 0, 1)))
        if sym > tol:
            out.append(f"g[mu,nu] != g[nu,mu] ({sym:.2e})")
        for mu in range(self.D):
            blk = b[mu, mu]
            if np.all(np.isfinite(blk)):
                low = np.linalg.eigvalsh(0.5 * (blk + blk.conj().T))[0]
                if low < -tol:
                    out.append(f"g[{mu},{mu}] has eigenvalue {low:.2e}")
        return out


@dataclass(frozen=True)
class CurvatureTensor:
    """Non-Abelian curvature blocks ``F[mu, nu]``; NaN marks blocks not provided."""

    blocks: np.ndarray

    @property
    def D(self) -> int:
        return self.blocks.shape[0]

    @property
    def N(self) -> int:
        return self.blocks.shape[-1]

    def component(self, mu: int, nu: int, j: int, jp: int) -> complex:
        return complex(self.blocks[mu, nu, j, jp])

    def violations(self, tol: float = 1e-10) -> list[str]:
        b = self.blocks
        out = []
        herm = np.nanmax(np.abs(b - dagger(b)))
        if herm > tol:
            out.append(f"blocks not Hermitian ({herm:.2e})")
        anti = np.nanmax(np.abs(b + np.swapaxes(b, 0, 1)))
        if anti > tol:
            out.append(f"F[mu,nu] != -F[nu,mu] ({anti:.2e})")
        return out


def metric_from_qgt(q: np.ndarray) -> MetricTensor:
    q = np.asarray(q)
    return MetricTensor(0.5 * (q + dagger(q)))


def curvature_from_qgt(q: np.ndarray) -> CurvatureTensor:
    q = np.asarray(q)
    return CurvatureTensor(1j * (q - dagger(q)))


# ---------------------------------------------------------------------------
# closed forms for the two monopole models

_EPS2 = np.array([[0, 1], [-1, 0]], dtype=complex)


def analytic_reference(spec: ModelSpec, p: ParameterPoint) -> tuple[MetricTensor, CurvatureTensor]:
    """Closed-form metric and curvature of the effective monopole models.

    Dirac model: in the gauge of :func:`appendix_eigenstates`. Yang model:
    diagonal metric and the two curvature blocks ``F[phi1, phi2]`` and
    ``F[phi3, phi4]`` (plus their transposes); all other curvature blocks are
    NaN. The Yang blocks refer to an unspecified gauge, so only
    gauge-invariant combinations of them are meaningful.
    """
    if p.chart != spec.chart:
        raise models.ChartError(f"{spec.family} needs a {spec.chart} point")
    eye = np.eye(2, dtype=complex)
    if spec.family == "dirac3d-eff":
        th, _ = p.coords
        st = math.sin(th)
        g = np.zeros((2, 2, 2, 2), dtype=complex)
        g[0, 0] = 0.25 * eye
        g[1, 1] = 0.25 * st * st * eye
        f = np.zeros_like(g)
        f[0, 1] = spec.sign * 0.5j * st * _EPS2
        f[1, 0] = -f[0, 1]
        return MetricTensor(g), CurvatureTensor(f)
    if spec.family == "yang-eff":
        p1, p2, p3, _ = p.coords
        s1, s2, s3 = math.sin(p1), math.sin(p2), math.sin(p3)
        c3 = math.cos(p3)
        g = np.zeros((4, 4, 2, 2), dtype=complex)
        diag = [0.25, s1**2 / 4, s1**2 * s2**2 / 4, s1**2 * s2**2 * s3**2 / 4]
        for mu, val in enumerate(diag):
            g[mu, mu] = val * eye
        f = np.full_like(g, np.nan)
        f12 = 0.5j * s1 * np.array([[1j * c3, -s3], [s3, -1j * c3]])
        f34 = (
            0.25j
            * s1**2
            * s2**2
            * np.array(
                [[-1j * math.sin(2 * p3), 2 * s3**2], [-2 * s3**2, 1j * math.sin(2 * p3)]]
            )
        )
        f[0, 1], f[1, 0] = f12, -f12
        f[2, 3], f[3, 2] = spec.sign * f34, -spec.sign * f34
        for mu in range(4):
            f[mu, mu] = 0.0
        return MetricTensor(g), CurvatureTensor(f)
    raise ContractError(f"no analytic reference for family {spec.family}")


class DetRelation(NamedTuple):
    residual_12: float
    residual_21: float
    det_11: float
    det_22: float

    @property
    def negative(self) -> bool:
        return self.det_11 < 0 or self.det_22 < 0


def same_band_det(blocks: np.ndarray, j: int, mu: int = 0, nu: int = 1) -> np.ndarray:
    """``det`` of the real 2x2 matrix of ``g^{jj}`` over directions ``(mu, nu)``."""
    a = blocks[..., mu, mu, j, j].real
    b = blocks[..., nu, nu, j, j].real
    c = blocks[..., mu, nu, j, j].real
    return a * b - c * c


def det_relation_check(
    g: MetricTensor, f: CurvatureTensor, mu: int = 0, nu: int = 1
) -> DetRelation:
    """``|F^{12}_{mu nu}| - 2 sqrt(det g^{11})`` and the same for band 2."""
    if g.N != 2:
        raise ContractError("the determinant relation needs a two-fold ground bundle")
    d11 = float(same_band_det(g.blocks, 0, mu, nu))
    d22 = float(same_band_det(g.blocks, 1, mu, nu))
    r12 = abs(f.blocks[mu, nu, 0, 1]) - 2.0 * math.sqrt(max(d11, 0.0))
    r21 = abs(f.blocks[mu, nu, 1, 0]) - 2.0 * math.sqrt(max(d22, 0.0))
    return DetRelation(float(r12), float(r21), d11, d22)


def fidelity_distance(
    spec: ModelSpec, p: ParameterPoint, coeffs, dlam, gauge: str | None = None
) -> float:
    """``1 - |<Psi(lambda)|Psi(lambda + dlambda)>|^2`` for fixed coefficients."""
    c = np.asarray(coeffs, dtype=complex)
    if abs(np.vdot(c, c).real - 1.0) > 1e-12:
        raise ContractError("coefficients must be normalised")
    x = p.array
    center = frames(spec, x, gauge)
    moved = aligned_frames(spec, x + np.asarray(dlam, dtype=float), center)
    psi0 = center[0] @ c
    psi1 = moved[0] @ c
    return float(1.0 - abs(np.vdot(psi0, psi1)) ** 2)

"""Sphere quadrature and the monopole invariants.

Four pipelines: the real Chern number of the S^2 Dirac monopole from the
curvature and from the metric, and the second Chern number of the S^4 Yang
monopole from the curvature and from the band-traced metric ``G``. Metric
sources are ``analytic`` (closed forms), ``fd`` (finite-difference QGT) or
``quench`` (simulated excitation probabilities).
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import permutations
from typing import Callable

import numpy as np

from . import geometry, models, quench
from .geometry import MetricTensor
from .models import ModelSpec
from .numlin import ContractError

PAPER_C2_COEFF = 3.0 / math.pi**2
CLAMP_BUDGET = 0.01
COARSE_FLAG = 0.05
SOURCES = ("analytic", "fd", "quench")
NORMALIZATIONS = ("paper-printed", "oracle-calibrated")

_I2 = np.array([[0, -1], [1, 0]], dtype=complex)  # -i sigma_2


class IntegrationQualityError(RuntimeError):
    """Too many nodes needed clamping; the integrand is not trustworthy."""


@dataclass(frozen=True)
class SphereGrid:
    """Product quadrature on the angle box of S^2 or S^4.

    Polar axes cover ``(0, pi)`` and the azimuth ``(0, 2 pi)``. The azimuth
    always uses the uniform midpoint rule (exact for trigonometric
    polynomials); polar axes use Gauss-Legendre (``rule="gauss"``) or the
    midpoint rule. Either way all nodes are interior. Weights are the plain
    coordinate measure; Jacobians live in the integrands.
    """

    kind: str
    cells: tuple[int, ...]
    rule: str = "gauss"

    def __post_init__(self):
        cells = tuple(int(c) for c in self.cells)
        object.__setattr__(self, "cells", cells)
        want = {"S2": 2, "S4": 4}.get(self.kind)
        if want is None:
            raise ContractError(f"grid kind must be S2 or S4, got {self.kind!r}")
        if len(cells) != want or min(cells) < 1:
            raise ContractError(f"{self.kind} grid needs {want} positive cell counts, got {cells}")
        if self.rule not in ("gauss", "midpoint"):
            raise ContractError(f"rule must be gauss or midpoint, got {self.rule!r}")

    @classmethod
    def default(cls, kind: str, mode: str = "oracle", rule: str = "gauss") -> "SphereGrid":
        table = {
            ("S2", "oracle"): (100, 100),
            ("S2", "quench"): (50, 50),
            ("S4", "oracle"): (20, 20, 20, 40),
            ("S4", "quench"): (12, 12, 12, 12),
        }
        return cls(kind, table[(kind, mode)], rule)

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def size(self) -> int:
        return int(np.prod(self.cells))

    def axis(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        n = self.cells[i]
        if i == self.dim - 1:
            h = 2 * math.pi / n
            return (np.arange(n) + 0.5) * h, np.full(n, h)
        if self.rule == "midpoint":
            h = math.pi / n
            return (np.arange(n) + 0.5) * h, np.full(n, h)
        x, w = np.polynomial.legendre.leggauss(n)
        return 0.5 * math.pi * (x + 1.0), 0.5 * math.pi * w

    def nodes(self) -> np.ndarray:
        axes = [self.axis(i)[0] for i in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def weights(self) -> np.ndarray:
        w = self.axis(0)[1]
        for i in range(1, self.dim):
            w = np.multiply.outer(w, self.axis(i)[1])
        return w.ravel()

    def to_dict(self) -> dict:
        return {"kind": self.kind, "cells": list(self.cells), "rule": self.rule}


@dataclass
class ChernResult:
    value: float
    method: str
    invariant: str = "real"
    normalization: str | None = None
    grid: dict = field(default_factory=dict)
    delta_lambda: float | None = None
    T: float | None = None
    time_unit: str | None = None
    substeps: int | None = None
    clamped_nodes: int = 0
    calibration_ratio: float | None = None

    @property
    def mod2(self) -> int | None:
        if self.invariant != "real":
            return None
        return int(round(self.value)) % 2

    @property
    def integer_distance(self) -> float:
        return abs(self.value - round(self.value))

    @property
    def coarse(self) -> bool:
        return self.integer_distance > COARSE_FLAG

    def to_dict(self) -> dict:
        out = asdict(self)
        out["mod2"] = self.mod2
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


# ---------------------------------------------------------------------------
# chunked evaluation


def _chunked(fn: Callable[[np.ndarray], np.ndarray], nodes: np.ndarray, threads: int) -> np.ndarray:
    chunks = [nodes[i : i + quench.CHUNK] for i in range(0, nodes.shape[0], quench.CHUNK)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(fn, chunks))
    else:
        parts = [fn(c) for c in chunks]
    return np.concatenate(parts)


def integrate(values: np.ndarray, grid: SphereGrid) -> float:
    """Correctly rounded weighted sum, so the result is order-independent."""
    return math.fsum((np.asarray(values, dtype=float) * grid.weights()).tolist())


def _require(spec: ModelSpec, family: str, grid: SphereGrid, kind: str) -> None:
    if spec.family != family:
        raise ContractError(f"this pipeline needs a {family} model, got {spec.family}")
    if grid.kind != kind:
        raise ContractError(f"this pipeline integrates over {kind}, got a {grid.kind} grid")


@dataclass(frozen=True)
class QuenchSettings:
    delta_lambda: float | None = None
    schedule: quench.Schedule = field(default_factory=quench.Schedule)

    def step(self, spec: ModelSpec) -> float:
        if self.delta_lambda is None:
            return quench.default_delta_lambda(spec)
        return float(self.delta_lambda)

    def stamp(self, result: ChernResult, spec: ModelSpec) -> ChernResult:
        result.delta_lambda = self.step(spec)
        result.T = self.schedule.T if self.schedule.kind == "linear" else 0.0
        result.time_unit = self.schedule.time_unit
        result.substeps = int(self.schedule.substeps) if self.schedule.kind == "linear" else 0
        return result


# ---------------------------------------------------------------------------
# closed-form and oracle blocks on node batches


def dirac_analytic_blocks(nodes: np.ndarray, sign: int = 1) -> tuple[np.ndarray, np.ndarray]:
    st = np.sin(nodes[:, 0])
    b = nodes.shape[0]
    eye = np.eye(2)
    g = np.zeros((b, 2, 2, 2, 2), dtype=complex)
    g[:, 0, 0] = 0.25 * eye
    g[:, 1, 1] = (0.25 * st * st)[:, None, None] * eye
    f = np.zeros_like(g)
    f[:, 0, 1] = (sign * 0.5j * st)[:, None, None] * np.array([[0, 1], [-1, 0]])
    f[:, 1, 0] = -f[:, 0, 1]
    return g, f


def yang_analytic_metric(nodes: np.ndarray) -> np.ndarray:
    s1, s2, s3 = (np.sin(nodes[:, i]) for i in range(3))
    diag = np.stack([np.full_like(s1, 0.25), s1**2 / 4, (s1 * s2) ** 2 / 4, (s1 * s2 * s3) ** 2 / 4], -1)
    g = np.zeros((nodes.shape[0], 4, 4, 2, 2), dtype=complex)
    for mu in range(4):
        g[:, mu, mu] = diag[:, mu, None, None] * np.eye(2)
    return g


def yang_analytic_f12_f34(nodes: np.ndarray, sign: int = 1) -> tuple[np.ndarray, np.ndarray]:
    s1, s2, s3 = (np.sin(nodes[:, i]) for i in range(3))
    c3 = np.cos(nodes[:, 2])
    s23 = np.sin(2 * nodes[:, 2])
    f12 = 0.5j * s1[:, None, None] * np.stack(
        [np.stack([1j * c3, -s3], -1), np.stack([s3, -1j * c3], -1)], -2
    )
    pref = (sign * 0.25j * s1**2 * s2**2)[:, None, None]
    f34 = pref * np.stack(
        [np.stack([-1j * s23, 2 * s3**2], -1), np.stack([-2 * s3**2, 1j * s23], -1)], -2
    )
    return f12, f34


def _fd_blocks(spec: ModelSpec, gauge: str | None, h: float):
    def fn(chunk: np.ndarray) -> np.ndarray:
        return geometry.qgt_fd_batch(spec, chunk, gauge, h)

    return fn


def metric_blocks(
    spec: ModelSpec,
    nodes: np.ndarray,
    source: str,
    *,
    selection=None,
    settings: QuenchSettings | None = None,
    gauge: str | None = None,
    threads: int = 1,
    h: float = geometry.DEFAULT_FD_STEP,
) -> np.ndarray:
    """Metric blocks ``(M, D, D, N, N)`` at grid nodes from the chosen source."""
    if source == "analytic":
        if spec.family == "dirac3d-eff":
            return dirac_analytic_blocks(nodes, spec.sign)[0]
        if spec.family == "yang-eff":
            return yang_analytic_metric(nodes)
        raise ContractError(f"no analytic metric for {spec.family}")
    if source == "fd":
        q = _chunked(_fd_blocks(spec, gauge, h), nodes, threads)
        return geometry.metric_from_qgt(q).blocks
    if source == "quench":
        settings = settings or QuenchSettings()
        blocks, _ = quench.measure_metric_batch(
            spec,
            nodes,
            selection,
            delta_lambda=settings.step(spec),
            schedule=settings.schedule,
            gauge=gauge,
            threads=threads,
        )
        return blocks
    raise ContractError(f"metric source must be one of {SOURCES}, got {source!r}")


# ---------------------------------------------------------------------------
# real Chern number on S^2


def real_chern_from_curvature(
    spec: ModelSpec,
    grid: SphereGrid | None = None,
    source: str = "analytic",
    *,
    gauge: str | None = None,
    threads: int = 1,
) -> ChernResult:
    """``(1/4 pi) int tr(I (-i F_theta_phi))`` with ``I = -i sigma_2``."""
    grid = grid or SphereGrid.default("S2")
    _require(spec, "dirac3d-eff", grid, "S2")
    nodes = grid.nodes()
    if source == "analytic":
        f01 = dirac_analytic_blocks(nodes, spec.sign)[1][:, 0, 1]
    elif source == "fd":
        q = _chunked(_fd_blocks(spec, gauge, geometry.DEFAULT_FD_STEP), nodes, threads)
        f01 = geometry.curvature_from_qgt(q).blocks[:, 0, 1]
    else:
        raise ContractError(f"curvature source must be analytic or fd, got {source!r}")
    integrand = np.trace(_I2 @ (-1j * f01), axis1=-2, axis2=-1).real
    value = integrate(integrand, grid) / (4 * math.pi)
    return ChernResult(value, f"curvature-{_oracle_name(source)}", "real", grid=grid.to_dict())


def _oracle_name(source: str) -> str:
    return {"analytic": "analytic", "fd": "oracle", "quench": "quench"}[source]


def clamped_sqrt(det: np.ndarray) -> tuple[np.ndarray, int]:
    neg = det < 0.0
    return np.sqrt(np.where(neg, 0.0, det)), int(np.count_nonzero(neg))


def _check_clamp(clamped: int, total: int) -> None:
    if clamped > CLAMP_BUDGET * total:
        raise IntegrationQualityError(
            f"{clamped} of {total} nodes had negative determinants "
            f"(budget {CLAMP_BUDGET:.0%}); refine delta_lambda or T"
        )


def real_chern_from_metric(
    spec: ModelSpec,
    grid: SphereGrid | None = None,
    source: str = "analytic",
    *,
    settings: QuenchSettings | None = None,
    gauge: str | None = None,
    threads: int = 1,
) -> ChernResult:
    """``(1/2 pi) int (sqrt det g^11 + sqrt det g^22)`` over the same-band 2x2 blocks."""
    default_mode = "quench" if source == "quench" else "oracle"
    grid = grid or SphereGrid.default("S2", default_mode)
    _require(spec, "dirac3d-eff", grid, "S2")
    g = metric_blocks(
        spec,
        grid.nodes(),
        source,
        selection=quench.same_band_selection(2, 2),
        settings=settings,
        gauge=gauge,
        threads=threads,
    )
    integrand = np.zeros(grid.size)
    clamped = 0
    for j in range(2):
        root, n = clamped_sqrt(geometry.same_band_det(g, j))
        integrand += root
        clamped += n
    _check_clamp(clamped, 2 * grid.size)
    value = integrate(integrand, grid) / (2 * math.pi)
    result = ChernResult(
        value, f"metric-{_oracle_name(source)}", "real", grid=grid.to_dict(), clamped_nodes=clamped
    )
    if source == "quench":
        (settings or QuenchSettings()).stamp(result, spec)
    return result


# ---------------------------------------------------------------------------
# second Chern number on S^4

def _parity(perm: tuple[int, ...]) -> int:
    inversions = sum(1 for i in range(len(perm)) for j in range(i + 1, len(perm)) if perm[i] > perm[j])
    return -1 if inversions % 2 else 1


_EPS4 = [(perm, _parity(perm)) for perm in permutations(range(4))]


def epsilon_density(f: np.ndarray) -> np.ndarray:
    """``eps^{abcd} tr(F_ab F_cd)`` from curvature blocks ``(..., 4, 4, N, N)``."""
    out = np.zeros(f.shape[:-4])
    for (a, b, c, d), sgn in _EPS4:
        out = out + sgn * np.trace(f[..., a, b, :, :] @ f[..., c, d, :, :], axis1=-2, axis2=-1).real
    return out


def second_chern_from_curvature(
    spec: ModelSpec,
    grid: SphereGrid | None = None,
    source: str = "analytic",
    *,
    gauge: str | None = None,
    threads: int = 1,
) -> ChernResult:
    """``(3/4 pi^2) int tr(F_12 F_34)`` (analytic) or ``(1/32 pi^2) int eps tr(FF)`` (fd)."""
    grid = grid or SphereGrid.default("S4")
    _require(spec, "yang-eff", grid, "S4")
    nodes = grid.nodes()
    if source == "analytic":
        f12, f34 = yang_analytic_f12_f34(nodes, spec.sign)
        density = 3.0 / (4 * math.pi**2) * np.trace(f12 @ f34, axis1=-2, axis2=-1).real
    elif source == "fd":
        q = _chunked(_fd_blocks(spec, gauge, geometry.DEFAULT_FD_STEP), nodes, threads)
        density = epsilon_density(geometry.curvature_from_qgt(q).blocks) / (32 * math.pi**2)
    else:
        raise ContractError(f"curvature source must be analytic or fd, got {source!r}")
    value = integrate(density, grid)
    return ChernResult(value, f"curvature-{_oracle_name(source)}", "second", grid=grid.to_dict())


def g_trace_matrix(metric: MetricTensor | np.ndarray) -> np.ndarray:
    """``G_ij = tr g_{ij}``; works on a single tensor or a batch of block arrays."""
    blocks = metric.blocks if isinstance(metric, MetricTensor) else np.asarray(metric)
    tr = np.trace(blocks, axis1=-2, axis2=-1)
    imag = np.nanmax(np.abs(tr.imag)) if tr.size else 0.0
    if imag > 1e-10:
        raise ContractError(f"band trace of the metric has imaginary part {imag:.2e}")
    g = tr.real
    return 0.5 * (g + np.swapaxes(g, -1, -2))


@dataclass(frozen=True)
class DetGCheck:
    max_deviation: float
    ratios: np.ndarray
    signs: np.ndarray

    @property
    def ratio(self) -> float:
        return float(np.median(self.ratios))

    @property
    def ratio_spread(self) -> float:
        return float(np.max(self.ratios) - np.min(self.ratios))

    @property
    def constant_sign(self) -> int:
        s = np.unique(self.signs)
        if s.size != 1:
            raise ContractError("sign of the curvature density changes across the sample")
        return int(s[0])


def sqrt_detG_vs_F_check(
    spec: ModelSpec, points, *, gauge: str | None = None, h: float = geometry.DEFAULT_FD_STEP
) -> DetGCheck:
    """Compare ``48 sqrt(det G)`` with ``|eps tr(FF)|`` from the FD oracle."""
    if spec.family != "yang-eff":
        raise ContractError("the sqrt(det G) relation is specific to the Yang model")
    x = np.atleast_2d(np.asarray(points, dtype=float))
    q = geometry.qgt_fd_batch(spec, x, gauge, h)
    root = np.sqrt(np.clip(np.linalg.det(g_trace_matrix(geometry.metric_from_qgt(q))), 0.0, None))
    dens = epsilon_density(geometry.curvature_from_qgt(q).blocks)
    dev = np.abs(48.0 * root - np.abs(dens)) / np.maximum(np.abs(dens), 1e-12)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.abs(dens) / root
    return DetGCheck(float(dev.max()), ratios, np.sign(dens).astype(int))


def sample_s4(n: int, seed: int = 0, margin: float = 0.05) -> np.ndarray:
    rng = np.random.default_rng(seed)
    polar = rng.uniform(margin, math.pi - margin, size=(n, 3))
    az = rng.uniform(margin, 2 * math.pi - margin, size=(n, 1))
    return np.concatenate([polar, az], axis=-1)


def _sqrt_det_g(g_blocks: np.ndarray) -> tuple[np.ndarray, int]:
    return clamped_sqrt(np.linalg.det(g_trace_matrix(g_blocks)))


def calibration(spec: ModelSpec, grid: SphereGrid) -> tuple[float, float]:
    """Coefficient ``c`` making ``c int sgn sqrt(det G)`` equal the curvature value.

    Both sides use closed forms on ``grid``. Returns ``(c, c / (3/pi^2))``.
    """
    _require(spec, "yang-eff", grid, "S4")
    nodes = grid.nodes()
    f12, f34 = yang_analytic_f12_f34(nodes, spec.sign)
    dens = np.trace(f12 @ f34, axis1=-2, axis2=-1).real
    root, _ = _sqrt_det_g(yang_analytic_metric(nodes))
    target = integrate(3.0 / (4 * math.pi**2) * dens, grid)
    base = integrate(np.sign(dens) * root, grid)
    c = target / base
    return c, c / PAPER_C2_COEFF


def second_chern_from_metric(
    spec: ModelSpec,
    grid: SphereGrid | None = None,
    source: str = "analytic",
    normalization: str = "oracle-calibrated",
    *,
    settings: QuenchSettings | None = None,
    gauge: str | None = None,
    threads: int = 1,
    sign_samples: int = 16,
    seed: int = 0,
) -> ChernResult:
    """``c int sgn(F) sqrt(det G)`` with ``c`` printed or calibrated.

    The curvature sign comes from the FD density at each node for the
    ``fd`` source; otherwise it is the constant sign found on a seeded
    random sample.
    """
    if normalization not in NORMALIZATIONS:
        raise ContractError(f"normalization must be one of {NORMALIZATIONS}")
    default_mode = "quench" if source == "quench" else "oracle"
    grid = grid or SphereGrid.default("S4", default_mode)
    _require(spec, "yang-eff", grid, "S4")
    nodes = grid.nodes()
    if source == "fd":
        q = _chunked(_fd_blocks(spec, gauge, geometry.DEFAULT_FD_STEP), nodes, threads)
        g = geometry.metric_from_qgt(q).blocks
        sgn = np.sign(epsilon_density(geometry.curvature_from_qgt(q).blocks))
    else:
        g = metric_blocks(
            spec,
            nodes,
            source,
            selection=quench.same_band_selection(4, 2),
            settings=settings,
            gauge=gauge,
            threads=threads,
        )
        sgn = sqrt_detG_vs_F_check(spec, sample_s4(sign_samples, seed), gauge=gauge).constant_sign
    root, clamped = _sqrt_det_g(g)
    _check_clamp(clamped, grid.size)
    c, ratio = calibration(spec, grid)
    coeff = c if normalization == "oracle-calibrated" else PAPER_C2_COEFF
    value = coeff * integrate(sgn * root, grid)
    result = ChernResult(
        value,
        f"metric-{_oracle_name(source)}",
        "second",
        normalization=normalization,
        grid=grid.to_dict(),
        clamped_nodes=clamped,
        calibration_ratio=ratio,
    )
    if source == "quench":
        (settings or QuenchSettings()).stamp(result, spec)
    return result

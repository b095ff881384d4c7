"""Simulated parameter quenches and metric extraction from excitation probabilities.

A run prepares a normalised combination of the gauge-fixed ground frame at
``lambda_0``, ramps the parameters by ``dlam`` along one or two coordinate
axes and records the weight left in the excited subspace of the end-point
Hamiltonian. To leading order that weight is ``dlam^2`` times a metric
component, so a handful of runs per point recovers every block entry.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import geometry, models
from .geometry import MetricTensor
from .models import ModelSpec, ParameterPoint
from .numlin import ContractError, dagger, unitary_exp

TIME_UNITS = {"two-pi": 2.0 * math.pi, "one": 1.0}
DEFAULT_T = 0.001
DEFAULT_SUBSTEPS = 100
# fixed batch size for chunked evaluation; results never depend on thread count
CHUNK = 2048
PROB_SLACK = 1e-12

STATE_KINDS = ("band", "a", "b")


def default_delta_lambda(spec: ModelSpec) -> float:
    """Quench step used when none is given: pi/100 in 3D, pi/80 otherwise."""
    if spec.family in ("dirac3d-eff", "dirac3d-lattice", "experimental-4level"):
        return math.pi / 100
    return math.pi / 80


@dataclass(frozen=True)
class PreparedState:
    """Initial state as coefficients over the gauge-fixed ground frame.

    ``kind="band"`` is ``psi_j``; ``"a"`` and ``"b"`` are the superpositions
    ``(psi_j + psi_jp)/sqrt2`` and ``(psi_j + i psi_jp)/sqrt2``. Indices are
    zero-based.
    """

    kind: str
    j: int
    jp: int | None = None

    def __post_init__(self):
        if self.kind not in STATE_KINDS:
            raise ContractError(f"state kind must be one of {STATE_KINDS}, got {self.kind!r}")
        if self.j < 0:
            raise ContractError("band index must be non-negative")
        if self.kind == "band":
            if self.jp is not None:
                raise ContractError("a band state takes a single index")
        elif self.jp is None or self.jp == self.j or self.jp < 0:
            raise ContractError("superposition states need two distinct band indices")

    def coefficients(self, n_ground: int) -> np.ndarray:
        top = self.j if self.jp is None else max(self.j, self.jp)
        if top >= n_ground:
            raise ContractError(f"band index {top} outside a {n_ground}-fold ground space")
        c = np.zeros(n_ground, dtype=complex)
        if self.kind == "band":
            c[self.j] = 1.0
        else:
            c[self.j] = 1.0 / math.sqrt(2.0)
            c[self.jp] = (1.0 if self.kind == "a" else 1j) / math.sqrt(2.0)
        return c

    @property
    def label(self) -> str:
        if self.kind == "band":
            return f"band{self.j + 1}"
        return f"{self.kind}{self.j + 1}{self.jp + 1}"


@dataclass(frozen=True)
class Schedule:
    """Sudden jump or linear ramp ``lambda(t) = lambda_0 + (t/T) dlam e``.

    ``T`` is in units of ``2 pi / Omega_0`` when ``time_unit="two-pi"``.
    """

    kind: str = "linear"
    T: float = DEFAULT_T
    substeps: int = DEFAULT_SUBSTEPS
    time_unit: str = "two-pi"

    def __post_init__(self):
        if self.kind not in ("sudden", "linear"):
            raise ContractError(f"schedule must be sudden or linear, got {self.kind!r}")
        if self.time_unit not in TIME_UNITS:
            raise ContractError(f"time_unit must be one of {tuple(TIME_UNITS)}")
        if self.kind == "linear":
            if not (math.isfinite(self.T) and self.T >= 0.0):
                raise ContractError(f"quench time must be finite and >= 0, got {self.T}")
            if int(self.substeps) != self.substeps or self.substeps < 1:
                raise ContractError(f"substeps must be a positive integer, got {self.substeps}")

    @property
    def duration(self) -> float:
        """Physical evolution time in units with hbar = Omega_0 = 1."""
        return 0.0 if self.kind == "sudden" else TIME_UNITS[self.time_unit] * self.T

    @classmethod
    def sudden(cls) -> "Schedule":
        return cls(kind="sudden")


@dataclass(frozen=True)
class QuenchSpec:
    start: ParameterPoint
    directions: tuple[int, ...]
    delta_lambda: float
    schedule: Schedule = field(default_factory=Schedule)

    def __post_init__(self):
        dirs = tuple(int(d) for d in self.directions)
        object.__setattr__(self, "directions", dirs)
        if len(dirs) not in (1, 2) or len(set(dirs)) != len(dirs):
            raise ContractError(f"need one or two distinct directions, got {dirs}")
        if any(d < 0 or d >= self.start.dim for d in dirs):
            raise ContractError(f"direction index out of range for a {self.start.dim}-dim point")
        if not (math.isfinite(self.delta_lambda) and self.delta_lambda >= 0.0):
            raise ContractError(f"delta_lambda must be >= 0, got {self.delta_lambda}")

    @property
    def unit(self) -> np.ndarray:
        e = np.zeros(self.start.dim)
        e[list(self.directions)] = 1.0
        return e

    @property
    def end(self) -> np.ndarray:
        return self.start.array + self.delta_lambda * self.unit


@dataclass(frozen=True)
class TransitionResult:
    gamma: float
    spec: QuenchSpec
    state: PreparedState
    total: float = 1.0

    def __post_init__(self):
        if not (-PROB_SLACK <= self.gamma <= 1.0 + PROB_SLACK):
            raise ContractError(f"transition probability {self.gamma} outside [0, 1]")


# ---------------------------------------------------------------------------
# batched engine


def _clifford_step(spec: ModelSpec, psi: np.ndarray, coords: np.ndarray, dt: float) -> np.ndarray:
    # exp(-i d.Gamma dt) = cos(|d| dt) - i sin(|d| dt) d_hat.Gamma
    d = models.coefficients(spec, coords)
    norm = np.sqrt(np.sum(d * d, axis=-1))
    hpsi = np.einsum("ba,aij,bj->bi", d / norm[:, None], models.gamma_matrices(spec), psi)
    return np.cos(norm * dt)[:, None] * psi - 1j * np.sin(norm * dt)[:, None] * hpsi


def _evolve_batch(
    spec: ModelSpec, psi: np.ndarray, start: np.ndarray, step: np.ndarray, schedule: Schedule
) -> np.ndarray:
    if schedule.kind == "sudden" or schedule.duration == 0.0:
        return psi
    n = int(schedule.substeps)
    dt = schedule.duration / n
    dirac = models.is_dirac_form(spec)
    for k in range(n):
        lam = start + ((k + 0.5) / n) * step
        if dirac:
            psi = _clifford_step(spec, psi, lam, dt)
        else:
            u = unitary_exp(models.hamiltonian_at(spec, lam), dt)
            psi = np.einsum("bij,bj->bi", u, psi)
    return psi


def _excited_weight(spec: ModelSpec, psi: np.ndarray, end: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Excited-subspace weight and total norm of ``psi`` at the end points."""
    total = np.sum(np.abs(psi) ** 2, axis=-1)
    if models.is_dirac_form(spec):
        # P_exc = (1 + H_hat)/2; fail loudly if the end point sits on a node
        geometry.ground_projector(spec, end)
        d = models.coefficients(spec, end)
        norm = np.sqrt(np.sum(d * d, axis=-1))
        hpsi = np.einsum("ba,aij,bj->bi", d / norm[:, None], models.gamma_matrices(spec), psi)
        up = 0.5 * (psi + hpsi)
        return np.sum(np.abs(up) ** 2, axis=-1), total
    _, evecs = geometry.cluster_eigen(spec, end)
    amp = np.einsum("bij,bi->bj", np.conj(evecs), psi)
    weights = np.abs(amp) ** 2
    return np.sum(weights[:, spec.degeneracy :], axis=-1), np.sum(weights, axis=-1)


def gamma_batch(
    spec: ModelSpec,
    starts,
    directions: Sequence[int],
    delta_lambda: float,
    schedule: Schedule,
    coefficients,
    *,
    gauge: str | None = None,
    frames: np.ndarray | None = None,
    return_total: bool = False,
):
    """Excitation probabilities for one protocol at a batch of start points.

    ``coefficients`` has shape ``(N,)`` (shared) or ``(B, N)``. ``frames`` may
    pass precomputed gauge-fixed ground frames at ``starts``.
    """
    x = np.atleast_2d(np.asarray(starts, dtype=float))
    if x.shape[-1] != spec.dim:
        raise ContractError(f"expected {spec.dim} coordinates per start point")
    step = np.zeros(spec.dim)
    step[list(directions)] = delta_lambda
    if frames is None:
        frames = geometry.frames(spec, x, gauge)
    c = np.asarray(coefficients, dtype=complex)
    psi = np.einsum("bij,...j->bi", frames, c) if c.ndim == 1 else np.einsum("bij,bj->bi", frames, c)
    psi = _evolve_batch(spec, psi, x, step, schedule)
    gamma, total = _excited_weight(spec, psi, x + step)
    return (gamma, total) if return_total else gamma


def evolve(spec: ModelSpec, q: QuenchSpec, s: PreparedState, gauge: str | None = None) -> np.ndarray:
    """State vector at the end of the ramp."""
    _check_point(spec, q.start)
    geometry.ground_projector(spec, q.end[None, :])
    frame = geometry.frames(spec, q.start.array[None, :], gauge)
    psi = frame @ s.coefficients(spec.degeneracy)
    step = q.delta_lambda * q.unit
    return _evolve_batch(spec, psi, q.start.array[None, :], step, q.schedule)[0]


def transition_probability(
    spec: ModelSpec, q: QuenchSpec, s: PreparedState, gauge: str | None = None
) -> TransitionResult:
    _check_point(spec, q.start)
    gamma, total = gamma_batch(
        spec,
        q.start.array[None, :],
        q.directions,
        q.delta_lambda,
        q.schedule,
        s.coefficients(spec.degeneracy),
        gauge=gauge,
        return_total=True,
    )
    return TransitionResult(float(gamma[0]), q, s, float(total[0]))


def _check_point(spec: ModelSpec, p: ParameterPoint) -> None:
    if p.chart != spec.chart or p.dim != spec.dim:
        raise models.ChartError(f"{spec.family} needs a {spec.chart} point, got {p.chart}")


# ---------------------------------------------------------------------------
# inversion formulas


def extract_diag(gamma, delta_lambda: float):
    """``g^{jj}_{mu mu} ~ Gamma / dlam^2``."""
    _positive(delta_lambda)
    return gamma / delta_lambda**2


def extract_offdiag_same_band(gamma_munu, gamma_mumu, gamma_nunu, delta_lambda: float):
    _positive(delta_lambda)
    return (gamma_munu - gamma_mumu - gamma_nunu) / (2.0 * delta_lambda**2)


def extract_offdiag_bands(gamma_aa, gamma_bb, gamma_jj, gamma_jpjp, delta_lambda: float):
    """Complex ``g^{jj'}`` from the four band/superposition probabilities.

    For two different directions pass the already-combined quantities
    ``Gamma_{mu nu} - Gamma_{mu mu} - Gamma_{nu nu}`` of each state.
    """
    _positive(delta_lambda)
    re = (2.0 * gamma_aa - gamma_jj - gamma_jpjp) / (2.0 * delta_lambda**2)
    im = (gamma_jj + gamma_jpjp - 2.0 * gamma_bb) / (2.0 * delta_lambda**2)
    return re + 1j * im


def _positive(delta_lambda: float) -> None:
    if not delta_lambda > 0.0:
        raise ContractError(f"delta_lambda must be positive, got {delta_lambda}")


# ---------------------------------------------------------------------------
# protocol planning


Component = tuple[int, int, int, int]  # (mu, nu, j, jp) with mu <= nu, j <= jp
RunKey = tuple[PreparedState, tuple[int, ...]]


def full_selection(dim: int, n_ground: int) -> list[Component]:
    return [
        (mu, nu, j, jp)
        for mu in range(dim)
        for nu in range(mu, dim)
        for j in range(n_ground)
        for jp in range(j, n_ground)
    ]


def same_band_selection(dim: int, n_ground: int) -> list[Component]:
    return [c for c in full_selection(dim, n_ground) if c[2] == c[3]]


def _normalise(selection: Iterable[Component]) -> list[Component]:
    out = []
    for mu, nu, j, jp in selection:
        mu, nu = sorted((int(mu), int(nu)))
        j, jp = sorted((int(j), int(jp)))
        if (mu, nu, j, jp) not in out:
            out.append((mu, nu, j, jp))
    return out


def _states_for(j: int, jp: int) -> list[PreparedState]:
    if j == jp:
        return [PreparedState("band", j)]
    return [
        PreparedState("band", j),
        PreparedState("band", jp),
        PreparedState("a", j, jp),
        PreparedState("b", j, jp),
    ]


def plan_runs(selection: Iterable[Component]) -> list[RunKey]:
    """Smallest list of (state, directions) runs covering ``selection``.

    Runs shared between components (e.g. the single-direction runs that the
    off-direction formula reuses) are issued once. Order is deterministic.
    """
    runs: list[RunKey] = []
    for mu, nu, j, jp in _normalise(selection):
        dirs = [(mu,)] if mu == nu else [(mu,), (nu,), (mu, nu)]
        for state in _states_for(j, jp):
            for d in dirs:
                if (state, d) not in runs:
                    runs.append((state, d))
    return runs


def _combine(gam: dict, state: PreparedState, mu: int, nu: int, dlam: float):
    if mu == nu:
        return gam[(state, (mu,))]
    return extract_offdiag_same_band(
        gam[(state, (mu, nu))], gam[(state, (mu,))], gam[(state, (nu,))], dlam
    ) * dlam**2  # back to probability units so the Re/Im formula applies unchanged


def assemble(
    gam: dict, selection: Iterable[Component], dim: int, n_ground: int, dlam: float
) -> np.ndarray:
    """Metric blocks ``(..., D, D, N, N)`` from per-run probabilities; NaN where not selected."""
    shape = np.shape(next(iter(gam.values()))) if gam else ()
    g = np.full(shape + (dim, dim, n_ground, n_ground), np.nan, dtype=complex)
    for mu, nu, j, jp in _normalise(selection):
        if j == jp:
            val = _combine(gam, PreparedState("band", j), mu, nu, dlam) / dlam**2
        else:
            parts = [
                _combine(gam, s, mu, nu, dlam)
                for s in (
                    PreparedState("a", j, jp),
                    PreparedState("b", j, jp),
                    PreparedState("band", j),
                    PreparedState("band", jp),
                )
            ]
            val = extract_offdiag_bands(*parts, dlam)
        g[..., mu, nu, j, jp] = val
        g[..., nu, mu, j, jp] = val
        g[..., mu, nu, jp, j] = np.conj(val)
        g[..., nu, mu, jp, j] = np.conj(val)
    return g


@dataclass(frozen=True)
class RunRecord:
    run_id: int
    family: str
    coords: tuple[float, ...]
    state: str
    directions: tuple[int, ...]
    delta_lambda: float
    schedule: str
    T: float
    substeps: int
    gamma: float

    CSV_HEADER = (
        "run_id",
        "family",
        "coords",
        "state",
        "directions",
        "delta_lambda",
        "schedule",
        "T",
        "substeps",
        "gamma",
    )

    def csv_row(self) -> list[str]:
        fmt = lambda v: format(v, ".17g")  # noqa: E731
        return [
            str(self.run_id),
            self.family,
            " ".join(fmt(c) for c in self.coords),
            self.state,
            "+".join(str(d) for d in self.directions),
            fmt(self.delta_lambda),
            self.schedule,
            fmt(self.T),
            str(self.substeps),
            fmt(self.gamma),
        ]


@dataclass
class MetricMeasurement:
    metric: MetricTensor
    records: list[RunRecord]
    selection: list[Component]

    @property
    def n_runs(self) -> int:
        return len(self.records)


def measure_metric_batch(
    spec: ModelSpec,
    coords,
    selection: Iterable[Component] | None = None,
    *,
    delta_lambda: float | None = None,
    schedule: Schedule | None = None,
    gauge: str | None = None,
    threads: int = 1,
) -> tuple[np.ndarray, dict]:
    """Quench-estimated metric blocks ``(B, D, D, N, N)`` and the per-run probabilities.

    Points are processed in fixed-size chunks; ``threads`` only changes how
    many chunks run at once, never the arithmetic.
    """
    x = np.atleast_2d(np.asarray(coords, dtype=float))
    dim, n_ground = spec.dim, spec.degeneracy
    selection = _normalise(full_selection(dim, n_ground) if selection is None else selection)
    dlam = default_delta_lambda(spec) if delta_lambda is None else float(delta_lambda)
    _positive(dlam)
    schedule = schedule or Schedule()
    runs = plan_runs(selection)

    def work(chunk: np.ndarray) -> dict:
        fr = geometry.frames(spec, chunk, gauge)
        return {
            key: gamma_batch(
                spec, chunk, key[1], dlam, schedule, key[0].coefficients(n_ground), frames=fr
            )
            for key in runs
        }

    chunks = [x[i : i + CHUNK] for i in range(0, x.shape[0], CHUNK)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    gam = {key: np.concatenate([p[key] for p in parts]) for key in runs}
    return assemble(gam, selection, dim, n_ground, dlam), gam


def measure_metric(
    spec: ModelSpec,
    p: ParameterPoint,
    selection: Iterable[Component] | None = None,
    *,
    delta_lambda: float | None = None,
    schedule: Schedule | None = None,
    gauge: str | None = None,
) -> MetricMeasurement:
    """Run the minimal quench protocol at one point and invert it."""
    _check_point(spec, p)
    selection = _normalise(
        full_selection(spec.dim, spec.degeneracy) if selection is None else selection
    )
    dlam = default_delta_lambda(spec) if delta_lambda is None else float(delta_lambda)
    schedule = schedule or Schedule()
    blocks, gam = measure_metric_batch(
        spec, p.array[None, :], selection, delta_lambda=dlam, schedule=schedule, gauge=gauge
    )
    records = [
        RunRecord(
            run_id=i,
            family=spec.family,
            coords=p.coords,
            state=state.label,
            directions=dirs,
            delta_lambda=dlam,
            schedule=schedule.kind,
            T=schedule.T if schedule.kind == "linear" else 0.0,
            substeps=int(schedule.substeps) if schedule.kind == "linear" else 0,
            gamma=float(gam[(state, dirs)][0]),
        )
        for i, (state, dirs) in enumerate(plan_runs(selection))
    ]
    return MetricMeasurement(MetricTensor(blocks[0]), records, selection)


def probability_conservation(
    spec: ModelSpec, q: QuenchSpec, s: PreparedState, gauge: str | None = None
) -> float:
    """``|sum_m |<psi_m|psi(T)>|^2 - 1|`` over the full end-point eigenbasis."""
    psi = evolve(spec, q, s, gauge)
    _, evecs = geometry.cluster_eigen(spec, q.end[None, :])
    return float(abs(np.sum(np.abs(dagger(evecs[0]) @ psi) ** 2) - 1.0))

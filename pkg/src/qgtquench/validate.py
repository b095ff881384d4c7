"""Invariant suite behind ``qgtquench validate``.

Each check returns a :class:`Check` with its worst residual and tolerance.
Random draws come from ``numpy.random.default_rng(seed)`` so a report is
reproducible from its seed.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from . import chern, geometry, models, numlin, quench
from .models import ModelSpec

DLAM_3D = math.pi / 100


@dataclass
class Check:
    name: str
    passed: bool
    residual: float
    tol: float
    seconds: float = 0.0
    detail: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("seconds")  # keeps reports byte-stable
        d["residual"] = float(d["residual"])
        return d


def _check(name: str, residual: float, tol: float, detail: str = "") -> Check:
    residual = float(residual)
    return Check(name, bool(np.isfinite(residual) and residual <= tol), residual, tol, detail=detail)


def _s2_points(rng, n, margin=0.2):
    return np.stack(
        [rng.uniform(margin, math.pi - margin, n), rng.uniform(margin, 2 * math.pi - margin, n)], -1
    )


def _k_points(rng, n, dim):
    return rng.uniform(0.0, 2 * math.pi, size=(n, dim))


# ---------------------------------------------------------------------------


def check_dirac_algebra(rng, quick, corrupt=None) -> Check:
    worst = 0.0
    for mats in (models.ALPHA, models.BETA):
        if corrupt == "dirac-algebra":
            mats = mats.copy()
            mats[0] = mats[0] + 0.1 * np.eye(mats.shape[-1])
        worst = max(worst, models.dirac_algebra_check(mats).worst)
    return _check("dirac_algebra", worst, 0.0)


def check_symmetries(rng, quick, corrupt=None) -> Check:
    worst = 0.0
    n = 5 if quick else 20
    for k in _k_points(rng, n, 3):
        worst = max(worst, models.symmetry_check(ModelSpec("dirac3d-lattice"), k).worst)
    for k in _k_points(rng, n, 5):
        worst = max(worst, models.symmetry_check(ModelSpec("yang5d-lattice"), k).worst)
    return _check("symmetry_residuals", worst, 1e-12)


def check_eigensolver(rng, quick, corrupt=None) -> Check:
    n = 50 if quick else 500
    a = rng.normal(size=(n, 4, 4)) + 1j * rng.normal(size=(n, 4, 4))
    h = a + numlin.dagger(a)
    evals, evecs = numlin.hermitian_eig(h)
    resid = np.abs(h @ evecs - evecs * evals[:, None, :]).max()
    ortho = np.abs(numlin.dagger(evecs) @ evecs - np.eye(4)).max()
    u = numlin.unitary_exp(h, 0.37)
    unit = np.abs(numlin.dagger(u) @ u - np.eye(4)).max()
    return _check("eigensolver_and_propagator", max(resid / 10, ortho, unit), 1e-12)


def check_bigq_psd(rng, quick, corrupt=None) -> Check:
    n = 3 if quick else 10
    worst = 0.0
    cases = [
        (ModelSpec("dirac3d-eff"), _s2_points(rng, n)),
        (ModelSpec("yang-eff"), chern.sample_s4(n, int(rng.integers(1 << 31)))),
        (ModelSpec("lattice-4d"), _k_points(rng, n, 4)),
    ]
    for spec, pts in cases:
        q = geometry.qgt_fd_batch(spec, pts)
        big = geometry.big_q(q)
        big = 0.5 * (big + numlin.dagger(big))
        worst = max(worst, -float(np.linalg.eigvalsh(big)[:, 0].min()))
    return _check("bigQ_psd", worst, 1e-8, "negated smallest eigenvalue")


def check_probability_conservation(rng, quick, corrupt=None) -> Check:
    worst = 0.0
    cases = [
        (ModelSpec("dirac3d-eff"), _s2_points(rng, 2)),
        (ModelSpec("experimental-4level"), _s2_points(rng, 2)),
    ]
    if not quick:
        cases.append((ModelSpec("yang-eff"), chern.sample_s4(2, int(rng.integers(1 << 31)))))
    states = (quench.PreparedState("band", 0), quench.PreparedState("b", 0, 1))
    for spec, pts in cases:
        for x in pts:
            q = quench.QuenchSpec(spec.point(*x), (0, 1), DLAM_3D, quench.Schedule(T=0.01, substeps=20))
            for state in states:
                worst = max(worst, quench.probability_conservation(spec, q, state))
    return _check("probability_conservation", worst, 1e-10)


def check_fidelity_quadratic(rng, quick, corrupt=None) -> Check:
    spec = ModelSpec("dirac3d-eff")
    p = spec.point(*_s2_points(rng, 1)[0])
    g = geometry.metric_from_qgt(geometry.qgt_fd(spec, p)).blocks
    c = rng.normal(size=2) + 1j * rng.normal(size=2)
    c /= np.linalg.norm(c)
    direction = np.array([1.0, 0.5])
    worst = 0.0
    for dl in (math.pi / 400, math.pi / 200, math.pi / 100):
        dlam = dl * direction
        pred = float(np.real(np.einsum("i,mnij,j,m,n->", c.conj(), g, c, dlam, dlam)))
        ratio = geometry.fidelity_distance(spec, p, c, dlam) / pred
        worst = max(worst, abs(ratio - 1.0) / (3 * dl))
    return _check("fidelity_quadratic_law", worst, 1.0, "|ratio-1| / (3 dlam)")


def check_yang_trace_free(rng, quick, corrupt=None) -> Check:
    spec = ModelSpec("yang-eff")
    pts = chern.sample_s4(4 if quick else 20, int(rng.integers(1 << 31)))
    f = geometry.curvature_from_qgt(geometry.qgt_fd_batch(spec, pts)).blocks
    return _check("yang_trace_F", np.abs(np.trace(f, axis1=-2, axis2=-1)).max(), 1e-8)


def check_gauge_invariance(rng, quick, corrupt=None) -> Check:
    worst = 0.0
    spec = ModelSpec("dirac3d-eff")
    pts = _s2_points(rng, 3 if quick else 10)
    by_gauge = [geometry.qgt_fd_batch(spec, pts, gauge) for gauge in geometry.GAUGES]
    a = by_gauge[0]
    for b in by_gauge[1:]:
        ga, gb = geometry.metric_from_qgt(a).blocks, geometry.metric_from_qgt(b).blocks
        fa, fb = geometry.curvature_from_qgt(a).blocks, geometry.curvature_from_qgt(b).blocks
        worst = max(worst, np.abs(np.trace(ga - gb, axis1=-2, axis2=-1)).max())
        tra = np.trace(fa[:, 0, 1] @ fa[:, 0, 1], axis1=-2, axis2=-1)
        trb = np.trace(fb[:, 0, 1] @ fb[:, 0, 1], axis1=-2, axis2=-1)
        worst = max(worst, np.abs(tra - trb).max())
    # real-Chern integrand is invariant under SO(2) frame rotations
    ang = rng.uniform(0, 2 * math.pi)
    r = np.array([[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]])
    rotated = np.einsum("ij,bmnjk,kl->bmnil", r.T, a, r)
    fa = geometry.curvature_from_qgt(a).blocks[:, 0, 1]
    fr = geometry.curvature_from_qgt(rotated).blocks[:, 0, 1]
    i2 = np.array([[0, -1], [1, 0]])
    worst = max(worst, np.abs(np.trace(i2 @ (fa - fr), axis1=-2, axis2=-1)).max())
    yang = ModelSpec("yang-eff")
    ypts = chern.sample_s4(2 if quick else 6, int(rng.integers(1 << 31)))
    dens = [
        chern.epsilon_density(geometry.curvature_from_qgt(geometry.qgt_fd_batch(yang, ypts, gg)).blocks)
        for gg in ("reference-projection", "eigensolver-raw")
    ]
    worst = max(worst, np.abs(dens[0] - dens[1]).max())
    return _check("gauge_invariance", worst, 1e-6)


def check_experimental_reduction(rng, quick, corrupt=None) -> Check:
    worst = 0.0
    for th, ph in _s2_points(rng, 4 if quick else 20, margin=0.01):
        for sign in (1, -1):
            worst = max(worst, models.experimental_reduction_check(th, ph, sign))
    return _check("experimental_reduction", worst, 1e-13)


def check_det_relation(rng, quick, corrupt=None) -> Check:
    spec = ModelSpec("dirac3d-eff")
    worst = 0.0
    for th, ph in _s2_points(rng, 4 if quick else 20):
        p = spec.point(th, ph)
        q = geometry.qgt_fd(spec, p, "analytic")
        rel = geometry.det_relation_check(geometry.metric_from_qgt(q), geometry.curvature_from_qgt(q))
        worst = max(worst, abs(rel.residual_12), abs(rel.residual_21))
    return _check("det_relation_fd", worst, 1e-5)


def check_detG_ratio(rng, quick, corrupt=None) -> Check:
    spec = ModelSpec("yang-eff")
    res = chern.sqrt_detG_vs_F_check(spec, chern.sample_s4(10 if quick else 100, int(rng.integers(1 << 31))))
    return _check(
        "sqrt_detG_ratio",
        res.ratio_spread / res.ratio,
        1e-6,
        f"ratio {res.ratio:.9f}, sign {res.constant_sign}",
    )


def check_quench_oracle(rng, quick, corrupt=None) -> Check:
    worst = 0.0
    cases = [(ModelSpec("dirac3d-eff"), _s2_points(rng, 1))]
    if not quick:
        cases += [
            (ModelSpec("yang-eff"), chern.sample_s4(1, int(rng.integers(1 << 31)), margin=0.3)),
            (ModelSpec("lattice-4d"), _k_points(rng, 1, 4)),
        ]
    for spec, pts in cases:
        est, _ = quench.measure_metric_batch(spec, pts)
        ref = geometry.metric_from_qgt(geometry.qgt_fd_batch(spec, pts)).blocks
        err = np.abs(est - ref)
        allowed = np.maximum(2e-2, 5e-2 * np.abs(ref))
        worst = max(worst, float((err / allowed).max()))
    return _check("quench_vs_oracle", worst, 1.0, "error / max(2e-2, 5e-2 |g|)")


def check_quadratic_scaling(rng, quick, corrupt=None) -> Check:
    spec = ModelSpec("dirac3d-eff")
    p = spec.point(*_s2_points(rng, 1)[0])
    state = quench.PreparedState("band", 0)
    ratios = []
    steps = (math.pi / 400, math.pi / 200, math.pi / 100)
    for dl in steps:
        q = quench.QuenchSpec(p, (0,), dl, quench.Schedule.sudden())
        ratios.append(quench.transition_probability(spec, q, state).gamma / dl**2)
    rel = (max(ratios) - min(ratios)) / max(ratios)
    return _check("quench_quadratic_scaling", rel / (3 * steps[-1]), 1.0)


def check_chern_oracles(rng, quick, corrupt=None) -> Check:
    worst = 0.0
    n2 = (20, 20) if quick else (100, 100)
    n4 = (6, 6, 6, 6) if quick else (12, 12, 12, 12)
    for sign in (1, -1):
        d = ModelSpec("dirac3d-eff", sign=sign)
        worst = max(worst, abs(chern.real_chern_from_curvature(d, chern.SphereGrid("S2", n2)).value - sign))
        y = ModelSpec("yang-eff", sign=sign)
        worst = max(worst, abs(chern.second_chern_from_curvature(y, chern.SphereGrid("S4", n4)).value + sign))
    return _check("chern_oracles", worst, 1e-3)


def check_real_chern_quench(rng, quick, corrupt=None) -> Check:
    res = chern.real_chern_from_metric(ModelSpec("dirac3d-eff"), source="quench")
    return _check("real_chern_quench", abs(res.value - 0.9899), 0.02, f"value {res.value:.6f}")


def check_grid_refinement(rng, quick, corrupt=None) -> Check:
    spec = ModelSpec("dirac3d-eff")
    coarse = chern.real_chern_from_metric(spec, chern.SphereGrid("S2", (50, 50), "midpoint"), "fd")
    fine = chern.real_chern_from_metric(spec, chern.SphereGrid("S2", (100, 100), "midpoint"), "fd")
    return _check("grid_refinement", abs(coarse.value - fine.value), 1e-3)


CHECKS: list[tuple[Callable, bool]] = [
    # (check, included in --quick)
    (check_dirac_algebra, True),
    (check_symmetries, True),
    (check_eigensolver, True),
    (check_bigq_psd, True),
    (check_probability_conservation, True),
    (check_fidelity_quadratic, True),
    (check_yang_trace_free, True),
    (check_gauge_invariance, True),
    (check_experimental_reduction, True),
    (check_det_relation, True),
    (check_detG_ratio, True),
    (check_quench_oracle, True),
    (check_quadratic_scaling, True),
    (check_chern_oracles, True),
    (check_real_chern_quench, False),
    (check_grid_refinement, False),
]


def run_suite(seed: int = 0, quick: bool = False, corrupt: str | None = None) -> list[Check]:
    out = []
    for i, (fn, in_quick) in enumerate(CHECKS):
        if quick and not in_quick:
            continue
        rng = np.random.default_rng([seed, i])
        t0 = time.perf_counter()
        try:
            res = fn(rng, quick, corrupt)
        except Exception as exc:  # a crashing check is a failing check
            res = Check(fn.__name__.removeprefix("check_"), False, math.inf, 0.0, detail=repr(exc))
        res.seconds = time.perf_counter() - t0
        out.append(res)
    return out

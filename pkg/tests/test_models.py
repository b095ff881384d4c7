import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qgtquench import models
from qgtquench.models import (
    ChartError,
    ContractError,
    ModelSpec,
    ParameterPoint,
    dirac_algebra_check,
    experimental_hamiltonian,
    experimental_reduction_check,
    hamiltonian,
    hamiltonian_at,
    symmetry_check,
)
from qgtquench.numlin import hermitian_eig

PI = math.pi
angle = st.floats(0.05, PI - 0.05)
azimuth = st.floats(0.05, 2 * PI - 0.05)
momentum = st.floats(-PI, PI)


def test_dirac_point_is_zero_matrix():
    h = hamiltonian(ModelSpec("dirac3d-lattice", mass=2), ParameterPoint("cartesian-momentum", (0, 0, PI / 2)))
    assert np.abs(h).max() < 1e-15


def test_yang_monopole_is_zero_matrix():
    p = ParameterPoint("cartesian-momentum", (0, 0, 0, 0, PI / 2))
    assert np.abs(hamiltonian(ModelSpec("yang5d-lattice", mass=4), p)).max() < 1e-15


def test_effective_model_poles():
    h = hamiltonian_at(ModelSpec("dirac3d-eff"), np.array([0.0, 0.3]))
    np.testing.assert_allclose(h, models.ALPHA[2], atol=1e-15)
    h5 = hamiltonian(ModelSpec("yang-eff"), ParameterPoint("sphere-S4", (PI / 2,) * 4))
    np.testing.assert_allclose(h5, models.BETA[4], atol=1e-15)


def test_chart_mismatch():
    with pytest.raises(ChartError):
        hamiltonian(ModelSpec("yang-eff"), ParameterPoint("sphere-S2", (1.0, 1.0)))


@pytest.mark.parametrize(
    "chart, coords",
    [("sphere-S2", (0.0, 1.0)), ("sphere-S2", (1.0, 7.0)), ("sphere-S4", (1, 1, 4, 1)), ("sphere-S2", (1.0,))],
)
def test_point_range_rejected(chart, coords):
    with pytest.raises(ChartError):
        ParameterPoint(chart, coords)


def test_wrapped_point():
    p = ParameterPoint.wrapped("sphere-S2", (1.0, -0.5))
    assert p.coords[1] == pytest.approx(2 * PI - 0.5)
    assert ParameterPoint.wrapped("sphere-S2", (0.0, 1.0)).coords[0] > 0


@pytest.mark.parametrize("family", ["dirac3d-eff", "yang-eff", "lattice-4d"])
def test_algebra_passes_exactly(family):
    report = dirac_algebra_check(ModelSpec(family))
    assert report.passed and report.worst == 0.0


def test_corrupted_algebra_fails():
    mats = models.ALPHA.copy()
    mats[0] = np.kron(models.S0, models.S1)
    report = dirac_algebra_check(mats)
    assert not report.passed and report.worst > 0


@given(momentum, momentum, momentum)
def test_3d_symmetries(kx, ky, kz):
    spec = ModelSpec("dirac3d-lattice")
    report = symmetry_check(spec, (kx, ky, kz))
    assert report.passed, report.residuals
    assert np.abs(hamiltonian_at(spec, np.array([kx, ky, kz])).imag).max() <= 1e-15


@given(st.lists(momentum, min_size=5, max_size=5))
def test_5d_kramers(k):
    report = symmetry_check(ModelSpec("yang5d-lattice"), k)
    assert report.passed, report.residuals
    assert "theta_to_minus_k" in report.info


def test_symmetry_check_needs_lattice():
    with pytest.raises(ContractError):
        symmetry_check(ModelSpec("dirac3d-eff"), (1.0, 1.0))


@pytest.mark.parametrize(
    "family, sampler",
    [
        ("dirac3d-lattice", lambda r: r.uniform(-PI, PI, 3)),
        ("dirac3d-eff", lambda r: [r.uniform(0.1, 3), r.uniform(0.1, 6)]),
        ("yang5d-lattice", lambda r: r.uniform(-PI, PI, 5)),
        ("yang-eff", lambda r: list(r.uniform(0.1, 3, 3)) + [r.uniform(0.1, 6)]),
        ("lattice-4d", lambda r: r.uniform(-PI, PI, 4)),
        ("experimental-4level", lambda r: [r.uniform(0.1, 3), r.uniform(0.1, 6)]),
    ],
)
def test_spectrum_is_plus_minus_norm(family, sampler, rng):
    spec = ModelSpec(family)
    for _ in range(10):
        x = np.asarray(sampler(rng), dtype=float)
        h = hamiltonian_at(spec, x)
        assert np.abs(h - h.conj().T).max() == 0.0
        evals, _ = hermitian_eig(h)
        dfam = spec if models.is_dirac_form(spec) else ModelSpec("dirac3d-eff")
        norm = np.linalg.norm(models.coefficients(dfam, x))
        np.testing.assert_allclose(evals, [-norm, -norm, norm, norm], atol=1e-10)


def test_experimental_zero():
    assert np.abs(experimental_hamiltonian((0,) * 4, (0,) * 4, (0,) * 4)).max() == 0


def test_experimental_time_dependence_is_hermitian():
    h = experimental_hamiltonian((1, 2, 3, 4), (0.1, 0.2, 0.3, 0.4), (1.0, 0.5, 0.2, 0.1), t=0.7)
    assert np.abs(h - h.conj().T).max() == 0.0


def test_experimental_maps_to_lattice(rng):
    spec = ModelSpec("dirac3d-lattice")
    for _ in range(5):
        k = rng.uniform(-PI, PI, 3)
        d = models.coefficients(spec, k)
        assert np.abs(models.experimental_from_d(d) - hamiltonian_at(spec, k)).max() <= 1e-14


@pytest.mark.parametrize("theta, phi, tol", [(PI / 2, 0.0, 0.0), (PI / 4, PI / 3, 1e-15)])
def test_reduction_examples(theta, phi, tol):
    assert experimental_reduction_check(theta, phi) <= tol


def test_reduction_grid():
    for th in np.linspace(0.1, PI, 10):
        for ph in np.linspace(0.1, 2 * PI, 10):
            for sign in (1, -1):
                assert experimental_reduction_check(th, ph, sign) <= 1e-13


def test_spec_roundtrip():
    spec = ModelSpec("lattice-4d", frozen=(("k_v", 1.0),))
    again = ModelSpec.from_dict(spec.to_dict())
    assert again == spec
    assert ModelSpec("lattice-4d").frozen == (("k_v", PI / 2),)
    with pytest.raises(ContractError):
        ModelSpec.from_dict({"family": "dirac3d-eff", "colour": 1})
    with pytest.raises(ContractError):
        ModelSpec("dirac3d-eff", sign=2)


def test_topological_window():
    assert ModelSpec("dirac3d-lattice", mass=2).in_topological_window()
    assert not ModelSpec("dirac3d-lattice", mass=3.5).in_topological_window()
    assert ModelSpec("yang5d-lattice", mass=4).in_topological_window()


@given(angle, azimuth)
def test_effective_models_radius_free(theta, phi):
    d = models.coefficients(ModelSpec("dirac3d-eff"), np.array([theta, phi]))
    assert np.linalg.norm(d) == pytest.approx(1.0, abs=1e-15)


def test_custom_model_callback():
    spec = ModelSpec(
        "custom",
        callback=lambda x: np.tensordot(models.coefficients(ModelSpec("dirac3d-eff"), x), models.ALPHA, 1),
        custom_chart="sphere-S2",
        custom_dim=2,
    )
    p = spec.point(1.0, 2.0)
    np.testing.assert_allclose(hamiltonian(spec, p), hamiltonian(ModelSpec("dirac3d-eff"), p))
    with pytest.raises(ContractError):
        ModelSpec("custom")

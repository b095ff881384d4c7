"""Four-band Dirac-type Hamiltonians and the four-level atomic realisation.

Every built-in family (except the atomic one, which is assembled entry by
entry) has the form ``H = sum_a d_a(lambda) Gamma_a`` with mutually
anticommuting, squaring-to-one 4x4 matrices ``Gamma_a``. That makes the
spectrum ``{-|d|, -|d|, +|d|, +|d|}`` and allows closed-form projectors and
propagators; see :func:`is_dirac_form`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Callable, Mapping

import numpy as np

from .numlin import ContractError

S0 = np.eye(2, dtype=complex)
S1 = np.array([[0, 1], [1, 0]], dtype=complex)
S2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
S3 = np.array([[1, 0], [0, -1]], dtype=complex)

# alpha_x = s3 x t1, alpha_y = -s1 x t1, alpha_z = -s0 x t3
ALPHA = np.array([np.kron(S3, S1), -np.kron(S1, S1), -np.kron(S0, S3)])
BETA = np.array(
    [
        np.kron(S0, S3),
        np.kron(S0, S1),
        -np.kron(S3, S2),
        np.kron(S2, S2),
        np.kron(S1, S2),
    ]
)
# Kramers-type antiunitary Theta K of the five-dimensional model
THETA_5D = np.kron(1j * S2, S0)

FAMILIES = (
    "dirac3d-lattice",
    "dirac3d-eff",
    "yang5d-lattice",
    "yang-eff",
    "lattice-4d",
    "experimental-4level",
    "custom",
)
CHARTS = ("cartesian-momentum", "sphere-S2", "sphere-S4")

_DEFAULT_MASS = {
    "dirac3d-lattice": 2.0,
    "yang5d-lattice": 4.0,
    "lattice-4d": 1.0,
}
_TOPOLOGICAL_WINDOW = {
    "dirac3d-lattice": (0.0, 3.0),
    "yang5d-lattice": (0.0, 5.0),
}

COORD_NAMES = {
    "dirac3d-lattice": ("kx", "ky", "kz"),
    "dirac3d-eff": ("theta", "phi"),
    "experimental-4level": ("theta", "phi"),
    "yang5d-lattice": ("kx", "ky", "kz", "kw", "kv"),
    "yang-eff": ("phi1", "phi2", "phi3", "phi4"),
    "lattice-4d": ("kx", "ky", "kz", "kw"),
}


class ChartError(ContractError):
    """Parameter point does not belong to the model's chart."""


@dataclass(frozen=True)
class ParameterPoint:
    """A point of parameter space in a named chart.

    Sphere charts use the ranges ``(0, pi]`` for polar angles and ``(0, 2 pi]``
    for the last (azimuthal) angle. Out-of-range coordinates are rejected
    unless the point is built with :meth:`wrapped`.
    """

    chart: str
    coords: tuple[float, ...]

    def __post_init__(self):
        if self.chart not in CHARTS:
            raise ChartError(f"unknown chart {self.chart!r}; expected one of {CHARTS}")
        coords = tuple(float(c) for c in self.coords)
        object.__setattr__(self, "coords", coords)
        if not all(math.isfinite(c) for c in coords):
            raise ChartError(f"non-finite coordinates {coords}")
        if self.chart == "sphere-S2" and len(coords) != 2:
            raise ChartError("sphere-S2 points need 2 angles (theta, phi)")
        if self.chart == "sphere-S4" and len(coords) != 4:
            raise ChartError("sphere-S4 points need 4 angles (phi1..phi4)")
        if self.chart == "cartesian-momentum" and len(coords) not in (3, 4, 5):
            raise ChartError("momentum points need 3, 4 or 5 components")
        if self.chart.startswith("sphere"):
            *polar, azimuth = coords
            if any(not (0.0 < c <= math.pi) for c in polar):
                raise ChartError(f"polar angles must lie in (0, pi], got {tuple(polar)}")
            if not (0.0 < azimuth <= 2 * math.pi):
                raise ChartError(f"azimuth must lie in (0, 2 pi], got {azimuth}")

    @classmethod
    def wrapped(cls, chart: str, coords) -> "ParameterPoint":
        """Fold the azimuth into ``(0, 2 pi]`` and clamp polar angles."""
        coords = [float(c) for c in coords]
        if chart.startswith("sphere"):
            two_pi = 2 * math.pi
            az = math.fmod(coords[-1], two_pi)
            if az <= 0.0:
                az += two_pi
            coords[-1] = az
            coords[:-1] = [min(max(c, 1e-12), math.pi) for c in coords[:-1]]
        return cls(chart, tuple(coords))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.coords)

    @property
    def dim(self) -> int:
        return len(self.coords)


@dataclass(frozen=True)
class ModelSpec:
    """Which Hamiltonian family to evaluate, and its fixed parameters.

    ``mass`` is ``m_z`` (3D lattice) or the 5D Zeeman term; ``sign`` selects
    the monopole (+1 or -1) of the effective models. ``frozen`` holds fixed
    coordinates, currently only ``k_v`` of ``lattice-4d``.
    """

    family: str
    mass: float | None = None
    sign: int = 1
    frozen: tuple[tuple[str, float], ...] = ()
    degeneracy: int = 2
    callback: Callable[[np.ndarray], np.ndarray] | None = field(
        default=None, compare=False, repr=False
    )
    custom_chart: str | None = None
    custom_dim: int | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ContractError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.sign not in (1, -1):
            raise ContractError("sign must be +1 or -1")
        if self.degeneracy < 1:
            raise ContractError("degeneracy must be positive")
        if self.mass is None and self.family in _DEFAULT_MASS:
            object.__setattr__(self, "mass", _DEFAULT_MASS[self.family])
        if self.mass is not None:
            object.__setattr__(self, "mass", float(self.mass))
        frozen = dict(self.frozen)
        if self.family == "lattice-4d":
            frozen.setdefault("k_v", math.pi / 2)
        unknown = set(frozen) - ({"k_v"} if self.family == "lattice-4d" else set())
        if unknown:
            raise ContractError(f"family {self.family} has no frozen coordinate(s) {sorted(unknown)}")
        object.__setattr__(
            self, "frozen", tuple(sorted((k, float(v)) for k, v in frozen.items()))
        )
        if self.family == "custom":
            if self.callback is None or self.custom_chart not in CHARTS or not self.custom_dim:
                raise ContractError("custom models need callback, custom_chart and custom_dim")

    @property
    def chart(self) -> str:
        if self.family == "custom":
            return self.custom_chart
        return {
            "dirac3d-eff": "sphere-S2",
            "experimental-4level": "sphere-S2",
            "yang-eff": "sphere-S4",
        }.get(self.family, "cartesian-momentum")

    @property
    def dim(self) -> int:
        if self.family == "custom":
            return self.custom_dim
        return len(COORD_NAMES[self.family])

    @property
    def coord_names(self) -> tuple[str, ...]:
        if self.family == "custom":
            return tuple(f"x{i + 1}" for i in range(self.dim))
        return COORD_NAMES[self.family]

    def in_topological_window(self) -> bool:
        lo, hi = _TOPOLOGICAL_WINDOW.get(self.family, (-math.inf, math.inf))
        return self.mass is None or lo < self.mass < hi

    def point(self, *coords: float) -> ParameterPoint:
        return ParameterPoint(self.chart, tuple(coords))

    def to_dict(self) -> dict:
        out = {"family": self.family, "mass": self.mass, "sign": self.sign}
        out["frozen"] = dict(self.frozen)
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "ModelSpec":
        allowed = {"family", "mass", "sign", "frozen"}
        extra = set(data) - allowed
        if extra:
            raise ContractError(f"unknown model keys {sorted(extra)}; allowed {sorted(allowed)}")
        frozen = data.get("frozen") or {}
        return cls(
            family=data["family"],
            mass=data.get("mass"),
            sign=int(data.get("sign", 1)),
            frozen=tuple(frozen.items()),
        )


def is_dirac_form(spec: ModelSpec) -> bool:
    return spec.family not in ("experimental-4level", "custom")


def gamma_matrices(spec: ModelSpec) -> np.ndarray:
    if spec.family in ("dirac3d-lattice", "dirac3d-eff"):
        return ALPHA
    if spec.family in ("yang5d-lattice", "yang-eff", "lattice-4d"):
        return BETA
    raise ContractError(f"family {spec.family} is not of Dirac form")


def coefficients(spec: ModelSpec, coords) -> np.ndarray:
    """Coefficient vector ``d`` with ``H = d . Gamma``; vectorised over ``(..., D)``."""
    x = np.asarray(coords, dtype=float)
    if x.shape[-1] != spec.dim:
        raise ChartError(
            f"{spec.family} expects {spec.dim} coordinates, got {x.shape[-1]}"
        )
    fam = spec.family
    if fam == "dirac3d-lattice":
        kx, ky, kz = np.moveaxis(x, -1, 0)
        return np.stack(
            [np.sin(kx), np.sin(ky), spec.mass - np.cos(kx) - np.cos(ky) - np.cos(kz)],
            axis=-1,
        )
    if fam == "dirac3d-eff":
        th, ph = np.moveaxis(x, -1, 0)
        st = np.sin(th)
        return np.stack(
            [st * np.cos(ph), st * np.sin(ph), spec.sign * np.cos(th)], axis=-1
        )
    if fam in ("yang5d-lattice", "lattice-4d"):
        if fam == "lattice-4d":
            kv = dict(spec.frozen)["k_v"]
            x = np.concatenate([x, np.full(x.shape[:-1] + (1,), kv)], axis=-1)
        k = np.moveaxis(x, -1, 0)
        d5 = spec.mass - np.sum(np.cos(k), axis=0)
        return np.stack([np.sin(k[0]), np.sin(k[1]), np.sin(k[2]), np.sin(k[3]), d5], axis=-1)
    if fam == "yang-eff":
        return sphere_s4_direction(x, spec.sign)
    raise ContractError(f"family {fam} is not of Dirac form")


def sphere_s4_direction(angles, sign: int = 1) -> np.ndarray:
    p1, p2, p3, p4 = np.moveaxis(np.asarray(angles, dtype=float), -1, 0)
    s1, s2, s3 = np.sin(p1), np.sin(p2), np.sin(p3)
    return np.stack(
        [
            np.cos(p1),
            s1 * np.cos(p2),
            s1 * s2 * np.cos(p3),
            s1 * s2 * s3 * np.cos(p4),
            sign * s1 * s2 * s3 * np.sin(p4),
        ],
        axis=-1,
    )


def hamiltonian_at(spec: ModelSpec, coords) -> np.ndarray:
    """Hamiltonian at raw coordinates ``(..., D)``; no chart range checks.

    Used for finite-difference stencils and quench paths, which may step
    slightly past the nominal coordinate box.
    """
    x = np.asarray(coords, dtype=float)
    if is_dirac_form(spec):
        d = coefficients(spec, x)
        return np.tensordot(d, gamma_matrices(spec), axes=([-1], [0]))
    if spec.family == "experimental-4level":
        th, ph = np.moveaxis(x, -1, 0)
        return _experimental_effective(th, ph, spec.sign)
    h = np.asarray(spec.callback(x), dtype=complex)
    return h


def hamiltonian(spec: ModelSpec, p: ParameterPoint) -> np.ndarray:
    if p.chart != spec.chart or p.dim != spec.dim:
        raise ChartError(
            f"{spec.family} lives on chart {spec.chart} (D={spec.dim}); got {p.chart} (D={p.dim})"
        )
    return hamiltonian_at(spec, p.array)


# ---------------------------------------------------------------------------
# algebra and symmetry checks


@dataclass
class CheckReport:
    residuals: dict
    tol: float
    info: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r <= self.tol for r in self.residuals.values())

    @property
    def worst(self) -> float:
        return max(self.residuals.values()) if self.residuals else 0.0


def dirac_algebra_check(spec_or_matrices, tol: float = 0.0) -> CheckReport:
    """Residuals of ``{G_a, G_b} - 2 delta_ab`` for every pair ``a <= b``."""
    if isinstance(spec_or_matrices, ModelSpec):
        mats = gamma_matrices(spec_or_matrices)
    else:
        mats = np.asarray(spec_or_matrices, dtype=complex)
    eye = np.eye(mats.shape[-1])
    res = {}
    for a, b in combinations_with_replacement(range(len(mats)), 2):
        anti = mats[a] @ mats[b] + mats[b] @ mats[a]
        res[(a, b)] = float(np.abs(anti - 2.0 * (a == b) * eye).max())
    return CheckReport(res, tol)


def symmetry_check(spec: ModelSpec, k, tol: float = 1e-12) -> CheckReport:
    """Inversion / time-reversal residuals of a lattice model at momentum ``k``.

    3D: ``P H(k) P^-1 = H(-k)``, ``T H(k) T^-1 = H(-k)`` and ``H(k)* = H(k)``
    with ``P = alpha_z``, ``T = alpha_z K``, ``PT = K``.

    5D / 4D: the antiunitary ``Theta K`` with ``Theta = i s2 x s0`` commutes
    with every ``beta_a`` and so maps ``H(k)`` to itself (a Kramers
    degeneracy at each k, ``Theta Theta* = -1``). The ``H(-k)`` residual is
    reported as ``theta_to_minus_k`` for information and is not part of the
    pass criterion.
    """
    k = np.asarray(k.array if isinstance(k, ParameterPoint) else k, dtype=float)
    h = hamiltonian_at(spec, k)
    hm = hamiltonian_at(spec, -k)
    if spec.family == "dirac3d-lattice":
        p_op = ALPHA[2]
        res = {
            "P": float(np.abs(p_op @ h @ p_op.conj().T - hm).max()),
            "T": float(np.abs(p_op @ h.conj() @ p_op.conj().T - hm).max()),
            "PT": float(np.abs(h.conj() - h).max()),
        }
        return CheckReport(res, tol)
    if spec.family in ("yang5d-lattice", "lattice-4d"):
        th = THETA_5D
        th_inv = np.linalg.inv(th)
        res = {
            "theta_kramers": float(np.abs(th @ h.conj() @ th_inv - h).max()),
            "theta_squared": float(np.abs(th @ th.conj() + np.eye(4)).max()),
        }
        info = {"theta_to_minus_k": float(np.abs(th @ h.conj() @ th_inv - hm).max())}
        return CheckReport(res, tol, info)
    raise ContractError(f"symmetry_check needs a lattice family, got {spec.family}")


# ---------------------------------------------------------------------------
# four-level atomic Hamiltonian


def experimental_hamiltonian(rabi, phases, detunings, t: float = 0.0) -> np.ndarray:
    """Rotating-frame Hamiltonian in the bare basis ``(a, b, c, d)``."""
    o1, o2, o3, o4 = (float(v) for v in rabi)
    f1, f2, f3, f4 = (float(v) for v in phases)
    d1, d2, d3, d4 = (float(v) for v in detunings)
    dprime = d1 + d2 - d3 - d4
    h = np.zeros((4, 4), dtype=complex)
    h[0, 0] = -d1
    h[2, 2] = -d4
    h[3, 3] = d3 - d1
    h[0, 1] = o1 * np.exp(-1j * f1)
    h[0, 3] = o3 * np.exp(-1j * f3)
    h[1, 2] = o4 * np.exp(1j * f4)
    h[2, 3] = o2 * np.exp(-1j * f2) * np.exp(-1j * dprime * t)
    h = h + np.triu(h, 1).conj().T
    return h


def lift_levels(h: np.ndarray, delta: float) -> np.ndarray:
    """Shift the two lower hyperfine levels ``|b>`` and ``|d>`` up by ``delta``."""
    return h + delta * np.diag([0.0, 1.0, 0.0, 1.0])


def experimental_from_d(d) -> np.ndarray:
    """Atomic Hamiltonian under the mapping to ``d . alpha`` (unit Rabi scale)."""
    dx, dy, dz = (float(v) for v in d)
    rabi = (dx, -dx, -dy, -dy)
    h = experimental_hamiltonian(rabi, (0, 0, 0, 0), (dz,) * 4, 0.0)
    return lift_levels(h, dz)


def _experimental_effective(theta, phi, sign: int) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    out = np.empty(theta.shape + (4, 4), dtype=complex)
    for idx in np.ndindex(theta.shape):
        st = math.sin(theta[idx])
        d = (st * math.cos(phi[idx]), st * math.sin(phi[idx]), sign * math.cos(theta[idx]))
        out[idx] = experimental_from_d(d)
    return out


def experimental_reduction_check(theta: float, phi: float, sign: int = 1) -> float:
    """Max entrywise gap between the mapped atomic and effective Hamiltonians."""
    spec = ModelSpec("dirac3d-eff", sign=sign)
    target = hamiltonian_at(spec, np.array([theta, phi]))
    atomic = _experimental_effective(np.array(theta), np.array(phi), sign)
    return float(np.abs(atomic - target).max())

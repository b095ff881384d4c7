"""Fixed-angle line cuts for regenerating the figure data."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PI = math.pi


@dataclass(frozen=True)
class Preset:
    family: str
    fixed: tuple[float, ...]
    sweep_axis: int
    components: tuple[tuple[int, int, int, int], ...]  # (mu, nu, j, jp), zero-based

    def sweep_values(self) -> list[float]:
        if self.family in ("dirac3d-eff", "yang-eff") and self.sweep_axis < len(self.fixed) - 1:
            return [k * PI / 20 for k in range(1, 20)]
        return [k * PI / 10 for k in range(1, 21)]


PRESETS = {
    "fig-1a": Preset("dirac3d-eff", (PI / 2, PI / 4), 0, ((0, 0, 0, 0), (1, 1, 0, 0))),
    "fig-1b": Preset("dirac3d-eff", (PI / 2, PI / 4), 0, ((0, 1, 0, 0),)),
    "fig-1c": Preset("dirac3d-eff", (PI / 2, PI / 4), 0, ((1, 1, 0, 1),)),
    "fig-1d": Preset("dirac3d-eff", (PI / 2, PI / 4), 0, ((0, 1, 0, 1),)),
    "fig-2a": Preset("yang-eff", (PI / 2, PI / 4, PI, PI / 4), 0, ((0, 0, 1, 1),)),
    "fig-2b": Preset("yang-eff", (PI / 2, PI / 4, PI, PI / 4), 0, ((1, 1, 1, 1),)),
    "fig-2c": Preset("yang-eff", (PI / 4, PI / 2, PI, PI / 4), 1, ((2, 2, 1, 1),)),
    "fig-2d": Preset("yang-eff", (PI / 4, PI / 4, PI / 2, PI / 4), 2, ((3, 3, 1, 0), (3, 3, 1, 1))),
    "fig-3a": Preset("lattice-4d", (PI, PI / 2, PI / 2, PI), 0, ((0, 0, 0, 0),)),
    "fig-3b": Preset("lattice-4d", (PI / 2, PI, PI / 2, PI / 2), 1, ((2, 3, 1, 1),)),
    "fig-3c": Preset("lattice-4d", (0.0, PI / 2, PI, PI / 2), 2, ((0, 0, 0, 1),)),
    "fig-3d": Preset("lattice-4d", (PI / 2, PI / 2, PI / 4, PI), 3, ((1, 3, 0, 1),)),
}


def sweep_points(fixed, axis: int, values) -> np.ndarray:
    pts = np.tile(np.asarray(fixed, dtype=float), (len(values), 1))
    pts[:, axis] = values
    return pts

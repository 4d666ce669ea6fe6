"""Geometry of an idealized integral-imaging light field display.

The display is reduced to its central depth plane (CDP) and the grid of
viewpoints entering the eye pupil.  Depths are handled in dioptres and
converted to metres only where a distance is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "DisplayConfig",
    "SubapertureLayout",
    "subaperture_layout",
    "subaperture_interval",
    "epsf_shift",
    "dioptres_to_metres",
]


def dioptres_to_metres(vergence_D: float) -> float:
    if vergence_D < 0:
        raise ValueError("negative vergence lies beyond infinity")
    return math.inf if vergence_D == 0 else 1.0 / vergence_D


@dataclass(frozen=True)
class DisplayConfig:
    """CDP depth, viewpoint density and the rendered depths to simulate.

    ``density`` k gives k x k viewpoints in the pupil; k = 1 is natural
    viewing through the open pupil.
    """

    z_cdp_D: float = 2.0
    density: int = 1
    pupil_diameter_mm: float = 3.0
    rendered_depths_relD: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        if not self.z_cdp_D > 0:
            raise ValueError("z_cdp_D must be > 0")
        if not self.pupil_diameter_mm > 0:
            raise ValueError("pupil_diameter_mm must be > 0")
        if int(self.density) != self.density or self.density < 1:
            raise ValueError("density must be a positive integer")
        depths = tuple(float(d) for d in self.rendered_depths_relD)
        for d in depths:
            if self.z_cdp_D + d < -1e-12:
                raise ValueError(f"rendered depth {d:+.2f} D relative to the CDP is beyond infinity")
        object.__setattr__(self, "rendered_depths_relD", depths)

    @property
    def z_cdp_m(self) -> float:
        return 1.0 / self.z_cdp_D

    def rendered_abs_D(self, rel_D: float) -> float:
        return max(self.z_cdp_D + rel_D, 0.0)

    def with_density(self, k: int) -> "DisplayConfig":
        return DisplayConfig(self.z_cdp_D, k, self.pupil_diameter_mm, self.rendered_depths_relD)


@dataclass(frozen=True)
class SubapertureLayout:
    centers: tuple[tuple[float, float], ...]
    diameter_mm: float

    @property
    def count(self) -> int:
        return len(self.centers)

    @property
    def centers_array(self) -> np.ndarray:
        return np.asarray(self.centers, dtype=float).reshape(-1, 2)


def subaperture_layout(density: int, pupil_diameter_mm: float) -> SubapertureLayout:
    """k x k tangent circles of diameter d_p / k on a square grid centred in the pupil.

    Corner circles extend past the pupil edge for k >= 2; the pupil
    function clips them when amplitudes are assembled.
    """
    if density < 1:
        raise ValueError("density must be >= 1")
    d_s = pupil_diameter_mm / density
    offsets = (np.arange(density) - (density - 1) / 2) * d_s
    centers = tuple((float(p), float(q)) for q in offsets for p in offsets)
    return SubapertureLayout(centers, d_s)


def subaperture_interval(
    delta_uv_mm: Sequence[float], z_r_m: float, z_m_m: float
) -> tuple[float, float]:
    """Pupil-plane subaperture pitch for a modulation-plane sampling pitch."""
    if z_r_m == z_m_m:
        raise ValueError("rendered point lies on the modulation plane (degenerate geometry)")
    factor = abs(z_r_m / (z_r_m - z_m_m))
    du, dv = delta_uv_mm
    return factor * du, factor * dv


def epsf_shift(
    z_r_m: float, z_cdp_m: float, z_eye_m: float, center_mm: Sequence[float]
) -> tuple[float, float]:
    """Retinal displacement (m) of the elemental PSF of a subaperture centred at ``center_mm``."""
    if not (z_r_m > 0 and z_cdp_m > 0):
        raise ValueError("depths must be > 0")
    vr = 0.0 if math.isinf(z_r_m) else 1.0 / z_r_m
    vc = 0.0 if math.isinf(z_cdp_m) else 1.0 / z_cdp_m
    k = z_eye_m * (vr - vc) * 1e-3
    return k * center_mm[0], k * center_mm[1]

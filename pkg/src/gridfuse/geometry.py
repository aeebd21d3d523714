"""Geometric relations between reference points and grid cells, and innovations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridSpec

SPEED_OF_LIGHT = 299792458.0  # m/s

# Marks cells where an angle relation is undefined (cell coincides with the
# reference point); likelihood sampling treats these cells as uninformative.
ANGLE_UNDEFINED = np.nan


@dataclass(frozen=True)
class ReferencePoint:
    """Satellite or terrestrial anchor with a known position in the local frame."""

    id: str
    position: tuple[float, float, float]
    kind: str = "anchor"  # "anchor" | "satellite"

    def __post_init__(self):
        pos = tuple(float(v) for v in self.position)
        if len(pos) == 2:
            pos = (pos[0], pos[1], 0.0)
        if len(pos) != 3:
            raise ValueError("reference position must be 2D or 3D")
        if not all(np.isfinite(pos)):
            raise ValueError(f"reference {self.id} has non-finite coordinates")
        if self.kind not in ("anchor", "satellite"):
            raise ValueError(f"unknown reference kind {self.kind!r}")
        object.__setattr__(self, "position", pos)

    @property
    def xyz(self) -> np.ndarray:
        return np.asarray(self.position)


def wrap_angle(angle):
    """Wrap angles to (-pi, pi]."""
    wrapped = np.remainder(np.asarray(angle, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    return np.where(wrapped <= -np.pi, wrapped + 2.0 * np.pi, wrapped)


def gamma_distance(ref: ReferencePoint, grid: GridSpec) -> np.ndarray:
    """Euclidean range from the reference to every cell (ToA / RTT relation).

    On 2D grids the out-of-plane difference ref_z - plane_height is kept, so
    satellite elevation enters even when the state is planar.
    """
    diff = grid.positions_3d() - ref.xyz
    return np.linalg.norm(diff, axis=1)


def gamma_hyperbolic(ref_a: ReferencePoint, ref_b: ReferencePoint,
                     grid: GridSpec) -> np.ndarray:
    """Range difference |x_a - x_i| - |x_b - x_i| (TDoA relation)."""
    if np.allclose(ref_a.xyz, ref_b.xyz):
        raise ValueError(f"coincident references {ref_a.id}, {ref_b.id}")
    return gamma_distance(ref_a, grid) - gamma_distance(ref_b, grid)


def gamma_angle(ref: ReferencePoint, grid: GridSpec) -> np.ndarray:
    """Four-quadrant bearing from each cell to the reference, in (-pi, pi].

    Cells coinciding with the reference in the x-y plane get ANGLE_UNDEFINED.
    """
    pos = grid.positions()
    dx = ref.position[0] - pos[:, 0]
    dy = ref.position[1] - pos[:, 1]
    gamma = wrap_angle(np.arctan2(dy, dx))
    undefined = (dx == 0.0) & (dy == 0.0)
    if np.any(undefined):
        gamma = np.where(undefined, ANGLE_UNDEFINED, gamma)
    return gamma


def innovations(observation_value: float, gamma: np.ndarray,
                wrap: bool = False) -> np.ndarray:
    """Per-cell innovation y = Z - Gamma, optionally wrapped to (-pi, pi]."""
    y = observation_value - np.asarray(gamma, dtype=float)
    if wrap:
        valid = np.isfinite(y)
        y = np.where(valid, wrap_angle(np.where(valid, y, 0.0)), y)
    return y

"""Camera footprint geometry and local-frame coordinate helpers.

Everything downstream (planner, simulator, coverage raster) works in a
local ENU frame: x east, y north, z up, metres. Latitude/longitude only
appears at import/export time via :class:`GeoOrigin`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class HorizonError(ValueError):
    """Raised when a camera ray points at or above the horizon, so the
    ground footprint would be unbounded."""


@dataclass(frozen=True, slots=True)
class EnuPoint:
    """Point in the local east-north-up frame (metres)."""

    x: float
    y: float
    z: float = 0.0


@dataclass(frozen=True)
class GeoOrigin:
    """Anchor of the ENU frame, with equirectangular scale factors.

    Good to well under 1e-6 degree of round-trip error inside a ~1 km box,
    which is all the survey sites here need.
    """

    lat0: float
    lon0: float

    @property
    def metres_per_deg_lat(self) -> float:
        phi = math.radians(self.lat0)
        return (111132.92 - 559.82 * math.cos(2 * phi)
                + 1.175 * math.cos(4 * phi) - 0.0023 * math.cos(6 * phi))

    @property
    def metres_per_deg_lon(self) -> float:
        phi = math.radians(self.lat0)
        return (111412.84 * math.cos(phi) - 93.5 * math.cos(3 * phi)
                + 0.118 * math.cos(5 * phi))

    def to_enu(self, lat: float, lon: float, alt: float = 0.0) -> EnuPoint:
        return EnuPoint((lon - self.lon0) * self.metres_per_deg_lon,
                        (lat - self.lat0) * self.metres_per_deg_lat,
                        alt)

    def to_latlon(self, p: EnuPoint) -> tuple[float, float]:
        return (self.lat0 + p.y / self.metres_per_deg_lat,
                self.lon0 + p.x / self.metres_per_deg_lon)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Downward-pointing camera described by its lens geometry.

    ``pitch`` tilts the view about the camera's horizontal axis (affects the
    along-y extents), ``roll`` about the other axis (affects the along-x
    extents); both are radians from straight down.
    """

    lens_width_mm: float = 2.06
    lens_height_mm: float = 1.52
    focal_mm: float = 4.7
    pitch: float = 0.0
    roll: float = 0.0
    image_width: int = 640
    image_height: int = 480

    def __post_init__(self) -> None:
        if self.focal_mm <= 0 or self.lens_width_mm <= 0 or self.lens_height_mm <= 0:
            raise ValueError("lens dimensions and focal length must be positive")
        if abs(self.pitch) >= math.pi / 2 or abs(self.roll) >= math.pi / 2:
            raise ValueError("camera tilt angles must be below 90 degrees")
        # per-metre extent ratios for the straight-down fast path
        object.__setattr__(self, "_tan_h", self.lens_height_mm / (2.0 * self.focal_mm))
        object.__setattr__(self, "_tan_w", self.lens_width_mm / (2.0 * self.focal_mm))
        object.__setattr__(self, "_nadir", self.pitch == 0.0 and self.roll == 0.0)

    @property
    def half_angle_h(self) -> float:
        """Half view angle across the lens height (radians)."""
        return math.atan(self._tan_h)

    @property
    def half_angle_w(self) -> float:
        """Half view angle across the lens width (radians)."""
        return math.atan(self._tan_w)


@dataclass(frozen=True)
class Footprint:
    """Ground quadrilateral seen by the camera: 4 corners at z = 0,
    counterclockwise order."""

    corners: tuple[tuple[float, float], ...]

    def bbox(self) -> tuple[float, float, float, float]:
        xs = [c[0] for c in self.corners]
        ys = [c[1] for c in self.corners]
        return min(xs), min(ys), max(xs), max(ys)

    def area(self) -> float:
        s = 0.0
        cs = self.corners
        for i in range(len(cs)):
            x1, y1 = cs[i]
            x2, y2 = cs[(i + 1) % len(cs)]
            s += x1 * y2 - x2 * y1
        return 0.5 * abs(s)


def footprint_extent(altitude: float, cam: CameraIntrinsics) -> tuple[float, float, float, float]:
    """Signed ground-plane extents (top, bottom, left, right) of the view.

    Top/bottom come from the height half-angle combined with the pitch,
    left/right from the width half-angle combined with the roll. Each value
    is the signed offset from the sub-camera point; for a straight-down
    camera top/right are positive and bottom/left their negatives.
    """
    if altitude <= 0:
        raise ValueError(f"altitude must be positive, got {altitude}")
    if cam._nadir:
        ly = altitude * cam._tan_h
        lx = altitude * cam._tan_w
        return ly, -ly, -lx, lx
    ha_h = cam.half_angle_h
    ha_w = cam.half_angle_w
    limit = math.pi / 2
    if (abs(cam.pitch) + ha_h) >= limit or (abs(cam.roll) + ha_w) >= limit:
        raise HorizonError("camera ray at or above horizon: footprint unbounded")
    l_top = altitude * math.tan(cam.pitch + ha_h)
    l_bottom = altitude * math.tan(cam.pitch - ha_h)
    l_left = altitude * math.tan(cam.roll - ha_w)
    l_right = altitude * math.tan(cam.roll + ha_w)
    return l_top, l_bottom, l_left, l_right


def footprint_corners_world(uav: EnuPoint, yaw: float, cam: CameraIntrinsics) -> Footprint:
    """Footprint corners translated (and rotated by the UAV yaw) into the
    world frame. With ``yaw = 0`` this is a pure translation of the
    camera-frame corners."""
    l_top, l_bottom, l_left, l_right = footprint_extent(uav.z, cam)
    local = ((l_right, l_top), (l_left, l_top), (l_left, l_bottom), (l_right, l_bottom))
    c, s = math.cos(yaw), math.sin(yaw)
    world = tuple((uav.x + c * lx - s * ly, uav.y + s * lx + c * ly) for lx, ly in local)
    # geometric CCW ordering regardless of extent signs under large tilts
    cx = sum(p[0] for p in world) / 4.0
    cy = sum(p[1] for p in world) / 4.0
    ordered = tuple(sorted(world, key=lambda p: math.atan2(p[1] - cy, p[0] - cx)))
    return Footprint(ordered)


_TWO_PI = 2.0 * math.pi


def point_in_footprint(x: float, y: float, fp: Footprint) -> bool:
    """Sum-of-angles containment test, boundary inclusive.

    The angles subtended at (x, y) by consecutive corner pairs sum to
    +/-2*pi for interior points and ~0 outside; a 1e-9 rad tolerance keeps
    points exactly on an edge inside.
    """
    total = 0.0
    cs = fp.corners
    n = len(cs)
    for i in range(n):
        ax = cs[i][0] - x
        ay = cs[i][1] - y
        j = (i + 1) % n
        bx = cs[j][0] - x
        by = cs[j][1] - y
        cross = ax * by - ay * bx
        dot = ax * bx + ay * by
        if cross == 0.0 and dot <= 0.0:
            return True  # on an edge (or a corner)
        total += math.atan2(cross, dot)
    return abs(total) >= _TWO_PI - 1e-9


def position_step_delta(l_fov: float, overlap: float) -> float:
    """Horizontal step length giving the requested frame overlap fraction."""
    if not 0.0 <= overlap < 1.0:
        raise ValueError(f"overlap fraction must be in [0, 1), got {overlap}")
    if l_fov <= 0:
        raise ValueError(f"footprint length must be positive, got {l_fov}")
    return l_fov * (1.0 - overlap)


def manhattan(px: float, py: float, qx: float, qy: float) -> float:
    """2D Manhattan distance, used for both the UAV-victim separation and
    the survey-area diagonal."""
    return abs(px - qx) + abs(py - qy)

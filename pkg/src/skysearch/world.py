"""Ground-truth world and stochastic detector standing in for the field
site, the camera stream and the CNN: victims with occlusion, a
person-lookalike distractor, a 3D obstacle grid, and wind-induced frame
dropout.

The detector fires per frame; an observation call aggregates the frames
streamed since the previous call (spread along the flown segment), so the
reported confidence is the positive-detection frequency over that window.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from pathlib import Path
from random import Random

from .configio import ConfigError, parse_kv_file
from .coverage import Rect
from .geometry import CameraIntrinsics, EnuPoint, footprint_extent
from .model import Observation

_SCENARIO_DIR = Path(__file__).parent / "scenarios"


class OccupancyGrid:
    """Sparse 3D occupancy: a set of occupied cells. Lookups outside any
    recorded cell are free."""

    def __init__(self, cell_size: float = 1.0):
        if cell_size <= 0:
            raise ValueError("cell_size must be positive")
        self.cell_size = cell_size
        self._cells: set[tuple[int, int, int]] = set()
        self.top_z = -math.inf  # upper edge of the tallest occupied cell

    def _key(self, x: float, y: float, z: float) -> tuple[int, int, int]:
        c = self.cell_size
        return (int(math.floor(x / c)), int(math.floor(y / c)), int(math.floor(z / c)))

    def add_box(self, x: float, y: float, z: float,
                dx: float, dy: float, dz: float) -> None:
        c = self.cell_size
        for ix in range(int(math.floor(x / c)), int(math.ceil((x + dx) / c))):
            for iy in range(int(math.floor(y / c)), int(math.ceil((y + dy) / c))):
                for iz in range(int(math.floor(z / c)), int(math.ceil((z + dz) / c))):
                    self._cells.add((ix, iy, iz))
                    self.top_z = max(self.top_z, (iz + 1) * c)

    def occupied(self, x: float, y: float, z: float) -> bool:
        if z >= self.top_z:
            return False
        return self._key(x, y, z) in self._cells

    def clears_everything(self, lowest_z: float) -> bool:
        """True when a volume entirely above ``lowest_z`` cannot intersect
        any occupied cell; lets hot paths skip the swept-segment test."""
        return lowest_z >= self.top_z

    def ahead(self, x: float, y: float, z: float,
              dx: float, dy: float, dz: float) -> bool:
        """Any occupied cell along the segment swept by the displacement.
        A zero displacement degenerates to the current cell."""
        if min(z, z + dz) >= self.top_z:
            return False
        return occupied_ahead(self, x, y, z, dx, dy, dz)

    def __len__(self) -> int:
        return len(self._cells)


def occupied_ahead(grid: OccupancyGrid, x: float, y: float, z: float,
                   dx: float, dy: float, dz: float) -> bool:
    length = math.sqrt(dx * dx + dy * dy + dz * dz)
    if length == 0.0:
        return grid.occupied(x, y, z)
    steps = max(1, int(math.ceil(length / (0.5 * grid.cell_size))))
    for i in range(1, steps + 1):
        f = i / steps
        if grid.occupied(x + f * dx, y + f * dy, z + f * dz):
            return True
    return False


class WindProcess:
    """Gusts arrive as a Poisson process and last exponentially long;
    every camera frame inside a gust is dropped."""

    def __init__(self, rate_per_s: float, mean_duration_s: float, rng: Random):
        self.rate = max(0.0, rate_per_s)
        self.mean_duration = max(1e-9, mean_duration_s)
        self._rng = rng
        self._starts: list[float] = []
        self._ends: list[float] = []
        self._horizon = 0.0

    def _extend(self, t: float) -> None:
        while self._horizon <= t:
            if self.rate <= 0.0:
                self._horizon = math.inf
                return
            gap = self._rng.expovariate(self.rate)
            start = self._horizon + gap
            duration = self._rng.expovariate(1.0 / self.mean_duration)
            self._starts.append(start)
            self._ends.append(start + duration)
            self._horizon = start + duration

    def active(self, t: float) -> bool:
        self._extend(t)
        i = bisect.bisect_right(self._starts, t) - 1
        return i >= 0 and t < self._ends[i]


@dataclass(frozen=True)
class DetectorProfile:
    """Per-frame response of the vision pipeline.

    The base detection probability falls off linearly with UAV-victim
    distance from ``p_ceil`` close up to ``p_floor`` at ``far_range``
    (1.25x the survey ceiling by default). Occlusion bites at survey
    distance and fades as the UAV closes in below ``occl_free_dist``, which
    is what lets an inspection confirm a partly hidden victim.
    """

    modality: str = "rgb"
    frames_per_call: int = 10
    sigma_loc: float = 0.5
    p_floor: float = 0.05
    p_ceil: float = 0.98
    near_range: float = 5.25
    far_range: float = 20.0
    occl_free_dist: float = 5.25
    occl_full_dist: float = 16.0

    def __post_init__(self) -> None:
        if self.frames_per_call < 1:
            raise ValueError("need at least one frame per observation call")
        if not 0.0 <= self.p_floor <= self.p_ceil <= 1.0:
            raise ValueError("probability bounds must satisfy 0 <= floor <= ceil <= 1")

    def base_p(self, d_uv: float) -> float:
        p = (self.far_range - d_uv) / (self.far_range - self.near_range)
        return min(max(p, self.p_floor), self.p_ceil)

    def effective_occlusion(self, d_uv: float, occlusion: float) -> float:
        span = self.occl_full_dist - self.occl_free_dist
        ramp = min(max((d_uv - self.occl_free_dist) / span, 0.0), 1.0)
        return occlusion * ramp

    def per_frame_p(self, d_uv: float, occlusion: float) -> float:
        """True-detection probability for one frame; monotone non-increasing
        in both distance and occlusion."""
        return self.base_p(d_uv) * (1.0 - self.effective_occlusion(d_uv, occlusion))


def thermal_profile(**overrides) -> DetectorProfile:
    """Thermal payload variant: same response curve, tighter localization
    (heat blobs centre well) and no illumination dependence to model."""
    kwargs = {"modality": "thermal", "sigma_loc": 0.3}
    kwargs.update(overrides)
    return DetectorProfile(**kwargs)


@dataclass
class GroundTruth:
    """Everything that exists in the simulated world."""

    victims: list[tuple[float, float, float]] = field(default_factory=list)       # x, y, occlusion
    distractors: list[tuple[float, float, float]] = field(default_factory=list)   # x, y, fp rate
    obstacles: OccupancyGrid = field(default_factory=OccupancyGrid)
    wind_rate: float = 0.0          # gusts per second
    wind_mean_duration: float = 5.0

    def __post_init__(self) -> None:
        for _, _, occ in self.victims:
            if not 0.0 <= occ <= 1.0:
                raise ValueError("occlusion fraction must be in [0, 1]")
        for _, _, rate in self.distractors:
            if not 0.0 <= rate <= 1.0:
                raise ValueError("false-positive rate must be in [0, 1]")


def sense(pose: EnuPoint, cam: CameraIntrinsics, truth: GroundTruth,
          profile: DetectorProfile, rng: Random, *,
          prev_pose: EnuPoint | None = None, wind: WindProcess | None = None,
          t0: float = 0.0, t1: float | None = None,
          est_noise_xy: float = 0.1, est_noise_z: float = 0.05) -> Observation:
    """One observation call: stream ``frames_per_call`` frames along the
    segment from the previous pose, fire each visible target per its
    per-frame probability, and report the target with the highest
    positive-detection frequency.
    """
    prev = pose if prev_pose is None else prev_pose
    end_t = t0 if t1 is None else t1
    n = profile.frames_per_call
    n_victims = len(truth.victims)
    targets = truth.victims + truth.distractors
    hits = [0] * len(targets)
    for i in range(1, n + 1):
        f = i / n
        ft = t0 + f * (end_t - t0)
        if wind is not None and wind.active(ft):
            continue  # gust: frame dropped for every target
        fx = prev.x + f * (pose.x - prev.x)
        fy = prev.y + f * (pose.y - prev.y)
        fz = prev.z + f * (pose.z - prev.z)
        l_top, l_bottom, l_left, l_right = footprint_extent(max(fz, 1e-6), cam)
        for k, (tx, ty, third) in enumerate(targets):
            if not (fx + l_left <= tx <= fx + l_right
                    and fy + l_bottom <= ty <= fy + l_top):
                continue
            if k < n_victims:
                # slant range: what actually shrinks the target in the frame
                d_uv = math.sqrt((fx - tx) ** 2 + (fy - ty) ** 2 + fz * fz)
                p = profile.per_frame_p(d_uv, third)
            else:
                p = third  # distractor false-positive rate, range independent
            if rng.random() < p:
                hits[k] += 1
    best = -1
    best_hits = 0
    for k, h in enumerate(hits):
        if h > best_hits:
            best_hits = h
            best = k
    ox = pose.x + (rng.gauss(0.0, est_noise_xy) if est_noise_xy > 0 else 0.0)
    oy = pose.y + (rng.gauss(0.0, est_noise_xy) if est_noise_xy > 0 else 0.0)
    oz = pose.z + (rng.gauss(0.0, est_noise_z) if est_noise_z > 0 else 0.0)
    obstacle = truth.obstacles.ahead(pose.x, pose.y, pose.z,
                                     pose.x - prev.x, pose.y - prev.y, pose.z - prev.z)
    if best < 0:
        return Observation(ox, oy, oz, False, obstacle_ahead=obstacle)
    tx, ty, _ = targets[best]
    pv_x = tx + rng.gauss(0.0, profile.sigma_loc)
    pv_y = ty + rng.gauss(0.0, profile.sigma_loc)
    return Observation(ox, oy, oz, True, pv_x, pv_y, best_hits / n, obstacle)


# ---------------------------------------------------------------------------
# scenario files

@dataclass
class Scenario:
    """A declarative world plus any model/solver overrides from the file."""

    name: str
    survey: Rect
    truth: GroundTruth
    modality: str = "rgb"
    origin: tuple[float, float] | None = None
    detector_overrides: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def detector_profile(self) -> DetectorProfile:
        if self.modality == "thermal":
            return thermal_profile(**self.detector_overrides)
        return DetectorProfile(**self.detector_overrides)


def builtin_scenarios() -> list[str]:
    return sorted(p.stem for p in _SCENARIO_DIR.glob("*.scn"))


def load_scenario(name_or_path: str | Path) -> Scenario:
    """Load a scenario by built-in name (``l1``, ``l2``) or file path."""
    path = Path(name_or_path)
    if not path.exists():
        candidate = _SCENARIO_DIR / f"{name_or_path}.scn"
        if candidate.exists():
            path = candidate
        else:
            raise ConfigError(f"no scenario named {name_or_path!r} "
                              f"(built-ins: {', '.join(builtin_scenarios())})")
    kv = parse_kv_file(path)
    try:
        survey_vals = [float(v) for v in kv["survey"][-1]]
    except KeyError:
        raise ConfigError(f"{path}: scenario must define 'survey = xmin ymin xmax ymax'")
    survey = Rect(*survey_vals)
    grid = OccupancyGrid()
    for row in kv.get("obstacle", []):
        grid.add_box(*[float(v) for v in row])
    wind_rate, wind_dur = 0.0, 5.0
    if "wind" in kv:
        wind_rate, wind_dur = (float(v) for v in kv["wind"][-1])
    truth = GroundTruth(
        victims=[tuple(float(v) for v in row) for row in kv.get("victim", [])],
        distractors=[tuple(float(v) for v in row) for row in kv.get("distractor", [])],
        obstacles=grid, wind_rate=wind_rate, wind_mean_duration=wind_dur)
    for vx, vy, _ in truth.victims + truth.distractors:
        if not survey.contains(vx, vy):
            raise ConfigError(f"{path}: target ({vx}, {vy}) outside the survey area")
    origin = None
    if "origin" in kv:
        lat0, lon0 = (float(v) for v in kv["origin"][-1])
        origin = (lat0, lon0)
    detector_overrides = {}
    for key, rows in kv.items():
        if key.startswith("detector_"):
            field_name = key[len("detector_"):]
            val = rows[-1][0]
            detector_overrides[field_name] = (int(val) if field_name == "frames_per_call"
                                              else float(val))
    name = kv.get("name", [[path.stem]])[-1][0]
    modality = kv.get("modality", [["rgb"]])[-1][0]
    return Scenario(name=name, survey=survey, truth=truth, modality=modality,
                    origin=origin, detector_overrides=detector_overrides, raw=kv)

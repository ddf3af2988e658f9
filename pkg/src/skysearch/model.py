"""POMDP formulation of the search-and-detect problem.

State, action and observation spaces, the transition and reward functions,
and the generative observation model the tree-search planner samples from.
All functions are pure given an explicit RNG handle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import IntEnum
from random import Random

from .configio import coerce_scalar, parse_kv_file
from .coverage import CoverageMap, Rect
from .geometry import (CameraIntrinsics, EnuPoint, Footprint,
                       footprint_extent, position_step_delta)
from .solver import ParticleBelief


class ActionCmd(IntEnum):
    """The seven position commands. Enum order is the deterministic
    tie-break order used by the planner."""

    FORWARD = 0   # +x
    BACKWARD = 1  # -x
    LEFT = 2      # +y
    RIGHT = 3     # -y
    UP = 4
    DOWN = 5
    HOVER = 6


@dataclass(frozen=True, slots=True)
class PomdpState:
    """UAV pose plus mission flags and the victim hypothesis.

    ``victim_present`` marks whether this hypothesis contains a victim at
    all: the belief needs an explicit absence hypothesis so that a potential
    victim can be discarded after fruitless inspection. ``victim_x/y`` are
    meaningful only when ``victim_present`` is true.
    """

    x: float
    y: float
    z: float
    f_crash: bool = False
    f_roi: bool = False
    f_dct: bool = False
    victim_x: float = 0.0
    victim_y: float = 0.0
    victim_present: bool = True
    c_v: float = 0.0

    @property
    def pos(self) -> EnuPoint:
        return EnuPoint(self.x, self.y, self.z)


@dataclass(frozen=True, slots=True)
class Observation:
    """What the UAV perceives after a step: estimated own position,
    detection flag with victim position and confidence (only on positive
    detections), and the obstacle-ahead flag."""

    pu_x: float
    pu_y: float
    pu_z: float
    detected: bool
    pv_x: float | None = None
    pv_y: float | None = None
    zeta: float | None = None
    obstacle_ahead: bool = False


@dataclass(frozen=True)
class RewardParams:
    """Reward constants; defaults are the flight-tested values."""

    crash: float = -50.0
    out: float = -25.0
    detect: float = 25.0
    confirm: float = 50.0
    action: float = -2.5
    fov: float = -5.0

    @classmethod
    def from_file(cls, path) -> "RewardParams":
        kv = parse_kv_file(path)
        kwargs = {}
        for name in ("crash", "out", "detect", "confirm", "action", "fov"):
            key = f"reward_{name}"
            if key in kv:
                kwargs[name] = float(kv[key][-1][0])
        return cls(**kwargs)


@dataclass
class ModelConfig:
    """Mission and model constants.

    Defaults reproduce the survey configuration: 16 m ceiling, 5.25 m
    floor, 2 m climb step, 40 % frame overlap, 10 % / 85 % confidence
    thresholds, 0.95 discount, 4 s ticks, 10 min flight budget.
    """

    z_max: float = 16.0
    z_min: float = 5.25
    climb_step: float = 2.0
    overlap: float = 0.40          # desired frame overlap for horizontal steps
    zeta_min: float = 0.10
    zeta: float = 0.85
    gamma: float = 0.95
    dt: float = 4.0
    t_max: float = 600.0
    survey: Rect = field(default_factory=lambda: Rect(0.0, 0.0, 60.0, 6.0))
    conf_bin: float = 0.05         # observation confidence bin width
    obs_cell: float = 0.5          # observation position bin (coverage cell)
    move_noise_xy: float = 0.3     # per-step position noise, metres
    move_noise_z: float = 0.2
    est_noise_xy: float = 0.1      # position-estimate noise, metres
    est_noise_z: float = 0.05
    roi_slack: float = 0.5         # tolerance before a pose counts as out of limits
    paper_literal_confidence: bool = False
    speed: float = 2.0             # waypoint-following speed, m/s
    coverage_done: float = 0.995   # survey considered complete at this ratio

    def __post_init__(self) -> None:
        if not self.z_min < self.z_max:
            raise ValueError("z_min must be below z_max")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("discount factor must be in (0, 1]")
        if not self.zeta_min < self.zeta <= 1.0:
            raise ValueError("need zeta_min < zeta <= 1")

    def apply_overrides(self, kv: dict) -> "ModelConfig":
        """New config with any matching keys from a parsed key-value file."""
        fields = {f for f in self.__dataclass_fields__ if f != "survey"}
        kwargs = {}
        for key, rows in kv.items():
            if key in fields:
                kwargs[key] = coerce_scalar(rows[-1][0])
        if "survey" in kv:
            vals = [float(v) for v in kv["survey"][-1]]
            kwargs["survey"] = Rect(*vals)
        return replace(self, **kwargs)

    @classmethod
    def from_file(cls, path) -> "ModelConfig":
        return cls().apply_overrides(parse_kv_file(path))

    def d_w(self) -> float:
        """Manhattan diagonal of the survey area (maximum exploration
        distance)."""
        return self.survey.manhattan_diagonal()


# ---------------------------------------------------------------------------
# confidence models

def confidence_proximity(d_uv: float, cfg: ModelConfig) -> float:
    """Default modeled detection confidence: grows as the UAV closes in,
    from zeta_min at (or beyond) the altitude ceiling to 1.0 at the floor."""
    d = min(max(d_uv, cfg.z_min), cfg.z_max)
    return cfg.zeta_min + (1.0 - cfg.zeta_min) * (cfg.z_max - d) / (cfg.z_max - cfg.z_min)


def confidence_paper_literal(d_uv: float, cfg: ModelConfig) -> float:
    """Alternate confidence model that grows with distance, the opposite
    direction to the default. Kept selectable for comparison; clamped into
    [0, 1] so state invariants hold outside the altitude band."""
    raw = (1.0 - cfg.zeta_min) * (d_uv - cfg.z_min + cfg.zeta_min) / (cfg.z_max - cfg.z_min)
    return min(max(raw, 0.0), 1.0)


def modeled_confidence(d_uv: float, cfg: ModelConfig) -> float:
    if cfg.paper_literal_confidence:
        return confidence_paper_literal(d_uv, cfg)
    return confidence_proximity(d_uv, cfg)


# ---------------------------------------------------------------------------
# core operations

def step_lengths(z: float, cam: CameraIntrinsics, cfg: ModelConfig) -> tuple[float, float]:
    """Horizontal step lengths (dx, dy) at altitude ``z``: each axis uses
    its own footprint extent so consecutive frames keep the configured
    overlap."""
    l_top, l_bottom, l_left, l_right = footprint_extent(z, cam)
    dx = position_step_delta(l_right - l_left, cfg.overlap)
    dy = position_step_delta(l_top - l_bottom, cfg.overlap)
    return dx, dy


def action_displacement(a: ActionCmd, z: float, cam: CameraIntrinsics,
                        cfg: ModelConfig) -> tuple[float, float, float]:
    if a == ActionCmd.HOVER:
        return 0.0, 0.0, 0.0
    if a == ActionCmd.UP:
        return 0.0, 0.0, cfg.climb_step
    if a == ActionCmd.DOWN:
        return 0.0, 0.0, -cfg.climb_step
    dx, dy = step_lengths(z, cam, cfg)
    if a == ActionCmd.FORWARD:
        return dx, 0.0, 0.0
    if a == ActionCmd.BACKWARD:
        return -dx, 0.0, 0.0
    if a == ActionCmd.LEFT:
        return 0.0, dy, 0.0
    return 0.0, -dy, 0.0


def out_of_limits(x: float, y: float, z: float, cfg: ModelConfig) -> bool:
    s = cfg.roi_slack
    box = cfg.survey
    return (x < box.x_min - s or x > box.x_max + s
            or y < box.y_min - s or y > box.y_max + s
            or z < cfg.z_min - s or z > cfg.z_max + s)


def transition(s: PomdpState, a: ActionCmd, cfg: ModelConfig, cam: CameraIntrinsics,
               occupancy, rng: Random, geofence: bool = False) -> PomdpState:
    """One motion step: commanded displacement plus position noise, then
    flag recomputation. ``geofence`` clamps the commanded set-point into the
    flying limits the way the motion server does on the real vehicle; the
    planner's imagined transitions leave it off so breaching the limits
    stays a terminal failure it can reason about.
    """
    dx, dy, dz = action_displacement(a, s.z, cam, cfg)
    nx, ny, nz = s.x + dx, s.y + dy, s.z + dz
    if geofence:
        box = cfg.survey
        nx = min(max(nx, box.x_min), box.x_max)
        ny = min(max(ny, box.y_min), box.y_max)
        nz = min(max(nz, cfg.z_min), cfg.z_max)
    if cfg.move_noise_xy > 0.0:
        nx += rng.gauss(0.0, cfg.move_noise_xy)
        ny += rng.gauss(0.0, cfg.move_noise_xy)
    if cfg.move_noise_z > 0.0:
        nz += rng.gauss(0.0, cfg.move_noise_z)
    f_roi = out_of_limits(nx, ny, nz, cfg)
    f_crash = bool(occupancy is not None and occupancy.occupied(nx, ny, nz))
    f_dct = False
    c_v = 0.0
    if s.victim_present and not f_crash and not f_roi:
        l_top, l_bottom, l_left, l_right = footprint_extent(max(nz, 1e-6), cam)
        if (nx + l_left <= s.victim_x <= nx + l_right
                and ny + l_bottom <= s.victim_y <= ny + l_top):
            f_dct = True
            d_uv = abs(nx - s.victim_x) + abs(ny - s.victim_y) + nz
            c_v = modeled_confidence(d_uv, cfg)
    return PomdpState(nx, ny, nz, f_crash, f_roi, f_dct,
                      s.victim_x, s.victim_y, s.victim_present, c_v)


def reward(state: PomdpState, a: ActionCmd, eps: float, d_v: float, d_w: float,
           params: RewardParams, cfg: ModelConfig) -> float:
    """Reward for arriving in ``state`` by action ``a``.

    Branch order is normative: crash, then out-of-limits, then detection
    (altitude bonus, confirmation bonus on a Down with confidence past the
    threshold), otherwise the exploration costs (action, altitude,
    horizontal distance, footprint overlap).
    """
    if state.f_crash:
        return params.crash
    if state.f_roi:
        return params.out
    alt_frac = (state.z - cfg.z_min) / (cfg.z_max - cfg.z_min)
    if state.f_dct:
        r = params.detect
        r += params.detect * (1.0 - alt_frac)
        if state.c_v >= cfg.zeta and a == ActionCmd.DOWN:
            r += params.confirm
        return r
    r = params.action
    r -= params.detect * (1.0 - alt_frac)
    r -= params.detect * (1.0 - 0.5 ** (4.0 * d_v / d_w))
    r += params.fov * eps
    return r


def zeta_bin(zeta: float, cfg: ModelConfig) -> int:
    return int(round(zeta / cfg.conf_bin))


def generate_observation(s2: PomdpState, a: ActionCmd, cam: CameraIntrinsics,
                         cfg: ModelConfig, occupancy, rng: Random) -> Observation:
    """Modeled observation for the planner: noisy self-position estimate;
    the detection flag and confidence carried by the post-transition state
    (footprint containment of the victim hypothesis and the modeled
    confidence curve); on detection, a noisy victim position. Confidence is
    discretized to the observation bins."""
    ox = s2.x + (rng.gauss(0.0, cfg.est_noise_xy) if cfg.est_noise_xy > 0 else 0.0)
    oy = s2.y + (rng.gauss(0.0, cfg.est_noise_xy) if cfg.est_noise_xy > 0 else 0.0)
    oz = s2.z + (rng.gauss(0.0, cfg.est_noise_z) if cfg.est_noise_z > 0 else 0.0)
    pv_x = pv_y = zeta = None
    if s2.f_dct:
        pv_x = s2.victim_x + rng.gauss(0.0, cfg.est_noise_xy)
        pv_y = s2.victim_y + rng.gauss(0.0, cfg.est_noise_xy)
        zeta = zeta_bin(s2.c_v, cfg) * cfg.conf_bin
    obstacle = False
    if occupancy is not None:
        dx, dy, dz = action_displacement(a, s2.z, cam, cfg)
        obstacle = occupancy.ahead(s2.x, s2.y, s2.z, dx, dy, dz)
    return Observation(ox, oy, oz, s2.f_dct, pv_x, pv_y, zeta, obstacle)


def obs_key(obs: Observation, cfg: ModelConfig) -> tuple:
    """Discretized identity of an observation for tree branching and belief
    rejection: position bins at coverage-cell size, confidence bins of
    ``conf_bin`` width."""
    cell = cfg.obs_cell
    if obs.detected:
        det = (int(math.floor(obs.pv_x / cell)), int(math.floor(obs.pv_y / cell)),
               zeta_bin(obs.zeta, cfg))
    else:
        det = None
    return (int(math.floor(obs.pu_x / cell)), int(math.floor(obs.pu_y / cell)),
            int(math.floor(obs.pu_z / cell)), det, obs.obstacle_ahead)


def is_terminal(s: PomdpState, cfg: ModelConfig, elapsed: float = 0.0,
                survey_complete: bool = False) -> bool:
    """Terminal when confidence passes the confirmation threshold, the UAV
    crashed or left the flying limits, the clock ran out, or the survey
    finished without a find."""
    return (s.c_v >= cfg.zeta or s.f_crash or s.f_roi
            or elapsed >= cfg.t_max or survey_complete)


def initial_belief(cfg: ModelConfig, n_particles: int, rng: Random, *,
                   start: EnuPoint, region: Rect | Footprint | None = None,
                   victim_present_prior: float = 1.0,
                   detection: tuple[float, float, float] | None = None) -> ParticleBelief:
    """Build the starting belief for a planning episode.

    Victim hypotheses are uniform over ``region``: the whole survey
    rectangle for a full-area search, or the current camera footprint for
    an inspection triggered mid-survey. UAV positions concentrate at the
    known start pose. ``detection`` seeds every particle with an already
    registered detection (position x, y and confidence).
    """
    if n_particles < 1:
        raise ValueError("need at least one particle")
    if region is None:
        region = cfg.survey
    particles = []
    for _ in range(n_particles):
        ux = start.x + rng.gauss(0.0, cfg.est_noise_xy)
        uy = start.y + rng.gauss(0.0, cfg.est_noise_xy)
        uz = start.z + rng.gauss(0.0, cfg.est_noise_z)
        present = rng.random() < victim_present_prior
        vx, vy = _sample_region(region, rng)
        if detection is not None and present:
            dx, dy, dzeta = detection
            vx = dx + rng.gauss(0.0, cfg.est_noise_xy)
            vy = dy + rng.gauss(0.0, cfg.est_noise_xy)
            particles.append(PomdpState(ux, uy, uz, False, False, True,
                                        vx, vy, True, dzeta))
        else:
            particles.append(PomdpState(ux, uy, uz, False, False, False,
                                        vx, vy, present, 0.0))
    return ParticleBelief(particles, target_size=n_particles)


def _sample_region(region: Rect | Footprint, rng: Random) -> tuple[float, float]:
    if isinstance(region, Rect):
        return (rng.uniform(region.x_min, region.x_max),
                rng.uniform(region.y_min, region.y_max))
    c0, c1, _, c3 = region.corners
    u, v = rng.random(), rng.random()
    return (c0[0] + u * (c1[0] - c0[0]) + v * (c3[0] - c0[0]),
            c0[1] + u * (c1[1] - c0[1]) + v * (c3[1] - c0[1]))


# ---------------------------------------------------------------------------
# generative model facade for the tree-search planner

class GenerativeModel:
    """Bundles transition, observation and reward into the single sampler
    the planner needs, with a copy-on-write coverage scratch so imagined
    futures never pollute the real map.

    Assumes zero yaw (no heading actions), which keeps every footprint an
    axis-aligned rectangle. The observation key built here inline is
    property-tested identical to ``obs_key(generate_observation(...))``;
    the inlining keeps the per-step cost low enough for desk-scale batches.

    ``prior_region`` and ``victim_prior`` describe where victim hypotheses
    live when the belief has to be reinvigorated: the survey rectangle for
    a full-area search, the triggering camera footprint for an inspection.
    """

    # chance that an undetected in-view hypothesis is dropped during
    # reinvigoration, i.e. roughly the real detector's per-call recall
    MISS_PRUNE = 0.85

    def __init__(self, cfg: ModelConfig, params: RewardParams, cam: CameraIntrinsics,
                 occupancy=None, cov_map: CoverageMap | None = None,
                 prior_region: Rect | Footprint | None = None,
                 victim_prior: float = 1.0):
        self.cfg = cfg
        self.params = params
        self.cam = cam
        self.occupancy = occupancy
        self.cov_map = cov_map if cov_map is not None else CoverageMap(cfg.survey)
        self.prior_region = prior_region if prior_region is not None else cfg.survey
        self.victim_prior = victim_prior
        self.n_actions = len(ActionCmd)
        self.gamma = cfg.gamma
        self.d_w = cfg.d_w()
        # detection branch tops out at detect + detect + confirm
        self.max_abs_reward = max(abs(params.crash), abs(params.out),
                                  2.0 * params.detect + params.confirm)

    def new_scratch(self):
        return self.cov_map.snapshot()

    def _observe_key(self, s2: PomdpState, a: ActionCmd, rng: Random) -> tuple:
        """Observation bin of ``generate_observation`` without building the
        Observation object (identical fields, identical draw order)."""
        cfg = self.cfg
        cell = cfg.obs_cell
        ox = s2.x + (rng.gauss(0.0, cfg.est_noise_xy) if cfg.est_noise_xy > 0 else 0.0)
        oy = s2.y + (rng.gauss(0.0, cfg.est_noise_xy) if cfg.est_noise_xy > 0 else 0.0)
        oz = s2.z + (rng.gauss(0.0, cfg.est_noise_z) if cfg.est_noise_z > 0 else 0.0)
        if s2.f_dct:
            pv_x = s2.victim_x + rng.gauss(0.0, cfg.est_noise_xy)
            pv_y = s2.victim_y + rng.gauss(0.0, cfg.est_noise_xy)
            det = (int(math.floor(pv_x / cell)), int(math.floor(pv_y / cell)),
                   int(round(s2.c_v / cfg.conf_bin)))
        else:
            det = None
        obstacle = False
        occ = self.occupancy
        if occ is not None and not occ.clears_everything(s2.z - cfg.climb_step):
            dx, dy, dz = action_displacement(a, s2.z, self.cam, cfg)
            obstacle = occ.ahead(s2.x, s2.y, s2.z, dx, dy, dz)
        return (int(math.floor(ox / cell)), int(math.floor(oy / cell)),
                int(math.floor(oz / cell)), det, obstacle)

    def step(self, s: PomdpState, a: int, rng: Random, scratch):
        """Sample (next state, observation key, reward, terminal)."""
        cfg = self.cfg
        act = ActionCmd(a)
        s2 = transition(s, act, cfg, self.cam, self.occupancy, rng)
        key = self._observe_key(s2, act, rng)
        if s2.f_crash or s2.f_roi:
            eps = 0.0  # unused branch
            d_v = self.d_w
        else:
            l_top, l_bottom, l_left, l_right = footprint_extent(max(s2.z, 1e-6), self.cam)
            x0, x1 = s2.x + l_left, s2.x + l_right
            y0, y1 = s2.y + l_bottom, s2.y + l_top
            eps = self.cov_map.rect_overlap(x0, y0, x1, y1, scratch)
            self.cov_map.stamp_rect(x0, y0, x1, y1, scratch)
            if s2.victim_present:
                d_v = abs(s2.x - s2.victim_x) + abs(s2.y - s2.victim_y)
            else:
                d_v = self.d_w
        r = reward(s2, act, eps, d_v, self.d_w, self.params, cfg)
        terminal = s2.c_v >= cfg.zeta or s2.f_crash or s2.f_roi
        return s2, key, r, terminal

    def resimulate(self, s: PomdpState, a: int, rng: Random):
        """Transition + observation only, for belief rejection filtering."""
        act = ActionCmd(a)
        s2 = transition(s, act, self.cfg, self.cam, self.occupancy, rng)
        return s2, self._observe_key(s2, act, rng)

    def obs_key_of(self, obs: Observation) -> tuple:
        return obs_key(obs, self.cfg)

    def is_terminal(self, s: PomdpState) -> bool:
        return s.c_v >= self.cfg.zeta or s.f_crash or s.f_roi

    def reinvigorate(self, obs: Observation, donors, rng: Random) -> PomdpState:
        """Fresh particle consistent with the real observation.

        The UAV pose snaps to the position estimate. On a detection the
        victim hypothesis sits near the reported position with the observed
        confidence. On a miss the hypothesis is inherited from a donor
        particle (jittered) or, rarely, redrawn from the prior region; a
        donor hypothesis the camera is currently looking at survives only
        with the complement of its modeled detection confidence, since one
        missed frame set is weak evidence of absence. When no candidate
        survives, the consistent explanation is that no victim is there.
        """
        cfg = self.cfg
        ux = obs.pu_x + rng.gauss(0.0, cfg.est_noise_xy)
        uy = obs.pu_y + rng.gauss(0.0, cfg.est_noise_xy)
        uz = obs.pu_z + rng.gauss(0.0, cfg.est_noise_z)
        if obs.detected:
            # a detection is credible to the extent its confidence matches
            # what the model expects at that range; a weak return from
            # close up points at a lookalike, not a victim
            d_obs = abs(ux - obs.pv_x) + abs(uy - obs.pv_y) + uz
            expected = max(modeled_confidence(d_obs, cfg), cfg.zeta_min)
            if rng.random() < min(obs.zeta / expected, 1.0):
                vx = obs.pv_x + rng.gauss(0.0, cfg.est_noise_xy)
                vy = obs.pv_y + rng.gauss(0.0, cfg.est_noise_xy)
                if donors and rng.random() < 0.7:
                    # average the fresh report with an earlier hypothesis so
                    # repeated detections contract the position spread
                    donor = donors[rng.randrange(len(donors))]
                    if donor.victim_present and donor.f_dct:
                        vx = 0.5 * (donor.victim_x + vx) + rng.gauss(0.0, 0.1)
                        vy = 0.5 * (donor.victim_y + vy) + rng.gauss(0.0, 0.1)
                return PomdpState(ux, uy, uz, False, False, True, vx, vy, True, obs.zeta)
            return PomdpState(ux, uy, uz, False, False, False, 0.0, 0.0, False, 0.0)
        l_top, l_bottom, l_left, l_right = footprint_extent(max(obs.pu_z, 1e-6), self.cam)
        x0, x1 = obs.pu_x + l_left, obs.pu_x + l_right
        y0, y1 = obs.pu_y + l_bottom, obs.pu_y + l_top
        if rng.random() < self.victim_prior:
            vx = vy = None
            for _ in range(30):
                if donors and rng.random() < 0.9:
                    donor = donors[rng.randrange(len(donors))]
                    if not donor.victim_present:
                        continue
                    vx = donor.victim_x + rng.gauss(0.0, 0.25)
                    vy = donor.victim_y + rng.gauss(0.0, 0.25)
                else:
                    vx, vy = _sample_region(self.prior_region, rng)
                break
            if vx is not None:
                if x0 <= vx <= x1 and y0 <= vy <= y1 and rng.random() < self.MISS_PRUNE:
                    # in view yet not detected: usually the spot is clear,
                    # but one missed call is not proof (the victim may have
                    # entered the view only for the last few frames)
                    return PomdpState(ux, uy, uz, False, False, False,
                                      0.0, 0.0, False, 0.0)
                return PomdpState(ux, uy, uz, False, False, False, vx, vy, True, 0.0)
        return PomdpState(ux, uy, uz, False, False, False, 0.0, 0.0, False, 0.0)

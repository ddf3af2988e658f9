"""The three flight modes driving the UAV through the simulated world.

mission  - lawnmower waypoint survey, detector logging raw positives
offboard - pure planner flight from an all-area victim belief
hybrid   - lawnmower survey that pauses for a planner-driven inspection
           whenever the detector reports something, then resumes

Each run owns its world, RNG streams and coverage map, so batches can fan
out across processes without shared state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from random import Random

from .configio import apply_dataclass_kv
from .coverage import CoverageMap, Rect
from .geometry import CameraIntrinsics, EnuPoint, footprint_extent
from .model import (ActionCmd, GenerativeModel, ModelConfig, PomdpState, RewardParams,
                    action_displacement, initial_belief, transition)
from .solver import BeliefCollapseError, SolverConfig, advance_belief, bootstrap, plan_step
from .world import DetectorProfile, GroundTruth, Scenario, WindProcess, sense

OUTCOMES = ("Confirmed", "SurveyCompleteNoVictim", "Timeout", "Crash", "OutOfBounds")


@dataclass
class FlightPlan:
    """Ordered survey waypoints at constant altitude and speed."""

    waypoints: list[EnuPoint]
    altitude: float = 16.0
    speed: float = 2.0
    lane_spacing: float = 0.0
    lane_count: int = 1

    def length(self) -> float:
        total = 0.0
        for a, b in zip(self.waypoints, self.waypoints[1:]):
            total += math.dist((a.x, a.y, a.z), (b.x, b.y, b.z))
        return total


@dataclass
class RunRecord:
    """Everything one simulated flight produced."""

    mode: str
    seed: str
    outcome: str = "Timeout"
    elapsed_s: float = 0.0
    trajectory: list[tuple[float, float, float, float]] = field(default_factory=list)
    detections: list[tuple[float, float, float, float]] = field(default_factory=list)
    recorded: list[tuple[float, float]] = field(default_factory=list)
    confirmations: list[tuple[float, float, float, float]] = field(default_factory=list)
    mode_events: list[tuple[float, str]] = field(default_factory=list)
    coverage: float = 0.0
    solver_trace: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"mode": self.mode, "seed": self.seed, "outcome": self.outcome,
                "elapsed_s": self.elapsed_s, "trajectory": self.trajectory,
                "detections": self.detections, "recorded": self.recorded,
                "confirmations": self.confirmations, "mode_events": self.mode_events,
                "coverage": self.coverage}

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        rec = cls(mode=d["mode"], seed=d["seed"], outcome=d["outcome"],
                  elapsed_s=d["elapsed_s"], coverage=d.get("coverage", 0.0))
        rec.trajectory = [tuple(row) for row in d["trajectory"]]
        rec.detections = [tuple(row) for row in d["detections"]]
        rec.recorded = [tuple(row) for row in d["recorded"]]
        rec.confirmations = [tuple(row) for row in d["confirmations"]]
        rec.mode_events = [tuple(row) for row in d.get("mode_events", [])]
        return rec


def lawnmower_waypoints(survey: Rect, cam: CameraIntrinsics, overlap: float = 0.30,
                        altitude: float = 16.0, speed: float = 2.0) -> FlightPlan:
    """Boustrophedon legs parallel to the survey's long axis.

    Lane spacing is the cross-track footprint width shrunk by the requested
    overlap; the whole swath is centred so the stamped union covers the
    rectangle while every leg stays inside it. A survey narrower than one
    footprint gets a single centred leg.
    """
    if survey.width <= 0 or survey.height <= 0:
        raise ValueError("survey rectangle is degenerate")
    l_top, l_bottom, l_left, l_right = footprint_extent(altitude, cam)
    along_x = survey.width >= survey.height
    cross = (l_top - l_bottom) if along_x else (l_right - l_left)
    spacing = cross * (1.0 - overlap)
    cross_size = survey.height if along_x else survey.width
    cross_min = survey.y_min if along_x else survey.x_min
    if cross_size <= cross:
        lanes = [cross_min + cross_size / 2.0]
    else:
        n = int(math.ceil((cross_size - cross) / spacing)) + 1
        swath = (n - 1) * spacing + cross
        first = cross_min + cross_size / 2.0 - swath / 2.0 + cross / 2.0
        lanes = [first + i * spacing for i in range(n)]
    lo, hi = (survey.x_min, survey.x_max) if along_x else (survey.y_min, survey.y_max)
    waypoints = []
    for i, lane in enumerate(lanes):
        ends = (lo, hi) if i % 2 == 0 else (hi, lo)
        for e in ends:
            waypoints.append(EnuPoint(e, lane, altitude) if along_x
                             else EnuPoint(lane, e, altitude))
    return FlightPlan(waypoints, altitude=altitude, speed=speed,
                      lane_spacing=spacing, lane_count=len(lanes))


class _Follower:
    """Moves along a waypoint polyline by a fixed distance per tick."""

    def __init__(self, waypoints: list[EnuPoint]):
        self.wps = waypoints
        self.idx = 0
        self.pos = waypoints[0]
        self.done = len(waypoints) < 2

    def advance(self, dist: float) -> EnuPoint:
        x, y, z = self.pos.x, self.pos.y, self.pos.z
        while dist > 0 and self.idx < len(self.wps) - 1:
            tgt = self.wps[self.idx + 1]
            seg = math.dist((x, y, z), (tgt.x, tgt.y, tgt.z))
            if seg <= dist + 1e-12:
                x, y, z = tgt.x, tgt.y, tgt.z
                self.idx += 1
                dist -= seg
            else:
                f = dist / seg
                x += f * (tgt.x - x)
                y += f * (tgt.y - y)
                z += f * (tgt.z - z)
                dist = 0.0
        if self.idx >= len(self.wps) - 1:
            self.done = True
        self.pos = EnuPoint(x, y, z)
        return self.pos


def _stamp_swept(cov: CoverageMap, cam: CameraIntrinsics, p0: EnuPoint, p1: EnuPoint) -> None:
    """Stamp the corridor the camera swept between two poses."""
    d = math.dist((p0.x, p0.y, p0.z), (p1.x, p1.y, p1.z))
    k = max(1, int(math.ceil(d / cov.cell_size)))
    for i in range(1, k + 1):
        f = i / k
        x = p0.x + f * (p1.x - p0.x)
        y = p0.y + f * (p1.y - p0.y)
        z = p0.z + f * (p1.z - p0.z)
        l_top, l_bottom, l_left, l_right = footprint_extent(max(z, 1e-6), cam)
        cov.stamp_rect(x + l_left, y + l_bottom, x + l_right, y + l_top)


def _near_any(x: float, y: float, coords: list[tuple[float, float]], radius: float) -> bool:
    return any(math.hypot(x - cx, y - cy) <= radius for cx, cy in coords)


@dataclass
class RunSetup:
    """One run's fully resolved configuration."""

    scenario: Scenario
    mode: str
    seed: str
    cfg: ModelConfig
    solver_cfg: SolverConfig
    params: RewardParams
    cam: CameraIntrinsics
    profile: DetectorProfile
    confirm_suppress_radius: float = 2.0
    inspect_step_cap: int = 28
    discard_present_mass: float = 0.05
    inspect_prior: float = 0.8     # victim-present prior seeding an inspection


def build_setup(scenario: Scenario, mode: str, seed, *,
                paper_literal_confidence: bool = False) -> RunSetup:
    if mode not in ("mission", "offboard", "hybrid"):
        raise ValueError(f"unknown flight mode {mode!r}")
    cfg = ModelConfig().apply_overrides(scenario.raw)
    cfg = replace(cfg, survey=scenario.survey,
                  paper_literal_confidence=paper_literal_confidence
                  or cfg.paper_literal_confidence)
    solver_cfg = apply_dataclass_kv(SolverConfig(), scenario.raw)
    return RunSetup(scenario=scenario, mode=mode, seed=str(seed), cfg=cfg,
                    solver_cfg=solver_cfg, params=RewardParams(),
                    cam=CameraIntrinsics(), profile=scenario.detector_profile())


def execute_run(setup: RunSetup) -> RunRecord:
    if setup.mode == "mission":
        plan = lawnmower_waypoints(setup.cfg.survey, setup.cam,
                                   altitude=setup.cfg.z_max, speed=setup.cfg.speed)
        return run_mission(plan, setup.scenario.truth, setup.profile, setup)
    if setup.mode == "offboard":
        return run_offboard(setup.scenario.truth, setup.profile, setup)
    plan = lawnmower_waypoints(setup.cfg.survey, setup.cam,
                               altitude=setup.cfg.z_max, speed=setup.cfg.speed)
    return run_hybrid(plan, setup.scenario.truth, setup.profile, setup)


# ---------------------------------------------------------------------------
# mission mode

def run_mission(plan: FlightPlan, truth: GroundTruth, profile: DetectorProfile,
                setup: RunSetup) -> RunRecord:
    """Fly the survey plan, logging every detection at or above the minimum
    confidence as a recorded victim coordinate. No inspection, no
    confirmation threshold: this is the baseline's raw behaviour."""
    cfg = setup.cfg
    rec = RunRecord(mode=setup.mode, seed=setup.seed)
    rng = Random(f"{setup.seed}:world")
    wind = WindProcess(truth.wind_rate, truth.wind_mean_duration, Random(f"{setup.seed}:wind"))
    cov = CoverageMap(cfg.survey, cell_size=cfg.obs_cell)
    follow = _Follower(plan.waypoints)
    pose = follow.pos
    t = 0.0
    rec.trajectory.append((t, pose.x, pose.y, pose.z))
    rec.mode_events.append((t, "MissionLeg"))
    _stamp_swept(cov, setup.cam, pose, pose)
    step = plan.speed * cfg.dt
    inflate = step + cfg.roi_slack
    while True:
        prev = pose
        pose = follow.advance(step)
        t += cfg.dt
        _stamp_swept(cov, setup.cam, prev, pose)
        rec.trajectory.append((t, pose.x, pose.y, pose.z))
        if truth.obstacles.occupied(pose.x, pose.y, pose.z):
            rec.outcome = "Crash"
            break
        if not _inside(pose, cfg.survey, inflate):
            rec.outcome = "OutOfBounds"
            break
        obs = sense(pose, setup.cam, truth, profile, rng, prev_pose=prev,
                    wind=wind, t0=t - cfg.dt, t1=t,
                    est_noise_xy=cfg.est_noise_xy, est_noise_z=cfg.est_noise_z)
        if obs.detected and obs.zeta >= cfg.zeta_min:
            rec.detections.append((t, obs.pv_x, obs.pv_y, obs.zeta))
            rec.recorded.append((obs.pv_x, obs.pv_y))
        if follow.done:
            rec.outcome = "Confirmed" if rec.recorded else "SurveyCompleteNoVictim"
            break
        if t >= cfg.t_max:
            rec.outcome = "Timeout"
            break
    rec.elapsed_s = t
    rec.coverage = cov.coverage_ratio()
    return rec


def _inside(pose: EnuPoint, box: Rect, inflate: float) -> bool:
    return (box.x_min - inflate <= pose.x <= box.x_max + inflate
            and box.y_min - inflate <= pose.y <= box.y_max + inflate)


# ---------------------------------------------------------------------------
# offboard mode

def _allowed_actions(pose: EnuPoint, cfg: ModelConfig, cam: CameraIntrinsics) -> list[int]:
    """Actions whose nominal set-point the motion server would accept
    (inside the survey box and altitude band). Hover always qualifies."""
    box = cfg.survey
    allowed = []
    for a in ActionCmd:
        dx, dy, dz = action_displacement(a, pose.z, cam, cfg)
        nx, ny, nz = pose.x + dx, pose.y + dy, pose.z + dz
        if (box.x_min <= nx <= box.x_max and box.y_min <= ny <= box.y_max
                and cfg.z_min <= nz <= cfg.z_max):
            allowed.append(int(a))
    return allowed or [int(ActionCmd.HOVER)]


class _PlannerFlight:
    """Shared planner-in-the-loop flight segment used by offboard mode and
    by hybrid inspection sub-episodes."""

    def __init__(self, setup: RunSetup, truth: GroundTruth, profile: DetectorProfile,
                 cov: CoverageMap, rng_world: Random, rng_solver: Random,
                 wind: WindProcess, rec: RunRecord):
        self.setup = setup
        self.truth = truth
        self.profile = profile
        self.cov = cov
        self.rng_world = rng_world
        self.rng_solver = rng_solver
        self.wind = wind
        self.rec = rec

    def fly(self, pose: EnuPoint, t: float, *, region, victim_prior: float,
            detection: tuple | None, max_steps: int,
            discard_mass: float | None) -> tuple[str, EnuPoint, float]:
        """Run the plan/act/sense/update loop until a terminal event.

        Returns (event, pose, t) where event is one of ``confirmed``,
        ``discarded``, ``cap``, ``timeout``, ``crash``, ``out``,
        ``survey_done``, ``collapse``.
        """
        setup, cfg = self.setup, self.setup.cfg
        model = GenerativeModel(cfg, setup.params, setup.cam,
                                occupancy=self.truth.obstacles, cov_map=self.cov,
                                prior_region=region, victim_prior=max(victim_prior, 1e-9))
        belief = initial_belief(cfg, setup.solver_cfg.n_particles, self.rng_solver,
                                start=pose, region=region,
                                victim_present_prior=victim_prior, detection=detection)
        root = bootstrap(model, belief, setup.solver_cfg, self.rng_solver)
        t += cfg.dt  # offline bootstrap tick
        reinits = 0
        steps = 0
        inflate = cfg.speed * cfg.dt + cfg.roi_slack
        while True:
            if t >= cfg.t_max:
                return "timeout", pose, t
            if steps >= max_steps:
                return "cap", pose, t
            allowed = _allowed_actions(pose, cfg, setup.cam)
            particles = root.belief.particles
            engaged = sum(p.f_dct for p in particles) >= 0.25 * len(particles)
            scfg = setup.solver_cfg
            episodes = scfg.episodes_per_step
            if engaged:
                # closing in: spend more episodes, exploit harder and look
                # just far enough ahead that the altitude-bonus gradient is
                # not drowned by random-rollout noise; the remaining
                # decision is a short descend-and-centre corridor
                episodes = int(episodes * scfg.engaged_boost)
                scfg = replace(scfg, ucb_c=scfg.ucb_c / 3.0,
                               max_depth=min(scfg.max_depth, 4))
            action = plan_step(root, model, scfg, self.rng_solver,
                               allowed=allowed, episodes=episodes)
            planned_q = root_q(root)
            n_particles = len(root.belief.particles)
            prev = pose
            state = PomdpState(pose.x, pose.y, pose.z, victim_present=False)
            state = transition(state, ActionCmd(action), cfg, setup.cam,
                               self.truth.obstacles, self.rng_world, geofence=True)
            pose = EnuPoint(state.x, state.y, state.z)
            t += cfg.dt
            steps += 1
            _stamp_swept(self.cov, setup.cam, prev, pose)
            self.rec.trajectory.append((t, pose.x, pose.y, pose.z))
            if state.f_crash:
                return "crash", pose, t
            if not _inside(pose, cfg.survey, inflate):
                return "out", pose, t
            obs = sense(pose, setup.cam, self.truth, self.profile, self.rng_world,
                        prev_pose=prev, wind=self.wind, t0=t - cfg.dt, t1=t,
                        est_noise_xy=cfg.est_noise_xy, est_noise_z=cfg.est_noise_z)
            if obs.detected and obs.zeta >= cfg.zeta_min:
                self.rec.detections.append((t, obs.pv_x, obs.pv_y, obs.zeta))
            if obs.detected and obs.zeta >= cfg.zeta:
                self.rec.confirmations.append((t, obs.pv_x, obs.pv_y, obs.zeta))
                self.rec.recorded.append((obs.pv_x, obs.pv_y))
                return "confirmed", pose, t
            try:
                root = advance_belief(root, action, obs, model,
                                      setup.solver_cfg, self.rng_solver)
            except BeliefCollapseError:
                reinits += 1
                if reinits > 1:
                    return "collapse", pose, t
                belief = initial_belief(cfg, setup.solver_cfg.n_particles,
                                        self.rng_solver, start=pose, region=region,
                                        victim_present_prior=victim_prior,
                                        detection=None)
                root = bootstrap(model, belief, setup.solver_cfg, self.rng_solver)
                t += cfg.dt
                continue
            belief_now = root.belief
            self.rec.solver_trace.append({
                "t": t, "action": ActionCmd(action).name,
                "q": [round(q, 3) if q == q else None for q in planned_q],
                "particles": n_particles, "episodes": episodes,
                "survival": round(belief_now.survival_rate, 4)})
            if (discard_mass is not None
                    and belief_now.evidence_present_frac < discard_mass):
                return "discarded", pose, t
            if self.cov.coverage_ratio() >= cfg.coverage_done:
                return "survey_done", pose, t


def root_q(root) -> list[float]:
    return [e.q if e is not None and e.n else math.nan for e in root.edges]


def run_offboard(truth: GroundTruth, profile: DetectorProfile, setup: RunSetup,
                 start: EnuPoint | None = None) -> RunRecord:
    """Planner-only flight: all-area victim belief, plan/act/sense loop
    until confirmation, survey completion or the clock."""
    cfg = setup.cfg
    rec = RunRecord(mode=setup.mode, seed=setup.seed)
    rng_world = Random(f"{setup.seed}:world")
    rng_solver = Random(f"{setup.seed}:solver")
    wind = WindProcess(truth.wind_rate, truth.wind_mean_duration, Random(f"{setup.seed}:wind"))
    cov = CoverageMap(cfg.survey, cell_size=cfg.obs_cell)
    if start is None:
        inset = min(1.0, cfg.survey.width / 4, cfg.survey.height / 4)
        start = EnuPoint(cfg.survey.x_min + inset, cfg.survey.y_min + inset, cfg.z_max)
    pose = start
    t = 0.0
    rec.trajectory.append((t, pose.x, pose.y, pose.z))
    rec.mode_events.append((t, "OffboardPlanning"))
    _stamp_swept(cov, setup.cam, pose, pose)
    flight = _PlannerFlight(setup, truth, profile, cov, rng_world, rng_solver, wind, rec)
    event, pose, t = flight.fly(pose, t, region=cfg.survey, victim_prior=1.0,
                                detection=None, max_steps=1 << 30, discard_mass=None)
    rec.outcome = {
        "confirmed": "Confirmed", "survey_done": "SurveyCompleteNoVictim",
        "timeout": "Timeout", "collapse": "Timeout", "crash": "Crash",
        "out": "OutOfBounds", "cap": "Timeout", "discarded": "Timeout",
    }[event]
    rec.elapsed_s = t
    rec.coverage = cov.coverage_ratio()
    rec.mode_events.append((t, f"Done({rec.outcome})"))
    return rec


# ---------------------------------------------------------------------------
# hybrid mode

def run_hybrid(plan: FlightPlan, truth: GroundTruth, profile: DetectorProfile,
               setup: RunSetup) -> RunRecord:
    """Survey like mission mode, but on each fresh detection pause the plan,
    run a planner inspection over the camera's footprint until the target is
    confirmed or discarded, then return to the pause point and resume."""
    cfg = setup.cfg
    rec = RunRecord(mode=setup.mode, seed=setup.seed)
    rng_world = Random(f"{setup.seed}:world")
    rng_solver = Random(f"{setup.seed}:solver")
    wind = WindProcess(truth.wind_rate, truth.wind_mean_duration, Random(f"{setup.seed}:wind"))
    cov = CoverageMap(cfg.survey, cell_size=cfg.obs_cell)
    follow = _Follower(plan.waypoints)
    pose = follow.pos
    t = 0.0
    rec.trajectory.append((t, pose.x, pose.y, pose.z))
    rec.mode_events.append((t, "MissionLeg"))
    _stamp_swept(cov, setup.cam, pose, pose)
    step = plan.speed * cfg.dt
    inflate = step + cfg.roi_slack
    flight = _PlannerFlight(setup, truth, profile, cov, rng_world, rng_solver, wind, rec)
    timed_out = False
    while True:
        prev = pose
        pose = follow.advance(step)
        t += cfg.dt
        _stamp_swept(cov, setup.cam, prev, pose)
        rec.trajectory.append((t, pose.x, pose.y, pose.z))
        if truth.obstacles.occupied(pose.x, pose.y, pose.z):
            rec.outcome = "Crash"
            rec.elapsed_s = t
            rec.coverage = cov.coverage_ratio()
            return rec
        if not _inside(pose, cfg.survey, inflate):
            rec.outcome = "OutOfBounds"
            rec.elapsed_s = t
            rec.coverage = cov.coverage_ratio()
            return rec
        obs = sense(pose, setup.cam, truth, profile, rng_world, prev_pose=prev,
                    wind=wind, t0=t - cfg.dt, t1=t,
                    est_noise_xy=cfg.est_noise_xy, est_noise_z=cfg.est_noise_z)
        fresh = (obs.detected and obs.zeta >= cfg.zeta_min
                 and not _near_any(obs.pv_x, obs.pv_y, rec.recorded,
                                   setup.confirm_suppress_radius))
        if fresh:
            rec.detections.append((t, obs.pv_x, obs.pv_y, obs.zeta))
        if fresh and obs.zeta >= cfg.zeta:
            # the survey pass itself cleared the confirmation bar
            rec.confirmations.append((t, obs.pv_x, obs.pv_y, obs.zeta))
            rec.recorded.append((obs.pv_x, obs.pv_y))
            fresh = False
        if fresh:
            resume = pose
            rec.mode_events.append((t, "HybridInspecting"))
            # inspect a FOV-sized patch centred on the reported detection
            l_top, l_bottom, l_left, l_right = footprint_extent(pose.z, setup.cam)
            region = Rect(obs.pv_x + l_left, obs.pv_y + l_bottom,
                          obs.pv_x + l_right, obs.pv_y + l_top)
            event, pose, t = flight.fly(
                pose, t, region=region, victim_prior=setup.inspect_prior,
                detection=(obs.pv_x, obs.pv_y, obs.zeta),
                max_steps=setup.inspect_step_cap,
                discard_mass=setup.discard_present_mass)
            if event == "timeout":
                timed_out = True
                break
            if event == "crash":
                rec.outcome = "Crash"
                rec.elapsed_s = t
                rec.coverage = cov.coverage_ratio()
                return rec
            # return to the pause point and carry on surveying
            back = _Follower([pose, resume])
            while not back.done:
                p2 = back.advance(step)
                t += cfg.dt
                _stamp_swept(cov, setup.cam, pose, p2)
                rec.trajectory.append((t, p2.x, p2.y, p2.z))
                sense(p2, setup.cam, truth, profile, rng_world, prev_pose=pose,
                      wind=wind, t0=t - cfg.dt, t1=t,
                      est_noise_xy=cfg.est_noise_xy, est_noise_z=cfg.est_noise_z)
                pose = p2
                if t >= cfg.t_max:
                    timed_out = True
                    break
            rec.mode_events.append((t, "MissionLeg"))
            if timed_out:
                break
        if follow.done or t >= cfg.t_max:
            timed_out = t >= cfg.t_max and not follow.done
            break
    if rec.confirmations:
        rec.outcome = "Confirmed"
    elif timed_out:
        rec.outcome = "Timeout"
    else:
        rec.outcome = "SurveyCompleteNoVictim"
    rec.mode_events.append((t, f"Done({rec.outcome})"))
    rec.elapsed_s = t
    rec.coverage = cov.coverage_ratio()
    return rec

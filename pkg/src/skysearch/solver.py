"""Online POMDP solver: UCB-guided Monte-Carlo search over a generative
model with a particle belief, reusing the subtree under the executed
action/observation across real steps.

The solver is generic over any model exposing::

    n_actions: int
    gamma: float
    max_abs_reward: float
    new_scratch() -> object passed through to step
    step(state, action, rng, scratch) -> (state2, obs_key, reward, terminal)

Belief advancement additionally needs ``resimulate``, ``obs_key_of``,
``is_terminal`` and ``reinvigorate`` (see :mod:`skysearch.model`).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from random import Random


class BeliefCollapseError(RuntimeError):
    """No particle is consistent with reality and none can be regenerated."""


@dataclass
class ParticleBelief:
    """Multiset of sampled states approximating the belief. Weights are
    uniform; resampling keeps the population at ``target_size``.

    ``survival_rate`` is the fraction of particles that matched the latest
    real observation's bin. ``evidence_present_frac`` is the belief's
    victim-present probability after the refill (reinvigorated particles
    are observation-consistent, so a missed detection drains it and a
    positive one restores it); it is what a mission loop reads when
    deciding to discard a potential victim.
    """

    particles: list
    target_size: int
    survival_rate: float = 1.0
    evidence_present_frac: float = 1.0


class _Edge:
    __slots__ = ("n", "q", "children")

    def __init__(self):
        self.n = 0
        self.q = 0.0
        self.children: dict = {}


class BeliefNode:
    """Search-tree node: per-action visit counts and running-mean value
    estimates, with observation-keyed child nodes. The particle belief is
    attached at the root only."""

    __slots__ = ("n_visits", "edges", "belief")

    def __init__(self, n_actions: int, belief: ParticleBelief | None = None):
        self.n_visits = 0
        self.edges: list[_Edge | None] = [None] * n_actions
        self.belief = belief

    def q_values(self) -> list[float]:
        return [e.q if e is not None and e.n > 0 else math.nan for e in self.edges]


@dataclass
class SolverConfig:
    episodes_per_step: int = 4000
    bootstrap_episodes: int = 16000
    max_depth: int = 30
    ucb_c: float = 100.0           # ~2x the largest single-step reward magnitude
    n_particles: int = 2000
    reinvig_frac: float = 0.10     # reinvigorate below this survivor fraction
    refresh_frac: float = 0.05     # always-fresh share of each refill
    engaged_boost: float = 4.0     # episode multiplier while the belief holds a detection
    step_seconds: float | None = None  # wall-clock budget mode, overrides episode count

    def __post_init__(self) -> None:
        if min(self.episodes_per_step, self.bootstrap_episodes,
               self.max_depth, self.n_particles) < 1:
            raise ValueError("solver budgets must all be at least 1")


def _return_bound(model, cfg: SolverConfig) -> float:
    g = model.gamma
    if g >= 1.0:
        return model.max_abs_reward * cfg.max_depth
    return model.max_abs_reward * (1.0 - g ** cfg.max_depth) / (1.0 - g)


def _simulate(node: BeliefNode, state, depth: int, model, cfg: SolverConfig,
              scratch, rng: Random, allowed=None) -> float:
    if depth >= cfg.max_depth:
        return 0.0
    # pick the first untried action, else UCB1
    action = -1
    edges = node.edges
    actions = range(model.n_actions) if allowed is None else allowed
    for a in actions:
        e = edges[a]
        if e is None or e.n == 0:
            action = a
            break
    if action < 0:
        log_n = math.log(node.n_visits)
        best = -math.inf
        for a in actions:
            e = edges[a]
            u = e.q + cfg.ucb_c * math.sqrt(log_n / e.n)
            if u > best:
                best = u
                action = a
    state2, key, r, terminal = model.step(state, action, rng, scratch)
    edge = edges[action]
    if edge is None:
        edge = edges[action] = _Edge()
    if terminal:
        total = r
    else:
        child = edge.children.get(key)
        if child is None:
            edge.children[key] = BeliefNode(model.n_actions)
            total = r + model.gamma * _rollout(state2, depth + 1, model, cfg, scratch, rng)
        else:
            total = r + model.gamma * _simulate(child, state2, depth + 1, model,
                                                cfg, scratch, rng)
    node.n_visits += 1
    edge.n += 1
    edge.q += (total - edge.q) / edge.n
    return total


def _rollout(state, depth: int, model, cfg: SolverConfig, scratch, rng: Random) -> float:
    total = 0.0
    disc = 1.0
    for _ in range(depth, cfg.max_depth):
        a = rng.randrange(model.n_actions)
        state, _, r, terminal = model.step(state, a, rng, scratch)
        total += disc * r
        if terminal:
            break
        disc *= model.gamma
    return total


def _search(root: BeliefNode, model, cfg: SolverConfig, episodes: int,
            rng: Random, q_trace: list | None = None, allowed=None) -> None:
    particles = root.belief.particles
    if not particles:
        raise BeliefCollapseError("cannot plan from an empty belief")
    bound = _return_bound(model, cfg) + 1e-9
    deadline = None
    if cfg.step_seconds is not None:
        deadline = time.monotonic() + cfg.step_seconds
        episodes = 1 << 62
    n = len(particles)
    for ep in range(episodes):
        state = particles[rng.randrange(n)]
        scratch = model.new_scratch()
        total = _simulate(root, state, 0, model, cfg, scratch, rng, allowed)
        if not abs(total) <= bound:
            raise AssertionError(f"episode return {total} exceeds bound {bound}")
        if q_trace is not None:
            q_trace.append(_best_q(root, model.n_actions))
        if deadline is not None and ep % 64 == 63 and time.monotonic() >= deadline:
            break


def _best_q(root: BeliefNode, n_actions: int) -> float:
    best = -math.inf
    for a in range(n_actions):
        e = root.edges[a]
        if e is not None and e.n > 0 and e.q > best:
            best = e.q
    return best


def _argmax_action(root: BeliefNode, actions) -> int:
    best_a = next(iter(actions))
    best_q = -math.inf
    for a in actions:
        e = root.edges[a]
        if e is not None and e.n > 0 and e.q > best_q:
            best_q = e.q
            best_a = a
    return best_a


def plan_step(root: BeliefNode, model, cfg: SolverConfig, rng: Random,
              q_trace: list | None = None, allowed: list[int] | None = None,
              episodes: int | None = None) -> int:
    """Run one planning round and return the best action at the root
    (highest mean return, ties broken by lowest action index).

    ``allowed`` restricts the root decision to the actions the motion
    server would actually accept (e.g. no set-points beyond the flying
    limits); deeper tree levels still search the full action set.
    ``episodes`` overrides the per-step budget, e.g. to think harder while
    closing in on a detection.
    """
    _search(root, model, cfg, episodes or cfg.episodes_per_step, rng, q_trace, allowed)
    return _argmax_action(root, range(model.n_actions) if allowed is None else allowed)


def bootstrap(model, belief0: ParticleBelief, cfg: SolverConfig, rng: Random) -> BeliefNode:
    """Warm the search tree before the first real action is taken."""
    root = BeliefNode(model.n_actions, belief0)
    _search(root, model, cfg, cfg.bootstrap_episodes, rng)
    return root


def advance_belief(root: BeliefNode, taken: int, observed, model,
                   cfg: SolverConfig, rng: Random) -> BeliefNode:
    """Move the root across a real (action, observation) step.

    The subtree under the executed action and the observation's bin is
    reused when it exists. The belief is refilled by rejection: particles
    are resimulated through the step and kept when their simulated
    observation lands in the same bin as reality. When too few survive, the
    population is topped up with fresh states consistent with the
    observation (see ``model.reinvigorate``).
    """
    key = model.obs_key_of(observed)
    edge = root.edges[taken]
    child = edge.children.get(key) if edge is not None else None

    survivors = []
    for s in root.belief.particles:
        if model.is_terminal(s):
            continue
        s2, k2 = model.resimulate(s, taken, rng)
        if k2 == key:
            survivors.append(s2)
    target = root.belief.target_size
    rate = len(survivors) / target
    can_refresh = hasattr(model, "reinvigorate")
    # a sliver of every refill comes from fresh observation-consistent
    # samples so the population cannot inbreed on stale hypotheses
    fresh_n = max(1, int(cfg.refresh_frac * target)) if can_refresh else 0

    if len(survivors) >= max(1, int(cfg.reinvig_frac * target)):
        particles = list(survivors[:target - fresh_n])
        while len(particles) < target - fresh_n:
            particles.append(survivors[rng.randrange(len(survivors))])
        for _ in range(fresh_n):
            particles.append(model.reinvigorate(observed, survivors, rng))
    else:
        if not can_refresh:
            raise BeliefCollapseError(
                f"{len(survivors)}/{target} particles survived and the model "
                "cannot reinvigorate")
        particles = list(survivors)
        donors = survivors if survivors else root.belief.particles
        while len(particles) < target:
            particles.append(model.reinvigorate(observed, donors, rng))

    present = sum(1 for p in particles if getattr(p, "victim_present", True))
    belief = ParticleBelief(particles, target_size=target, survival_rate=rate,
                            evidence_present_frac=present / len(particles))
    new_root = child if child is not None else BeliefNode(model.n_actions)
    new_root.belief = belief
    return new_root

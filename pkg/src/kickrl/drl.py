"""Decentralized learning over a multi-dimensional action space.

One Sarsa(lambda) learner per command dimension, all reading the same state
features and the same reward.  The joint action space of sizes (n_1, .., n_N)
costs prod(n_i) Q evaluations for a centralized learner but only sum(n_i)
for the decentralized split, a prod/sum fold in per-decision work and
weight-table size.  A centralized single-learner policy over the joint
space is kept for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import prod

import numpy as np

from .agent import ActionSet, AgentConfig, SarsaAgent, select_action
from .approx import SparseFeatures, StateSpace, WeightTable, features, q_values_all, q_values_matrix
from .basis import KernelKind


def default_action_sets() -> tuple[ActionSet, ActionSet, ActionSet]:
    """Walk commands: forward mm/s, sideways mm/s, turn deg/s."""
    return (
        ActionSet(0.0, 120.0, 16),
        ActionSet(-70.0, 70.0, 15),
        ActionSet(-30.0, 30.0, 17),
    )


def drl_speedup(action_counts) -> Fraction:
    """Exact prod/sum ratio of joint to per-dimension action evaluations."""
    counts = [int(n) for n in action_counts]
    if not counts or any(n < 1 for n in counts):
        raise ValueError(f"action counts must be positive, got {action_counts}")
    return Fraction(prod(counts), sum(counts))


def joint_encode(counts, idxs) -> int:
    """Row-major joint index; the last component varies fastest."""
    if len(idxs) != len(counts):
        raise IndexError(f"expected {len(counts)} components, got {len(idxs)}")
    j = 0
    for n, i in zip(counts, idxs):
        if not 0 <= i < n:
            raise IndexError(f"component index {i} out of range [0, {n})")
        j = j * n + i
    return j


def joint_decode(counts, j: int) -> tuple[int, ...]:
    total = prod(counts)
    if not 0 <= j < total:
        raise IndexError(f"joint index {j} out of range [0, {total})")
    out = []
    for n in reversed(counts):
        out.append(j % n)
        j //= n
    return tuple(reversed(out))


class DecentralizedPolicy:
    """One agent per command dimension, shared state and reward.

    All per-agent weight columns live side by side in one (n_features,
    sum n_i) matrix, so a decision evaluates every agent's Q row with a
    single matvec; each agent's table is a column view into that storage.
    Exploration draws come from a single rng in fixed agent order, so runs
    are reproducible from the seed alone.
    """

    scheme = "drl"

    def __init__(self, action_sets, n_features: int, cfg: AgentConfig, dtype=np.float32):
        names = ("vx", "vy", "vtheta")[: len(action_sets)]
        self.stack = np.zeros((n_features, sum(a.n for a in action_sets)), dtype=dtype)
        self.agents = []
        self._offsets = []
        col = 0
        for name, acts in zip(names, action_sets):
            view = WeightTable(
                self.stack[:, col : col + acts.n],
                np.zeros(n_features, dtype=np.float64),
            )
            self.agents.append(SarsaAgent(name, acts, n_features, cfg, table=view))
            self._offsets.append(col)
            col += acts.n

    @property
    def action_counts(self) -> tuple[int, ...]:
        return tuple(a.actions.n for a in self.agents)

    def act(self, f: SparseFeatures, eps: float, rng: np.random.Generator, counters=None) -> tuple[int, ...]:
        q = q_values_matrix(f, self.stack, counters)
        return tuple(
            select_action(q[off : off + agent.actions.n], eps, rng)
            for off, agent in zip(self._offsets, self.agents)
        )

    def command(self, idxs) -> tuple[float, ...]:
        return tuple(agent.actions.value(i) for agent, i in zip(self.agents, idxs))

    def begin_episode(self) -> None:
        for agent in self.agents:
            agent.begin_episode()

    def update(self, f, idxs, reward, f_next, idxs_next, terminal: bool) -> None:
        for k, agent in enumerate(self.agents):
            a_next = None if terminal else idxs_next[k]
            agent.update(f, idxs[k], reward, f_next, a_next, terminal)

    def tables(self):
        return {agent.name: agent.table for agent in self.agents}


class CentralizedPolicy:
    """Single learner over the full joint action space."""

    scheme = "crl"

    def __init__(self, action_sets, n_features: int, cfg: AgentConfig, dtype=np.float32):
        self.action_sets = tuple(action_sets)
        self.counts = tuple(a.n for a in action_sets)
        joint = ActionSet(0.0, float(prod(self.counts) - 1), prod(self.counts))
        self.agent = SarsaAgent("joint", joint, n_features, cfg, dtype=dtype)

    @property
    def action_counts(self) -> tuple[int, ...]:
        return self.counts

    def act(self, f: SparseFeatures, eps: float, rng: np.random.Generator, counters=None) -> tuple[int, ...]:
        q = q_values_all(f, self.agent.table, counters)
        return joint_decode(self.counts, select_action(q, eps, rng))

    def command(self, idxs) -> tuple[float, ...]:
        return tuple(acts.value(i) for acts, i in zip(self.action_sets, idxs))

    def begin_episode(self) -> None:
        self.agent.begin_episode()

    def update(self, f, idxs, reward, f_next, idxs_next, terminal: bool) -> None:
        a = joint_encode(self.counts, idxs)
        a_next = None if terminal else joint_encode(self.counts, idxs_next)
        self.agent.update(f, a, reward, f_next, a_next, terminal)

    def tables(self):
        return {"joint": self.agent.table}


@dataclass
class EpisodeResult:
    steps: int
    total_reward: float
    outcome: str
    distance_error: float
    angle_error: float
    success: bool
    epsilon: float


def run_episode(
    world,
    policy,
    space: StateSpace,
    kind: KernelKind,
    eps: float,
    env_rng: np.random.Generator,
    agent_rng: np.random.Generator,
    learn: bool = True,
    counters=None,
    trace_sink=None,
) -> EpisodeResult:
    """One on-policy episode; the next action is chosen before the update."""
    obs = world.reset(env_rng)
    if learn:
        policy.begin_episode()
    f = features(space, kind, obs.as_array(), counters)
    idxs = policy.act(f, eps, agent_rng, counters)
    total = 0.0
    steps = 0
    while True:
        cmd = policy.command(idxs)
        obs2, reward, done, info = world.step(cmd)
        if trace_sink is not None:
            trace_sink(world, obs2, cmd, reward, info)
        total += reward
        steps += 1
        if done:
            if learn:
                policy.update(f, idxs, reward, None, None, True)
            break
        f2 = features(space, kind, obs2.as_array(), counters)
        idxs2 = policy.act(f2, eps, agent_rng, counters)
        if learn:
            policy.update(f, idxs, reward, f2, idxs2, False)
        f, idxs = f2, idxs2
    kick = info.get("kick")
    return EpisodeResult(
        steps=steps,
        total_reward=total,
        outcome=info["outcome"],
        distance_error=kick.distance_error if kick else 1.0,
        angle_error=kick.angle_error if kick else 1.0,
        success=bool(kick.success) if kick else False,
        epsilon=eps,
    )


def train_run(
    world,
    policy,
    space: StateSpace,
    kind: KernelKind,
    episodes: int,
    decay: float,
    env_rng: np.random.Generator,
    agent_rng: np.random.Generator,
    counters=None,
    trace_sink=None,
) -> list[EpisodeResult]:
    """Full training run with the episode-indexed exploration schedule."""
    from .agent import epsilon_schedule

    results = []
    for ep in range(episodes):
        eps = epsilon_schedule(ep, episodes, decay)
        sink = None
        if trace_sink is not None:
            def sink(*a, _ep=ep):
                trace_sink(*a, episode=_ep)
        results.append(
            run_episode(
                world, policy, space, kind, eps, env_rng, agent_rng,
                learn=True, counters=counters, trace_sink=sink,
            )
        )
    return results

"""Sarsa(lambda) with replacing eligibility traces over normalized features.

The trace vector is per feature (one entry per basis function), and each
update touches only the weight column of the action actually taken.  The
exact gradient of the normalized Q numerator is the normalized feature
vector phi_j / sum phi, which is what enters the traces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .approx import SparseFeatures, WeightTable, q_value, q_values_all


@dataclass(frozen=True)
class ActionSet:
    """Evenly spaced scalar commands: index i maps to lo + i * step."""

    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"need at least 2 actions, got {self.n}")
        if not self.hi > self.lo:
            raise ValueError(f"need hi > lo, got [{self.lo}, {self.hi}]")

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / (self.n - 1)

    def value(self, idx: int) -> float:
        if not 0 <= idx < self.n:
            raise IndexError(f"action index {idx} out of range [0, {self.n})")
        return self.lo + idx * self.step

    def to_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "n": self.n}

    @classmethod
    def from_dict(cls, d: dict) -> "ActionSet":
        return cls(float(d["lo"]), float(d["hi"]), int(d["n"]))


@dataclass(frozen=True)
class AgentConfig:
    alpha: float = 0.1
    gamma: float = 0.99
    lam: float = 0.9
    trace_mode: str = "replacing"  # or "accumulating"
    trace_floor: float = 1e-8

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha out of (0, 1]: {self.alpha}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma out of [0, 1]: {self.gamma}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda out of [0, 1]: {self.lam}")
        if self.trace_mode not in ("replacing", "accumulating"):
            raise ValueError(f"unknown trace mode {self.trace_mode!r}")


def epsilon_schedule(episode: int, total_episodes: int, decay: float = 15.0) -> float:
    """Exploration rate exp(-decay * episode / total_episodes), constant within an episode."""
    if total_episodes <= 0:
        raise ValueError("total_episodes must be positive")
    if episode < 0:
        raise ValueError("episode must be >= 0")
    return math.exp(-decay * episode / total_episodes)


def select_action(q: np.ndarray, eps: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy over a Q row; greedy ties break to the lowest index."""
    if eps > 0.0 and rng.random() < eps:
        return int(rng.integers(len(q)))
    return int(np.argmax(q))


def sarsa_update(
    table: WeightTable,
    cfg: AgentConfig,
    f: SparseFeatures,
    action: int,
    reward: float,
    f_next: SparseFeatures | None,
    next_action: int | None,
    terminal: bool,
) -> float:
    """One on-policy TD(lambda) step on a single weight column; returns delta.

    Trace handling per step: decay all nonzero traces by gamma*lambda, prune
    entries below cfg.trace_floor, then set the current features (replacing:
    max with the normalized value; accumulating: add it).  Only column
    ``action`` of the weights is touched.
    """
    q_sa = q_value(f, table, action)
    if terminal:
        target = reward
    else:
        target = reward + cfg.gamma * q_value(f_next, table, next_action)
    delta = target - q_sa

    if table.trace_idx.size:
        decayed = table.traces[table.trace_idx] * (cfg.gamma * cfg.lam)
        keep = decayed >= cfg.trace_floor
        dropped = table.trace_idx[~keep]
        if dropped.size:
            table.traces[dropped] = 0.0
            table.trace_idx = table.trace_idx[keep]
            table.traces[table.trace_idx] = decayed[keep]
        else:
            table.traces[table.trace_idx] = decayed

    if f.norm_sum > 0.0:
        phi = f.values / f.norm_sum
        was_zero = table.traces[f.idx] == 0.0
        if cfg.trace_mode == "replacing":
            table.traces[f.idx] = np.maximum(table.traces[f.idx], phi)
        else:
            table.traces[f.idx] += phi
        fresh = f.idx[was_zero]
        if fresh.size:
            table.trace_idx = np.concatenate([table.trace_idx, fresh])

    if table.trace_idx.size:
        table.weights[table.trace_idx, action] += (cfg.alpha * delta) * table.traces[table.trace_idx]
    return float(delta)


class SarsaAgent:
    """One learner over one scalar action dimension.

    ``table`` may be supplied by the caller (e.g. a column view into shared
    storage); by default the agent allocates its own.
    """

    def __init__(
        self,
        name: str,
        actions: ActionSet,
        n_features: int,
        cfg: AgentConfig,
        dtype=np.float32,
        table: WeightTable | None = None,
    ):
        self.name = name
        self.actions = actions
        self.cfg = cfg
        if table is None:
            table = WeightTable.zeros(n_features, actions.n, dtype=dtype)
        elif table.weights.shape != (n_features, actions.n):
            raise ValueError(
                f"table shape {table.weights.shape} does not match "
                f"({n_features}, {actions.n})"
            )
        self.table = table

    def q_all(self, f: SparseFeatures, counters=None) -> np.ndarray:
        return q_values_all(f, self.table, counters)

    def act(self, f: SparseFeatures, eps: float, rng: np.random.Generator, counters=None) -> int:
        return select_action(self.q_all(f, counters), eps, rng)

    def begin_episode(self) -> None:
        self.table.reset_traces()

    def update(
        self,
        f: SparseFeatures,
        action: int,
        reward: float,
        f_next: SparseFeatures | None,
        next_action: int | None,
        terminal: bool,
    ) -> float:
        return sarsa_update(self.table, self.cfg, f, action, reward, f_next, next_action, terminal)

"""Command-line front end: train / eval / bench / compare-basis.

All randomness flows from one master seed.  Streams are derived as
SeedSequence([seed, trial, role]) with role 0 for the training environment,
1 for the agents, and 2 for evaluation episodes, so every trial is
reproducible in isolation and runs that share a seed see identical episode
initializations regardless of kernel or state model.

Outputs are written once and atomically renamed, never appended, and
contain no timestamps, so rerunning a command with the same config and
seed yields byte-identical files (the benchmark's wall-clock report is the
documented exception; its counter file is byte-stable).

Exit codes: 0 success, 1 usage or config error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from . import bench as bench_mod
from .agent import AgentConfig
from .approx import (
    StateSpace,
    WeightTable,
    atomic_write_text,
    load_weights,
    save_weights,
)
from .basis import KernelKind
from .drl import (
    CentralizedPolicy,
    DecentralizedPolicy,
    EpisodeResult,
    default_action_sets,
    run_episode,
    train_run,
)
from .kicksim import KickSimConfig, KickWorld, state_space

KERNEL_NAMES = tuple(k.value for k in KernelKind)
SMOOTH_WINDOW = 50
SUMMARY_WINDOW = 100


class UsageError(Exception):
    pass


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Full experiment description; unset fields keep the defaults."""

    kernel: str = "epanechnikov"
    scheme: str = "drl"
    state_model: str = "proposed"
    alpha: float = 0.1
    gamma: float = 0.99
    lam: float = 0.9
    decay: float = 15.0
    trace_mode: str = "replacing"
    episodes: int = 1500
    trials: int = 15
    seed: int = 0
    out_dir: str = "out"
    trace: bool = False
    env: KickSimConfig = field(default_factory=KickSimConfig)

    def __post_init__(self):
        if self.kernel not in KERNEL_NAMES:
            raise ConfigError(f"unknown kernel {self.kernel!r}, expected one of {KERNEL_NAMES}")
        if self.scheme not in ("drl", "crl"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.state_model not in ("proposed", "legacy"):
            raise ConfigError(f"unknown state model {self.state_model!r}")
        if self.episodes < 1:
            raise ConfigError("episodes must be >= 1")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")

    def to_dict(self) -> dict:
        d = {
            "kernel": self.kernel,
            "scheme": self.scheme,
            "state_model": self.state_model,
            "alpha": self.alpha,
            "gamma": self.gamma,
            "lam": self.lam,
            "decay": self.decay,
            "trace_mode": self.trace_mode,
            "episodes": self.episodes,
            "trials": self.trials,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "trace": self.trace,
            "env": self.env.to_dict(),
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        env = d.pop("env", None)
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            env_cfg = KickSimConfig.from_dict(env) if env else KickSimConfig()
        except TypeError as e:
            raise ConfigError(f"bad env config: {e}") from None
        return cls(env=env_cfg, **d)

    def agent_config(self) -> AgentConfig:
        return AgentConfig(self.alpha, self.gamma, self.lam, self.trace_mode)

    def world(self) -> KickWorld:
        return KickWorld(replace(self.env, state_model=self.state_model))

    def space(self) -> StateSpace:
        return state_space(self.state_model, self.env)

    def kernel_kind(self) -> KernelKind:
        return KernelKind(self.kernel)

    def policy(self, dtype=np.float32):
        cls = DecentralizedPolicy if self.scheme == "drl" else CentralizedPolicy
        return cls(default_action_sets(), self.space().total_features, self.agent_config(), dtype=dtype)


def load_config(path: str | None, overrides: dict) -> RunConfig:
    data = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(data)


def trial_rngs(seed: int, trial: int) -> tuple[np.random.Generator, np.random.Generator]:
    env = np.random.default_rng(np.random.SeedSequence([seed, trial, 0]))
    agent = np.random.default_rng(np.random.SeedSequence([seed, trial, 1]))
    return env, agent


def eval_rng(seed: int, trial: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, trial, 2]))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    atomic_write_text(path, "\n".join(lines) + "\n")


def _stderr(xs: np.ndarray) -> float:
    if len(xs) < 2:
        return 0.0
    return float(np.std(xs, ddof=1) / math.sqrt(len(xs)))


CURVE_HEADER = ["episode", "distance_error", "angle_error", "return", "epsilon", "steps", "success", "outcome"]


def write_curve(path: str, results: list[EpisodeResult]) -> None:
    rows = [
        [ep, r.distance_error, r.angle_error, r.total_reward, r.epsilon, r.steps, r.success, r.outcome]
        for ep, r in enumerate(results)
    ]
    _write_csv(path, CURVE_HEADER, rows)


def _trailing_mean(xs: list[float], window: int) -> list[float]:
    out = []
    acc = 0.0
    for i, x in enumerate(xs):
        acc += x
        if i >= window:
            acc -= xs[i - window]
        out.append(acc / min(i + 1, window))
    return out


def write_aggregate(path: str, per_trial: list[list[EpisodeResult]]) -> None:
    """Across-trial mean and sample standard error per episode, plus a
    trailing moving average of the mean curves for plotting."""
    episodes = len(per_trial[0])
    metrics = {
        "distance_error": lambda r: r.distance_error,
        "angle_error": lambda r: r.angle_error,
        "return": lambda r: r.total_reward,
        "steps": lambda r: float(r.steps),
    }
    cols: dict[str, list[float]] = {}
    for name, get in metrics.items():
        means, ses = [], []
        for ep in range(episodes):
            vals = np.array([get(t[ep]) for t in per_trial], dtype=np.float64)
            means.append(float(vals.mean()))
            ses.append(_stderr(vals))
        cols[name + "_mean"] = means
        cols[name + "_se"] = ses
    cols["success_rate"] = [
        float(np.mean([1.0 if t[ep].success else 0.0 for t in per_trial])) for ep in range(episodes)
    ]
    for name in ("distance_error", "angle_error", "return"):
        cols[name + "_ma{}".format(SMOOTH_WINDOW)] = _trailing_mean(cols[name + "_mean"], SMOOTH_WINDOW)
    header = ["episode"] + list(cols)
    rows = [[ep] + [cols[c][ep] for c in cols] for ep in range(episodes)]
    _write_csv(path, header, rows)


def window_stats(per_trial: list[list[EpisodeResult]], lo: int, hi: int) -> dict:
    """Metrics pooled over trials x episodes[lo:hi]."""
    pool = [r for t in per_trial for r in t[lo:hi]]
    return {
        "episodes": [lo, hi],
        "distance_error": float(np.mean([r.distance_error for r in pool])),
        "angle_error": float(np.mean([r.angle_error for r in pool])),
        "return": float(np.mean([r.total_reward for r in pool])),
        "success_rate": float(np.mean([1.0 if r.success else 0.0 for r in pool])),
        "mean_steps": float(np.mean([r.steps for r in pool])),
    }


class TraceRecorder:
    """Collects one line-delimited JSON record per environment step."""

    def __init__(self):
        self.lines: list[str] = []
        self._episode = None
        self._step = 0

    def __call__(self, world, obs, cmd, reward, info, episode: int = 0):
        if episode != self._episode:
            self._episode = episode
            self._step = 0
        rec = {
            "episode": episode,
            "step": self._step,
            "time_s": world.time_s,
            "robot": [world.robot_x, world.robot_y, world.robot_theta],
            "ball": [world.ball_x, world.ball_y],
            "obs": list(obs.as_array()),
            "action": list(cmd),
            "reward": reward,
            "outcome": info["outcome"],
        }
        self.lines.append(json.dumps(rec, sort_keys=True))
        self._step += 1

    def dump(self, path: str) -> None:
        atomic_write_text(path, "\n".join(self.lines) + "\n" if self.lines else "")


def train_trial(cfg: RunConfig, trial: int):
    """One seed-isolated training run; returns (episode results, policy, trace)."""
    env_rng, agent_rng = trial_rngs(cfg.seed, trial)
    world = cfg.world()
    space = cfg.space()
    policy = cfg.policy()
    recorder = TraceRecorder() if cfg.trace else None
    results = train_run(
        world, policy, space, cfg.kernel_kind(), cfg.episodes, cfg.decay,
        env_rng, agent_rng, trace_sink=recorder,
    )
    return results, policy, recorder


def save_policy(out_dir: str, cfg: RunConfig, policy, trial: int) -> None:
    space = cfg.space()
    for name, table in policy.tables().items():
        meta = {
            "agent": name,
            "kernel": cfg.kernel,
            "scheme": cfg.scheme,
            "state_model": cfg.state_model,
            "trial": trial,
            "seed": cfg.seed,
            "episodes": cfg.episodes,
            "space": space.to_dict(),
            "n_actions": table.n_actions,
        }
        save_weights(os.path.join(out_dir, f"weights_{name}.bin"), table, meta)


def load_policy(cfg: RunConfig, weights_dir: str):
    """Rebuild a policy from serialized tables, validating shapes."""
    policy = cfg.policy()
    space = cfg.space()
    for name, table in policy.tables().items():
        path = os.path.join(weights_dir, f"weights_{name}.bin")
        if not os.path.exists(path):
            raise ConfigError(f"missing weight file {path}")
        loaded, _meta = load_weights(path)
        if loaded.weights.shape != table.weights.shape:
            raise ConfigError(
                f"{path}: shape {loaded.weights.shape} does not match "
                f"configured space/actions {table.weights.shape}"
            )
        if space.total_features != loaded.n_features:
            raise ConfigError(f"{path}: feature count mismatch")
        table.weights[:] = loaded.weights
    return policy


def cmd_train(cfg: RunConfig) -> dict:
    os.makedirs(cfg.out_dir, exist_ok=True)
    atomic_write_text(
        os.path.join(cfg.out_dir, "config.json"),
        json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n",
    )
    per_trial = []
    for t in range(cfg.trials):
        results, policy, recorder = train_trial(cfg, t)
        tdir = os.path.join(cfg.out_dir, f"trial_{t:02d}")
        os.makedirs(tdir, exist_ok=True)
        write_curve(os.path.join(tdir, "curve.csv"), results)
        save_policy(tdir, cfg, policy, t)
        if recorder is not None:
            recorder.dump(os.path.join(tdir, "trace.jsonl"))
        per_trial.append(results)
    write_aggregate(os.path.join(cfg.out_dir, "aggregate.csv"), per_trial)
    w = min(SUMMARY_WINDOW, cfg.episodes)
    summary = {
        "trials": cfg.trials,
        "episodes": cfg.episodes,
        "window": w,
        "first": window_stats(per_trial, 0, w),
        "final": window_stats(per_trial, cfg.episodes - w, cfg.episodes),
    }
    atomic_write_text(
        os.path.join(cfg.out_dir, "summary.json"),
        json.dumps(summary, indent=2, sort_keys=True) + "\n",
    )
    return summary


def eval_policy(cfg: RunConfig, policy, episodes: int, rng: np.random.Generator) -> list[EpisodeResult]:
    world = cfg.world()
    space = cfg.space()
    kind = cfg.kernel_kind()
    return [
        run_episode(world, policy, space, kind, 0.0, rng, rng, learn=False)
        for _ in range(episodes)
    ]


def eval_summary(results: list[EpisodeResult]) -> dict:
    if not results:
        return {"episodes": 0, "note": "no episodes"}
    de = np.array([r.distance_error for r in results])
    ae = np.array([r.angle_error for r in results])
    return {
        "episodes": len(results),
        "distance_error": {"mean": float(de.mean()), "std": float(de.std(ddof=0))},
        "angle_error": {"mean": float(ae.mean()), "std": float(ae.std(ddof=0))},
        "success_rate": float(np.mean([1.0 if r.success else 0.0 for r in results])),
        "mean_steps": float(np.mean([r.steps for r in results])),
    }


def cmd_eval(cfg: RunConfig, weights_dir: str, episodes: int) -> dict:
    policy = load_policy(cfg, weights_dir)
    results = eval_policy(cfg, policy, episodes, eval_rng(cfg.seed))
    os.makedirs(cfg.out_dir, exist_ok=True)
    if results:
        write_curve(os.path.join(cfg.out_dir, "eval.csv"), results)
    summary = eval_summary(results)
    atomic_write_text(
        os.path.join(cfg.out_dir, "eval_summary.json"),
        json.dumps(summary, indent=2, sort_keys=True) + "\n",
    )
    return summary


def cmd_bench(cfg: RunConfig, n_decisions: int = 200, n_trials: int = 7) -> dict:
    return bench_mod.run_benchmark(
        out_dir=cfg.out_dir, n_decisions=n_decisions, n_trials=n_trials, seed=cfg.seed
    )


def cmd_compare_basis(cfg: RunConfig) -> dict:
    """Train every kernel kind under shared seeds and merge the curves."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    summaries = {}
    per_kernel: dict[str, list[list[EpisodeResult]]] = {}
    for kernel in KERNEL_NAMES:
        sub = replace(cfg, kernel=kernel, out_dir=os.path.join(cfg.out_dir, kernel))
        cmd_train(sub)
        per_trial = [train_results_from_csv(os.path.join(sub.out_dir, f"trial_{t:02d}", "curve.csv")) for t in range(cfg.trials)]
        per_kernel[kernel] = per_trial
        with open(os.path.join(sub.out_dir, "summary.json"), "r", encoding="utf-8") as fh:
            summaries[kernel] = json.load(fh)

    episodes = cfg.episodes
    header = ["episode"]
    cols: list[list[float]] = []
    for kernel in KERNEL_NAMES:
        for metric, get in (
            ("distance_error", lambda r: r.distance_error),
            ("angle_error", lambda r: r.angle_error),
            ("return", lambda r: r.total_reward),
        ):
            means, ses = [], []
            for ep in range(episodes):
                vv = np.array([get(t[ep]) for t in per_kernel[kernel]], dtype=np.float64)
                means.append(float(vv.mean()))
                ses.append(_stderr(vv))
            header += [f"{kernel}_{metric}_mean", f"{kernel}_{metric}_se"]
            cols += [means, ses]
    rows = [[ep] + [c[ep] for c in cols] for ep in range(episodes)]
    _write_csv(os.path.join(cfg.out_dir, "comparison.csv"), header, rows)

    w = min(SUMMARY_WINDOW, episodes)
    final = {k: window_stats(per_kernel[k], episodes - w, episodes) for k in KERNEL_NAMES}
    finals_se = {}
    for k in KERNEL_NAMES:
        per_trial_means = np.array(
            [np.mean([r.distance_error for r in t[episodes - w:]]) for t in per_kernel[k]]
        )
        finals_se[k] = _stderr(per_trial_means)
    overlap = {}
    for a in KERNEL_NAMES:
        for b in KERNEL_NAMES:
            if a < b:
                gap = abs(final[a]["distance_error"] - final[b]["distance_error"])
                overlap[f"{a}|{b}"] = bool(gap <= finals_se[a] + finals_se[b])
    comparison = {
        "window": w,
        "final": final,
        "final_distance_error_se": finals_se,
        "stderr_overlap_distance_error": overlap,
        "ranking_by_distance_error": sorted(KERNEL_NAMES, key=lambda k: final[k]["distance_error"]),
    }
    atomic_write_text(
        os.path.join(cfg.out_dir, "comparison.json"),
        json.dumps(comparison, indent=2, sort_keys=True) + "\n",
    )
    return comparison


def train_results_from_csv(path: str) -> list[EpisodeResult]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        idx = {name: i for i, name in enumerate(header)}
        for line in fh:
            parts = line.rstrip("\n").split(",")
            out.append(
                EpisodeResult(
                    steps=int(parts[idx["steps"]]),
                    total_reward=float(parts[idx["return"]]),
                    outcome=parts[idx["outcome"]],
                    distance_error=float(parts[idx["distance_error"]]),
                    angle_error=float(parts[idx["angle_error"]]),
                    success=parts[idx["success"]] == "1",
                    epsilon=float(parts[idx["epsilon"]]),
                )
            )
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kickrl", description="in-walk kick learning experiments")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--seed", type=int, help="master seed")
        sp.add_argument("--out", dest="out_dir", help="output directory")
        sp.add_argument("--trials", type=int, help="number of independent trials")
        sp.add_argument("--episodes", type=int, help="episodes per trial")
        sp.add_argument("--kernel", choices=KERNEL_NAMES, help="basis kernel")
        sp.add_argument("--scheme", choices=("drl", "crl"), help="learning scheme")
        sp.add_argument("--state-model", dest="state_model", choices=("proposed", "legacy"))
        sp.add_argument("--trace", action="store_const", const=True, help="export per-step episode traces")

    sp = sub.add_parser("train", help="train and write curves, weights, summary")
    common(sp)
    sp = sub.add_parser("eval", help="greedy rollouts from saved weights")
    common(sp)
    sp.add_argument("--weights", required=True, help="directory holding weights_*.bin")
    sp = sub.add_parser("bench", help="instrumented decision benchmark")
    common(sp)
    sp.add_argument("--decisions", type=int, default=200, help="decisions per timing trial")
    sp.add_argument("--timing-trials", type=int, default=7, help="timing repetitions")
    sp = sub.add_parser("compare-basis", help="train each kernel under shared seeds")
    common(sp)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    overrides = {
        k: getattr(args, k, None)
        for k in ("kernel", "scheme", "state_model", "episodes", "trials", "seed", "out_dir", "trace")
    }
    eval_episodes = 100
    if args.command == "eval":
        # --episodes means rollout count here and may legitimately be 0
        n = overrides.pop("episodes")
        if n is not None:
            if n < 0:
                print("config error: eval episodes must be >= 0", file=sys.stderr)
                return 1
            eval_episodes = n
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    try:
        if args.command == "train":
            summary = cmd_train(cfg)
            print(json.dumps(summary["final"], sort_keys=True))
        elif args.command == "eval":
            summary = cmd_eval(cfg, args.weights, episodes=eval_episodes)
            print(json.dumps(summary, sort_keys=True))
        elif args.command == "bench":
            cmd_bench(cfg, n_decisions=args.decisions, n_trials=args.timing_trials)
            print(os.path.join(cfg.out_dir, "bench_report.txt"))
        elif args.command == "compare-basis":
            comparison = cmd_compare_basis(cfg)
            print(json.dumps(comparison["ranking_by_distance_error"]))
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # runtime failure
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

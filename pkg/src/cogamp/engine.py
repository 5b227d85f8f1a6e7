"""Three-phase simulation loop for one (config, seed) run.

Phase 1 runs without AI. Phase 2 makes AI available under the configured
reliance regime. Phase 3 keeps AI available but shifts the task mix toward
composite families. Every ``eval_interval`` ticks in phases 2-3 the engine
records an AI-off evaluation, a perturbation probe and a novelty probe.

Evaluations never mutate agents. All evaluations in a run draw the same
battery of tasks (common random numbers), so changes in the AI-off score
track changes in skill rather than which tasks happened to be drawn.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import _kernels
from .agents import ConfigError, DynamicsConfig, Population, RegimeSpec, init_population
from .environment import EnvSpec, novelty_env, perturbation_env, phase3_env, task_width
from .metrics import (
    MetricError,
    MetricSet,
    PerformanceTriple,
    RegimeLabel,
    classify_regime,
    compute_metrics,
    hcdr,
    stable_mean,
)

SAMPLE_COLUMNS = (
    "time", "q_h", "q_h_pert", "q_h_novel", "q_ha", "ai_use_rate", "skill_mean", "dependency_mean",
)
HCDR_WINDOWS = ("phase2", "phase2+3")


class Stream(enum.IntEnum):
    INIT = 0
    TASKS = 1
    BATTERY = 2


def stream(seed: int, purpose: Stream) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(purpose),)))


@dataclass(frozen=True)
class SimConfig:
    env: EnvSpec = field(default_factory=EnvSpec)
    dynamics: DynamicsConfig = field(default_factory=DynamicsConfig)
    regime: RegimeSpec = field(default_factory=RegimeSpec)
    n_agents: int = 1000
    phase_ticks: tuple[int, int, int] = (500, 2000, 500)
    eval_interval: int = 100
    eval_tasks: int = 50
    probe_tasks: int = 50
    final_window_fraction: float = 0.2
    hcdr_window: str = "phase2"
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "phase_ticks", tuple(int(x) for x in self.phase_ticks))
        if len(self.phase_ticks) != 3 or min(self.phase_ticks) <= 0:
            raise ConfigError(f"engine.phase_ticks must be three positive counts, got {self.phase_ticks}")
        for name in ("n_agents", "eval_interval", "eval_tasks", "probe_tasks"):
            if int(getattr(self, name)) <= 0:
                raise ConfigError(f"engine.{name} must be positive")
        if not 0.0 < self.final_window_fraction <= 1.0:
            raise ConfigError("engine.final_window_fraction must lie in (0, 1]")
        if self.hcdr_window not in HCDR_WINDOWS:
            raise ConfigError(f"engine.hcdr_window must be one of {HCDR_WINDOWS}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("engine.seed must be a 64-bit unsigned integer")
        if self.phase_ticks[1] < 2 * self.eval_interval and self.hcdr_window == "phase2":
            raise ConfigError("phase 2 must span at least two evaluation intervals")


@dataclass
class World:
    config: SimConfig
    population: Population
    tick: int = 0


@dataclass(frozen=True)
class TickRecord:
    n_tasks: int
    n_ai: int
    n_self: int
    self_score_sum: float

    @property
    def ai_fraction(self) -> float:
        return self.n_ai / self.n_tasks


@dataclass(frozen=True)
class EvalSample:
    time: int
    q_h: float
    q_h_pert: float
    q_h_novel: float
    q_ha: float
    ai_use_rate: float
    skill_mean: float
    dependency_mean: float


@dataclass(frozen=True)
class RunSummary:
    q_h: float
    q_ha: float
    skill_mean: float
    ai_use_rate: float
    q_h_pert: float
    q_h_novel: float
    dependency_mean: float
    metrics: MetricSet
    regime_label: RegimeLabel

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)[:7]}
        out["metrics"] = self.metrics.to_dict()
        out["regime_label"] = self.regime_label.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunSummary":
        scalars = {f.name: float(data[f.name]) for f in fields(cls)[:7]}
        return cls(
            **scalars,
            metrics=MetricSet(**{k: float(v) for k, v in data["metrics"].items()}),
            regime_label=RegimeLabel.from_dict(data["regime_label"]),
        )


@dataclass(frozen=True)
class RunResult:
    samples: list[EvalSample]
    summary: RunSummary

    def to_dict(self) -> dict:
        return {
            "samples": [asdict(s) for s in self.samples],
            "summary": self.summary.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunResult":
        return cls(
            [EvalSample(**s) for s in data["samples"]], RunSummary.from_dict(data["summary"])
        )


def make_world(config: SimConfig) -> World:
    pop = init_population(config.n_agents, config.env.k, stream(config.seed, Stream.INIT))
    return World(config, pop)


def step(world: World, ai_available: bool, env_now: EnvSpec, rng: np.random.Generator) -> TickRecord:
    """Give every agent one task and apply the resulting dynamics."""
    cfg = world.config
    pop = world.population
    n = len(pop)
    u = rng.random((n, task_width(env_now.k) + 1))
    used, scores = _kernels.step_population(
        pop.skills, pop.dependency, u, env_now, cfg.dynamics, cfg.regime.p_base, ai_available
    )
    pop.ai_use_count += used
    pop.task_count += 1
    world.tick += 1
    n_ai = int(np.count_nonzero(used))
    return TickRecord(n, n_ai, n - n_ai, float(np.sum(scores[~used])))


def _score_uniforms(world: World, env: EnvSpec, u: np.ndarray) -> float:
    skills = world.population.skills
    return float(np.mean(_kernels.score_tasks(skills, u, env, world.config.dynamics.gamma_diff)))


def _battery_score(world: World, env: EnvSpec, n_tasks: int, rng: np.random.Generator) -> float:
    if n_tasks < 1:
        raise ConfigError("evaluation needs at least one task per agent")
    u = rng.random((n_tasks, len(world.population), task_width(env.k)))
    return _score_uniforms(world, env, u)


def ai_off_eval(world: World, env_now: EnvSpec, n_tasks: int, rng: np.random.Generator) -> float:
    """Mean unaided performance over ``n_tasks`` fresh tasks per agent."""
    return _battery_score(world, env_now, n_tasks, rng)


def perturbation_probe(world: World, env_now: EnvSpec, n_tasks: int, rng: np.random.Generator) -> float:
    return _battery_score(world, perturbation_env(env_now), n_tasks, rng)


def novelty_probe(world: World, env_now: EnvSpec, n_tasks: int, rng: np.random.Generator) -> float:
    return _battery_score(world, novelty_env(env_now), n_tasks, rng)


class _HybridWindow:
    """Pools normal-operation task scores between two samples."""

    def __init__(self) -> None:
        self.n_tasks = self.n_ai = self.n_self = 0
        self.self_sum = 0.0

    def add(self, rec: TickRecord) -> None:
        self.n_tasks += rec.n_tasks
        self.n_ai += rec.n_ai
        self.n_self += rec.n_self
        self.self_sum += rec.self_score_sum

    def q_ha(self, q_a: float) -> float:
        frac = self.n_ai / self.n_tasks
        self_mean = self.self_sum / self.n_self if self.n_self else 0.0
        return q_a * frac + self_mean * (1.0 - frac)


def battery_uniforms(config: SimConfig) -> np.ndarray:
    """The run's fixed evaluation draws.

    Equal to what a fresh battery stream yields for ``n_tasks`` tasks when
    sliced to ``[:n_tasks]``, since draws fill the array in C order.
    """
    n_tasks = max(config.eval_tasks, config.probe_tasks)
    rng = stream(config.seed, Stream.BATTERY)
    return rng.random((n_tasks, config.n_agents, task_width(config.env.k)))


def _record(world: World, env_now: EnvSpec, window: _HybridWindow, battery: np.ndarray) -> EvalSample:
    cfg = world.config
    pop = world.population
    probe = battery[: cfg.probe_tasks]
    return EvalSample(
        time=world.tick,
        q_h=_score_uniforms(world, env_now, battery[: cfg.eval_tasks]),
        q_h_pert=_score_uniforms(world, perturbation_env(env_now), probe),
        q_h_novel=_score_uniforms(world, novelty_env(env_now), probe),
        q_ha=window.q_ha(cfg.dynamics.q_a),
        ai_use_rate=window.n_ai / window.n_tasks,
        skill_mean=float(np.mean(pop.skills)),
        dependency_mean=float(np.mean(pop.dependency)),
    )


def run(config: SimConfig) -> RunResult:
    world = make_world(config)
    rng = stream(config.seed, Stream.TASKS)
    p1, p2, p3 = config.phase_ticks
    for _ in range(p1):
        step(world, False, config.env, rng)

    battery = battery_uniforms(config)
    samples: list[EvalSample] = []
    window = _HybridWindow()
    for env_now, n_ticks in ((config.env, p2), (phase3_env(config.env), p3)):
        for _ in range(n_ticks):
            window.add(step(world, True, env_now, rng))
            if (world.tick - p1) % config.eval_interval == 0:
                samples.append(_record(world, env_now, window, battery))
                window = _HybridWindow()
    return RunResult(samples, summarize(samples, config))


def final_window(samples: list[EvalSample], fraction: float) -> list[EvalSample]:
    n = max(1, math.ceil(fraction * len(samples) - 1e-9))
    return samples[-n:]


def summarize(samples: list[EvalSample], config: SimConfig) -> RunSummary:
    if len(samples) < 2:
        raise MetricError("summary needs at least 2 evaluation samples")
    tail = final_window(samples, config.final_window_fraction)
    means = {
        name: stable_mean([getattr(s, name) for s in tail])
        for name in SAMPLE_COLUMNS[1:]
    }
    if config.hcdr_window == "phase2":
        horizon = config.phase_ticks[0] + config.phase_ticks[1]
        drift_series = [s for s in samples if s.time <= horizon]
    else:
        drift_series = samples
    drift = hcdr((s.time, s.q_h) for s in drift_series)
    triple = PerformanceTriple(means["q_h"], config.dynamics.q_a, means["q_ha"])
    metrics = compute_metrics(triple, drift)
    return RunSummary(
        q_h=means["q_h"],
        q_ha=means["q_ha"],
        skill_mean=means["skill_mean"],
        ai_use_rate=means["ai_use_rate"],
        q_h_pert=means["q_h_pert"],
        q_h_novel=means["q_h_novel"],
        dependency_mean=means["dependency_mean"],
        metrics=metrics,
        regime_label=classify_regime(metrics),
    )


def write_samples_csv(samples: list[EvalSample], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SAMPLE_COLUMNS)
        for s in samples:
            writer.writerow([s.time] + [f"{getattr(s, c):.6f}" for c in SAMPLE_COLUMNS[1:]])


def read_samples_csv(path: str | Path) -> list[EvalSample]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SAMPLE_COLUMNS:
            raise ValueError(f"unexpected sample columns {reader.fieldnames}")
        return [
            EvalSample(int(row["time"]), *(float(row[c]) for c in SAMPLE_COLUMNS[1:]))
            for row in reader
        ]

"""Agent state and micro-dynamics.

The scalar functions here define the per-agent rules. The engine applies the
same rules to whole populations through :mod:`cogamp._kernels`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .environment import Task

INIT_SKILL_RANGE = (0.25, 0.55)


class ConfigError(ValueError):
    """A configuration value violates a documented invariant."""


class RegimeName(str, enum.Enum):
    FULL_DELEGATION = "full_delegation"
    MINIMAL_AI = "minimal_ai"
    MIXED = "mixed"


_P_BASE = {RegimeName.FULL_DELEGATION: 1.0, RegimeName.MINIMAL_AI: 0.0, RegimeName.MIXED: 0.5}


@dataclass(frozen=True)
class RegimeSpec:
    name: RegimeName = RegimeName.MIXED

    def __post_init__(self) -> None:
        object.__setattr__(self, "name", RegimeName(self.name))

    @property
    def p_base(self) -> float:
        return _P_BASE[self.name]


@dataclass(frozen=True)
class DynamicsConfig:
    alpha_self: float = 0.05
    alpha_ai: float = 0.00105
    delta: float = 0.002
    sensitivity: float = 0.4
    w_effort: float = 0.3
    eta_dep: float = 0.05
    kappa_dep: float = 0.01
    gamma_diff: float = 0.3
    q_a: float = 1.0
    atrophy_scope: str = "active"

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha_ai < self.alpha_self:
            raise ConfigError(
                f"dynamics.alpha_ai: need 0 < alpha_ai < alpha_self, "
                f"got alpha_ai={self.alpha_ai}, alpha_self={self.alpha_self}"
            )
        for name in ("delta", "sensitivity", "w_effort", "eta_dep", "kappa_dep"):
            if getattr(self, name) < 0:
                raise ConfigError(f"dynamics.{name} must be nonnegative")
        for name in ("delta", "eta_dep", "kappa_dep", "gamma_diff", "q_a", "alpha_self"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"dynamics.{name} must lie in [0, 1]")
        if self.atrophy_scope not in ("active", "all"):
            raise ConfigError("dynamics.atrophy_scope must be 'active' or 'all'")


@dataclass
class AgentState:
    skills: np.ndarray
    dependency: float = 0.0
    ai_use_count: int = 0
    task_count: int = 0


@dataclass
class Population:
    """Struct-of-arrays storage for a whole population."""

    skills: np.ndarray
    dependency: np.ndarray
    ai_use_count: np.ndarray
    task_count: np.ndarray

    def __len__(self) -> int:
        return self.skills.shape[0]

    def __getitem__(self, i: int) -> AgentState:
        return AgentState(
            self.skills[i].copy(),
            float(self.dependency[i]),
            int(self.ai_use_count[i]),
            int(self.task_count[i]),
        )

    def copy(self) -> "Population":
        return Population(
            self.skills.copy(), self.dependency.copy(),
            self.ai_use_count.copy(), self.task_count.copy(),
        )

    def fingerprint(self) -> bytes:
        return b"".join(
            a.tobytes() for a in (self.skills, self.dependency, self.ai_use_count, self.task_count)
        )


def init_population(n: int, k: int, rng: np.random.Generator) -> Population:
    if n < 0 or k <= 0:
        raise ConfigError(f"population needs n >= 0 and k > 0, got n={n}, k={k}")
    lo, hi = INIT_SKILL_RANGE
    return Population(
        skills=lo + (hi - lo) * rng.random((n, k)),
        dependency=np.zeros(n),
        ai_use_count=np.zeros(n, dtype=np.int64),
        task_count=np.zeros(n, dtype=np.int64),
    )


def ai_use_probability(
    dependency: float, effort: float, regime: RegimeSpec, cfg: DynamicsConfig
) -> float:
    p = regime.p_base * (1.0 + cfg.sensitivity * dependency + cfg.w_effort * min(effort, 1.0))
    return min(max(p, 0.0), 1.0)


def decide_ai_use(
    agent: AgentState,
    effort: float,
    regime: RegimeSpec,
    cfg: DynamicsConfig,
    ai_available: bool,
    rng: np.random.Generator,
) -> bool:
    if not ai_available:
        return False
    return bool(rng.random() < ai_use_probability(agent.dependency, effort, regime, cfg))


def learn(skills: np.ndarray, task: Task, rate: float) -> np.ndarray:
    skills = np.asarray(skills, dtype=np.float64)
    if skills.shape != task.requirements.shape:
        raise ConfigError("dimension mismatch between skills and task")
    out = skills.copy()
    m = task.mask
    out[m] = skills[m] + rate * (1.0 - skills[m]) * task.requirements[m]
    return out


def atrophy(skills: np.ndarray, task: Task, delta: float, scope: str = "active") -> np.ndarray:
    out = np.array(skills, dtype=np.float64)
    m = task.mask if scope == "active" else np.ones_like(task.mask)
    out[m] = out[m] * (1.0 - delta)
    return out


def update_dependency(d: float, used_ai: bool, cfg: DynamicsConfig) -> float:
    if used_ai:
        return d + cfg.eta_dep * (1.0 - d)
    return d * (1.0 - cfg.kappa_dep)


def perform_self(skills: np.ndarray, task: Task, gamma_diff: float) -> float:
    k = task.requirements.shape[0]
    m = float(np.sum(np.maximum(0.0, task.requirements - np.asarray(skills))) / k)
    return min(max((1.0 - m) * (1.0 - gamma_diff * task.perturbed_difficulty), 0.0), 1.0)


def perform_hybrid(cfg: DynamicsConfig) -> float:
    return cfg.q_a

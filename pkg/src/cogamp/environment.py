"""Task generation: families, requirement vectors, difficulty and effort.

Every random task is built from one row of uniforms laid out as::

    [family, jitter, epsilon, mask keys (k), requirements (k)]

so the numpy path here and the compiled kernels consume the same draws and
agree exactly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np


class Family(enum.IntEnum):
    ANALYTICAL = 0
    DIAGNOSTIC = 1
    SEQUENTIAL = 2
    MIXED = 3


N_FAMILIES = len(Family)

DEFAULT_WEIGHTS = (0.30, 0.30, 0.30, 0.10)
PHASE3_WEIGHTS = (0.15, 0.15, 0.20, 0.50)
NOVELTY_WEIGHTS = (0.10, 0.10, 0.10, 0.70)
DEFAULT_BASE_DIFFICULTY = (0.40, 0.50, 0.50, 0.70)

# column offsets inside a uniform row
COL_FAMILY, COL_JITTER, COL_EPS, COL_KEYS = 0, 1, 2, 3


def task_width(k: int) -> int:
    return 3 + 2 * k


def default_masks(k: int) -> tuple[tuple[int, ...], ...]:
    """Disjoint contiguous blocks for the three fixed families."""
    return tuple(tuple(int(j) for j in block) for block in np.array_split(np.arange(k), 3))


class EnvError(ValueError):
    pass


def _check_weights(weights: Sequence[float], name: str) -> tuple[float, ...]:
    w = tuple(float(x) for x in weights)
    if len(w) != N_FAMILIES:
        raise EnvError(f"{name} needs {N_FAMILIES} entries, got {len(w)}")
    if any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-9:
        raise EnvError(f"{name} must be a probability vector, got {w}")
    return w


@dataclass(frozen=True)
class EnvSpec:
    k: int = 6
    family_weights: tuple[float, ...] = DEFAULT_WEIGHTS
    base_difficulty: tuple[float, ...] = DEFAULT_BASE_DIFFICULTY
    requirement_range: tuple[float, float] = (0.3, 0.9)
    difficulty_jitter: float = 0.15
    epsilon_max: float = 0.20
    lambda_m: float = 1.0
    lambda_c: float = 0.5
    mixed_size: int = 3
    family_masks: tuple[tuple[int, ...], ...] = field(default=())
    phase3_weights: tuple[float, ...] = PHASE3_WEIGHTS
    novelty_weights: tuple[float, ...] = NOVELTY_WEIGHTS

    def __post_init__(self) -> None:
        if self.k < 3:
            raise EnvError(f"k must be >= 3, got {self.k}")
        if not self.family_masks:
            object.__setattr__(self, "family_masks", default_masks(self.k))
        for name in ("family_weights", "phase3_weights", "novelty_weights"):
            object.__setattr__(self, name, _check_weights(getattr(self, name), name))
        if len(self.family_masks) != 3 or any(
            not m or any(not 0 <= j < self.k for j in m) for m in self.family_masks
        ):
            raise EnvError(f"family_masks must hold 3 nonempty index sets in [0, k)")
        if len(self.base_difficulty) != N_FAMILIES or any(
            not 0.0 <= c <= 1.0 for c in self.base_difficulty
        ):
            raise EnvError("base_difficulty needs 4 entries in [0, 1]")
        lo, hi = self.requirement_range
        if not 0.0 <= lo <= hi <= 1.0:
            raise EnvError(f"requirement_range must satisfy 0 <= lo <= hi <= 1, got {(lo, hi)}")
        for name in ("difficulty_jitter", "epsilon_max"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise EnvError(f"{name} must lie in [0, 1]")
        if self.lambda_m <= 0 or self.lambda_c <= 0:
            raise EnvError("effort weights lambda_m, lambda_c must be positive")
        if not 1 <= self.mixed_size <= self.k:
            raise EnvError("mixed_size must lie in [1, k]")

    @property
    def cum_weights(self) -> np.ndarray:
        cum = np.cumsum(np.asarray(self.family_weights, dtype=np.float64))
        cum[-1] = 1.0
        return cum

    @property
    def mask_matrix(self) -> np.ndarray:
        out = np.zeros((3, self.k), dtype=np.bool_)
        for f, dims in enumerate(self.family_masks):
            out[f, list(dims)] = True
        return out


@dataclass(frozen=True)
class Task:
    family: Family
    requirements: np.ndarray
    mask: np.ndarray
    nominal_difficulty: float
    perturbed_difficulty: float

    @property
    def active_dims(self) -> tuple[int, ...]:
        return tuple(int(j) for j in np.flatnonzero(self.mask))


@dataclass
class TaskBatch:
    """Struct-of-arrays view of many tasks; leading axes are arbitrary."""

    family: np.ndarray
    mask: np.ndarray
    requirements: np.ndarray
    nominal_difficulty: np.ndarray
    perturbed_difficulty: np.ndarray

    def task(self, idx) -> Task:
        return Task(
            Family(int(self.family[idx])),
            self.requirements[idx].copy(),
            self.mask[idx].copy(),
            float(self.nominal_difficulty[idx]),
            float(self.perturbed_difficulty[idx]),
        )


def mixed_masks(keys: np.ndarray, size: int) -> np.ndarray:
    """Mark the ``size`` smallest keys along the last axis (ties by index)."""
    k = keys.shape[-1]
    below = keys[..., None, :] < keys[..., :, None]
    idx = np.arange(k)
    tie = (keys[..., None, :] == keys[..., :, None]) & (idx[None, :] < idx[:, None])
    rank = np.sum(below | tie, axis=-1)
    return rank < size


def tasks_from_uniforms(env: EnvSpec, u: np.ndarray) -> TaskBatch:
    k = env.k
    if u.shape[-1] < task_width(k):
        raise EnvError(f"uniform rows need {task_width(k)} columns, got {u.shape[-1]}")
    family = np.minimum(np.searchsorted(env.cum_weights, u[..., COL_FAMILY], side="right"), 3)
    fixed = env.mask_matrix[np.minimum(family, 2)]
    mixed = mixed_masks(u[..., COL_KEYS:COL_KEYS + k], env.mixed_size)
    mask = np.where((family == Family.MIXED)[..., None], mixed, fixed)
    lo, hi = env.requirement_range
    req = np.where(mask, lo + (hi - lo) * u[..., COL_KEYS + k:COL_KEYS + 2 * k], 0.0)
    base = np.asarray(env.base_difficulty, dtype=np.float64)[family]
    c = np.clip(base + env.difficulty_jitter * (2.0 * u[..., COL_JITTER] - 1.0), 0.0, 1.0)
    c_tilde = np.minimum(c + env.epsilon_max * u[..., COL_EPS], 1.0)
    return TaskBatch(family, mask, req, c, c_tilde)


def sample_tasks(env: EnvSpec, rng: np.random.Generator, shape: int | tuple[int, ...]) -> TaskBatch:
    if isinstance(shape, int):
        shape = (shape,)
    return tasks_from_uniforms(env, rng.random((*shape, task_width(env.k))))


def sample_task(env: EnvSpec, rng: np.random.Generator) -> Task:
    return sample_tasks(env, rng, 1).task(0)


def perturb(c: float, env: EnvSpec, rng: np.random.Generator) -> float:
    """Add a one-sided uniform complication in [0, epsilon_max], clamped to 1."""
    return min(c + env.epsilon_max * rng.random(), 1.0)


def mismatch(skills: np.ndarray, task: Task) -> float:
    skills = np.asarray(skills, dtype=np.float64)
    if skills.shape != task.requirements.shape:
        raise EnvError(
            f"dimension mismatch: skills {skills.shape} vs requirements {task.requirements.shape}"
        )
    k = skills.shape[0]
    return float(np.sum(np.maximum(0.0, task.requirements - skills)) / k)


def effort(m: float, c_tilde: float, env: EnvSpec) -> float:
    return env.lambda_m * m + env.lambda_c * c_tilde


def shifted_env(env: EnvSpec, shift: Sequence[float]) -> EnvSpec:
    return replace(env, family_weights=_check_weights(shift, "shift"))


def phase3_env(env: EnvSpec) -> EnvSpec:
    return shifted_env(env, env.phase3_weights)


def novelty_env(env: EnvSpec) -> EnvSpec:
    """Analytical and Sequential masks swapped, weights set to the novelty mix."""
    a, d, s = env.family_masks
    return replace(env, family_masks=(s, d, a), family_weights=env.novelty_weights)


def perturbation_env(env: EnvSpec) -> EnvSpec:
    return replace(env, epsilon_max=min(2.0 * env.epsilon_max, 1.0))

"""Hot population kernels with a compiled path and a pure-numpy fallback.

Set ``COGAMP_DISABLE_NUMBA=1`` (or lack numba) to use the numpy path. Both
paths consume identical uniform draws and apply identical float operations
in the same order, so results agree bit for bit.
"""

from __future__ import annotations

import os

import numpy as np

from .agents import DynamicsConfig
from .environment import COL_EPS, COL_FAMILY, COL_JITTER, COL_KEYS, EnvSpec, tasks_from_uniforms

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    njit = None

_disabled = os.environ.get("COGAMP_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")
_backend = "numpy" if (_disabled or njit is None) else "numba"


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    global _backend
    if name not in ("numpy", "numba"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and njit is None:
        raise RuntimeError("numba is not installed")
    _backend = name


# ---------------------------------------------------------------- numpy path


def _step_numpy(skills, dependency, u, env: EnvSpec, dyn: DynamicsConfig, p_base, ai_available):
    k = env.k
    tasks = tasks_from_uniforms(env, u)
    req, c_tilde = tasks.requirements, tasks.perturbed_difficulty
    m = np.sum(np.maximum(0.0, req - skills), axis=-1) / k
    e = env.lambda_m * m + env.lambda_c * c_tilde
    p = p_base * (1.0 + dyn.sensitivity * dependency + dyn.w_effort * np.minimum(e, 1.0))
    p = np.minimum(np.maximum(p, 0.0), 1.0)
    if ai_available:
        used = u[:, 3 + 2 * k] < p
    else:
        used = np.zeros(skills.shape[0], dtype=np.bool_)
    perf = np.minimum(np.maximum((1.0 - m) * (1.0 - dyn.gamma_diff * c_tilde), 0.0), 1.0)
    scores = np.where(used, dyn.q_a, perf)
    rate = np.where(used, dyn.alpha_ai, dyn.alpha_self)[:, None]
    skills[...] = np.where(tasks.mask, skills + rate * (1.0 - skills) * req, skills)
    if dyn.delta > 0.0:
        scope = tasks.mask if dyn.atrophy_scope == "active" else True
        skills[...] = np.where(used[:, None] & scope, skills * (1.0 - dyn.delta), skills)
    dependency[...] = np.where(
        used, dependency + dyn.eta_dep * (1.0 - dependency), dependency * (1.0 - dyn.kappa_dep)
    )
    return used, scores


def _score_numpy(skills, u, env: EnvSpec, gamma):
    tasks = tasks_from_uniforms(env, u)
    m = np.sum(np.maximum(0.0, tasks.requirements - skills), axis=-1) / env.k
    return np.minimum(
        np.maximum((1.0 - m) * (1.0 - gamma * tasks.perturbed_difficulty), 0.0), 1.0
    )


# ---------------------------------------------------------------- numba path

if njit is not None:

    @njit(cache=True)
    def _task_nb(u, r, k, cum, base, masks, mixed_size, req_lo, req_hi, jitter, eps_max, req, mask):
        f = 0
        while f < 3 and u[r, COL_FAMILY] >= cum[f]:
            f += 1
        if f == 3:
            for j in range(k):
                kj = u[r, COL_KEYS + j]
                rank = 0
                for i in range(k):
                    ki = u[r, COL_KEYS + i]
                    if ki < kj or (ki == kj and i < j):
                        rank += 1
                mask[j] = rank < mixed_size
        else:
            for j in range(k):
                mask[j] = masks[f, j]
        for j in range(k):
            if mask[j]:
                req[j] = req_lo + (req_hi - req_lo) * u[r, COL_KEYS + k + j]
            else:
                req[j] = 0.0
        c = base[f] + jitter * (2.0 * u[r, COL_JITTER] - 1.0)
        c = min(max(c, 0.0), 1.0)
        return min(c + eps_max * u[r, COL_EPS], 1.0)

    @njit(cache=True)
    def _mismatch_nb(skills, i, req, k):
        acc = 0.0
        for j in range(k):
            x = req[j] - skills[i, j]
            if x > 0.0:
                acc += x
        return acc / k

    @njit(cache=True)
    def _step_nb(
        skills, dependency, u, cum, base, masks, mixed_size, req_lo, req_hi, jitter, eps_max,
        lambda_m, lambda_c, ai_available, p_base, sensitivity, w_effort, alpha_self, alpha_ai,
        delta, atrophy_all, eta_dep, kappa_dep, gamma, q_a, used, scores,
    ):
        n, k = skills.shape
        req = np.empty(k)
        mask = np.empty(k, dtype=np.bool_)
        for i in range(n):
            c_tilde = _task_nb(
                u, i, k, cum, base, masks, mixed_size, req_lo, req_hi, jitter, eps_max, req, mask
            )
            m = _mismatch_nb(skills, i, req, k)
            e = lambda_m * m + lambda_c * c_tilde
            p = p_base * (1.0 + sensitivity * dependency[i] + w_effort * min(e, 1.0))
            p = min(max(p, 0.0), 1.0)
            use = ai_available and u[i, 3 + 2 * k] < p
            used[i] = use
            if use:
                scores[i] = q_a
                rate = alpha_ai
            else:
                scores[i] = min(max((1.0 - m) * (1.0 - gamma * c_tilde), 0.0), 1.0)
                rate = alpha_self
            for j in range(k):
                if mask[j]:
                    skills[i, j] = skills[i, j] + rate * (1.0 - skills[i, j]) * req[j]
            if use and delta > 0.0:
                for j in range(k):
                    if mask[j] or atrophy_all:
                        skills[i, j] = skills[i, j] * (1.0 - delta)
            if use:
                dependency[i] = dependency[i] + eta_dep * (1.0 - dependency[i])
            else:
                dependency[i] = dependency[i] * (1.0 - kappa_dep)

    @njit(cache=True)
    def _score_nb(
        skills, u, cum, base, masks, mixed_size, req_lo, req_hi, jitter, eps_max, gamma, out
    ):
        n, k = skills.shape
        req = np.empty(k)
        mask = np.empty(k, dtype=np.bool_)
        for r in range(u.shape[0]):
            i = r % n
            c_tilde = _task_nb(
                u, r, k, cum, base, masks, mixed_size, req_lo, req_hi, jitter, eps_max, req, mask
            )
            m = _mismatch_nb(skills, i, req, k)
            out[r] = min(max((1.0 - m) * (1.0 - gamma * c_tilde), 0.0), 1.0)


def _env_args(env: EnvSpec):
    lo, hi = env.requirement_range
    return (
        env.cum_weights,
        np.asarray(env.base_difficulty, dtype=np.float64),
        env.mask_matrix,
        env.mixed_size,
        float(lo),
        float(hi),
        float(env.difficulty_jitter),
        float(env.epsilon_max),
    )


# ---------------------------------------------------------------- dispatch


def step_population(
    skills: np.ndarray,
    dependency: np.ndarray,
    u: np.ndarray,
    env: EnvSpec,
    dyn: DynamicsConfig,
    p_base: float,
    ai_available: bool,
) -> tuple[np.ndarray, np.ndarray]:
    """Advance every agent by one task, in place.

    ``u`` has one row of ``3 + 2k + 1`` uniforms per agent; the last column
    drives the AI-use decision. Returns per-agent (used_ai, score).
    """
    if _backend == "numpy":
        return _step_numpy(skills, dependency, u, env, dyn, p_base, ai_available)
    n = skills.shape[0]
    used = np.empty(n, dtype=np.bool_)
    scores = np.empty(n)
    _step_nb(
        skills, dependency, u, *_env_args(env), float(env.lambda_m), float(env.lambda_c),
        bool(ai_available), float(p_base), float(dyn.sensitivity), float(dyn.w_effort),
        float(dyn.alpha_self), float(dyn.alpha_ai), float(dyn.delta),
        dyn.atrophy_scope == "all", float(dyn.eta_dep), float(dyn.kappa_dep),
        float(dyn.gamma_diff), float(dyn.q_a), used, scores,
    )
    return used, scores


def score_tasks(skills: np.ndarray, u: np.ndarray, env: EnvSpec, gamma: float) -> np.ndarray:
    """Unaided performance of agent ``i`` on task row ``u[t, i]``; shape (T, N)."""
    if _backend == "numpy":
        return _score_numpy(skills, u, env, gamma)
    flat = np.ascontiguousarray(u).reshape(-1, u.shape[-1])
    out = np.empty(flat.shape[0])
    _score_nb(skills, flat, *_env_args(env), float(gamma), out)
    return out.reshape(u.shape[:2])

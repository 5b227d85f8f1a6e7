"""Compare the numba and numpy kernel backends.

Times one population step, one evaluation battery and one full run per
backend, and checks that both backends return bit-identical results.

    python benchmarks/bench_kernels.py [--agents 1000] [--repeat 5]
"""

import argparse
import time

import numpy as np

from cogamp import _kernels
from cogamp.agents import DynamicsConfig, init_population
from cogamp.engine import SimConfig, run
from cogamp.environment import EnvSpec, task_width


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_step(n, repeat):
    rng = np.random.default_rng(0)
    env, dyn = EnvSpec(), DynamicsConfig()
    pop = init_population(n, env.k, rng)
    u = rng.random((n, task_width(env.k) + 1))

    def go():
        s, d = pop.skills.copy(), pop.dependency.copy()
        used, scores = _kernels.step_population(s, d, u, env, dyn, 0.5, True)
        return s.tobytes() + d.tobytes() + used.tobytes() + scores.tobytes()

    return best_of(go, repeat)


def bench_score(n, repeat):
    rng = np.random.default_rng(1)
    env = EnvSpec()
    skills = rng.random((n, env.k))
    u = rng.random((50, n, task_width(env.k)))
    return best_of(lambda: _kernels.score_tasks(skills, u, env, 0.3).tobytes(), repeat)


def bench_run(n, repeat):
    cfg = SimConfig(n_agents=n, phase_ticks=(250, 1000, 250), seed=3)
    return best_of(lambda: repr(run(cfg).to_dict()).encode(), repeat)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--agents", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    cases = [("step (1 tick)", bench_step), ("battery (50 tasks/agent)", bench_score),
             ("run (half-length)", bench_run)]
    print(f"agents={args.agents} repeat={args.repeat} (best time)")
    print(f"{'case':<26}{'numpy':>12}{'numba':>12}{'speedup':>10}  identical")
    for name, fn in cases:
        res = {}
        for backend in ("numba", "numpy"):
            _kernels.set_backend(backend)
            fn(args.agents, 1)  # warm up / compile
            reps = 1 if fn is bench_run else args.repeat
            res[backend] = fn(args.agents, reps)
        same = res["numba"][1] == res["numpy"][1]
        t_np, t_nb = res["numpy"][0], res["numba"][0]
        print(f"{name:<26}{t_np * 1e3:>10.2f}ms{t_nb * 1e3:>10.2f}ms{t_np / t_nb:>9.1f}x  {same}")


if __name__ == "__main__":
    main()

import json
from dataclasses import replace

import numpy as np
import pytest

from cogamp import _kernels
from cogamp.agents import ConfigError, DynamicsConfig, RegimeName, RegimeSpec
from cogamp.engine import (
    SAMPLE_COLUMNS,
    EvalSample,
    RunResult,
    SimConfig,
    Stream,
    ai_off_eval,
    battery_uniforms,
    make_world,
    novelty_probe,
    perturbation_probe,
    read_samples_csv,
    run,
    step,
    stream,
    summarize,
    write_samples_csv,
)
from cogamp.environment import EnvSpec, perturbation_env, task_width
from cogamp.metrics import MetricError


def small(regime=RegimeName.MIXED, **kw) -> SimConfig:
    base = dict(
        n_agents=200, phase_ticks=(100, 400, 100), eval_interval=50, eval_tasks=10,
        probe_tasks=10, seed=17,
    )
    base.update(kw)
    return SimConfig(regime=RegimeSpec(regime), **base)


def sample(t, v, **kw):
    vals = dict(q_h=v, q_h_pert=v, q_h_novel=v, q_ha=v, ai_use_rate=v, skill_mean=v, dependency_mean=v)
    vals.update(kw)
    return EvalSample(time=t, **vals)


# ---------------------------------------------------------------- step


def test_step_regime_contracts():
    for regime, frac in ((RegimeName.MINIMAL_AI, 0.0), (RegimeName.FULL_DELEGATION, 1.0)):
        world = make_world(small(regime))
        rng = stream(0, Stream.TASKS)
        for _ in range(30):
            rec = step(world, True, world.config.env, rng)
            assert rec.ai_fraction == frac
        pop = world.population
        if frac == 1.0:
            assert np.array_equal(pop.ai_use_count, pop.task_count)
            assert rec.n_self == 0 and rec.self_score_sum == 0.0
        else:
            assert not pop.ai_use_count.any()
        assert np.all(pop.task_count == 30)


def test_full_delegation_tick_score_is_q_a():
    cfg = small(RegimeName.FULL_DELEGATION)
    world = make_world(cfg)
    pop = world.population
    u = np.random.default_rng(0).random((len(pop), task_width(6) + 1))
    used, scores = _kernels.step_population(
        pop.skills, pop.dependency, u, cfg.env, cfg.dynamics, 1.0, True
    )
    assert used.all() and np.all(scores == cfg.dynamics.q_a)


def test_step_deterministic():
    recs = []
    for _ in range(2):
        world = make_world(small())
        rng = stream(5, Stream.TASKS)
        recs.append([step(world, True, world.config.env, rng) for _ in range(20)])
    assert recs[0] == recs[1]


def test_phase1_skill_nondecreasing():
    world = make_world(small())
    rng = stream(1, Stream.TASKS)
    prev = world.population.skills.copy()
    for _ in range(200):
        step(world, False, world.config.env, rng)
        cur = world.population.skills
        assert np.all(cur >= prev)
        assert cur.mean() >= prev.mean()
        prev = cur.copy()


# ---------------------------------------------------------------- probes


@pytest.mark.parametrize("probe", [ai_off_eval, perturbation_probe, novelty_probe])
def test_probes_are_pure(probe):
    world = make_world(small())
    rng = stream(2, Stream.TASKS)
    for _ in range(10):
        step(world, True, world.config.env, rng)
    before = (world.population.fingerprint(), world.tick)
    probe(world, world.config.env, 20, np.random.default_rng(3))
    assert (world.population.fingerprint(), world.tick) == before


def test_ai_off_ceiling():
    env = EnvSpec(base_difficulty=(0, 0, 0, 0), difficulty_jitter=0.0, epsilon_max=0.0)
    world = make_world(small(env=env))
    world.population.skills[:] = 1.0
    assert ai_off_eval(world, env, 5, np.random.default_rng(0)) == 1.0


def test_ai_off_closed_form_on_collapsed_env():
    env = EnvSpec(
        family_weights=(1, 0, 0, 0), requirement_range=(0.5, 0.5), difficulty_jitter=0.0,
        epsilon_max=0.0,
    )
    world = make_world(small(env=env))
    world.population.skills[:] = 0.0
    mean_r = 2 * 0.5 / 6
    want = (1 - mean_r) * (1 - 0.3 * 0.4)
    got = ai_off_eval(world, env, 5, np.random.default_rng(0))
    assert got == pytest.approx(want, abs=1e-12)


def test_probes_degenerate_to_ai_off():
    env = EnvSpec(
        epsilon_max=0.0, family_masks=((0, 1), (2, 3), (0, 1)),
        novelty_weights=(0.3, 0.3, 0.3, 0.1),
    )
    world = make_world(small(env=env))
    base = ai_off_eval(world, env, 10, np.random.default_rng(4))
    assert perturbation_probe(world, env, 10, np.random.default_rng(4)) == base
    assert novelty_probe(world, env, 10, np.random.default_rng(4)) == base


def test_perturbation_lowers_score_paired():
    world = make_world(small())
    env = world.config.env
    u = np.random.default_rng(6).random((20, len(world.population), task_width(6)))
    plain = _kernels.score_tasks(world.population.skills, u, env, 0.3)
    pert = _kernels.score_tasks(world.population.skills, u, perturbation_env(env), 0.3)
    diff = (plain - pert).ravel()
    se = diff.std(ddof=1) / np.sqrt(diff.size)
    assert diff.mean() >= -3 * se
    assert diff.mean() > 0


def test_battery_is_prefix_of_fresh_stream():
    cfg = small(eval_tasks=7, probe_tasks=12)
    bat = battery_uniforms(cfg)
    fresh = stream(cfg.seed, Stream.BATTERY).random((7, cfg.n_agents, task_width(6)))
    assert np.array_equal(bat[:7], fresh)


# ---------------------------------------------------------------- run


def test_run_deterministic():
    a, b = run(small()), run(small())
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())


def test_run_backend_invariant():
    old = _kernels.get_backend()
    try:
        _kernels.set_backend("numpy")
        a = run(small())
        _kernels.set_backend("numba")
        b = run(small())
    finally:
        _kernels.set_backend(old)
    assert a.to_dict() == b.to_dict()


def test_sample_schedule():
    res = run(small())
    times = [s.time for s in res.samples]
    assert times == list(range(150, 601, 50))
    for s in res.samples:
        for c in SAMPLE_COLUMNS[1:]:
            assert 0.0 <= getattr(s, c) <= 1.0


def test_full_delegation_run_exact():
    for sens, delta in ((0.2, 0.004), (0.6, 0.003), (0.4, 0.002)):
        dyn = DynamicsConfig(sensitivity=sens, delta=delta)
        res = run(small(RegimeName.FULL_DELEGATION, dynamics=dyn))
        m = res.summary.metrics
        assert (m.cai_star, m.d, m.hri) == (0.0, 1.0, 0.0)
        assert res.summary.q_ha == 1.0 and res.summary.ai_use_rate == 1.0


def test_full_delegation_collapses_skill_and_novelty():
    cfg = small(RegimeName.FULL_DELEGATION, phase_ticks=(500, 2000, 500), eval_interval=100)
    init = make_world(cfg).population.skills.mean()
    res = run(cfg)
    assert res.summary.skill_mean < init
    last = res.samples[-1]
    assert res.summary.q_h_novel <= res.summary.q_h + 0.01
    assert last.q_h_novel <= last.q_h + 0.01


def test_minimal_ai_run():
    res = run(small(RegimeName.MINIMAL_AI))
    s = res.summary
    assert s.ai_use_rate == 0.0
    assert s.q_ha == pytest.approx(s.q_h, abs=0.02)
    assert s.metrics.d > 1.0


def test_mixed_q_ha_between():
    s = run(small()).summary
    assert 0.0 < s.ai_use_rate < 1.0
    assert s.q_h < s.q_ha < 1.0


def test_result_round_trip(tmp_path):
    res = run(small())
    again = RunResult.from_dict(json.loads(json.dumps(res.to_dict())))
    assert again == res
    path = tmp_path / "s.csv"
    write_samples_csv(res.samples, path)
    header = path.read_text().splitlines()[0]
    assert header == "time,q_h,q_h_pert,q_h_novel,q_ha,ai_use_rate,skill_mean,dependency_mean"
    back = read_samples_csv(path)
    for a, b in zip(back, res.samples):
        assert a.time == b.time
        for c in SAMPLE_COLUMNS[1:]:
            assert abs(getattr(a, c) - getattr(b, c)) <= 5e-7


# ---------------------------------------------------------------- summarize


def test_summarize_constant_series():
    cfg = small(final_window_fraction=0.2)
    samples = [sample(t, 0.6) for t in range(150, 601, 50)]
    s = summarize(samples, cfg)
    assert s.q_h == 0.6 and s.q_ha == 0.6 and s.skill_mean == 0.6
    assert s.metrics.hcdr == 0.0


def test_summarize_two_samples_is_difference_quotient():
    cfg = small(phase_ticks=(100, 100, 100))
    s = summarize([sample(150, 0.6), sample(200, 0.58)], replace(cfg, hcdr_window="phase2+3"))
    assert s.metrics.hcdr == pytest.approx(-0.02 / 50, abs=1e-15)


def test_summarize_window_fraction_one():
    cfg = small(final_window_fraction=1.0)
    samples = [sample(150 + 50 * i, 0.5, q_ha=0.5 + 0.01 * i) for i in range(10)]
    assert summarize(samples, cfg).q_ha == pytest.approx(0.545, abs=1e-12)
    cfg = small(final_window_fraction=0.2)
    assert summarize(samples, cfg).q_ha == pytest.approx(0.585, abs=1e-12)


def test_summarize_hcdr_window():
    samples = [sample(100 + 50 * i, 0.8 - (0.01 * max(0, i - 8))) for i in range(1, 11)]
    p2 = summarize(samples, small())
    p23 = summarize(samples, small(hcdr_window="phase2+3"))
    assert p2.metrics.hcdr == 0.0
    assert p23.metrics.hcdr < 0.0


def test_summarize_needs_two_samples():
    with pytest.raises(MetricError):
        summarize([sample(150, 0.5)], small())


@pytest.mark.parametrize(
    "kwargs",
    [
        {"phase_ticks": (0, 10, 10)},
        {"phase_ticks": (10, 10)},
        {"n_agents": 0},
        {"final_window_fraction": 0.0},
        {"final_window_fraction": 1.5},
        {"hcdr_window": "all"},
        {"seed": -1},
    ],
)
def test_sim_config_validation(kwargs):
    with pytest.raises(ConfigError):
        small(**kwargs)

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cogamp.environment import (
    EnvError,
    EnvSpec,
    Family,
    Task,
    effort,
    mismatch,
    mixed_masks,
    novelty_env,
    perturb,
    perturbation_env,
    phase3_env,
    sample_task,
    sample_tasks,
    shifted_env,
    tasks_from_uniforms,
    task_width,
)


def make_task(req, mask=None, c=0.5, c_tilde=0.5):
    req = np.asarray(req, dtype=float)
    mask = req > 0 if mask is None else np.asarray(mask, dtype=bool)
    return Task(Family.MIXED, req, mask, c, c_tilde)


def test_default_masks_are_disjoint_pairs():
    assert EnvSpec().family_masks == ((0, 1), (2, 3), (4, 5))


def test_degenerate_env():
    env = EnvSpec(
        family_weights=(1, 0, 0, 0), requirement_range=(0.5, 0.5), difficulty_jitter=0.0,
        epsilon_max=0.0,
    )
    rng = np.random.default_rng(0)
    for _ in range(200):
        t = sample_task(env, rng)
        assert t.family is Family.ANALYTICAL
        assert t.nominal_difficulty == 0.4
        np.testing.assert_array_equal(t.requirements, [0.5, 0.5, 0, 0, 0, 0])


def test_family_frequencies_within_3_sigma():
    env = EnvSpec()
    n = 100_000
    fam = sample_tasks(env, np.random.default_rng(11), n).family
    for f, w in enumerate(env.family_weights):
        sigma = np.sqrt(n * w * (1 - w))
        assert abs(np.count_nonzero(fam == f) - n * w) <= 3 * sigma


def test_task_invariants_hold():
    env = EnvSpec()
    b = sample_tasks(env, np.random.default_rng(5), 20_000)
    assert np.all(b.requirements[~b.mask] == 0.0)
    active = b.requirements[b.mask]
    assert np.all((active >= 0.3) & (active <= 0.9))
    assert np.all((b.perturbed_difficulty >= 0) & (b.perturbed_difficulty <= 1))
    assert np.all(b.perturbed_difficulty >= b.nominal_difficulty)
    assert np.all(b.perturbed_difficulty - b.nominal_difficulty <= env.epsilon_max + 1e-15)
    sizes = b.mask.sum(axis=1)
    assert np.all(sizes[b.family == Family.MIXED] == 3)
    assert np.all(sizes[b.family != Family.MIXED] == 2)
    for f in range(3):
        rows = b.mask[b.family == f]
        assert np.all(rows == env.mask_matrix[f])


def test_tasks_match_scalar_construction():
    env = EnvSpec()
    k = env.k
    u = np.random.default_rng(3).random((500, task_width(k)))
    b = tasks_from_uniforms(env, u)
    cum = np.cumsum(env.family_weights)
    for i, row in enumerate(u):
        fam = next(f for f in range(4) if row[0] < cum[f]) if row[0] < cum[-1] else 3
        assert b.family[i] == fam
        if fam == 3:
            dims = sorted(range(k), key=lambda j: (row[3 + j], j))[:3]
        else:
            dims = env.family_masks[fam]
        assert set(np.flatnonzero(b.mask[i])) == set(dims)
        c = min(max(env.base_difficulty[fam] + 0.15 * (2 * row[1] - 1), 0.0), 1.0)
        assert b.nominal_difficulty[i] == pytest.approx(c, abs=1e-15)
        assert b.perturbed_difficulty[i] == pytest.approx(min(c + 0.2 * row[2], 1.0), abs=1e-15)
        for j in range(k):
            want = 0.3 + 0.6 * row[3 + k + j] if j in dims else 0.0
            assert b.requirements[i, j] == pytest.approx(want, abs=1e-15)


def test_mixed_masks_ties_by_index():
    keys = np.array([[0.5, 0.5, 0.5, 0.5, 0.1, 0.9]])
    np.testing.assert_array_equal(mixed_masks(keys, 3)[0], [1, 1, 0, 0, 1, 0])


def test_sampling_is_deterministic():
    env = EnvSpec()
    a = sample_tasks(env, np.random.default_rng(42), 1000)
    b = sample_tasks(env, np.random.default_rng(42), 1000)
    for name in ("family", "mask", "requirements", "nominal_difficulty", "perturbed_difficulty"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


def test_perturb_examples():
    rng = np.random.default_rng(1)
    assert perturb(0.37, EnvSpec(epsilon_max=0.0), rng) == 0.37
    assert perturb(1.0, EnvSpec(), rng) == 1.0
    env = EnvSpec(epsilon_max=0.2)
    draws = np.array([perturb(0.5, env, rng) for _ in range(100_000)])
    assert 0.595 <= draws.mean() <= 0.605
    assert draws.min() >= 0.5 and draws.max() <= 0.7


@given(st.floats(0, 1), st.floats(0, 1), st.integers(0, 2**32 - 1))
def test_perturb_bounds(c, eps, seed):
    out = perturb(c, EnvSpec(epsilon_max=eps), np.random.default_rng(seed))
    assert c <= out <= 1.0


def test_mismatch_examples():
    t = make_task([0.7, 0.1])
    assert mismatch(np.array([0.5, 0.2]), t) == pytest.approx(0.1, abs=1e-15)
    assert mismatch(np.array([0.9, 0.9]), t) == 0.0
    assert mismatch(np.zeros(6), make_task(np.ones(6))) == 1.0
    with pytest.raises(EnvError):
        mismatch(np.zeros(3), t)


def test_mismatch_and_effort_brute_force():
    rng = np.random.default_rng(2024)
    env = EnvSpec()
    for _ in range(10_000):
        k = int(rng.integers(1, 9))
        s = rng.random(k)
        mask = rng.random(k) < 0.5
        r = np.where(mask, rng.random(k), 0.0)
        t = make_task(r, mask)
        total = 0.0
        for j in range(k):
            gap = r[j] - s[j]
            if gap > 0:
                total += gap
        want = total / k
        got = mismatch(s, t)
        assert abs(got - want) <= 1e-12
        assert 0.0 <= got <= 1.0
        c = rng.random()
        assert abs(effort(got, c, env) - (1.0 * want + 0.5 * c)) <= 1e-12


@given(
    st.lists(st.floats(0, 1), min_size=6, max_size=6),
    st.lists(st.floats(0, 1), min_size=6, max_size=6),
    st.integers(0, 5), st.floats(0, 1),
)
def test_mismatch_monotonicity(s, r, j, bump):
    s, r = np.array(s), np.array(r)
    t = make_task(r, np.ones(6, bool))
    s2 = s.copy()
    s2[j] = max(s[j], bump)
    assert mismatch(s2, t) <= mismatch(s, t)
    r2 = r.copy()
    r2[j] = max(r[j], bump)
    assert mismatch(s, make_task(r2, np.ones(6, bool))) >= mismatch(s, t)


def test_effort_examples():
    env = EnvSpec()
    assert effort(0.0, 0.0, env) == 0.0
    assert effort(0.1, 0.6, env) == pytest.approx(0.4, abs=1e-15)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_effort_monotone_and_zero(m1, m2, c1, c2):
    env = EnvSpec()
    lo_m, hi_m = sorted((m1, m2))
    lo_c, hi_c = sorted((c1, c2))
    assert effort(lo_m, lo_c, env) <= effort(hi_m, hi_c, env)
    assert (effort(m1, c1, env) == 0.0) == (m1 == 0.0 and c1 == 0.0)


def test_shifted_env():
    env = EnvSpec()
    assert shifted_env(env, env.family_weights) == env
    p3 = phase3_env(env)
    assert p3.family_weights == (0.15, 0.15, 0.20, 0.50)
    assert p3.family_weights[Family.MIXED] == 0.5 and env.family_weights[Family.MIXED] == 0.1
    assert p3.family_masks == env.family_masks and p3.epsilon_max == env.epsilon_max
    EnvSpec(**{f: getattr(p3, f) for f in p3.__dataclass_fields__})
    with pytest.raises(EnvError):
        shifted_env(env, (0.5, 0.5, 0.5, 0.0))
    with pytest.raises(EnvError):
        shifted_env(env, (1.0, 0.0, 0.0))


def test_probe_envs():
    env = EnvSpec()
    nov = novelty_env(env)
    assert nov.family_masks == ((4, 5), (2, 3), (0, 1))
    assert nov.family_weights == (0.1, 0.1, 0.1, 0.7)
    assert perturbation_env(env).epsilon_max == 0.4
    assert perturbation_env(EnvSpec(epsilon_max=0.7)).epsilon_max == 1.0


@pytest.mark.parametrize(
    "kwargs",
    [
        {"k": 2},
        {"family_weights": (0.5, 0.5, 0.5, 0.5)},
        {"requirement_range": (0.9, 0.3)},
        {"lambda_m": 0.0},
        {"epsilon_max": 1.5},
        {"base_difficulty": (0.4, 0.5, 0.5)},
    ],
)
def test_env_validation(kwargs):
    with pytest.raises(EnvError):
        EnvSpec(**kwargs)


def test_other_k():
    env = EnvSpec(k=7)
    assert env.family_masks == ((0, 1, 2), (3, 4), (5, 6))
    b = sample_tasks(env, np.random.default_rng(0), 100)
    assert b.requirements.shape == (100, 7)

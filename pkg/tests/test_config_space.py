import random
from collections import Counter

import pytest
from hypothesis import given, strategies as st

from splitopt.config_space import (
    AXES,
    ArchPolicy,
    ConfigError,
    Configuration,
    ParameterSpace,
    enumerate_space,
    load_space_and_policy,
    mutate_one_axis,
    sample_uniform,
    uniform_crossover,
)

SINGLETON = ParameterSpace((8,), (3,), (32,), (1,))


def test_default_axes_match_experimental_grid(space):
    assert space.filters == (8, 16, 32, 64, 128, 256)
    assert space.kernels == tuple(range(2, 10))
    assert space.latent_dims == (32, 64, 128, 256, 512)
    assert space.splits == tuple(range(1, 7))


def test_enumerate_default_space(space):
    configs = list(enumerate_space(space))
    assert len(configs) == 6 * 8 * 5 * 6 == 1440 == space.size
    assert len(set(configs)) == 1440
    assert configs == sorted(configs)
    assert configs[0] == Configuration(8, 2, 32, 1)
    assert configs[-1] == Configuration(256, 9, 512, 6)


def test_enumerate_singleton():
    assert list(enumerate_space(SINGLETON)) == [Configuration(8, 3, 32, 1)]


@pytest.mark.parametrize("kwargs", [
    {"filters": ()},
    {"kernels": (3, 2)},
    {"latent_dims": (32, 32)},
    {"splits": (0, 1)},
    {"filters": (8, -16)},
])
def test_invalid_space_rejected(kwargs):
    with pytest.raises(ConfigError):
        ParameterSpace(**kwargs)


def test_sample_singleton_any_seed():
    for seed in range(5):
        assert sample_uniform(SINGLETON, random.Random(seed)) == Configuration(8, 3, 32, 1)


def test_sample_is_deterministic(space):
    assert sample_uniform(space, random.Random(11)) == sample_uniform(space, random.Random(11))


def test_sample_frequencies_uniform(space):
    rng = random.Random(0)
    n = 100_000
    draws = [sample_uniform(space, rng) for _ in range(n)]
    for axis in AXES:
        values = space.axis_values(axis)
        counts = Counter(getattr(c, axis) for c in draws)
        p = 1 / len(values)
        sigma = (n * p * (1 - p)) ** 0.5
        for v in values:
            assert abs(counts[v] - n * p) < 5 * sigma, (axis, v, counts[v])
        # Pearson chi-squared against uniform; 5-sigma bound for df = len(values) - 1
        chi2 = sum((counts[v] - n * p) ** 2 / (n * p) for v in values)
        df = len(values) - 1
        assert chi2 < df + 5 * (2 * df) ** 0.5


def test_mutation_singleton_is_identity():
    c = Configuration(8, 3, 32, 1)
    assert mutate_one_axis(c, SINGLETON, random.Random(0)) == c


def test_mutation_changes_at_most_one_axis(space):
    rng = random.Random(1)
    counts = Counter()
    n = 10_000
    c = Configuration(8, 3, 32, 1)
    for _ in range(n):
        # replay the axis draw to learn which axis was hit
        state = rng.getstate()
        axis = AXES[rng.randrange(4)]
        rng.setstate(state)
        out = mutate_one_axis(c, space, rng)
        assert out in space
        for other in AXES:
            if other != axis:
                assert getattr(out, other) == getattr(c, other)
        counts[axis] += 1
    for axis in AXES:
        assert abs(counts[axis] / n - 0.25) <= 0.02


def test_crossover_identical_parents():
    c = Configuration(16, 5, 64, 3)
    assert uniform_crossover(c, c, random.Random(0)) == (c, c)


def test_crossover_complementary_and_frequency():
    a, b = Configuration(8, 2, 32, 1), Configuration(256, 9, 512, 6)
    rng = random.Random(2)
    swaps = Counter()
    n = 10_000
    for _ in range(n):
        x, y = uniform_crossover(a, b, rng)
        for i, axis in enumerate(AXES):
            pair = {x.as_tuple()[i], y.as_tuple()[i]}
            assert pair == {a.as_tuple()[i], b.as_tuple()[i]}
            if x.as_tuple()[i] != a.as_tuple()[i]:
                swaps[axis] += 1
    for axis in AXES:
        assert abs(swaps[axis] / n - 0.5) <= 0.02


configs = st.builds(Configuration, st.sampled_from((8, 16, 32, 64, 128, 256)),
                    st.integers(2, 9), st.sampled_from((32, 64, 128, 256, 512)),
                    st.integers(1, 6))


@given(configs, configs, st.integers(0, 2**32))
def test_operators_stay_in_space(a, b, seed):
    space = ParameterSpace()
    rng = random.Random(seed)
    assert sample_uniform(space, rng) in space
    assert mutate_one_axis(a, space, rng) in space
    x, y = uniform_crossover(a, b, rng)
    assert x in space and y in space
    for i in range(4):
        assert sorted((x.as_tuple()[i], y.as_tuple()[i])) == sorted((a.as_tuple()[i], b.as_tuple()[i]))


def test_doubling_progression_and_constant_maps():
    dims = ArchPolicy().layer_dims(16, 3)
    assert [d.f_out for d in dims] == [16, 32, 64]
    assert [d.f_in for d in dims] == [3, 16, 32]
    assert all((d.h, d.w) == (32, 32) for d in dims)


def test_halving_and_fixed_policies():
    dims = ArchPolicy(input_height=5, input_width=8, filter_progression="fixed",
                      spatial_policy="halving").layer_dims(4, 4)
    assert [d.f_out for d in dims] == [4, 4, 4, 4]
    assert [(d.h, d.w) for d in dims] == [(3, 4), (2, 2), (1, 1), (1, 1)]


def test_split_beyond_total_blocks_rejected():
    with pytest.raises(ConfigError):
        ArchPolicy(total_blocks=3).layer_dims(8, 4)
    with pytest.raises(ConfigError):
        ArchPolicy(total_blocks=3).validate_space(ParameterSpace())


def test_space_check_names_axis(space):
    with pytest.raises(ConfigError, match="l_s=33"):
        space.check(Configuration(8, 3, 33, 1))


def test_load_config_file(tmp_path):
    path = tmp_path / "space.cfg"
    path.write_text(
        "# desk-scale space\n"
        "filters = 4, 8\n"
        "kernels = 1..3\n"
        "latent_dims = 16 32\n"
        "splits = 1,2\n"
        "input_hw = 8x8\n"
        "input_channels = 1\n"
        "total_blocks = 2\n"
        "filter_progression = fixed\n"
        "spatial_policy = halving\n")
    space, policy = load_space_and_policy(path)
    assert space == ParameterSpace((4, 8), (1, 2, 3), (16, 32), (1, 2))
    assert policy == ArchPolicy(8, 8, 1, 2, "fixed", "halving")


@pytest.mark.parametrize("text", [
    "filters = 8\nfilters = 16\n",
    "bogus = 1\n",
    "kernels = 3, 2\n",
    "just words\n",
    "spatial_policy = spiral\n",
])
def test_bad_config_file(tmp_path, text):
    path = tmp_path / "bad.cfg"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_space_and_policy(path)

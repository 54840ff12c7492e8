import itertools
import random

import pytest

from splitopt.config_space import AXES, ArchPolicy, Configuration, ParameterSpace, enumerate_space, sample_uniform
from splitopt.flops import (
    INT64_MAX,
    LayerShape,
    conv_layer_flops,
    device_flops,
    latent_flops,
)
from splitopt.oracle import independent_flops_count

# small enough for the literal loop nest
DESK_SPACE = ParameterSpace((1, 2, 4), (1, 2, 3), (1, 2, 4), (1, 2, 3))
DESK_POLICIES = [ArchPolicy(8, 8, 3, 3, "doubling", "constant"),
                 ArchPolicy(8, 8, 3, 3, "doubling", "halving"),
                 ArchPolicy(7, 5, 2, 3, "fixed", "halving")]


@pytest.mark.parametrize("shape, expected", [
    (LayerShape(3, 3, 16, 32, 32), 884_736),   # 2*9*3*16*1024
    (LayerShape(1, 1, 1, 1, 1), 2),
    (LayerShape(2, 8, 8, 4, 4), 8_192),         # 2*4*8*8*16
])
def test_conv_layer_flops(shape, expected):
    assert conv_layer_flops(shape) == expected


@pytest.mark.parametrize("args, expected", [
    ((32, 32, 32, 128), 8_388_608),
    ((1, 1, 1, 1), 2),
    ((16, 32, 32, 32), 1_048_576),
])
def test_latent_flops(args, expected):
    assert latent_flops(*args) == expected


def test_device_flops_two_layers(policy):
    b = device_flops(Configuration(8, 3, 32, 2), policy)
    assert b.per_layer == (442_368, 2_359_296)
    assert b.latent == 1_048_576
    assert b.total == 3_850_240


def test_device_flops_one_layer(policy):
    b = device_flops(Configuration(8, 3, 32, 1), policy)
    assert b.per_layer == (442_368,)
    assert b.latent == 524_288
    assert b.total == 966_656


def test_largest_configuration_fits_int64(policy):
    total = device_flops(Configuration(256, 9, 512, 6), policy).total
    assert total <= INT64_MAX
    assert total > 70_000_000


def test_overflow_is_reported():
    with pytest.raises(OverflowError):
        conv_layer_flops(LayerShape(2**20, 2**20, 2**20, 2**20, 2**20))
    with pytest.raises(OverflowError):
        latent_flops(2**20, 2**20, 2**20, 2**20)


def test_invalid_shape():
    with pytest.raises(ValueError):
        LayerShape(0, 1, 1, 1, 1)


def test_breakdown_consistency(space, policy):
    for c in enumerate_space(space):
        b = device_flops(c, policy)
        assert b.total == sum(b.per_layer) + b.latent
        assert len(b.per_layer) == c.m
        assert min(b.per_layer) > 0 and b.latent > 0


@pytest.mark.parametrize("axis", AXES)
def test_strictly_increasing_in_each_axis(space, policy, axis):
    others = [a for a in AXES if a != axis]
    for fixed in itertools.product(*(space.axis_values(a) for a in others)):
        base = dict(zip(others, fixed))
        totals = [device_flops(Configuration(**base, **{axis: v}), policy).total
                  for v in space.axis_values(axis)]
        assert all(b > a for a, b in zip(totals, totals[1:])), (axis, base)


def test_cifar_anchors_against_loop_nest(policy):
    assert independent_flops_count(Configuration(8, 3, 32, 2), policy) == 3_850_240
    assert independent_flops_count(Configuration(8, 3, 32, 1), policy) == 966_656


def test_loop_nest_single_unit_layer():
    # 1x1 input, one channel, kernel 1, one filter, one latent output
    policy = ArchPolicy(1, 1, 1, 1)
    # conv: 2, latent: 2
    assert independent_flops_count(Configuration(1, 1, 1, 1), policy) == 4


@pytest.mark.parametrize("policy", DESK_POLICIES, ids=["constant", "halving", "fixed-halving"])
def test_matches_loop_nest_on_random_configs(policy):
    rng = random.Random(2024)
    for _ in range(100):
        c = sample_uniform(DESK_SPACE, rng)
        assert device_flops(c, policy).total == independent_flops_count(c, policy), c

"""Discrete configuration space, architecture-shaping policy and GA primitives.

A configuration is the four-tuple ``(f, k, l_s, m)``: base filter count,
kernel size, latent dimension and device-side block count (split point).
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterator

AXES = ("f", "k", "l_s", "m")

DEFAULT_FILTERS = (8, 16, 32, 64, 128, 256)
DEFAULT_KERNELS = (2, 3, 4, 5, 6, 7, 8, 9)
DEFAULT_LATENT_DIMS = (32, 64, 128, 256, 512)
DEFAULT_SPLITS = (1, 2, 3, 4, 5, 6)
DEFAULT_SNRS_DB = (-20.0, -15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0)

FILTER_PROGRESSIONS = ("doubling", "fixed")
SPATIAL_POLICIES = ("constant", "halving")


class ConfigError(ValueError):
    """Raised for an invalid space, policy or configuration file."""


@dataclass(frozen=True, order=True)
class Configuration:
    f: int
    k: int
    l_s: int
    m: int

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.f, self.k, self.l_s, self.m)

    def replace_axis(self, axis: str, value: int) -> "Configuration":
        values = dict(zip(AXES, self.as_tuple()))
        values[axis] = value
        return Configuration(**values)

    def __str__(self) -> str:
        return f"(f={self.f}, k={self.k}, l_s={self.l_s}, m={self.m})"


def _check_axis(name: str, values: tuple[int, ...]) -> None:
    if not values:
        raise ConfigError(f"axis {name!r} is empty")
    for v in values:
        if isinstance(v, bool) or not isinstance(v, int) or v <= 0:
            raise ConfigError(f"axis {name!r} must hold positive integers, got {v!r}")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError(f"axis {name!r} must be strictly increasing: {values}")


@dataclass(frozen=True)
class ParameterSpace:
    """Allowed values per axis. Every axis is non-empty and strictly increasing."""

    filters: tuple[int, ...] = DEFAULT_FILTERS
    kernels: tuple[int, ...] = DEFAULT_KERNELS
    latent_dims: tuple[int, ...] = DEFAULT_LATENT_DIMS
    splits: tuple[int, ...] = DEFAULT_SPLITS

    def __post_init__(self) -> None:
        for fld in fields(self):
            values = tuple(getattr(self, fld.name))
            object.__setattr__(self, fld.name, values)
            _check_axis(fld.name, values)

    def axis_values(self, axis: str) -> tuple[int, ...]:
        return {"f": self.filters, "k": self.kernels,
                "l_s": self.latent_dims, "m": self.splits}[axis]

    @property
    def size(self) -> int:
        return math.prod(len(self.axis_values(a)) for a in AXES)

    def __contains__(self, c: object) -> bool:
        if not isinstance(c, Configuration):
            return False
        return all(v in self.axis_values(a) for a, v in zip(AXES, c.as_tuple()))

    def check(self, c: Configuration) -> None:
        """Raise ConfigError naming the first axis whose value is not allowed."""
        for a, v in zip(AXES, c.as_tuple()):
            if v not in self.axis_values(a):
                raise ConfigError(
                    f"axis {a}={v} not in allowed values {self.axis_values(a)}")

    def to_dict(self) -> dict[str, list[int]]:
        return {"filters": list(self.filters), "kernels": list(self.kernels),
                "latent_dims": list(self.latent_dims), "splits": list(self.splits)}


@dataclass(frozen=True)
class LayerDims:
    f_in: int
    f_out: int
    h: int
    w: int


@dataclass(frozen=True)
class ArchPolicy:
    """Rules that expand a configuration into per-layer device shapes.

    ``filter_progression``: ``doubling`` gives layer i ``f * 2**(i-1)`` output
    channels, ``fixed`` keeps ``f`` everywhere. ``spatial_policy``:
    ``constant`` is stride 1 with same padding (maps keep the input size),
    ``halving`` is stride 2 with same padding (``ceil(previous / 2)``).
    """

    input_height: int = 32
    input_width: int = 32
    input_channels: int = 3
    total_blocks: int = 6
    filter_progression: str = "doubling"
    spatial_policy: str = "constant"

    def __post_init__(self) -> None:
        for name in ("input_height", "input_width", "input_channels", "total_blocks"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v <= 0:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if self.filter_progression not in FILTER_PROGRESSIONS:
            raise ConfigError(f"unknown filter_progression {self.filter_progression!r}")
        if self.spatial_policy not in SPATIAL_POLICIES:
            raise ConfigError(f"unknown spatial_policy {self.spatial_policy!r}")

    def out_channels(self, f: int, layer: int) -> int:
        """Output channels of device layer ``layer`` (1-based)."""
        if self.filter_progression == "doubling":
            return f << (layer - 1)
        return f

    def layer_dims(self, f: int, m: int) -> list[LayerDims]:
        if not 1 <= m <= self.total_blocks:
            raise ConfigError(f"split point m={m} outside 1..{self.total_blocks}")
        dims = []
        f_in, h, w = self.input_channels, self.input_height, self.input_width
        for i in range(1, m + 1):
            if self.spatial_policy == "halving":
                h, w = -(-h // 2), -(-w // 2)
            f_out = self.out_channels(f, i)
            dims.append(LayerDims(f_in, f_out, h, w))
            f_in = f_out
        return dims

    def validate_space(self, space: ParameterSpace) -> None:
        if space.splits[-1] > self.total_blocks:
            raise ConfigError(
                f"splits axis reaches m={space.splits[-1]} but total_blocks={self.total_blocks}")

    def to_dict(self) -> dict[str, object]:
        return {"input_hw": [self.input_height, self.input_width],
                "input_channels": self.input_channels,
                "total_blocks": self.total_blocks,
                "filter_progression": self.filter_progression,
                "spatial_policy": self.spatial_policy}


def enumerate_space(space: ParameterSpace) -> Iterator[Configuration]:
    """Full Cartesian product in lexicographic axis order (f, k, l_s, m)."""
    for values in itertools.product(space.filters, space.kernels,
                                    space.latent_dims, space.splits):
        yield Configuration(*values)


def sample_uniform(space: ParameterSpace, rng: random.Random) -> Configuration:
    return Configuration(rng.choice(space.filters), rng.choice(space.kernels),
                         rng.choice(space.latent_dims), rng.choice(space.splits))


def mutate_one_axis(c: Configuration, space: ParameterSpace,
                    rng: random.Random) -> Configuration:
    """Redraw one uniformly chosen axis. The new value may equal the old one."""
    axis = AXES[rng.randrange(len(AXES))]
    return c.replace_axis(axis, rng.choice(space.axis_values(axis)))


def uniform_crossover(a: Configuration, b: Configuration,
                      rng: random.Random) -> tuple[Configuration, Configuration]:
    """Swap each axis between the two parents with probability 0.5."""
    left, right = list(a.as_tuple()), list(b.as_tuple())
    for i in range(len(AXES)):
        if rng.random() < 0.5:
            left[i], right[i] = right[i], left[i]
    return Configuration(*left), Configuration(*right)


# --- declarative config file -------------------------------------------------

SPACE_KEYS = ("filters", "kernels", "latent_dims", "splits")
POLICY_KEYS = ("input_hw", "input_channels", "total_blocks",
               "filter_progression", "spatial_policy")


def _int_list(key: str, raw: str) -> tuple[int, ...]:
    parts = [p for p in raw.replace(",", " ").split() if p]
    out = []
    for p in parts:
        if ".." in p:
            lo, hi = p.split("..", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(p))
    if not out:
        raise ConfigError(f"{key}: empty value")
    return tuple(out)


def read_key_values(path: str | Path) -> dict[str, str]:
    """Parse ``key = value`` lines. ``#`` starts a comment; blank lines are skipped."""
    result: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else (":" if ":" in line else None)
        if sep is None:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split(sep, 1))
        if key in result:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        result[key] = value
    return result


def space_and_policy_from_mapping(
        values: dict[str, str],
        space: ParameterSpace | None = None,
        policy: ArchPolicy | None = None) -> tuple[ParameterSpace, ArchPolicy]:
    """Build a space and policy from string values, starting from the given defaults.

    Keys outside the space/policy vocabulary are ignored here; callers that
    own further keys validate them.
    """
    space = space or ParameterSpace()
    policy = policy or ArchPolicy()
    try:
        space_kw = {k: _int_list(k, values[k]) for k in SPACE_KEYS if k in values}
        policy_kw: dict[str, object] = {}
        if "input_hw" in values:
            hw = _int_list("input_hw", values["input_hw"].lower().replace("x", " "))
            if len(hw) == 1:
                hw = hw * 2
            if len(hw) != 2:
                raise ConfigError(f"input_hw: expected HxW, got {values['input_hw']!r}")
            policy_kw["input_height"], policy_kw["input_width"] = hw
        for key in ("input_channels", "total_blocks"):
            if key in values:
                policy_kw[key] = int(values[key])
        for key in ("filter_progression", "spatial_policy"):
            if key in values:
                policy_kw[key] = values[key]
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    space = ParameterSpace(**{**_space_kwargs(space), **space_kw})
    policy = ArchPolicy(**{**_policy_kwargs(policy), **policy_kw})
    policy.validate_space(space)
    return space, policy


def load_space_and_policy(path: str | Path) -> tuple[ParameterSpace, ArchPolicy]:
    values = read_key_values(path)
    unknown = set(values) - set(SPACE_KEYS) - set(POLICY_KEYS)
    if unknown:
        raise ConfigError(f"unknown keys in {path}: {sorted(unknown)}")
    return space_and_policy_from_mapping(values)


def _space_kwargs(space: ParameterSpace) -> dict[str, tuple[int, ...]]:
    return {fld.name: getattr(space, fld.name) for fld in fields(space)}


def _policy_kwargs(policy: ArchPolicy) -> dict[str, object]:
    return {fld.name: getattr(policy, fld.name) for fld in fields(policy)}

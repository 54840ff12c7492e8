"""Ground truth for desk-scale checks.

* :class:`SyntheticOracle` - closed-form stand-in for trained-network accuracy.
  Its constants are illustrative defaults, not measured values.
* :func:`brute_force_optimize` - exhaustive scan sharing :func:`engine.evaluate`.
* :func:`independent_flops_count` - literal loop-nest MAC counter.
* :func:`generate_corpus` - synthetic offline dataset writer.
"""

from __future__ import annotations

import math
import random
import zlib
from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np

from .config_space import (
    DEFAULT_SNRS_DB,
    ArchPolicy,
    Configuration,
    ParameterSpace,
    enumerate_space,
)
from .dataset import OfflineDataset, OfflineRecord
from .engine import Evaluation, EvaluatorStack, FitnessTuple, evaluate
from .flops import total_flops

MAX_BRUTE_FORCE = 10**6


@dataclass(frozen=True)
class SyntheticOracle:
    """``a_min + (a_max - a_min) * logistic(q/s0) * (1 - e^(-gamma m)) * (1 - e^(-F/F0))``.

    With ``noise_sd > 0`` a Gaussian term seeded from ``(seed, c, q)`` is
    added, so the oracle stays a pure function of its inputs. Output is
    clipped to [0, 100].
    """

    a_min: float = 10.0
    a_max: float = 90.0
    snr_scale: float = 10.0
    depth_gain: float = 0.5
    capacity_scale: float = 1e7
    noise_sd: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.a_min < self.a_max:
            raise ValueError("a_min must be below a_max")
        for name in ("snr_scale", "depth_gain", "capacity_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be non-negative")

    def noiseless(self, m: int, flops: float, snr_db: float) -> float:
        snr_term = 1.0 / (1.0 + math.exp(-snr_db / self.snr_scale))
        depth_term = 1.0 - math.exp(-self.depth_gain * m)
        capacity_term = 1.0 - math.exp(-flops / self.capacity_scale)
        return self.a_min + (self.a_max - self.a_min) * snr_term * depth_term * capacity_term

    def accuracy(self, c: Configuration, snr_db: float, policy: ArchPolicy) -> float:
        value = self.noiseless(c.m, total_flops(c, policy), snr_db)
        if self.noise_sd > 0:
            snr_word = zlib.crc32(repr(round(float(snr_db), 1)).encode())
            rng = np.random.default_rng([self.seed, *c.as_tuple(), snr_word])
            value += self.noise_sd * rng.standard_normal()
        return min(100.0, max(0.0, value))

    def to_dict(self) -> dict:
        return asdict(self)


def synthetic_accuracy(c: Configuration, snr_db: float, oracle: SyntheticOracle,
                       policy: ArchPolicy) -> float:
    return oracle.accuracy(c, snr_db, policy)


@dataclass(frozen=True)
class OracleAccuracy:
    """Accuracy source adapter binding an oracle to a policy."""

    oracle: SyntheticOracle
    policy: ArchPolicy

    def __call__(self, c: Configuration, snr_db: float) -> float:
        return self.oracle.accuracy(c, snr_db, self.policy)


@dataclass(frozen=True)
class BruteForceResult:
    best: Configuration | None
    best_fitness: FitnessTuple
    best_evaluation: Evaluation | None
    feasible_count: int
    evaluated_count: int


def brute_force_optimize(space: ParameterSpace, stack: EvaluatorStack,
                         max_size: int = MAX_BRUTE_FORCE) -> BruteForceResult:
    """Score every configuration and keep the final-selection maximum.

    Uses the same ordering as the GA's final pick: highest accuracy among
    feasible points, then smallest budget gap, first in enumeration order on
    exact ties.
    """
    if space.size > max_size:
        raise ValueError(f"space has {space.size} points, above the brute-force guard {max_size}")
    best: Evaluation | None = None
    feasible = evaluated = 0
    for c in enumerate_space(space):
        e = evaluate(c, stack)
        evaluated += 1
        if e.feasible:
            feasible += 1
            if best is None or e.final_key > best.final_key:
                best = e
    if best is None:
        return BruteForceResult(None, FitnessTuple.infeasible(), None, 0, evaluated)
    return BruteForceResult(best.config, best.fitness, best, feasible, evaluated)


def _out_size(size: int, stride: int) -> int:
    # same padding: one output per stride step that starts inside the input
    count = 0
    pos = 0
    while pos < size:
        count += 1
        pos += stride
    return count


def independent_flops_count(c: Configuration, policy: ArchPolicy) -> int:
    """Count 2 FLOPs per multiply-accumulate by walking every loop explicitly.

    Shapes are re-derived here from the policy's raw settings (input size,
    stride implied by the spatial policy, channel progression) rather than
    taken from :meth:`ArchPolicy.layer_dims`. Cost grows with the MAC count,
    so keep inputs small.
    """
    stride = 2 if policy.spatial_policy == "halving" else 1
    h, w = policy.input_height, policy.input_width
    c_in = policy.input_channels
    flops = 0
    for layer in range(c.m):
        c_out = c.f * 2**layer if policy.filter_progression == "doubling" else c.f
        h, w = _out_size(h, stride), _out_size(w, stride)
        for _oy in range(h):
            for _ox in range(w):
                for _co in range(c_out):
                    for _ci in range(c_in):
                        for _ky in range(c.k):
                            for _kx in range(c.k):
                                flops += 2
        c_in = c_out
    # dense projection: every latent output reads every feature-map element
    for _out in range(c.l_s):
        for _ch in range(c_in):
            for _y in range(h):
                for _x in range(w):
                    flops += 2
    return flops


def generate_corpus(space: ParameterSpace, policy: ArchPolicy, oracle: SyntheticOracle,
                    snr_set: Iterable[float] = DEFAULT_SNRS_DB, sample_count: int | None = None,
                    rng: random.Random | None = None,
                    paper_protocol: bool = False) -> OfflineDataset:
    """Sample configurations without replacement and score them with ``oracle``.

    Default mode emits one row per (configuration, SNR in ``snr_set``). With
    ``paper_protocol`` each configuration gets a single SNR drawn uniformly
    from ``snr_set``.
    """
    snrs = [float(s) for s in snr_set]
    if not snrs:
        raise ValueError("snr_set must not be empty")
    rng = rng or random.Random(0)
    configs = list(enumerate_space(space))
    if sample_count is None:
        sample_count = len(configs)
    if not 0 <= sample_count <= len(configs):
        raise ValueError(f"sample_count must lie in [0, {len(configs)}], got {sample_count}")
    chosen = rng.sample(configs, sample_count)
    records = []
    for c in chosen:
        flops = total_flops(c, policy)
        for q in ([rng.choice(snrs)] if paper_protocol else snrs):
            records.append(OfflineRecord(c, q, flops, oracle.accuracy(c, q, policy)))
    return OfflineDataset(records)

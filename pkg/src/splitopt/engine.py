"""Learning-assisted genetic search for the best configuration under a FLOPs budget.

Scoring order for a configuration ``c`` at SNR ``q``: an exact ``(c, q)``
record in the offline dataset wins; otherwise the FLOPs and accuracy sources
(exact cost model or forest, forest or synthetic oracle) are queried.
Configurations over budget get the sentinel fitness ``(-inf, +inf)``; the
rest get ``(A + U, F_max - F)``, compared lexicographically (larger first
component, then smaller budget gap).
"""

from __future__ import annotations

import functools
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .config_space import (
    ArchPolicy,
    Configuration,
    ParameterSpace,
    enumerate_space,
    mutate_one_axis,
    sample_uniform,
    uniform_crossover,
)
from .dataset import OfflineDataset
from .flops import total_flops
from .forest import ForestModel

FlopsSource = Callable[[Configuration], float]
AccuracySource = Callable[[Configuration, float], float]


class NoFeasibleConfigurationError(RuntimeError):
    """No configuration satisfies the FLOPs budget.

    ``certified`` is True when the cheapest point of the space already
    exceeds the budget, False when the search merely failed to meet one.
    """

    def __init__(self, message: str, certified: bool = True):
        super().__init__(message)
        self.certified = certified


@functools.total_ordering
@dataclass(frozen=True)
class FitnessTuple:
    primary: float
    gap: float

    @classmethod
    def infeasible(cls) -> "FitnessTuple":
        return cls(-math.inf, math.inf)

    @property
    def feasible(self) -> bool:
        return self.primary != -math.inf

    @property
    def key(self) -> tuple[float, float]:
        return (self.primary, -self.gap)

    def __lt__(self, other: "FitnessTuple") -> bool:
        if not isinstance(other, FitnessTuple):
            return NotImplemented
        return self.key < other.key

    def to_json(self) -> list:
        return [_json_float(self.primary), _json_float(self.gap)]


def _json_float(x: float):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _json_number(x: float):
    return int(x) if float(x).is_integer() else x


def utilization(flops: float, budget: float) -> float:
    """Reward in [0, 1] for spending between 90% and 100% of the budget."""
    if budget <= 0:
        raise ValueError(f"budget must be positive, got {budget}")
    return max(0.0, (flops - 0.9 * budget) / (0.1 * budget))


@dataclass(frozen=True)
class ExactFlops:
    """Analytic device cost under ``policy``."""

    policy: ArchPolicy

    def __call__(self, c: Configuration) -> float:
        return total_flops(c, self.policy)


@dataclass(frozen=True)
class ForestFlops:
    model: ForestModel

    def __post_init__(self) -> None:
        if self.model.target != "flops":
            raise ValueError(f"expected a flops model, got target {self.model.target!r}")

    def __call__(self, c: Configuration) -> float:
        return self.model.predict_one(c)


@dataclass(frozen=True)
class ForestAccuracy:
    model: ForestModel

    def __post_init__(self) -> None:
        if self.model.target != "accuracy":
            raise ValueError(f"expected an accuracy model, got target {self.model.target!r}")

    def __call__(self, c: Configuration, snr_db: float) -> float:
        return self.model.predict_one(c, snr_db)


@dataclass(frozen=True)
class EvaluatorStack:
    budget: float
    snr_db: float
    flops_source: FlopsSource
    accuracy_source: AccuracySource
    dataset: OfflineDataset = field(default_factory=OfflineDataset)

    def __post_init__(self) -> None:
        if not self.budget > 0:
            raise ValueError(f"budget must be positive, got {self.budget}")
        if not math.isfinite(self.snr_db):
            raise ValueError(f"snr_db must be finite, got {self.snr_db}")

    def flops(self, c: Configuration) -> float:
        rec = self.dataset.lookup(c, self.snr_db)
        return rec.flops if rec is not None else self.flops_source(c)


@dataclass(frozen=True)
class Evaluation:
    config: Configuration
    fitness: FitnessTuple
    accuracy: float
    flops: float
    provenance: str  # "dataset" | "surrogate"

    @property
    def feasible(self) -> bool:
        return self.fitness.feasible

    @property
    def final_key(self) -> tuple[float, float]:
        """Final-selection order: highest accuracy, then smallest budget gap."""
        return (self.accuracy, -self.fitness.gap)


def evaluate(c: Configuration, stack: EvaluatorStack) -> Evaluation:
    rec = stack.dataset.lookup(c, stack.snr_db)
    if rec is not None:
        flops, acc, provenance = float(rec.flops), float(rec.accuracy), "dataset"
    else:
        flops = float(stack.flops_source(c))
        acc = float(stack.accuracy_source(c, stack.snr_db))
        provenance = "surrogate"
    if flops > stack.budget:
        return Evaluation(c, FitnessTuple.infeasible(), acc, flops, provenance)
    fitness = FitnessTuple(acc + utilization(flops, stack.budget), stack.budget - flops)
    return Evaluation(c, fitness, acc, flops, provenance)


@dataclass(frozen=True)
class StackFactory:
    """Builds an EvaluatorStack per (budget, SNR) from fixed sources; picklable."""

    flops_source: FlopsSource
    accuracy_source: AccuracySource
    dataset: OfflineDataset = field(default_factory=OfflineDataset)

    def __call__(self, budget: float, snr_db: float) -> EvaluatorStack:
        return EvaluatorStack(budget, snr_db, self.flops_source, self.accuracy_source,
                              self.dataset)


class CachedEvaluator:
    """Memoising wrapper; evaluation is pure so results can be shared across restarts."""

    def __init__(self, stack: EvaluatorStack):
        self.stack = stack
        self._cache: dict[Configuration, Evaluation] = {}

    def __call__(self, c: Configuration) -> Evaluation:
        ev = self._cache.get(c)
        if ev is None:
            ev = self._cache[c] = evaluate(c, self.stack)
        return ev

    @property
    def distinct_evaluations(self) -> int:
        return len(self._cache)


def _as_evaluator(stack) -> Callable[[Configuration], Evaluation]:
    if isinstance(stack, EvaluatorStack):
        return CachedEvaluator(stack)
    return stack


@dataclass(frozen=True)
class GAParams:
    population: int = 20
    generations: int = 50
    tournament: int = 3
    cxpb: float = 0.5
    mutpb: float = 0.2
    restarts: int = 10
    seed: int = 0
    # "uniform": initial members drawn from the whole space; "feasible": redraw
    # (up to 100 tries per member) until the member fits the budget
    init: str = "uniform"

    def __post_init__(self) -> None:
        if self.init not in ("uniform", "feasible"):
            raise ValueError(f"init must be 'uniform' or 'feasible', got {self.init!r}")
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if not 2 <= self.tournament <= self.population:
            raise ValueError("tournament size must lie in [2, population]")
        for name in ("cxpb", "mutpb"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")

    def restart_seeds(self) -> list[int]:
        words = np.random.SeedSequence(self.seed).generate_state(self.restarts, dtype=np.uint64)
        return [int(w) for w in words]


def tournament_select(population: Sequence[Configuration], fitnesses: Sequence[FitnessTuple],
                      size: int, rng: random.Random) -> Configuration:
    """Best of ``size`` members drawn without replacement; ties go to the earlier draw."""
    entrants = rng.sample(range(len(population)), size)
    best = entrants[0]
    for i in entrants[1:]:
        if fitnesses[i] > fitnesses[best]:
            best = i
    return population[best]


def step_generation(population: Sequence[Configuration], space: ParameterSpace, stack,
                    params: GAParams, rng: random.Random,
                    ) -> tuple[list[Configuration], list[Evaluation]]:
    """One generation: score, select V parents, cross pairs, mutate.

    Returns the next population and the evaluations of the current one.
    ``stack`` is an EvaluatorStack or any callable returning an Evaluation.
    """
    ev = _as_evaluator(stack)
    evals = [ev(c) for c in population]
    fitnesses = [e.fitness for e in evals]
    parents = [tournament_select(population, fitnesses, params.tournament, rng)
               for _ in range(len(population))]
    offspring: list[Configuration] = []
    for i in range(0, len(parents) - 1, 2):
        a, b = parents[i], parents[i + 1]
        if rng.random() < params.cxpb:
            a, b = uniform_crossover(a, b, rng)
        offspring.extend((a, b))
    if len(parents) % 2:
        offspring.append(parents[-1])
    for i, c in enumerate(offspring):
        if rng.random() < params.mutpb:
            offspring[i] = mutate_one_axis(c, space, rng)
    return offspring, evals


def select_final(evals: Sequence[Evaluation]) -> Evaluation | None:
    """Highest accuracy among feasible entries, then smallest gap; first wins ties."""
    best = None
    for e in evals:
        if e.feasible and (best is None or e.final_key > best.final_key):
            best = e
    return best


def _initial_member(space: ParameterSpace, evaluator, init: str,
                    rng: random.Random) -> Configuration:
    c = sample_uniform(space, rng)
    if init == "feasible":
        for _ in range(99):
            if evaluator(c).feasible:
                break
            c = sample_uniform(space, rng)
    return c


@dataclass(frozen=True)
class RestartOutcome:
    index: int
    seed: int
    winner: Evaluation | None
    best_ever: Evaluation | None
    history: list[FitnessTuple]


def run_restart(space: ParameterSpace, evaluator, params: GAParams, seed: int,
                index: int = 0) -> RestartOutcome:
    rng = random.Random(seed)
    population = [_initial_member(space, evaluator, params.init, rng)
                  for _ in range(params.population)]
    history: list[FitnessTuple] = []
    best_ever: Evaluation | None = None
    for _ in range(params.generations):
        population, evals = step_generation(population, space, evaluator, params, rng)
        history.append(max(e.fitness for e in evals))
        best_ever = select_final([best_ever, *evals] if best_ever else evals) or best_ever
    final = [evaluator(c) for c in population]
    best_ever = select_final([best_ever, *final] if best_ever else final) or best_ever
    return RestartOutcome(index, seed, select_final(final), best_ever, history)


@dataclass(frozen=True)
class OptimizationResult:
    best: Configuration
    predicted_accuracy: float
    device_flops: float
    fitness: FitnessTuple
    restart_index: int
    provenance: str
    history: list[list[FitnessTuple]]
    budget: float
    snr_db: float
    from_final_population: bool = True
    best_ever: Evaluation | None = None
    distinct_evaluations: int = 0

    def to_dict(self, include_history: bool = True) -> dict:
        d = {"best": {"f": self.best.f, "k": self.best.k, "l_s": self.best.l_s, "m": self.best.m},
             "predicted_accuracy": self.predicted_accuracy,
             "device_flops": _json_number(self.device_flops),
             "fitness": self.fitness.to_json(),
             "restart_index": self.restart_index,
             "provenance": self.provenance,
             "budget": self.budget,
             "snr_db": self.snr_db,
             "from_final_population": self.from_final_population,
             "distinct_evaluations": self.distinct_evaluations}
        if self.best_ever is not None:
            be = self.best_ever
            d["best_ever"] = {"config": list(be.config.as_tuple()), "accuracy": be.accuracy,
                              "flops": _json_number(be.flops),
                              "fitness": be.fitness.to_json()}
        if include_history:
            d["history"] = [[t.to_json() for t in h] for h in self.history]
        return d


def cheapest_flops(space: ParameterSpace, stack: EvaluatorStack) -> float:
    return min(stack.flops(c) for c in enumerate_space(space))


def optimize(space: ParameterSpace, policy: ArchPolicy | None, stack: EvaluatorStack,
             params: GAParams = GAParams(), track_best: bool = False) -> OptimizationResult:
    """Run ``params.restarts`` independent GA instances and keep the overall winner.

    The winner of each restart is chosen from its final population only; the
    same rule then picks among restart winners (earliest restart on ties). If
    no final population holds a feasible member, the best feasible
    configuration seen during search is returned instead and
    ``from_final_population`` is False.
    """
    if policy is not None:
        policy.validate_space(space)
    cheapest = cheapest_flops(space, stack)
    if cheapest > stack.budget:
        raise NoFeasibleConfigurationError(
            f"no feasible configuration: cheapest point needs {cheapest:.0f} FLOPs "
            f"> budget {stack.budget:.0f}")
    evaluator = CachedEvaluator(stack)
    outcomes = [run_restart(space, evaluator, params, seed, i)
                for i, seed in enumerate(params.restart_seeds())]

    winner, winner_idx = None, -1
    for o in outcomes:
        if o.winner is not None and (winner is None or o.winner.final_key > winner.final_key):
            winner, winner_idx = o.winner, o.index
    ever, ever_idx = None, -1
    for o in outcomes:
        if o.best_ever is not None and (ever is None or o.best_ever.final_key > ever.final_key):
            ever, ever_idx = o.best_ever, o.index

    from_final = winner is not None
    if winner is None:
        if ever is None:
            raise NoFeasibleConfigurationError(
                "search evaluated no feasible configuration", certified=False)
        winner, winner_idx = ever, ever_idx
    return OptimizationResult(
        best=winner.config, predicted_accuracy=winner.accuracy, device_flops=winner.flops,
        fitness=winner.fitness, restart_index=winner_idx, provenance=winner.provenance,
        history=[o.history for o in outcomes], budget=stack.budget, snr_db=stack.snr_db,
        from_final_population=from_final, best_ever=ever if track_best else None,
        distinct_evaluations=evaluator.distinct_evaluations)

"""Parameter sweeps and self-contained run reports."""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence

from . import __version__
from .config_space import ArchPolicy, Configuration, ParameterSpace
from .engine import (
    EvaluatorStack,
    GAParams,
    NoFeasibleConfigurationError,
    optimize,
)
from .flops import total_flops

REPORT_SCHEMA_VERSION = 1
SWEEP_AXES = ("budget", "snr", "layers")
SWEEP_CSV_HEADER = ("axis_value", "f", "k", "l_s", "m", "flops", "accuracy")


@dataclass(frozen=True)
class SweepSpec:
    """One sweep axis; ``budget`` and ``snr_db`` hold whichever values stay fixed.

    A ``layers`` sweep pins the split point to each value in turn and needs
    both a budget and an SNR.
    """

    axis: str
    points: tuple[float, ...]
    budget: float | None = None
    snr_db: float | None = None

    def __post_init__(self) -> None:
        if self.axis not in SWEEP_AXES:
            raise ValueError(f"unknown sweep axis {self.axis!r}; expected one of {SWEEP_AXES}")
        object.__setattr__(self, "points", tuple(float(p) for p in self.points))
        if not self.points:
            raise ValueError("sweep needs at least one point")
        if any(b <= a for a, b in zip(self.points, self.points[1:])):
            raise ValueError("sweep points must be strictly increasing")
        if self.axis in ("snr", "layers") and self.budget is None:
            raise ValueError(f"a {self.axis} sweep needs a fixed budget")
        if self.axis in ("budget", "layers") and self.snr_db is None:
            raise ValueError(f"a {self.axis} sweep needs a fixed SNR")
        if self.axis == "layers" and any(p != int(p) or p < 1 for p in self.points):
            raise ValueError("layers sweep points must be positive integers")

    def to_dict(self) -> dict:
        return {"axis": self.axis, "points": list(self.points),
                "budget": self.budget, "snr_db": self.snr_db}


@dataclass(frozen=True)
class SweepContext:
    """Everything a sweep point needs besides its axis value.

    ``make_stack(budget, snr_db)`` builds the evaluator for one point; it must
    be picklable when points run in worker processes.
    """

    space: ParameterSpace
    policy: ArchPolicy
    params: GAParams
    make_stack: Callable[[float, float], EvaluatorStack]
    track_best: bool = False


def _run_point(spec: SweepSpec, ctx: SweepContext, value: float) -> dict:
    space = ctx.space
    budget, snr = spec.budget, spec.snr_db
    if spec.axis == "budget":
        budget = value
    elif spec.axis == "snr":
        snr = value
    else:
        space = replace(space, splits=(int(value),))
    start = time.perf_counter()
    try:
        result = optimize(space, ctx.policy, ctx.make_stack(budget, snr), ctx.params,
                          track_best=ctx.track_best)
        entry = {"axis_value": value, "status": "ok", "result": result.to_dict()}
    except NoFeasibleConfigurationError as exc:
        entry = {"axis_value": value, "status": "infeasible", "reason": str(exc)}
    return {"entry": entry, "seconds": time.perf_counter() - start}


def run_sweep(spec: SweepSpec, ctx: SweepContext, jobs: int = 1) -> dict:
    """Optimise at every sweep point; infeasible points are recorded, not fatal.

    Returns a report dict with ``points`` in spec order and ``timings`` kept
    apart from the deterministic payload.
    """
    start = time.perf_counter()
    if jobs > 1 and len(spec.points) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outs = list(pool.map(_run_point, [spec] * len(spec.points),
                                 [ctx] * len(spec.points), spec.points))
    else:
        outs = [_run_point(spec, ctx, v) for v in spec.points]
    return {"sweep": spec.to_dict(),
            "points": [o["entry"] for o in outs],
            "timings": {"total_seconds": time.perf_counter() - start,
                        "per_point_seconds": [o["seconds"] for o in outs]}}


def sweep_rows(points: Sequence[dict]) -> list[list]:
    rows = []
    for p in points:
        if p["status"] != "ok":
            rows.append([p["axis_value"], "", "", "", "", "", ""])
            continue
        r = p["result"]
        b = r["best"]
        rows.append([p["axis_value"], b["f"], b["k"], b["l_s"], b["m"],
                     r["device_flops"], r["predicted_accuracy"]])
    return rows


def sweep_csv(points: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_CSV_HEADER)
    writer.writerows(sweep_rows(points))
    return buf.getvalue()


def layers_flops_table(space: ParameterSpace, policy: ArchPolicy,
                       f: int, k: int, l_s: int) -> str:
    """CSV ``m,flops`` for every split point in the space, other axes fixed."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("m", "flops"))
    for m in space.splits:
        writer.writerow((m, total_flops(Configuration(f, k, l_s, m), policy)))
    return buf.getvalue()


def build_report(command: str, config: dict, body: dict,
                 timings: dict | None = None) -> dict:
    report = {"schema_version": REPORT_SCHEMA_VERSION,
              "artifact_version": __version__,
              "command": command,
              "config": config}
    report.update(body)
    if timings is not None:
        report["timings"] = timings
    return report

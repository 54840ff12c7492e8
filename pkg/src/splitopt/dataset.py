"""Offline corpus of simulated (configuration, SNR) -> (FLOPs, accuracy) records."""

from __future__ import annotations

import csv
import io
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .config_space import ConfigError, Configuration, ParameterSpace

HEADER = ("f", "k", "l_s", "m", "snr_db", "flops", "accuracy")


class DatasetError(ValueError):
    """Schema or invariant violation while loading a corpus.

    ``problems`` holds one ``(line number, message)`` pair per bad row.
    """

    def __init__(self, problems: list[tuple[int, str]]):
        self.problems = problems
        super().__init__("; ".join(f"line {n}: {msg}" for n, msg in problems))


def snr_key(snr_db: float) -> int:
    """SNR rounded to 0.1 dB, as an integer, for exact-match keying."""
    return int(round(snr_db * 10))


@dataclass(frozen=True)
class OfflineRecord:
    config: Configuration
    snr_db: float
    flops: int
    accuracy: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.snr_db):
            raise ValueError(f"snr_db must be finite, got {self.snr_db}")
        if self.flops <= 0:
            raise ValueError(f"flops must be positive, got {self.flops}")
        if not 0.0 <= self.accuracy <= 100.0:
            raise ValueError(f"accuracy must lie in [0, 100], got {self.accuracy}")

    @property
    def key(self) -> tuple[int, int, int, int, int]:
        return (*self.config.as_tuple(), snr_key(self.snr_db))


@dataclass(frozen=True)
class OfflineDataset:
    records: tuple[OfflineRecord, ...] = ()
    index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))
        index = {}
        for r in self.records:
            if r.key in index:
                raise ValueError(f"duplicate record for {r.config} at {r.snr_db} dB")
            index[r.key] = r
        object.__setattr__(self, "index", index)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def lookup(self, c: Configuration, snr_db: float) -> OfflineRecord | None:
        return self.index.get((*c.as_tuple(), snr_key(snr_db)))

    def filter_snr(self, snr_db: float) -> "OfflineDataset":
        key = snr_key(snr_db)
        return OfflineDataset(r for r in self.records if snr_key(r.snr_db) == key)


def lookup(d: OfflineDataset, c: Configuration, snr_db: float) -> OfflineRecord | None:
    return d.lookup(c, snr_db)


def _parse_row(row: dict[str, str], space: ParameterSpace) -> OfflineRecord:
    try:
        config = Configuration(*(int(row[a]) for a in ("f", "k", "l_s", "m")))
        snr = float(row["snr_db"])
        flops = int(row["flops"])
        accuracy = float(row["accuracy"])
    except (TypeError, ValueError) as exc:
        raise ValueError(f"malformed row {row!r}: {exc}") from None
    space.check(config)
    return OfflineRecord(config, snr, flops, accuracy)


def read_records(text: str, space: ParameterSpace) -> OfflineDataset:
    """Parse CSV text, collecting every bad row before raising DatasetError."""
    reader = csv.reader(io.StringIO(text))
    problems: list[tuple[int, str]] = []
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != HEADER:
        raise DatasetError([(1, f"header must be exactly {','.join(HEADER)}, got {header!r}")])
    records: list[OfflineRecord] = []
    seen: dict[tuple, int] = {}
    for fields_ in reader:
        lineno = reader.line_num
        if not fields_ or all(not s.strip() for s in fields_):
            continue
        if len(fields_) != len(HEADER):
            problems.append((lineno, f"expected {len(HEADER)} fields, got {len(fields_)}"))
            continue
        try:
            rec = _parse_row(dict(zip(HEADER, (s.strip() for s in fields_))), space)
        except (ValueError, ConfigError) as exc:
            problems.append((lineno, str(exc)))
            continue
        if rec.key in seen:
            problems.append((lineno, f"duplicate key {rec.config} at {rec.snr_db} dB "
                                     f"(first seen on line {seen[rec.key]})"))
            continue
        seen[rec.key] = lineno
        records.append(rec)
    if problems:
        raise DatasetError(problems)
    return OfflineDataset(records)


def load(path: str | Path, space: ParameterSpace | None = None) -> OfflineDataset:
    return read_records(Path(path).read_text(encoding="utf-8"), space or ParameterSpace())


def format_records(records: Iterable[OfflineRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for r in records:
        writer.writerow([*r.config.as_tuple(), repr(float(r.snr_db)), r.flops,
                         repr(float(r.accuracy))])
    return buf.getvalue()


def save(d: OfflineDataset | Iterable[OfflineRecord], path: str | Path) -> None:
    Path(path).write_text(format_records(d), encoding="utf-8")


def train_test_split(d: OfflineDataset, test_fraction: float,
                     rng: random.Random) -> tuple[OfflineDataset, OfflineDataset]:
    """Shuffle and cut into (train, test); both parts keep at least one record."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n = len(d)
    if n == 0:
        raise ValueError("cannot split an empty dataset")
    if n == 1:
        raise ValueError("cannot split a single record into two non-empty parts")
    n_test = min(max(round(n * test_fraction), 1), n - 1)
    order = list(range(n))
    rng.shuffle(order)
    test_idx = sorted(order[:n_test])
    train_idx = sorted(order[n_test:])
    return (OfflineDataset(d.records[i] for i in train_idx),
            OfflineDataset(d.records[i] for i in test_idx))

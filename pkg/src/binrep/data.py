"""Replicate datasets, parameter containers and CSV ingestion.

A dataset is stored through its sufficient statistic: for each individual the
number of observed replicates ``n`` and the number of positive ones ``s``.
The optional ``status`` is the known latent state and is only read by
validation and oracle code paths.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DomainError, ParseError, ValidationError

MISSING_TOKENS = frozenset({"", "NA", "na", "NaN", "nan"})


@dataclass(frozen=True)
class IndividualRecord:
    id: str
    n: int
    s: int
    status: int | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError(f"individual {self.id!r}: n must be >= 1, got {self.n}")
        if not 0 <= self.s <= self.n:
            raise ValidationError(
                f"individual {self.id!r}: s must satisfy 0 <= s <= n, got s={self.s}, n={self.n}"
            )
        if self.status is not None and self.status not in (0, 1):
            raise ValidationError(f"individual {self.id!r}: status must be 0 or 1, got {self.status}")


@dataclass(frozen=True)
class ReplicateDataset:
    """Ordered collection of individuals; per-individual outputs align by index."""

    individuals: tuple[IndividualRecord, ...]
    n: np.ndarray = field(init=False, repr=False, compare=False)
    s: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        records = tuple(self.individuals)
        if not records:
            raise ValidationError("a dataset needs at least one individual")
        seen = set()
        for rec in records:
            if rec.id in seen:
                raise ValidationError(f"duplicate individual id {rec.id!r}")
            seen.add(rec.id)
        object.__setattr__(self, "individuals", records)
        n = np.array([r.n for r in records], dtype=np.int64)
        s = np.array([r.s for r in records], dtype=np.int64)
        n.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "s", s)

    @classmethod
    def from_counts(cls, n, s, status=None, ids=None) -> "ReplicateDataset":
        n = [int(v) for v in n]
        s = [int(v) for v in s]
        if len(n) != len(s):
            raise ValidationError("n and s must have the same length")
        if ids is None:
            ids = [f"i{k + 1}" for k in range(len(n))]
        if status is None:
            status = [None] * len(n)
        recs = [
            IndividualRecord(str(i), ni, si, None if t is None else int(t))
            for i, ni, si, t in zip(ids, n, s, status)
        ]
        return cls(tuple(recs))

    def __len__(self) -> int:
        return len(self.individuals)

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.individuals]

    @property
    def has_status(self) -> bool:
        return all(r.status is not None for r in self.individuals)

    @property
    def status(self) -> np.ndarray:
        """Known latent states; raises if any is missing."""
        missing = [r.id for r in self.individuals if r.status is None]
        if missing:
            raise ValidationError(f"status missing for individuals: {', '.join(missing)}")
        return np.array([r.status for r in self.individuals], dtype=np.int64)

    def subset(self, index: Sequence[int]) -> "ReplicateDataset":
        return ReplicateDataset(tuple(self.individuals[i] for i in index))

    def without_status(self) -> "ReplicateDataset":
        return ReplicateDataset(tuple(IndividualRecord(r.id, r.n, r.s) for r in self.individuals))


@dataclass(frozen=True)
class RawReplicateTable:
    """N x J replicate matrix; ``nan`` marks a missing cell."""

    values: np.ndarray
    ids: tuple[str, ...] | None = None
    status: tuple[int, ...] | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise ValidationError("replicate table must be two-dimensional")
        observed = ~np.isnan(v)
        bad = observed & (v != 0) & (v != 1)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise ValidationError(f"row {i}, column {j}: replicate value must be 0 or 1, got {v[i, j]}")
        empty = np.flatnonzero(~observed.any(axis=1))
        if empty.size:
            raise ValidationError(f"row {int(empty[0])} has no observed replicate")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.ids is not None and len(self.ids) != v.shape[0]:
            raise ValidationError("ids length does not match the number of rows")
        if self.status is not None and len(self.status) != v.shape[0]:
            raise ValidationError("status length does not match the number of rows")

    @property
    def mask(self) -> np.ndarray:
        return ~np.isnan(self.values)


@dataclass(frozen=True)
class ModelParams:
    """Prevalence ``theta_T`` with false-positivity ``p`` and false-negativity ``q``."""

    theta_T: float
    p: float
    q: float

    def __post_init__(self):
        if not 0.0 < self.theta_T < 1.0:
            raise DomainError(f"theta_T must lie in (0, 1), got {self.theta_T}")
        if not 0.0 < self.p < 0.5:
            raise DomainError(f"p must lie in (0, 1/2), got {self.p}")
        if not 0.0 < self.q < 0.5:
            raise DomainError(f"q must lie in (0, 1/2), got {self.q}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.theta_T, self.p, self.q)


def reduce_to_sufficient(raw: RawReplicateTable) -> ReplicateDataset:
    """Collapse each row to (n observed, s positive); replicate order is discarded."""
    mask = raw.mask
    n = mask.sum(axis=1)
    s = np.where(mask, raw.values, 0.0).sum(axis=1).astype(np.int64)
    ids = raw.ids if raw.ids is not None else [f"i{k + 1}" for k in range(len(n))]
    return ReplicateDataset.from_counts(n, s, status=raw.status, ids=ids)


def _parse_int(text: str, what: str, row: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"row {row}: {what} is not an integer: {text!r}") from None


def load_csv(path, format: str = "sufficient") -> ReplicateDataset:
    """Read a dataset from CSV.

    ``sufficient`` files have header ``id,n,s,status`` (status may be blank or
    absent); ``wide`` files have ``id,x1,...,xJ`` with empty or ``NA`` cells
    as missing replicates. Row numbers in error messages count the header as
    row 1.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: missing header row")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if any(cell.strip() for cell in r)]
    if format == "sufficient":
        return _load_sufficient(header, body)
    if format == "wide":
        return _load_wide(header, body)
    raise ValueError(f"unknown CSV format {format!r}")


def _load_sufficient(header: list[str], body: list[list[str]]) -> ReplicateDataset:
    if header[:3] != ["id", "n", "s"] or len(header) > 4 or (len(header) == 4 and header[3] != "status"):
        raise ParseError(f"sufficient CSV header must be id,n,s[,status], got {','.join(header)}")
    records = []
    seen = set()
    for k, row in enumerate(body, start=2):
        row = [c.strip() for c in row] + [""] * (4 - len(row))
        rid = row[0]
        n = _parse_int(row[1], "n", k)
        s = _parse_int(row[2], "s", k)
        status = None if row[3] in MISSING_TOKENS else _parse_int(row[3], "status", k)
        if rid in seen:
            raise ValidationError(f"row {k}: duplicate id {rid!r}")
        seen.add(rid)
        if s > n:
            raise ValidationError(f"row {k}: s={s} exceeds n={n}")
        try:
            records.append(IndividualRecord(rid, n, s, status))
        except ValidationError as exc:
            raise ValidationError(f"row {k}: {exc}") from None
    return ReplicateDataset(tuple(records))


def _load_wide(header: list[str], body: list[list[str]]) -> ReplicateDataset:
    if not header or header[0] != "id":
        raise ParseError("wide CSV header must start with id")
    width = len(header) - 1
    ids, values = [], []
    seen = set()
    for k, row in enumerate(body, start=2):
        row = [c.strip() for c in row]
        if row[0] in seen:
            raise ValidationError(f"row {k}: duplicate id {row[0]!r}")
        seen.add(row[0])
        cells = row[1:] + [""] * (width - len(row) + 1)
        parsed = []
        for cell in cells[:width]:
            if cell in MISSING_TOKENS:
                parsed.append(np.nan)
            elif cell in ("0", "1"):
                parsed.append(float(cell))
            else:
                raise ParseError(f"row {k}: replicate cell must be 0, 1 or empty, got {cell!r}")
        if all(np.isnan(parsed)):
            raise ValidationError(f"row {k}: no observed replicate")
        ids.append(row[0])
        values.append(parsed)
    if not values:
        raise ValidationError("a dataset needs at least one individual")
    return reduce_to_sufficient(RawReplicateTable(np.array(values), ids=tuple(ids)))


def write_csv(data: ReplicateDataset, path) -> None:
    """Write the sufficient format, round-trippable through ``load_csv``."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "n", "s", "status"])
        for r in data.individuals:
            w.writerow([r.id, r.n, r.s, "" if r.status is None else r.status])


def write_wide_csv(raw: RawReplicateTable, path) -> None:
    ids = raw.ids or tuple(f"i{k + 1}" for k in range(raw.values.shape[0]))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id"] + [f"x{j + 1}" for j in range(raw.values.shape[1])])
        for rid, row in zip(ids, raw.values):
            w.writerow([rid] + ["" if np.isnan(v) else int(v) for v in row])


class LatentEstimates(NamedTuple):
    theta_T: float
    p: float
    q: float


def latent_oracle_estimates(data: ReplicateDataset) -> LatentEstimates:
    """Parameters implied by the known latent states.

    Not a :class:`ModelParams`: the empirical rates may legitimately fall
    outside (0, 1/2).
    """
    t = data.status
    n, s = data.n, data.s
    den_p = int(np.sum(n * (1 - t)))
    den_q = int(np.sum(n * t))
    if den_p == 0:
        raise ValidationError("false-positivity rate undefined: no replicate from a status-0 individual")
    if den_q == 0:
        raise ValidationError("false-negativity rate undefined: no replicate from a status-1 individual")
    theta = float(t.mean())
    p = float(np.sum(s * (1 - t))) / den_p
    q = float(np.sum((n - s) * t)) / den_q
    return LatentEstimates(theta, p, q)


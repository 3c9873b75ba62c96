"""Emission records and their CSV serialization.

A trajectory produces a time-ordered list of photon emissions, each tagged
``strong`` or ``weak``. Ensembles are plain lists of records; merging is a
sort by trajectory id, so the result does not depend on completion order.

CSV layout: header ``trajectory_id,time,channel``, one row per emission,
times printed with full round-trip precision.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import AnalysisError

CSV_HEADER = "trajectory_id,time,channel"


class Channel(str, enum.Enum):
    STRONG = "strong"
    WEAK = "weak"

    @property
    def code(self) -> int:
        return 0 if self is Channel.STRONG else 1

    @classmethod
    def from_code(cls, code: int) -> "Channel":
        return cls.STRONG if code == 0 else cls.WEAK


@dataclass(frozen=True)
class EmissionRecord:
    """Emissions of one trajectory over [0, t_max]."""

    trajectory_id: int
    t_max: float
    times: np.ndarray = field(default_factory=lambda: np.empty(0))
    channels: np.ndarray = field(default_factory=lambda: np.empty(0, np.int8))

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=np.float64))
        object.__setattr__(self, "channels", np.asarray(self.channels, dtype=np.int8))
        if self.times.shape != self.channels.shape:
            raise ValueError("times and channels must have equal length")
        if self.times.size and np.any(np.diff(self.times) < 0.0):
            raise ValueError("emission times must be nondecreasing")

    @property
    def n_events(self) -> int:
        return int(self.times.size)

    def channel_times(self, channel: Channel) -> np.ndarray:
        return self.times[self.channels == channel.code]

    def counts(self) -> dict:
        return {
            Channel.STRONG: int(np.sum(self.channels == 0)),
            Channel.WEAK: int(np.sum(self.channels == 1)),
        }


def merge_records(records) -> list:
    """Order-independent ensemble merge (sorted by trajectory id)."""
    out = sorted(records, key=lambda r: r.trajectory_id)
    ids = [r.trajectory_id for r in out]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate trajectory ids in ensemble")
    return out


def write_emissions(path, records) -> None:
    records = merge_records(records)
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for rec in records:
            tid = rec.trajectory_id
            for t, ch in zip(rec.times, rec.channels):
                name = Channel.from_code(int(ch)).value
                # float() strips the numpy scalar so repr() round-trips
                fh.write(f"{tid},{float(t)!r},{name}\n")


def read_emissions(path, t_max=None) -> list:
    """Read an emissions CSV back into an ensemble.

    ``t_max`` is not stored in the CSV; pass it explicitly (it normally
    comes from the run manifest). Defaults to the latest time seen.
    """
    by_id: dict[int, list] = {}
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise AnalysisError(f"bad emissions header: {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise AnalysisError(f"malformed emissions row at line {lineno}")
            tid, t_str, ch_name = parts
            try:
                code = Channel(ch_name).code
            except ValueError:
                raise AnalysisError(
                    f"unknown channel {ch_name!r} at line {lineno}"
                ) from None
            try:
                by_id.setdefault(int(tid), []).append((float(t_str), code))
            except ValueError:
                raise AnalysisError(
                    f"malformed emissions row at line {lineno}"
                ) from None
    latest = max((t for rows in by_id.values() for t, _ in rows), default=0.0)
    horizon = float(t_max) if t_max is not None else latest
    out = []
    for tid in sorted(by_id):
        rows = by_id[tid]
        times = np.array([t for t, _ in rows])
        chans = np.array([c for _, c in rows], dtype=np.int8)
        out.append(EmissionRecord(tid, horizon, times, chans))
    return out

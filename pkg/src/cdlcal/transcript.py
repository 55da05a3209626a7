"""Prediction/state transcripts, the discretized grid, and bucket profiles."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import IO, Iterable, Optional, Sequence, Union

import numpy as np

PathOrStream = Union[str, Path, IO[str]]

# p*m within this distance of an integer j is treated as exactly j/m.
SNAP_TOL = 1e-9


class TranscriptError(ValueError):
    """Raised for malformed or invalid transcript data."""


@dataclass(frozen=True, eq=False)
class Transcript:
    """Paired predictions ``p_t`` in [0, 1] and binary states ``theta_t``."""

    predictions: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.predictions, dtype=float).reshape(-1)
        s = np.asarray(self.states)
        if s.dtype.kind == "f":
            if not np.all(np.isin(s, (0.0, 1.0))):
                raise TranscriptError("states must be exactly 0 or 1")
        s = s.astype(np.int64).reshape(-1)
        if p.size == 0:
            raise TranscriptError("empty transcript")
        if p.size != s.size:
            raise TranscriptError(
                f"predictions and states differ in length ({p.size} != {s.size})"
            )
        if not np.all(np.isfinite(p)) or p.min() < 0.0 or p.max() > 1.0:
            raise TranscriptError("predictions must lie in [0, 1]")
        if not np.all((s == 0) | (s == 1)):
            raise TranscriptError("states must be exactly 0 or 1")
        p.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "predictions", p)
        object.__setattr__(self, "states", s)

    def __len__(self) -> int:
        return self.predictions.size

    @property
    def T(self) -> int:
        return self.predictions.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, Transcript):
            return NotImplemented
        return np.array_equal(self.predictions, other.predictions) and np.array_equal(
            self.states, other.states
        )

    def __hash__(self):
        return hash((self.predictions.tobytes(), self.states.tobytes()))

    @property
    def overall_mean(self) -> float:
        return float(self.states.mean())

    def permuted(self, order: Sequence[int]) -> "Transcript":
        order = np.asarray(order)
        return Transcript(self.predictions[order], self.states[order])


@dataclass(frozen=True)
class Grid:
    """Grid ``q_i = i/m`` with right-closed intervals ``I_1 = [0, 1/m]``, ``I_j = ((j-1)/m, j/m]``."""

    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"grid size m must be an integer >= 2, got {self.m!r}")
        object.__setattr__(self, "m", int(self.m))

    @property
    def values(self) -> np.ndarray:
        return np.arange(1, self.m + 1) / self.m

    def value(self, i: int) -> float:
        """Grid value of 1-based bucket index ``i``."""
        return i / self.m

    def interval(self, i: int) -> tuple:
        """(lo, hi) of ``I_i``; closed at lo only for ``i == 1``."""
        return ((i - 1) / self.m, i / self.m)

    def index_of(self, p) -> np.ndarray | int:
        """1-based index of the interval containing ``p``."""
        arr = np.asarray(p, dtype=float)
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValueError("points must lie in [0, 1]")
        x = arr * self.m
        r = np.rint(x)
        idx = np.where(np.abs(x - r) <= SNAP_TOL, r, np.ceil(x))
        idx = np.clip(idx, 1, self.m).astype(np.int64)
        if idx.ndim == 0:
            return int(idx)
        return idx

    def snap(self, p) -> np.ndarray | float:
        idx = self.index_of(p)
        if isinstance(idx, int):
            return idx / self.m
        return idx / self.m


@dataclass(frozen=True, eq=False)
class BucketProfile:
    """Per-bucket counts ``n_i``, one-counts and the derived ``qhat_i`` / ``G_i``.

    ``values`` are the bucket prediction values ``q_i`` (the grid values when
    built from a :class:`Grid`, otherwise the distinct prediction values).
    ``ones[i]`` counts rounds in bucket ``i`` whose state is 1, so
    ``qhat_i = ones_i / n_i`` is kept exactly.
    """

    values: np.ndarray
    counts: np.ndarray
    ones: np.ndarray
    grid: Optional[Grid] = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        n = np.asarray(self.counts, dtype=np.int64)
        k = np.asarray(self.ones, dtype=np.int64)
        if not (v.shape == n.shape == k.shape) or v.ndim != 1:
            raise ValueError("values, counts and ones must be 1-d arrays of equal length")
        if np.any(n < 0) or np.any(k < 0) or np.any(k > n):
            raise ValueError("need 0 <= ones <= counts")
        if n.sum() == 0:
            raise ValueError("empty profile")
        for a in (v, n, k):
            a.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "counts", n)
        object.__setattr__(self, "ones", k)

    @property
    def T(self) -> int:
        return int(self.counts.sum())

    @property
    def nonempty(self) -> np.ndarray:
        return self.counts > 0

    @property
    def qhat(self) -> np.ndarray:
        """Conditional means; NaN for empty buckets."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.counts > 0, self.ones / np.maximum(self.counts, 1), np.nan)

    def qhat_exact(self, i: int) -> Fraction:
        return Fraction(int(self.ones[i]), int(self.counts[i]))

    @property
    def bias(self) -> np.ndarray:
        """``G_i = n_i |q_i - qhat_i|``, zero for empty buckets."""
        return np.abs(self.counts * self.values - self.ones)

    def active(self):
        """(q, n, qhat) restricted to non-empty buckets."""
        mask = self.nonempty
        return self.values[mask], self.counts[mask], self.ones[mask] / self.counts[mask]

    def to_dict(self) -> dict:
        qhat = self.qhat
        buckets = []
        for i in range(self.values.size):
            buckets.append(
                {
                    "i": i + 1,
                    "q": float(self.values[i]),
                    "n": int(self.counts[i]),
                    "qhat": None if self.counts[i] == 0 else float(qhat[i]),
                    "G": float(self.bias[i]),
                }
            )
        return {"m": self.grid.m if self.grid else None, "buckets": buckets}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BucketProfile):
            return NotImplemented
        return (
            np.array_equal(self.values, other.values)
            and np.array_equal(self.counts, other.counts)
            and np.array_equal(self.ones, other.ones)
        )


def bucketize(t: Transcript, grid: Optional[Grid] = None) -> BucketProfile:
    """Bucket a transcript.

    With a grid, every prediction is mapped to the interval containing it
    (so on-grid predictions are unchanged). Without one, each distinct
    prediction value is its own bucket.
    """
    if grid is None:
        values, inverse = np.unique(t.predictions, return_inverse=True)
        counts = np.bincount(inverse, minlength=values.size)
        ones = np.bincount(inverse, weights=t.states, minlength=values.size)
        return BucketProfile(values, counts, ones.astype(np.int64))
    idx = grid.index_of(t.predictions) - 1
    counts = np.bincount(idx, minlength=grid.m)
    ones = np.bincount(idx, weights=t.states, minlength=grid.m).astype(np.int64)
    return BucketProfile(grid.values, counts, ones, grid=grid)


def profile_from_buckets(
    values: Iterable[float], counts: Iterable[int], ones: Iterable[int], grid: Optional[Grid] = None
) -> BucketProfile:
    return BucketProfile(np.asarray(list(values), float), np.asarray(list(counts)), np.asarray(list(ones)), grid)


def _open(path: PathOrStream, mode: str):
    if isinstance(path, (str, Path)):
        return open(path, mode, newline=""), True
    return path, False


def read_transcript(path: PathOrStream) -> Transcript:
    """Read a ``t,p,theta`` CSV transcript."""
    fh, owned = _open(path, "r")
    try:
        text = fh.read()
    finally:
        if owned:
            fh.close()
    reader = csv.reader(io.StringIO(text))
    preds, states = [], []
    expected_t = 1
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if lineno == 1 and row[0].strip().lower() == "t":
            if [c.strip().lower() for c in row] != ["t", "p", "theta"]:
                raise TranscriptError(f"line 1: expected header 't,p,theta', got {row!r}")
            continue
        if len(row) != 3:
            raise TranscriptError(f"line {lineno}: expected 3 fields, got {len(row)}")
        try:
            t = int(row[0])
            p = float(row[1])
            theta = float(row[2])
        except ValueError as exc:
            raise TranscriptError(f"line {lineno}: {exc}") from None
        if t != expected_t:
            raise TranscriptError(f"line {lineno}: round {t} out of order (expected {expected_t})")
        if not (0.0 <= p <= 1.0) or math.isnan(p):
            raise TranscriptError(f"line {lineno}: prediction {p} outside [0, 1]")
        if theta not in (0.0, 1.0):
            raise TranscriptError(f"line {lineno}: state {row[2]!r} is not 0 or 1")
        preds.append(p)
        states.append(int(theta))
        expected_t += 1
    if not preds:
        raise TranscriptError("empty transcript")
    return Transcript(np.array(preds), np.array(states))


def write_transcript(t: Transcript, path: PathOrStream) -> None:
    fh, owned = _open(path, "w")
    try:
        fh.write("t,p,theta\n")
        for i, (p, s) in enumerate(zip(t.predictions, t.states), start=1):
            fh.write(f"{i},{float(p)!r},{int(s)}\n")
    finally:
        if owned:
            fh.close()

"""State-choosing opponents.

An adversary sees the history and the current round's mixed strategy
(:class:`~cdlcal.predictor.RoundStrategy`), never the realized prediction.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .predictor import History, RoundStrategy, UnsupportedMode, expected_weighted_gain

GREEDY_TIE_TOL = 1e-12


class ScriptExhausted(RuntimeError):
    pass


class Adversary:
    name = "adversary"

    def next_state(self, history: History, strategy: RoundStrategy) -> int:
        raise NotImplementedError

    def conditional_mean(self, history: History) -> float:
        raise UnsupportedMode(f"{self.name} adversary does not expose conditional means")


class IIDAdversary(Adversary):
    """Independent Bernoulli(rho) states."""

    def __init__(self, rho: float, seed: Optional[int] = None):
        if not 0.0 <= rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        self.rho = float(rho)
        self.rng = np.random.default_rng(seed)
        self.name = f"iid:{rho:g}"

    def next_state(self, history, strategy) -> int:
        return int(self.rng.random() < self.rho)

    def conditional_mean(self, history) -> float:
        return self.rho


class ScriptedAdversary(Adversary):
    """Replays a fixed state sequence."""

    def __init__(self, states: Sequence[int], name: str = "script"):
        arr = np.asarray(states)
        if arr.ndim != 1 or not np.all((arr == 0) | (arr == 1)):
            raise ValueError("scripted states must be a sequence of 0/1")
        self.states = arr.astype(np.int64)
        self.name = name

    @classmethod
    def alternating(cls, T: int, start: int = 0) -> "ScriptedAdversary":
        return cls((np.arange(T) + start) % 2, name="alternate")

    def _at(self, history) -> int:
        t = len(history.states)
        if t >= self.states.size:
            raise ScriptExhausted(f"script has only {self.states.size} states")
        return int(self.states[t])

    def next_state(self, history, strategy) -> int:
        return self._at(history)

    def conditional_mean(self, history) -> float:
        return float(self._at(history))


class GreedyAdversary(Adversary):
    """Picks the state maximizing the round's expected weighted gain; ties go to 1."""

    name = "greedy"

    def next_state(self, history, strategy: RoundStrategy) -> int:
        g0 = expected_weighted_gain(strategy, 0)
        g1 = expected_weighted_gain(strategy, 1)
        return 1 if g1 >= g0 - GREEDY_TIE_TOL else 0


def read_script(path) -> np.ndarray:
    """States from a CSV: either a ``t,p,theta`` transcript or one 0/1 value per line."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if rows and not rows[0][-1].strip().lstrip("-").replace(".", "", 1).isdigit():
        rows = rows[1:]
    try:
        vals = [float(r[-1]) for r in rows]
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    if not vals:
        raise ValueError(f"{path}: empty script")
    return np.asarray(vals)


def parse_adversary(spec: str, seed: Optional[int] = None, T: Optional[int] = None) -> Adversary:
    """Build an adversary from ``iid:<rho>``, ``script:<path>``, ``alternate`` or ``greedy``."""
    kind, _, arg = spec.partition(":")
    if kind == "iid":
        return IIDAdversary(float(arg), seed)
    if kind == "script":
        if arg == "alternate":
            if T is None:
                raise ValueError("alternating script needs T")
            return ScriptedAdversary.alternating(T)
        return ScriptedAdversary(read_script(Path(arg)), name=f"script:{arg}")
    if kind == "alternate":
        if T is None:
            raise ValueError("alternating script needs T")
        return ScriptedAdversary.alternating(T)
    if kind == "greedy":
        return GreedyAdversary()
    raise ValueError(f"unknown adversary spec {spec!r}")

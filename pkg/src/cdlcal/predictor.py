"""The online CDL-minimizing predictor and the truthful rounding baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, TextIO

import numpy as np

from .expert_oracle import ExpertOracle
from .metrics import deviation_stat
from .transcript import Grid, Transcript, bucketize

H_TOL = 1e-12


class UnsupportedMode(RuntimeError):
    """The adversary cannot serve the requested query."""


def default_grid_size(T: int) -> int:
    """``round(sqrt(T) / ln T)``, at least 2."""
    if T < 2:
        return 2
    return max(2, int(round(math.sqrt(T) / math.log(T))))


@dataclass(frozen=True)
class PredictionDistribution:
    """A distribution with at most two support points in [0, 1]."""

    points: tuple
    probs: tuple

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        prs = tuple(float(p) for p in self.probs)
        if not 1 <= len(pts) <= 2 or len(pts) != len(prs):
            raise ValueError("need one or two support points with matching probabilities")
        if any(not 0.0 <= p <= 1.0 for p in pts):
            raise ValueError("support points must lie in [0, 1]")
        if any(p < 0.0 for p in prs) or abs(sum(prs) - 1.0) > 1e-12:
            raise ValueError("probabilities must be non-negative and sum to 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "probs", prs)

    @classmethod
    def point(cls, p: float) -> "PredictionDistribution":
        return cls((p,), (1.0,))

    def sample(self, rng: np.random.Generator) -> float:
        u = rng.random()
        return self.points[0] if len(self.points) == 1 or u < self.probs[0] else self.points[1]

    def mean(self) -> float:
        return float(sum(p * w for p, w in zip(self.points, self.probs)))


class RoundStrategy(NamedTuple):
    """What the adversary may see in a round: the mixed strategy, never the draw."""

    distribution: PredictionDistribution
    weights: np.ndarray  # (m, 2), columns sigma = +1, -1
    grid: Grid


def bucket_coefficients(weights) -> np.ndarray:
    """``c_i = w[i, +1] - w[i, -1]``."""
    w = np.asarray(weights, dtype=float)
    return w[:, 0] - w[:, 1]


def round_distribution(weights, grid: Grid, eps: float) -> PredictionDistribution:
    """A distribution ``s`` with ``h(s) <= eps`` for the weighted bias gains.

    With ``c_i = w[i,+] - w[i,-]``: a bucket with ``c_i = 0`` gets a point mass
    at ``q_i``; if every ``c_i > 0`` play 0, if every ``c_i < 0`` play 1.
    Otherwise, at the first adjacent sign change ``(i, i+1)``, mix ``i/m``
    and ``i/m + delta`` (``delta = min(eps, 1/(2m))``) so the expected
    coefficient is zero.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    c = bucket_coefficients(weights)
    m = grid.m
    if c.size != m:
        raise ValueError("weights do not match the grid")
    zero = np.flatnonzero(c == 0.0)
    if zero.size:
        return PredictionDistribution.point(grid.value(int(zero[0]) + 1))
    if np.all(c > 0):
        return PredictionDistribution.point(0.0)
    if np.all(c < 0):
        return PredictionDistribution.point(1.0)
    i = int(np.flatnonzero(np.sign(c[:-1]) != np.sign(c[1:]))[0]) + 1  # 1-based
    a, b = abs(c[i - 1]), abs(c[i])
    lam = b / (a + b)
    delta = min(eps, 1.0 / (2 * m))
    return PredictionDistribution((i / m, i / m + delta), (lam, 1.0 - lam))


def _interval_of(p: float, m: int) -> int:
    """1-based interval index by direct interval tests (independent of Grid.index_of)."""
    for i in range(1, m + 1):
        lo, hi = (i - 1) / m, i / m
        if (i == 1 and 0.0 <= p <= hi) or (lo < p <= hi):
            return i
    raise ValueError(f"{p} outside [0, 1]")


def h_value(dist: PredictionDistribution, weights, m: int) -> float:
    """``max_theta E_{p~s} sum_{i,sigma} w[i,sigma] sigma 1{p in I_i} (p - theta)``."""
    w = np.asarray(weights, dtype=float)
    best = -math.inf
    for theta in (0, 1):
        total = 0.0
        for p, prob in zip(dist.points, dist.probs):
            i = _interval_of(p, m)
            total += prob * (w[i - 1, 0] * (p - theta) - w[i - 1, 1] * (p - theta))
        best = max(best, total)
    return best


def expected_weighted_gain(strategy: RoundStrategy, theta: int) -> float:
    """``E_{p~s} sum w l(p, theta)`` for the round's strategy."""
    c = bucket_coefficients(strategy.weights)
    idx = strategy.grid.index_of(np.array(strategy.distribution.points))
    return float(sum(pr * c[i - 1] * (p - theta)
                     for p, pr, i in zip(strategy.distribution.points, strategy.distribution.probs, idx)))


@dataclass(frozen=True)
class PredictorConfig:
    T: int
    m: Optional[int] = None
    eps: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.T < 2:
            raise ValueError("T must be at least 2")
        m = default_grid_size(self.T) if self.m is None else int(self.m)
        eps = 1.0 / self.T if self.eps is None else float(self.eps)
        if m < 2:
            raise ValueError("m must be at least 2")
        if not eps > 0:
            raise ValueError("eps must be positive")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "eps", eps)

    @property
    def grid(self) -> Grid:
        return Grid(self.m)

    @property
    def alpha(self) -> float:
        return 2.0 * math.sqrt(math.log(self.T * self.m))

    @property
    def beta(self) -> float:
        return 1.0 / self.m


class History(NamedTuple):
    predictions: np.ndarray
    states: np.ndarray


@dataclass
class Trace:
    """Per-round record of a run."""

    p_tilde: List[float] = field(default_factory=list)
    p: List[float] = field(default_factory=list)
    theta: List[int] = field(default_factory=list)
    bucket: List[int] = field(default_factory=list)
    support: List[tuple] = field(default_factory=list)
    probs: List[tuple] = field(default_factory=list)
    h: List[float] = field(default_factory=list)
    gain: List[float] = field(default_factory=list)  # gain of (bucket, +1); (bucket, -1) gets its negative
    eps: float = 0.0
    weights: Optional[List[np.ndarray]] = None

    @property
    def max_h_excess(self) -> float:
        """``max_t h_t - eps`` (<= 0 when every round met the target)."""
        return max(self.h) - self.eps if self.h else -math.inf

    def write_csv(self, fh: TextIO) -> None:
        fh.write("t,p_tilde,p,theta,bucket,point_a,prob_a,point_b,prob_b,h,gain\n")
        for t in range(len(self.p)):
            pts, prs = self.support[t], self.probs[t]
            pb = repr(pts[1]) if len(pts) > 1 else ""
            wb = repr(prs[1]) if len(prs) > 1 else ""
            fh.write(f"{t + 1},{self.p_tilde[t]!r},{self.p[t]!r},{self.theta[t]},{self.bucket[t]},"
                     f"{pts[0]!r},{prs[0]!r},{pb},{wb},{self.h[t]!r},{self.gain[t]!r}\n")


class CDLPredictor:
    """Online predictor: oracle weights, a low-``h`` distribution, a draw, then snapping to the grid."""

    def __init__(self, config: PredictorConfig, rng: Optional[np.random.Generator] = None,
                 weight_trace: Optional[TextIO] = None):
        self.config = config
        self.grid = config.grid
        self.oracle = ExpertOracle(config.m, config.T, trace=weight_trace)
        self.rng = rng if rng is not None else np.random.default_rng(config.seed)
        self._pending: Optional[tuple] = None

    def strategy(self) -> RoundStrategy:
        w = self.oracle.weights()
        return RoundStrategy(round_distribution(w, self.grid, self.config.eps), w, self.grid)

    def draw(self, strategy: RoundStrategy):
        """Sample ``p_tilde`` and snap it; returns ``(p_tilde, p, bucket)``."""
        pt = strategy.distribution.sample(self.rng)
        i = self.grid.index_of(pt)
        self._pending = (pt, i)
        return pt, self.grid.value(i), i

    def observe(self, theta: int) -> float:
        """Feed the realized state; returns the gain of expert ``(bucket, +1)``."""
        if self._pending is None:
            raise RuntimeError("observe() called before draw()")
        pt, i = self._pending
        self._pending = None
        gains = np.zeros((self.grid.m, 2))
        g = pt - theta
        gains[i - 1, 0] = g
        gains[i - 1, 1] = -g
        self.oracle.update(gains)
        return g


def run_algorithm1(config: PredictorConfig, adversary, check: bool = True,
                   record_weights: bool = False, weight_trace: Optional[TextIO] = None):
    """Play ``config.T`` rounds against ``adversary``; returns ``(Transcript, Trace)``.

    The adversary is shown each round's strategy before the draw and never
    sees the drawn point. With ``check`` every round's ``h`` is recomputed
    independently and a value above ``eps`` raises ``AssertionError``.
    """
    pred = CDLPredictor(config, weight_trace=weight_trace)
    trace = Trace(eps=config.eps, weights=[] if record_weights else None)
    T = config.T
    preds = np.zeros(T)
    states = np.zeros(T, dtype=np.int64)
    for t in range(T):
        strat = pred.strategy()
        h = h_value(strat.distribution, strat.weights, config.m)
        if check and h > config.eps + H_TOL:
            raise AssertionError(f"round {t + 1}: h = {h!r} exceeds eps = {config.eps!r}")
        theta = int(adversary.next_state(History(preds[:t], states[:t]), strat))
        if theta not in (0, 1):
            raise ValueError(f"adversary returned state {theta!r}")
        pt, p, i = pred.draw(strat)
        gain = pred.observe(theta)
        preds[t], states[t] = p, theta
        trace.p_tilde.append(pt)
        trace.p.append(p)
        trace.theta.append(theta)
        trace.bucket.append(i)
        trace.support.append(strat.distribution.points)
        trace.probs.append(strat.distribution.probs)
        trace.h.append(h)
        trace.gain.append(gain)
        if record_weights:
            trace.weights.append(strat.weights)
    return Transcript(preds, states), trace


def nearest_grid_value(x: float, grid: Grid) -> float:
    """Closest ``q_i`` to ``x``; ties go to the smaller value."""
    vals = grid.values
    return float(vals[int(np.argmin(np.abs(vals - x)))])


def run_truthful_baseline(config: PredictorConfig, adversary):
    """Predict the grid value nearest the adversary's conditional mean.

    Returns ``(Transcript, D)`` with ``D`` the deviation statistic at
    ``alpha = 2 sqrt(log(Tm))``, ``beta = 1/m``.
    """
    grid = config.grid
    T = config.T
    preds = np.zeros(T)
    states = np.zeros(T, dtype=np.int64)
    for t in range(T):
        hist = History(preds[:t], states[:t])
        try:
            mean = adversary.conditional_mean(hist)
        except UnsupportedMode:
            raise
        p = nearest_grid_value(mean, grid)
        strat = RoundStrategy(PredictionDistribution.point(p), np.zeros((grid.m, 2)), grid)
        preds[t] = p
        states[t] = int(adversary.next_state(hist, strat))
    tr = Transcript(preds, states)
    D = deviation_stat(bucketize(tr, grid), config.alpha, config.beta)
    return tr, D

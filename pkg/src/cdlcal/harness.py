"""Worked-example fixtures, T-sweeps of the online predictor, and rate summaries."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np

from .adversary import parse_adversary
from .expert_oracle import ORACLE_CONSTANT, ExpertOracle, RegretAudit
from .metrics import cdl, deviation_stat, ece, l2cal, vcdl
from .predictor import PredictorConfig, run_algorithm1
from .transcript import Transcript, bucketize

SLOPE_THRESHOLD = -0.40
NORMALIZED_RATIO_LIMIT = 1.5
REFERENCE_T = 2 ** 10
DEFAULT_ADVERSARIES = ("greedy", "iid:0.5", "alternate")


class FixtureError(ValueError):
    pass


def _two_bucket(T: int, values, means, name: str) -> Transcript:
    """Half the rounds at each value, with the stated conditional means realized exactly."""
    if T <= 0 or T % 2:
        raise FixtureError(f"{name}: T must be a positive even number")
    half = T // 2
    ones = [round(half * mu) for mu in means]
    if any(abs(k - half * mu) > 1e-9 for k, mu in zip(ones, means)):
        raise FixtureError(f"{name}: T/2 = {half} must make every conditional mean exact "
                           f"(T must be a multiple of 10)")
    p = np.empty(T)
    s = np.zeros(T, dtype=np.int64)
    for b, (v, k) in enumerate(zip(values, ones)):
        idx = np.arange(b, T, 2)  # interleave the two values
        p[idx] = v
        s[idx[:k]] = 1
    return Transcript(p, s)


def intro_miscal(T: int = 10) -> Transcript:
    """Predictions 0.4 / 0.6 with conditional frequencies 0.2 / 0.8."""
    return _two_bucket(T, (0.4, 0.6), (0.2, 0.8), "intro_miscal")


def intro_cal(T: int = 10) -> Transcript:
    """Predictions 0.2 / 0.8 with matching conditional frequencies."""
    return _two_bucket(T, (0.2, 0.8), (0.2, 0.8), "intro_cal")


def ex41a(eps: float = 0.1, T: int = 100) -> Transcript:
    """Always predict ``1 - eps``; the state is always 1."""
    if not 0.0 < eps <= 1.0 or T < 1:
        raise FixtureError("ex41a: need 0 < eps <= 1 and T >= 1")
    return Transcript(np.full(T, 1.0 - eps), np.ones(T, dtype=np.int64))


def ex41b(T: int = 100) -> Transcript:
    """``sqrt(T)`` periods; period ``i = 0..sqrt(T)-1`` has state frequency ``i/sqrt(T)`` and predicts ``(i+1)/sqrt(T)``."""
    r = math.isqrt(T) if T > 0 else 0
    if T <= 0 or r * r != T:
        raise FixtureError(f"ex41b: T = {T} must be a perfect square")
    p = np.repeat((np.arange(r) + 1) / r, r)
    s = np.zeros(T, dtype=np.int64)
    for i in range(r):
        s[i * r: i * r + i] = 1
    return Transcript(p, s)


def ex42b(eps: Optional[float] = None, T: int = 400) -> Transcript:
    """First half: state 1, predict ``1/2 + eps``; second half: state 0, predict ``1/2 - eps``.

    ``eps`` defaults to ``1/sqrt(T)``.
    """
    if T <= 0 or T % 2:
        raise FixtureError(f"ex42b: T = {T} must be a positive even number")
    eps = 1.0 / math.sqrt(T) if eps is None else float(eps)
    if not 0.0 <= eps <= 0.5:
        raise FixtureError("ex42b: eps must lie in [0, 1/2]")
    half = T // 2
    p = np.concatenate([np.full(half, 0.5 + eps), np.full(half, 0.5 - eps)])
    s = np.concatenate([np.ones(half, dtype=np.int64), np.zeros(half, dtype=np.int64)])
    return Transcript(p, s)


def ex43(T: int = 8) -> Transcript:
    """Predict 3/4 when the state is 1 and 1/4 when it is 0, half the rounds each."""
    if T <= 0 or T % 2:
        raise FixtureError(f"ex43: T = {T} must be a positive even number")
    p = np.tile([0.75, 0.25], T // 2)
    s = np.tile([1, 0], T // 2).astype(np.int64)
    return Transcript(p, s)


FIXTURES: Dict[str, Callable[..., Transcript]] = {
    "intro_miscal": intro_miscal,
    "intro_cal": intro_cal,
    "ex41a": ex41a,
    "ex41b": ex41b,
    "ex42b": ex42b,
    "ex43": ex43,
}


def fixture(name: str, **params) -> Transcript:
    try:
        fn = FIXTURES[name]
    except KeyError:
        raise FixtureError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None
    return fn(**{k: v for k, v in params.items() if v is not None})


STREAM_KINDS = ("uniform", "power_law", "concentrated", "fixed_sign")


def oracle_stress_stream(m: int, T: int, seed: int, kind: Optional[str] = None,
                         C: float = ORACLE_CONSTANT) -> RegretAudit:
    """Feed the oracle one bucket per round with a gain sign chosen against its current weights.

    The active bucket is drawn from a ``kind``-shaped distribution (cycling
    through :data:`STREAM_KINDS` by seed when ``kind`` is None) and the
    magnitude is uniform on [0.2, 1]. ``fixed_sign`` always rewards the
    ``+1`` expert instead, which drives a single expert's regret up.
    """
    kind = STREAM_KINDS[seed % len(STREAM_KINDS)] if kind is None else kind
    rng = np.random.default_rng([seed, m, T])
    if kind in ("uniform", "fixed_sign"):
        probs = np.ones(m)
    elif kind == "power_law":
        probs = 1.0 / np.arange(1, m + 1) ** 1.5
    elif kind == "concentrated":
        probs = np.r_[0.9, np.full(m - 1, 0.1 / max(m - 1, 1))]
    else:
        raise ValueError(f"unknown stream kind {kind!r}")
    probs = probs / probs.sum()
    oracle = ExpertOracle(m, T)
    g = np.zeros((m, 2))
    for _ in range(T):
        i = rng.choice(m, p=probs)
        x = rng.uniform(0.2, 1.0)
        if kind == "fixed_sign":
            sign = 1.0
        else:
            w = oracle.weights()
            sign = -1.0 if w[i, 0] > w[i, 1] else 1.0
        g[i, 0], g[i, 1] = sign * x, -sign * x
        oracle.update(g)
        g[i] = 0.0
    return oracle.regret_audit(C)


@dataclass(frozen=True)
class SweepRecord:
    T: int
    adversary: str
    seed: int
    m: int
    cdl: float
    vcdl: float
    ece: float
    l2: float
    deviation: float
    max_h_excess: float
    error: str = ""
    runtime: float = 0.0  # wall-clock seconds; not written to the CSV

    @property
    def key(self):
        return (self.T, self.adversary, self.seed)


CSV_FIELDS = [f.name for f in fields(SweepRecord) if f.name != "runtime"]


def run_cell(T: int, adversary: str, seed: int, m: Optional[int] = None, eps: Optional[float] = None,
             check: bool = True) -> SweepRecord:
    t0 = time.perf_counter()
    cfg = PredictorConfig(T=T, m=m, eps=eps, seed=seed)
    try:
        adv = parse_adversary(adversary, seed=[seed, 1], T=T)
        tr, trace = run_algorithm1(cfg, adv, check=check)
        prof = bucketize(tr, cfg.grid)
        value, _ = cdl(prof)
        nums = (value, vcdl(prof)[0], ece(prof), l2cal(prof), deviation_stat(prof, cfg.alpha, cfg.beta),
                trace.max_h_excess)
        rec = SweepRecord(T, adversary, seed, cfg.m, *map(float, nums))
    except Exception as exc:  # recorded, the sweep continues
        nan = float("nan")
        rec = SweepRecord(T, adversary, seed, cfg.m, nan, nan, nan, nan, nan, nan,
                          error=f"{type(exc).__name__}: {exc}")
    return SweepRecord(**{**asdict(rec), "runtime": time.perf_counter() - t0})


@dataclass
class SweepResult:
    records: List[SweepRecord]

    def __post_init__(self):
        self.records = sorted(self.records, key=lambda r: r.key)

    @property
    def T_values(self) -> List[int]:
        return sorted({r.T for r in self.records})

    @property
    def adversaries(self) -> List[str]:
        return sorted({r.adversary for r in self.records})

    def cell_values(self, T: int, adversary: str, metric: str = "cdl") -> np.ndarray:
        return np.array([getattr(r, metric) for r in self.records
                         if r.T == T and r.adversary == adversary and not r.error])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in self.records:
            row = []
            for name in CSV_FIELDS:
                v = getattr(r, name)
                row.append(repr(float(v)) if isinstance(v, float) else v)
            w.writerow(row)
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "SweepResult":
        rows = list(csv.DictReader(io.StringIO(text)))
        recs = []
        for row in rows:
            recs.append(SweepRecord(
                T=int(row["T"]), adversary=row["adversary"], seed=int(row["seed"]), m=int(row["m"]),
                cdl=float(row["cdl"]), vcdl=float(row["vcdl"]), ece=float(row["ece"]), l2=float(row["l2"]),
                deviation=float(row["deviation"]), max_h_excess=float(row["max_h_excess"]),
                error=row["error"]))
        return cls(recs)

    @classmethod
    def read_csv(cls, path) -> "SweepResult":
        return cls.from_csv(Path(path).read_text())

    def summary(self) -> dict:
        """Per-(T, adversary) means and standard errors, folded in record order."""
        cells = []
        for T in self.T_values:
            for adv in self.adversaries:
                row = {"T": T, "adversary": adv}
                for metric in ("cdl", "vcdl", "ece", "l2", "deviation"):
                    v = self.cell_values(T, adv, metric)
                    row[f"{metric}_mean"] = float(v.mean()) if v.size else None
                    row[f"{metric}_se"] = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else None
                row["n"] = int(self.cell_values(T, adv).size)
                row["failures"] = sum(1 for r in self.records if r.T == T and r.adversary == adv and r.error)
                cells.append(row)
        return {"cells": cells, "rate": rate_report(self) if self.records else None}


def sweep(T_list: Iterable[int], adversaries: Sequence[str] = DEFAULT_ADVERSARIES, seeds: Iterable[int] = range(20),
          m: Optional[int] = None, eps: Optional[float] = None, check: bool = True,
          progress: Optional[Callable[[SweepRecord], None]] = None) -> SweepResult:
    """Run the predictor on every (T, adversary, seed) cell and collect the metric panel."""
    records = []
    seeds = list(seeds)
    for T in T_list:
        for adv in adversaries:
            for s in seeds:
                rec = run_cell(int(T), adv, int(s), m=m, eps=eps, check=check)
                records.append(rec)
                if progress is not None:
                    progress(rec)
    return SweepResult(records)


def _slope(Ts, values) -> Optional[float]:
    Ts = np.asarray(Ts, dtype=float)
    values = np.asarray(values, dtype=float)
    ok = np.isfinite(values) & (values > 0)
    if ok.sum() < 2:
        return None
    return float(np.polyfit(np.log(Ts[ok]), np.log(values[ok]), 1)[0])


def rate_report(sr: SweepResult) -> dict:
    """Envelope (max over adversaries of mean CDL) per T, its log-log slope and normalized statistic."""
    if not sr.records:
        raise ValueError("empty sweep")
    Ts = sr.T_values
    per_adv = {}
    for adv in sr.adversaries:
        means = [float(sr.cell_values(T, adv).mean()) if sr.cell_values(T, adv).size else float("nan") for T in Ts]
        per_adv[adv] = {"mean_cdl": means, "slope": _slope(Ts, means)}
    envelope = [max((per_adv[a]["mean_cdl"][k] for a in per_adv), default=float("nan")) for k in range(len(Ts))]
    normalized = [e * math.sqrt(T) / math.log2(T) for e, T in zip(envelope, Ts)]
    slope = _slope(Ts, envelope)
    ref = REFERENCE_T if REFERENCE_T in Ts else Ts[0]
    ratio = None
    if len(Ts) > 1:
        ratio = normalized[-1] / normalized[Ts.index(ref)]
    ece_ok = all(r.ece >= r.cdl / 2 - 1e-9 for r in sr.records if not r.error)
    h_ok = all(r.max_h_excess <= 1e-12 for r in sr.records if not r.error)
    return {
        "T": Ts,
        "envelope_cdl": envelope,
        "normalized": normalized,
        "normalized_max": max(normalized),
        "reference_T": ref,
        "normalized_ratio": ratio,
        "slope": slope,
        "per_adversary": per_adv,
        "checks": {
            "slope": None if slope is None else slope <= SLOPE_THRESHOLD,
            "normalized_ratio": None if ratio is None else ratio <= NORMALIZED_RATIO_LIMIT,
            "ece_at_least_half_cdl": ece_ok,
            "h_within_eps": h_ok,
            "no_failures": not any(r.error for r in sr.records),
        },
    }


def rate_passed(report: dict) -> bool:
    return all(v is True for v in report["checks"].values())


def write_sweep(sr: SweepResult, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sr.write_csv(out / "sweep.csv")
    (out / "summary.json").write_text(json.dumps(sr.summary(), indent=2, sort_keys=True) + "\n")

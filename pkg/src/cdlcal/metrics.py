"""Calibration error metrics on bucket profiles and transcripts.

All bucketed sums skip empty buckets. LP-based metrics (``smcal``, ``cdl``,
``ucal``) go through :mod:`cdlcal.lp` and raise :class:`~cdlcal.lp.LPError`
if the solver cannot certify an optimum.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .lp import LinearProgram, solve_or_raise
from .scoring import MERGE_TOL, TabularScoringRule, merge_reports, vbreg
from .transcript import BucketProfile, Grid, Transcript, bucketize

ALL_METRICS = ("ece", "l2", "smcal", "vcdl", "cdl", "ucal")
SANDWICH_TOL = 1e-6


def ece(profile: BucketProfile) -> float:
    return float(profile.bias.sum() / profile.T)


def l2cal(profile: BucketProfile) -> float:
    q, n, qhat = profile.active()
    return float(np.sum(n * (q - qhat) ** 2) / profile.T)


@dataclass(frozen=True)
class SmoothCalibration:
    value: float
    points: np.ndarray  # distinct prediction values
    sigma: np.ndarray  # optimal Lipschitz weights at those points


def smcal_detail(t: Transcript) -> SmoothCalibration:
    """Smooth calibration error as an LP over 1-Lipschitz weights at the distinct predictions."""
    v, inverse = np.unique(t.predictions, return_inverse=True)
    g = np.bincount(inverse, weights=t.predictions - t.states, minlength=v.size) / t.T
    k = v.size
    if k == 1:
        return SmoothCalibration(abs(float(g[0])), v, np.array([1.0 if g[0] >= 0 else -1.0]))
    d = np.diff(v)
    D = np.zeros((k - 1, k))
    D[np.arange(k - 1), np.arange(k - 1)] = -1.0
    D[np.arange(k - 1), np.arange(1, k)] = 1.0
    lp = LinearProgram(c=g, A_ub=np.vstack([D, -D]), b_ub=np.concatenate([d, d]),
                       lb=-np.ones(k), ub=np.ones(k))
    res = solve_or_raise(lp)
    return SmoothCalibration(max(res.value, 0.0), v, res.x)


def smcal(t: Transcript) -> float:
    return smcal_detail(t).value


def distcal_upper(t: Transcript) -> float:
    """Upper bound ``sqrt(32 smcal)`` on the distance to calibration (not the exact distance)."""
    return math.sqrt(32.0 * smcal(t))


def cfdl(profile: BucketProfile, rule) -> float:
    """Average Bregman loss ``(1/T) sum n_i breg(q_i, qhat_i)`` under ``rule``."""
    q, n, qhat = profile.active()
    total = sum(int(ni) * rule.breg(float(qi), float(hi)) for qi, ni, hi in zip(q, n, qhat))
    return float(total / profile.T)


def cfdl_v(profile: BucketProfile, mu: float) -> float:
    q, n, qhat = profile.active()
    return float(np.sum(n * vbreg(mu, q, qhat)) / profile.T)


@dataclass(frozen=True)
class VCDLResult:
    value: float
    mu: float
    # False when the supremum is only approached as a one-sided limit at ``mu``.
    attained: bool
    side: str = "point"  # "point", "left" or "right"


def _crossing_value(q, n, qhat, T, active, mu):
    if not active.any():
        return 0.0
    return float(np.sum(n[active] * np.abs(qhat[active] - mu)) / (T * max(mu, 1.0 - mu)))


def vcdl_detail(profile: BucketProfile, tol: float = 1e-12) -> VCDLResult:
    """Exact ``sup_mu cfdl_v`` via point values and one-sided limits at every breakpoint.

    Between consecutive breakpoints the crossing set is fixed and the value
    is a ratio of linear functions, so the supremum sits at a cell end.
    Ties prefer attained values, then the smallest kink.
    """
    q, n, qhat = profile.active()
    T = profile.T
    bps = merge_reports(np.concatenate([q, qhat, [0.0, 0.5, 1.0]]))
    cands = []  # (value, attained, mu, side)
    for b in bps:
        cands.append((cfdl_v(profile, float(b)), True, float(b), "point"))
    for lo, hi in zip(bps[:-1], bps[1:]):
        mid = 0.5 * (lo + hi)
        active = ((q < mid) & (qhat > mid)) | ((q >= mid) & (qhat < mid))
        cands.append((_crossing_value(q, n, qhat, T, active, float(lo)), False, float(lo), "right"))
        cands.append((_crossing_value(q, n, qhat, T, active, float(hi)), False, float(hi), "left"))
    best = max(c[0] for c in cands)
    near = [c for c in cands if c[0] >= best - tol]
    near.sort(key=lambda c: (not c[1], c[2]))
    _, attained, mu, side = near[0]
    return VCDLResult(float(best), mu, attained, side)


def vcdl(profile: BucketProfile):
    """Return ``(value, mu_star)``."""
    r = vcdl_detail(profile)
    return r.value, r.mu


def _report_index(reports: np.ndarray, x: float) -> int:
    j = int(np.argmin(np.abs(reports - x)))
    if abs(reports[j] - x) > MERGE_TOL:
        raise KeyError(x)
    return j


def _properness_rows(reports: np.ndarray, all_pairs: bool = False) -> np.ndarray:
    """Rows ``E_a[s(b)] - E_a[s(a)] <= 0``; variable ``2k + theta`` is ``s(reports[k], theta)``.

    On sorted reports the adjacent pairs already imply every other pair:
    they force ``s(k, 1) - s(k, 0)`` to be nondecreasing in ``k``, and the
    difference of the expected-score lines of ``a`` and ``b`` then telescopes
    into adjacent differences that are each non-positive at ``a``. So by
    default only the ``2(k - 1)`` adjacent rows are emitted.
    """
    k = reports.size
    if all_pairs:
        a, b = np.nonzero(~np.eye(k, dtype=bool))
    else:
        a = np.concatenate([np.arange(k - 1), np.arange(1, k)])
        b = np.concatenate([np.arange(1, k), np.arange(k - 1)])
    rows = np.zeros((a.size, 2 * k))
    idx = np.arange(a.size)
    ra = reports[a]
    rows[idx, 2 * b + 1] += ra
    rows[idx, 2 * b] += 1.0 - ra
    rows[idx, 2 * a + 1] -= ra
    rows[idx, 2 * a] -= 1.0 - ra
    return rows


def _decision_lp(reports: np.ndarray, c: np.ndarray):
    A = _properness_rows(reports)
    lp = LinearProgram(c=c, A_ub=A, b_ub=np.zeros(A.shape[0]),
                       lb=np.zeros(c.size), ub=np.ones(c.size))
    res = solve_or_raise(lp)
    x = np.clip(res.x, 0.0, 1.0)
    return res.value, TabularScoringRule(reports, x.reshape(-1, 2))


def cdl(profile: BucketProfile):
    """Worst-case swap loss over bounded proper rules; returns ``(value, optimal_rule)``."""
    q, n, qhat = profile.active()
    reports = merge_reports(np.concatenate([q, qhat, [0.0, 1.0]]))
    c = np.zeros(2 * reports.size)
    for qi, ni, hi in zip(q, n, qhat):
        a, b = _report_index(reports, qi), _report_index(reports, hi)
        c[2 * b + 1] += ni * hi
        c[2 * b] += ni * (1.0 - hi)
        c[2 * a + 1] -= ni * hi
        c[2 * a] -= ni * (1.0 - hi)
    c /= profile.T
    value, rule = _decision_lp(reports, c)
    return max(value, 0.0), rule


def ucal(profile: BucketProfile, overall_mean: Optional[float] = None):
    """Worst-case external regret against the best fixed report (the overall mean)."""
    q, n, qhat = profile.active()
    if overall_mean is None:
        overall_mean = float(profile.ones.sum() / profile.T)
    reports = merge_reports(np.concatenate([q, qhat, [0.0, 1.0, overall_mean]]))
    c = np.zeros(2 * reports.size)
    p = _report_index(reports, overall_mean)
    for qi, ni, hi in zip(q, n, qhat):
        a = _report_index(reports, qi)
        c[2 * p + 1] += ni * hi
        c[2 * p] += ni * (1.0 - hi)
        c[2 * a + 1] -= ni * hi
        c[2 * a] -= ni * (1.0 - hi)
    c /= profile.T
    value, _ = _decision_lp(reports, c)
    return max(value, 0.0)


def deviation_stat(profile: BucketProfile, alpha: float, beta: float) -> float:
    """``max_i [G_i - alpha sqrt(n_i) - beta n_i]_+``."""
    if alpha < 0 or beta < 0:
        raise ValueError("alpha and beta must be non-negative")
    n = profile.counts
    slack = profile.bias - alpha * np.sqrt(n) - beta * n
    return float(max(slack.max(), 0.0))


def attribute_bound(profile: BucketProfile, mu: float) -> float:
    """``(2/T) sum_i (G_i - n_i |q_i - mu|)_+``, an upper bound on ``cfdl_v(profile, mu)``."""
    hinge = profile.bias - profile.counts * np.abs(profile.values - mu)
    return float(2.0 * np.maximum(hinge, 0.0).sum() / profile.T)


def deviation_chain_bound(profile: BucketProfile, alpha: float, beta: float, mu: float) -> float:
    """``(2m/T) D + 2 beta + (2/T) sum_i (alpha sqrt(n_i) - n_i |q_i - mu|)_+``.

    ``m`` counts the profile's buckets. Bounds ``cfdl_v(profile, mu)``.
    """
    m = profile.values.size
    n = profile.counts
    D = deviation_stat(profile, alpha, beta)
    tail = np.maximum(alpha * np.sqrt(n) - n * np.abs(profile.values - mu), 0.0)
    return float(2.0 * m * D / profile.T + 2.0 * beta + 2.0 * tail.sum() / profile.T)


class SandwichViolation(ValueError):
    """Metric values that break a guaranteed inequality between them."""


@dataclass
class MetricReport:
    T: int
    m: Optional[int] = None
    ece: Optional[float] = None
    l2: Optional[float] = None
    smcal: Optional[float] = None
    distcal_upper: Optional[float] = None
    vcdl: Optional[float] = None
    cdl: Optional[float] = None
    ucal: Optional[float] = None
    vcdl_mu: Optional[float] = None
    vcdl_attained: Optional[bool] = None
    cdl_rule: Optional[TabularScoringRule] = field(default=None, repr=False)
    smcal_sigma: Optional[np.ndarray] = field(default=None, repr=False)
    smcal_points: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.check()

    def check(self, tol: float = SANDWICH_TOL):
        vals = {k: getattr(self, k) for k in ALL_METRICS + ("distcal_upper",)}
        for k, v in vals.items():
            if v is not None and v < -tol:
                raise SandwichViolation(f"{k} is negative: {v}")
        e, l2, v, c, u = self.ece, self.l2, self.vcdl, self.cdl, self.ucal
        checks = []
        if c is not None and e is not None:
            checks += [("ece^2 <= cdl", e * e, c), ("cdl <= 2 ece", c, 2 * e)]
        if c is not None and l2 is not None:
            checks += [("l2 <= cdl", l2, c), ("cdl <= 2 sqrt(l2)", c, 2 * math.sqrt(max(l2, 0.0)))]
        if c is not None and v is not None:
            checks += [("vcdl <= cdl", v, c), ("cdl <= 2 vcdl", c, 2 * v)]
        if c is not None and u is not None:
            checks += [("ucal <= cdl", u, c)]
        for name, lhs, rhs in checks:
            if lhs > rhs + tol:
                raise SandwichViolation(f"{name} fails: {lhs!r} > {rhs!r}")

    def to_dict(self, witness: bool = False) -> dict:
        out = {"T": self.T, "m": self.m}
        for k in ("ece", "l2", "smcal", "distcal_upper", "vcdl", "cdl", "ucal"):
            v = getattr(self, k)
            if v is not None:
                out[k] = v
        if witness:
            w = {}
            if self.vcdl_mu is not None:
                w["vcdl_mu"] = self.vcdl_mu
                w["vcdl_attained"] = self.vcdl_attained
            if self.cdl_rule is not None:
                w["cdl_rule"] = self.cdl_rule.to_dict()
            if self.smcal_sigma is not None:
                w["smcal_sigma"] = {"points": self.smcal_points.tolist(), "sigma": self.smcal_sigma.tolist()}
            out["witness"] = w
        return out

    def to_json(self, witness: bool = False, **kwargs) -> str:
        return json.dumps(self.to_dict(witness), **kwargs)


def compute_report(t: Transcript, grid: Optional[Grid] = None,
                   metrics: Iterable[str] = ALL_METRICS) -> MetricReport:
    """Compute the requested metrics for ``t``, bucketed on ``grid`` if given.

    With a grid, smooth calibration is computed on the snapped predictions
    so that every metric describes the same prediction sequence.
    """
    wanted = set(metrics)
    unknown = wanted - set(ALL_METRICS) - {"distcal"}
    if unknown:
        raise ValueError(f"unknown metrics: {sorted(unknown)}")
    profile = bucketize(t, grid)
    rep = dict(T=t.T, m=grid.m if grid else None)
    if "ece" in wanted:
        rep["ece"] = ece(profile)
    if "l2" in wanted:
        rep["l2"] = l2cal(profile)
    if wanted & {"smcal", "distcal"}:
        snapped = Transcript(grid.snap(t.predictions), t.states) if grid else t
        sm = smcal_detail(snapped)
        rep.update(smcal=sm.value, distcal_upper=math.sqrt(32.0 * sm.value),
                   smcal_sigma=sm.sigma, smcal_points=sm.points)
    if "vcdl" in wanted:
        vr = vcdl_detail(profile)
        rep.update(vcdl=vr.value, vcdl_mu=vr.mu, vcdl_attained=vr.attained)
    if "cdl" in wanted:
        rep["cdl"], rep["cdl_rule"] = cdl(profile)
    if "ucal" in wanted:
        rep["ucal"] = ucal(profile, t.overall_mean)
    return MetricReport(**rep)

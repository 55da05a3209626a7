"""Proper scoring rules on binary outcomes and their Bregman divergences.

Divergences use the reversed-argument convention: ``breg(q, qhat)`` is the
expected loss of reporting ``q`` when outcomes are drawn with mean ``qhat``,

    breg(q, qhat) = u(qhat) - u(q) + u'(q) (q - qhat),

where ``u(p) = E_{theta ~ p} S(p, theta)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.integrate import simpson

# Report points closer than this are the same report.
MERGE_TOL = 1e-12


class DomainError(ValueError):
    """Query outside the report set of a tabular rule."""


def merge_reports(points: Iterable[float], tol: float = MERGE_TOL) -> np.ndarray:
    """Sorted unique report points, merging values within ``tol``."""
    pts = np.sort(np.asarray(list(points), dtype=float))
    if pts.size == 0:
        return pts
    keep = [pts[0]]
    for x in pts[1:]:
        if x - keep[-1] > tol:
            keep.append(x)
    return np.array(keep)


def _expected(scores0, scores1, belief):
    return belief * scores1 + (1.0 - belief) * scores0


@dataclass(frozen=True)
class VShapedRule:
    """Two-action rule with threshold ``kink``.

    Reports ``p >= kink`` take the upper branch. For ``kink > 1/2`` the rule
    is the reflection ``S_mu(p, theta) = S_{1-mu}(1-p, 1-theta)`` (away from
    the boundary point itself).
    """

    kink: float

    def __post_init__(self):
        if not 0.0 <= self.kink <= 1.0:
            raise ValueError(f"kink must lie in [0, 1], got {self.kink}")

    @property
    def scale(self) -> float:
        return max(self.kink, 1.0 - self.kink)

    def score(self, p, theta):
        p = np.asarray(p, dtype=float)
        slope = (np.asarray(theta, dtype=float) - self.kink) / (2.0 * self.scale)
        out = np.where(p >= self.kink, 0.5 + slope, 0.5 - slope)
        return out if out.ndim else float(out)

    def expected_score(self, p, belief):
        return _expected(self.score(p, 0), self.score(p, 1), belief)

    def u(self, p):
        return self.expected_score(p, p)

    def breg(self, q, qhat):
        return vbreg(self.kink, q, qhat)


def vbreg(mu: float, q, qhat):
    """V-Bregman divergence with kink ``mu``: zero unless ``q`` and ``qhat`` straddle it."""
    mu = np.asarray(mu, dtype=float)
    q = np.asarray(q, dtype=float)
    qhat = np.asarray(qhat, dtype=float)
    same_side = ((q < mu) & (qhat <= mu)) | ((q >= mu) & (qhat >= mu))
    out = np.where(same_side, 0.0, np.abs(qhat - mu) / np.maximum(1.0 - mu, mu))
    return out if out.ndim else float(out)


def score_v(rule: VShapedRule, p: float, theta: int) -> float:
    return float(rule.score(p, theta))


@dataclass(frozen=True)
class SmoothConvexRule:
    """Proper rule ``S(p, theta) = u(p) + u'(p)(theta - p)`` generated by a smooth convex ``u``."""

    u: Callable
    du: Callable
    d2u: Callable
    name: str = "smooth"

    def __post_init__(self):
        for end in (0.0, 1.0):
            if abs(float(self.du(end))) > 1.0 + 1e-12:
                raise ValueError(f"|u'({end})| exceeds 1; scores would leave [0, 1]")

    def score(self, p, theta):
        p = np.asarray(p, dtype=float)
        return self.u(p) + self.du(p) * (np.asarray(theta, dtype=float) - p)

    def expected_score(self, p, belief):
        return _expected(self.score(p, 0), self.score(p, 1), belief)

    def breg(self, q, qhat):
        q = np.asarray(q, dtype=float)
        qhat = np.asarray(qhat, dtype=float)
        out = self.u(qhat) - self.u(q) + self.du(q) * (q - qhat)
        return out if np.ndim(out) else float(out)


def quadratic_rule() -> SmoothConvexRule:
    """``S_2(p, theta) = 1 - (p - theta)^2``, i.e. ``u(p) = 1 - p(1 - p)``."""
    return SmoothConvexRule(
        u=lambda p: 1.0 - p * (1.0 - p),
        du=lambda p: 2.0 * p - 1.0,
        d2u=lambda p: 2.0 + 0.0 * np.asarray(p, dtype=float),
        name="quadratic",
    )


def exponential_rule() -> SmoothConvexRule:
    """``u(p) = exp(p - 1)``; values in [1/e, 1], slopes in [1/e, 1]."""
    return SmoothConvexRule(
        u=lambda p: np.exp(np.asarray(p, dtype=float) - 1.0),
        du=lambda p: np.exp(np.asarray(p, dtype=float) - 1.0),
        d2u=lambda p: np.exp(np.asarray(p, dtype=float) - 1.0),
        name="exponential",
    )


class TabularScoringRule:
    """Scores ``s(q, theta)`` on a finite, sorted report set."""

    def __init__(self, reports: Sequence[float], scores):
        reports = np.asarray(reports, dtype=float)
        scores = np.asarray(scores, dtype=float).reshape(-1, 2)
        if reports.ndim != 1 or reports.size != scores.shape[0]:
            raise ValueError("need one (s0, s1) pair per report")
        order = np.argsort(reports, kind="stable")
        self.reports = reports[order]
        self.scores = scores[order]
        if np.any(np.diff(self.reports) <= MERGE_TOL):
            raise ValueError("report points must be distinct")
        self.reports.setflags(write=False)
        self.scores.setflags(write=False)

    def __len__(self):
        return self.reports.size

    def __repr__(self):
        return f"TabularScoringRule(reports={self.reports.tolist()})"

    def index(self, q: float) -> int:
        j = int(np.searchsorted(self.reports, q - MERGE_TOL))
        if j < self.reports.size and abs(self.reports[j] - q) <= MERGE_TOL:
            return j
        raise DomainError(f"report {q!r} not in the rule's report set")

    def score(self, q: float, theta: int) -> float:
        return float(self.scores[self.index(q), int(theta)])

    def expected_score(self, q: float, belief: float) -> float:
        s0, s1 = self.scores[self.index(q)]
        return float(belief * s1 + (1.0 - belief) * s0)

    def breg(self, q: float, qhat: float) -> float:
        return self.expected_score(qhat, qhat) - self.expected_score(q, qhat)

    def properness_gap(self) -> float:
        """Largest violation ``max_{q,q'} E_q[s(q')] - E_q[s(q)]`` (<= 0 when proper)."""
        r = self.reports[:, None]
        exp = r * self.scores[None, :, 1] + (1.0 - r) * self.scores[None, :, 0]
        own = np.diag(exp)
        return float(np.max(exp - own[:, None]))

    def is_proper(self, tol: float = 1e-9) -> bool:
        return self.properness_gap() <= tol

    def is_bounded(self, tol: float = 1e-9) -> bool:
        return bool(self.scores.min() >= -tol and self.scores.max() <= 1.0 + tol)

    def to_dict(self) -> dict:
        return {
            "reports": self.reports.tolist(),
            "scores": {repr(float(q)): [float(a), float(b)] for q, (a, b) in zip(self.reports, self.scores)},
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: Mapping) -> "TabularScoringRule":
        reports = [float(q) for q in data["reports"]]
        table = {float(k): v for k, v in data["scores"].items()}
        return cls(reports, [table[q] for q in reports])

    @classmethod
    def from_json(cls, text: str) -> "TabularScoringRule":
        return cls.from_dict(json.loads(text))


def tabulate(rule, reports: Sequence[float]) -> TabularScoringRule:
    """Tabulate any rule exposing ``score(p, theta)`` on a report set."""
    reports = merge_reports(reports)
    scores = np.column_stack([np.asarray(rule.score(reports, 0)), np.asarray(rule.score(reports, 1))])
    return TabularScoringRule(reports, scores)


def v_rule_as_tabular(mu: float, reports: Sequence[float]) -> TabularScoringRule:
    return tabulate(VShapedRule(mu), reports)


def breg(rule, q, qhat):
    """Bregman divergence of ``rule`` (reversed-argument convention)."""
    return rule.breg(q, qhat)


def decompose_check(u: SmoothConvexRule, q: float, qhat: float, quadrature_nodes: int = 100_001):
    """Compare ``breg(q, qhat)`` against its V-shaped integral representation.

    Returns ``(lhs, rhs)`` with ``rhs`` the Simpson-rule value of
    ``int u''(mu) max(mu, 1 - mu) vbreg_mu(q, qhat) dmu`` over the kinks
    separating ``q`` and ``qhat``.
    """
    if quadrature_nodes < 3:
        raise ValueError("need at least 3 quadrature nodes")
    lhs = float(u.breg(q, qhat))
    if q == qhat:
        return lhs, 0.0
    lo, hi = min(q, qhat), max(q, qhat)
    n = quadrature_nodes if quadrature_nodes % 2 else quadrature_nodes + 1
    mu = np.linspace(lo, hi, n)
    curv = np.asarray(u.d2u(mu), dtype=float) * np.ones_like(mu)
    if np.any(curv < 0):
        raise ValueError("u is not convex: negative second derivative at a quadrature node")
    # vbreg is discontinuous at the interval end where it vanishes; the
    # integrand's one-sided limit there equals the continuous |qhat - mu| form.
    weight = np.maximum(mu, 1.0 - mu)
    vb = vbreg(mu, q, qhat)
    inside = (mu > lo) & (mu < hi)
    vb = np.where(inside, vb, np.abs(qhat - mu) / weight)
    rhs = float(simpson(curv * weight * vb, x=mu))
    return lhs, rhs

"""Multi-scale expert weights with per-expert, activity-scaled regret.

There are ``2m`` base experts ``(i, sigma)`` plus an auxiliary expert whose
gain is always zero. Each base expert is cloned once per learning rate
``eta_k = 2^-(k+1)``, ``k = 1..K``. The clones and the auxiliary expert form
one distribution that is updated by mirror descent with the weighted
entropy ``sum_c p_c ln(p_c) / eta_c`` and the second-order correction
``a_c = 4 eta_c l_c^2`` (losses ``l = -gain``):

    p_{t+1,c} = p_{t,c} exp(-eta_c (l_c + a_c + lam)),

with ``lam`` chosen so the masses sum to one. The emitted weight of
``(i, sigma)`` is the total mass of its clones.

For every clone ``c`` this update guarantees

    sum_t g_{t,c} - sum_t <w_t, g_t>
        <= ln(1/pi_c)/eta_c + sum_j pi_j/eta_j + 4 eta_c sum_t g_{t,c}^2,

where ``pi`` is the prior (proportional to ``eta^2``). Taking the best clone
for each base expert gives the ``C (log(mT) + sqrt(n log(mT)))`` form, with
``C`` computed by :func:`analytic_constant`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, TextIO, Tuple, Union

import numpy as np

# Frozen constant for the per-expert regret bound; see analytic_constant().
ORACLE_CONSTANT = 4.0
AUX_ETA = 0.25
_NEWTON_TOL = 1e-14

Gains = Union[np.ndarray, Mapping[Tuple[int, int], float]]


class HorizonExhausted(RuntimeError):
    pass


def num_scales(m: int, T: int) -> int:
    """``K = ceil(log2(sqrt(T / log(mT)))) + 1``, at least 1."""
    ratio = T / math.log(m * T)
    return max(1, math.ceil(math.log2(math.sqrt(ratio))) + 1) if ratio > 1 else 1


def learning_rates(m: int, T: int) -> np.ndarray:
    K = num_scales(m, T)
    return 2.0 ** -(np.arange(1, K + 1) + 1.0)


def prior(m: int, T: int):
    """Prior masses ``(pi_clones[K], pi_aux)``; each clone of scale k gets ``eta_k^2 / Z``."""
    eta = learning_rates(m, T)
    Z = 2 * m * np.sum(eta ** 2) + AUX_ETA ** 2
    return eta ** 2 / Z, AUX_ETA ** 2 / Z


def clone_bounds(m: int, T: int, n) -> np.ndarray:
    """Per-scale regret bound for a base expert with ``sum g^2 <= n``; shape ``(len(n), K)``."""
    eta = learning_rates(m, T)
    pi, pi_aux = prior(m, T)
    spread = 2 * m * np.sum(pi / eta) + pi_aux / AUX_ETA
    n = np.atleast_1d(np.asarray(n, dtype=float))
    return np.log(1.0 / pi)[None, :] / eta[None, :] + spread + 4.0 * eta[None, :] * n[:, None]


def aux_bound(m: int, T: int) -> float:
    eta = learning_rates(m, T)
    pi, pi_aux = prior(m, T)
    spread = 2 * m * np.sum(pi / eta) + pi_aux / AUX_ETA
    return float(math.log(1.0 / pi_aux) / AUX_ETA + spread)


def analytic_constant(m: int, T: int) -> float:
    """Smallest ``C`` for which the clone bounds imply the ``C(log(mT) + sqrt(n log(mT)))`` form."""
    L = math.log(m * T)
    n = np.arange(T + 1)
    best = clone_bounds(m, T, n).min(axis=1)
    ratio = best / (L + np.sqrt(n * L))
    return float(max(ratio.max(), aux_bound(m, T) / L))


def regret_bound(n, m: int, T: int, C: float = ORACLE_CONSTANT):
    L = math.log(m * T)
    return C * (L + np.sqrt(np.asarray(n, dtype=float) * L))


@dataclass(frozen=True)
class RegretAudit:
    regrets: np.ndarray  # (m, 2): columns sigma = +1, sigma = -1
    aux_regret: float  # -sum_t <w_t, g_t>
    counts: np.ndarray  # rounds with a nonzero gain for bucket i
    bounds: np.ndarray  # (m,) per-bucket bound at the frozen constant
    aux_bound: float

    @property
    def violations(self) -> int:
        bad = int(np.sum(self.regrets > self.bounds[:, None] + 1e-9))
        return bad + int(self.aux_regret > self.aux_bound + 1e-9)


class ExpertOracle:
    """Weights ``w[i, sigma]`` over ``2m`` experts with an implicit auxiliary expert.

    Arrays indexed by sigma use column 0 for ``sigma = +1`` and column 1 for
    ``sigma = -1``; bucket indices are 0-based in arrays and 1-based in
    mapping keys ``(i, sigma)``.
    """

    def __init__(self, m: int, T: int, trace: Optional[TextIO] = None):
        if m < 2 or T < 1:
            raise ValueError("need m >= 2 and T >= 1")
        self.m, self.T = int(m), int(T)
        self.eta = learning_rates(m, T)
        K = self.eta.size
        pi, pi_aux = prior(m, T)
        # clone layout: (m, 2, K), flattened, then the auxiliary expert last
        self._eta_flat = np.append(np.broadcast_to(self.eta, (m, 2, K)).ravel(), AUX_ETA)
        self._logp = np.append(np.broadcast_to(np.log(pi), (m, 2, K)).ravel(), math.log(pi_aux))
        self.rounds = 0
        self.cum_gains = np.zeros((m, 2))
        self.weighted_gain = 0.0
        self.counts = np.zeros(m, dtype=np.int64)
        self._trace = trace
        if trace is not None:
            cols = ",".join(f"w{i}{'+' if s == 0 else '-'}" for i in range(1, m + 1) for s in (0, 1))
            trace.write(f"t,{cols}\n")

    @property
    def n_scales(self) -> int:
        return self.eta.size

    def clone_masses(self) -> np.ndarray:
        return np.exp(self._logp[:-1]).reshape(self.m, 2, self.n_scales)

    def weights(self) -> np.ndarray:
        """``(m, 2)`` emitted weights; the total is at most one."""
        return self.clone_masses().sum(axis=2)

    def aux_weight(self) -> float:
        return float(math.exp(self._logp[-1]))

    def weights_map(self) -> dict:
        w = self.weights()
        return {(i + 1, s): float(w[i, k]) for i in range(self.m) for k, s in ((0, 1), (1, -1))}

    def _as_array(self, gains: Gains) -> np.ndarray:
        if isinstance(gains, Mapping):
            arr = np.zeros((self.m, 2))
            for (i, s), g in gains.items():
                if s not in (1, -1) or not 1 <= i <= self.m:
                    raise KeyError((i, s))
                arr[i - 1, 0 if s == 1 else 1] = g
            return arr
        arr = np.asarray(gains, dtype=float)
        if arr.shape != (self.m, 2):
            raise ValueError(f"gains must have shape ({self.m}, 2)")
        return arr

    def update(self, gains: Gains) -> None:
        if self.rounds >= self.T:
            raise HorizonExhausted("horizon exhausted")
        g = self._as_array(gains)
        if not np.all(np.isfinite(g)) or np.abs(g).max() > 1.0:
            raise ValueError("gains must lie in [-1, 1]")
        w = self.weights()
        if self._trace is not None:
            self._trace.write(f"{self.rounds + 1}," + ",".join(repr(float(x)) for x in w.ravel()) + "\n")
        self.weighted_gain += float(np.sum(w * g))
        self.cum_gains += g
        self.counts += np.any(g != 0.0, axis=1)
        self.rounds += 1
        if not g.any():
            return
        loss = np.append(np.repeat(-g.ravel(), self.n_scales), 0.0)
        eta = self._eta_flat
        x = self._logp - eta * (loss + 4.0 * eta * loss * loss)
        # f(lam) = sum exp(x - eta lam) - 1 is convex and decreasing, so every
        # Newton iterate after the first has f >= 0 and the rest increase
        # monotonically to the root.
        lam = 0.0
        for _ in range(100):
            e = np.exp(x - eta * lam)
            f = e.sum() - 1.0
            if abs(f) <= _NEWTON_TOL:
                break
            lam += f / float(np.dot(eta, e))
        logp = x - eta * lam
        self._logp = logp - np.log(np.exp(logp).sum())

    def regret_audit(self, C: float = ORACLE_CONSTANT) -> RegretAudit:
        regrets = self.cum_gains - self.weighted_gain
        return RegretAudit(
            regrets=regrets,
            aux_regret=-self.weighted_gain,
            counts=self.counts.copy(),
            bounds=regret_bound(self.counts, self.m, self.T, C),
            aux_bound=float(C * math.log(self.m * self.T)),
        )

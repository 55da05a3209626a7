"""scikit-learn style wrappers: a calibration auditor, a grid snapper and the online forecaster."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, column_or_1d

from .adversary import ScriptedAdversary
from .metrics import ALL_METRICS, compute_report
from .predictor import CDLPredictor, PredictorConfig, run_algorithm1
from .transcript import Grid, Transcript, bucketize


def _predictions(X) -> np.ndarray:
    X = check_array(X, ensure_2d=False, dtype=float)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected a single column of predictions, got {X.shape[1]}")
        X = X[:, 0]
    return X


class CalibrationAuditor(BaseEstimator):
    """Compute the calibration metric panel for predictions ``X`` and binary outcomes ``y``.

    Parameters
    ----------
    grid_size : int or None
        Bucket predictions on the grid ``i / grid_size``; ``None`` keeps each
        distinct prediction value as its own bucket.
    metrics : sequence of str
        Any of ``ece, l2, smcal, vcdl, cdl, ucal``.
    """

    def __init__(self, grid_size: Optional[int] = None, metrics: Sequence[str] = ALL_METRICS):
        self.grid_size = grid_size
        self.metrics = metrics

    def fit(self, X, y):
        p = _predictions(X)
        y = column_or_1d(y)
        grid = Grid(self.grid_size) if self.grid_size is not None else None
        t = Transcript(p, y)
        self.report_ = compute_report(t, grid, self.metrics)
        self.profile_ = bucketize(t, grid)
        self.n_features_in_ = 1
        for name in ALL_METRICS:
            setattr(self, f"{name}_", getattr(self.report_, name))
        return self

    def score(self, X, y) -> float:
        """Negative CDL of ``(X, y)``, so larger is better."""
        check_is_fitted(self, "report_")
        p = _predictions(X)
        grid = Grid(self.grid_size) if self.grid_size is not None else None
        return -compute_report(Transcript(p, column_or_1d(y)), grid, ("cdl",)).cdl


class GridSnapper(TransformerMixin, BaseEstimator):
    """Map predictions to the right endpoint ``i/m`` of the grid interval containing them."""

    def __init__(self, grid_size: int = 10):
        self.grid_size = grid_size

    def fit(self, X, y=None):
        _predictions(X)
        self.grid_ = Grid(self.grid_size)
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        check_is_fitted(self, "grid_")
        p = _predictions(X)
        return np.asarray(self.grid_.snap(p), dtype=float).reshape(-1, 1)


class CDLForecaster(BaseEstimator):
    """Online binary forecaster with low calibration decision loss.

    Use ``predict()`` / ``partial_fit(theta)`` round by round, or ``fit(y)``
    to replay a whole outcome sequence.

    Parameters
    ----------
    horizon : int
        Number of rounds T.
    grid_size : int or None
        Prediction grid size m; defaults to ``round(sqrt(T)/ln T)``.
    eps : float or None
        Per-round target for the weighted bias; defaults to ``1/T``.
    random_state : int
        Seed for the prediction draws.
    """

    def __init__(self, horizon: int = 1000, grid_size: Optional[int] = None, eps: Optional[float] = None,
                 random_state: int = 0):
        self.horizon = horizon
        self.grid_size = grid_size
        self.eps = eps
        self.random_state = random_state

    def _config(self) -> PredictorConfig:
        return PredictorConfig(T=self.horizon, m=self.grid_size, eps=self.eps, seed=self.random_state)

    def fit(self, y, X=None):
        y = column_or_1d(check_array(np.asarray(y).reshape(-1, 1), dtype=None)).astype(int)
        cfg = PredictorConfig(T=y.size, m=self.grid_size, eps=self.eps, seed=self.random_state)
        self.transcript_, self.trace_ = run_algorithm1(cfg, ScriptedAdversary(y))
        self.predictions_ = self.transcript_.predictions
        self.config_ = cfg
        return self

    def _ensure_online(self):
        if not hasattr(self, "predictor_"):
            self.config_ = self._config()
            self.predictor_ = CDLPredictor(self.config_)
            self.history_ = ([], [])
            self._drawn = None

    def predict(self, X=None) -> float:
        """The next-round prediction (a grid value)."""
        self._ensure_online()
        if self._drawn is None:
            strat = self.predictor_.strategy()
            self._drawn = self.predictor_.draw(strat)
        return self._drawn[1]

    def partial_fit(self, theta, X=None):
        """Reveal the current round's outcome."""
        self._ensure_online()
        if self._drawn is None:
            self.predict()
        theta = int(theta)
        if theta not in (0, 1):
            raise ValueError("outcome must be 0 or 1")
        self.predictor_.observe(theta)
        self.history_[0].append(self._drawn[1])
        self.history_[1].append(theta)
        self._drawn = None
        return self

    @property
    def transcript(self) -> Transcript:
        if hasattr(self, "history_") and self.history_[0]:
            return Transcript(np.array(self.history_[0]), np.array(self.history_[1]))
        check_is_fitted(self, "transcript_")
        return self.transcript_

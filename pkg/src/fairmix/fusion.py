"""Multimodal fusion: early feature concatenation and four late-fusion
schemes (hard/soft majority voting, hard/soft stacking).

Stacking meta-features are generated out-of-fold on the training split so
the meta-learner never sees a base prediction produced by a model trained
on that same row; the final base models are then refit on the full split.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import models
from .errors import ConfigError, InputError, ShapeError, StackingError
from .models import PredictorSpec, TrainedPredictor

STRATEGIES = ("early", "vote_hard", "vote_soft", "stack_hard", "stack_soft")


@dataclass(frozen=True)
class FusionSpec:
    strategy: str
    base_model: PredictorSpec
    meta_model: Optional[PredictorSpec] = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown fusion strategy {self.strategy!r}")

    def resolved_meta(self) -> PredictorSpec:
        return self.meta_model or PredictorSpec("logistic")


def early_fuse(modalities: Sequence[np.ndarray]) -> np.ndarray:
    """Column-wise concatenation in declared modality order."""
    mats = [np.atleast_2d(np.asarray(m, dtype=float)) for m in modalities]
    if not mats:
        raise InputError("no modalities to fuse")
    n = mats[0].shape[0]
    for m in mats[1:]:
        if m.shape[0] != n:
            raise ShapeError(f"row-count mismatch: {n} vs {m.shape[0]}")
    return np.hstack(mats)


def _vote_hard(base_probas: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Majority label; even ties broken by the most confident base, then class 1."""
    labels = np.stack([(p[:, 1] >= p[:, 0]).astype(int) for p in base_probas])
    mean_proba = np.mean(base_probas, axis=0)
    votes_for_1 = labels.sum(axis=0)
    m = labels.shape[0]
    out = np.where(2 * votes_for_1 > m, 1, 0)
    tie = 2 * votes_for_1 == m
    if tie.any():
        conf = np.stack([p.max(axis=1) for p in base_probas])  # per base, per row
        for r in np.flatnonzero(tie):
            row_conf = conf[:, r]
            contenders = np.flatnonzero(row_conf == row_conf.max())
            # unique most-confident base decides; tied confidences -> class 1
            out[r] = int(labels[contenders[0], r]) if len(contenders) == 1 else 1
    return out, mean_proba


def _vote_soft(base_probas: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    mean_proba = np.mean(base_probas, axis=0)
    return (mean_proba[:, 1] >= mean_proba[:, 0]).astype(int), mean_proba


def _stack_features(strategy: str, base_probas: list[np.ndarray]) -> np.ndarray:
    if strategy == "stack_hard":
        return np.column_stack([(p[:, 1] >= p[:, 0]).astype(float) for p in base_probas])
    return np.hstack(base_probas)


def fuse_predict(
    spec: FusionSpec,
    trained_base: Sequence[TrainedPredictor],
    meta: Optional[TrainedPredictor],
    X_per_modality: Sequence[np.ndarray],
) -> tuple[np.ndarray, np.ndarray]:
    """Late-fusion prediction from per-modality base models."""
    if len(trained_base) != len(X_per_modality):
        raise ConfigError(
            f"{len(trained_base)} trained base models but {len(X_per_modality)} modalities"
        )
    base_probas = [b.predict_proba(X) for b, X in zip(trained_base, X_per_modality)]
    if len(trained_base) == 1:
        proba = base_probas[0]
        return (proba[:, 1] >= proba[:, 0]).astype(int), proba
    if spec.strategy == "vote_hard":
        return _vote_hard(base_probas)
    if spec.strategy == "vote_soft":
        return _vote_soft(base_probas)
    if spec.strategy in ("stack_hard", "stack_soft"):
        if meta is None:
            raise ConfigError("stacking requires a fitted meta-model")
        feats = _stack_features(spec.strategy, base_probas)
        return meta.predict(feats), meta.predict_proba(feats)
    raise ConfigError(f"fuse_predict does not handle strategy {spec.strategy!r}")


def _internal_folds(y: np.ndarray, k: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    assign = np.empty(len(y), dtype=int)
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(len(idx))]
        for pos, i in enumerate(idx):
            assign[i] = pos % k
    return assign


def fit_stacking_meta(
    spec: FusionSpec,
    train_per_modality: Sequence[np.ndarray],
    y: np.ndarray,
    seed: int,
) -> tuple[TrainedPredictor, np.ndarray, np.ndarray]:
    """Fit the stacking meta-learner on out-of-fold base predictions.

    Returns (meta_model, fold assignment per training row, meta features);
    the fold bookkeeping lets callers verify no leakage occurred.
    """
    y = np.asarray(y, dtype=int)
    n = len(y)
    if n < 4:
        raise StackingError(f"stacking needs at least 4 training rows, got {n}")
    if len(train_per_modality) < 2:
        raise StackingError("stacking needs at least 2 modalities")
    counts = np.bincount(y, minlength=2)
    if counts.min() < 2:
        raise StackingError("stacking needs at least 2 rows of each class")
    k = 5 if n >= 10 else 2
    k = min(k, int(counts.min()))
    assign = _internal_folds(y, k, seed)

    meta_feats = None
    for fold in range(k):
        tr, te = assign != fold, assign == fold
        probas = []
        for X in train_per_modality:
            base = models.fit(spec.base_model, X[tr], y[tr])
            probas.append(base.predict_proba(X[te]))
        feats = _stack_features(spec.strategy, probas)
        if meta_feats is None:
            meta_feats = np.empty((n, feats.shape[1]))
        meta_feats[te] = feats
    meta = models.fit(spec.resolved_meta(), meta_feats, y)
    return meta, assign, meta_feats


class FusedModel:
    """Fitted fusion ensemble exposing the predictor contract over a list
    of per-modality matrices."""

    def __init__(self, spec: FusionSpec, bases, meta=None, stacking_folds=None):
        self.spec = spec
        self.bases = list(bases)
        self.meta = meta
        self.stacking_folds = stacking_folds

    def predict_with_proba(self, X_per_modality):
        if self.spec.strategy == "early":
            X = early_fuse(X_per_modality)
            proba = self.bases[0].predict_proba(X)
            return (proba[:, 1] >= proba[:, 0]).astype(int), proba
        return fuse_predict(self.spec, self.bases, self.meta, X_per_modality)

    def predict(self, X_per_modality):
        return self.predict_with_proba(X_per_modality)[0]

    def predict_proba(self, X_per_modality):
        return self.predict_with_proba(X_per_modality)[1]


def fit_fusion(
    spec: FusionSpec,
    X_per_modality: Sequence[np.ndarray],
    y: np.ndarray,
    seed: int = 0,
) -> FusedModel:
    """Fit base models (and the meta-learner for stacking) for a strategy."""
    if not X_per_modality:
        raise InputError("no modalities given")
    if spec.strategy == "early":
        base = models.fit(spec.base_model, early_fuse(X_per_modality), y)
        return FusedModel(spec, [base])
    if len(X_per_modality) == 1:
        # every late-fusion strategy degrades to the single base model
        return FusedModel(spec, [models.fit(spec.base_model, X_per_modality[0], y)])
    meta, assign = None, None
    if spec.strategy in ("stack_hard", "stack_soft"):
        meta, assign, _ = fit_stacking_meta(spec, X_per_modality, y, seed)
    bases = [models.fit(spec.base_model, X, y) for X in X_per_modality]
    return FusedModel(spec, bases, meta, assign)

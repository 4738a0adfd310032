"""Trial-grouped cross-validation and seeded random hyperparameter search."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from ..evaluation import macro_f1
from .model import ModelConfig, train_model

log = logging.getLogger(__name__)


def _deal(groups: list[list[str]], k: int) -> list[list[str]]:
    folds: list[list[str]] = [[] for _ in range(k)]
    pos = 0
    for g in groups:
        for tid in g:
            folds[pos % k].append(tid)
            pos += 1
    return folds


def _classes_covered(folds, trial_classes, all_classes) -> bool:
    for j in range(len(folds)):
        val = set().union(*(trial_classes[t] for t in folds[j])) if folds[j] else set()
        train = set().union(*(trial_classes[t] for i, f in enumerate(folds) if i != j for t in f))
        if val != all_classes or train != all_classes:
            return False
    return True


def trial_folds(trial_ids, y, k: int = 5, seed: int = 0) -> tuple[list[list[str]], bool]:
    """Partition the trials of a corpus into ``k`` folds.

    Trials are shuffled and dealt round-robin. When some fold (or its
    complement) lacks a class, trials are regrouped by their class signature
    and dealt stratum by stratum. Returns ``(folds, stratified)``.
    """
    trial_ids = np.asarray(trial_ids)
    y = np.asarray(y)
    uniq = sorted(set(trial_ids.tolist()))
    if len(uniq) < k:
        raise ValueError(f"{len(uniq)} trials cannot fill {k} folds")
    trial_classes = {t: set() for t in uniq}
    for t, c in zip(trial_ids.tolist(), y.tolist()):
        trial_classes[t].add(c)
    all_classes = set(y.tolist())
    rng = np.random.default_rng(seed)
    order = [uniq[i] for i in rng.permutation(len(uniq))]
    folds = _deal([order], k)
    if _classes_covered(folds, trial_classes, all_classes):
        return folds, False
    strata: dict[tuple, list[str]] = {}
    for t in order:
        strata.setdefault(tuple(sorted(trial_classes[t])), []).append(t)
    # rarest signatures first so they spread over the folds
    groups = [strata[s] for s in sorted(strata, key=lambda s: (len(strata[s]), s))]
    folds = _deal(groups, k)
    if not _classes_covered(folds, trial_classes, all_classes):
        log.warning("stratified folds still miss a class in some fold")
    return folds, True


@dataclass
class CvResult:
    fold_scores: list
    folds: list
    stratified: bool

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_scores))


def cross_validate(corpus, config: ModelConfig, k: int = 5, seed: int = 0) -> CvResult:
    """Goal-class macro-F1 of ``config`` on each of ``k`` trial-disjoint folds."""
    folds, stratified = trial_folds(corpus.trial_ids, corpus.y, k, seed)
    n_classes = int(corpus.header.get("n_goals", int(corpus.y.max()))) + 1
    out = []
    for fold in folds:
        val = np.isin(corpus.trial_ids, fold)
        model = train_model(corpus.X[~val], corpus.y[~val], config, corpus.fingerprint)
        pred = model.predict(corpus.X[val])
        out.append(macro_f1(corpus.y[val], pred, n_classes))
    return CvResult(out, folds, stratified)


@dataclass
class SearchResult:
    best: ModelConfig
    best_score: float
    evaluations: list = field(default_factory=list)  # (updates, cv mean, fold scores)


def hyperparameter_search(corpus, space: dict, base: ModelConfig, budget: int, seed: int = 0, k: int = 5,
                          cv_seed: int = 0) -> SearchResult:
    """Score ``budget`` distinct points of the grid ``space`` by CV mean; best wins, earliest on ties.

    Keys of ``space`` are variant parameters or ``reducer``/``n_components``.
    """
    if not space or any(len(v) == 0 for v in space.values()):
        raise ValueError("empty search space")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    keys = sorted(space)
    grid = list(itertools.product(*(space[kk] for kk in keys)))
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(grid), size=min(budget, len(grid)), replace=False)
    best = None
    evaluations = []
    for p in picks:
        updates = dict(zip(keys, grid[int(p)]))
        cfg = base.with_updates(**updates)
        cv = cross_validate(corpus, cfg, k, cv_seed)
        evaluations.append((updates, cv.mean, cv.fold_scores))
        log.info("search %s -> %.4f", updates, cv.mean)
        if best is None or cv.mean > best[1]:
            best = (cfg, cv.mean)
    return SearchResult(best[0], best[1], evaluations)

"""Marginal and conditional predictive value of each variable.

Four cross-validated squared-error estimates are compared:

  S0      no predictors (held-out response mean),
  S_j     variable j alone,
  S_-j    all variables except j,
  S       all variables;

then MPV_j = S0 - S_j is the error removed by j on its own, and
CPV_j = S_-j - S is the error j removes on top of everything else.  A
variable duplicated elsewhere in the data keeps a high MPV but its CPV
collapses to zero.

Models are bagged scoring-tree forests (depth-limited, bootstrap
resampled).  Leave-one-out follows the estimator definitions exactly;
k-fold is the default because leave-one-out refits 2K+2 model families n
times each.  Fold assignment is drawn once from the seed and shared by
every family, and each (family, fold) fit owns a derived stream, so
reports are reproducible for a fixed seed.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import Dataset
from .errors import ValidationError
from .parallel import STREAM_FOLDS, STREAM_FOREST, derive
from .stats import pearson_corr
from .tree import TreeConfig, grow

SCOPE_NONE = "none"
SCOPE_ONLY = "only_j"
SCOPE_ALL_BUT = "all_but_j"
SCOPE_ALL = "all"


@dataclass(frozen=True)
class ForestConfig:
    """Bagged-forest settings for the predictive-value models."""

    n_trees: int = 100
    bootstrap: bool = True
    max_depth: int = 6
    min_node_to_split: int = 8
    min_child: int = 2
    seed: object = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValidationError("n_trees must be at least 1")


class Forest:
    """Bag of scoring trees; prediction is the mean of leaf means."""

    def __init__(self, trees):
        self.trees = list(trees)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        acc = np.zeros(X.shape[0], dtype=np.float64)
        for tree in self.trees:
            acc += tree.predict(X)
        return acc / len(self.trees)


def fit_forest(ds: Dataset, config: ForestConfig = ForestConfig(),
               stream_path=()) -> Forest:
    """Fit the bagged forest; tree t draws from the stream at index t."""
    tree_config = TreeConfig(split_levels=config.max_depth,
                             min_node_to_split=config.min_node_to_split,
                             min_child=config.min_child)
    trees = []
    for t in range(config.n_trees):
        if config.bootstrap:
            rng = np.random.default_rng(
                derive(config.seed, STREAM_FOREST, *stream_path, t))
            idx = rng.integers(0, ds.n_rows, size=ds.n_rows)
            sample = ds.take_rows(idx)
        else:
            sample = ds
        trees.append(grow(sample, tree_config))
    return Forest(trees)


def fold_assignment(n: int, k: int, seed) -> np.ndarray:
    """Balanced random fold ids 0..k-1, one per row."""
    if k < 2 or k > n:
        raise ValidationError("need 2 <= k <= n folds")
    rng = np.random.default_rng(derive(seed, STREAM_FOLDS))
    perm = rng.permutation(n)
    fold_of = np.empty(n, dtype=np.intp)
    for f, chunk in enumerate(np.array_split(perm, k)):
        fold_of[chunk] = f
    return fold_of


def _scope_dataset(ds: Dataset, scope: str, j: Optional[int]) -> Dataset:
    if scope == SCOPE_ONLY:
        return ds.select_predictors([j])
    if scope == SCOPE_ALL_BUT:
        return ds.drop_predictors([j])
    if scope == SCOPE_ALL:
        return ds
    raise ValidationError(f"unknown scope {scope!r}")


def _scope_tag(scope: str, j: Optional[int], K: int) -> int:
    if scope == SCOPE_NONE:
        return 0
    if scope == SCOPE_ALL:
        return 1
    if scope == SCOPE_ONLY:
        return 2 + j
    return 2 + K + j


def cv_errors(ds: Dataset, scope: str, config: ForestConfig = ForestConfig(),
              cv: str = "kfold", n_folds: int = 10,
              j: Optional[int] = None) -> float:
    """Cross-validated mean squared prediction error for one model family.

    ``scope`` selects the predictor set (none, only_j, all_but_j, all; the
    j-scopes require ``j``).  ``cv`` is "loo" or "kfold"; with no
    predictors the model is the training-rows response mean.
    """
    n = ds.n_rows
    if scope in (SCOPE_ONLY, SCOPE_ALL_BUT) and j is None:
        raise ValidationError(f"scope {scope!r} requires j")
    if cv == "loo":
        fold_of = np.arange(n, dtype=np.intp)
        k = n
    elif cv == "kfold":
        fold_of = fold_assignment(n, n_folds, config.seed)
        k = n_folds
    else:
        raise ValidationError(f"unknown cv scheme {cv!r}")

    if scope == SCOPE_NONE:
        total = 0.0
        for f in range(k):
            test = fold_of == f
            train_mean = float(ds.y[~test].mean())
            total += float(((ds.y[test] - train_mean) ** 2).sum())
        return total / n

    scoped = _scope_dataset(ds, scope, j)
    tag = _scope_tag(scope, j, ds.n_predictors)
    total = 0.0
    for f in range(k):
        test = np.nonzero(fold_of == f)[0]
        train = np.nonzero(fold_of != f)[0]
        forest = fit_forest(scoped.take_rows(train), config,
                            stream_path=(tag, f))
        pred = forest.predict(scoped.X[test])
        total += float(((scoped.y[test] - pred) ** 2).sum())
    return total / n


@dataclass(frozen=True)
class PredValueReport:
    """MPV/CPV per variable with the four error estimates behind them."""

    names: tuple
    S0: float
    S: float
    S_j: np.ndarray
    S_minus_j: np.ndarray
    mpv: np.ndarray
    cpv: np.ndarray
    scheme: str
    seed: object


def mpv_cpv(ds: Dataset, config: ForestConfig = ForestConfig(),
            cv: str = "kfold", n_folds: int = 10) -> PredValueReport:
    """Assemble MPV and CPV for every variable (2K+2 model families)."""
    K = ds.n_predictors
    if K < 2:
        raise ValidationError("need at least 2 predictors")
    s0 = cv_errors(ds, SCOPE_NONE, config, cv, n_folds)
    s_all = cv_errors(ds, SCOPE_ALL, config, cv, n_folds)
    s_j = np.empty(K, dtype=np.float64)
    s_mj = np.empty(K, dtype=np.float64)
    for j in range(K):
        s_j[j] = cv_errors(ds, SCOPE_ONLY, config, cv, n_folds, j=j)
        s_mj[j] = cv_errors(ds, SCOPE_ALL_BUT, config, cv, n_folds, j=j)
    scheme = "loo" if cv == "loo" else f"kfold:{n_folds}"
    return PredValueReport(names=ds.names, S0=s0, S=s_all, S_j=s_j,
                           S_minus_j=s_mj, mpv=s0 - s_j, cpv=s_mj - s_all,
                           scheme=scheme, seed=config.seed)


def score_consistency(vi, report: PredValueReport) -> tuple:
    """Pearson correlations of importance scores with MPV and CPV."""
    vi = np.asarray(vi, dtype=np.float64)
    if vi.shape[0] != len(report.names):
        raise ValidationError("score vector does not match report variables")
    return pearson_corr(vi, report.mpv), pearson_corr(vi, report.cpv)


def predvalue_csv(report: PredValueReport) -> str:
    """CSV with a metadata comment line, then one row per variable."""
    seed = report.seed
    meta = (f"# S0={float(report.S0)!r} S={float(report.S)!r} "
            f"scheme={report.scheme} seed={seed}")
    lines = [meta, "variable,S_j,S_minus_j,MPV,CPV"]
    for k, name in enumerate(report.names):
        lines.append(",".join([
            name, repr(float(report.S_j[k])), repr(float(report.S_minus_j[k])),
            repr(float(report.mpv[k])), repr(float(report.cpv[k])),
        ]))
    return "\n".join(lines) + "\n"

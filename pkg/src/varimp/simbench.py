"""Simulation benchmark: known-truth models for bias audits.

Eleven predictors with deliberately varied "split richness":

* B1 Bernoulli(0.5), ordinal 0/1;
* C1, C2 uniform on {1..10}, categorical (many candidate subsets);
* B2 = I(C2 <= 5), ordinal 0/1, deterministic in C2;
* N1 standard normal, independent;
* N2, N3, N4 standard normal with pairwise correlation 0.9 (closed-form
  lower-triangular factor of the equicorrelation matrix);
* S1 = min(U1,U2), S2 = |U1-U2|, S3 = 1-max(U1,U2) for iid uniform U1,U2,
  so S1+S2+S3 = 1 and each pair correlates at -0.5.

Models (response = mu + standard normal noise):

  E0: mu = 0                     E1: mu = 0.2*N2
  E2: mu = 0.1*(N1+N2)           E3: mu = 0.2*B1
  E4: mu = 0.2*B2                E5: mu = 0.5*(I(B1=0, C1<=5) + I(B1=1, C1>5))

E5 has no marginal effects, only the B1 x C1 interaction.  An unbiased
scorer should give all variables the same mean score under E0.
"""

from dataclasses import dataclass
from math import sqrt

import numpy as np

from . import cart, importance
from .data import Dataset, from_arrays
from .errors import ValidationError
from .parallel import (STREAM_MISSING, STREAM_NOISE, STREAM_TRIAL, derive,
                       parallel_map)
from .tree import TreeConfig

VARIABLES = ("B1", "B2", "C1", "C2", "N1", "N2", "N3", "N4", "S1", "S2", "S3")
ROLES = ("n", "n", "c", "c", "n", "n", "n", "n", "n", "n", "n")
MODELS = ("E0", "E1", "E2", "E3", "E4", "E5")

# lower-triangular factor of the 3x3 equicorrelation(0.9) matrix
_RHO = 0.9
_L22 = sqrt(1.0 - _RHO * _RHO)
_L32 = _RHO * (1.0 - _RHO) / _L22
_L33 = sqrt(1.0 - _RHO * _RHO - _L32 * _L32)


def gen_predictors(n: int, rng) -> dict:
    """Draw the 11-predictor table as a name -> array mapping.

    C1 and C2 are returned as their integer values 1..10; they receive a
    categorical role when assembled into a dataset.
    """
    if n < 1:
        raise ValidationError("n must be at least 1")
    b1 = rng.integers(0, 2, size=n).astype(np.float64)
    c1 = rng.integers(1, 11, size=n).astype(np.float64)
    c2 = rng.integers(1, 11, size=n).astype(np.float64)
    b2 = (c2 <= 5).astype(np.float64)
    n1 = rng.standard_normal(n)
    z = rng.standard_normal((n, 3))
    n2 = z[:, 0]
    n3 = _RHO * z[:, 0] + _L22 * z[:, 1]
    n4 = _RHO * z[:, 0] + _L32 * z[:, 1] + _L33 * z[:, 2]
    u1 = rng.uniform(size=n)
    u2 = rng.uniform(size=n)
    s1 = np.minimum(u1, u2)
    s2 = np.abs(u1 - u2)
    s3 = 1.0 - np.maximum(u1, u2)
    return {"B1": b1, "B2": b2, "C1": c1, "C2": c2, "N1": n1, "N2": n2,
            "N3": n3, "N4": n4, "S1": s1, "S2": s2, "S3": s3}


def model_mean(model: str, pred: dict) -> np.ndarray:
    """The noiseless response mu(X) of one model."""
    if model == "E0":
        return np.zeros_like(pred["N1"])
    if model == "E1":
        return 0.2 * pred["N2"]
    if model == "E2":
        return 0.1 * (pred["N1"] + pred["N2"])
    if model == "E3":
        return 0.2 * pred["B1"]
    if model == "E4":
        return 0.2 * pred["B2"]
    if model == "E5":
        low = (pred["B1"] == 0) & (pred["C1"] <= 5)
        high = (pred["B1"] == 1) & (pred["C1"] > 5)
        return 0.5 * (low.astype(np.float64) + high.astype(np.float64))
    raise ValidationError(f"unknown model {model!r}")


def gen_response(model: str, pred: dict, rng, noise: bool = True) -> np.ndarray:
    """Response draw y = mu(X) + eps; ``noise=False`` suppresses eps."""
    mu = model_mean(model, pred)
    if not noise:
        return mu
    return mu + rng.standard_normal(mu.shape[0])


def make_dataset(pred: dict, y) -> Dataset:
    """Assemble the fixed-order 11-variable dataset."""
    columns = []
    for name, role in zip(VARIABLES, ROLES):
        col = pred[name]
        if role == "c":
            # integer values become string level labels "1".."10"
            col = [str(int(v)) for v in col]
        columns.append(col)
    return from_arrays(VARIABLES, columns, ROLES, np.asarray(y, np.float64))


def inject_missing(ds: Dataset, rates: dict, rng) -> Dataset:
    """Set a fraction of each named predictor missing completely at random."""
    X = ds.X.copy()
    for name, rate in rates.items():
        k = ds.names.index(name)
        mask = rng.uniform(size=ds.n_rows) < rate
        X[mask, k] = np.nan
    return Dataset(names=ds.names, X=X, iscat=ds.iscat, levels=ds.levels,
                   y=ds.y, y_name=ds.y_name)


@dataclass(frozen=True)
class BiasReport:
    """Mean scores with 2-SE overlap verdict over repeated trials."""

    names: tuple
    method: str
    model: str
    trials: int
    scores: np.ndarray               # trials x K per-trial score matrix
    means: np.ndarray
    ses: np.ndarray
    overlap: bool


def overlap_verdict(means, ses) -> bool:
    """True iff every pair of mean +- 2*SE intervals intersects."""
    means = np.asarray(means, dtype=np.float64)
    ses = np.asarray(ses, dtype=np.float64)
    if means.shape != ses.shape:
        raise ValidationError("means and ses lengths differ")
    lo = means - 2.0 * ses
    hi = means + 2.0 * ses
    for i in range(means.size):
        for j in range(i + 1, means.size):
            if max(lo[i], lo[j]) > min(hi[i], hi[j]):
                return False
    return True


def _trial_dataset(model: str, n: int, seed, t: int,
                   missing_rates=None) -> Dataset:
    rng = np.random.default_rng(derive(seed, STREAM_TRIAL, t))
    pred = gen_predictors(n, rng)
    noise_rng = np.random.default_rng(derive(seed, STREAM_NOISE, t))
    y = gen_response(model, pred, noise_rng)
    ds = make_dataset(pred, y)
    if missing_rates:
        miss_rng = np.random.default_rng(derive(seed, STREAM_MISSING, t))
        ds = inject_missing(ds, missing_rates, miss_rng)
    return ds


def _guide_trial(args) -> np.ndarray:
    model, n, B, seed, t, missing_rates = args
    ds = _trial_dataset(model, n, seed, t, missing_rates)
    rep = importance.bias_adjusted(ds, TreeConfig(), B=B,
                                   seed=derive(seed, STREAM_TRIAL, t, 1))
    return rep.vi


def _cart_trial(args) -> np.ndarray:
    model, n, B, seed, t, missing_rates = args
    ds = _trial_dataset(model, n, seed, t, missing_rates)
    return cart.rpart_importance(cart.grow_cart(ds))


def run_bias_experiment(method: str, model: str, trials: int, n: int = 400,
                        B: int = 300, seed=0, threads: int = 1,
                        missing_rates=None) -> BiasReport:
    """Repeated-trial scoring experiment with fresh data every trial.

    ``method`` is "guide" (bias-adjusted VI with B permutations) or "cart"
    (surrogate-split importance, no permutations).  Per-trial streams are
    derived from the seed by trial index, so any worker count yields the
    same report.
    """
    if trials < 2:
        raise ValidationError("trials must be at least 2")
    if model not in MODELS:
        raise ValidationError(f"unknown model {model!r}")
    if method not in ("guide", "cart"):
        raise ValidationError(f"unknown method {method!r}")
    worker = _guide_trial if method == "guide" else _cart_trial
    jobs = [(model, n, B, seed, t, missing_rates) for t in range(trials)]
    rows = parallel_map(worker, jobs, threads=threads)
    scores = np.vstack(rows)
    means = scores.mean(axis=0)
    sds = scores.std(axis=0, ddof=1)
    ses = sds / sqrt(trials)
    return BiasReport(names=VARIABLES, method=method, model=model,
                      trials=trials, scores=scores, means=means, ses=ses,
                      overlap=overlap_verdict(means, ses))


def trials_csv(report: BiasReport) -> str:
    """Tidy per-trial scores: trial, variable, score."""
    lines = ["trial,variable,score"]
    for t in range(report.trials):
        for k, name in enumerate(report.names):
            lines.append(f"{t},{name},{float(report.scores[t, k])!r}")
    return "\n".join(lines) + "\n"


def summary_csv(report: BiasReport) -> str:
    """Per-variable mean and SE plus a trailing overlap-verdict comment."""
    lines = ["variable,mean,se"]
    for k, name in enumerate(report.names):
        lines.append(f"{name},{float(report.means[k])!r},{float(report.ses[k])!r}")
    lines.append(f"# overlap_verdict={'true' if report.overlap else 'false'}")
    return "\n".join(lines) + "\n"

"""Variable-importance scores: raw, bias-adjusted, and thresholded.

The raw score of variable k is the sum over a tree's split nodes of
sqrt(n_t) times the chi-squared(1) upper quantile at that node's selection
p-value.  Because raw scores of uninformative variables are not centered
anywhere meaningful, they are calibrated by rebuilding the tree on B
response permutations: VI = v / v_bar, so a variable unrelated to the
response scores about 1.

The significance threshold reuses the same permutations: with v_b the
largest raw score in permutation b, v*(alpha) is the (1-alpha) quantile of
{v_b}; m counts real scores strictly above it; the normalization constant
is the midpoint of the m-th and (m+1)-th largest VI, so exactly the m
flagged variables have normalized scores above 1.
"""

import json
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import _kernels
from .data import Dataset, permute_response
from .errors import ValidationError
from .parallel import STREAM_ORACLE, STREAM_PERMUTE, derive, parallel_map
from .stats import empirical_quantile
from .tree import Tree, TreeConfig, grow


@dataclass(frozen=True)
class ImportanceReport:
    """Per-variable scores plus permutation and threshold metadata."""

    names: tuple
    v: np.ndarray                     # raw scores on the real response
    v_bar: np.ndarray                 # mean raw score over permutations
    vi: np.ndarray                    # bias-adjusted scores v / v_bar
    perm_max: np.ndarray              # per-permutation max raw score
    B: int
    seed: object
    alpha: Optional[float] = None
    v_star: Optional[float] = None
    m: Optional[int] = None
    v_tilde: Optional[float] = None
    normalized: Optional[np.ndarray] = None
    important: Optional[np.ndarray] = None
    note: str = ""


def raw_scores(tree: Tree, K: int = None) -> np.ndarray:
    """Raw importance of every variable from one grown tree (all zeros
    when the tree has no split nodes)."""
    raw = tree._raw
    if K is not None and K != tree.K:
        raise ValidationError("K does not match the tree")
    return _kernels.raw_scores_from_tree(
        raw["p1"], raw["logp1"], raw["end"] - raw["start"],
        raw["split_var"], tree.K)


def _perm_scores(args) -> np.ndarray:
    """Raw scores of one permuted rebuild (worker for parallel_map)."""
    X, iscat, nlev, y, split_levels, min_split, min_child, seedseq = args
    rng = np.random.default_rng(seedseq)
    perm = rng.permutation(y.shape[0])
    raw = _kernels.grow_tree(X, iscat, nlev, y[perm], split_levels,
                             min_split, min_child)
    return _kernels.raw_scores_from_tree(
        raw["p1"], raw["logp1"], raw["end"] - raw["start"],
        raw["split_var"], X.shape[1])


def bias_adjusted(ds: Dataset, config: TreeConfig = TreeConfig(),
                  B: int = 300, seed=0, threads: int = 1) -> ImportanceReport:
    """Bias-adjusted importance via B response-permutation rebuilds.

    Permutation b draws from the stream derived at (seed, permute-tag, b),
    so any execution order and worker count gives identical results; the
    reduction runs in index order.  A variable whose permutation mean is 0
    (its trees never split) gets VI = 0.
    """
    if B < 1:
        raise ValidationError("B must be at least 1")
    tree = grow(ds, config)
    v = raw_scores(tree)
    jobs = [
        (ds.X, ds.iscat, ds.nlev, ds.y, config.split_levels,
         config.min_node_to_split, config.min_child,
         derive(seed, STREAM_PERMUTE, b))
        for b in range(B)
    ]
    results = parallel_map(_perm_scores, jobs, threads=threads)
    acc = np.zeros(ds.n_predictors, dtype=np.float64)
    perm_max = np.empty(B, dtype=np.float64)
    for b, vb in enumerate(results):
        acc += vb
        perm_max[b] = vb.max()
    v_bar = acc / B
    safe = np.where(v_bar > 0.0, v_bar, 1.0)
    vi = np.where(v_bar > 0.0, v / safe, 0.0)
    return ImportanceReport(names=ds.names, v=v, v_bar=v_bar, vi=vi,
                            perm_max=perm_max, B=B, seed=seed)


def threshold(report: ImportanceReport, alpha: float) -> ImportanceReport:
    """Fill v_star, m, v_tilde, normalized scores and importance flags.

    m counts raw scores strictly above v*(alpha).  The top m variables by
    VI are flagged (ties to the smaller index).  With m = 0 nothing is
    flagged and normalized scores are reported as the unnormalized VI;
    with m = K the normalizer is the smallest VI so every flagged score
    stays at or above 1.
    """
    if not 0.0 < alpha < 1.0:
        raise ValidationError("alpha must lie strictly between 0 and 1")
    if report.perm_max.size == 0:
        raise ValidationError("report carries no permutation maxima")
    K = len(report.names)
    v_star = empirical_quantile(report.perm_max, 1.0 - alpha)
    m = int((report.v > v_star).sum())
    flags = np.zeros(K, dtype=bool)
    note = ""
    if m == 0:
        v_tilde = None
        normalized = report.vi.copy()
        note = ("m = 0: no variable exceeds the permutation threshold; "
                "normalized column holds unnormalized VI")
    else:
        order = np.argsort(-report.vi, kind="stable")
        vi_desc = report.vi[order]
        if m >= K:
            m = K
            v_tilde = float(vi_desc[K - 1])
        else:
            v_tilde = float((vi_desc[m - 1] + vi_desc[m]) / 2.0)
        flags[order[:m]] = True
        if v_tilde > 0.0:
            normalized = report.vi / v_tilde
        else:
            normalized = report.vi.copy()
            note = "v_tilde = 0: normalized column holds unnormalized VI"
    return replace(report, alpha=alpha, v_star=float(v_star), m=m,
                   v_tilde=v_tilde, normalized=normalized, important=flags,
                   note=note)


def score(ds: Dataset, config: TreeConfig = TreeConfig(), B: int = 300,
          alpha: float = 0.05, seed=0, threads: int = 1) -> ImportanceReport:
    """Full pipeline: bias-adjusted scores plus the threshold stage."""
    return threshold(bias_adjusted(ds, config, B=B, seed=seed,
                                   threads=threads), alpha)


def exact_threshold_oracle(ds: Dataset, config: TreeConfig, alpha: float,
                           J_outer: int, B_inner: int, seed=0) -> float:
    """Double-permutation estimate of the VI threshold (test oracle).

    Each of J_outer outer permutations is scored with a full bias-adjusted
    run of B_inner inner permutations; the (1-alpha) quantile of the outer
    max-VI values estimates the exact threshold that the single-level
    permutation rule approximates.  Quadratic cost; small data only.
    """
    if J_outer < 1:
        raise ValidationError("J_outer must be at least 1")
    u = np.empty(J_outer, dtype=np.float64)
    for j in range(J_outer):
        rng = np.random.default_rng(derive(seed, STREAM_ORACLE, j, 0))
        ds_j = permute_response(ds, rng)
        rep = bias_adjusted(ds_j, config, B=B_inner,
                            seed=derive(seed, STREAM_ORACLE, j, 1))
        u[j] = rep.vi.max()
    return float(empirical_quantile(u, 1.0 - alpha))


def _fmt(x: float) -> str:
    return repr(float(x))


def report_csv(report: ImportanceReport) -> str:
    """CSV body: one row per variable, fixed column order."""
    if report.normalized is None:
        raise ValidationError("run threshold() before serializing the report")
    lines = ["name,v,v_bar,VI,normalized,important"]
    for k, name in enumerate(report.names):
        lines.append(",".join([
            name, _fmt(report.v[k]), _fmt(report.v_bar[k]),
            _fmt(report.vi[k]), _fmt(report.normalized[k]),
            "true" if report.important[k] else "false",
        ]))
    return "\n".join(lines) + "\n"


def _seed_json(seed) -> object:
    if isinstance(seed, np.random.SeedSequence):
        return {"entropy": seed.entropy, "spawn_key": list(seed.spawn_key)}
    return seed


def report_json(report: ImportanceReport) -> str:
    """JSON form: per-variable rows plus global threshold metadata."""
    if report.normalized is None:
        raise ValidationError("run threshold() before serializing the report")
    doc = {
        "B": report.B,
        "alpha": report.alpha,
        "v_star": report.v_star,
        "m": report.m,
        "v_tilde": report.v_tilde,
        "seed": _seed_json(report.seed),
        "note": report.note,
        "perm_max": [float(x) for x in report.perm_max],
        "variables": [
            {
                "name": name,
                "v": float(report.v[k]),
                "v_bar": float(report.v_bar[k]),
                "VI": float(report.vi[k]),
                "normalized": float(report.normalized[k]),
                "important": bool(report.important[k]),
            }
            for k, name in enumerate(report.names)
        ],
    }
    return json.dumps(doc, indent=2) + "\n"

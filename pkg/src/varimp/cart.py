"""Greedy CART-style regression tree with surrogate splits.

This is the biased comparator for the bias-audit experiments: the split
variable is chosen jointly with the split by maximal SSE decrease, which
systematically favors variables offering more candidate splits.

Candidate splits are evaluated on the rows observed in the candidate
variable (missing rows are set aside), with the same search mechanics as
the scoring tree: threshold midpoints for ordinals, exhaustive level
subsets up to 12 present levels and mean-ordered cuts beyond.  At
partition time, rows missing the primary split variable are routed by the
best-ranked surrogate observed at that row, else to the larger child.

Surrogates: for every other variable, the split that best reproduces the
primary's left/right assignment over rows observed in both variables.
With k matching assignments out of the primary's (n_L, n_R) there, the
adjusted agreement is a = (k - max(n_L, n_R)) / min(n_L, n_R); surrogates
with a <= 0 do no better than sending everything to the larger child and
are dropped.

Importance of a variable sums the decrease of every primary split it
owns, plus a * decrease(surrogate split) at every node where it is a
retained surrogate.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .data import Dataset
from .errors import ValidationError


@dataclass(frozen=True)
class CartConfig:
    """Growth limits; depth counts split levels like the scoring tree."""

    max_depth: int = 4
    min_node_to_split: int = 8
    min_child: int = 2

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValidationError("max_depth must be at least 1")
        if self.min_node_to_split < 2 * self.min_child:
            raise ValidationError(
                "min_node_to_split must be at least 2 * min_child")


@dataclass(frozen=True)
class CartSplit:
    variable: int
    is_categorical: bool
    threshold: Optional[float]
    levels_left: Optional[tuple]
    delta: float                      # SSE decrease on observed rows
    n_l_obs: int
    n_r_obs: int


@dataclass(frozen=True)
class SurrogateSplit:
    """Substitute split mimicking the primary's left/right assignment."""

    variable: int
    is_categorical: bool
    threshold: Optional[float]
    levels_left: Optional[tuple]
    left_if_le: bool                  # ordinal: whether x <= threshold goes left
    agreement: int                    # matching assignments k
    adjusted_agreement: float
    delta: float                      # decrease of this split on its observed rows


@dataclass
class CartNode:
    node_id: int
    depth: int
    rows: np.ndarray
    n_t: int
    mean_y: float
    sse: float
    split: Optional[CartSplit] = None
    surrogates: list = field(default_factory=list)
    left: Optional["CartNode"] = None
    right: Optional["CartNode"] = None


class CartTree:
    def __init__(self, root: CartNode, nodes: list, K: int, names):
        self.root = root
        self.nodes = nodes
        self.K = K
        self.names = tuple(names)


def _best_primary(ds: Dataset, rows: np.ndarray, min_child: int):
    """Maximal-decrease split over all variables; smaller index on ties."""
    best = None
    for k in range(ds.n_predictors):
        found, thr, levels, _ml, dec, nl, nr = _kernels.best_split_rows(
            ds.X, k, bool(ds.iscat[k]), int(ds.nlev[k]), ds.y,
            rows, 0, rows.shape[0], min_child, True)
        if not found:
            continue
        if best is None or dec > best.delta:
            best = CartSplit(
                variable=k, is_categorical=bool(ds.iscat[k]),
                threshold=None if thr is None else float(thr),
                levels_left=None if levels is None
                else tuple(int(c) for c in levels),
                delta=float(dec), n_l_obs=int(nl), n_r_obs=int(nr))
    return best


def _split_decrease(y: np.ndarray, mask_left: np.ndarray) -> float:
    """SSE decrease of a fixed binary partition of one response vector."""
    nl = int(mask_left.sum())
    nr = y.shape[0] - nl
    if nl == 0 or nr == 0:
        return 0.0
    yc = y - y.mean()
    sl = float(yc[mask_left].sum())
    st = float(yc.sum())
    sr = st - sl
    return sl * sl / nl + sr * sr / nr - st * st / y.shape[0]


def _route_by_split(values: np.ndarray, split) -> np.ndarray:
    """Left mask for non-missing values under a primary or surrogate split."""
    if split.is_categorical:
        left_set = np.asarray(split.levels_left, dtype=np.intp)
        return np.isin(values.astype(np.intp), left_set)
    mask = values <= split.threshold
    if isinstance(split, SurrogateSplit) and not split.left_if_le:
        mask = ~mask
    return mask


def find_surrogates(ds: Dataset, rows: np.ndarray, primary: CartSplit) -> list:
    """Ranked surrogate splits for a node's primary split.

    Agreement is counted over rows observed in both the primary and the
    candidate variable; candidates that cannot beat the majority rule
    (adjusted agreement <= 0) are dropped.  Result is sorted by descending
    adjusted agreement, ties to the smaller variable index.
    """
    pv = ds.X[rows, primary.variable]
    obs_p = ~np.isnan(pv)
    primary_left_all = np.zeros(rows.shape[0], dtype=bool)
    primary_left_all[obs_p] = _route_by_split(pv[obs_p], primary)
    out = []
    for j in range(ds.n_predictors):
        if j == primary.variable:
            continue
        xv = ds.X[rows, j]
        both = obs_p & ~np.isnan(xv)
        n_both = int(both.sum())
        if n_both == 0:
            continue
        pl = primary_left_all[both]
        n_lp = int(pl.sum())
        n_rp = n_both - n_lp
        if n_lp == 0 or n_rp == 0:
            continue
        xb = xv[both]
        if ds.iscat[j]:
            cand = _surrogate_categorical(xb, pl, int(ds.nlev[j]), j)
        else:
            cand = _surrogate_ordinal(xb, pl, j)
        if cand is None:
            continue
        k_agree, definition = cand
        a = (k_agree - max(n_lp, n_rp)) / min(n_lp, n_rp)
        if a <= 0.0:
            continue
        obs_j = ~np.isnan(xv)
        yj = ds.y[rows[obs_j]]
        mask_left = _route_by_split(xv[obs_j], definition)
        delta = _split_decrease(yj, mask_left)
        out.append(SurrogateSplit(
            variable=j, is_categorical=definition.is_categorical,
            threshold=definition.threshold,
            levels_left=definition.levels_left,
            left_if_le=definition.left_if_le,
            agreement=int(k_agree), adjusted_agreement=float(a),
            delta=float(delta)))
    out.sort(key=lambda s: (-s.adjusted_agreement, s.variable))
    return out


def _surrogate_ordinal(xb: np.ndarray, pl: np.ndarray, j: int):
    """Threshold (either orientation) maximizing agreement with ``pl``."""
    order = np.argsort(xb, kind="stable")
    xs = xb[order]
    cum_left = np.cumsum(pl[order].astype(np.int64))
    distinct = np.nonzero(xs[:-1] != xs[1:])[0]
    if distinct.size == 0:
        return None
    n_both = xb.shape[0]
    n_rp = n_both - int(pl.sum())
    k_normal = 2 * cum_left[distinct] - (distinct + 1) + n_rp
    k_flip = n_both - k_normal
    best_k = int(max(k_normal.max(), k_flip.max()))
    hit_n = np.nonzero(k_normal == best_k)[0]
    hit_f = np.nonzero(k_flip == best_k)[0]
    # ties: smaller threshold first, same-threshold normal orientation first
    if hit_n.size and (not hit_f.size or hit_n[0] <= hit_f[0]):
        i = int(distinct[hit_n[0]])
        left_if_le = True
    else:
        i = int(distinct[hit_f[0]])
        left_if_le = False
    thr = 0.5 * (float(xs[i]) + float(xs[i + 1]))
    definition = SurrogateSplit(variable=j, is_categorical=False,
                                threshold=thr, levels_left=None,
                                left_if_le=left_if_le, agreement=0,
                                adjusted_agreement=0.0, delta=0.0)
    return best_k, definition


def _surrogate_categorical(xb: np.ndarray, pl: np.ndarray, nlev: int, j: int):
    """Per-level majority assignment; ties send the level right."""
    codes = xb.astype(np.intp)
    cl = np.bincount(codes[pl], minlength=nlev)
    cr = np.bincount(codes[~pl], minlength=nlev)
    k_agree = int(np.maximum(cl, cr).sum())
    levels_left = tuple(int(c) for c in np.nonzero(cl > cr)[0])
    definition = SurrogateSplit(variable=j, is_categorical=True,
                                threshold=None, levels_left=levels_left,
                                left_if_le=True, agreement=0,
                                adjusted_agreement=0.0, delta=0.0)
    return k_agree, definition


def _partition(ds: Dataset, rows: np.ndarray, split: CartSplit,
               surrogates: list):
    """Route every node row: primary, then surrogates, then majority."""
    xv = ds.X[rows, split.variable]
    obs = ~np.isnan(xv)
    go_left = np.zeros(rows.shape[0], dtype=bool)
    go_left[obs] = _route_by_split(xv[obs], split)
    pending = np.nonzero(~obs)[0]
    majority_left = split.n_l_obs >= split.n_r_obs
    for i in pending:
        routed = False
        for s in surrogates:
            v = ds.X[rows[i], s.variable]
            if np.isnan(v):
                continue
            go_left[i] = bool(_route_by_split(np.array([v]), s)[0])
            routed = True
            break
        if not routed:
            go_left[i] = majority_left
    return rows[go_left], rows[~go_left]


def grow_cart(ds: Dataset, config: CartConfig = CartConfig()) -> CartTree:
    """Grow the greedy tree; deterministic given the dataset."""
    nodes = []

    def build(rows: np.ndarray, depth: int) -> CartNode:
        y = ds.y[rows]
        mean = float(y.mean())
        sse = float(((y - mean) ** 2).sum())
        node = CartNode(node_id=len(nodes), depth=depth, rows=rows,
                        n_t=rows.shape[0], mean_y=mean, sse=sse)
        nodes.append(node)
        if (depth >= config.max_depth
                or rows.shape[0] < config.min_node_to_split
                or y.min() == y.max()):
            return node
        primary = _best_primary(ds, rows, config.min_child)
        if primary is None:
            return node
        node.split = primary
        node.surrogates = find_surrogates(ds, rows, primary)
        left_rows, right_rows = _partition(ds, rows, primary, node.surrogates)
        if left_rows.shape[0] == 0 or right_rows.shape[0] == 0:
            # all rows routed one way after missing-value routing
            node.split = None
            node.surrogates = []
            return node
        node.left = build(left_rows, depth + 1)
        node.right = build(right_rows, depth + 1)
        return node

    root = build(np.arange(ds.n_rows, dtype=np.intp), 0)
    return CartTree(root, nodes, ds.n_predictors, ds.names)


def rpart_importance(tree: CartTree) -> np.ndarray:
    """Importance: own primary decreases plus agreement-weighted surrogate
    decreases at every node where the variable is a retained surrogate."""
    imp = np.zeros(tree.K, dtype=np.float64)
    for node in tree.nodes:
        if node.split is None:
            continue
        imp[node.split.variable] += node.split.delta
        for s in node.surrogates:
            imp[s.variable] += s.adjusted_agreement * s.delta
    return imp

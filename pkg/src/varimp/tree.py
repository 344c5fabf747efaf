"""Shallow regression trees with chi-squared split-variable selection.

A tree is grown with a fixed number of split levels (default 4, so split
nodes sit at depths 0..3) and no pruning.  At each splittable node:

1. rows are classed by residual sign against the node mean (class 1 =
   positive residual, class 2 otherwise);
2. every predictor is cross-tabulated against the classes - ordinals cut
   at within-node quantiles (3 bins when the node has fewer than 60 rows,
   else 4), categoricals by level, missing values in their own column -
   and tested with a chi-squared test, giving curvature p-values p1;
3. if no p1 clears the Bonferroni level 0.10/K, every predictor pair is
   tested against the classes jointly and the best pair's p-value
   overwrites both members' p1 when it clears 0.20/(K(K-1));
4. the variable with the smallest p1 (smallest index on ties) is split at
   its best SSE-reducing cutpoint, trying missing values on both sides.

The heavy lifting happens in the numeric kernel; this module provides the
object model, the step-level operations used by tests, and prediction.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .data import Dataset
from .errors import ValidationError
from .stats import TestResult

CURVATURE_ALPHA = 0.10
INTERACTION_ALPHA = 0.20


@dataclass(frozen=True)
class TreeConfig:
    """Growth limits for the scoring tree."""

    split_levels: int = 4
    min_node_to_split: int = 8
    min_child: int = 2

    def __post_init__(self):
        if self.split_levels < 1:
            raise ValidationError("split_levels must be at least 1")
        if self.min_child < 1:
            raise ValidationError("min_child must be at least 1")
        if self.min_node_to_split < 2 * self.min_child:
            raise ValidationError(
                "min_node_to_split must be at least 2 * min_child")


@dataclass(frozen=True)
class Split:
    """A binary split: threshold on an ordinal or level subset on a categorical."""

    variable: int
    is_categorical: bool
    threshold: Optional[float]        # ordinal only; x <= threshold goes left
    levels_left: Optional[tuple]      # categorical only; level codes sent left
    missing_left: bool
    decrease: float


@dataclass(frozen=True)
class NodeTests:
    """Per-node selection tests: curvature p-values and interaction outcome."""

    p1: np.ndarray
    log_p1: np.ndarray
    interaction_triggered: bool
    p2_best: Optional[tuple]          # (j, k, p, log_p) of the winning pair
    p2_applied: bool


@dataclass
class Node:
    """One tree node over a contiguous segment of the row-index array."""

    node_id: int
    depth: int
    rows: np.ndarray
    n_t: int
    mean_y: float
    sse: float
    tests: Optional[NodeTests] = None
    split: Optional[Split] = None
    left: Optional["Node"] = None
    right: Optional["Node"] = None

    @property
    def is_leaf(self) -> bool:
        return self.split is None


class Tree:
    """Grown tree: node graph plus the flat arrays the scorer consumes."""

    def __init__(self, raw: dict, config: TreeConfig, names):
        self._raw = raw
        self.config = config
        self.names = tuple(names)
        self.K = int(raw["p1"].shape[1])
        n_nodes = raw["n_nodes"]
        rows = raw["rows"]
        nodes = []
        for t in range(n_nodes):
            tests = None
            if raw["tested"][t]:
                p2_best = None
                if raw["interaction_tested"][t] and raw["p2_j"][t] >= 0:
                    p2_best = (int(raw["p2_j"][t]), int(raw["p2_k"][t]),
                               float(raw["p2"][t]), float(raw["logp2"][t]))
                tests = NodeTests(
                    p1=raw["p1"][t],
                    log_p1=raw["logp1"][t],
                    interaction_triggered=bool(raw["interaction_tested"][t]),
                    p2_best=p2_best,
                    p2_applied=bool(raw["p2_applied"][t]),
                )
            split = None
            if raw["split_var"][t] >= 0:
                is_cat = bool(raw["split_is_cat"][t])
                off, ln = raw["subset_off"][t], raw["subset_len"][t]
                split = Split(
                    variable=int(raw["split_var"][t]),
                    is_categorical=is_cat,
                    threshold=None if is_cat else float(raw["threshold"][t]),
                    levels_left=tuple(int(c) for c in raw["subsets"][off:off + ln])
                    if is_cat else None,
                    missing_left=bool(raw["missing_left"][t]),
                    decrease=float(raw["decrease"][t]),
                )
            nodes.append(Node(
                node_id=t,
                depth=int(raw["depth"][t]),
                rows=rows[raw["start"][t]:raw["end"][t]],
                n_t=int(raw["end"][t] - raw["start"][t]),
                mean_y=float(raw["mean"][t]),
                sse=float(raw["sse"][t]),
                tests=tests,
                split=split,
            ))
        for t in range(n_nodes):
            if raw["left"][t] >= 0:
                nodes[t].left = nodes[raw["left"][t]]
                nodes[t].right = nodes[raw["right"][t]]
        self.nodes = nodes
        self.root = nodes[0]
        self._left_sets = [
            frozenset(node.split.levels_left) if node.split is not None
            and node.split.is_categorical else None
            for node in nodes
        ]

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def intermediate_nodes(self) -> list:
        return [node for node in self.nodes if node.split is not None]

    def predict(self, X) -> np.ndarray:
        """Leaf-mean predictions for a predictor matrix in dataset encoding."""
        X = np.asarray(X, dtype=np.float64)
        out = np.empty(X.shape[0], dtype=np.float64)
        for i in range(X.shape[0]):
            node = self.root
            while node.split is not None:
                sp = node.split
                v = X[i, sp.variable]
                if np.isnan(v):
                    go_left = sp.missing_left
                elif sp.is_categorical:
                    go_left = int(v) in self._left_sets[node.node_id]
                else:
                    go_left = v <= sp.threshold
                node = node.left if go_left else node.right
            out[i] = node.mean_y
        return out

    def dump(self) -> str:
        """Human-readable outline of the tree (debugging aid)."""
        lines = []

        def walk(node):
            pad = "  " * node.depth
            head = (f"{pad}node {node.node_id} depth={node.depth} "
                    f"n={node.n_t} mean={node.mean_y:.6g}")
            if node.split is None:
                lines.append(head + " leaf")
            else:
                sp = node.split
                name = self.names[sp.variable] if self.names else str(sp.variable)
                if sp.is_categorical:
                    desc = f"{name} in {sorted(sp.levels_left)}"
                else:
                    desc = f"{name} <= {sp.threshold:.6g}"
                miss = "left" if sp.missing_left else "right"
                pmin = float(node.tests.p1.min()) if node.tests is not None else 1.0
                lines.append(head + f" split[{desc}] missing->{miss} "
                                    f"p1_min={pmin:.3g}")
                walk(node.left)
                walk(node.right)

        walk(self.root)
        return "\n".join(lines)


def grow(ds: Dataset, config: TreeConfig = TreeConfig()) -> Tree:
    """Grow the scoring tree on a dataset; deterministic, no randomness."""
    raw = _kernels.grow_tree(ds.X, ds.iscat, ds.nlev, ds.y,
                             config.split_levels, config.min_node_to_split,
                             config.min_child)
    return Tree(raw, config, ds.names)


def root_node(ds: Dataset) -> Node:
    """Standalone root node over all rows (for step-level use in tests)."""
    mean = float(ds.y.mean())
    return Node(node_id=0, depth=0, rows=np.arange(ds.n_rows, dtype=np.intp),
                n_t=ds.n_rows, mean_y=mean,
                sse=float(((ds.y - mean) ** 2).sum()))


def residual_classes(node: Node, y) -> np.ndarray:
    """Class vector over the node's rows: 1 if y exceeds the node mean, else 2."""
    y = np.asarray(y, dtype=np.float64)
    if node.n_t == 0:
        raise ValidationError("node has no rows")
    return np.where(y[node.rows] - node.mean_y > 0, 1, 2).astype(np.int8)


def curvature_table(ds: Dataset, k: int, Z, node: Node) -> np.ndarray:
    """Residual-class vs binned-variable contingency table at a node.

    Ordinal variables are cut at within-node quantiles (m = 3 if the node
    has fewer than 60 rows else 4); categorical variables keep their
    levels.  A trailing column collecting missing values appears only
    when the node actually has missing values of the variable.
    """
    z = np.asarray(Z, dtype=np.int8) - 1
    table = _kernels.node_curvature_counts(
        ds.X, k, bool(ds.iscat[k]), int(ds.nlev[k]),
        node.rows, 0, node.n_t, z)
    if not np.isnan(ds.X[node.rows, k]).any():
        table = table[:, :-1]
    return table


def curvature_tests(ds: Dataset, Z, node: Node) -> NodeTests:
    """Curvature p-values for all variables (no interaction stage)."""
    K = ds.n_predictors
    p1 = np.empty(K)
    log_p1 = np.empty(K)
    for k in range(K):
        table = curvature_table(ds, k, Z, node)
        stat, df, p, log_p = _kernels.chisq_counts_test(table)
        p1[k] = p
        log_p1[k] = log_p
    return NodeTests(p1=p1, log_p1=log_p1, interaction_triggered=False,
                     p2_best=None, p2_applied=False)


def interaction_scan(ds: Dataset, Z, node: Node, tests: NodeTests) -> NodeTests:
    """Apply the conditional pairwise-interaction stage to curvature tests.

    Triggered iff min p1 >= 0.10/K; the winning pair's p-value overwrites
    both members' p1 iff it is below 0.20/(K(K-1)).  With K < 2 the tests
    are returned unchanged.
    """
    K = ds.n_predictors
    if K < 2:
        return tests
    if float(tests.p1.min()) < CURVATURE_ALPHA / K:
        return tests
    z = np.asarray(Z, dtype=np.int8) - 1
    j, k, p2, log_p2 = _kernels.node_interaction_scan(
        ds.X, ds.iscat, ds.nlev, node.rows, 0, node.n_t, z)
    p1 = tests.p1.copy()
    log_p1 = tests.log_p1.copy()
    applied = False
    if j >= 0 and p2 < INTERACTION_ALPHA / (K * (K - 1)):
        p1[j] = p1[k] = p2
        log_p1[j] = log_p1[k] = log_p2
        applied = True
    return NodeTests(p1=p1, log_p1=log_p1, interaction_triggered=True,
                     p2_best=(j, k, p2, log_p2) if j >= 0 else None,
                     p2_applied=applied)


def select_variable(tests: NodeTests) -> int:
    """Index of the smallest p1; ties keep the smallest index."""
    return int(np.argmin(tests.p1))


def best_split(ds: Dataset, k: int, node: Node,
               config: TreeConfig = TreeConfig()) -> Optional[Split]:
    """Best SSE-reducing split of variable k at a node, or None.

    Ordinal candidates are midpoints between consecutive distinct
    non-missing values, each tried with missing sent left and right;
    categorical candidates are level subsets (exhaustive up to 12 present
    levels, mean-ordered contiguous cuts beyond).  Zero-gain splits are
    rejected.
    """
    found, thr, levels_left, missing_left, dec, n_l, n_r = \
        _kernels.best_split_rows(ds.X, k, bool(ds.iscat[k]), int(ds.nlev[k]),
                                 ds.y, node.rows, 0, node.n_t,
                                 config.min_child, False)
    if not found:
        return None
    return Split(variable=k, is_categorical=bool(ds.iscat[k]),
                 threshold=None if thr is None else float(thr),
                 levels_left=None if levels_left is None
                 else tuple(int(c) for c in levels_left),
                 missing_left=bool(missing_left), decrease=float(dec))


def node_test_result(ds: Dataset, k: int, Z, node: Node) -> TestResult:
    """Full chi-squared test record for one variable at a node."""
    table = curvature_table(ds, k, Z, node)
    stat, df, p, log_p = _kernels.chisq_counts_test(table)
    return TestResult(float(stat), int(df), float(p), float(log_p))

"""Decision trees on float matrices: the base learners for boosting and
predictive imputation.

Split search is exact greedy: numeric features scan every boundary between
sorted distinct values; categorical features (level codes in the matrix)
scan prefixes of the levels ordered by within-node target mean. Ties on
split quality resolve to the lowest column index, then lowest threshold,
so fits are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FitError


@dataclass
class TreeNode:
    """Either an internal split or a leaf (``value`` is set, rest None)."""

    column: int | None = None
    kind: str | None = None  # "numeric" | "categorical"
    threshold: float | None = None
    level_subset: frozenset | None = None  # codes routed left
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float | None = None

    @property
    def is_leaf(self) -> bool:
        return self.value is not None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"value": self.value}
        node = {
            "column": self.column,
            "kind": self.kind,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }
        if self.kind == "numeric":
            node["threshold"] = self.threshold
        else:
            node["level_subset"] = sorted(self.level_subset)
        return node

    @classmethod
    def from_dict(cls, doc: dict) -> "TreeNode":
        if "value" in doc:
            return cls(value=float(doc["value"]))
        return cls(
            column=int(doc["column"]),
            kind=doc["kind"],
            threshold=doc.get("threshold"),
            level_subset=(
                frozenset(int(c) for c in doc["level_subset"])
                if "level_subset" in doc
                else None
            ),
            left=cls.from_dict(doc["left"]),
            right=cls.from_dict(doc["right"]),
        )


def predict_tree(tree: TreeNode, X: np.ndarray) -> np.ndarray:
    """Route every row of X to its leaf value."""
    out = np.empty(len(X), dtype=np.float64)
    stack = [(tree, np.arange(len(X)))]
    while stack:
        node, idx = stack.pop()
        if len(idx) == 0:
            continue
        if node.is_leaf:
            out[idx] = node.value
            continue
        x = X[idx, node.column]
        if node.kind == "numeric":
            go_left = x <= node.threshold
        else:
            # codes unseen at training time (including -1/-2) fall right
            codes = x.astype(np.int64)
            subset = np.fromiter(node.level_subset, dtype=np.int64)
            go_left = np.isin(codes, subset)
        stack.append((node.left, idx[go_left]))
        stack.append((node.right, idx[~go_left]))
    return out


def grow_regression_tree(
    X: np.ndarray,
    kinds: list[str],
    y: np.ndarray,
    max_depth: int,
    min_node_size: int = 1,
    columns: np.ndarray | None = None,
) -> TreeNode:
    """Least-squares regression tree. ``columns`` restricts the candidate
    feature set (used by column subsampling); indices stay global."""
    if len(X) == 0:
        raise FitError("cannot grow a tree on an empty matrix")
    if columns is None:
        columns = np.arange(X.shape[1])
    return _grow(X, kinds, np.asarray(y, dtype=np.float64), columns,
                 max_depth, min_node_size, _best_split_squared, _leaf_mean)


def grow_classification_tree(
    X: np.ndarray,
    y_codes: np.ndarray,
    n_classes: int,
    max_depth: int,
    min_node_size: int = 1,
) -> TreeNode:
    """Gini-impurity tree over numeric features with majority-vote leaves.

    Leaf values are class codes (floats), so ``predict_tree`` returns codes.
    """
    if len(X) == 0:
        raise FitError("cannot grow a tree on an empty matrix")
    onehot = np.zeros((len(y_codes), n_classes))
    onehot[np.arange(len(y_codes)), y_codes.astype(np.int64)] = 1.0
    columns = np.arange(X.shape[1])
    kinds = ["numeric"] * X.shape[1]
    return _grow(X, kinds, onehot, columns, max_depth, min_node_size,
                 _best_split_gini, _leaf_majority)


def _grow(X, kinds, y, columns, max_depth, min_node_size, split_fn, leaf_fn):
    idx = np.arange(len(X))

    def build(node_idx, depth):
        ysub = y[node_idx]
        if depth >= max_depth or len(node_idx) < 2 * min_node_size or _is_pure(ysub):
            return TreeNode(value=leaf_fn(ysub))
        found = split_fn(X, kinds, ysub, node_idx, columns, min_node_size)
        if found is None:
            return TreeNode(value=leaf_fn(ysub))
        col, threshold, subset, go_left = found
        return TreeNode(
            column=int(col),
            kind=kinds[col],
            threshold=threshold,
            level_subset=subset,
            left=build(node_idx[go_left], depth + 1),
            right=build(node_idx[~go_left], depth + 1),
        )

    return build(idx, 0)


def _is_pure(y: np.ndarray) -> bool:
    flat = y if y.ndim == 1 else y.argmax(axis=1)
    return bool((flat == flat[0]).all())


def _leaf_mean(y: np.ndarray) -> float:
    return float(y.mean())


def _leaf_majority(onehot: np.ndarray) -> float:
    return float(onehot.sum(axis=0).argmax())


def _best_split_squared(X, kinds, ysub, node_idx, columns, min_node_size):
    """Maximize sum of (child sum)^2 / child size; equivalent to SSE reduction."""
    n = len(node_idx)
    total = ysub.sum()
    best_score = -np.inf
    best = None
    for j in columns:
        x = X[node_idx, j]
        if kinds[j] == "numeric":
            order = np.argsort(x, kind="stable")
            xs = x[order]
            if xs[0] == xs[-1]:
                continue
            left_sum = np.cumsum(ysub[order])[:-1]
            n_left = np.arange(1, n)
            score = left_sum**2 / n_left + (total - left_sum) ** 2 / (n - n_left)
            valid = (xs[1:] > xs[:-1]) & (n_left >= min_node_size) & (n - n_left >= min_node_size)
            if not valid.any():
                continue
            score = np.where(valid, score, -np.inf)
            i = int(np.argmax(score))  # first max: lowest threshold on ties
            if score[i] > best_score:
                best_score = score[i]
                best = (j, float((xs[i] + xs[i + 1]) / 2.0), None,
                        x <= (xs[i] + xs[i + 1]) / 2.0)
        else:
            codes = x.astype(np.int64)
            uniq, inv = np.unique(codes, return_inverse=True)
            if len(uniq) < 2:
                continue
            sums = np.bincount(inv, weights=ysub)
            counts = np.bincount(inv)
            order = np.lexsort((uniq, sums / counts))  # by target mean, then code
            cum_sum = np.cumsum(sums[order])[:-1]
            cum_n = np.cumsum(counts[order])[:-1]
            score = cum_sum**2 / cum_n + (total - cum_sum) ** 2 / (n - cum_n)
            valid = (cum_n >= min_node_size) & (n - cum_n >= min_node_size)
            if not valid.any():
                continue
            score = np.where(valid, score, -np.inf)
            i = int(np.argmax(score))
            if score[i] > best_score:
                best_score = score[i]
                subset = frozenset(int(u) for u in uniq[order[: i + 1]])
                best = (j, None, subset, np.isin(codes, uniq[order[: i + 1]]))
    return best


def _best_split_gini(X, kinds, onehot, node_idx, columns, min_node_size):
    """Maximize sum over children of sum_k count_k^2 / size (gini proxy)."""
    n = len(node_idx)
    totals = onehot.sum(axis=0)
    best_score = -np.inf
    best = None
    for j in columns:
        x = X[node_idx, j]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        if xs[0] == xs[-1]:
            continue
        cum = np.cumsum(onehot[order], axis=0)[:-1]
        n_left = np.arange(1, n)
        score = (cum**2).sum(axis=1) / n_left + ((totals - cum) ** 2).sum(axis=1) / (n - n_left)
        valid = (xs[1:] > xs[:-1]) & (n_left >= min_node_size) & (n - n_left >= min_node_size)
        if not valid.any():
            continue
        score = np.where(valid, score, -np.inf)
        i = int(np.argmax(score))
        if score[i] > best_score:
            best_score = score[i]
            thr = float((xs[i] + xs[i + 1]) / 2.0)
            best = (j, thr, None, x <= thr)
    return best


def tree_depth(tree: TreeNode) -> int:
    if tree.is_leaf:
        return 0
    return 1 + max(tree_depth(tree.left), tree_depth(tree.right))


def count_leaves(tree: TreeNode) -> int:
    if tree.is_leaf:
        return 1
    return count_leaves(tree.left) + count_leaves(tree.right)

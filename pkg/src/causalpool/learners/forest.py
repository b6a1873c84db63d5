"""Bagged CART trees with exact midpoint splits.

Regression trees maximize variance reduction. Classification trees on
binary targets use the Gini criterion, which for 0/1 targets ranks every
candidate split identically to variance reduction (node impurity times
size is exactly twice the sum of squared errors), so one split engine
serves both; classification leaves store the class-1 fraction.

Determinism and row-order invariance: training rows are first brought
into a canonical lexicographic order, and every tree draws its bootstrap
sample and per-split feature subsets from a generator seeded by
``(seed, bootstrap_seed, tree index)``. Permuting the training rows or
changing worker counts therefore cannot change the fitted ensemble.

The builder is level-synchronous. Per-feature sorted orders are computed
once per forest; a tree's bootstrap sample enters as draw-count weights
on the unique rows present, so trees never sort and never materialize
duplicates. Every level's split search and stable partition run as
segmented array passes over all open nodes at once, on per-feature
(row id, value, weight, weighted target) quads kept in sorted order.
Minimum-leaf counts are bootstrap multiset counts, i.e. weighted.
Candidate thresholds are midpoints of consecutive distinct sorted
feature values; the best split maximizes variance reduction with ties
broken toward the lowest feature index, then the lowest threshold.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..seeding import derive_seed

# node feature == LEAF marks a leaf; value then holds the leaf mean.
LEAF = -1


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray  # int32, LEAF for leaves
    threshold: np.ndarray  # float64
    left: np.ndarray  # int32 child ids
    right: np.ndarray
    value: np.ndarray  # float64 node means


def _canonical_order(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # lexicographic by (x[:,0], x[:,1], ..., y); makes the training
    # multiset order-free before any seeded draws happen.
    keys = (y,) + tuple(x[:, j] for j in range(x.shape[1] - 1, -1, -1))
    return np.lexsort(keys)


class _LevelBuilder:
    """Grows one tree breadth-first over segmented per-feature orders."""

    def __init__(self, columns, rng, n_base, max_depth, min_leaf, n_try):
        # columns: per feature (row ids, sorted values, weights, weighted
        # targets), aligned and node-contiguous; ids index the base sample.
        self.rows = [c[0] for c in columns]
        self.vals = [c[1] for c in columns]
        self.wts = [c[2] for c in columns]
        self.wys = [c[3] for c in columns]
        self.rng = rng
        self.n_base = n_base
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.n_try = n_try
        self.d = len(columns)
        w0 = float(self.wts[0].sum())
        self.feature = [LEAF]
        self.threshold = [0.0]
        self.left = [LEAF]
        self.right = [LEAF]
        self.value = [float(self.wys[0].sum()) / w0]
        self.node_ids = np.array([0], dtype=np.int64)
        self.sizes = np.array([self.rows[0].shape[0]], dtype=np.int64)
        self.wsizes = np.array([w0], dtype=np.float64)

    def grow(self) -> Tree:
        depth = 0
        self._drop_small()
        while self.node_ids.size and depth < self.max_depth:
            self._split_level()
            depth += 1
            self._drop_small()
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            value=np.asarray(self.value, dtype=np.float64),
        )

    def _drop_small(self) -> None:
        # a node is closed once its bootstrap count cannot feed two leaves
        # or only one distinct row remains
        eligible = (self.wsizes >= 2 * self.min_leaf) & (self.sizes >= 2)
        if eligible.all():
            return
        keep = np.repeat(eligible, self.sizes)
        for f in range(self.d):
            self.rows[f] = self.rows[f][keep]
            self.vals[f] = self.vals[f][keep]
            self.wts[f] = self.wts[f][keep]
            self.wys[f] = self.wys[f][keep]
        self.node_ids = self.node_ids[eligible]
        self.sizes = self.sizes[eligible]
        self.wsizes = self.wsizes[eligible]

    def _candidate_mask(self, n_seg: int) -> np.ndarray | None:
        if self.n_try >= self.d:
            return None
        mask = np.zeros((n_seg, self.d), dtype=bool)
        for s in range(n_seg):
            mask[s, self.rng.choice(self.d, size=self.n_try, replace=False)] = True
        return mask

    def _split_level(self) -> None:
        sizes = self.sizes
        n_seg = sizes.shape[0]
        length = int(sizes.sum())
        starts = np.zeros(n_seg, dtype=np.int64)
        np.cumsum(sizes[:-1], out=starts[1:])
        seg_of = np.repeat(np.arange(n_seg), sizes)
        starts_exp = starts[seg_of]
        positions = np.arange(length, dtype=np.int64)
        cand_mask = self._candidate_mask(n_seg)

        # per-node totals are order-free; take them from feature 0
        wy0 = self.wys[0]
        w0 = self.wts[0]
        cswy = np.cumsum(wy0)
        ends = starts + sizes - 1
        tot = cswy[ends] - (cswy[starts] - wy0[starts])
        wtot = self.wsizes
        # maximizing variance reduction == maximizing
        #   sum_left^2/w_left + sum_right^2/w_right   (squared sums cancel);
        # gain = score - tot^2/wtot
        base_score = tot * tot / wtot

        best_gain = np.zeros(n_seg)
        best_feature = np.full(n_seg, LEAF, dtype=np.int64)
        best_threshold = np.zeros(n_seg)
        best_pos = np.zeros(n_seg, dtype=np.int64)
        best_w_left = np.ones(n_seg)
        best_sum_left = np.zeros(n_seg)

        tot_exp = tot[seg_of]
        wtot_exp = wtot[seg_of]
        base_score_exp = base_score[seg_of]
        min_leaf_f = float(self.min_leaf)

        for f in range(self.d):
            v = self.vals[f]
            w = self.wts[f]
            wy = self.wys[f]
            cs = np.cumsum(wy)
            cw = np.cumsum(w)
            sum_left = cs - (cs[starts_exp] - wy[starts_exp])
            w_left = cw - (cw[starts_exp] - w[starts_exp])
            w_right = wtot_exp - w_left
            sum_right = tot_exp - sum_left
            score = sum_left * sum_left / w_left + sum_right * sum_right / np.maximum(
                w_right, 1.0
            )
            gain = score - base_score_exp

            valid = (w_left >= min_leaf_f) & (w_right >= min_leaf_f)
            valid[:-1] &= v[1:] > v[:-1]
            valid[-1] = False
            if cand_mask is not None:
                valid &= np.repeat(cand_mask[:, f], sizes)
            gain = np.where(valid, gain, -np.inf)

            seg_best = np.maximum.reduceat(gain, starts)
            improved = seg_best > best_gain
            if not improved.any():
                continue
            winners = np.where(gain == seg_best[seg_of], positions, length)
            seg_pos = np.minimum.reduceat(winners, starts)
            pos = np.minimum(seg_pos, length - 2)
            thresholds = 0.5 * (v[pos] + v[pos + 1])
            best_feature = np.where(improved, f, best_feature)
            best_threshold = np.where(improved, thresholds, best_threshold)
            best_pos = np.where(improved, pos, best_pos)
            best_w_left = np.where(improved, w_left[pos], best_w_left)
            best_sum_left = np.where(improved, sum_left[pos], best_sum_left)
            best_gain = np.where(improved, seg_best, best_gain)

        split = best_feature >= 0
        if not split.any():
            self.node_ids = self.node_ids[:0]
            self.sizes = self.sizes[:0]
            self.wsizes = self.wsizes[:0]
            return

        # register children in segment order: [left_0, right_0, left_1, ...]
        split_ids = self.node_ids[split]
        split_feature = best_feature[split]
        split_threshold = best_threshold[split]
        w_left_seg = best_w_left[split]
        w_right_seg = wtot[split] - w_left_seg
        sum_left_seg = best_sum_left[split]
        sum_right_seg = tot[split] - sum_left_seg
        pos_left_seg = best_pos[split] - starts[split] + 1  # distinct-row counts
        pos_right_seg = sizes[split] - pos_left_seg
        n_children = 2 * split_ids.shape[0]
        first_child = len(self.feature)
        child_ids = first_child + np.arange(n_children, dtype=np.int64)
        for i, node in enumerate(split_ids):
            node = int(node)
            self.feature[node] = int(split_feature[i])
            self.threshold[node] = float(split_threshold[i])
            self.left[node] = int(child_ids[2 * i])
            self.right[node] = int(child_ids[2 * i + 1])
        means = np.empty(n_children)
        means[0::2] = sum_left_seg / w_left_seg
        means[1::2] = sum_right_seg / w_right_seg
        self.feature.extend([LEAF] * n_children)
        self.threshold.extend([0.0] * n_children)
        self.left.extend([LEAF] * n_children)
        self.right.extend([LEAF] * n_children)
        self.value.extend(means.tolist())

        # which base rows go left: within each splitting segment these are
        # the entries at positions up to best_pos in the winning feature's order
        goes_left = np.zeros(self.n_base, dtype=bool)
        split_exp = split[seg_of]
        best_pos_exp = best_pos[seg_of]
        best_feature_exp = best_feature[seg_of]
        for f in np.unique(split_feature):
            sel = split_exp & (best_feature_exp == f) & (positions <= best_pos_exp)
            goes_left[self.rows[int(f)][sel]] = True

        # stable within-segment partition of every feature's quad
        child_sizes = np.empty(n_children, dtype=np.int64)
        child_sizes[0::2] = pos_left_seg
        child_sizes[1::2] = pos_right_seg
        child_wsizes = np.empty(n_children)
        child_wsizes[0::2] = w_left_seg
        child_wsizes[1::2] = w_right_seg
        child_starts = np.zeros(n_children, dtype=np.int64)
        np.cumsum(child_sizes[:-1], out=child_starts[1:])
        keep = split_exp
        kept_sizes = sizes[split]
        n_kept = int(kept_sizes.sum())
        n_split = split_ids.shape[0]
        kept_starts = np.zeros(n_split, dtype=np.int64)
        np.cumsum(kept_sizes[:-1], out=kept_starts[1:])
        kept_seg_of = np.repeat(np.arange(n_split), kept_sizes)
        kept_starts_exp = kept_starts[kept_seg_of]
        pos_in_seg = np.arange(n_kept, dtype=np.int64) - kept_starts_exp
        left_start_exp = child_starts[0::2][kept_seg_of]
        right_start_exp = child_starts[1::2][kept_seg_of]

        all_kept = bool(split.all())
        for f in range(self.d):
            rows = self.rows[f] if all_kept else self.rows[f][keep]
            gl = goes_left[rows]
            counts_incl = np.cumsum(gl)
            lefts_incl = counts_incl - (counts_incl[kept_starts_exp] - gl[kept_starts_exp])
            new_pos = np.where(
                gl,
                left_start_exp + lefts_incl - 1,
                right_start_exp + pos_in_seg - lefts_incl,
            )
            self.rows[f] = _scatter(rows, new_pos)
            self.vals[f] = _scatter(
                self.vals[f] if all_kept else self.vals[f][keep], new_pos
            )
            self.wts[f] = _scatter(
                self.wts[f] if all_kept else self.wts[f][keep], new_pos
            )
            self.wys[f] = _scatter(
                self.wys[f] if all_kept else self.wys[f][keep], new_pos
            )

        self.node_ids = child_ids
        self.sizes = child_sizes
        self.wsizes = child_wsizes


def _scatter(arr: np.ndarray, new_pos: np.ndarray) -> np.ndarray:
    out = np.empty_like(arr)
    out[new_pos] = arr
    return out


def fit_forest(
    x: np.ndarray,
    y: np.ndarray,
    n_trees: int,
    max_depth: int,
    min_leaf: int,
    max_features: float,
    seed: int,
    bootstrap_seed: int,
) -> list[Tree]:
    n, d = x.shape
    order = _canonical_order(x, y)
    xs = np.ascontiguousarray(x[order])
    ys = np.ascontiguousarray(y[order])
    feature_orders = []
    for f in range(d):
        of = np.argsort(xs[:, f], kind="stable").astype(np.int32)
        feature_orders.append((of, np.ascontiguousarray(xs[of, f]), ys[of]))
    n_try = min(d, max(1, math.ceil(max_features * d)))
    trees = []
    for tree_idx in range(n_trees):
        rng = np.random.default_rng(derive_seed(seed, bootstrap_seed, tree_idx))
        boot = rng.integers(0, n, size=n)
        counts = np.bincount(boot, minlength=n).astype(np.float64)
        columns = []
        for of, vf, yf in feature_orders:
            w = counts[of]
            present = w > 0.0
            wp = w[present]
            columns.append((of[present], vf[present], wp, wp * yf[present]))
        builder = _LevelBuilder(columns, rng, n, max_depth, min_leaf, n_try)
        trees.append(builder.grow())
    return trees


def predict_tree(tree: Tree, x: np.ndarray) -> np.ndarray:
    out = np.empty(x.shape[0], dtype=np.float64)
    stack = [(0, np.arange(x.shape[0]))]
    while stack:
        node, rows = stack.pop()
        if rows.size == 0:
            continue
        f = tree.feature[node]
        if f == LEAF:
            out[rows] = tree.value[node]
            continue
        go_left = x[rows, f] <= tree.threshold[node]
        stack.append((tree.left[node], rows[go_left]))
        stack.append((tree.right[node], rows[~go_left]))
    return out


def predict_forest(trees: list[Tree], x: np.ndarray) -> np.ndarray:
    acc = np.zeros(x.shape[0], dtype=np.float64)
    for tree in trees:
        acc += predict_tree(tree, x)
    return acc / len(trees)

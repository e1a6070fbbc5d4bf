"""Compiled regression-tree kernels used by :mod:`limdep.learners`.

Trees are stored as flat arrays: ``feature`` (-1 marks a leaf), ``threshold``
(rows with ``x <= threshold`` go left), ``left``, ``right`` and ``value``.
Randomness comes from a splitmix64 stream seeded per tree, so a tree depends
only on its own seed.
"""

import numpy as np
from numba import njit

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


@njit(cache=True)
def _splitmix64(state):
    state = (state + np.uint64(0x9E3779B97F4A7C15)) & _MASK64
    z = state
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & _MASK64
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & _MASK64
    z = z ^ (z >> np.uint64(31))
    return state, z


@njit(cache=True)
def _best_split(x, y, idx, start, end, features, n_candidates, min_leaf):
    """Best variance-reduction split over the candidate features of one node.

    Features are scanned in ascending index order and thresholds in ascending
    order; only a strictly larger gain replaces the incumbent, so ties go to
    the lowest feature index, then the lowest threshold.
    """
    n = end - start
    total = 0.0
    for k in range(start, end):
        total += y[idx[k]]
    parent = total * total / n
    best_gain = 0.0
    best_feature = -1
    best_threshold = 0.0
    vals = np.empty(n)
    ys = np.empty(n)
    for fi in range(n_candidates):
        f = features[fi]
        for k in range(n):
            vals[k] = x[idx[start + k], f]
        order = np.argsort(vals, kind="mergesort")
        for k in range(n):
            ys[k] = y[idx[start + order[k]]]
        left_sum = 0.0
        for k in range(n - 1):
            left_sum += ys[k]
            n_left = k + 1
            if n_left < min_leaf:
                continue
            if n - n_left < min_leaf:
                break
            lo = vals[order[k]]
            hi = vals[order[k + 1]]
            if lo == hi:
                continue
            right_sum = total - left_sum
            gain = (
                left_sum * left_sum / n_left
                + right_sum * right_sum / (n - n_left)
                - parent
            )
            if gain > best_gain * (1.0 + 1e-12) + 1e-300:
                best_gain = gain
                best_feature = f
                thr = lo + 0.5 * (hi - lo)
                if thr >= hi:
                    thr = lo
                best_threshold = thr
    return best_feature, best_threshold


@njit(cache=True, nogil=True)
def build_tree(x, y, sample, mtry, min_leaf, max_depth, seed):
    """Grow one tree on the (possibly repeated) row indices in ``sample``."""
    n_features = x.shape[1]
    n = sample.shape[0]
    idx = sample.copy()
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int32)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int32)
    right = np.full(cap, -1, dtype=np.int32)
    value = np.zeros(cap)

    stack_node = np.empty(cap, dtype=np.int32)
    stack_start = np.empty(cap, dtype=np.int64)
    stack_end = np.empty(cap, dtype=np.int64)
    stack_depth = np.empty(cap, dtype=np.int64)
    top = 0
    stack_node[0] = 0
    stack_start[0] = 0
    stack_end[0] = n
    stack_depth[0] = 0
    top = 1
    n_nodes = 1

    perm = np.arange(n_features)
    candidates = np.empty(mtry, dtype=np.int64)
    state = np.uint64(seed)
    scratch = np.empty(n, dtype=np.int64)

    while top > 0:
        top -= 1
        node = stack_node[top]
        start = stack_start[top]
        end = stack_end[top]
        depth = stack_depth[top]
        size = end - start

        total = 0.0
        first = y[idx[start]]
        pure = True
        for k in range(start, end):
            total += y[idx[k]]
            if y[idx[k]] != first:
                pure = False
        value[node] = total / size

        if pure or size < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth):
            continue

        # partial Fisher-Yates draw of mtry distinct features
        for j in range(n_features):
            perm[j] = j
        for j in range(mtry):
            state, r = _splitmix64(state)
            k = j + np.int64(r % np.uint64(n_features - j))
            tmp = perm[j]
            perm[j] = perm[k]
            perm[k] = tmp
        for j in range(mtry):
            candidates[j] = perm[j]
        candidates.sort()

        f, thr = _best_split(x, y, idx, start, end, candidates, mtry, min_leaf)
        if f < 0:
            continue

        # stable partition of idx[start:end]
        n_left = 0
        n_right = 0
        for k in range(start, end):
            row = idx[k]
            if x[row, f] <= thr:
                idx[start + n_left] = row
                n_left += 1
            else:
                scratch[n_right] = row
                n_right += 1
        for k in range(n_right):
            idx[start + n_left + k] = scratch[k]

        feature[node] = f
        threshold[node] = thr
        lchild = n_nodes
        rchild = n_nodes + 1
        n_nodes += 2
        left[node] = lchild
        right[node] = rchild
        # push right first so the left subtree is numbered first
        stack_node[top] = rchild
        stack_start[top] = start + n_left
        stack_end[top] = end
        stack_depth[top] = depth + 1
        top += 1
        stack_node[top] = lchild
        stack_start[top] = start
        stack_end[top] = start + n_left
        stack_depth[top] = depth + 1
        top += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
    )


@njit(cache=True, nogil=True)
def predict_forest(x, offsets, feature, threshold, left, right, value):
    """Average of all trees; tree ``t`` occupies ``offsets[t]:offsets[t+1]``."""
    n = x.shape[0]
    n_trees = offsets.shape[0] - 1
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for t in range(n_trees):
            base = offsets[t]
            node = 0
            while feature[base + node] >= 0:
                if x[i, feature[base + node]] <= threshold[base + node]:
                    node = left[base + node]
                else:
                    node = right[base + node]
            acc += value[base + node]
        out[i] = acc / n_trees
    return out

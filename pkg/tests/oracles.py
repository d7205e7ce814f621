"""Independent brute-force oracles.

Everything here recomputes results the dumb way: explicit trial counting,
exhaustive threshold enumeration, straight-line network evaluation,
two-pass statistics. None of it shares code with the implementation under
test beyond the data types.
"""

from __future__ import annotations

import math

import numpy as np

from lidkit.submission import OUT_OF_SET


# ---------------------------------------------------------------------------
# metric oracles

def _aligned(records, key):
    """Matrix and true-language labels in key order ('OOS' stays a string)."""
    by_id = {r.segment_id: r.scores for r in records}
    ids = list(key.entries)
    matrix = np.array([by_id[s] for s in ids], dtype=np.float64)
    truths = [key.entries[s] for s in ids]
    return matrix, truths


def pairwise_by_counting(records, key, target, nontarget, theta, p_target=0.5):
    """Count miss/false-alarm trials one segment at a time."""
    col = key.language_list.index(target)
    n_target = n_miss = n_non = n_fa = 0
    matrix, truths = _aligned(records, key)
    for scores, true in zip(matrix, truths):
        if true == target:
            n_target += 1
            if scores[col] < theta:
                n_miss += 1
        elif true == nontarget:
            n_non += 1
            if scores[col] >= theta:
                n_fa += 1
    p_miss = n_miss / n_target
    p_fa = n_fa / n_non
    return p_miss, p_fa, p_target * p_miss + (1.0 - p_target) * p_fa


def cavg_by_counting(records, key, theta, p_target=0.5):
    """Fixed-threshold average cost via per-pair counting."""
    langs = key.language_list
    n = len(langs)
    p_nt = (1.0 - p_target) / (n - 1)
    groups = list(langs)
    if any(v == OUT_OF_SET for v in key.entries.values()):
        groups.append(OUT_OF_SET)
    total = 0.0
    for target in langs:
        p_miss = pairwise_by_counting(
            records, key, target, [g for g in groups if g != target][0], theta, p_target
        )[0]
        term = p_target * p_miss
        for nontarget in groups:
            if nontarget == target:
                continue
            _, p_fa, _ = pairwise_by_counting(records, key, target, nontarget, theta, p_target)
            term += p_nt * p_fa
        total += term
    return total / n


def cavg_sweep_oracle(records, key, p_target=0.5):
    """Evaluate the fixed-threshold formula at every candidate threshold
    (each distinct score plus +/-inf) and take the minimum.

    Counting is done by direct elementwise comparison, not sorting.
    Returns (min_cavg, minimizing_threshold).
    """
    matrix, truths = _aligned(records, key)
    truths = np.array(truths, dtype=object)
    langs = key.language_list
    n = len(langs)
    p_nt = (1.0 - p_target) / (n - 1)
    thetas = np.unique(np.concatenate([matrix.ravel(), [-np.inf, np.inf]]))
    groups = list(langs)
    if (truths == OUT_OF_SET).any():
        groups.append(OUT_OF_SET)
    total = np.zeros(thetas.size)
    for t, target in enumerate(langs):
        tgt = matrix[truths == target, t]
        miss = (tgt[:, None] < thetas[None, :]).sum(axis=0) / tgt.size
        term = p_target * miss
        for nontarget in groups:
            if nontarget == target:
                continue
            pool = matrix[truths == nontarget, t]
            fa = (pool[:, None] >= thetas[None, :]).sum(axis=0) / pool.size
            term = term + p_nt * fa
        total += term
    curve = total / n
    best = int(np.argmin(curve))
    return float(curve[best]), float(thetas[best])


def pooled_scores(records, key):
    """All (segment, hypothesis) trial scores split into target/nontarget."""
    matrix, truths = _aligned(records, key)
    targets, nontargets = [], []
    for scores, true in zip(matrix, truths):
        for i, lang in enumerate(key.language_list):
            (targets if true == lang else nontargets).append(scores[i])
    return np.array(targets), np.array(nontargets)


def det_by_enumeration(records, key):
    """DET points by per-threshold counting, endpoints included."""
    targets, nontargets = pooled_scores(records, key)
    points = [(0.0, 1.0)]
    for theta in np.unique(np.concatenate([targets, nontargets])):
        miss = float((targets < theta).sum() / targets.size)
        fa = float((nontargets >= theta).sum() / nontargets.size)
        points.append((miss, fa))
    points.append((1.0, 0.0))
    return points


def eer_by_enumeration(records, key):
    """EER from the enumerated DET points with linear interpolation at the
    miss/false-alarm crossing."""
    points = det_by_enumeration(records, key)
    prev_m, prev_f = points[0]
    for m, f in points:
        d = m - f
        if d >= 0.0:
            if d == 0.0:
                return m
            d_prev = prev_m - prev_f
            w = d_prev / (d_prev - d)
            return prev_m + w * (m - prev_m)
        prev_m, prev_f = m, f
    raise AssertionError("no crossing found")


# ---------------------------------------------------------------------------
# network oracles

def naive_forward(params, frames):
    """Straight-line re-implementation of the forward pass: per-time-step
    loops, no caching, no vectorized splicing."""
    x = np.asarray(frames, dtype=np.float64)
    for spec in params.frame_specs:
        lo, hi = min(spec.offsets), max(spec.offsets)
        t_out = x.shape[0] - (hi - lo)
        rows = []
        for t in range(t_out):
            spliced = np.concatenate([x[t - lo + off] for off in spec.offsets])
            rows.append(params.weights[spec.name] @ spliced + params.biases[spec.name])
        x = np.array(rows)
        if spec.has_nonlinearity:
            x = np.maximum(x, 0.0)
    mean, std = two_pass_pool(x)
    vec = np.concatenate([mean, std])
    for spec in params.dense_specs:
        pre = params.weights[spec.name] @ vec + params.biases[spec.name]
        vec = np.maximum(pre, 0.0) if spec.has_nonlinearity else pre
    shifted = np.exp(vec - vec.max())
    return shifted / shifted.sum()


def two_pass_pool(activations):
    """Mean and population std computed dimension by dimension, two passes."""
    h = np.asarray(activations, dtype=np.float64)
    t_len, dim = h.shape
    means = np.empty(dim)
    stds = np.empty(dim)
    for d in range(dim):
        mean = sum(h[:, d]) / t_len
        var = sum((value - mean) ** 2 for value in h[:, d]) / t_len
        means[d] = mean
        stds[d] = math.sqrt(var)
    return means, stds


def batch_loss(params, batch):
    """Mean cross-entropy via the forward pass only (for finite differences)."""
    from lidkit import net

    total = 0.0
    for features, label in batch:
        _, cache = net.forward(params, features)
        total -= cache.log_posteriors[int(label)]
    return total / len(batch)


def fd_weight_gradient(params, batch, layer_name, i, j, h=1e-4):
    """Central finite difference on one weight entry."""
    w = params.weights[layer_name]
    original = w[i, j]
    w[i, j] = original + h
    plus = batch_loss(params, batch)
    w[i, j] = original - h
    minus = batch_loss(params, batch)
    w[i, j] = original
    return (plus - minus) / (2.0 * h)


def fd_bias_gradient(params, batch, layer_name, j, h=1e-4):
    b = params.biases[layer_name]
    original = b[j]
    b[j] = original + h
    plus = batch_loss(params, batch)
    b[j] = original - h
    minus = batch_loss(params, batch)
    b[j] = original
    return (plus - minus) / (2.0 * h)


def relative_error(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a) + abs(b), 1e-8)


def min_kink_distance(params, batch) -> float:
    """Smallest |pre-activation| across the batch.

    Central differences are only a valid oracle when no rectifier input
    sits within the step size of its kink; callers redraw instances whose
    distance is too small.
    """
    from lidkit import net

    closest = np.inf
    for features, _ in batch:
        _, cache = net.forward(params, features)
        for pre in cache.frame_preacts + cache.dense_preacts[:-1]:
            closest = min(closest, float(np.min(np.abs(pre))))
    return closest

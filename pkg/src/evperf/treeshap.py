"""Exact additive Shapley attributions for boosted-tree ensembles.

Implements the polynomial-time path-dependent algorithm: node covers act as
the marginalization distribution, so each tree's attributions decompose its
own output exactly (local accuracy) without any background dataset. A direct
exponential-time evaluation of the Shapley definition is included as an
independent oracle, plus the derived analyses: global importance ranking,
dependence data, pairwise interaction values, and force-plot decompositions.

Attributions live in margin (pre-softmax) space, where additivity is exact;
downstream figure labels should say so.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .gbdt import Ensemble, TreeNode, predict_margin


@dataclass(frozen=True)
class Explanation:
    """Per-class additive decomposition of one prediction.

    For each class k, base_value[k] + sum_i phi[i, k] equals the predicted
    margin. ``x`` is the model-space input; ``x_raw`` carries the unscaled
    feature values when the model was trained on standardized data.
    """

    base_value: np.ndarray            # (num_class,)
    phi: np.ndarray                   # (n_features, num_class)
    x: np.ndarray
    feature_names: tuple[str, ...]
    x_raw: np.ndarray | None = None

    @property
    def raw_values(self) -> np.ndarray:
        return self.x if self.x_raw is None else self.x_raw

    def margins(self) -> np.ndarray:
        return self.base_value + self.phi.sum(axis=0)


@dataclass(frozen=True)
class InteractionExplanation:
    """Pairwise Shapley interaction tensor for one prediction.

    Symmetric in the first two axes; row sums recover the per-feature phi,
    so base_value plus the total sum equals the margin.
    """

    base_value: np.ndarray   # (num_class,)
    phi_ij: np.ndarray       # (n_features, n_features, num_class)
    feature_names: tuple[str, ...]


class _FlatTree:
    """Array view of a TreeNode tree for fast traversal.

    feature[i] < 0 marks a leaf; value then holds the leaf weight.
    """

    __slots__ = ("feature", "threshold", "left", "right", "value", "cover")

    def __init__(self, root: TreeNode):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self.cover: list[float] = []
        self._add(root)

    def _add(self, node: TreeNode) -> int:
        i = len(self.feature)
        self.feature.append(node.feature)
        self.threshold.append(node.threshold)
        self.value.append(node.weight)
        self.cover.append(node.cover)
        self.left.append(-1)
        self.right.append(-1)
        if not node.is_leaf:
            self.left[i] = self._add(node.left)
            self.right[i] = self._add(node.right)
        return i

    def expectation(self, node: int = 0) -> float:
        """Cover-weighted mean leaf value: the tree's output expectation."""
        if self.feature[node] < 0:
            return self.value[node]
        l, r = self.left[node], self.right[node]
        return (
            self.cover[l] * self.expectation(l) + self.cover[r] * self.expectation(r)
        ) / self.cover[node]


def _flatten_by_class(model: Ensemble) -> list[list[_FlatTree]]:
    by_class: list[list[_FlatTree]] = [[] for _ in range(model.num_class)]
    for ct in model.trees:
        by_class[ct.class_index].append(_FlatTree(ct.root))
    return by_class


# --- the path-dependent recursion -------------------------------------------
#
# The path is a list of [feature, zero_fraction, one_fraction, weight] entries
# tracking, for each unique feature split on so far, the proportion of cover
# that flows down when the feature is marginalized (zero) versus when it is
# known (one), together with the permutation weights of all subset sizes.
# Extending adds a feature to every tracked subset size; unwinding removes one
# feature, which is needed both when a feature reappears deeper in the tree
# and to read out each feature's contribution at a leaf.


def _extend(path: list[list[float]], pz: float, po: float, pf: int) -> None:
    l = len(path)
    path.append([pf, pz, po, 1.0 if l == 0 else 0.0])
    for i in range(l - 1, -1, -1):
        path[i + 1][3] += po * path[i][3] * (i + 1) / (l + 1)
        path[i][3] = pz * path[i][3] * (l - i) / (l + 1)


def _unwind(path: list[list[float]], k: int) -> list[list[float]]:
    depth = len(path) - 1
    zf, of = path[k][1], path[k][2]
    out = [entry[:] for entry in path[:depth]]
    n = path[depth][3]
    for i in range(depth - 1, -1, -1):
        if of != 0.0:
            tmp = out[i][3]
            out[i][3] = n * (depth + 1) / ((i + 1) * of)
            n = tmp - out[i][3] * zf * (depth - i) / (depth + 1)
        else:
            out[i][3] = out[i][3] * (depth + 1) / (zf * (depth - i))
    for i in range(k, depth):
        out[i][0], out[i][1], out[i][2] = path[i + 1][0], path[i + 1][1], path[i + 1][2]
    return out


def _unwound_sum(path: list[list[float]], k: int) -> float:
    depth = len(path) - 1
    zf, of = path[k][1], path[k][2]
    total = 0.0
    n = path[depth][3]
    if of != 0.0:
        for i in range(depth - 1, -1, -1):
            tmp = n / ((i + 1) * of)
            total += tmp
            n = path[i][3] - tmp * zf * (depth - i)
    else:
        for i in range(depth - 1, -1, -1):
            total += path[i][3] / (zf * (depth - i))
    return total * (depth + 1)


def _recurse(
    t: _FlatTree,
    node: int,
    path: list[list[float]],
    pz: float,
    po: float,
    pf: int,
    x: Sequence[float],
    phi: list[float],
    condition: int,
    condition_feature: int,
    condition_fraction: float,
) -> None:
    if condition_fraction == 0.0:
        return
    path = [entry[:] for entry in path]
    if condition == 0 or condition_feature != pf:
        _extend(path, pz, po, pf)
    f = t.feature[node]
    if f < 0:
        value = t.value[node]
        for i in range(1, len(path)):
            w = _unwound_sum(path, i)
            entry = path[i]
            phi[entry[0]] += w * (entry[2] - entry[1]) * value * condition_fraction
        return
    if x[f] < t.threshold[node]:
        hot, cold = t.left[node], t.right[node]
    else:
        hot, cold = t.right[node], t.left[node]
    w = t.cover[node]
    hot_zero = t.cover[hot] / w
    cold_zero = t.cover[cold] / w
    incoming_zero = 1.0
    incoming_one = 1.0
    for k in range(len(path)):
        if path[k][0] == f:
            incoming_zero, incoming_one = path[k][1], path[k][2]
            path = _unwind(path, k)
            break
    hot_fraction = cold_fraction = condition_fraction
    if condition > 0 and f == condition_feature:
        cold_fraction = 0.0
    elif condition < 0 and f == condition_feature:
        hot_fraction *= hot_zero
        cold_fraction *= cold_zero
    _recurse(t, hot, path, incoming_zero * hot_zero, incoming_one, f, x, phi,
             condition, condition_feature, hot_fraction)
    _recurse(t, cold, path, incoming_zero * cold_zero, 0.0, f, x, phi,
             condition, condition_feature, cold_fraction)


def _class_phi(
    flat_trees: list[_FlatTree],
    n_features: int,
    x: Sequence[float],
    scale: float,
    condition: int = 0,
    condition_feature: int = -1,
) -> list[float]:
    """Summed attributions over one class's trees, scaled by the learn rate.

    The scale rides along as the initial condition fraction, which every leaf
    contribution is multiplied by.
    """
    phi = [0.0] * n_features
    for t in flat_trees:
        _recurse(t, 0, [], 1.0, 1.0, -1, x, phi, condition, condition_feature, scale)
    return phi


def _base_values(model: Ensemble, by_class: list[list[_FlatTree]]) -> np.ndarray:
    eta = model.config.learning_rate
    base = model.base_score.astype(float).copy()
    for k, trees in enumerate(by_class):
        base[k] += eta * sum(t.expectation() for t in trees)
    return base


def _check_input(model: Ensemble, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (len(model.feature_names),):
        raise ValueError(
            f"input has shape {x.shape}, model expects ({len(model.feature_names)},)"
        )
    return x


def shap_values(model: Ensemble, x: np.ndarray, x_raw: np.ndarray | None = None) -> Explanation:
    """Exact per-feature, per-class attributions for one sample.

    Cost is O(trees * leaves * depth^2); the result satisfies
    base_value + phi.sum(axis=0) == predict_margin(model, x).
    """
    x = _check_input(model, x)
    by_class = _flatten_by_class(model)
    return _explain_prepared(model, by_class, _base_values(model, by_class), x, x_raw)


def _explain_prepared(model, by_class, base, x, x_raw=None) -> Explanation:
    d = len(model.feature_names)
    eta = model.config.learning_rate
    xs = x.tolist()
    phi = np.empty((d, model.num_class))
    for k in range(model.num_class):
        phi[:, k] = _class_phi(by_class[k], d, xs, eta)
    return Explanation(
        base_value=base.copy(),
        phi=phi,
        x=x,
        feature_names=model.feature_names,
        x_raw=None if x_raw is None else np.asarray(x_raw, dtype=float),
    )


def explain_matrix(
    model: Ensemble, features: np.ndarray, raw_features: np.ndarray | None = None
) -> list[Explanation]:
    """Explanations for every row of a feature matrix.

    Flattens the ensemble once; rows are independent, so this is the batch
    entry point worth parallelizing if it ever matters.
    """
    features = np.asarray(features, dtype=float)
    if features.ndim != 2 or features.shape[1] != len(model.feature_names):
        raise ValueError("feature matrix does not match model inputs")
    if raw_features is None and model.scaler is not None:
        raw_features = features * model.scaler.std + model.scaler.mean
    by_class = _flatten_by_class(model)
    base = _base_values(model, by_class)
    return [
        _explain_prepared(
            model, by_class, base, features[i],
            None if raw_features is None else raw_features[i],
        )
        for i in range(features.shape[0])
    ]


def _coalition_expectation(t: _FlatTree, x: Sequence[float], in_coalition: Sequence[bool]) -> float:
    """Tree expectation with coalition features fixed to x, rest marginalized."""

    def walk(node: int) -> float:
        f = t.feature[node]
        if f < 0:
            return t.value[node]
        if in_coalition[f]:
            child = t.left[node] if x[f] < t.threshold[node] else t.right[node]
            return walk(child)
        l, r = t.left[node], t.right[node]
        w = t.cover[node]
        return (t.cover[l] * walk(l) + t.cover[r] * walk(r)) / w

    return walk(0)


MAX_BRUTE_FORCE_FEATURES = 12


def brute_force_shapley(model: Ensemble, x: np.ndarray) -> np.ndarray:
    """Shapley values straight from the definition; exponential, test-only.

    Enumerates every coalition, evaluates the cover-weighted conditional
    expectation, and combines marginal contributions with the factorial
    permutation weights. Shape (n_features, num_class).
    """
    x = _check_input(model, x)
    d = len(model.feature_names)
    if d > MAX_BRUTE_FORCE_FEATURES:
        raise ValueError(f"brute force is limited to {MAX_BRUTE_FORCE_FEATURES} features, got {d}")
    by_class = _flatten_by_class(model)
    eta = model.config.learning_rate
    xs = x.tolist()

    n_masks = 1 << d
    v = np.zeros((n_masks, model.num_class))
    for mask in range(n_masks):
        members = [bool(mask >> j & 1) for j in range(d)]
        for k in range(model.num_class):
            v[mask, k] = eta * sum(_coalition_expectation(t, xs, members) for t in by_class[k])

    fact = [math.factorial(i) for i in range(d + 1)]
    phi = np.zeros((d, model.num_class))
    for i in range(d):
        bit = 1 << i
        for mask in range(n_masks):
            if mask & bit:
                continue
            size = bin(mask).count("1")
            weight = fact[size] * fact[d - size - 1] / fact[d]
            phi[i] += weight * (v[mask | bit] - v[mask])
    return phi


def interaction_values(model: Ensemble, x: np.ndarray) -> InteractionExplanation:
    """Pairwise Shapley interaction values for one sample.

    Off-diagonal entries contrast attributions with a partner feature forced
    present versus forced absent; values from conditioning on either partner
    are averaged so the tensor is exactly symmetric. Diagonals absorb the
    remainder, making every row sum equal the plain attribution. Costs
    2 * n_features + 1 full attribution passes.
    """
    x = _check_input(model, x)
    d = len(model.feature_names)
    by_class = _flatten_by_class(model)
    eta = model.config.learning_rate
    xs = x.tolist()

    def all_class_phi(condition: int, condition_feature: int) -> np.ndarray:
        out = np.empty((d, model.num_class))
        for k in range(model.num_class):
            out[:, k] = _class_phi(by_class[k], d, xs, eta, condition, condition_feature)
        return out

    phi = all_class_phi(0, -1)
    deltas = np.zeros((d, d, model.num_class))
    for j in range(d):
        present = all_class_phi(1, j)
        absent = all_class_phi(-1, j)
        deltas[:, j, :] = 0.5 * (present - absent)

    phi_ij = np.zeros((d, d, model.num_class))
    for i in range(d):
        for j in range(i + 1, d):
            pair = 0.5 * (deltas[i, j] + deltas[j, i])
            phi_ij[i, j] = pair
            phi_ij[j, i] = pair
    for i in range(d):
        phi_ij[i, i] = phi[i] - phi_ij[i].sum(axis=0)
    return InteractionExplanation(
        base_value=_base_values(model, by_class),
        phi_ij=phi_ij,
        feature_names=model.feature_names,
    )


@dataclass(frozen=True)
class FeatureImportance:
    index: int
    name: str
    overall: float
    per_class: np.ndarray


def global_importance(explanations: list[Explanation]) -> list[FeatureImportance]:
    """Features ranked by mean absolute attribution.

    The overall score averages |phi| over samples and classes; ties keep
    feature-index order.
    """
    if not explanations:
        raise ValueError("global_importance needs at least one explanation")
    names = explanations[0].feature_names
    stacked = np.stack([e.phi for e in explanations])  # (n, d, K)
    if any(e.phi.shape != stacked.shape[1:] for e in explanations):
        raise ValueError("explanations have inconsistent shapes")
    per_class = np.abs(stacked).mean(axis=0)            # (d, K)
    overall = per_class.mean(axis=1)                    # (d,)
    order = sorted(range(len(names)), key=lambda i: (-overall[i], i))
    return [
        FeatureImportance(index=i, name=names[i], overall=float(overall[i]), per_class=per_class[i])
        for i in order
    ]


def dependence_data(
    explanations: list[Explanation], feature_index: int, class_index: int
) -> list[tuple[float, float]]:
    """(raw feature value, attribution) pairs, one per explained sample."""
    if not explanations:
        raise ValueError("dependence_data needs at least one explanation")
    d, k = explanations[0].phi.shape
    if not 0 <= feature_index < d:
        raise IndexError(f"feature index {feature_index} out of range for {d} features")
    if not 0 <= class_index < k:
        raise IndexError(f"class index {class_index} out of range for {k} classes")
    return [
        (float(e.raw_values[feature_index]), float(e.phi[feature_index, class_index]))
        for e in explanations
    ]


@dataclass(frozen=True)
class ForceEntry:
    name: str
    value: float
    phi: float
    sign: int


@dataclass(frozen=True)
class ForcePlot:
    base_value: float
    margin: float
    entries: tuple[ForceEntry, ...]


def force_plot_data(explanation: Explanation, class_index: int) -> ForcePlot:
    """Ordered push/pull decomposition of one prediction for one class.

    Features with exactly zero attribution are omitted; the rest are sorted
    by |phi| descending. base_value plus the entry sum reproduces the margin.
    """
    k = explanation.phi.shape[1]
    if not 0 <= class_index < k:
        raise IndexError(f"class index {class_index} out of range for {k} classes")
    phi = explanation.phi[:, class_index]
    order = sorted(
        (i for i in range(len(phi)) if phi[i] != 0.0),
        key=lambda i: (-abs(phi[i]), i),
    )
    entries = tuple(
        ForceEntry(
            name=explanation.feature_names[i],
            value=float(explanation.raw_values[i]),
            phi=float(phi[i]),
            sign=1 if phi[i] > 0 else -1,
        )
        for i in order
    )
    base = float(explanation.base_value[class_index])
    return ForcePlot(base_value=base, margin=base + float(phi.sum()), entries=entries)


def explanations_to_csv(
    explanations: list[Explanation],
    out: IO[str],
    sample_ids: Sequence[int] | None = None,
    class_names: Sequence[str] | None = None,
) -> None:
    """Write one row per sample x feature x class: id, feature, class, raw value, phi."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["sample_id", "feature", "class", "value", "phi"])
    for s, e in enumerate(explanations):
        sid = sample_ids[s] if sample_ids is not None else s
        for i, name in enumerate(e.feature_names):
            for k in range(e.phi.shape[1]):
                label = class_names[k] if class_names is not None else k
                writer.writerow([sid, name, label, repr(float(e.raw_values[i])), repr(float(e.phi[i, k]))])

"""Federated delta aggregation with a validation regression guard.

The desk-scale model is a linear softmax classifier over indicator features,
layered as ``weights`` and ``bias``. Aggregation forms the weighted average
of edge deltas, applies it with learning factor eta, and accepts the
candidate only if validation accuracy does not regress more than
``eps_safety``; otherwise each layer is adopted individually only when the
single-layer substitution stays within ``eps_layer`` of baseline, and the
recombined model must still hold the ``eps_safety`` line or the incumbent
is kept unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_EPS_SAFETY = 0.005
DEFAULT_EPS_LAYER = 0.01


class ShapeMismatch(Exception):
    pass


@dataclass
class LinearModel:
    """Softmax classifier: scores = X @ weights.T + bias."""

    weights: np.ndarray  # (n_classes, n_features)
    bias: np.ndarray  # (n_classes,)

    def layers(self) -> dict[str, np.ndarray]:
        return {"weights": self.weights, "bias": self.bias}

    def with_layers(self, layers: dict[str, np.ndarray]) -> "LinearModel":
        return LinearModel(weights=layers["weights"].copy(), bias=layers["bias"].copy())

    def copy(self) -> "LinearModel":
        return LinearModel(self.weights.copy(), self.bias.copy())

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(X @ self.weights.T + self.bias, axis=1)

    def accuracy(self, X: np.ndarray, y: np.ndarray) -> float:
        return float(np.mean(self.predict(X) == y))


def _check_delta(model: LinearModel, delta: dict[str, np.ndarray]) -> None:
    layers = model.layers()
    if set(delta) != set(layers):
        raise ShapeMismatch(f"layer keys {sorted(delta)} != {sorted(layers)}")
    for name, arr in delta.items():
        if arr.shape != layers[name].shape:
            raise ShapeMismatch(f"layer {name}: {arr.shape} != {layers[name].shape}")


def federated_aggregate(
    current: LinearModel,
    deltas: list[dict[str, np.ndarray]],
    weights: list[float],
    validation: tuple[np.ndarray, np.ndarray],
    eta: float = 1.0,
    eps_safety: float = DEFAULT_EPS_SAFETY,
    eps_layer: float = DEFAULT_EPS_LAYER,
) -> LinearModel:
    """Weighted FedAvg with whole-model acceptance or per-layer fallback."""
    X, y = validation
    if not deltas or eta == 0.0:
        return current.copy()
    for d in deltas:
        _check_delta(current, d)
    total = sum(weights)
    norm = [w / total for w in weights] if total > 0 else [1.0 / len(weights)] * len(weights)
    agg = {
        name: sum(w * d[name] for w, d in zip(norm, deltas))
        for name in current.layers()
    }
    baseline = current.accuracy(X, y)
    candidate = LinearModel(
        weights=current.weights + eta * agg["weights"],
        bias=current.bias + eta * agg["bias"],
    )
    cand_perf = candidate.accuracy(X, y)
    if cand_perf < baseline - eps_safety:
        # regression: adopt only layers that individually hold the line
        cand_layers = candidate.layers()
        keep = []
        for name in current.layers():
            trial_layers = current.copy().layers()
            trial_layers[name] = cand_layers[name]
            if current.with_layers(trial_layers).accuracy(X, y) >= baseline - eps_layer:
                keep.append(name)
        result_layers = current.copy().layers()
        for name in keep:
            result_layers[name] = cand_layers[name]
        result = current.with_layers(result_layers)
        # the recombined model must itself hold the overall safety line
        if result.accuracy(X, y) < baseline - eps_safety:
            return current.copy()
        return result
    return candidate


def model_delta(new: LinearModel, old: LinearModel) -> dict[str, np.ndarray]:
    """Delta form used to distribute the aggregated model back to the edge."""
    return {"weights": new.weights - old.weights, "bias": new.bias - old.bias}

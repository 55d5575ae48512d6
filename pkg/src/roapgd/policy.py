"""Feedforward network policies: evaluation, reverse-mode pass, file format.

Policies are plain weight containers evaluated with numpy; there is no
training here.  The on-disk format is JSON::

    {"input_dim": int,
     "layers": [{"weights": [[...]], "bias": [...], "activation": "relu"}],
     "saturation": float | null}

with weight rows indexing output neurons.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

ACTIVATIONS = ("relu", "tanh", "linear")


def _activate(z, kind):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _activate_derivative(z, kind):
    # relu's subgradient at the kink is pinned to 0 for determinism.
    if kind == "relu":
        return (z > 0.0).astype(float)
    if kind == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    return np.ones_like(z)


@dataclass(frozen=True, eq=False)
class Layer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        b = np.asarray(self.bias, dtype=float)
        if w.ndim != 2:
            raise ValueError(f"layer weights must be 2-D, got shape {w.shape}")
        if b.shape != (w.shape[0],):
            raise ValueError(f"bias shape {b.shape} does not match {w.shape[0]} outputs")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("layer parameters contain non-finite values")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)


@dataclass(frozen=True, eq=False)
class MlpPolicy:
    layers: tuple
    saturation: float | None = None

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("policy needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if nxt.weights.shape[1] != prev.weights.shape[0]:
                raise ValueError(
                    f"layer dimensions do not chain: {prev.weights.shape} -> {nxt.weights.shape}"
                )
        if self.saturation is not None and not self.saturation > 0:
            raise ValueError(f"saturation limit must be positive, got {self.saturation}")
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self):
        return self.layers[0].weights.shape[1]

    @property
    def output_dim(self):
        return self.layers[-1].weights.shape[0]


def mlp_forward(policy, x):
    """Network output for one input vector, saturation applied last."""
    u, _ = mlp_forward_cached(policy, x)
    return u


def mlp_forward_cached(policy, x):
    """Forward pass that also returns the cache needed by :func:`mlp_vjp`."""
    a = np.asarray(x, dtype=float)
    if a.shape != (policy.input_dim,):
        raise ValueError(f"input shape {a.shape} does not match policy input {policy.input_dim}")
    pre_activations = []
    for layer in policy.layers:
        z = layer.weights @ a + layer.bias
        pre_activations.append(z)
        a = _activate(z, layer.activation)
    pre_saturation = a
    if policy.saturation is not None:
        a = np.clip(a, -policy.saturation, policy.saturation)
    return a, (pre_activations, pre_saturation)


def mlp_forward_batch(policy, xs):
    a = np.asarray(xs, dtype=float)
    for layer in policy.layers:
        a = _activate(a @ layer.weights.T + layer.bias, layer.activation)
    if policy.saturation is not None:
        a = np.clip(a, -policy.saturation, policy.saturation)
    return a


def mlp_vjp(policy, cache, ubar):
    """``J(x)^T ubar`` for the cached forward pass at ``x``."""
    pre_activations, pre_saturation = cache
    g = np.asarray(ubar, dtype=float)
    if policy.saturation is not None:
        g = g * (np.abs(pre_saturation) < policy.saturation)
    for layer, z in zip(reversed(policy.layers), reversed(pre_activations)):
        g = layer.weights.T @ (g * _activate_derivative(z, layer.activation))
    return g


def policy_to_dict(policy):
    return {
        "input_dim": policy.input_dim,
        "layers": [
            {
                "weights": layer.weights.tolist(),
                "bias": layer.bias.tolist(),
                "activation": layer.activation,
            }
            for layer in policy.layers
        ],
        "saturation": policy.saturation,
    }


def policy_from_dict(doc):
    try:
        layers = tuple(
            Layer(entry["weights"], entry["bias"], entry["activation"])
            for entry in doc["layers"]
        )
        policy = MlpPolicy(layers, doc.get("saturation"))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed policy document: {exc}") from exc
    declared = doc.get("input_dim")
    if declared is not None and declared != policy.input_dim:
        raise ValueError(
            f"declared input_dim {declared} does not match first layer ({policy.input_dim})"
        )
    return policy


def load_policy(path):
    with open(path, encoding="utf-8") as fh:
        return policy_from_dict(json.load(fh))


def save_policy(policy, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(policy_to_dict(policy), fh)
        fh.write("\n")

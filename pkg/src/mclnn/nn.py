"""Minimal MLP with squareplus hidden activations, plus the Adam optimizer.

The same network class serves the pairwise-potential model (input = one
interparticle distance) and the baseline potential network (input = all
flattened positions). The output layer is linear so learned potentials can
go negative; the output is always a single scalar.

Parameters are immutable pytrees of float64 arrays; updates build new
values. Checkpoints round-trip through JSON exactly at 64-bit precision.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Sequence

import jax
import jax.numpy as jnp
import numpy as np

from .errors import ContractViolationError, NumericalFailureError


def squareplus(x):
    """Smooth positive activation (x + sqrt(x^2 + 4)) / 2."""
    return 0.5 * (x + jnp.sqrt(x * x + 4.0))


@jax.tree_util.register_pytree_node_class
@dataclass(frozen=True)
class MlpParams:
    """Weights/biases of a scalar-output MLP.

    ``layer_sizes`` runs input -> hidden... -> output; the output size must
    be 1. ``weights[l]`` has shape (layer_sizes[l], layer_sizes[l+1]).
    """

    layer_sizes: tuple
    weights: tuple
    biases: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ContractViolationError("need at least input and output layer sizes")
        if any(s < 1 for s in sizes):
            raise ContractViolationError(f"layer sizes must be >= 1, got {sizes}")
        if sizes[-1] != 1:
            raise ContractViolationError(f"output dimension must be 1, got {sizes[-1]}")
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ContractViolationError("one weight matrix and bias vector per layer")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if jax.core.is_concrete(w) and np.shape(w) != (sizes[l], sizes[l + 1]):
                raise ContractViolationError(
                    f"layer {l} weights have shape {np.shape(w)}, "
                    f"expected {(sizes[l], sizes[l + 1])}"
                )
            if jax.core.is_concrete(b) and np.shape(b) != (sizes[l + 1],):
                raise ContractViolationError(
                    f"layer {l} bias has shape {np.shape(b)}, expected ({sizes[l + 1]},)"
                )

    def tree_flatten(self):
        return (self.weights, self.biases), self.layer_sizes

    @classmethod
    def tree_unflatten(cls, aux, children):
        obj = object.__new__(cls)
        object.__setattr__(obj, "layer_sizes", aux)
        object.__setattr__(obj, "weights", children[0])
        object.__setattr__(obj, "biases", children[1])
        return obj

    @property
    def n_parameters(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)


def init_params(layer_sizes: Sequence[int], seed: int) -> MlpParams:
    """Seeded initialization: hidden weights ~ N(0, 1/fan_in), biases zero.

    The output layer starts at exactly zero. Forces are derivatives of the
    network, so training never constrains the potential's additive constant;
    starting the output at zero pins that gauge near zero instead of at a
    random O(1) offset, and keeps early rollouts from diverging.
    """
    rng = np.random.default_rng(seed)
    sizes = tuple(int(s) for s in layer_sizes)
    weights, biases = [], []
    for l, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        if l == len(sizes) - 2:
            w = np.zeros((fan_in, fan_out))
        else:
            w = rng.normal(size=(fan_in, fan_out)) / np.sqrt(fan_in)
        weights.append(jnp.asarray(w, dtype=jnp.float64))
        biases.append(jnp.zeros(fan_out, dtype=jnp.float64))
    return MlpParams(sizes, tuple(weights), tuple(biases))


def mlp_forward(params: MlpParams, x):
    """Scalar network output for input vector ``x`` (length layer_sizes[0]).

    Squareplus on hidden layers, identity on the output layer. Accepts a
    leading batch dimension, in which case a vector is returned.
    """
    x = jnp.asarray(x, dtype=jnp.float64)
    if x.shape[-1] != params.layer_sizes[0]:
        raise ContractViolationError(
            f"input has {x.shape[-1]} features, network expects {params.layer_sizes[0]}"
        )
    h = x
    last = len(params.weights) - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if l != last:
            h = squareplus(h)
    return h[..., 0]


@jax.tree_util.register_pytree_node_class
@dataclass(frozen=True)
class AdamState:
    """First/second moment estimates over the flattened parameter vector."""

    m: jnp.ndarray
    v: jnp.ndarray
    step: jnp.ndarray
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def tree_flatten(self):
        return (self.m, self.v, self.step), (
            self.learning_rate,
            self.beta1,
            self.beta2,
            self.eps,
        )

    @classmethod
    def tree_unflatten(cls, aux, children):
        m, v, step = children
        lr, b1, b2, eps = aux
        obj = object.__new__(cls)
        for name, val in (
            ("m", m), ("v", v), ("step", step),
            ("learning_rate", lr), ("beta1", b1), ("beta2", b2), ("eps", eps),
        ):
            object.__setattr__(obj, name, val)
        return obj


def adam_init(n_parameters: int, learning_rate: float = 1e-3,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(
        m=jnp.zeros(n_parameters, dtype=jnp.float64),
        v=jnp.zeros(n_parameters, dtype=jnp.float64),
        step=jnp.zeros((), dtype=jnp.int64),
        learning_rate=learning_rate,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
    )


def params_to_vector(params: MlpParams) -> jnp.ndarray:
    parts = [jnp.ravel(w) for w in params.weights] + [jnp.ravel(b) for b in params.biases]
    return jnp.concatenate(parts)


def vector_to_params(vec, layer_sizes: Sequence[int]) -> MlpParams:
    sizes = tuple(int(s) for s in layer_sizes)
    weights, biases = [], []
    off = 0
    for a, b in zip(sizes[:-1], sizes[1:]):
        weights.append(jnp.reshape(vec[off : off + a * b], (a, b)))
        off += a * b
    for b in sizes[1:]:
        biases.append(vec[off : off + b])
        off += b
    return MlpParams(sizes, tuple(weights), tuple(biases))


def adam_step(params: MlpParams, grads, state: AdamState):
    """One bias-corrected Adam update; returns (new params, new state).

    ``grads`` may be an MlpParams-shaped pytree or an already-flat vector.
    Works both eagerly and under jit; the eager path rejects non-finite
    gradients.
    """
    g = grads if not isinstance(grads, MlpParams) else params_to_vector(grads)
    g = jnp.asarray(g, dtype=jnp.float64)
    if jax.core.is_concrete(g) and not bool(jnp.all(jnp.isfinite(g))):
        raise NumericalFailureError("non-finite gradient in adam_step", context="adam_step")
    theta = params_to_vector(params)
    t = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    theta = theta - state.learning_rate * m_hat / (jnp.sqrt(v_hat) + state.eps)
    new_state = AdamState(m, v, t, state.learning_rate, state.beta1, state.beta2, state.eps)
    return vector_to_params(theta, params.layer_sizes), new_state


# --- checkpoint persistence -------------------------------------------------

CHECKPOINT_FORMAT = "mclnn-checkpoint-v1"


def save_checkpoint(path, params: MlpParams, optimizer: AdamState | None = None,
                    metadata: dict | None = None) -> None:
    """Write params (+ optimizer state, + training metadata) as JSON.

    Floats are serialized with shortest round-trip decimals (<= 17
    significant digits), so loading restores bit-identical values.
    """
    doc = {
        "format": CHECKPOINT_FORMAT,
        "layer_sizes": list(params.layer_sizes),
        "weights": [np.asarray(w).tolist() for w in params.weights],
        "biases": [np.asarray(b).tolist() for b in params.biases],
        "metadata": metadata or {},
    }
    if optimizer is not None:
        doc["optimizer"] = {
            "m": np.asarray(optimizer.m).tolist(),
            "v": np.asarray(optimizer.v).tolist(),
            "step": int(optimizer.step),
            "learning_rate": optimizer.learning_rate,
            "beta1": optimizer.beta1,
            "beta2": optimizer.beta2,
            "eps": optimizer.eps,
        }
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh)
    os.replace(tmp, path)


def load_checkpoint(path):
    """Read a checkpoint; returns (params, optimizer-or-None, metadata)."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ContractViolationError(
            f"{path}: unrecognized checkpoint format {doc.get('format')!r}"
        )
    params = MlpParams(
        tuple(doc["layer_sizes"]),
        tuple(jnp.asarray(np.array(w, dtype=np.float64)) for w in doc["weights"]),
        tuple(jnp.asarray(np.array(b, dtype=np.float64)) for b in doc["biases"]),
    )
    optimizer = None
    if "optimizer" in doc:
        o = doc["optimizer"]
        optimizer = AdamState(
            m=jnp.asarray(np.array(o["m"], dtype=np.float64)),
            v=jnp.asarray(np.array(o["v"], dtype=np.float64)),
            step=jnp.asarray(o["step"], dtype=jnp.int64),
            learning_rate=o["learning_rate"],
            beta1=o["beta1"],
            beta2=o["beta2"],
            eps=o["eps"],
        )
    return params, optimizer, doc.get("metadata", {})

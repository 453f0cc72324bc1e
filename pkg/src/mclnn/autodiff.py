"""Differentiation engine for scalar functions of many real inputs.

Thin, checked layer over JAX reverse-mode transforms. Everything runs in
64-bit floats; second-order capability (gradients of expressions that
internally contain gradients, e.g. forces inside a trajectory loss) comes
from composing two differentiation passes. Functions handed to this module
must be built from ``jax.numpy`` / plain arithmetic ops so they are
traceable.

``finite_difference_gradient`` is the independent test oracle and is kept
deliberately free of any autodiff machinery.
"""

from __future__ import annotations

from typing import Callable

import jax
import numpy as np

jax.config.update("jax_enable_x64", True)

from .errors import NumericalFailureError

Array = np.ndarray
ScalarFn = Callable[..., float]


def _check_finite(arr, context: str) -> Array:
    out = np.asarray(arr, dtype=np.float64)
    if not np.all(np.isfinite(out)):
        bad = np.argwhere(~np.isfinite(out.reshape(-1)))[:, 0].tolist()
        raise NumericalFailureError(
            f"non-finite result in {context} (flat indices {bad[:8]})",
            context=context,
        )
    return out


def grad(f: ScalarFn, x) -> Array:
    """Gradient of scalar ``f`` at ``x``, same shape as ``x``.

    Deterministic, does not mutate ``x``. Raises NumericalFailureError if
    the value or any gradient entry is non-finite.
    """
    x = np.asarray(x, dtype=np.float64)
    value, g = jax.value_and_grad(f)(x)
    _check_finite(value, f"value of {getattr(f, '__name__', 'f')}")
    return _check_finite(g, f"gradient of {getattr(f, '__name__', 'f')}")


def nested_grad(g: ScalarFn, params) -> Array:
    """Gradient of ``g(params)`` where ``g`` may itself call :func:`grad`-like
    inner differentiation (via ``jax.grad``) on other variables.

    Paths through inner input-gradients are included, so a loss containing
    forces -dV/dq can be minimized over network parameters.
    """
    return grad(g, params)


def finite_difference_gradient(f: ScalarFn, x, h: float = 1e-5) -> Array:
    """Central-difference approximation of the gradient; test oracle only."""
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")
    x = np.asarray(x, dtype=np.float64)
    flat = x.reshape(-1).copy()
    out = np.empty_like(flat)
    for i in range(flat.size):
        xp = flat.copy()
        xm = flat.copy()
        xp[i] += h
        xm[i] -= h
        out[i] = (float(f(xp.reshape(x.shape))) - float(f(xm.reshape(x.shape)))) / (2 * h)
    return out.reshape(x.shape)

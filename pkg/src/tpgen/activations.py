"""Elementwise activations with closed-form derivatives.

Only one-layer-local derivatives of squared errors are ever needed, so
each activation carries its analytic derivative with respect to the
preactivation. There is no autodiff anywhere in this package.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit


def sigmoid(v) -> np.ndarray:
    """Logistic function, stable on both tails; output in (0, 1)."""
    return expit(np.asarray(v, dtype=np.float64))


def softplus(v) -> np.ndarray:
    """ln(1 + exp(v)) without overflow for large |v|; output strictly positive."""
    return np.logaddexp(0.0, np.asarray(v, dtype=np.float64))


def _sigmoid_deriv(v):
    s = sigmoid(v)
    return s * (1.0 - s)


def _softplus_deriv(v):
    return sigmoid(v)


def _linear(v):
    return np.asarray(v, dtype=np.float64)


def _linear_deriv(v):
    return np.ones_like(np.asarray(v, dtype=np.float64))


# name -> (function, derivative w.r.t. preactivation)
ACTIVATIONS = {
    "softplus": (softplus, _softplus_deriv),
    "sigmoid": (sigmoid, _sigmoid_deriv),
    "linear": (_linear, _linear_deriv),
}


def activation_pair(name: str):
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(
            f"unknown activation {name!r}; expected one of {sorted(ACTIVATIONS)}"
        ) from None

"""Dense tanh networks with hand-written reverse mode.

Shared by the fixed feature extractors and the trainable generators.  Layer
``j`` computes ``h_j = act_j(h_{j-1} @ W_j.T + b_j)`` on row-major batches.
"""

from __future__ import annotations

import numpy as np

_ACTIVATIONS = ("tanh", "identity")


def check_activation(name):
    if name not in _ACTIVATIONS:
        raise ValueError(f"unknown activation {name!r}; expected one of {_ACTIVATIONS}")
    return name


def forward(X, weights, biases, activations):
    """Run the network, returning the list of per-layer outputs and pre-activations."""
    outputs, pre = [], []
    h = X
    for W, b, act in zip(weights, biases, activations):
        z = h @ W.T + b
        h = np.tanh(z) if act == "tanh" else z
        pre.append(z)
        outputs.append(h)
    return outputs, pre


def backward(X, weights, activations, outputs, layer_grads, need_params=False):
    """Pull cotangents on layer outputs back to the input (and parameters).

    ``layer_grads[j]`` is the cotangent on ``outputs[j]`` or ``None``.
    Returns ``(grad_X, grad_weights, grad_biases)``; the parameter lists are
    ``None`` unless ``need_params``.
    """
    n_layers = len(weights)
    gW = [None] * n_layers if need_params else None
    gb = [None] * n_layers if need_params else None
    g = None
    for j in range(n_layers - 1, -1, -1):
        if layer_grads[j] is not None:
            g = layer_grads[j] if g is None else g + layer_grads[j]
        if g is None:
            continue
        if activations[j] == "tanh":
            g = g * (1.0 - outputs[j] ** 2)
        h_prev = X if j == 0 else outputs[j - 1]
        if need_params:
            gW[j] = g.T @ h_prev
            gb[j] = g.sum(axis=0)
        g = g @ weights[j]
    if g is None:
        g = np.zeros_like(X)
    if need_params:
        for j in range(n_layers):
            if gW[j] is None:
                gW[j] = np.zeros_like(weights[j])
                gb[j] = np.zeros(weights[j].shape[0])
    return g, gW, gb

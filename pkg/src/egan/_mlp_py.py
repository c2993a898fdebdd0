"""Numpy implementation of the MLP kernels (fallback for ``egan._mlp``)."""
import numpy as np


def _check_act(act):
    if act not in ("leaky", "tanh"):
        raise ValueError(f"unknown activation {act!r}")


# Overflow surfaces as inf/nan in the result, which callers check; the
# compiled kernels are silent about it too.
@np.errstate(over="ignore", invalid="ignore")
def mlp_forward(x, weights, biases, act, slope):
    _check_act(act)
    h = np.ascontiguousarray(x, dtype=np.float64)
    inputs = []
    last = len(weights) - 1
    for li, (W, b) in enumerate(zip(weights, biases)):
        if h.ndim != 2 or W.ndim != 2 or h.shape[1] != W.shape[0]:
            raise ValueError(f"layer {li}: input {h.shape} vs weight {W.shape}")
        if b.ndim != 1 or b.shape[0] != W.shape[1]:
            raise ValueError(f"layer {li}: bias shape mismatch")
        inputs.append(h)
        a = h @ W + b
        if li < last:
            a = np.where(a > 0.0, a, slope * a) if act == "leaky" else np.tanh(a)
        h = a
    return h, inputs


@np.errstate(over="ignore", invalid="ignore")
def mlp_backward(inputs, weights, gout, act, slope, need_input=True, need_params=True):
    _check_act(act)
    g = np.asarray(gout, dtype=np.float64)
    n = len(weights)
    gws = [None] * n
    gbs = [None] * n
    for li in range(n - 1, -1, -1):
        h = inputs[li]
        if need_params:
            gws[li] = h.T @ g
            gbs[li] = g.sum(axis=0)
        if li == 0 and not need_input:
            break
        gx = g @ weights[li].T
        if li > 0:
            if act == "leaky":
                gx = np.where(h > 0.0, gx, slope * gx)
            else:
                gx = gx * (1.0 - h * h)
        g = gx
    if not need_params:
        gws = gbs = None
    return (g if need_input else None), gws, gbs


def adam_update(param, grad, m, v, lr, beta1, beta2, eps, t):
    step = lr / (1.0 - beta1**t)
    rbc2 = 1.0 / np.sqrt(1.0 - beta2**t)
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    param -= step * m / (np.sqrt(v) * rbc2 + eps)

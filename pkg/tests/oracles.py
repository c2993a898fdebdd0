"""Independent reference computations used by the tests.

Nothing here touches the autodiff engine or the compiled kernels: forward
passes are plain numpy, gradients are central finite differences.
"""
import numpy as np

P_MIN, P_MAX = 1e-7, 1.0 - 1e-7


def np_mlp(x, layers, act="leaky", slope=0.2):
    h = np.asarray(x, dtype=np.float64)
    for i, (W, b) in enumerate(layers):
        h = h @ W + b
        if i < len(layers) - 1:
            h = np.where(h > 0, h, slope * h) if act == "leaky" else np.tanh(h)
    return h


def preactivations(x, layers, act="leaky", slope=0.2):
    out, h = [], np.asarray(x, dtype=np.float64)
    for i, (W, b) in enumerate(layers):
        a = h @ W + b
        out.append(a)
        h = np.where(a > 0, a, slope * a) if act == "leaky" else np.tanh(a)
    return out


def np_prob(logits):
    return np.clip(1.0 / (1.0 + np.exp(-logits)), P_MIN, P_MAX)


def np_mutation_loss(tag, p):
    if tag == "minimax":
        return 0.5 * np.mean(np.log(1.0 - p))
    if tag == "heuristic":
        return -0.5 * np.mean(np.log(p))
    return np.mean((p - 1.0) ** 2)


def np_disc_objective(d_layers, real, fake, act="leaky"):
    return (np.mean(np.log(np_prob(np_mlp(real, d_layers, act))))
            + np.mean(np.log(1.0 - np_prob(np_mlp(fake, d_layers, act)))))


def central_diff(f, arrays, h=1e-5):
    """Finite-difference gradient of ``f()`` w.r.t. each array (perturbed in place)."""
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        flat, gflat = a.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            fp = f()
            flat[i] = old - h
            fm = f()
            flat[i] = old
            gflat[i] = (fp - fm) / (2 * h)
        grads.append(g)
    return grads


def grad_mismatch(analytic, numeric, rel=1e-4, abs_floor=1e-8, small=1e-6):
    """Coordinates failing the rel-error test (abs test below ``small``); empty if all pass."""
    bad = []
    for k, (a, n) in enumerate(zip(analytic, numeric)):
        a, n = np.ravel(a), np.ravel(n)
        for i in range(a.size):
            if abs(a[i]) < small:
                ok = abs(a[i] - n[i]) < abs_floor
            else:
                ok = abs(a[i] - n[i]) / max(abs(a[i]), abs(n[i])) < rel
            if not ok:
                bad.append((k, i, a[i], n[i]))
    return bad


def adam_trace(theta, grads, lr, beta1, beta2, eps):
    """Textbook scalar Adam, step by step."""
    m = v = 0.0
    for t, g in enumerate(grads, 1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        mhat = m / (1 - beta1**t)
        vhat = v / (1 - beta2**t)
        theta = theta - lr * mhat / (vhat**0.5 + eps)
    return theta

"""Define-by-run reverse-mode automatic differentiation over float64 arrays.

A :class:`Graph` records primitive operations in construction order, which is
always a valid topological order. Leaves are either *parameters* (things you
may differentiate with respect to) or *constants*. Values are supplied either
when the leaf is declared or through ``bindings`` at :meth:`Graph.forward`.

    g = Graph()
    x = g.const("x", np.array([[1.0, 2.0]]))
    w = g.param("w")
    b = g.param("b")
    loss = g.mean(g.square(g.affine(x, w, b)))
    g.forward({"w": W, "b": B})
    grads = g.backward()          # {"w": dL/dW, "b": dL/dB}

The ``mlp`` primitive is a fused stack of affine layers with a hidden
activation; its kernels come from :mod:`egan.kernels` (compiled when
available).
"""
import math
from dataclasses import dataclass

import numpy as np

from egan import kernels

LEAKY_SLOPE = 0.2


class StructuralError(ValueError):
    """Shapes or graph structure do not fit an operation."""


class NumericError(ArithmeticError):
    """A non-finite value appeared during evaluation."""


class UsageError(RuntimeError):
    """An engine method was called out of order or with unusable arguments."""


class Node:
    __slots__ = ("index", "op", "inputs", "attrs", "name")

    def __init__(self, index, op, inputs=(), attrs=None, name=None):
        self.index = index
        self.op = op
        self.inputs = tuple(inputs)
        self.attrs = attrs
        self.name = name

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"<Node {self.index} {self.op}{label}>"


def sigmoid(x):
    """Logistic sigmoid, evaluated without overflow for large ``|x|``."""
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))


def _all_finite(a):
    # A finite sum implies finite entries; only on overflow do the full check.
    with np.errstate(over="ignore", invalid="ignore"):
        total = a.sum()
    return math.isfinite(total) or bool(np.isfinite(a).all())


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    if shape == ():
        return np.asarray(g.sum())
    raise StructuralError(f"cannot reduce gradient of shape {g.shape} to {shape}")


def _binary_shapes(a, b):
    if a.shape != b.shape and a.shape != () and b.shape != ():
        raise ValueError(f"operand shapes {a.shape} and {b.shape} differ")


def _affine_fwd(x, W, b):
    if W.ndim != 2 or x.ndim not in (1, 2) or x.shape[-1] != W.shape[0]:
        raise ValueError(f"input {x.shape} does not match weight {W.shape}")
    if b.shape != (W.shape[1],):
        raise ValueError(f"bias {b.shape} does not match weight {W.shape}")
    return x @ W + b


def _affine_bwd(g, vals, out, attrs, need):
    x, W, _ = vals
    x2 = x.reshape(1, -1) if x.ndim == 1 else x
    g2 = g.reshape(1, -1) if g.ndim == 1 else g
    gx = (g @ W.T) if need[0] else None
    gW = (x2.T @ g2) if need[1] else None
    gb = g2.sum(axis=0) if need[2] else None
    return gx, gW, gb


def _mean_fwd(x):
    return np.asarray(x.mean())


def _scale_fwd(x, c):
    return c * x


def _clip_fwd(x, lo, hi):
    return np.clip(x, lo, hi)


def _sub_fwd(a, b):
    _binary_shapes(a, b)
    return a - b


def _add_fwd(a, b):
    _binary_shapes(a, b)
    return a + b


def _log_fwd(x):
    if np.any(x <= 0.0):
        raise FloatingPointError("log of a non-positive value")
    return np.log(x)


_FORWARD = {
    "affine": lambda vals, attrs: _affine_fwd(*vals),
    "leaky_relu": lambda vals, attrs: np.where(vals[0] > 0.0, vals[0], attrs * vals[0]),
    "tanh": lambda vals, attrs: np.tanh(vals[0]),
    "sigmoid": lambda vals, attrs: sigmoid(vals[0]),
    "log": lambda vals, attrs: _log_fwd(vals[0]),
    "square": lambda vals, attrs: vals[0] * vals[0],
    "sub": lambda vals, attrs: _sub_fwd(*vals),
    "add": lambda vals, attrs: _add_fwd(*vals),
    "scale": lambda vals, attrs: _scale_fwd(vals[0], attrs),
    "mean": lambda vals, attrs: _mean_fwd(vals[0]),
    "clip": lambda vals, attrs: _clip_fwd(vals[0], *attrs),
}

_BACKWARD = {
    "affine": _affine_bwd,
    "leaky_relu": lambda g, v, out, a, need: (np.where(v[0] > 0.0, g, a * g),),
    "tanh": lambda g, v, out, a, need: (g * (1.0 - out * out),),
    "sigmoid": lambda g, v, out, a, need: (g * out * (1.0 - out),),
    "log": lambda g, v, out, a, need: (g / v[0],),
    "square": lambda g, v, out, a, need: (2.0 * v[0] * g,),
    "sub": lambda g, v, out, a, need: (_unbroadcast(g, v[0].shape), _unbroadcast(-g, v[1].shape)),
    "add": lambda g, v, out, a, need: (_unbroadcast(g, v[0].shape), _unbroadcast(g, v[1].shape)),
    "scale": lambda g, v, out, a, need: (a * g,),
    "mean": lambda g, v, out, a, need: (np.full(v[0].shape, g / v[0].size),),
    "clip": lambda g, v, out, a, need: (np.where((v[0] >= a[0]) & (v[0] <= a[1]), g, 0.0),),
}


class Graph:
    """A single-use record of operations; build, run :meth:`forward`, then :meth:`backward`."""

    def __init__(self):
        self.nodes = []
        self.output = None
        self._leaf_names = set()
        self._leaf_values = {}
        self._values = None
        self._caches = None

    # -- leaves ---------------------------------------------------------
    def _leaf(self, op, name, value):
        if name is not None:
            if name in self._leaf_names:
                raise StructuralError(f"duplicate leaf name {name!r}")
            self._leaf_names.add(name)
        node = Node(len(self.nodes), op, name=name)
        self.nodes.append(node)
        if value is not None:
            self._leaf_values[node.index] = np.asarray(value, dtype=np.float64)
        return node

    def param(self, name, value=None):
        """Declare a differentiable leaf."""
        return self._leaf("param", name, value)

    def const(self, name=None, value=None):
        """Declare a non-differentiable leaf."""
        return self._leaf("const", name, value)

    def _as_node(self, x):
        if isinstance(x, Node):
            return x
        return self.const(None, np.asarray(x, dtype=np.float64))

    def _op(self, op, inputs, attrs=None):
        inputs = [self._as_node(i) for i in inputs]
        node = Node(len(self.nodes), op, inputs, attrs)
        self.nodes.append(node)
        self.output = node
        return node

    # -- primitives -----------------------------------------------------
    def affine(self, x, W, b):
        return self._op("affine", (x, W, b))

    def leaky_relu(self, x, slope=LEAKY_SLOPE):
        return self._op("leaky_relu", (x,), slope)

    def tanh(self, x):
        return self._op("tanh", (x,))

    def sigmoid(self, x):
        return self._op("sigmoid", (x,))

    def log(self, x):
        return self._op("log", (x,))

    def square(self, x):
        return self._op("square", (x,))

    def sub(self, a, b):
        return self._op("sub", (a, b))

    def add(self, a, b):
        return self._op("add", (a, b))

    def scale(self, x, c):
        return self._op("scale", (x,), float(c))

    def mean(self, x):
        """Mean over every element; the result is a scalar."""
        return self._op("mean", (x,))

    def clip(self, x, lo, hi):
        """Clamp into ``[lo, hi]``; the gradient is zero outside the interval."""
        return self._op("clip", (x,), (float(lo), float(hi)))

    def mlp(self, x, weights, biases, act="leaky", slope=LEAKY_SLOPE):
        """Fused dense stack: hidden layers use ``act``, the last layer is linear."""
        if len(weights) != len(biases) or not weights:
            raise StructuralError("mlp needs one bias per weight and at least one layer")
        return self._op("mlp", (x, *weights, *biases), (act, slope, len(weights)))

    # -- evaluation -----------------------------------------------------
    def forward(self, bindings=None):
        """Evaluate every node; return the value of the output node."""
        if self.output is None:
            raise StructuralError("graph has no operations")
        bindings = bindings or {}
        unknown = set(bindings) - self._leaf_names
        if unknown:
            raise StructuralError(f"bindings for unknown leaves: {sorted(unknown)}")
        values = [None] * len(self.nodes)
        caches = {}
        for node in self.nodes:
            if node.op in ("param", "const"):
                if node.name in bindings:
                    val = np.asarray(bindings[node.name], dtype=np.float64)
                elif node.index in self._leaf_values:
                    val = self._leaf_values[node.index]
                else:
                    raise StructuralError(f"leaf {node.name!r} has no value")
                if val.ndim > 2:
                    raise StructuralError(f"leaf {node.name!r} has rank {val.ndim} > 2")
                values[node.index] = val
                continue
            args = [values[i.index] for i in node.inputs]
            try:
                if node.op == "mlp":
                    act, slope, k = node.attrs
                    val, caches[node.index] = kernels.mlp_forward(
                        args[0], list(args[1:1 + k]), list(args[1 + k:]), act, slope)
                else:
                    val = _FORWARD[node.op](args, node.attrs)
            except (ValueError, IndexError) as exc:
                raise StructuralError(f"{node!r}: {exc}") from None
            except FloatingPointError as exc:
                raise NumericError(f"{node!r}: {exc}") from None
            if not _all_finite(val):
                raise NumericError(f"{node!r} produced a non-finite value")
            values[node.index] = val
        self._values = values
        self._caches = caches
        return values[self.output.index]

    def value(self, node):
        """Cached forward value of ``node``."""
        if self._values is None:
            raise UsageError("value requested before forward")
        return self._values[node.index]

    def backward(self, wrt=None):
        """Gradients of the scalar output with respect to parameter leaves.

        ``wrt`` is an iterable of parameter names (default: every parameter).
        Returns a dict mapping each requested name to an array of the
        parameter's shape, zero if the output does not depend on it.
        """
        if self._values is None:
            raise UsageError("backward called before forward")
        out = self.output
        if self._values[out.index].size != 1:
            raise StructuralError(f"{out!r} is not scalar (shape {self._values[out.index].shape})")
        params = {n.name: n for n in self.nodes if n.op == "param"}
        names = list(params) if wrt is None else list(wrt)
        for name in names:
            if name not in params:
                raise UsageError(f"{name!r} is not a parameter leaf")
        targets = {params[name].index for name in names}

        need = [False] * len(self.nodes)
        for node in self.nodes:
            if node.index in targets:
                need[node.index] = True
            elif node.inputs:
                need[node.index] = any(need[i.index] for i in node.inputs)

        adj = [None] * len(self.nodes)
        adj[out.index] = np.ones_like(self._values[out.index])
        for node in reversed(self.nodes[: out.index + 1]):
            g = adj[node.index]
            if g is None or not need[node.index] or not node.inputs:
                continue
            vals = [self._values[i.index] for i in node.inputs]
            flags = [need[i.index] for i in node.inputs]
            if node.op == "mlp":
                act, slope, k = node.attrs
                inputs = self._caches[node.index]
                gx, gws, gbs = kernels.mlp_backward(
                    inputs, list(vals[1:1 + k]), g, act, slope,
                    need_input=flags[0], need_params=any(flags[1:]))
                if gws is None:
                    gws = gbs = [None] * k
                grads = [gx, *gws, *gbs]
            else:
                grads = _BACKWARD[node.op](g, vals, self._values[node.index], node.attrs, flags)
            for inp, flag, gi in zip(node.inputs, flags, grads):
                if not flag or gi is None:
                    continue
                if adj[inp.index] is None:
                    adj[inp.index] = gi
                else:
                    adj[inp.index] = adj[inp.index] + gi

        result = {}
        for name in names:
            node = params[name]
            g = adj[node.index]
            result[name] = np.zeros_like(self._values[node.index]) if g is None else g
        return result


# -- optimizer ---------------------------------------------------------------

@dataclass(frozen=True)
class AdamState:
    """Adam moment accumulators for a list of arrays, plus the step count."""

    m: tuple
    v: tuple
    t: int = 0

    @classmethod
    def zeros(cls, params):
        return cls(tuple(np.zeros_like(p) for p in params),
                   tuple(np.zeros_like(p) for p in params), 0)

    def copy(self):
        return AdamState(tuple(a.copy() for a in self.m), tuple(a.copy() for a in self.v), self.t)


def adam_step(params, grads, state, lr, beta1, beta2, eps=1e-8):
    """One bias-corrected Adam descent step; returns ``(new_params, new_state)``.

    Inputs are not modified.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise StructuralError("params, grads and Adam state have different lengths")
    t = state.t + 1
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise StructuralError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        p2 = np.array(p, dtype=np.float64, order="C", copy=True)
        m2 = m.copy(order="C")
        v2 = v.copy(order="C")
        kernels.adam_update(p2, np.ascontiguousarray(g, dtype=np.float64), m2, v2,
                            lr, beta1, beta2, eps, t)
        new_p.append(p2)
        new_m.append(m2)
        new_v.append(v2)
    return new_p, AdamState(tuple(new_m), tuple(new_v), t)


def gradient_norm(grads):
    """Euclidean norm of all gradient entries taken together."""
    arrays = list(grads.values()) if isinstance(grads, dict) else list(grads)
    if not arrays:
        raise UsageError("empty gradient map")
    return float(np.sqrt(sum(float(np.dot(a.ravel(), a.ravel())) for a in arrays)))

"""Generator / discriminator MLPs for the 2D experiments, and their checkpoint format."""
from dataclasses import dataclass

import numpy as np

from egan import kernels
from egan.autodiff import LEAKY_SLOPE, StructuralError, sigmoid

# Probability clamp applied before every log.
P_MIN = 1e-7
P_MAX = 1.0 - 1e-7

CHECKPOINT_TAG = "egan-checkpoint v1"


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden: tuple  # ((width, activation), ...)
    output_dim: int
    output_activation: str = "identity"

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("dimensions must be positive")
        acts = {a for _, a in self.hidden}
        if any(w < 1 for w, _ in self.hidden):
            raise ValueError("hidden widths must be positive")
        if not acts <= {"leaky", "tanh"} or len(acts) > 1:
            raise ValueError(f"hidden activations must all be 'leaky' or all 'tanh', got {acts}")
        if self.output_activation not in ("identity", "sigmoid"):
            raise ValueError(f"unknown output activation {self.output_activation!r}")
        if self.output_activation == "sigmoid" and self.output_dim != 1:
            raise ValueError("a sigmoid head must have output_dim 1")

    @property
    def activation(self):
        return self.hidden[0][1] if self.hidden else "leaky"

    @property
    def dims(self):
        return [self.input_dim, *(w for w, _ in self.hidden), self.output_dim]

    def layer_shapes(self):
        d = self.dims
        return [(a, b) for a, b in zip(d, d[1:])]

    def to_text(self):
        hidden = ",".join(f"{w}:{a}" for w, a in self.hidden) or "-"
        return f"{self.input_dim} {hidden} {self.output_dim} {self.output_activation}"

    @classmethod
    def from_text(cls, text):
        inp, hidden, out, head = text.split()
        layers = () if hidden == "-" else tuple(
            (int(w), a) for w, a in (item.split(":") for item in hidden.split(",")))
        return cls(int(inp), layers, int(out), head)


def generator_spec(z_dim=2, data_dim=2, width=128, depth=3, activation="leaky"):
    return MlpSpec(z_dim, tuple((width, activation) for _ in range(depth)), data_dim, "identity")


def discriminator_spec(data_dim=2, width=128, depth=3, activation="leaky"):
    return MlpSpec(data_dim, tuple((width, activation) for _ in range(depth)), 1, "sigmoid")


@dataclass(frozen=True)
class Params:
    """Layer weights and biases of one MLP. Treat as immutable."""

    spec: MlpSpec
    weights: tuple
    biases: tuple

    def arrays(self):
        """Flat list ``[W0, ..., Wn, b0, ..., bn]`` (the order used by Adam and gradients)."""
        return [*self.weights, *self.biases]

    def leaf_names(self, prefix):
        n = len(self.weights)
        return [f"{prefix}W{i}" for i in range(n)] + [f"{prefix}b{i}" for i in range(n)]

    def with_arrays(self, arrays):
        n = len(self.weights)
        return Params(self.spec, tuple(arrays[:n]), tuple(arrays[n:]))

    def copy(self):
        return self.with_arrays([a.copy() for a in self.arrays()])

    def size(self):
        return sum(a.size for a in self.arrays())


def init_mlp(spec, rng):
    """He-normal weights (std sqrt(2 / fan_in)), zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in spec.layer_shapes():
        weights.append(rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))
    return Params(spec, tuple(weights), tuple(biases))


def zero_params(spec):
    return Params(spec, tuple(np.zeros(s) for s in spec.layer_shapes()),
                  tuple(np.zeros(s[1]) for s in spec.layer_shapes()))


def _check_input(params, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.spec.input_dim:
        raise StructuralError(f"expected input of shape (batch, {params.spec.input_dim}), got {x.shape}")
    return x


def mlp_apply(params, x):
    """Raw network output (before any sigmoid head)."""
    x = _check_input(params, x)
    out, _ = kernels.mlp_forward(x, list(params.weights), list(params.biases),
                                 params.spec.activation, LEAKY_SLOPE)
    return out


def gen_forward(theta, z):
    return mlp_apply(theta, z)


def disc_forward(w, x):
    """Discriminator probabilities, clamped to ``[P_MIN, P_MAX]``; shape (batch, 1)."""
    return np.clip(sigmoid(mlp_apply(w, x)), P_MIN, P_MAX)


def graph_leaves(graph, params, prefix, trainable):
    """Declare ``params`` as graph leaves (``param`` if trainable, else ``const``)."""
    declare = graph.param if trainable else graph.const
    return [declare(name, a) for name, a in zip(params.leaf_names(prefix), params.arrays())]


def graph_apply(graph, params, leaves, x_node):
    n = len(params.weights)
    return graph.mlp(x_node, leaves[:n], leaves[n:], params.spec.activation)


def graph_mlp(graph, params, x_node, prefix, trainable):
    return graph_apply(graph, params, graph_leaves(graph, params, prefix, trainable), x_node)


def graph_prob(graph, logits):
    return graph.clip(graph.sigmoid(logits), P_MIN, P_MAX)


def graph_disc_prob(graph, w, x_node, prefix="D", trainable=False):
    return graph_prob(graph, graph_mlp(graph, w, x_node, prefix, trainable))


# -- checkpoints ----------------------------------------------------------------

def write_checkpoint(path, nets):
    """Write named networks (``{"G0": Params, "D": Params}``) to a text checkpoint.

    Layout: a format tag line, then per network a ``net NAME`` line, a
    ``spec ...`` line, and per layer a ``layer ROWS COLS`` line followed by
    the row-major weights and the bias, one value per line (``repr`` floats,
    which round-trip exactly).
    """
    lines = [CHECKPOINT_TAG]
    for name, params in nets.items():
        lines.append(f"net {name}")
        lines.append(f"spec {params.spec.to_text()}")
        for W, b in zip(params.weights, params.biases):
            lines.append(f"layer {W.shape[0]} {W.shape[1]}")
            lines.extend(repr(float(v)) for v in W.ravel())
            lines.extend(repr(float(v)) for v in b)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_checkpoint(path):
    with open(path) as fh:
        lines = fh.read().split("\n")
    if not lines or lines[0] != CHECKPOINT_TAG:
        raise ValueError(f"{path}: not an {CHECKPOINT_TAG!r} file")
    nets = {}
    i = 1
    while i < len(lines) and lines[i]:
        if not lines[i].startswith("net "):
            raise ValueError(f"{path}:{i + 1}: expected 'net NAME'")
        name = lines[i][4:]
        spec = MlpSpec.from_text(lines[i + 1][5:])
        i += 2
        weights, biases = [], []
        for rows, cols in spec.layer_shapes():
            if lines[i] != f"layer {rows} {cols}":
                raise ValueError(f"{path}:{i + 1}: layer header does not match spec")
            i += 1
            weights.append(np.array([float(v) for v in lines[i:i + rows * cols]]).reshape(rows, cols))
            i += rows * cols
            biases.append(np.array([float(v) for v in lines[i:i + cols]]))
            i += cols
        nets[name] = Params(spec, tuple(weights), tuple(biases))
    return nets

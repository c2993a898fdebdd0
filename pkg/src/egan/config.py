"""Run configuration: flat ``key = value`` text with dotted sections.

Example::

    # ring-8 with the default optimizer settings
    seed = 7
    iterations = 20000
    gamma = 0.5
    data.name = ring8
    net.width = 128
    run.checkpoint_every = 5000

Command-line flags override file values. Unknown keys are rejected.
"""
from dataclasses import dataclass, field, fields, replace

from egan.core import ConfigError, Mutation, TrainingConfig


def _int(v):
    return int(v)


def _mutations(v):
    items = [s.strip() for s in v.split(",") if s.strip()] if isinstance(v, str) else list(v)
    try:
        return tuple(Mutation(m) for m in items)
    except ValueError:
        raise ValueError(f"expected a comma list of {[m.value for m in Mutation]}") from None


# key -> (parser, where it lives)
KEYS = {
    "seed": (_int, "train"),
    "iterations": (_int, "train"),
    "gamma": (float, "train"),
    "lr": (float, "train"),
    "beta1": (float, "train"),
    "beta2": (float, "train"),
    "eps": (float, "train"),
    "n_d": (_int, "train"),
    "n_p": (_int, "train"),
    "batch_size": (_int, "train"),
    "mutations": (_mutations, "train"),
    "fitness_batch": (_int, "train"),
    "data.name": (str, "data"),
    "data.radius": (float, "data"),
    "data.sigma": (float, "data"),
    "data.spacing": (float, "data"),
    "data.path": (str, "data"),
    "net.z_dim": (_int, "train"),
    "net.width": (_int, "train"),
    "net.depth": (_int, "train"),
    "net.activation": (str, "train"),
    "run.out": (str, "run"),
    "run.checkpoint_every": (_int, "train"),
    "metrics.n_samples": (_int, "run"),
    "metrics.k_sigma": (float, "run"),
    "metrics.bandwidth": (float, "run"),
    "metrics.resolution": (_int, "run"),
    "metrics.window": (_int, "run"),
}

_TRAIN_FIELD = {
    "net.z_dim": "z_dim",
    "net.width": "width",
    "net.depth": "depth",
    "net.activation": "activation",
    "run.checkpoint_every": "checkpoint_every",
}

_DATA_PARAMS = {
    "ring8": ("data.radius", "data.sigma"),
    "grid25": ("data.spacing", "data.sigma"),
    "file": ("data.path",),
}


@dataclass(frozen=True)
class RunConfig:
    training: TrainingConfig = field(default_factory=TrainingConfig)
    out: str = ""
    n_samples: int = 2500
    k_sigma: float = 3.0
    bandwidth: float = 0.0  # 0 picks the dataset default
    resolution: int = 128
    window: int = 0  # selection histogram window; 0 picks iterations // 50
    values: dict = field(default_factory=dict)  # the parsed key/value pairs, for manifests

    def to_text(self):
        return "".join(f"{k} = {self.values[k]}\n" for k in sorted(self.values))


def parse_text(text, source="<config>"):
    """Parse ``key = value`` lines into a dict of raw strings."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}", "expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(key, "unknown key")
        values[key] = value
    return values


def build(values):
    """Validate raw key/value strings and assemble a :class:`RunConfig`."""
    parsed = {}
    for key, raw in values.items():
        if key not in KEYS:
            raise ConfigError(key, "unknown key")
        parser, _ = KEYS[key]
        try:
            parsed[key] = parser(raw)
        except ValueError as exc:
            raise ConfigError(key, f"bad value {raw!r} ({exc})") from None

    dataset = parsed.get("data.name", "ring8")
    if dataset not in _DATA_PARAMS:
        raise ConfigError("data.name", f"unknown dataset {dataset!r}")
    for key in parsed:
        if key.startswith("data.") and key != "data.name" and key not in _DATA_PARAMS[dataset]:
            raise ConfigError(key, f"not a parameter of dataset {dataset!r}")
    if dataset == "file" and "data.path" not in parsed:
        raise ConfigError("data.path", "required for data.name = file")
    dataset_params = {k.split(".", 1)[1]: v for k, v in parsed.items()
                      if k.startswith("data.") and k != "data.name"}

    train_kwargs = {"dataset": dataset, "dataset_params": dataset_params}
    names = {f.name for f in fields(TrainingConfig)}
    for key, value in parsed.items():
        if KEYS[key][1] != "train":
            continue
        name = _TRAIN_FIELD.get(key, key)
        assert name in names, name
        train_kwargs[name] = value
    try:
        training = TrainingConfig(**train_kwargs)
    except ConfigError as exc:
        key = {v: k for k, v in _TRAIN_FIELD.items()}.get(exc.key, exc.key)
        raise ConfigError(key, str(exc).split(": ", 1)[1]) from None

    run = RunConfig(
        training=training,
        out=parsed.get("run.out", ""),
        n_samples=parsed.get("metrics.n_samples", 2500),
        k_sigma=parsed.get("metrics.k_sigma", 3.0),
        bandwidth=parsed.get("metrics.bandwidth", 0.0),
        resolution=parsed.get("metrics.resolution", 128),
        window=parsed.get("metrics.window", 0),
        values={k: str(v) for k, v in values.items()},
    )
    if run.n_samples < 1:
        raise ConfigError("metrics.n_samples", "must be >= 1")
    if run.k_sigma <= 0:
        raise ConfigError("metrics.k_sigma", "must be > 0")
    if run.bandwidth < 0:
        raise ConfigError("metrics.bandwidth", "must be >= 0")
    if run.resolution < 1:
        raise ConfigError("metrics.resolution", "must be >= 1")
    if run.window < 0:
        raise ConfigError("metrics.window", "must be >= 0")
    return run


def load(path=None, overrides=None):
    """Read ``path`` (optional) and apply ``overrides`` (flag values win)."""
    values = {}
    if path:
        try:
            with open(path) as fh:
                values = parse_text(fh.read(), path)
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in KEYS:
            raise ConfigError(key, "unknown key")
        values[key] = value if isinstance(value, str) else str(value)
    return build(values)


def with_training(run, **changes):
    return replace(run, training=replace(run.training, **changes))

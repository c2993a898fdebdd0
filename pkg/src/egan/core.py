"""Evolutionary GAN training: a discriminator environment and a population of generators.

Each evolutionary step updates the discriminator ``n_d`` times, lets every
parent produce one child per mutation (one Adam step on that mutation's
loss), scores the children with quality + gamma * diversity fitness, and
keeps the best ``n_p`` of them.
"""
import enum
import logging
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from egan import data as data_mod
from egan import nets
from egan.autodiff import AdamState, Graph, NumericError, adam_step, gradient_norm

log = logging.getLogger(__name__)

# Diversity fitness is capped here when the gradient norm underflows below exp(-LOG_CAP).
LOG_CAP = 20.0


class Mutation(enum.Enum):
    MINIMAX = "minimax"
    HEURISTIC = "heuristic"
    LEAST_SQUARES = "leastsq"

    @property
    def rank(self):
        return MUTATION_ORDER.index(self)


MUTATION_ORDER = (Mutation.MINIMAX, Mutation.HEURISTIC, Mutation.LEAST_SQUARES)


class ConfigError(ValueError):
    """Invalid training configuration; ``key`` names the offending setting."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class TrainingError(RuntimeError):
    """A training step failed; ``checkpoint`` is the last good state on disk (or None)."""

    def __init__(self, step, message, checkpoint=None):
        super().__init__(f"step {step}: {message}")
        self.step = step
        self.checkpoint = checkpoint


@dataclass(frozen=True)
class TrainingConfig:
    lr: float = 0.0002
    beta1: float = 0.5
    beta2: float = 0.99
    eps: float = 1e-8
    n_d: int = 2
    n_p: int = 1
    batch_size: int = 16
    gamma: float = 0.5
    iterations: int = 1000
    seed: int = 0
    mutations: tuple = MUTATION_ORDER
    fitness_batch: int = 0  # 0 means batch_size
    dataset: str = "ring8"
    dataset_params: dict = field(default_factory=dict)
    z_dim: int = 2
    width: int = 128
    depth: int = 3
    activation: str = "leaky"
    checkpoint_every: int = 0

    def __post_init__(self):
        muts = tuple(Mutation(m) if not isinstance(m, Mutation) else m for m in self.mutations)
        if not muts or len(set(muts)) != len(muts):
            raise ConfigError("mutations", "need one or more distinct mutations")
        object.__setattr__(self, "mutations", tuple(sorted(muts, key=lambda m: m.rank)))
        for key in ("n_d", "n_p", "batch_size", "z_dim", "width"):
            if getattr(self, key) < 1:
                raise ConfigError(key, "must be >= 1")
        for key in ("iterations", "depth", "checkpoint_every", "fitness_batch"):
            if getattr(self, key) < 0:
                raise ConfigError(key, "must be >= 0")
        if self.batch_size % self.n_p:
            raise ConfigError("batch_size", f"{self.batch_size} is not divisible by n_p={self.n_p}")
        if not self.gamma >= 0:
            raise ConfigError("gamma", "must be >= 0")
        if not self.lr > 0:
            raise ConfigError("lr", "must be > 0")
        for key in ("beta1", "beta2"):
            if not 0 <= getattr(self, key) < 1:
                raise ConfigError(key, "must be in [0, 1)")
        if self.activation not in ("leaky", "tanh"):
            raise ConfigError("activation", "must be 'leaky' or 'tanh'")

    @property
    def n_m(self):
        return len(self.mutations)

    @property
    def eval_batch(self):
        return self.fitness_batch or self.batch_size

    def adam(self):
        return dict(lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.eps)


@dataclass
class Individual:
    theta: nets.Params
    adam: AdamState
    lineage: tuple = None  # (parent index, mutation, step)


@dataclass(frozen=True)
class FitnessScore:
    fq: float
    fd: float
    total: float


@dataclass(frozen=True)
class ChildRecord:
    parent: int
    mutation: Mutation
    fq: float
    fd: float
    total: float


@dataclass(frozen=True)
class EvolutionStepLog:
    step: int
    children: tuple
    survivors: tuple
    d_objectives: tuple

    @property
    def selected(self):
        return tuple(self.children[i].mutation for i in self.survivors)


@dataclass(frozen=True)
class BaselineStepLog:
    step: int
    mutation: Mutation
    g_loss: float
    d_objectives: tuple


# -- losses ---------------------------------------------------------------------

def _objective_graph(w, real, fake, trainable):
    g = Graph()
    leaves = nets.graph_leaves(g, w, "D", trainable)
    p_real = nets.graph_prob(g, nets.graph_apply(g, w, leaves, g.const("real", real)))
    p_fake = nets.graph_prob(g, nets.graph_apply(g, w, leaves, g.const("fake", fake)))
    g.add(g.mean(g.log(p_real)), g.mean(g.log(g.sub(1.0, p_fake))))
    return g, p_fake


def discriminator_loss(w, real, fakes, trainable=True):
    """Objective the discriminator ascends: mean log D(real) + mean log(1 - D(fake)).

    ``fakes`` holds one batch per parent; they are pooled, so the fake term
    is (1/m) times the sum over all parents' samples. Returns
    ``(value, graph)`` with the forward pass done, so gradients come from
    ``graph.backward(w.leaf_names("D"))``.
    """
    fakes = [np.asarray(f, dtype=np.float64) for f in fakes]
    if not fakes or len({f.shape[0] for f in fakes}) != 1:
        raise ValueError("each parent must contribute the same number of fake samples")
    g, _ = _objective_graph(w, real, np.concatenate(fakes, axis=0), trainable)
    return float(g.forward()), g


def mutation_loss(tag, w, theta, z):
    """Generator loss for one mutation; returns ``(value, graph)``.

    MINIMAX  ->  1/2 mean log(1 - D(G(z)))
    HEURISTIC -> -1/2 mean log D(G(z))
    LEAST_SQUARES -> mean (D(G(z)) - 1)^2
    Gradients w.r.t. the generator come from ``graph.backward(theta.leaf_names("G"))``.
    """
    tag = Mutation(tag)
    g = Graph()
    fake = nets.graph_mlp(g, theta, g.const("z", z), "G", trainable=True)
    p = nets.graph_disc_prob(g, w, fake)
    _mutation_head(g, tag, p)
    return float(g.forward()), g


def _mutation_head(g, tag, p):
    if tag is Mutation.MINIMAX:
        return g.scale(g.mean(g.log(g.sub(1.0, p))), 0.5)
    if tag is Mutation.HEURISTIC:
        return g.scale(g.mean(g.log(p)), -0.5)
    return g.mean(g.square(g.sub(p, 1.0)))


def mutation_loss_of_probs(tag, p):
    """Mutation loss for given discriminator outputs ``p`` (clamped first)."""
    g = Graph()
    node = g.clip(g.param("p", np.asarray(p, dtype=np.float64)), nets.P_MIN, nets.P_MAX)
    _mutation_head(g, Mutation(tag), node)
    return float(g.forward()), g


# -- variation ------------------------------------------------------------------

def new_individual(theta):
    return Individual(theta, AdamState.zeros(theta.arrays()))


def produce_child(parent, tag, w, z, config, parent_index=0, step=0):
    """One Adam step on the mutation loss, starting from (a copy of) the parent's state."""
    return _mutate(parent, tag, w, z, config, parent_index, step)[0]


def _mutate(parent, tag, w, z, config, parent_index, step):
    tag = Mutation(tag)
    loss, g = mutation_loss(tag, w, parent.theta, z)
    names = parent.theta.leaf_names("G")
    grads = g.backward(names)
    garr = [grads[n] for n in names]
    if not all(np.all(np.isfinite(a)) for a in garr):
        raise NumericError(f"non-finite generator gradient under {tag.value} mutation")
    arrays, state = adam_step(parent.theta.arrays(), garr, parent.adam, **config.adam())
    return Individual(parent.theta.with_arrays(arrays), state, (parent_index, tag, step)), loss


def update_discriminator(w, adam_w, source, parents, config, rngs):
    """``n_d`` Adam ascent steps on the discriminator objective.

    Each step draws a fresh real batch of ``batch_size`` and a fresh noise
    batch of ``batch_size``, split evenly between the parents.
    Returns ``(w, adam_w, objectives)``.
    """
    if not parents:
        raise ValueError("need at least one parent")
    m = config.batch_size
    per = m // len(parents)
    names = w.leaf_names("D")
    objectives = []
    for _ in range(config.n_d):
        real = source.sample(m, rngs["data"])
        z = data_mod.sample_noise(m, config.z_dim, rngs["noise"])
        fakes = [nets.gen_forward(theta, z[j * per:(j + 1) * per]) for j, theta in enumerate(parents)]
        value, g = discriminator_loss(w, real, fakes)
        grads = g.backward(names)
        arrays, adam_w = adam_step(w.arrays(), [-grads[n] for n in names], adam_w, **config.adam())
        w = w.with_arrays(arrays)
        objectives.append(value)
    return w, adam_w, objectives


# -- evaluation -----------------------------------------------------------------

def quality_fitness(w, theta, z):
    """Mean discriminator output on generated samples."""
    return float(np.mean(nets.disc_forward(w, nets.gen_forward(theta, z))))


def _diversity_from_norm(norm):
    if norm < math.exp(-LOG_CAP):
        return LOG_CAP
    return -math.log(norm)


def _term_gradient(w, x, real):
    """Value, gradient w.r.t. ``w`` and probabilities of one half of the objective."""
    g = Graph()
    leaves = nets.graph_leaves(g, w, "D", True)
    p = nets.graph_prob(g, nets.graph_apply(g, w, leaves, g.const("x", x)))
    g.mean(g.log(p if real else g.sub(1.0, p)))
    value = float(g.forward())
    grads = g.backward(w.leaf_names("D"))
    return value, [grads[n] for n in w.leaf_names("D")], g.value(p)


def real_term_gradient(w, real):
    """Gradient of mean log D(real) w.r.t. ``w``; identical for every child of a step."""
    return _term_gradient(w, real, True)[1]


def evaluate_child(w, theta, real, z, real_grad=None):
    """``(fq, fd)`` for one child on the shared fitness batches.

    The objective's gradient splits into a real-data part, which does not
    depend on the generator and can be passed in as ``real_grad``, and a
    fake-data part. The fake part's forward pass also yields fq.
    """
    if real_grad is None:
        real_grad = real_term_gradient(w, real)
    _, fake_grad, p_fake = _term_gradient(w, nets.gen_forward(theta, z), False)
    norm = gradient_norm([a + b for a, b in zip(fake_grad, real_grad)])
    return float(np.mean(p_fake)), _diversity_from_norm(norm)


def diversity_fitness(w, theta, real, z):
    """Negative log of the norm of the discriminator-loss gradient w.r.t. all of ``w``.

    ``w`` is left untouched. Returns ``LOG_CAP`` when the norm underflows.
    """
    return evaluate_child(w, theta, real, z)[1]


def fitness(fq, fd, gamma):
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    return FitnessScore(fq, fd, fq + gamma * fd)


def select(records, n_p):
    """Indices of the ``n_p`` best children by total fitness.

    ``records`` are :class:`ChildRecord` (or anything with ``total``,
    ``mutation`` and ``parent``). Ties go to the earlier mutation in
    MINIMAX, HEURISTIC, LEAST_SQUARES order, then the lower parent index.
    """
    if len(records) < n_p:
        raise ValueError(f"{len(records)} children cannot fill {n_p} survivor slots")
    order = sorted(range(len(records)),
                   key=lambda i: (-records[i].total, Mutation(records[i].mutation).rank, records[i].parent))
    return tuple(order[:n_p])


# -- loops ----------------------------------------------------------------------

def evolutionary_step(population, w, adam_w, source, config, rngs, step=0):
    """Discriminator update, variation, evaluation, selection.

    Returns ``(population, w, adam_w, EvolutionStepLog)``.
    """
    if len(population) != config.n_p:
        raise ValueError(f"population has {len(population)} members, expected {config.n_p}")
    w, adam_w, objectives = update_discriminator(
        w, adam_w, source, [ind.theta for ind in population], config, rngs)

    n_eval = config.eval_batch
    real_eval = source.sample(n_eval, rngs["fitness"])
    z_eval = data_mod.sample_noise(n_eval, config.z_dim, rngs["fitness"])
    real_grad = real_term_gradient(w, real_eval)

    children, records = [], []
    for j, parent in enumerate(population):
        for tag in config.mutations:
            z = data_mod.sample_noise(config.batch_size, config.z_dim, rngs["noise"])
            child = produce_child(parent, tag, w, z, config, j, step)
            fq, fd = evaluate_child(w, child.theta, real_eval, z_eval, real_grad)
            score = fitness(fq, fd, config.gamma)
            children.append(child)
            records.append(ChildRecord(j, tag, fq, fd, score.total))
    survivors = select(records, config.n_p)
    entry = EvolutionStepLog(step, tuple(records), survivors, tuple(objectives))
    return [children[i] for i in survivors], w, adam_w, entry


@dataclass
class RunResult:
    population: list
    w: nets.Params
    adam_w: AdamState
    logs: list
    checkpoints: list
    config: TrainingConfig = None


def init_state(config):
    """Initial discriminator and generators from the ``init`` stream."""
    rng = data_mod.make_rng(config.seed, "init")
    d_spec = nets.discriminator_spec(2, config.width, config.depth, config.activation)
    g_spec = nets.generator_spec(config.z_dim, 2, config.width, config.depth, config.activation)
    w = nets.init_mlp(d_spec, rng)
    population = [new_individual(nets.init_mlp(g_spec, rng)) for _ in range(config.n_p)]
    return population, w, AdamState.zeros(w.arrays())


def make_source(config):
    return data_mod.make_dataset(config.dataset, **config.dataset_params)


def _nets_of(population, w):
    out = {f"G{j}": ind.theta for j, ind in enumerate(population)}
    out["D"] = w
    return out


def _run(config, step_fn, out_dir, on_step):
    source = make_source(config)
    rngs = data_mod.make_streams(config.seed)
    population, w, adam_w = init_state(config)
    logs, checkpoints = [], []
    ckpt_dir = os.path.join(out_dir, "checkpoints") if out_dir else None
    if ckpt_dir:
        os.makedirs(ckpt_dir, exist_ok=True)
    for step in range(config.iterations):
        try:
            population, w, adam_w, entry = step_fn(population, w, adam_w, source, config, rngs, step)
        except (NumericError, FloatingPointError, ValueError) as exc:
            path = None
            if ckpt_dir:
                path = os.path.join(ckpt_dir, "last_good.ckpt")
                nets.write_checkpoint(path, _nets_of(population, w))
            raise TrainingError(step, str(exc), path) from exc
        logs.append(entry)
        if on_step is not None:
            on_step(entry)
        if ckpt_dir and config.checkpoint_every and (step + 1) % config.checkpoint_every == 0:
            path = os.path.join(ckpt_dir, f"step_{step + 1:07d}.ckpt")
            nets.write_checkpoint(path, _nets_of(population, w))
            checkpoints.append(path)
    if ckpt_dir:
        path = os.path.join(ckpt_dir, "final.ckpt")
        nets.write_checkpoint(path, _nets_of(population, w))
        checkpoints.append(path)
    return RunResult(population, w, adam_w, logs, checkpoints, config)


def train(config, out_dir=None, on_step=None):
    """Run ``config.iterations`` evolutionary steps."""
    return _run(config, evolutionary_step, out_dir, on_step)


def baseline_step(population, w, adam_w, source, config, rngs, step=0):
    """Conventional GAN step: ``n_d`` discriminator updates, one generator update."""
    (tag,) = config.mutations
    (ind,) = population
    w, adam_w, objectives = update_discriminator(w, adam_w, source, [ind.theta], config, rngs)
    z = data_mod.sample_noise(config.batch_size, config.z_dim, rngs["noise"])
    child, g_loss = _mutate(ind, tag, w, z, config, 0, step)
    return [child], w, adam_w, BaselineStepLog(step, tag, g_loss, tuple(objectives))


def baseline_train(tag, config, out_dir=None, on_step=None):
    """Single-objective GAN training with the fixed generator loss ``tag``."""
    config = replace(config, mutations=(Mutation(tag),), n_p=1)
    return _run(config, baseline_step, out_dir, on_step)


# -- run logs -------------------------------------------------------------------

def evolution_log_header(config):
    cols = ["step"]
    for j in range(config.n_p):
        for tag in config.mutations:
            prefix = f"p{j}_{tag.value}"
            cols += [f"{prefix}_fq", f"{prefix}_fd", f"{prefix}_total"]
    cols += ["survivors", "selected"]
    cols += [f"d_objective_{k}" for k in range(config.n_d)]
    return cols


def evolution_log_row(entry):
    row = [str(entry.step)]
    for rec in entry.children:
        row += [repr(rec.fq), repr(rec.fd), repr(rec.total)]
    row.append(";".join(str(i) for i in entry.survivors))
    row.append(";".join(m.value for m in entry.selected))
    row += [repr(v) for v in entry.d_objectives]
    return row


def baseline_log_header(config):
    return ["step", "mutation", "g_loss"] + [f"d_objective_{k}" for k in range(config.n_d)]


def baseline_log_row(entry):
    return [str(entry.step), entry.mutation.value, repr(entry.g_loss)] + [repr(v) for v in entry.d_objectives]

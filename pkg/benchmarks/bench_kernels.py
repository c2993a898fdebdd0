"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--width 128] [--batch 16] [--repeat 2000]

Reports microseconds per call for the fused MLP forward, backward and the
Adam update, and milliseconds per full evolutionary step for each backend.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from egan import _mlp_py, kernels


def bench_kernels(mod, width, batch, repeat):
    rng = np.random.default_rng(0)
    dims = [2, width, width, width, 1]
    Ws = [rng.standard_normal((a, b)) * np.sqrt(2.0 / a) for a, b in zip(dims, dims[1:])]
    bs = [np.zeros(b) for b in dims[1:]]
    x = rng.standard_normal((batch, 2))
    out, cache = mod.mlp_forward(x, Ws, bs, "leaky", 0.2)
    gout = np.ones_like(out)
    p, g = rng.standard_normal((width, width)), rng.standard_normal((width, width))
    m, v = np.zeros_like(p), np.zeros_like(p)
    t = {
        "forward": timeit.timeit(lambda: mod.mlp_forward(x, Ws, bs, "leaky", 0.2), number=repeat),
        "backward": timeit.timeit(lambda: mod.mlp_backward(cache, Ws, gout, "leaky", 0.2), number=repeat),
        "adam": timeit.timeit(lambda: mod.adam_update(p, g, m, v, 2e-4, 0.5, 0.99, 1e-8, 1), number=repeat),
    }
    return {k: 1e6 * s / repeat for k, s in t.items()}


STEP_SCRIPT = """
import time
from egan import core, data
cfg = core.TrainingConfig(width={width}, batch_size={batch})
pop, w, aw = core.init_state(cfg)
src, rngs = data.ring8(), data.make_streams(0)
for s in range(20):
    pop, w, aw, _ = core.evolutionary_step(pop, w, aw, src, cfg, rngs, s)
t = time.perf_counter()
for s in range({steps}):
    pop, w, aw, _ = core.evolutionary_step(pop, w, aw, src, cfg, rngs, s)
print(1e3 * (time.perf_counter() - t) / {steps})
"""


def bench_step(backend, width, batch, steps):
    # The backend is chosen at import, so each one runs in its own interpreter.
    env = dict(os.environ, EGAN_KERNELS=backend)
    code = STEP_SCRIPT.format(width=width, batch=batch, steps=steps)
    res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(res.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--width", type=int, default=128)
    ap.add_argument("--batch", type=int, default=16)
    ap.add_argument("--repeat", type=int, default=2000)
    ap.add_argument("--steps", type=int, default=200)
    args = ap.parse_args(argv)

    backends = [("python", _mlp_py)]
    try:
        backends.insert(0, ("compiled", kernels.load("compiled")))
    except ImportError:
        print("compiled kernels not built; timing the fallback only")

    print(f"width {args.width}, batch {args.batch}")
    print(f"{'backend':10s} {'forward us':>11s} {'backward us':>12s} {'adam us':>8s} {'step ms':>8s}")
    for name, mod in backends:
        t = bench_kernels(mod, args.width, args.batch, args.repeat)
        step = bench_step(name, args.width, args.batch, args.steps)
        print(f"{name:10s} {t['forward']:11.1f} {t['backward']:12.1f} {t['adam']:8.1f} {step:8.2f}")


if __name__ == "__main__":
    main()

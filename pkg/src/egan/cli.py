"""Command-line runner: ``egan train | baseline | eval | interp``.

Exit codes: 0 success, 2 configuration or usage error, 3 numeric failure.
"""
import argparse
import csv
import hashlib
import logging
import os
import sys

import numpy as np

from egan import config as config_mod
from egan import core, data, kernels, metrics, nets

log = logging.getLogger("egan")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3

OBJECTIVES = {"minimax": core.Mutation.MINIMAX, "heuristic": core.Mutation.HEURISTIC,
              "leastsq": core.Mutation.LEAST_SQUARES}


class UsageError(Exception):
    pass


def _common_flags(p):
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory (must not hold a previous run)")
    p.add_argument("--iterations", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--dataset", choices=["ring8", "grid25", "file"])
    p.add_argument("--checkpoint-every", type=int)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key, e.g. --set net.width=64")


def build_parser():
    parser = argparse.ArgumentParser(prog="egan", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="evolutionary GAN training")
    _common_flags(p)

    p = sub.add_parser("baseline", help="single-objective GAN training")
    p.add_argument("objective", choices=sorted(OBJECTIVES))
    _common_flags(p)

    p = sub.add_parser("eval", help="metrics and samples for a checkpointed generator")
    p.add_argument("checkpoint")
    p.add_argument("--dataset", default="ring8", choices=["ring8", "grid25"])
    p.add_argument("--n-samples", type=int, default=2500)
    p.add_argument("--seed", type=int, default=0, help="seed of the evaluation noise stream")
    p.add_argument("--net", default="G0", help="generator name inside the checkpoint")
    p.add_argument("--k-sigma", type=float, default=3.0)
    p.add_argument("--bandwidth", type=float, default=0.0)
    p.add_argument("--resolution", type=int, default=metrics.DEFAULT_RESOLUTION)
    p.add_argument("--out", required=True)

    p = sub.add_parser("interp", help="latent-space linear interpolation")
    p.add_argument("checkpoint")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=9)
    p.add_argument("--net", default="G0")
    p.add_argument("--out", required=True)
    return parser


# -- helpers ------------------------------------------------------------------

def _overrides(args):
    values = {}
    for item in args.set:
        if "=" not in item:
            raise core.ConfigError(item, "expected KEY=VALUE")
        key, value = item.split("=", 1)
        values[key.strip()] = value.strip()
    flags = {"seed": args.seed, "iterations": args.iterations, "gamma": args.gamma,
             "data.name": args.dataset, "run.checkpoint_every": args.checkpoint_every,
             "run.out": args.out}
    values.update({k: v for k, v in flags.items() if v is not None})
    return values


def _fresh_dir(path):
    if os.path.exists(os.path.join(path, "manifest.txt")):
        raise UsageError(f"{path} already holds a run; choose a new --out")
    os.makedirs(path, exist_ok=True)
    return path


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(out, command, settings):
    """Snapshot settings plus a checksum of every file in ``out``."""
    files = []
    for root, _, names in os.walk(out):
        for name in names:
            if name != "manifest.txt":
                files.append(os.path.relpath(os.path.join(root, name), out))
    lines = [f"command = {command}", f"kernels = {kernels.BACKEND}"]
    lines += [f"{k} = {v}" for k, v in settings]
    lines.append("")
    lines += [f"sha256 {_sha256(os.path.join(out, f))} {f}" for f in sorted(files)]
    with open(os.path.join(out, "manifest.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        out.writerows(rows)


def _eval_generator(theta, mixture, n, seed, k_sigma, bandwidth, resolution, out):
    if n < 1:
        raise UsageError("--n-samples must be >= 1")
    rng = data.make_rng(seed, "eval")
    samples = nets.gen_forward(theta, data.sample_noise(n, theta.spec.input_dim, rng))
    report = metrics.mode_coverage(samples, mixture, k_sigma)
    bw = bandwidth or metrics.DEFAULT_BANDWIDTH.get(mixture.name, 0.1)
    grid = metrics.kde_grid(samples, bw, metrics.DEFAULT_EXTENT, resolution)
    metrics.write_points_csv(os.path.join(out, "samples.csv"), samples)
    metrics.write_coverage_csv(os.path.join(out, "coverage.csv"), report)
    metrics.write_kde_csv(os.path.join(out, "kde.csv"), grid)
    return report


# -- commands -----------------------------------------------------------------

def _train_like(args, baseline):
    run = config_mod.load(args.config, _overrides(args))
    tc = run.training
    name = f"baseline-{args.objective}" if baseline else "train"
    out = _fresh_dir(run.out or os.path.join("runs", f"{name}-{tc.dataset}-seed{tc.seed}"))

    if baseline:
        tc = core.replace(tc, mutations=(OBJECTIVES[args.objective],), n_p=1)
        header, row = core.baseline_log_header(tc), core.baseline_log_row
    else:
        header, row = core.evolution_log_header(tc), core.evolution_log_row

    with open(os.path.join(out, "steps.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)

        def on_step(entry):
            writer.writerow(row(entry))
            if entry.step % 1000 == 0:
                log.info("step %d", entry.step)

        try:
            if baseline:
                result = core.baseline_train(tc.mutations[0], tc, out, on_step)
            else:
                result = core.train(tc, out, on_step)
        except core.TrainingError as exc:
            print(f"numeric failure: {exc}", file=sys.stderr)
            if exc.checkpoint:
                print(f"last good checkpoint: {exc.checkpoint}", file=sys.stderr)
            fh.flush()
            write_manifest(out, name, [("status", "failed")] + sorted(run.values.items()))
            return EXIT_NUMERIC

    source = core.make_source(tc)
    if isinstance(source, data.GaussianMixture):
        report = _eval_generator(result.population[0].theta, source, run.n_samples, tc.seed,
                                 run.k_sigma, run.bandwidth, run.resolution, out)
        print(f"modes captured {report.modes_captured}/{len(source.centers)}, "
              f"high-quality ratio {report.high_quality_ratio:.3f}")
    if not baseline and result.logs:
        window = run.window or max(1, len(result.logs) // 50)
        hist = metrics.selection_histogram(result.logs, min(window, len(result.logs)))
        metrics.write_histogram_csv(os.path.join(out, "selection.csv"), hist)
    settings = [("seed", tc.seed)] + sorted(run.values.items())
    write_manifest(out, name if not baseline else f"baseline {args.objective}", settings)
    print(out)
    return EXIT_OK


def _load_generator(path, net):
    try:
        loaded = nets.read_checkpoint(path)
    except (OSError, ValueError, IndexError) as exc:
        raise UsageError(f"cannot read checkpoint {path}: {exc}") from None
    if net not in loaded:
        raise UsageError(f"checkpoint {path} has no network {net!r} (has {sorted(loaded)})")
    theta = loaded[net]
    if theta.spec.output_activation != "identity" or theta.spec.output_dim != 2:
        raise UsageError(f"{net!r} in {path} is not a 2D generator")
    return theta


def cmd_eval(args):
    theta = _load_generator(args.checkpoint, args.net)
    if args.n_samples < 1:
        raise UsageError("--n-samples must be >= 1")
    out = _fresh_dir(args.out)
    mixture = data.make_dataset(args.dataset)
    report = _eval_generator(theta, mixture, args.n_samples, args.seed, args.k_sigma,
                             args.bandwidth, args.resolution, out)
    write_manifest(out, "eval", [("checkpoint", args.checkpoint), ("dataset", args.dataset),
                                 ("n_samples", args.n_samples), ("seed", args.seed)])
    print(f"modes captured {report.modes_captured}/{len(mixture.centers)}, "
          f"high-quality ratio {report.high_quality_ratio:.3f}")
    return EXIT_OK


def cmd_interp(args):
    theta = _load_generator(args.checkpoint, args.net)
    if args.steps < 2:
        raise UsageError("--steps must be >= 2")
    out = _fresh_dir(args.out)
    rng = data.make_rng(args.seed, "eval")
    z = data.sample_noise(2, theta.spec.input_dim, rng)
    path = metrics.latent_interpolation(theta, z[0], z[1], args.steps)
    header = ["t"] + [f"z{i}" for i in range(z.shape[1])] + ["x", "y"]
    rows = []
    for i, point in enumerate(path):
        t = i / (args.steps - 1)
        zt = (1.0 - t) * z[0] + t * z[1]
        rows.append([repr(t)] + [repr(float(v)) for v in zt] + [repr(float(v)) for v in point])
    _write_rows(os.path.join(out, "interp.csv"), header, rows)
    write_manifest(out, "interp", [("checkpoint", args.checkpoint), ("seed", args.seed),
                                   ("steps", args.steps)])
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "train":
            return _train_like(args, baseline=False)
        if args.command == "baseline":
            return _train_like(args, baseline=True)
        if args.command == "eval":
            return cmd_eval(args)
        return cmd_interp(args)
    except (core.ConfigError, UsageError, data.DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Evaluation of trained generators: mode coverage, KDE grids, selection histograms."""
import csv
from collections import Counter
from dataclasses import dataclass

import numpy as np

from egan import nets

DEFAULT_BANDWIDTH = {"ring8": 0.1, "grid25": 0.15}
DEFAULT_EXTENT = (-6.0, 6.0, -6.0, 6.0)
DEFAULT_RESOLUTION = 128


@dataclass(frozen=True)
class ModeCoverageReport:
    modes_captured: int
    modes_any: int  # modes with at least one high-quality sample
    counts: tuple
    high_quality_ratio: float
    threshold: float
    n_samples: int


def mode_coverage(samples, mixture, k_sigma=3.0, share=0.2):
    """Count the mixture components a sample set covers.

    A sample is high quality when it lies within ``k_sigma * sigma`` of its
    nearest center. A mode is captured when it receives at least
    ``max(1, share * n / n_modes)`` high-quality samples.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2 or len(x) < 1:
        raise ValueError("samples must be a non-empty (n, d) array")
    if not k_sigma > 0:
        raise ValueError("k_sigma must be positive")
    centers = mixture.centers
    dist = np.sqrt(((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2))
    nearest = dist.argmin(axis=1)
    good = dist[np.arange(len(x)), nearest] <= k_sigma * mixture.sigma
    counts = np.bincount(nearest[good], minlength=len(centers))
    threshold = max(1.0, share * len(x) / len(centers))
    return ModeCoverageReport(
        modes_captured=int((counts >= threshold).sum()),
        modes_any=int((counts >= 1).sum()),
        counts=tuple(int(c) for c in counts),
        high_quality_ratio=float(good.mean()),
        threshold=threshold,
        n_samples=len(x),
    )


@dataclass(frozen=True)
class KdeGrid:
    xs: np.ndarray  # cell centers along x
    ys: np.ndarray
    density: np.ndarray  # shape (len(ys), len(xs))
    bandwidth: float
    extent: tuple

    @property
    def cell_area(self):
        x0, x1, y0, y1 = self.extent
        return (x1 - x0) / len(self.xs) * (y1 - y0) / len(self.ys)

    def mass(self):
        return float(self.density.sum() * self.cell_area)


def kde_grid(samples, bandwidth, extent=DEFAULT_EXTENT, resolution=DEFAULT_RESOLUTION, weights=None):
    """Gaussian-kernel density estimate at the cell centers of a regular grid."""
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    x = np.asarray(samples, dtype=np.float64)
    n = len(x)
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=np.float64) / np.sum(weights)
    x0, x1, y0, y1 = extent
    xs = x0 + (np.arange(resolution) + 0.5) * (x1 - x0) / resolution
    ys = y0 + (np.arange(resolution) + 0.5) * (y1 - y0) / resolution
    norm = 1.0 / (np.sqrt(2.0 * np.pi) * bandwidth)
    # The 2D isotropic kernel factorizes, so the grid is one matrix product.
    kx = norm * np.exp(-0.5 * ((xs[None, :] - x[:, 0:1]) / bandwidth) ** 2)
    ky = norm * np.exp(-0.5 * ((ys[None, :] - x[:, 1:2]) / bandwidth) ** 2)
    density = (ky * w[:, None]).T @ kx
    return KdeGrid(xs, ys, density, float(bandwidth), tuple(float(e) for e in extent))


@dataclass(frozen=True)
class OptimalDiscriminatorReport:
    searched: np.ndarray
    closed_form: np.ndarray
    max_deviation: float
    grid_step: float

    @property
    def ok(self):
        return self.max_deviation <= self.grid_step * (1 + 1e-9)


def optimal_discriminator_check(p_data, p_g, grid_step=1e-3):
    """Grid-search the per-point maximizer of p_data log D + p_g log(1 - D).

    Compares it with p_data / (p_data + p_g), clamped into the searched
    range. Points where both probabilities vanish are ignored.
    """
    pd = np.asarray(p_data, dtype=np.float64)
    pg = np.asarray(p_g, dtype=np.float64)
    if pd.shape != pg.shape or pd.ndim != 1:
        raise ValueError("distributions must be 1-D over the same support")
    for name, p in (("p_data", pd), ("p_g", pg)):
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"{name} is not a normalized distribution")
    grid = np.arange(1, int(round(1.0 / grid_step))) * grid_step
    live = (pd + pg) > 0
    objective = pd[:, None] * np.log(grid)[None, :] + pg[:, None] * np.log1p(-grid)[None, :]
    searched = grid[objective.argmax(axis=1)]
    closed = np.full_like(pd, 0.5)
    closed[live] = pd[live] / (pd[live] + pg[live])
    target = np.clip(closed, grid[0], grid[-1])
    dev = np.abs(searched - target)[live]
    return OptimalDiscriminatorReport(searched, closed, float(dev.max()) if dev.size else 0.0, grid_step)


@dataclass(frozen=True)
class MutationSelectionLog:
    window: int
    starts: tuple  # first step index of each window
    lengths: tuple
    counts: tuple  # one {mutation value: count} dict per window

    def totals(self):
        total = Counter()
        for c in self.counts:
            total.update(c)
        return dict(total)


def selection_histogram(logs, window):
    """Per-window counts of the surviving mutations of an evolution log."""
    if window < 1:
        raise ValueError("window must be >= 1")
    if window > len(logs):
        raise ValueError("window is longer than the run")
    starts, lengths, counts = [], [], []
    for start in range(0, len(logs), window):
        chunk = logs[start:start + window]
        c = Counter(m.value for entry in chunk for m in entry.selected)
        starts.append(start)
        lengths.append(len(chunk))
        counts.append(dict(c))
    return MutationSelectionLog(window, tuple(starts), tuple(lengths), tuple(counts))


def latent_interpolation(theta, z1, z2, steps):
    """Generator outputs along the straight line from ``z1`` to ``z2``.

    Rows are evaluated one at a time so the endpoints reproduce
    ``gen_forward`` on ``z1`` and ``z2`` bit for bit.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    z1 = np.asarray(z1, dtype=np.float64).reshape(-1)
    z2 = np.asarray(z2, dtype=np.float64).reshape(-1)
    if z1.shape != z2.shape or z1.shape[0] != theta.spec.input_dim:
        raise nets.StructuralError(f"latent vectors must have length {theta.spec.input_dim}")
    rows = []
    for i in range(steps):
        t = i / (steps - 1)
        z = (1.0 - t) * z1 + t * z2
        rows.append(nets.gen_forward(theta, z[None, :])[0])
    return np.array(rows)


# -- CSV output -----------------------------------------------------------------

def write_coverage_csv(path, report):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["modes_captured", "modes_any", "high_quality_ratio", "threshold", "n_samples"])
        out.writerow([report.modes_captured, report.modes_any, repr(report.high_quality_ratio),
                      repr(report.threshold), report.n_samples])
        out.writerow([])
        out.writerow(["mode", "count"])
        for i, c in enumerate(report.counts):
            out.writerow([i, c])


def write_kde_csv(path, grid):
    x0, x1, y0, y1 = grid.extent
    with open(path, "w", newline="") as fh:
        fh.write(f"# extent={x0},{x1},{y0},{y1} resolution={len(grid.xs)}x{len(grid.ys)} "
                 f"bandwidth={grid.bandwidth}\n")
        out = csv.writer(fh)
        out.writerow(["x", "y", "density"])
        for iy, y in enumerate(grid.ys):
            for ix, x in enumerate(grid.xs):
                out.writerow([repr(float(x)), repr(float(y)), repr(float(grid.density[iy, ix]))])


def write_histogram_csv(path, hist, tags=("minimax", "heuristic", "leastsq")):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["start", "length", *tags])
        for start, length, c in zip(hist.starts, hist.lengths, hist.counts):
            out.writerow([start, length, *(c.get(t, 0) for t in tags)])


def write_points_csv(path, points):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        for row in np.asarray(points):
            out.writerow([repr(float(v)) for v in row])

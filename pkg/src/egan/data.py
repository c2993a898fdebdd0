"""Target distributions, batch samplers and seeded random streams."""
from dataclasses import dataclass

import numpy as np

# Named sub-streams of the master seed. Each gets its own Philox key, so
# drawing more from one never shifts another.
STREAMS = ("init", "data", "noise", "fitness", "eval")


class DataError(ValueError):
    pass


def make_rng(seed, stream):
    """Counter-based generator for one named sub-stream of ``seed``."""
    if stream not in STREAMS:
        raise ValueError(f"unknown stream {stream!r}; expected one of {STREAMS}")
    seq = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=(STREAMS.index(stream),))
    return np.random.Generator(np.random.Philox(seq))


def make_streams(seed):
    return {name: make_rng(seed, name) for name in STREAMS}


@dataclass(frozen=True)
class GaussianMixture:
    """Uniformly weighted isotropic Gaussians sharing one standard deviation."""

    centers: np.ndarray
    sigma: float
    name: str = "mixture"

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] < 1:
            raise ValueError("a mixture needs at least one center")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "centers", c)

    @property
    def dim(self):
        return self.centers.shape[1]

    def sample(self, n, rng):
        if n < 1:
            raise ValueError("n must be >= 1")
        idx = rng.integers(0, len(self.centers), size=n)
        return self.centers[idx] + self.sigma * rng.standard_normal((n, self.dim))


def ring8(radius=2.0, sigma=0.02):
    angles = 2.0 * np.pi * np.arange(8) / 8
    centers = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return GaussianMixture(centers, sigma, "ring8")


def grid25(spacing=2.0, sigma=0.05):
    ticks = spacing * (np.arange(5) - 2)
    centers = np.array([(x, y) for x in ticks for y in ticks])
    return GaussianMixture(centers, sigma, "grid25")


class FileDataset:
    """2D points from a headerless CSV; batches are drawn uniformly with replacement."""

    def __init__(self, path):
        rows = []
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                parts = line.split(",")
                try:
                    if len(parts) != 2:
                        raise ValueError
                    rows.append((float(parts[0]), float(parts[1])))
                except ValueError:
                    raise DataError(f"{path}:{lineno}: expected two comma-separated numbers") from None
        if not rows:
            raise DataError(f"{path}: no data rows")
        self.points = np.array(rows)
        if not np.all(np.isfinite(self.points)):
            raise DataError(f"{path}: non-finite value")
        self.name = str(path)
        self.dim = 2

    def sample(self, n, rng):
        if n < 1:
            raise ValueError("n must be >= 1")
        return self.points[rng.integers(0, len(self.points), size=n)]


def sample(source, n, rng):
    return source.sample(n, rng)


def sample_noise(n, z_dim, rng):
    """Standard-normal latent batch of shape (n, z_dim)."""
    if n < 1 or z_dim < 1:
        raise ValueError("n and z_dim must be >= 1")
    return rng.standard_normal((n, z_dim))


def make_dataset(name, **overrides):
    """Build a data source by name: ``ring8``, ``grid25`` or ``file``."""
    if name == "ring8":
        return ring8(**overrides)
    if name == "grid25":
        return grid25(**overrides)
    if name == "file":
        return FileDataset(overrides["path"])
    raise ValueError(f"unknown dataset {name!r}")

"""Counter-based random streams keyed by (master seed, replication, stream).

Each replication draws from Philox streams addressed by a fixed integer
triple, so results never depend on execution order or worker count.  Normal
variates go through the package's own inverse CDF, keeping simulated panels
bit-identical across platforms.
"""

from __future__ import annotations

import numpy as np

from .stats import normal_quantile

# Fixed stream addresses; appending new ones keeps existing draws unchanged.
STREAMS = {
    "noise": 0,
    "covariates": 1,
    "group_effects": 2,
    "time_effects": 3,
    "interaction": 4,
    "unit_deviations": 5,
}

_TWO53 = 1 << 53


def stream(master_seed: int, rep_index: int, name: str) -> np.random.Generator:
    """Philox generator for one named stream of one replication."""
    key = np.random.SeedSequence((int(master_seed), int(rep_index), STREAMS[name]))
    return np.random.Generator(np.random.Philox(key))


def uniforms_open(gen: np.random.Generator, size) -> np.ndarray:
    """Uniform draws on the open interval (0, 1)."""
    return gen.integers(1, _TWO53, size=size).astype(float) / _TWO53


def normals(gen: np.random.Generator, size) -> np.ndarray:
    """Standard-normal draws via the shared inverse CDF."""
    return normal_quantile(uniforms_open(gen, size))

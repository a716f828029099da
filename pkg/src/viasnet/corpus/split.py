import math

import numpy as np

from ..errors import ConfigurationError, InvalidInputError


def split_counts(n_videos, test_fraction):
    if not 0.0 < test_fraction < 1.0:
        raise ConfigurationError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n_test = max(1, int(math.floor(n_videos * test_fraction + 1e-9)))
    return n_videos - n_test, n_test


def split_corpus(manifest, test_fraction, seed):
    """Assign whole videos to train/test; the test count is floor(n * fraction), at least 1."""
    ids = sorted(manifest.video_ids)
    if len(ids) < 2:
        raise InvalidInputError("need at least two videos to split")
    _, n_test = split_counts(len(ids), test_fraction)
    perm = np.random.default_rng([seed, 80_20]).permutation(len(ids))
    test = sorted(ids[i] for i in perm[:n_test])
    train = sorted(set(ids) - set(test))
    manifest.split = {"train": train, "test": test}
    return manifest

"""Synthetic benchmark: two elongated normal clusters plus uniform noise."""

import numpy as np

from .mvn import sample_mvnorm

CLUSTER_MEANS = ((2.0, 2.0), (-2.0, -2.0))
CLUSTER_SIGMA = ((5.0, 0.0), (0.0, 0.5))
CLUSTER_SIZE = 200
NOISE_SIZE = 20
NOISE_RANGE = (-20.0, 20.0)


def simulate_two_clusters(seed, cluster_size=CLUSTER_SIZE, noise_size=NOISE_SIZE):
    """Draw the benchmark data set.

    Returns
    -------
    X : ndarray, shape (2 * cluster_size + noise_size, 2)
    truth : ndarray of int
        1 and 2 for the clusters, 3 for the noise rows.
    """
    rng = np.random.default_rng(seed)
    sigma = np.array(CLUSTER_SIGMA)
    parts = [sample_mvnorm(cluster_size, mu, sigma, rng) for mu in CLUSTER_MEANS]
    parts.append(rng.uniform(*NOISE_RANGE, size=(noise_size, 2)))
    truth = np.repeat([1, 2, 3], [cluster_size, cluster_size, noise_size])
    return np.vstack(parts), truth

"""Seeded problem instances shared by several test modules."""

import numpy as np


def random_power(seed, n_max=6, rho_max=0.8):
    """Non-negative gain matrix with zero diagonal and ``rho(G) <= rho_max``."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, n_max + 1))
    G = rng.uniform(0, 1, (n, n))
    np.fill_diagonal(G, 0.0)
    rho = np.max(np.abs(np.linalg.eigvals(G)))
    if rho > 0:
        G *= rng.uniform(0.05, rho_max) / rho
    eta = rng.uniform(0.1, 2.0, n)
    return G, eta

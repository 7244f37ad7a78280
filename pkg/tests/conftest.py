"""Shared builders for seeded random test matrices."""
import numpy as np

from scbench.matrix import CountMatrix, from_dense


def random_dense(seed, n_cells, n_genes, density=0.4, max_count=20, rng=None):
    """Dense integer counts with roughly `density` nonzero entries."""
    if rng is None:
        rng = np.random.default_rng(seed)
    vals = rng.integers(1, max_count + 1, size=(n_cells, n_genes))
    mask = rng.random((n_cells, n_genes)) < density
    return (vals * mask).astype(np.int64)


def random_matrix(seed, n_cells, n_genes, density=0.4, max_count=20) -> CountMatrix:
    return from_dense(random_dense(seed, n_cells, n_genes, density, max_count))

import numpy as np
import pytest

from slda.model import Dataset, PopulationSpec


def random_spd(rng, p, eig_lo=0.5, eig_hi=2.0):
    """SPD matrix with eigenvalues uniform in [eig_lo, eig_hi]."""
    q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    eigs = rng.uniform(eig_lo, eig_hi, p)
    return (q * eigs) @ q.T


def random_population(rng, p, eig_lo=0.5, eig_hi=2.0, delta_scale=1.0):
    sigma = random_spd(rng, p, eig_lo, eig_hi)
    delta = rng.standard_normal(p) * delta_scale
    mu2 = rng.standard_normal(p)
    return PopulationSpec(means=np.vstack([mu2 + delta, mu2]), covariance=sigma)


def two_class_dataset(x1, x2):
    """Dataset from two feature blocks (class 1 rows, then class 2 rows)."""
    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    x2 = np.atleast_2d(np.asarray(x2, dtype=float))
    features = np.vstack([x1, x2])
    labels = np.concatenate([np.ones(len(x1), dtype=int), np.full(len(x2), 2, dtype=int)])
    return Dataset(features=features, labels=labels,
                   class_counts=(len(x1), len(x2)))


@pytest.fixture
def rng():
    return np.random.default_rng(20231101)

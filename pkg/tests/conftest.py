import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_orthogonal(rng, d):
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def make_spd(rng, d, cond=100.0, scale=1.0):
    """Random SPD matrix with eigenvalues log-spaced within the given condition number."""
    q = random_orthogonal(rng, d)
    vals = np.exp(np.linspace(0.0, np.log(cond), d)) / cond * scale
    return (q * vals) @ q.T


def make_symmetric(rng, d, scale=1.0):
    a = rng.standard_normal((d, d)) * scale
    return (a + a.T) / 2.0

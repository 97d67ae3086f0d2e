import numpy as np
import pytest

from blockgibbs import Dims, anti_example_pmf, random_pmf, seeded_corpus


@pytest.fixture(scope="session")
def corpus():
    """The fixed 50-member seeded pmf corpus (dims cycle 2x2x2, 3x2x2,
    3x3x3, 4x4x4; floor 0.005; seed = index)."""
    return seeded_corpus()


@pytest.fixture()
def anti_pmf():
    """2x2x1 counterexample pmf [[0.4, 0.1], [0.1, 0.4]]."""
    return anti_example_pmf()


@pytest.fixture()
def pmf_322():
    return random_pmf(Dims(3, 2, 2), seed=7, floor=0.005)


@pytest.fixture()
def product_222():
    from blockgibbs import product_pmf

    return product_pmf([0.3, 0.7], [0.6, 0.4], [0.25, 0.75])


def stationary_by_eig(matrix: np.ndarray) -> np.ndarray:
    """Left unit-eigenvector oracle, independent of the package's
    least-squares stationary solver."""
    evals, evecs = np.linalg.eig(matrix.T)
    v = np.real(evecs[:, np.argmin(np.abs(evals - 1.0))])
    return v / v.sum()

import numpy as np
import pytest

from smiselect.kernel import EmbeddingSet


def joint_kernel(rng, n, q, d=None, ridge=0.0):
    """Nonnegative PSD kernel over ground + query items, split into blocks.

    Rows are unit vectors with nonnegative coordinates, so every entry of the
    Gram matrix is a cosine in [0, 1].
    """
    d = d or int(rng.integers(2, 6))
    x = np.abs(rng.normal(size=(n + q, d)))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    j = x @ x.T + ridge * np.eye(n + q)
    return j, j[:n, :n], j[:n, n:], j[n:, n:]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_embeddings(rng):
    return EmbeddingSet(rng.normal(size=(7, 4)), rng.integers(0, 3, size=7), num_classes=3)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)

import numpy as np
import pytest

from priceopt import GenConfig, Instance, generate, with_k


def two_product_instance(coupling: float = 0.0, k: int = 1) -> Instance:
    """Two-product instance with S = [[2, -a], [-a, 2]], f = [6, 1].

    Baseline at the origin, thresholds 0.5.  Costs are set to 1 and the
    demand intercept derived so that a + D^T c = [6, 1] exactly.
    """
    D = np.array([[1.0, -coupling / 2.0], [-coupling / 2.0, 1.0]])
    c = np.array([1.0, 1.0])
    f = np.array([6.0, 1.0])
    a = f - D.T @ c
    return Instance(
        n=2, k=k, a=a, D=D, c=c, p0=np.zeros(2), delta=np.array([0.5, 0.5])
    )


def random_instance(
    rng: np.random.Generator,
    n_lo: int = 2,
    n_hi: int = 8,
    k: int | None = None,
    bounded: bool | None = None,
) -> Instance:
    """Small random instance drawn through the generator recipe."""
    n = int(rng.integers(n_lo, n_hi + 1))
    if k is None:
        k = int(rng.integers(1, n + 1))
    if bounded is None:
        bounded = bool(rng.random() < 0.5)
    cfg = GenConfig(
        n=n,
        delta_mode=("const", float(rng.uniform(0.2, 1.2))),
        bounds_mode=(1.0, 5.0, 8.0, 14.0) if bounded else None,
        seed=int(rng.integers(0, 2**31)),
    )
    return with_k(generate(cfg), k)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240811)

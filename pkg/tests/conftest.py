import numpy as np
import pytest
from hypothesis import strategies as st

from cvcz.gaussian_core import GaussianState


def random_symplectic(n_modes: int, rng: np.random.Generator) -> np.ndarray:
    """Passive unitary, single-mode squeezers, then another passive unitary."""
    from cvcz.optics import passive_from_unitary

    def haar(n):
        z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
        q, r = np.linalg.qr(z)
        return q * (np.diag(r) / np.abs(np.diag(r)))

    rs = rng.uniform(-1.0, 1.0, n_modes)
    squeeze = np.diag(np.ravel(np.column_stack([np.exp(rs), np.exp(-rs)])))
    return passive_from_unitary(haar(n_modes)) @ squeeze @ passive_from_unitary(haar(n_modes))


def random_state(modes, rng, thermal=True) -> GaussianState:
    n = len(modes)
    s = random_symplectic(n, rng)
    nu = rng.uniform(1.0, 3.0, n) if thermal else np.ones(n)
    cov = 0.25 * s @ np.diag(np.repeat(nu, 2)) @ s.T
    return GaussianState(tuple(modes), rng.normal(0.0, 2.0, 2 * n), cov)


seeds = st.integers(min_value=0, max_value=2**32 - 1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

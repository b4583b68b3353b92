import numpy as np
import pytest

from specgrowth import (
    BandedHermitian,
    EigenLadder,
    PropagationStrategy,
    SpectralModel,
    build_halfwave,
    build_harmonic,
    build_zoll_surrogate,
    cosine_potential,
)

DELTA = 0.25
EPSILON = 0.25


@pytest.fixture(scope="session")
def harmonic64():
    return build_harmonic(64, DELTA)


@pytest.fixture(scope="session")
def halfwave32():
    return build_halfwave(32, 0.5, cosine_potential(EPSILON))


@pytest.fixture(scope="session")
def zoll32():
    return build_zoll_surrogate(32, 1.0, cosine_potential(EPSILON))


@pytest.fixture(scope="session")
def all_models(harmonic64, halfwave32, zoll32):
    return {"harmonic": harmonic64, "halfwave": halfwave32, "zoll-surrogate": zoll32}


def make_diagonal_stub(n=32, coupling_diag=None):
    """A model whose coupling commutes with the ladder (no growth)."""
    ladder = EigenLadder(np.arange(n) + 0.5, exact_gaps=True)
    diag = np.zeros(n) if coupling_diag is None else np.asarray(coupling_diag, float)
    coupling = BandedHermitian(n, {0: diag})
    return SpectralModel(
        name="stub",
        ladder=ladder,
        coupling=coupling,
        strategy=PropagationStrategy.DENSE,
        lambda_shift=0.5,
    )


def random_unit_state(model, seed=0):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=model.n_modes) + 1j * rng.normal(size=model.n_modes)
    return model.state(c / np.linalg.norm(c))

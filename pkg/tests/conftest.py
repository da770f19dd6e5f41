import numpy as np
import pytest

from treatfair.estimators import EstimatorConfig, fit
from treatfair.synth import SynthConfig, build_oracle, generate

SEED = 218


@pytest.fixture(scope="session")
def balanced():
    """5000-row balanced synthetic data with its generating model."""
    config = SynthConfig(seed=SEED)
    return generate(config), build_oracle(config)


@pytest.fixture(scope="session")
def unbalanced():
    """delta=2 configuration with the deterministic outcome variant."""
    config = SynthConfig(seed=SEED, delta=2.0, outcome_variant="deterministic")
    return generate(config), build_oracle(config)


@pytest.fixture(scope="session")
def unbalanced_noisy():
    """delta=2 configuration keeping the noisy outcome (risk-score runs)."""
    config = SynthConfig(seed=SEED, delta=2.0)
    return generate(config), build_oracle(config)


@pytest.fixture(scope="session")
def small():
    """600-row balanced sample for tests that only need shape, not precision."""
    config = SynthConfig(seed=41, n=600)
    return generate(config), build_oracle(config)


@pytest.fixture(scope="session")
def fitted_model(balanced):
    data, _ = balanced
    return fit(data, data.schema, EstimatorConfig())


@pytest.fixture()
def rng():
    return np.random.default_rng(0)

import numpy as np
import pytest

import sparse_isac as si


@pytest.fixture
def desk_params():
    return si.OfdmParams(
        n_subcarriers=256,
        n_symbols=32,
        subcarrier_spacing_hz=120e3,
        carrier_freq_hz=24e9,
    )


@pytest.fixture
def small_params():
    return si.OfdmParams(
        n_subcarriers=32,
        n_symbols=4,
        subcarrier_spacing_hz=120e3,
        carrier_freq_hz=24e9,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)

import numpy as np
import pytest

from tlsphonon import PhononMode, get_preset
from tlsphonon.constants import TWO_PI


@pytest.fixture(scope="session")
def ge_doped():
    return get_preset("ge-doped-silica-44wt")


@pytest.fixture(scope="session")
def vitreous():
    return get_preset("vitreous-silica")


@pytest.fixture(scope="session")
def probe_mode(ge_doped):
    material, _ = ge_doped
    return PhononMode.in_material(material, TWO_PI * 9.188e9, "L")


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)

import numpy as np
import pytest

from phaseilt.analysis import TargetPattern
from phaseilt.forward_model import intensity_only
from phaseilt.optics import GridSpec, OpticalSystem, build_tcc, decompose_socs


@pytest.fixture(scope="session")
def paper_optics():
    return OpticalSystem(193.0, 1.0, 0.067)


@pytest.fixture(scope="session")
def tcc8(paper_optics):
    return build_tcc(paper_optics, GridSpec(8, 25.0))


@pytest.fixture(scope="session")
def model8(tcc8):
    return decompose_socs(tcc8, 10)


@pytest.fixture(scope="session")
def model16(paper_optics):
    return decompose_socs(build_tcc(paper_optics, GridSpec(16, 25.0)), 10)


@pytest.fixture(scope="session")
def u16():
    return np.random.default_rng(20240611).uniform(0.1, 0.9, (16, 16))


@pytest.fixture(scope="session")
def norm16(model16, u16):
    """``model16`` scaled so the median intensity of ``u16`` is exactly 1."""
    return model16.rescaled(1.0 / float(np.median(intensity_only(model16, u16))))


@pytest.fixture(scope="session")
def target16(model16):
    chi = np.zeros((16, 16))
    chi[4:12, 5:11] = 1.0
    return TargetPattern.from_indicator(model16.grid, chi)


def rel_err(a, b):
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(np.asarray(b)))

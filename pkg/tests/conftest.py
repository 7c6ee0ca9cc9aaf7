import numpy as np
import pytest

from abl_lab import qcore
from abl_lab.ablengine import Protocol

SQ2 = np.sqrt(0.5)

# Spin-1/2 eigenvectors written out by hand (independent of the eigensolver).
Z_PLUS = np.array([1, 0], dtype=complex)
Z_MINUS = np.array([0, 1], dtype=complex)
X_PLUS = np.array([SQ2, SQ2], dtype=complex)
X_MINUS = np.array([SQ2, -SQ2], dtype=complex)
Y_PLUS = np.array([SQ2, 1j * SQ2], dtype=complex)
Y_MINUS = np.array([SQ2, -1j * SQ2], dtype=complex)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@pytest.fixture(scope="session")
def pauli():
    return {k: qcore.builtin_observable(f"pauli_{k}") for k in "xyz"}


@pytest.fixture(scope="session")
def spin_protocol(pauli):
    """Prepare z+, measure x then y, post-select z-."""
    return Protocol(pauli["z"], "z+", (pauli["x"], pauli["y"]), pauli["z"], "z-")


@pytest.fixture(scope="session")
def aad_xx(pauli):
    return Protocol(pauli["z"], "z+", (pauli["x"],), pauli["x"], "x+")


@pytest.fixture(scope="session")
def aad_zz(pauli):
    return Protocol(pauli["z"], "z+", (pauli["z"],), pauli["x"], "x+")

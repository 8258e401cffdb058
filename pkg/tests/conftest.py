"""
Shared fixtures for the rabitherm test suite
"""

import json
import os

import numpy as np
import pytest

os.environ.setdefault('RABITHERM_ENV', 'testing')

from rabitherm.services import model as model_service  # noqa: E402


def two_band_coupling(scale=1.0):
    """2 x 4 coupling with singular values (1, 0.6) * scale and fixed complex singular vectors"""
    angle = 0.4
    u = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]], dtype=complex)
    v = np.array([[1, 1, 1, 1], [1, -1, 1j, -1j]], dtype=complex).T / 2.0
    return scale * (u @ np.diag([1.0, 0.6]) @ v.conj().T)


@pytest.fixture
def two_band_model():
    """D_g = 2, D_e = 4, omega_a = 0.2, epsilon = 0.1 omega_a, lambda_1 = 1"""
    return model_service.build_model(
        1.0, 0.2, 0.02, [-0.5, 0.5], [-1.0, -0.3, 0.3, 1.0], two_band_coupling()
    )


@pytest.fixture
def even_detuning_model():
    """two_band_model with evenly spread detunings: delta_g = (-1, 1), delta_e = (-1, -1/3, 1/3, 1)"""
    return model_service.build_model(
        1.0, 0.2, 0.02, [-1.0, 1.0], [-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0], two_band_coupling()
    )


@pytest.fixture
def qrm_model():
    """Single ground / single excited level coupled with strength g"""
    def build(g, omega_a=0.05):
        return model_service.build_model(1.0, omega_a, 0.0, [0.0], [0.0], [[g]])
    return build


@pytest.fixture
def write_model(tmp_path):
    def write(model, name='model.json'):
        path = tmp_path / name
        path.write_text(json.dumps(model.to_document()))
        return path
    return write

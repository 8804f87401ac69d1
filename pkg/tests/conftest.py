"""Shared test fixtures: tiny custom drift models and noise specs."""

import numpy as np
import pytest

from levylse import DriftModel, LevySpec


def constant_drift_model(box=((-10.0, 10.0),)):
    """b(x, theta) = theta.  Gradient is identically 1."""
    return DriftModel(
        dim_x=1,
        dim_theta=1,
        theta_box=box,
        b=lambda x, th: np.full_like(np.asarray(x, dtype=float), th[0]),
        grad_theta_b=lambda x, th: np.ones_like(np.asarray(x, dtype=float)),
        lipschitz_K=1.0,
        vectorized=True,
    )


def quadratic_drift_model():
    """b(x, theta) = theta * x^2; explodes in finite time from x0 = 2."""
    return DriftModel(
        dim_x=1,
        dim_theta=1,
        theta_box=((0.5, 2.0),),
        b=lambda x, th: th[0] * np.asarray(x, dtype=float) ** 2,
        grad_theta_b=lambda x, th: np.asarray(x, dtype=float) ** 2,
        vectorized=True,
    )


@pytest.fixture
def brownian_1d():
    return LevySpec(a=0.0, sigma=1.0, jump_part=(), dim=1)


@pytest.fixture
def zero_noise_1d():
    return LevySpec(a=0.0, sigma=0.0, jump_part=(), dim=1)

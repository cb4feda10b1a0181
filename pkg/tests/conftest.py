import numpy as np
import pytest

from fpcontrol.grid import Grid4D
from fpcontrol.model import DimensionalParams, NonDimParams, ScalingConstants

# Base rate set shared by the bundled demonstration scenarios.
BASE_NONDIM = dict(
    a=1.9, b=0.25, c=0.05, e=0.2, f=0.2, p=1e9, m=0.05, j=0.1,
    k=0.5, q=5e7, r1=0.1, r2=0.1, alpha=0.1, beta=0.1,
    alpha1=0.8, alpha2=0.02, alpha3=0.02, alpha4=0.02,
    beta_n=5.0, beta_l=5.0,
)

PAPER_SCALING = ScalingConstants(k1=1e-10, k2=1e-5, k3=1e-7, k4=1e-8, k5=1.0)


def weak_patient(ratio_tl=1e-3) -> NonDimParams:
    return NonDimParams(d=1.3, l=2.0, s=10.0, ratio_tl=ratio_tl, **BASE_NONDIM)


def strong_patient(ratio_tl=1e-3) -> NonDimParams:
    return NonDimParams(d=2.1, l=1.1, s=1.25, ratio_tl=ratio_tl, **BASE_NONDIM)


def zero_drift_params() -> NonDimParams:
    zeros = {key: 0.0 for key in BASE_NONDIM}
    zeros["b"] = 1.0
    zeros["k"] = 1.0
    return NonDimParams(d=0.0, l=1.0, s=1.0, **zeros)


def sample_dimensional() -> DimensionalParams:
    return DimensionalParams(
        a=1.9, b=2.5e-11, c=5.0e-7, d=1.3, e=2.0e-4, f=0.2, p=1.0e-11,
        m=0.05, j=0.1, k=5.0e9, q=5.0e-11, r1=1.0e-9, r2=1.0e-12,
        s=0.04, l=2.0, alpha=1.0e7, beta=0.1,
        alpha1=0.8, alpha2=0.02, alpha3=0.02, alpha4=0.02,
        beta_n=5.0, beta_l=5.0,
    )


@pytest.fixture
def small_grid() -> Grid4D:
    return Grid4D.cube(0.0, 6.0, 9)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240911)

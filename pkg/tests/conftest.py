import pytest

from spatial_logistic.kernels import ModelParams, make_gaussian_kernel


def gaussian_params(dim, sigma=1.0, m=0.5, kp=1.0, km=1.0, sigma_minus=None):
    return ModelParams(
        make_gaussian_kernel(dim, sigma, kp),
        make_gaussian_kernel(dim, sigma if sigma_minus is None else sigma_minus, km),
        m,
    )


@pytest.fixture(params=[1, 2, 3], ids=lambda d: f"d{d}")
def default_params(request):
    """Gaussian a+ = a-, sigma = 1, kappa+- = 1, m = 0.5."""
    return gaussian_params(request.param)

import numpy as np
import pytest

from dppdyn.kernel import Kernel, KernelSpec, SiteSpace, build_kernel
from dppdyn.rates import RateSpec

A2_MATRIX = [[2.0, 0.5], [0.5, 2.0]]


def make_complex_circulant(n, coupling):
    """Hermitian circulant: diag 2 with nearest-neighbor complex coupling."""
    a = 2.0 * np.eye(n, dtype=complex)
    for x in range(n):
        a[x, (x + 1) % n] += coupling
        a[(x + 1) % n, x] += np.conj(coupling)
    return a


def random_dd_kernel(n, seed, scale=0.08, diag=4.0, complex_entries=False):
    """Random diagonally dominant Hermitian kernel for property tests."""
    rng = np.random.default_rng(seed)
    noise = rng.normal(size=(n, n)) * scale
    if complex_entries:
        noise = noise + 1j * rng.normal(size=(n, n)) * scale
    a = (noise + noise.conj().T) / 2
    np.fill_diagonal(a, diag)
    return Kernel(a, SiteSpace(n))


@pytest.fixture(scope="session")
def a2():
    return build_kernel(KernelSpec.explicit(A2_MATRIX), SiteSpace(2))


@pytest.fixture(scope="session")
def diag4():
    return build_kernel(KernelSpec.scalar(1.5), SiteSpace.ring(4))


@pytest.fixture(scope="session")
def torus6():
    return build_kernel(KernelSpec.torus_convolution(1.0, {1: 0.2}), SiteSpace.ring(6))


@pytest.fixture(scope="session")
def torus8():
    return build_kernel(KernelSpec.torus_convolution(1.0, {1: 0.2}), SiteSpace.ring(8))


@pytest.fixture(scope="session")
def torus10():
    return build_kernel(KernelSpec.torus_convolution(1.0, {1: 0.2}), SiteSpace.ring(10))


@pytest.fixture(scope="session")
def torus12():
    return build_kernel(KernelSpec.torus_convolution(1.0, {1: 0.2}), SiteSpace.ring(12))


@pytest.fixture(scope="session")
def ring64():
    return build_kernel(KernelSpec.torus_convolution(1.0, {1: 0.2}), SiteSpace.ring(64))


@pytest.fixture(scope="session")
def complex4():
    return build_kernel(
        KernelSpec.explicit(make_complex_circulant(4, 0.15 + 0.2j)), SiteSpace(4)
    )


@pytest.fixture(scope="session")
def complex6():
    return build_kernel(
        KernelSpec.explicit(make_complex_circulant(6, 0.15 + 0.2j)), SiteSpace(6)
    )


@pytest.fixture(scope="session")
def nn_weights8():
    return RateSpec.nearest_neighbor(SiteSpace.ring(8), t=0.5)

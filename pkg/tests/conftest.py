import numpy as np
import pytest

from qhjm.fixtures import SIGMA2, SIGMA3, SIGMA4, rho2, rho4


@pytest.fixture(scope="session")
def rho2_matrix():
    return rho2()


@pytest.fixture(scope="session")
def rho4_matrix():
    return rho4()


@pytest.fixture(scope="session")
def oracle2(rho2_matrix):
    """Independent eigendecomposition of the 2x2 fixture (numpy, not ours)."""
    return _numpy_oracle(rho2_matrix)


@pytest.fixture(scope="session")
def oracle4(rho4_matrix):
    return _numpy_oracle(rho4_matrix)


def _numpy_oracle(mat):
    vals, vecs = np.linalg.eigh(mat)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    for j in range(vecs.shape[1]):
        k = int(np.argmax(np.abs(vecs[:, j])))
        if vecs[k, j].real < 0:
            vecs[:, j] = -vecs[:, j]
    return vals, vecs


def random_hermitian(dim, rng):
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (x + x.conj().T) / 2


def random_unitary(dim, rng):
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(x)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def phase_kernel(lam, y_value, n_bits):
    """Analytic phase-estimation filter amplitude g_y(lambda)."""
    m = 2**n_bits
    ks = np.arange(m)
    return np.sum(np.exp(2j * np.pi * ks * (lam - y_value))) / m


def filtered_state(mat, b0, n_bits, bitstring):
    """Brute-force expected post-projection state from the numpy oracle."""
    vals, vecs = _numpy_oracle(mat)
    y_value = int(bitstring, 2) / 2**n_bits
    betas = vecs.conj().T @ np.asarray(b0, dtype=complex)
    amps = np.array([phase_kernel(lam, y_value, n_bits) for lam in vals])
    raw = vecs @ (betas * amps)
    prob = float(np.sum(np.abs(raw) ** 2))
    return raw / np.sqrt(prob), prob

import numpy as np
import pytest

from qhjm.errors import ValidationError
from qhjm.fixtures import SIGMA2, SIGMA3, SIGMA4
from qhjm.linalg import (
    SpectralDecomposition,
    eigh,
    expm_unitary,
    normalize_to_density,
    require_hermitian,
)

from conftest import random_hermitian


class TestEigh:
    def test_rho2_reference_values(self, rho2_matrix):
        dec = eigh(rho2_matrix)
        assert dec.eigenvalues == pytest.approx([0.8576, 0.1424], abs=1e-3)
        assert dec.eigenvectors[:, 0].real == pytest.approx([0.8347, 0.5508], abs=1e-3)

    def test_rho4_reference_values(self, rho4_matrix):
        dec = eigh(rho4_matrix)
        assert dec.eigenvalues == pytest.approx([0.800, 0.169, 0.031, 0.000], abs=1e-3)
        assert dec.eigenvectors[:, 0].real == pytest.approx(
            [0.669, 0.516, 0.536, 0.000], abs=1e-3
        )

    def test_identity_over_two(self):
        dec = eigh(np.eye(2) / 2)
        assert dec.eigenvalues == pytest.approx([0.5, 0.5])
        gram = dec.eigenvectors.conj().T @ dec.eigenvectors
        assert np.allclose(gram, np.eye(2), atol=1e-12)
        assert dec.near_degenerate == ((0, 1),)

    @pytest.mark.parametrize("dim", range(2, 9))
    def test_reconstruction_round_trip(self, dim):
        rng = np.random.default_rng(100 + dim)
        for _ in range(5):
            a = random_hermitian(dim, rng)
            dec = eigh(a)
            err = np.linalg.norm(dec.reconstruct() - a)
            assert err <= 1e-10 * np.linalg.norm(a)

    @pytest.mark.parametrize("dim", [2, 3, 5, 8])
    def test_orthonormal_eigenvectors(self, dim):
        rng = np.random.default_rng(dim)
        a = random_hermitian(dim, rng)
        dec = eigh(a)
        v = dec.eigenvectors
        assert np.abs(np.linalg.norm(v, axis=0) - 1.0).max() <= 1e-12
        off = v.conj().T @ v - np.eye(dim)
        assert np.abs(off).max() <= 1e-10

    def test_phase_convention(self):
        rng = np.random.default_rng(7)
        a = random_hermitian(5, rng)
        dec = eigh(a)
        for j in range(5):
            k = int(np.argmax(np.abs(dec.eigenvectors[:, j])))
            pivot = dec.eigenvectors[k, j]
            assert pivot.imag == pytest.approx(0.0, abs=1e-12)
            assert pivot.real >= 0.0

    def test_matches_numpy_eigenvalues(self):
        rng = np.random.default_rng(42)
        for dim in (2, 4, 7):
            a = random_hermitian(dim, rng)
            ours = eigh(a).eigenvalues
            ref = np.sort(np.linalg.eigvalsh(a))[::-1]
            assert np.allclose(ours, ref, atol=1e-10)

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValidationError):
            eigh(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_rejects_non_square_and_nonfinite(self):
        with pytest.raises(ValidationError):
            require_hermitian(np.zeros((2, 3)))
        bad = np.array([[np.inf, 0.0], [0.0, 1.0]])
        with pytest.raises(ValidationError):
            require_hermitian(bad)


class TestNormalizeToDensity:
    def test_sigma2_gives_rho2(self):
        rho = normalize_to_density(SIGMA2)
        expected = np.array([[0.6407, 0.3288], [0.3288, 0.3593]])
        assert np.abs(rho - expected).max() <= 1e-4

    def test_sigma4_padding_entry(self):
        rho = normalize_to_density(SIGMA4)
        assert rho[0, 0] == pytest.approx(0.4489, abs=1e-4)
        assert float(np.trace(rho).real) == pytest.approx(1.0, abs=1e-12)
        # exact zero eigenvalue from the padding row is admitted
        assert eigh(rho).eigenvalues.min() >= -1e-10

    def test_scaling_invariance(self):
        assert np.allclose(normalize_to_density(2.0 * np.eye(2)), np.eye(2) / 2)

    def test_rejects_nonpositive_trace(self):
        with pytest.raises(ValidationError):
            normalize_to_density(np.diag([1.0, -1.0]))

    def test_rejects_indefinite(self):
        with pytest.raises(ValidationError):
            normalize_to_density(np.diag([2.0, -0.5]))

    def test_preserves_leading_eigenvector(self):
        rng = np.random.default_rng(3)
        a = random_hermitian(4, rng)
        a = a @ a.conj().T + 0.1 * np.eye(4)  # PSD
        v_raw = eigh(a).eigenvectors[:, 0]
        v_rho = eigh(normalize_to_density(a)).eigenvectors[:, 0]
        assert abs(np.vdot(v_raw, v_rho)) == pytest.approx(1.0, abs=1e-10)


class TestExpmUnitary:
    def test_rho2_evolution_matches_reference(self, rho2_matrix):
        u = expm_unitary(rho2_matrix, 2 * np.pi)
        expected = np.array(
            [[0.6260 - 0.3068j, -0.7170j], [-0.7170j, 0.6260 + 0.3068j]]
        )
        assert np.abs(u - expected).max() <= 1e-3

    def test_rho4_corner_entry(self, rho4_matrix):
        u = expm_unitary(rho4_matrix, 2 * np.pi)
        assert u[0, 0] == pytest.approx(0.415 + 0.048j, abs=1e-3)

    def test_time_zero_is_identity(self):
        rng = np.random.default_rng(1)
        h = random_hermitian(4, rng)
        assert np.allclose(expm_unitary(h, 0.0), np.eye(4), atol=1e-12)

    @pytest.mark.parametrize("dim", [2, 4])
    def test_unitarity_and_inverse(self, dim):
        rng = np.random.default_rng(dim + 10)
        h = random_hermitian(dim, rng)
        u = expm_unitary(h, 1.3)
        assert np.abs(u @ u.conj().T - np.eye(dim)).max() <= 1e-10
        v = expm_unitary(h, -1.3)
        assert np.abs(u @ v - np.eye(dim)).max() <= 1e-10

    def test_time_additivity(self):
        rng = np.random.default_rng(17)
        h = random_hermitian(3, rng)
        lhs = expm_unitary(h, 0.7 + 0.9)
        rhs = expm_unitary(h, 0.7) @ expm_unitary(h, 0.9)
        assert np.abs(lhs - rhs).max() <= 1e-10


def test_spectral_decomposition_is_frozen(rho2_matrix):
    dec = eigh(rho2_matrix)
    assert isinstance(dec, SpectralDecomposition)
    with pytest.raises(AttributeError):
        dec.eigenvalues = None

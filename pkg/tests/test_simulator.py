import itertools

import numpy as np
import pytest

from qhjm.circuits import Circuit, GateOp, inverse_qft_ops
from qhjm.errors import DegenerateProjectionError, ValidationError
from qhjm.linalg import expm_unitary
from qhjm.simulator import (
    NoiseModel,
    apply_matrix,
    basis_state,
    fidelity,
    project_register,
    register_probabilities,
    run_circuit,
    run_trajectories,
    sample_shots,
)

from conftest import filtered_state

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_PAULIS = [
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
]


def qpe_circuit(u, n_bits, n_targets):
    """Same layout the extraction pipeline builds, assembled by hand."""
    n = n_bits + n_targets
    targets = tuple(range(n_bits, n))
    gates = [GateOp("h", (q,)) for q in range(n_bits)]
    for q in range(n_bits):
        gates.append(
            GateOp("cu", (q,) + targets, matrix=np.linalg.matrix_power(u, 2**q))
        )
    gates += inverse_qft_ops(range(n_bits))
    return Circuit(n, gates, {"eigenvalue": range(n_bits), "eigenvector": targets})


class TestRunCircuit:
    def test_hadamard_on_zero(self):
        c = Circuit(1, (GateOp("h", (0,)),))
        out = run_circuit(c, basis_state(1))
        assert np.allclose(out, np.array([1, 1]) / np.sqrt(2))

    def test_dimension_mismatch_rejected(self):
        c = Circuit(2, (GateOp("h", (0,)),))
        with pytest.raises(ValidationError):
            run_circuit(c, basis_state(1))

    def test_norm_preserved_random_circuits(self):
        rng = np.random.default_rng(8)
        for n in (2, 3, 4):
            gates = []
            for _ in range(12):
                q = int(rng.integers(n))
                theta = rng.uniform(0, 2 * np.pi)
                mat = np.array(
                    [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]],
                    dtype=complex,
                )
                gates.append(GateOp("u", (q,), matrix=mat))
                q2 = int(rng.integers(n))
                if q2 != q:
                    gates.append(GateOp("cx", (q, q2)))
            c = Circuit(n, gates)
            out = run_circuit(c, basis_state(n))
            assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-10)

    def test_noise_trajectory_preserves_norm(self):
        c = Circuit(2, (GateOp("h", (0,)), GateOp("cx", (0, 1))))
        out = run_circuit(c, basis_state(2), noise=NoiseModel(1.0, seed=5))
        assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-10)

    def test_projection_filter_matches_oracle_2x2(self, rho2_matrix, oracle2):
        u = expm_unitary(rho2_matrix, 2 * np.pi)
        c = qpe_circuit(u, 2, 1)
        b0 = np.array([1, 1], dtype=complex) / np.sqrt(2)
        out = run_circuit(c, np.kron(basis_state(2), b0))
        sub, prob = project_register(out, c.register("eigenvalue"), "11")
        assert fidelity(sub, oracle2[1][:, 0]) >= 0.99
        # frozen brute-force values for this input
        assert np.abs(sub) == pytest.approx([0.79723, 0.60367], abs=1e-4)
        assert prob == pytest.approx(0.52213, abs=1e-4)

    def test_full_depolarization_approaches_uniform(self, rho2_matrix):
        u = expm_unitary(rho2_matrix, 2 * np.pi)
        c = qpe_circuit(u, 2, 1)
        b0 = np.array([1, 1], dtype=complex) / np.sqrt(2)
        mean_probs, counts = run_trajectories(
            c, np.kron(basis_state(2), b0), NoiseModel(1.0, seed=2), 20000, seed=2
        )
        freqs = counts / counts.sum()
        tv = 0.5 * np.sum(np.abs(freqs - 1.0 / 8.0))
        assert tv <= 0.05
        assert 0.5 * np.sum(np.abs(mean_probs - 1.0 / 8.0)) <= 0.05


class TestExactPhaseReadout:
    @pytest.mark.parametrize(
        "phase,n_bits,expected",
        [(0.75, 2, "11"), (0.25, 2, "01"), (0.875, 3, "111"), (0.375, 3, "011")],
    )
    def test_exact_phase_certainty(self, phase, n_bits, expected):
        u = np.diag([1.0, np.exp(2j * np.pi * phase)])
        c = qpe_circuit(u, n_bits, 1)
        inp = np.kron(basis_state(n_bits), np.array([0, 1], dtype=complex))
        out = run_circuit(c, inp)
        probs = register_probabilities(out, c.register("eigenvalue"))
        assert probs[int(expected, 2)] == pytest.approx(1.0, abs=1e-10)


class TestProjectRegister:
    def test_product_state_projection(self):
        psi = np.kron(basis_state(2, 0b11), np.array([0.6, 0.8], dtype=complex))
        sub, prob = project_register(psi, (0, 1), "11")
        assert prob == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(sub, [0.6, 0.8])

    def test_probabilities_partition_unity(self, rho2_matrix):
        u = expm_unitary(rho2_matrix, 2 * np.pi)
        c = qpe_circuit(u, 2, 1)
        out = run_circuit(c, np.kron(basis_state(2), np.array([1, 1]) / np.sqrt(2)))
        total = 0.0
        for bits in ("00", "01", "10", "11"):
            sub, prob = project_register(out, (0, 1), bits)
            assert np.linalg.norm(sub) == pytest.approx(1.0, abs=1e-10)
            total += prob
        assert total == pytest.approx(1.0, abs=1e-10)

    def test_degenerate_projection_raises(self):
        psi = np.kron(basis_state(1, 0), np.array([1, 0], dtype=complex))
        with pytest.raises(DegenerateProjectionError):
            project_register(psi, (0,), "1")

    def test_bitstring_width_checked(self):
        with pytest.raises(ValidationError):
            project_register(basis_state(2), (0, 1), "1")

    def test_rho4_single_bit_filter(self, rho4_matrix, oracle4):
        u = expm_unitary(rho4_matrix, 2 * np.pi)
        c = qpe_circuit(u, 1, 2)
        b0 = np.full(4, 0.5, dtype=complex)
        out = run_circuit(c, np.kron(basis_state(1), b0))
        sub, prob = project_register(out, (0,), "1")
        expected, expected_prob = filtered_state(rho4_matrix, b0, 1, "1")
        assert fidelity(sub, oracle4[1][:, 0]) == pytest.approx(0.99058, abs=2e-3)
        assert prob == pytest.approx(expected_prob, abs=1e-10)
        assert fidelity(sub, expected) == pytest.approx(1.0, abs=1e-10)


class TestSampleShots:
    def test_deterministic_for_seed(self):
        psi = np.array([0.8347, 0.5508], dtype=complex)
        psi = psi / np.linalg.norm(psi)
        h1 = sample_shots(psi, (0,), 8192, seed=3)
        h2 = sample_shots(psi, (0,), 8192, seed=3)
        assert h1.counts == h2.counts

    def test_pure_state_all_shots_one_bin(self):
        h = sample_shots(basis_state(1), (0,), 8192, seed=0)
        assert h.counts == {"0": 8192}

    def test_frequency_within_binomial_band(self):
        psi = np.array([0.8347, 0.5508], dtype=complex)
        psi = psi / np.linalg.norm(psi)
        p = abs(psi[0]) ** 2
        h = sample_shots(psi, (0,), 8192, seed=11)
        se = np.sqrt(p * (1 - p) / 8192)
        assert abs(h.frequency("0") - p) <= 3 * se

    def test_rotated_basis_eigenstate(self):
        plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
        h = sample_shots(plus, (0,), 8192, seed=1, basis=_H, basis_label="x")
        assert h.counts == {"0": 8192}
        assert h.basis == "x"

    def test_counts_sum_to_shots(self, rho2_matrix):
        u = expm_unitary(rho2_matrix, 2 * np.pi)
        c = qpe_circuit(u, 2, 1)
        out = run_circuit(c, np.kron(basis_state(2), np.array([1, 1]) / np.sqrt(2)))
        h = sample_shots(out, c.register("eigenvalue"), 4096, seed=5)
        assert sum(h.counts.values()) == 4096
        assert all(len(k) == 2 for k in h.counts)


def _depolarizing_channel_reference(circuit, rho_in, p):
    """Explicit density-matrix evolution of the same per-gate channel:
    after each multi-qubit gate, with probability p an independent
    uniform non-identity Pauli hits each touched qubit."""
    n = circuit.n_qubits
    dim = 2**n
    rho = rho_in.copy()
    for g in circuit.gates:
        u_full = np.eye(dim, dtype=complex)
        for col in range(dim):
            u_full[:, col] = apply_matrix(
                np.ascontiguousarray(u_full[:, col]), g.unitary(), g.qubits, n
            )
        rho = u_full @ rho @ u_full.conj().T
        touched = g.span()
        if len(touched) >= 2 and p > 0:
            mixed = np.zeros_like(rho)
            combos = list(itertools.product(range(3), repeat=len(touched)))
            for combo in combos:
                pauli_full = np.eye(dim, dtype=complex)
                for q, pl in zip(touched, combo):
                    for col in range(dim):
                        pauli_full[:, col] = apply_matrix(
                            np.ascontiguousarray(pauli_full[:, col]), _PAULIS[pl], (q,), n
                        )
                mixed += pauli_full @ rho @ pauli_full.conj().T
            rho = (1 - p) * rho + p * mixed / len(combos)
    return rho


class TestTrajectoryNoiseAverage:
    @pytest.mark.parametrize("p", [0.08, 0.3])
    def test_mean_matches_density_matrix_channel(self, p):
        theta = 0.7
        ry = np.array(
            [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]],
            dtype=complex,
        )
        c = Circuit(
            2,
            (
                GateOp("h", (0,)),
                GateOp("cx", (0, 1)),
                GateOp("u", (1,), matrix=ry),
                GateOp("cx", (1, 0)),
            ),
        )
        psi0 = basis_state(2)
        reference = _depolarizing_channel_reference(c, np.outer(psi0, psi0.conj()), p)
        ref_probs = np.real(np.diag(reference))
        mean_probs, _ = run_trajectories(c, psi0, NoiseModel(p, seed=4), 100000, seed=4)
        tv = 0.5 * np.sum(np.abs(mean_probs - ref_probs))
        assert tv <= 0.02

    def test_three_qubit_touched_gate_channel(self):
        # a controlled gate on two targets injects Paulis on all three qubits
        u = np.kron(_H, _H)
        c = Circuit(3, (GateOp("h", (0,)), GateOp("cu", (0, 1, 2), matrix=u)))
        psi0 = basis_state(3)
        p = 0.25
        reference = _depolarizing_channel_reference(c, np.outer(psi0, psi0.conj()), p)
        ref_probs = np.real(np.diag(reference))
        mean_probs, _ = run_trajectories(c, psi0, NoiseModel(p, seed=9), 100000, seed=9)
        assert 0.5 * np.sum(np.abs(mean_probs - ref_probs)) <= 0.02


def test_noise_model_validation():
    with pytest.raises(ValidationError):
        NoiseModel(1.5)
    with pytest.raises(ValidationError):
        NoiseModel(-0.1)

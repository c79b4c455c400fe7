"""Statevector execution: gate application, register projection, shot
sampling, and trajectory-based depolarizing noise.

Noise semantics: after every gate touching >= 2 qubits, with probability
p one uniformly random non-identity Pauli is applied to each touched
qubit. A single run is one stochastic trajectory; ensemble statistics
come from `run_trajectories`, which batches many trajectories through
the compiled kernel in `_kernels`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .circuits import Circuit, require_unitary
from .errors import DegenerateProjectionError, ValidationError

NORM_TOL = 1e-10

PAULIS = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


@dataclass(frozen=True)
class NoiseModel:
    """Per-entangling-gate depolarizing probability plus the master seed."""

    two_qubit_depolarizing_p: float
    seed: int = 0

    def __post_init__(self):
        p = float(self.two_qubit_depolarizing_p)
        if not 0.0 <= p <= 1.0:
            raise ValidationError(f"depolarizing probability {p} outside [0, 1]")
        object.__setattr__(self, "two_qubit_depolarizing_p", p)


@dataclass(frozen=True)
class ShotHistogram:
    """Counts per measured bitstring of one register."""

    basis: str
    counts: dict
    shots: int
    register: tuple

    def frequency(self, bitstring: str) -> float:
        return self.counts.get(bitstring, 0) / self.shots

    def magnitudes(self) -> np.ndarray:
        """sqrt of relative frequencies over the full register range."""
        width = len(self.register)
        freqs = np.array(
            [self.counts.get(format(i, f"0{width}b"), 0) for i in range(2**width)],
            dtype=float,
        )
        return np.sqrt(freqs / self.shots)


def n_qubits_of(state: np.ndarray) -> int:
    n = int(np.log2(state.size))
    if 2**n != state.size:
        raise ValidationError(f"state length {state.size} is not a power of two")
    return n


def require_state(state, n_qubits: int | None = None) -> np.ndarray:
    vec = np.asarray(state, dtype=complex).reshape(-1)
    n = n_qubits_of(vec)
    if n_qubits is not None and n != n_qubits:
        raise ValidationError(f"state has {n} qubits, expected {n_qubits}")
    norm = np.linalg.norm(vec)
    if abs(norm - 1.0) > NORM_TOL:
        raise ValidationError(f"state norm {norm} deviates from 1 beyond {NORM_TOL}")
    return vec


def basis_state(n_qubits: int, index: int = 0) -> np.ndarray:
    vec = np.zeros(2**n_qubits, dtype=complex)
    vec[index] = 1.0
    return vec


def fidelity(a, b) -> float:
    """|<a|b>|^2 for normalized state vectors."""
    return float(abs(np.vdot(np.asarray(a), np.asarray(b))) ** 2)


def apply_matrix(state: np.ndarray, u: np.ndarray, qubits, n: int) -> np.ndarray:
    """Apply a 2^m x 2^m matrix to `qubits` (first qubit = MSB of u's index)."""
    qs = list(qubits)
    m = len(qs)
    psi = state.reshape([2] * n)
    psi = np.moveaxis(psi, qs, range(m))
    tail = psi.shape[m:]
    psi = psi.reshape(2**m, -1)
    psi = u @ psi
    psi = psi.reshape((2,) * m + tail)
    psi = np.moveaxis(psi, range(m), qs)
    return np.ascontiguousarray(psi).reshape(-1)


def _inject_pauli(state, qubits, rng, n):
    for q in qubits:
        state = apply_matrix(state, PAULIS[rng.integers(0, 3)], (q,), n)
    return state


def run_circuit(
    circuit: Circuit,
    input_state,
    noise: NoiseModel | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Run one (possibly noisy) trajectory and return the output state."""
    state = require_state(input_state, circuit.n_qubits).copy()
    n = circuit.n_qubits
    p = noise.two_qubit_depolarizing_p if noise is not None else 0.0
    if noise is not None and rng is None:
        rng = np.random.default_rng(noise.seed)
    for g in circuit.gates:
        state = apply_matrix(state, g.unitary(), g.qubits, n)
        if p > 0.0 and len(g.span()) >= 2 and rng.random() < p:
            state = _inject_pauli(state, g.span(), rng, n)
    return state


def run_trajectories(
    circuit: Circuit,
    input_state,
    noise: NoiseModel | None,
    n_traj: int,
    seed: int | None = None,
    want_shots: bool = True,
):
    """Average many noise trajectories of one circuit.

    Returns (mean_probs, shot_counts): the trajectory-averaged z-basis
    probability vector over all qubits, and — when `want_shots` — one
    sampled z outcome per trajectory accumulated into integer counts.
    """
    if n_traj < 1:
        raise ValidationError("n_traj must be >= 1")
    state = require_state(input_state, circuit.n_qubits)
    p = noise.two_qubit_depolarizing_p if noise is not None else 0.0
    if seed is None:
        seed = noise.seed if noise is not None else 0
    compiled = _kernels.compile_circuit(circuit)
    return _kernels.run_trajectories(
        state, compiled, p, int(n_traj), int(seed), bool(want_shots)
    )


def project_register(state, register, bitstring: str):
    """Project `register` onto `bitstring`; return (renormalized rest, prob).

    The remaining qubits keep their relative order. Raises
    DegenerateProjectionError when the projection probability is below
    1e-12 (the filter annihilated everything the input contained).
    """
    vec = require_state(state)
    n = n_qubits_of(vec)
    regs = tuple(register)
    if len(bitstring) != len(regs):
        raise ValidationError(
            f"bitstring {bitstring!r} does not match register width {len(regs)}"
        )
    if any(c not in "01" for c in bitstring):
        raise ValidationError(f"bitstring {bitstring!r} must be binary")
    psi = vec.reshape([2] * n)
    idx = [slice(None)] * n
    for q, c in zip(regs, bitstring):
        idx[q] = int(c)
    sub = np.asarray(psi[tuple(idx)]).reshape(-1)
    prob = float(np.sum(np.abs(sub) ** 2))
    if prob < 1e-12:
        raise DegenerateProjectionError(
            f"projection of register {regs} on {bitstring!r} has probability {prob:.3e}"
        )
    return sub / np.sqrt(prob), prob


def _resolve_basis(basis, width: int):
    if basis is None:
        return None
    arr = np.asarray(basis, dtype=complex)
    if arr.ndim == 2:
        rots = [require_unitary(arr)] * width
    else:
        rots = [require_unitary(b) for b in basis]
        if len(rots) != width:
            raise ValidationError(f"need {width} per-qubit rotations, got {len(rots)}")
    for r in rots:
        if r.shape != (2, 2):
            raise ValidationError("basis rotations must be 2x2")
    return rots


def register_probabilities(state, register, basis=None) -> np.ndarray:
    """Marginal measurement probabilities of `register`, optionally after
    rotating each of its qubits by a 2x2 basis change."""
    vec = require_state(state)
    n = n_qubits_of(vec)
    regs = tuple(register)
    rots = _resolve_basis(basis, len(regs))
    if rots is not None:
        for q, r in zip(regs, rots):
            vec = apply_matrix(vec, r, (q,), n)
    probs = np.abs(vec.reshape([2] * n)) ** 2
    other = tuple(q for q in range(n) if q not in regs)
    if other:
        probs = probs.sum(axis=other)
    # remaining axes follow ascending qubit order; restore the given order
    if len(regs) > 1:
        sorted_regs = sorted(regs)
        probs = probs.transpose([sorted_regs.index(q) for q in regs])
    probs = probs.reshape(-1)
    return probs / probs.sum()


def sample_shots(
    state,
    register,
    shots: int,
    seed: int,
    basis=None,
    basis_label: str = "z",
) -> ShotHistogram:
    """Multinomial z sampling of `register` after an optional basis change."""
    if shots < 1:
        raise ValidationError("shots must be >= 1")
    regs = tuple(register)
    probs = register_probabilities(state, regs, basis=basis)
    rng = np.random.default_rng(seed)
    draws = rng.multinomial(shots, probs)
    width = len(regs)
    counts = {
        format(i, f"0{width}b"): int(c) for i, c in enumerate(draws) if c > 0
    }
    return ShotHistogram(basis=basis_label, counts=counts, shots=shots, register=regs)

"""Iterative quantum principal-component extraction.

The pipeline: build the phase-estimation circuit for `exp(i t rho)`,
project the eigenvalue register onto a target bitstring, read the
eigenvector register's coefficient magnitudes from z-basis shots, feed
the magnitude vector back as the next start state until it is
stationary, recover the relative phases from rotated-basis runs, and
finally sharpen the eigenvalue with plain phase estimation.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .circuits import Circuit, GateOp, inverse_qft_ops
from .errors import DegenerateProjectionError, ValidationError
from .linalg import eigh, expm_unitary, require_hermitian
from .simulator import (
    NoiseModel,
    basis_state,
    fidelity,
    n_qubits_of,
    project_register,
    register_probabilities,
    require_state,
    run_circuit,
    run_trajectories,
    sample_shots,
)
from .synthesis import synthesize_circuit

_H2 = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_SDG = np.array([[1, 0], [0, -1j]], dtype=complex)

BASIS_X = _H2
BASIS_Y = _H2 @ _SDG


def arbitrary_basis(alpha: float = 1.00, beta: float = 0.80, gamma: float = 0.16) -> np.ndarray:
    """Tilted single-qubit measurement direction used as a cross-check.

    The top-right phase must be gamma - beta for the matrix to be
    unitary at arbitrary (alpha, beta, gamma); it coincides with the
    plain conjugate form whenever gamma = 2*beta.
    """
    return np.array(
        [
            [np.cos(alpha), -np.exp(1j * (gamma - beta)) * np.sin(alpha)],
            [np.exp(1j * beta) * np.sin(alpha), np.exp(1j * gamma) * np.cos(alpha)],
        ],
        dtype=complex,
    )


@dataclass(frozen=True)
class QpcaConfig:
    """Knobs for the iterative extraction.

    shots == 0 means analytic (infinite-shot) coefficient estimates,
    which only makes sense without noise.
    """

    n_bits: int
    evolution_time: float = 2.0 * np.pi
    max_iterations: int = 10
    shots: int = 8192
    convergence_tol: float = 0.01
    target_bitstring: str | None = None
    noise: NoiseModel | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_bits < 1:
            raise ValidationError("n_bits must be >= 1")
        if not 0.0 < self.convergence_tol < 1.0:
            raise ValidationError("convergence_tol must lie in (0, 1)")
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if self.shots < 0:
            raise ValidationError("shots must be >= 0")
        if self.noise is not None and self.shots == 0:
            raise ValidationError("noisy runs need shots >= 1 (one trajectory per shot)")
        if self.target_bitstring is not None:
            y = self.target_bitstring
            if len(y) != self.n_bits or any(c not in "01" for c in y):
                raise ValidationError(f"target_bitstring {y!r} must be {self.n_bits} bits")


@dataclass(frozen=True)
class IterationRecord:
    input_state: np.ndarray
    magnitudes: np.ndarray
    projection_probability: float
    fidelity_to_previous: float


@dataclass(frozen=True)
class IterationTrace:
    records: tuple
    target_bitstring: str
    converged: bool

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def final_magnitudes(self) -> np.ndarray:
        return self.records[-1].magnitudes

    def to_dict(self) -> dict:
        return {
            "target_bitstring": self.target_bitstring,
            "converged": self.converged,
            "iterations": self.iterations,
            "records": [
                {
                    "magnitudes": r.magnitudes.tolist(),
                    "projection_probability": r.projection_probability,
                    "fidelity_to_previous": r.fidelity_to_previous,
                }
                for r in self.records
            ],
        }


@dataclass(frozen=True)
class QpcaResult:
    eigenvector: np.ndarray
    coefficient_uncertainty: np.ndarray
    eigenvalue_bitstring: str
    eigenvalue: float
    iterations: int
    converged: bool
    phase_uncertain: bool
    trace: IterationTrace
    oracle_fidelity: float | None = None
    eigenvalue_register_probs: np.ndarray | None = None

    def split_phase_rendering(self) -> np.ndarray:
        """Alternative phase convention: spread the mean phase globally."""
        supp = np.abs(self.eigenvector) > 1e-9
        if not np.any(supp):
            return self.eigenvector
        mean_phase = float(np.mean(np.angle(self.eigenvector[supp])))
        return self.eigenvector * np.exp(-1j * mean_phase / 2.0)

    def to_dict(self) -> dict:
        return {
            "eigenvector_real": np.real(self.eigenvector).tolist(),
            "eigenvector_imag": np.imag(self.eigenvector).tolist(),
            "coefficient_uncertainty": self.coefficient_uncertainty.tolist(),
            "eigenvalue_bitstring": self.eigenvalue_bitstring,
            "eigenvalue": self.eigenvalue,
            "iterations": self.iterations,
            "converged": self.converged,
            "phase_uncertain": self.phase_uncertain,
            "oracle_fidelity": self.oracle_fidelity,
            "eigenvalue_register_probs": (
                None
                if self.eigenvalue_register_probs is None
                else self.eigenvalue_register_probs.tolist()
            ),
            "trace": self.trace.to_dict(),
        }


@dataclass(frozen=True)
class AmbiguityReport:
    seed_b: int
    seed_c: int
    result_b: np.ndarray
    result_c: np.ndarray
    cross_fidelity: float
    distinct_eigenvector: bool

    @property
    def verdict(self) -> str:
        return "K=1" if self.distinct_eigenvector else "K>1"

    @property
    def recommendation(self) -> str | None:
        if self.distinct_eigenvector:
            return None
        return "increase n_bits until a unique eigenvalue is resolved"

    def to_dict(self) -> dict:
        return {
            "seed_b": self.seed_b,
            "seed_c": self.seed_c,
            "cross_fidelity": self.cross_fidelity,
            "verdict": self.verdict,
            "recommendation": self.recommendation,
        }


def _validate_density(rho) -> np.ndarray:
    rho = require_hermitian(rho)
    dim = rho.shape[0]
    if dim & (dim - 1) != 0:
        raise ValidationError(f"density matrix dim {dim} is not a power of two (zero-pad upstream)")
    tr = float(np.trace(rho).real)
    if abs(tr - 1.0) > 1e-9:
        raise ValidationError(f"density matrix trace {tr} != 1 (normalize first)")
    return rho


def _child_seed(seed: int, *tags) -> int:
    return int(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *map(int, tags)]).generate_state(1)[0])


def haar_random_state(dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    vec = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return vec / np.linalg.norm(vec)


def build_qpca_circuit(rho, cfg: QpcaConfig) -> Circuit:
    """Phase-estimation circuit for U = exp(i t rho).

    Eigenvalue-register qubit q controls U^(2^q); together with the
    inverse-QFT fragment the register reads the phase MSB-first, so the
    measured bitstring b1 b2 ... bn encodes sum_k b_k 2^-k.
    """
    rho = _validate_density(rho)
    m = int(np.log2(rho.shape[0]))
    n_bits = cfg.n_bits
    n = n_bits + m
    targets = tuple(range(n_bits, n))
    gates = [GateOp("h", (q,)) for q in range(n_bits)]
    for q in reversed(range(n_bits)):
        u_pow = expm_unitary(rho, cfg.evolution_time * 2**q)
        gates.append(GateOp("cu", (q,) + targets, matrix=u_pow))
    gates += inverse_qft_ops(range(n_bits))
    return Circuit(
        n, gates, {"eigenvalue": range(n_bits), "eigenvector": range(n_bits, n)}
    )


def nearest_bitstring(lam: float, n_bits: int) -> str:
    """n-bit string whose binary fraction is circularly closest to lam."""
    if not 0.0 <= lam < 1.0:
        raise ValidationError(f"lambda {lam} outside [0, 1)")
    if n_bits < 1:
        raise ValidationError("n_bits must be >= 1")
    m = int(round(lam * 2**n_bits)) % 2**n_bits
    return format(m, f"0{n_bits}b")


def _measure_register(
    circuit,
    synth,
    input_state,
    cfg: QpcaConfig,
    register,
    other_register,
    other_value: str | None,
    seed: int,
    basis=None,
    basis_label: str = "z",
):
    """Probabilities of `register`, optionally conditioned on `other_register`
    reading `other_value`. Analytic, sampled, or trajectory-sampled depending
    on cfg. Returns (probs, condition_probability, n_effective_shots)."""
    width = len(register)
    noisy = cfg.noise is not None and cfg.noise.two_qubit_depolarizing_p > 0.0
    if not noisy:
        state = run_circuit(circuit, input_state)
        if other_value is not None:
            state, p_cond = project_register(state, other_register, other_value)
            reg_local = tuple(q - len(other_register) for q in register)
        else:
            p_cond = 1.0
            reg_local = tuple(register)
        if cfg.shots == 0:
            return register_probabilities(state, reg_local, basis=basis), p_cond, 0
        hist = sample_shots(
            state, reg_local, cfg.shots, seed, basis=basis, basis_label=basis_label
        )
        freqs = np.array(
            [hist.counts.get(format(i, f"0{width}b"), 0) for i in range(2**width)],
            dtype=float,
        )
        return freqs / cfg.shots, p_cond, cfg.shots
    # noisy: synthesized circuit, one z shot per trajectory, post-selection
    work = synth
    if basis is not None:
        rots = [basis] * width if np.asarray(basis).ndim == 2 else list(basis)
        extra = [GateOp("u", (q,), matrix=np.asarray(r, dtype=complex)) for q, r in zip(register, rots)]
        work = work.with_gates(list(work.gates) + extra)
    _, counts = run_trajectories(work, input_state, cfg.noise, cfg.shots, seed=seed)
    n = work.n_qubits
    sel = np.zeros(2**width, dtype=np.int64)
    total = int(counts.sum())
    kept = 0
    for idx in range(counts.size):
        if counts[idx] == 0:
            continue
        bits = format(idx, f"0{n}b")
        if other_value is not None and any(
            bits[q] != other_value[i] for i, q in enumerate(other_register)
        ):
            continue
        sub = int("".join(bits[q] for q in register), 2)
        sel[sub] += counts[idx]
        kept += int(counts[idx])
    if kept == 0:
        raise DegenerateProjectionError(
            f"no shots survived post-selection on {other_value!r}"
        )
    return sel / kept, kept / total, kept


def _calibrate_target(rho, cfg: QpcaConfig, circuit, synth, b0) -> str:
    """Modal eigenvalue-register outcome from one calibration run."""
    n_bits = cfg.n_bits
    inp = np.kron(basis_state(n_bits), b0)
    probs, _, _ = _measure_register(
        circuit,
        synth,
        inp,
        cfg,
        circuit.register("eigenvalue"),
        None,
        None,
        _child_seed(cfg.seed, 0xCA1),
    )
    return format(int(np.argmax(probs)), f"0{n_bits}b")


def resolve_target_bitstring(rho, cfg: QpcaConfig, b0=None) -> str:
    """Pick the projection bitstring for rank-1 extraction.

    Prefers the all-ones prior (largest binary fraction below 1, where a
    dominant eigenvalue of a low-rank density matrix sits); if that
    projection would annihilate the probe state, falls back to the modal
    calibration outcome. An explicit cfg.target_bitstring wins.
    """
    if cfg.target_bitstring is not None:
        return cfg.target_bitstring
    rho = _validate_density(rho)
    dim = rho.shape[0]
    if b0 is None:
        b0 = haar_random_state(dim, _child_seed(cfg.seed, 0xB0))
    prior = "1" * cfg.n_bits
    circuit = build_qpca_circuit(rho, cfg)
    out = run_circuit(circuit, np.kron(basis_state(cfg.n_bits), np.asarray(b0, dtype=complex)))
    probs = register_probabilities(out, circuit.register("eigenvalue"))
    if probs[int(prior, 2)] >= 1e-12:
        return prior
    noisy = cfg.noise is not None and cfg.noise.two_qubit_depolarizing_p > 0.0
    synth = synthesize_circuit(circuit) if noisy else circuit
    return _calibrate_target(rho, cfg, circuit, synth, np.asarray(b0, dtype=complex))


def qpca_iterate(rho, b0, cfg: QpcaConfig) -> IterationTrace:
    """Run the projected-power iteration until the magnitude vector is stable.

    Each round sends |0..0> (x) |b_k> through the circuit, keeps the
    eigenvalue register's target bitstring, estimates the eigenvector
    register's coefficient magnitudes in the z basis, and uses the
    normalized magnitudes as b_{k+1}. Stops when the fidelity between
    consecutive iterates reaches 1 - convergence_tol.
    """
    rho = _validate_density(rho)
    m = int(np.log2(rho.shape[0]))
    b = np.asarray(b0, dtype=complex).reshape(-1)
    if b.size != rho.shape[0]:
        raise ValidationError(f"b0 has dim {b.size}, expected {rho.shape[0]}")
    b = b / np.linalg.norm(b)
    circuit = build_qpca_circuit(rho, cfg)
    noisy = cfg.noise is not None and cfg.noise.two_qubit_depolarizing_p > 0.0
    synth = synthesize_circuit(circuit) if noisy else circuit
    y = cfg.target_bitstring
    if y is None:
        y = _calibrate_target(rho, cfg, circuit, synth, b)
    eig_reg = circuit.register("eigenvalue")
    vec_reg = circuit.register("eigenvector")
    records = []
    converged = False
    for it in range(cfg.max_iterations):
        inp = np.kron(basis_state(cfg.n_bits), b)
        probs, p_cond, _ = _measure_register(
            circuit, synth, inp, cfg, vec_reg, eig_reg, y, _child_seed(cfg.seed, it)
        )
        mags = np.sqrt(probs)
        norm = np.linalg.norm(mags)
        if norm < 1e-12:
            raise DegenerateProjectionError("all conditional magnitudes vanished")
        nxt = mags / norm
        fid = fidelity(b, nxt)
        records.append(
            IterationRecord(
                input_state=b.copy(),
                magnitudes=mags,
                projection_probability=float(p_cond),
                fidelity_to_previous=float(fid),
            )
        )
        b = nxt.astype(complex)
        if fid >= 1.0 - cfg.convergence_tol:
            converged = True
            break
    return IterationTrace(tuple(records), y, converged)


def _pair_phases(c: np.ndarray, probs_by_basis: dict, m: int, shots: int):
    """Relative phases from per-qubit rotated-basis pair interference.

    For each qubit q and index pair (a, b) differing only in bit q,
    P0 - P1 of that pair after H is 2*c_a*c_b*cos(dphi) and after H S^dag
    is 2*c_a*c_b*sin(dphi). The tilted direction re-estimates
    cos(dphi + gamma - beta) and is averaged in. Returns (pair phase
    dict, worst uncertainty in rad).
    """
    alpha, offset = 1.00, 0.16 - 0.80  # gamma - beta of the tilted basis
    deltas: dict = {}
    worst = 0.0
    dim = c.size
    for q in range(m):
        bit = 1 << (m - 1 - q)
        for a in range(dim):
            if a & bit:
                continue
            bidx = a | bit
            ca, cb = c[a], c[bidx]
            if ca < 1e-6 or cb < 1e-6:
                continue
            px = probs_by_basis["x"][q]
            py = probs_by_basis["y"][q]
            cosd = (px[a] - px[bidx]) / (2 * ca * cb)
            sind = (py[a] - py[bidx]) / (2 * ca * cb)
            delta = float(np.arctan2(np.clip(sind, -1.5, 1.5), np.clip(cosd, -1.5, 1.5)))
            pr = probs_by_basis["r"][q]
            ca2, sa2 = np.cos(alpha) ** 2, np.sin(alpha) ** 2
            cos_shift = (ca2 * ca**2 + sa2 * cb**2 - pr[a]) / (
                np.sin(2 * alpha) * ca * cb
            )
            cos_shift = float(np.clip(cos_shift, -1.0, 1.0))
            # the arccos sign ambiguity is resolved by the x/y estimate
            cands = (np.arccos(cos_shift) - offset, -np.arccos(cos_shift) - offset)
            cand = min(cands, key=lambda t: abs(np.angle(np.exp(1j * (t - delta)))))
            if abs(np.angle(np.exp(1j * (cand - delta)))) < np.pi / 2:
                delta = float(np.angle((np.exp(1j * delta) + np.exp(1j * cand)) / 2))
            if shots > 0:
                unc = 1.0 / (2.0 * ca * cb * np.sqrt(shots))
            else:
                unc = 0.0
            worst = max(worst, unc)
            deltas[(a, bidx)] = delta
    return deltas, worst


def tomography_phases(state, shots: int, seed: int = 0):
    """Relative phases of a known state from z/x/y/tilted histograms.

    Same estimator recover_phases uses, applied to a directly supplied
    state instead of the circuit-prepared one. Returns (complex vector,
    flagged) with the first nonzero coefficient made real nonnegative.
    """
    vec_in = require_state(state)
    m = n_qubits_of(vec_in)
    dim = vec_in.size
    reg = tuple(range(m))
    if shots > 0:
        hist = sample_shots(vec_in, reg, shots, _child_seed(seed, 0x70))
        pz = hist.magnitudes() ** 2
    else:
        pz = register_probabilities(vec_in, reg)
    c = np.sqrt(pz)
    probs_by_basis: dict = {"x": [], "y": [], "r": []}
    for label, rot in (("x", BASIS_X), ("y", BASIS_Y), ("r", arbitrary_basis())):
        for q in range(m):
            rots = [np.eye(2, dtype=complex)] * m
            rots[q] = rot
            if shots > 0:
                h = sample_shots(
                    vec_in, reg, shots, _child_seed(seed, 0x71, ord(label), q),
                    basis=rots, basis_label=label,
                )
                probs = h.magnitudes() ** 2
            else:
                probs = register_probabilities(vec_in, reg, basis=rots)
            probs_by_basis[label].append(probs)
    deltas, worst = _pair_phases(c, probs_by_basis, m, shots)
    phases = np.zeros(dim)
    known = np.zeros(dim, dtype=bool)
    support = [i for i in range(dim) if c[i] > 1e-6]
    if support:
        known[support[0]] = True
        changed = True
        while changed:
            changed = False
            for (a, bidx), d in deltas.items():
                if known[a] and not known[bidx]:
                    phases[bidx] = phases[a] + d
                    known[bidx] = True
                    changed = True
                elif known[bidx] and not known[a]:
                    phases[a] = phases[bidx] - d
                    known[a] = True
                    changed = True
    vec = c * np.exp(1j * phases)
    first = next((i for i in range(dim) if abs(vec[i]) > 1e-6), 0)
    if abs(vec[first]) > 0:
        vec = vec * (np.conj(vec[first]) / abs(vec[first]))
    return vec / np.linalg.norm(vec), bool(worst > 0.5)


def recover_phases(rho, magnitudes, cfg: QpcaConfig):
    """Reconstruct the complex eigenvector from multi-basis measurements.

    Re-runs the projected circuit with the converged magnitude vector as
    input and measures the eigenvector register in z, x, y and a tilted
    direction. Returns (vector, per-coefficient uncertainty, flagged)
    where flagged means some phase had uncertainty above 0.5 rad.
    """
    rho = _validate_density(rho)
    m = int(np.log2(rho.shape[0]))
    # any global phase on the underlying state is unobservable; keep |.|
    mags_in = np.abs(np.asarray(magnitudes, dtype=complex)).reshape(-1)
    if mags_in.size != rho.shape[0]:
        raise ValidationError("magnitude vector has the wrong dimension")
    b = mags_in / np.linalg.norm(mags_in)
    circuit = build_qpca_circuit(rho, cfg)
    noisy = cfg.noise is not None and cfg.noise.two_qubit_depolarizing_p > 0.0
    synth = synthesize_circuit(circuit) if noisy else circuit
    y = cfg.target_bitstring
    if y is None:
        y = _calibrate_target(rho, cfg, circuit, synth, b.astype(complex))
    eig_reg = circuit.register("eigenvalue")
    vec_reg = circuit.register("eigenvector")
    inp = np.kron(basis_state(cfg.n_bits), b.astype(complex))

    pz, _, _ = _measure_register(
        circuit, synth, inp, cfg, vec_reg, eig_reg, y, _child_seed(cfg.seed, 0x2A)
    )
    c = np.sqrt(pz)
    probs_by_basis: dict = {"x": [], "y": [], "r": []}
    rot_by_label = {"x": BASIS_X, "y": BASIS_Y, "r": arbitrary_basis()}
    for label, rot in rot_by_label.items():
        for q in range(m):
            rots = [np.eye(2, dtype=complex)] * m
            rots[q] = rot
            probs, _, _ = _measure_register(
                circuit,
                synth,
                inp,
                cfg,
                vec_reg,
                eig_reg,
                y,
                _child_seed(cfg.seed, 0x2B, ord(label), q),
                basis=rots,
                basis_label=label,
            )
            probs_by_basis[label].append(probs)

    deltas, worst_unc = _pair_phases(c, probs_by_basis, m, cfg.shots)
    dim = c.size
    phases = np.zeros(dim)
    known = np.zeros(dim, dtype=bool)
    order = [i for i in range(dim) if c[i] > 1e-6]
    if order:
        known[order[0]] = True
        changed = True
        while changed:
            changed = False
            for (a, bidx), d in deltas.items():
                if known[a] and not known[bidx]:
                    phases[bidx] = phases[a] + d
                    known[bidx] = True
                    changed = True
                elif known[bidx] and not known[a]:
                    phases[a] = phases[bidx] - d
                    known[a] = True
                    changed = True
    vec = c * np.exp(1j * phases)
    first = next((i for i in range(dim) if abs(vec[i]) > 1e-6), 0)
    ref = vec[first]
    if abs(ref) > 0:
        vec = vec * (np.conj(ref) / abs(ref))
    vec = vec / np.linalg.norm(vec)
    if cfg.shots > 0:
        mag_unc = 0.5 * np.sqrt(np.clip(1.0 - c**2, 0.0, 1.0) / cfg.shots)
        unc = np.sqrt(mag_unc**2 + (c * worst_unc) ** 2)
    else:
        unc = np.zeros(dim)
    return vec, unc, bool(worst_unc > 0.5)


def qpe_refine(rho, u_est, n_bits: int, shots: int = 8192,
               noise: NoiseModel | None = None, seed: int = 0):
    """Sharpen the eigenvalue estimate by phase estimation on u_est.

    Returns (bitstring, value, post_fidelity, register_probs): the modal
    eigenvalue-register reading, its binary-fraction value, and the
    fidelity between the register-conditioned eigenvector state and
    u_est (under noise this degrades to magnitude-level fidelity).
    """
    rho = _validate_density(rho)
    u = np.asarray(u_est, dtype=complex).reshape(-1)
    if u.size != rho.shape[0]:
        raise ValidationError("u_est has the wrong dimension")
    u = u / np.linalg.norm(u)
    cfg = QpcaConfig(n_bits=n_bits, shots=max(shots, 0), noise=noise, seed=seed)
    circuit = build_qpca_circuit(rho, cfg)
    eig_reg = circuit.register("eigenvalue")
    inp = np.kron(basis_state(n_bits), u)
    noisy = noise is not None and noise.two_qubit_depolarizing_p > 0.0
    if not noisy:
        out = run_circuit(circuit, inp)
        reg_probs = register_probabilities(out, eig_reg)
        if shots > 0:
            hist = sample_shots(out, eig_reg, shots, _child_seed(seed, 0x9E))
            modal = max(hist.counts, key=hist.counts.get)
        else:
            modal = format(int(np.argmax(reg_probs)), f"0{n_bits}b")
        post, _ = project_register(out, eig_reg, modal)
        fid = fidelity(post, u)
    else:
        synth = synthesize_circuit(circuit)
        mean_probs, counts = run_trajectories(synth, inp, noise, max(shots, 1), seed=_child_seed(seed, 0x9E))
        n = circuit.n_qubits
        reg_counts = np.zeros(2**n_bits, dtype=np.int64)
        for idx in range(counts.size):
            yv = idx >> (n - n_bits)
            reg_counts[yv] += counts[idx]
        reg_probs_mean = mean_probs.reshape(2**n_bits, -1)
        reg_probs = reg_probs_mean.sum(axis=1)
        modal = format(int(np.argmax(reg_counts)), f"0{n_bits}b")
        cond_probs = reg_probs_mean[int(modal, 2)]
        cond_probs = cond_probs / cond_probs.sum()
        fid = float(np.abs(np.sqrt(cond_probs) @ np.abs(u)) ** 2)
    value = int(modal, 2) / 2**n_bits
    return modal, value, float(fid), reg_probs


def check_ambiguity(rho, cfg: QpcaConfig, seed_b: int, seed_c: int) -> AmbiguityReport:
    """Compare two independent random starts to detect unresolved subspaces."""
    if seed_b == seed_c:
        raise ValidationError("seed_b and seed_c must differ")
    rho = _validate_density(rho)
    dim = rho.shape[0]
    outs = []
    for s in (seed_b, seed_c):
        b0 = haar_random_state(dim, s)
        run_cfg = replace(cfg, seed=_child_seed(cfg.seed, s))
        trace = qpca_iterate(rho, b0, run_cfg)
        final = trace.final_magnitudes / np.linalg.norm(trace.final_magnitudes)
        outs.append(final)
    cross = fidelity(outs[0], outs[1])
    return AmbiguityReport(
        seed_b=seed_b,
        seed_c=seed_c,
        result_b=outs[0],
        result_c=outs[1],
        cross_fidelity=float(cross),
        distinct_eigenvector=bool(cross >= 0.98),
    )


def extract_leading_component(rho, cfg: QpcaConfig, oracle_check: bool = False) -> QpcaResult:
    """Full pipeline: iterate, recover phases, refine the eigenvalue.

    The default target bitstring is the all-ones rank-1 prior (the
    largest binary fraction below 1); if that projection annihilates the
    state, fall back to the modal calibration outcome.
    """
    rho = _validate_density(rho)
    dim = rho.shape[0]
    b0 = haar_random_state(dim, _child_seed(cfg.seed, 0xB0))
    cfg_y = replace(cfg, target_bitstring=resolve_target_bitstring(rho, cfg, b0))
    trace = qpca_iterate(rho, b0, cfg_y)
    mags = trace.final_magnitudes / np.linalg.norm(trace.final_magnitudes)
    vec, unc, flagged = recover_phases(rho, mags, cfg_y)
    bitstring, value, _, reg_probs = qpe_refine(
        rho,
        vec,
        cfg.n_bits,
        shots=cfg.shots,
        noise=cfg.noise,
        seed=_child_seed(cfg.seed, 0x9F),
    )
    oracle_fid = None
    if oracle_check:
        dec = eigh(rho)
        oracle_fid = fidelity(vec, dec.eigenvectors[:, 0])
    return QpcaResult(
        eigenvector=vec,
        coefficient_uncertainty=unc,
        eigenvalue_bitstring=bitstring,
        eigenvalue=value,
        iterations=trace.iterations,
        converged=trace.converged,
        phase_uncertain=flagged,
        trace=trace,
        oracle_fidelity=oracle_fid,
        eigenvalue_register_probs=reg_probs,
    )


def basis_histograms(rho, magnitudes, cfg: QpcaConfig) -> dict:
    """Post-selected eigenvector-register counts in the z, x, y and tilted
    bases for the converged magnitude vector (report material)."""
    rho = _validate_density(rho)
    m = int(np.log2(rho.shape[0]))
    b = np.asarray(magnitudes, dtype=float).reshape(-1)
    b = b / np.linalg.norm(b)
    circuit = build_qpca_circuit(rho, cfg)
    noisy = cfg.noise is not None and cfg.noise.two_qubit_depolarizing_p > 0.0
    synth = synthesize_circuit(circuit) if noisy else circuit
    y = cfg.target_bitstring
    if y is None:
        y = _calibrate_target(rho, cfg, circuit, synth, b.astype(complex))
    eig_reg = circuit.register("eigenvalue")
    vec_reg = circuit.register("eigenvector")
    inp = np.kron(basis_state(cfg.n_bits), b.astype(complex))
    shots = cfg.shots if cfg.shots > 0 else 8192
    run_cfg = replace(cfg, shots=shots)
    out = {}
    rotations = {"z": None, "x": BASIS_X, "y": BASIS_Y, "r": arbitrary_basis()}
    for label, rot in rotations.items():
        probs, _, n_eff = _measure_register(
            circuit,
            synth,
            inp,
            run_cfg,
            vec_reg,
            eig_reg,
            y,
            _child_seed(cfg.seed, 0x4B, ord(label)),
            basis=rot,
            basis_label=label,
        )
        counts = np.rint(probs * n_eff).astype(int)
        out[label] = {
            format(i, f"0{m}b"): int(c) for i, c in enumerate(counts) if c > 0
        }
    return out

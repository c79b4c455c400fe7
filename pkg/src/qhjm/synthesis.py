"""Controlled-unitary synthesis into single-qubit gates plus CNOTs.

Single-qubit targets use the two-CNOT phase/rotation construction; wider
targets go through the recursive cosine-sine decomposition with
multiplexed rotations. Only the reconstruction (up to global phase) and
the emitted entangling count are contractual; the exact gate sequence is
an implementation detail.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import cossin, schur

from .circuits import Circuit, GateOp, require_unitary
from .errors import ValidationError
from .simulator import apply_matrix

_PRUNE_TOL = 1e-12


def _rz(theta: float) -> np.ndarray:
    return np.array(
        [[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=complex
    )


def _ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def zyz_angles(u: np.ndarray):
    """Return (alpha, beta, gamma, delta) with U = e^{i a} Rz(b) Ry(g) Rz(d)."""
    u = require_unitary(np.asarray(u, dtype=complex))
    if u.shape != (2, 2):
        raise ValidationError("zyz_angles expects a 2x2 unitary")
    alpha = 0.5 * np.angle(np.linalg.det(u))
    v = u * np.exp(-1j * alpha)
    gamma = 2.0 * np.arctan2(abs(v[1, 0]), abs(v[0, 0]))
    if abs(v[0, 0]) < 1e-12:
        beta = 2.0 * np.angle(v[1, 0])
        delta = 0.0
    elif abs(v[1, 0]) < 1e-12:
        beta = -2.0 * np.angle(v[0, 0])
        delta = 0.0
    else:
        beta = np.angle(v[1, 0]) - np.angle(v[0, 0])
        delta = -np.angle(v[0, 0]) - np.angle(v[1, 0])
    return alpha, beta, gamma, delta


def _controlled_1q(u: np.ndarray, control: int, target: int) -> list:
    """Two-CNOT construction: C-U = Ph(a)_c (A x) (B x) C with ABC = I."""
    alpha, beta, gamma, delta = zyz_angles(u)
    a_mat = _rz(beta) @ _ry(gamma / 2)
    b_mat = _ry(-gamma / 2) @ _rz(-(delta + beta) / 2)
    c_mat = _rz((delta - beta) / 2)
    phase = np.array([[1, 0], [0, np.exp(1j * alpha)]], dtype=complex)
    return [
        GateOp("u", (target,), matrix=c_mat),
        GateOp("cx", (control, target)),
        GateOp("u", (target,), matrix=b_mat),
        GateOp("cx", (control, target)),
        GateOp("u", (target,), matrix=a_mat),
        GateOp("u", (control,), matrix=phase),
    ]


def _mux_rotation(rot, angles: np.ndarray, controls: list, target: int) -> list:
    """Rotation rot(angles[j]) on `target` selected by the controls' state j."""
    if np.max(np.abs(angles)) < _PRUNE_TOL:
        return []
    if not controls:
        return [GateOp("u", (target,), matrix=rot(float(angles[0])))]
    half = len(angles) // 2
    lo, hi = angles[:half], angles[half:]
    out = _mux_rotation(rot, (lo + hi) / 2.0, controls[1:], target)
    out.append(GateOp("cx", (controls[0], target)))
    out += _mux_rotation(rot, (lo - hi) / 2.0, controls[1:], target)
    out.append(GateOp("cx", (controls[0], target)))
    return out


def _demultiplex(a: np.ndarray, b: np.ndarray, select: int, targets: list) -> list:
    """diag(A, B) on (select, targets) as (I x V) diag(D, D^dag) (I x W)."""
    ab = a @ b.conj().T
    t, v = schur(ab, output="complex")
    d = np.diag(t).copy()
    d /= np.abs(d)
    droot = np.exp(0.5j * np.angle(d))
    w = (droot.conj()[:, None] * v.conj().T) @ a
    phis = np.angle(droot)
    out = _qsd(w, targets)
    out += _mux_rotation(_rz, -2.0 * phis, list(targets), select)
    out += _qsd(v, targets)
    return out


def _qsd(m: np.ndarray, qubits) -> list:
    """Recursive cosine-sine decomposition of an arbitrary unitary."""
    qs = list(qubits)
    if len(qs) == 1:
        if np.max(np.abs(m - m[0, 0] * np.eye(2))) < _PRUNE_TOL and abs(
            abs(m[0, 0]) - 1.0
        ) < _PRUNE_TOL:
            return []  # identity up to global phase
        return [GateOp("u", (qs[0],), matrix=np.asarray(m, dtype=complex))]
    dim = m.shape[0]
    half = dim // 2
    u, cs, vdh = cossin(m, p=half, q=half)
    thetas = np.arctan2(np.diag(cs[half:, :half]), np.diag(cs[:half, :half]))
    out = _demultiplex(vdh[:half, :half], vdh[half:, half:], qs[0], qs[1:])
    out += _mux_rotation(_ry, 2.0 * thetas, qs[1:], qs[0])
    out += _demultiplex(u[:half, :half], u[half:, half:], qs[0], qs[1:])
    return out


def _cancel_adjacent_cx(gates: list) -> list:
    out = list(gates)
    changed = True
    while changed:
        changed = False
        for i in range(len(out) - 1):
            g1, g2 = out[i], out[i + 1]
            if g1.kind == "cx" and g2.kind == "cx" and g1.qubits == g2.qubits:
                del out[i : i + 2]
                changed = True
                break
    return out


def gates_unitary(gates, n_qubits: int) -> np.ndarray:
    """Dense matrix of an ordered gate list (first gate applied first)."""
    dim = 2**n_qubits
    u = np.eye(dim, dtype=complex)
    for g in gates:
        for col in range(dim):
            u[:, col] = apply_matrix(np.ascontiguousarray(u[:, col]), g.unitary(), g.qubits, n_qubits)
    return u


def max_deviation_up_to_phase(a: np.ndarray, b: np.ndarray) -> float:
    """max |A - e^{i phi} B| with phi chosen from the largest entry of B."""
    k = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    ratio = a[k] / b[k]
    ratio /= abs(ratio)
    return float(np.max(np.abs(a - ratio * b)))


_synth_cache: dict = {}


def decompose_controlled_unitary(u, n_target_qubits: int):
    """Synthesize control (x) U into 1q gates + CNOTs on 1+n_target qubits.

    Qubit 0 is the control; qubits 1..n_target are the targets in payload
    bit order. Returns (gate_list, entangling_gate_count).
    """
    u = require_unitary(u)
    if n_target_qubits < 1:
        raise ValidationError("need at least one target qubit")
    if u.shape[0] != 2**n_target_qubits:
        raise ValidationError(
            f"payload dim {u.shape[0]} does not match {n_target_qubits} targets"
        )
    key = (u.tobytes(), n_target_qubits)
    if key in _synth_cache:
        return _synth_cache[key]
    if n_target_qubits == 1:
        gates = _controlled_1q(u, 0, 1)
    else:
        dim = u.shape[0]
        block = np.eye(2 * dim, dtype=complex)
        block[dim:, dim:] = u
        gates = _cancel_adjacent_cx(_qsd(block, range(1 + n_target_qubits)))
    count = sum(1 for g in gates if g.kind == "cx")
    result = (gates, count)
    _synth_cache[key] = result
    return result


def _remap(gates, mapping: dict) -> list:
    out = []
    for g in gates:
        out.append(
            GateOp(g.kind, tuple(mapping[q] for q in g.qubits), matrix=g.matrix, k=g.k)
        )
    return out


def synthesize_circuit(circuit: Circuit) -> Circuit:
    """Expand every controlled-unitary block into 1q gates + CNOTs.

    The result contains only gates whose entangling cost is explicit,
    which is what the per-entangling-gate noise model needs.
    """
    gates: list = []
    for g in circuit.gates:
        if g.kind == "cu":
            local, _ = decompose_controlled_unitary(g.matrix, len(g.qubits) - 1)
            mapping = {i: q for i, q in enumerate(g.qubits)}
            gates += _remap(local, mapping)
        else:
            gates.append(g)
    return circuit.with_gates(gates)


def entangling_count(circuit: Circuit) -> int:
    """Total two-qubit-gate cost after synthesizing all blocks."""
    total = 0
    for g in circuit.gates:
        if g.kind == "cx":
            total += 1
        elif g.kind == "swap":
            total += 3
        elif g.kind == "cu":
            total += decompose_controlled_unitary(g.matrix, len(g.qubits) - 1)[1]
    return total

"""Gate-list circuit representation over named qubit registers.

Qubit 0 is the most significant bit of every basis-state index, so the
bitstring for basis index i is just format(i, "0nb") and a register's
reading is the corresponding substring. Circuits and gates are immutable
and safe to share.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

UNITARY_TOL = 1e-10

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)
_CX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)

KINDS = ("h", "u", "cu", "rk", "rkdag", "cx", "swap")


def phase_rotation(k: int, dagger: bool = False) -> np.ndarray:
    """diag(1, e^{+-2*pi*i / 2^k}), the k-th binary-fraction phase gate."""
    sign = -1.0 if dagger else 1.0
    return np.array([[1, 0], [0, np.exp(sign * 2j * np.pi / 2**k)]], dtype=complex)


def require_unitary(m, tol: float = UNITARY_TOL) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"unitary payload must be square, got {m.shape}")
    dev = np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0])))
    if dev > tol:
        raise ValidationError(f"matrix is not unitary (deviation {dev:.3e})")
    return m


@dataclass(frozen=True)
class GateOp:
    """One gate: `kind`, the qubits it acts on, and an optional payload.

    For "cu" the first qubit is the control and the rest are targets
    (target order matches the payload's bit order, most significant
    first). `k` is the binary-fraction order for "rk"/"rkdag".
    """

    kind: str
    qubits: tuple
    matrix: np.ndarray | None = None
    k: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown gate kind {self.kind!r}")
        qs = tuple(int(q) for q in self.qubits)
        object.__setattr__(self, "qubits", qs)
        if len(set(qs)) != len(qs):
            raise ValidationError(f"duplicate qubit indices in {qs}")
        if self.kind in ("h", "rk", "rkdag") and len(qs) != 1:
            raise ValidationError(f"{self.kind} acts on exactly one qubit")
        if self.kind == "u":
            if len(qs) != 1:
                raise ValidationError("u acts on exactly one qubit")
            object.__setattr__(self, "matrix", require_unitary(self.matrix))
            if self.matrix.shape != (2, 2):
                raise ValidationError("u payload must be 2x2")
        if self.kind == "cu":
            if len(qs) < 2:
                raise ValidationError("cu needs a control and at least one target")
            m = require_unitary(self.matrix)
            if m.shape[0] != 2 ** (len(qs) - 1):
                raise ValidationError(
                    f"cu payload dim {m.shape[0]} does not match {len(qs) - 1} targets"
                )
            object.__setattr__(self, "matrix", m)
        if self.kind in ("rk", "rkdag") and (self.k is None or self.k < 1):
            raise ValidationError("rk/rkdag need integer k >= 1")
        if self.kind in ("cx", "swap") and len(qs) != 2:
            raise ValidationError(f"{self.kind} acts on exactly two qubits")

    def span(self) -> tuple:
        """All qubits the gate touches (noise is injected on these)."""
        return self.qubits

    def unitary(self) -> np.ndarray:
        """Dense matrix over self.qubits (first qubit = most significant)."""
        if self.kind == "h":
            return _H
        if self.kind == "u":
            return self.matrix
        if self.kind == "rk":
            return phase_rotation(self.k)
        if self.kind == "rkdag":
            return phase_rotation(self.k, dagger=True)
        if self.kind == "cx":
            return _CX
        if self.kind == "swap":
            return _SWAP
        # cu: block identity on control=0, payload on control=1
        d = self.matrix.shape[0]
        full = np.eye(2 * d, dtype=complex)
        full[d:, d:] = self.matrix
        return full

    def dump_line(self) -> str:
        parts = ["GATE", self.kind, " ".join(str(q) for q in self.qubits)]
        if self.kind in ("rk", "rkdag"):
            parts.append(f"k={self.k}")
        if self.matrix is not None:
            flat = np.round(self.matrix, 12).tolist()
            parts.append(repr(flat))
        return " ".join(parts)


def _as_register(spec) -> tuple:
    if isinstance(spec, range):
        return tuple(spec)
    return tuple(int(q) for q in spec)


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list over `n_qubits` with named contiguous registers."""

    n_qubits: int
    gates: tuple
    registers: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValidationError("circuit needs at least one qubit")
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            for q in g.qubits:
                if not 0 <= q < self.n_qubits:
                    raise ValidationError(
                        f"gate {g.kind} uses qubit {q} outside 0..{self.n_qubits - 1}"
                    )
        regs = {name: _as_register(r) for name, r in self.registers.items()}
        seen: set = set()
        for name, qs in regs.items():
            if any(not 0 <= q < self.n_qubits for q in qs):
                raise ValidationError(f"register {name!r} out of range")
            if seen & set(qs):
                raise ValidationError(f"register {name!r} overlaps another register")
            seen |= set(qs)
        object.__setattr__(self, "registers", regs)

    def register(self, name: str) -> tuple:
        try:
            return self.registers[name]
        except KeyError:
            raise ValidationError(f"no register named {name!r}") from None

    def dump(self) -> str:
        """Line-per-gate debug text: `GATE kind qubits [matrix]`."""
        return "\n".join(g.dump_line() for g in self.gates)

    def with_gates(self, gates) -> "Circuit":
        return Circuit(self.n_qubits, tuple(gates), dict(self.registers))


def inverse_qft_ops(qubits) -> list:
    """Inverse quantum Fourier transform as a gate list on `qubits`.

    qubits[0] carries the most significant result bit. Built as the
    reversed adjoint of the textbook transform: Hadamards interleaved
    with controlled phase rotations diag(1, e^{-2*pi*i/2^k}).
    """
    qs = list(qubits)
    n = len(qs)
    forward = []
    for i in range(n):
        forward.append(GateOp("h", (qs[i],)))
        for j in range(i + 1, n):
            k = j - i + 1
            forward.append(
                GateOp("cu", (qs[j], qs[i]), matrix=phase_rotation(k))
            )
    out = []
    for g in reversed(forward):
        if g.kind == "h":
            out.append(g)
        else:
            out.append(GateOp("cu", g.qubits, matrix=g.matrix.conj().T))
    return out


def inverse_qft(n: int) -> Circuit:
    """Inverse QFT fragment on its own n-qubit register."""
    if n < 1:
        raise ValidationError("inverse_qft needs n >= 1")
    return Circuit(n, tuple(inverse_qft_ops(range(n))), {"eigenvalue": range(n)})

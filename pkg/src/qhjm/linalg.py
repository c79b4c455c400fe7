"""Dense complex linear algebra: Hermitian eigendecomposition via cyclic
Jacobi rotations, trace normalization to a density matrix, and Hermitian
matrix exponentials.

Everything here is a pure function of its inputs; returned arrays are
fresh allocations and safe to share across threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ValidationError

HERMITICITY_TOL = 1e-12
PSD_TOL = 1e-10
DEGENERACY_GAP = 1e-10

_MAX_SWEEPS = 100
_OFFDIAG_REL_TOL = 1e-14


def as_square_complex(a) -> np.ndarray:
    """Validate and return a finite square complex matrix."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] < 1:
        raise ValidationError("matrix must be at least 1x1")
    if not np.all(np.isfinite(m.view(float))):
        raise ValidationError("matrix entries must be finite")
    return m


def require_hermitian(a, tol: float = HERMITICITY_TOL) -> np.ndarray:
    """Validate A = A^dagger entrywise within `tol` and return A."""
    m = as_square_complex(a)
    dev = np.max(np.abs(m - m.conj().T))
    if dev > tol:
        raise ValidationError(f"matrix is not Hermitian (max deviation {dev:.3e} > {tol:.0e})")
    return m


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues sorted descending with orthonormal eigenvector columns.

    `near_degenerate` lists adjacent (descending-order) index pairs whose
    eigenvalue gap is below DEGENERACY_GAP; consumers projecting on a
    single eigenvalue must treat those as an unresolved subspace.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    near_degenerate: tuple = field(default=())

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def _fix_eigenvector_phases(vecs: np.ndarray) -> np.ndarray:
    """Rotate each column's global phase so its largest-|.| entry is real >= 0."""
    out = vecs.copy()
    for j in range(out.shape[1]):
        k = int(np.argmax(np.abs(out[:, j])))
        pivot = out[k, j]
        if abs(pivot) > 0:
            out[:, j] *= np.conj(pivot) / abs(pivot)
        # kill the residual imaginary dust on the pivot
        out[k, j] = out[k, j].real
    return out


def _offdiag_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.linalg.norm(off))


def eigh(a, tol: float = HERMITICITY_TOL) -> SpectralDecomposition:
    """Hermitian eigendecomposition by cyclic Jacobi rotations.

    Suited to the small dense matrices used here (dim <= ~16). Sweeps
    until the off-diagonal Frobenius norm falls below a relative
    threshold; raises NumericalError if 100 sweeps do not converge.
    """
    a = require_hermitian(a, tol=tol)
    n = a.shape[0]
    work = a.astype(complex, copy=True)
    vecs = np.eye(n, dtype=complex)
    if n == 1:
        return SpectralDecomposition(np.array([work[0, 0].real]), vecs)

    scale = max(float(np.linalg.norm(work)), 1e-300)
    threshold = _OFFDIAG_REL_TOL * scale

    converged = False
    for _ in range(_MAX_SWEEPS):
        if _offdiag_norm(work) <= threshold:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = work[p, q]
                if abs(apq) <= threshold / n:
                    continue
                app = work[p, p].real
                aqq = work[q, q].real
                phase = apq / abs(apq)
                tau = (aqq - app) / (2.0 * abs(apq))
                t = 1.0 / (tau + np.copysign(np.sqrt(1.0 + tau * tau), tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # two-sided rotation R on rows/cols p and q only, with
                # R[p,q] = s*phase, R[q,p] = -s*conj(phase): A <- R^dag A R
                rp = c * work[p, :] - s * phase * work[q, :]
                rq = s * np.conj(phase) * work[p, :] + c * work[q, :]
                work[p, :], work[q, :] = rp, rq
                cp = c * work[:, p] - s * np.conj(phase) * work[:, q]
                cq = s * phase * work[:, p] + c * work[:, q]
                work[:, p], work[:, q] = cp, cq
                work[p, q] = 0.0
                work[q, p] = 0.0
                vp = c * vecs[:, p] - s * np.conj(phase) * vecs[:, q]
                vq = s * phase * vecs[:, p] + c * vecs[:, q]
                vecs[:, p], vecs[:, q] = vp, vq
    if not converged and _offdiag_norm(work) > threshold:
        raise NumericalError(
            f"Jacobi eigensolver did not converge in {_MAX_SWEEPS} sweeps "
            f"(off-diagonal norm {_offdiag_norm(work):.3e})"
        )

    vals = np.real(np.diag(work))
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = _fix_eigenvector_phases(vecs[:, order])
    gaps = tuple(
        (i, i + 1) for i in range(n - 1) if abs(vals[i] - vals[i + 1]) < DEGENERACY_GAP
    )
    return SpectralDecomposition(vals, vecs, gaps)


def normalize_to_density(c, tol: float = HERMITICITY_TOL) -> np.ndarray:
    """Scale a PSD Hermitian matrix by 1/trace so it becomes a density matrix."""
    c = require_hermitian(c, tol=tol)
    tr = float(np.trace(c).real)
    if tr <= 0.0:
        raise ValidationError(f"trace must be positive, got {tr:.3e}")
    rho = c / tr
    w = eigh(rho).eigenvalues
    if w.min() < -PSD_TOL:
        raise ValidationError(
            f"matrix is not PSD within tolerance (min eigenvalue {w.min():.3e})"
        )
    return rho


def expm_unitary(h, t: float, tol: float = HERMITICITY_TOL) -> np.ndarray:
    """exp(i*t*H) for Hermitian H, built from the spectral decomposition."""
    dec = eigh(h, tol=tol)
    phases = np.exp(1j * t * dec.eigenvalues)
    v = dec.eigenvectors
    return (v * phases) @ v.conj().T

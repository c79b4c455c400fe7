"""Hot numeric kernels: noise-trajectory batches and HJM path evolution.

Each kernel has an @njit implementation and a pure-numpy fallback with
identical array contracts; `_backend` decides which one runs (set
QHJM_DISABLE_NUMBA=1 to force the fallback). Keep the pairs in sync.
"""
from __future__ import annotations

import numpy as np

from ._backend import NUMBA_ENABLED, njit
from .errors import ValidationError

_MAX_GATE_QUBITS = 3  # pad gate payloads to 8x8; enough for control + 2 targets


def compile_circuit(circuit):
    """Flatten a Circuit into dense arrays the kernels can chew on.

    Returns (mats, nqs, patterns, masks, noisy, n_qubits) where for gate g
    acting on m=nqs[g] qubits, patterns[g, j] is the basis-index offset of
    the j-th row of its 2^m payload and masks[g] covers all touched bits.
    """
    n = circuit.n_qubits
    n_gates = len(circuit.gates)
    mats = np.zeros((n_gates, 8, 8), dtype=np.complex128)
    nqs = np.zeros(n_gates, dtype=np.int64)
    patterns = np.zeros((n_gates, 8), dtype=np.int64)
    masks = np.zeros(n_gates, dtype=np.int64)
    noisy = np.zeros(n_gates, dtype=np.int64)
    shifts = np.zeros((n_gates, _MAX_GATE_QUBITS), dtype=np.int64)
    for g, op in enumerate(circuit.gates):
        qs = op.qubits
        m = len(qs)
        if m > _MAX_GATE_QUBITS:
            raise ValidationError(
                f"gate {op.kind} touches {m} qubits; kernel supports <= {_MAX_GATE_QUBITS}"
            )
        u = op.unitary()
        d = 2**m
        mats[g, :d, :d] = u
        nqs[g] = m
        noisy[g] = 1 if m >= 2 else 0
        mask = 0
        for i, q in enumerate(qs):
            shifts[g, i] = n - 1 - q
            mask |= 1 << (n - 1 - q)
        masks[g] = mask
        for j in range(d):
            pat = 0
            for i in range(m):
                if (j >> (m - 1 - i)) & 1:
                    pat |= 1 << shifts[g, i]
            patterns[g, j] = pat
    return mats, nqs, patterns, masks, noisy, shifts, n


def _traj_core_numpy(amps0, compiled, p, n_traj, seed, want_shots):
    mats, nqs, patterns, masks, noisy, shifts, n = compiled
    dim = amps0.size
    rng = np.random.default_rng(seed)
    probs_acc = np.zeros(dim)
    shot_counts = np.zeros(dim, dtype=np.int64)
    n_gates = mats.shape[0]
    pauli_x = np.array([[0, 1], [1, 0]], dtype=np.complex128)
    pauli_y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
    pauli_z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
    paulis = (pauli_x, pauli_y, pauli_z)
    for _ in range(n_traj):
        state = amps0.astype(np.complex128, copy=True)
        for g in range(n_gates):
            m = int(nqs[g])
            d = 2**m
            u = mats[g, :d, :d]
            pats = patterns[g, :d]
            bases = np.nonzero(np.bitwise_and(np.arange(dim), masks[g]) == 0)[0]
            idx = bases[:, None] | pats[None, :]
            state[idx] = state[idx] @ u.T
            if noisy[g] == 1 and p > 0.0 and rng.random() < p:
                for i in range(m):
                    mask = 1 << int(shifts[g, i])
                    lo = np.nonzero(np.bitwise_and(np.arange(dim), mask) == 0)[0]
                    hi = lo | mask
                    pl = paulis[rng.integers(0, 3)]
                    a, b = state[lo].copy(), state[hi].copy()
                    state[lo] = pl[0, 0] * a + pl[0, 1] * b
                    state[hi] = pl[1, 0] * a + pl[1, 1] * b
        probs = np.abs(state) ** 2
        probs_acc += probs
        if want_shots:
            r = rng.random() * probs.sum()
            shot_counts[int(np.searchsorted(np.cumsum(probs), r))] += 1
    return probs_acc / n_traj, shot_counts


@njit(cache=True)
def _traj_core_numba(amps0, mats, nqs, patterns, masks, noisy, shifts, n,
                     p, n_traj, seed, want_shots):  # pragma: no cover - numba
    np.random.seed(seed)
    dim = amps0.shape[0]
    probs_acc = np.zeros(dim)
    shot_counts = np.zeros(dim, dtype=np.int64)
    state = np.empty(dim, dtype=np.complex128)
    buf = np.empty(8, dtype=np.complex128)
    n_gates = mats.shape[0]
    for _t in range(n_traj):
        for i in range(dim):
            state[i] = amps0[i]
        for g in range(n_gates):
            m = nqs[g]
            d = 1 << m
            mask = masks[g]
            for base in range(dim):
                if base & mask != 0:
                    continue
                for j in range(d):
                    buf[j] = state[base | patterns[g, j]]
                for r in range(d):
                    acc = 0.0 + 0.0j
                    for c in range(d):
                        acc += mats[g, r, c] * buf[c]
                    state[base | patterns[g, r]] = acc
            if noisy[g] == 1 and p > 0.0:
                if np.random.random() < p:
                    for i in range(m):
                        bit = 1 << shifts[g, i]
                        pl = np.random.randint(0, 3)
                        for lo in range(dim):
                            if lo & bit != 0:
                                continue
                            hi = lo | bit
                            a = state[lo]
                            b = state[hi]
                            if pl == 0:  # X
                                state[lo] = b
                                state[hi] = a
                            elif pl == 1:  # Y
                                state[lo] = -1j * b
                                state[hi] = 1j * a
                            else:  # Z
                                state[hi] = -b
        tot = 0.0
        for i in range(dim):
            pr = state[i].real * state[i].real + state[i].imag * state[i].imag
            probs_acc[i] += pr
            tot += pr
        if want_shots:
            r = np.random.random() * tot
            cum = 0.0
            hit = dim - 1
            for i in range(dim):
                cum += state[i].real * state[i].real + state[i].imag * state[i].imag
                if r < cum:
                    hit = i
                    break
            shot_counts[hit] += 1
    return probs_acc / n_traj, shot_counts


def run_trajectories(state0, compiled, p, n_traj, seed, want_shots):
    amps0 = np.ascontiguousarray(state0, dtype=np.complex128)
    if NUMBA_ENABLED:
        mats, nqs, patterns, masks, noisy, shifts, n = compiled
        return _traj_core_numba(
            amps0, mats, nqs, patterns, masks, noisy, shifts, n,
            float(p), int(n_traj), int(seed), bool(want_shots),
        )
    return _traj_core_numpy(amps0, compiled, float(p), int(n_traj), int(seed), bool(want_shots))


def _hjm_core_numpy(f0, drift_dt, vol_sqdt, z, rec_steps, store_curves, store_paths,
                    alive_lo, alive_hi, alive_w, dt):
    n_paths, n_steps, n_factors = z.shape
    m = f0.size
    f = np.broadcast_to(f0, (n_paths, m)).copy()
    n_rec = rec_steps.size
    discounts = np.zeros((n_paths, n_rec))
    f_sum = np.zeros((n_steps + 1, m))
    f_sq = np.zeros((n_steps + 1, m))
    curves = (
        np.zeros((n_paths, n_steps + 1, m)) if store_curves else np.zeros((1, 1, m))
    )
    short_rates = (
        np.zeros((n_paths, n_steps + 1)) if store_paths else np.zeros((1, 1))
    )
    f_sum[0] = n_paths * f0
    f_sq[0] = n_paths * f0**2
    if store_curves:
        curves[:, 0, :] = f
    # short rate at t=0 is the curve's first node (constant extrapolation)
    r_prev = f[:, 0].copy()
    if store_paths:
        short_rates[:, 0] = r_prev
    integral = np.zeros(n_paths)
    rec_pos = {int(s): k for k, s in enumerate(rec_steps)}
    for step in range(n_steps):
        shocks = z[:, step, :] @ vol_sqdt[step]
        f = f + drift_dt[step] + shocks
        # short rate at t_{step+1} sits between curve nodes alive_lo/alive_hi
        r_now = (1.0 - alive_w[step]) * f[:, alive_lo[step]] + alive_w[step] * f[:, alive_hi[step]]
        integral += 0.5 * (r_prev + r_now) * dt
        r_prev = r_now
        if store_paths:
            short_rates[:, step + 1] = r_now
        if step + 1 in rec_pos:
            discounts[:, rec_pos[step + 1]] = np.exp(-integral)
        f_sum[step + 1] = f.sum(axis=0)
        f_sq[step + 1] = (f**2).sum(axis=0)
        if store_curves:
            curves[:, step + 1, :] = f
    return discounts, f_sum, f_sq, short_rates, curves


@njit(cache=True)
def _hjm_core_numba(f0, drift_dt, vol_sqdt, z, rec_steps, store_curves, store_paths,
                    alive_lo, alive_hi, alive_w, dt):  # pragma: no cover - numba
    n_paths, n_steps, n_factors = z.shape
    m = f0.size
    n_rec = rec_steps.size
    discounts = np.zeros((n_paths, n_rec))
    f_sum = np.zeros((n_steps + 1, m))
    f_sq = np.zeros((n_steps + 1, m))
    if store_curves:
        curves = np.zeros((n_paths, n_steps + 1, m))
    else:
        curves = np.zeros((1, 1, m))
    if store_paths:
        short_rates = np.zeros((n_paths, n_steps + 1))
    else:
        short_rates = np.zeros((1, 1))
    f = np.empty(m)
    for pth in range(n_paths):
        for j in range(m):
            f[j] = f0[j]
            f_sum[0, j] += f0[j]
            f_sq[0, j] += f0[j] * f0[j]
        if store_curves:
            for j in range(m):
                curves[pth, 0, j] = f[j]
        r_prev = f[0]
        if store_paths:
            short_rates[pth, 0] = r_prev
        integral = 0.0
        rec_k = 0
        for step in range(n_steps):
            for j in range(m):
                shock = 0.0
                for q in range(n_factors):
                    shock += z[pth, step, q] * vol_sqdt[step, q, j]
                f[j] = f[j] + drift_dt[step, j] + shock
                f_sum[step + 1, j] += f[j]
                f_sq[step + 1, j] += f[j] * f[j]
            r_now = (1.0 - alive_w[step]) * f[alive_lo[step]] + alive_w[step] * f[alive_hi[step]]
            integral += 0.5 * (r_prev + r_now) * dt
            r_prev = r_now
            if store_paths:
                short_rates[pth, step + 1] = r_now
            if rec_k < n_rec and step + 1 == rec_steps[rec_k]:
                discounts[pth, rec_k] = np.exp(-integral)
                rec_k += 1
            if store_curves:
                for j in range(m):
                    curves[pth, step + 1, j] = f[j]
    return discounts, f_sum, f_sq, short_rates, curves


def run_hjm_paths(f0, drift_dt, vol_sqdt, z, rec_steps, store_curves, store_paths,
                  alive_lo, alive_hi, alive_w, dt):
    """Evolve all paths; see hjm.evolve for the array contracts."""
    rec = np.asarray(sorted(int(s) for s in rec_steps), dtype=np.int64)
    core = _hjm_core_numba if NUMBA_ENABLED else _hjm_core_numpy
    return core(
        np.ascontiguousarray(f0, dtype=np.float64),
        np.ascontiguousarray(drift_dt, dtype=np.float64),
        np.ascontiguousarray(vol_sqdt, dtype=np.float64),
        np.ascontiguousarray(z, dtype=np.float64),
        rec,
        bool(store_curves),
        bool(store_paths),
        np.ascontiguousarray(alive_lo, dtype=np.int64),
        np.ascontiguousarray(alive_hi, dtype=np.int64),
        np.ascontiguousarray(alive_w, dtype=np.float64),
        float(dt),
    )

"""Multi-factor forward-rate Monte Carlo: covariance estimation from rate
history, PCA volatility factors (classical or quantum-extracted),
no-arbitrage drift, Euler-Maruyama curve evolution on fixed absolute
maturities, and zero-coupon bond pricing with a martingale check.

Conventions: volatility factors depend only on time to maturity tau and
are piecewise linear between tenor nodes with constant extrapolation
below the shortest tenor. Rate changes are annualized with a
configurable factor (default 252 trading days).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .errors import AmbiguityError, ValidationError
from .linalg import eigh, normalize_to_density
from .qpca import (
    QpcaConfig,
    check_ambiguity,
    extract_leading_component,
    resolve_target_bitstring,
    _child_seed,
)

DEFAULT_ANNUALIZATION = 252.0
_PATH_STORAGE_CAP = 4_000_000  # elements; beyond this only summaries are kept
_CHUNK = 16384


def validate_grid(tenors) -> np.ndarray:
    g = np.asarray(tenors, dtype=float).reshape(-1)
    if g.size < 1 or g[0] <= 0.0:
        raise ValidationError("tenor grid must start above 0")
    if np.any(np.diff(g) <= 0.0):
        raise ValidationError("tenor grid must be strictly increasing")
    if not np.all(np.isfinite(g)):
        raise ValidationError("tenor grid must be finite")
    return g


@dataclass(frozen=True)
class ForwardCurve:
    """Instantaneous forward rates f(t, t + tau) on a tenor grid."""

    grid: np.ndarray
    rates: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        g = validate_grid(self.grid)
        r = np.asarray(self.rates, dtype=float).reshape(-1)
        if r.size != g.size:
            raise ValidationError(f"{r.size} rates for {g.size} tenors")
        if not np.all(np.isfinite(r)):
            raise ValidationError("rates must be finite")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "rates", r)

    def rate_at(self, tau: float) -> float:
        """Piecewise-linear in tau, constant below the first tenor."""
        return float(np.interp(tau, self.grid, self.rates))


def flat_curve(grid, level: float, t: float = 0.0) -> ForwardCurve:
    g = validate_grid(grid)
    return ForwardCurve(g, np.full(g.size, float(level)), t)


@dataclass(frozen=True)
class CovarianceMatrix:
    """Annualized covariance of forward-rate changes on a tenor grid."""

    grid: np.ndarray
    matrix: np.ndarray

    def __post_init__(self):
        g = validate_grid(self.grid)
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (g.size, g.size):
            raise ValidationError(f"covariance shape {m.shape} vs grid size {g.size}")
        if np.max(np.abs(m - m.T)) > 1e-12 * max(1.0, np.max(np.abs(m))):
            raise ValidationError("covariance must be symmetric")
        if np.any(np.diag(m) < -1e-300):
            raise ValidationError("variances must be nonnegative")
        m = (m + m.T) / 2.0
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class VolatilityFactorSet:
    """Rows of sigma_i(tau_j) = sqrt(lambda_i) * v_i, ready for simulation."""

    grid: np.ndarray
    factors: np.ndarray
    eigenvalues: np.ndarray
    explained_variance: float
    provenance: str = "classical"
    uncertainty: np.ndarray | None = None

    def __post_init__(self):
        g = validate_grid(self.grid)
        f = np.atleast_2d(np.asarray(self.factors, dtype=float))
        if f.shape[1] != g.size:
            raise ValidationError("factor rows must match the tenor grid")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "factors", f)
        object.__setattr__(self, "eigenvalues", np.asarray(self.eigenvalues, dtype=float))

    @property
    def n_factors(self) -> int:
        return self.factors.shape[0]

    def vol_at(self, tau) -> np.ndarray:
        """sigma_i(tau) for every factor; constant below the first tenor."""
        tau = np.asarray(tau, dtype=float)
        out = np.empty((self.n_factors,) + tau.shape)
        for i in range(self.n_factors):
            out[i] = np.interp(tau, self.grid, self.factors[i])
        return out

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.tolist(),
            "factors": self.factors.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "explained_variance": self.explained_variance,
            "provenance": self.provenance,
            "uncertainty": None if self.uncertainty is None else self.uncertainty.tolist(),
        }


@dataclass(frozen=True)
class HjmConfig:
    dt: float
    horizon: float
    n_paths: int
    n_factors: int = 1
    seed: int = 0
    initial_curve: ForwardCurve | None = None

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValidationError("dt must be positive")
        if self.horizon < self.dt:
            raise ValidationError("horizon must be at least one step")
        if self.n_paths < 1:
            raise ValidationError("n_paths must be >= 1")
        if self.n_factors < 1:
            raise ValidationError("n_factors must be >= 1")


@dataclass(frozen=True)
class PathResult:
    """Simulated ensemble. Full per-path arrays are kept only while
    n_paths * n_steps stays below a storage cap; the per-step mean/std
    of the curve and the seed provenance are always present."""

    times: np.ndarray
    grid: np.ndarray
    mean_curve: np.ndarray
    std_curve: np.ndarray
    seed: int
    short_rates: np.ndarray | None = None
    money_market: np.ndarray | None = None
    curves: np.ndarray | None = None

    def summary_dict(self) -> dict:
        return {
            "times": self.times.tolist(),
            "grid": self.grid.tolist(),
            "mean_curve": self.mean_curve.tolist(),
            "std_curve": self.std_curve.tolist(),
            "seed": self.seed,
        }


def estimate_covariance(history, annualization: float = DEFAULT_ANNUALIZATION) -> CovarianceMatrix:
    """Sample covariance of successive forward-rate changes, annualized.

    `history` is a sequence of ForwardCurve on identical grids (or a
    (grid, rates_matrix) pair). Needs at least three observations so the
    unbiased n-1 denominator is defined.
    """
    if isinstance(history, tuple) and len(history) == 2:
        grid = validate_grid(history[0])
        rates = np.asarray(history[1], dtype=float)
    else:
        curves = list(history)
        if len(curves) < 2:
            raise ValidationError("need at least two observations")
        grid = curves[0].grid
        for c in curves[1:]:
            if c.grid.size != grid.size or np.max(np.abs(c.grid - grid)) > 1e-12:
                raise ValidationError("history curves must share one tenor grid")
        rates = np.stack([c.rates for c in curves])
    if rates.ndim != 2 or rates.shape[1] != grid.size:
        raise ValidationError("rates matrix must be (n_obs, n_tenors)")
    if rates.shape[0] < 2:
        raise ValidationError("need at least two observations")
    diffs = np.diff(rates, axis=0)
    if diffs.shape[0] < 2:
        raise ValidationError(
            "need at least three observations for an unbiased covariance"
        )
    if annualization <= 0.0:
        raise ValidationError("annualization must be positive")
    cov = np.atleast_2d(np.cov(diffs.T, ddof=1)) * annualization
    return CovarianceMatrix(grid, cov)


def extract_factors(cov: CovarianceMatrix, r: int) -> VolatilityFactorSet:
    """Top-r PCA factors sigma_i = sqrt(lambda_i) v_i of the covariance."""
    if not 1 <= r <= cov.grid.size:
        raise ValidationError(f"r={r} outside 1..{cov.grid.size}")
    dec = eigh(cov.matrix)
    vals = dec.eigenvalues
    scale = max(float(vals[0]), 1e-300)
    if vals.min() < -1e-10 * scale:
        raise ValidationError(f"covariance has negative eigenvalue {vals.min():.3e}")
    vals = np.clip(vals, 0.0, None)
    factors = np.empty((r, cov.grid.size))
    for i in range(r):
        row = np.sqrt(vals[i]) * np.real(dec.eigenvectors[:, i])
        if row.sum() < 0.0:
            row = -row
        factors[i] = row
    total = float(vals.sum())
    explained = float(vals[:r].sum() / total) if total > 0 else 1.0
    return VolatilityFactorSet(cov.grid, factors, vals[:r], explained)


def _pad_to_power_of_two(m: np.ndarray) -> np.ndarray:
    dim = m.shape[0]
    target = 1 << (dim - 1).bit_length()
    if target == dim:
        return m
    out = np.zeros((target, target))
    out[:dim, :dim] = m
    return out


def leading_value_representative(value: float) -> float:
    """Map a measured phase in [0, 1) to the leading-eigenvalue estimate.

    Trace-one PSD spectra live in [0, 1] and the extraction targets the
    top of the spectrum, so a phase of exactly zero is the wrapped image
    of eigenvalue 1 (a pure state), not of 0.
    """
    if not 0.0 <= value < 1.0:
        raise ValidationError(f"phase value {value} outside [0, 1)")
    return 1.0 if value == 0.0 else value


def quantum_extract_factors(cov: CovarianceMatrix, cfg: QpcaConfig, r: int = 1) -> VolatilityFactorSet:
    """Leading volatility factor via the phase-estimation extraction.

    Only rank-1 extraction is supported (no deflation). The eigenvalue
    comes from the refined bitstring value times the trace, with the
    wrap-around representative of `leading_value_representative`. Raises
    AmbiguityError when two random starts disagree (which includes every
    exactly-pure input: phases 1 and 0 alias at any bit width, so the
    eigenvector is unrecoverable even though the eigenvalue reads 1.0).
    """
    if r != 1:
        raise ValidationError("quantum extraction supports r=1 only")
    m0 = cov.grid.size
    padded = _pad_to_power_of_two(cov.matrix)
    tr = float(np.trace(cov.matrix))
    rho = normalize_to_density(padded)
    resolved = replace(cfg, target_bitstring=resolve_target_bitstring(rho, cfg))
    report = check_ambiguity(
        rho,
        resolved,
        seed_b=_child_seed(cfg.seed, 0xAB),
        seed_c=_child_seed(cfg.seed, 0xAC),
    )
    if not report.distinct_eigenvector:
        raise AmbiguityError(
            f"random starts disagree (cross fidelity {report.cross_fidelity:.3f}); "
            "increase n_bits"
        )
    result = extract_leading_component(rho, cfg)
    lam_hat = leading_value_representative(result.eigenvalue) * tr
    vec = np.real(result.eigenvector)[:m0]
    nrm = np.linalg.norm(vec)
    if nrm < 1e-9:
        raise ValidationError("recovered eigenvector has no weight on the grid")
    vec = vec / nrm
    row = np.sqrt(lam_hat) * vec
    if row.sum() < 0.0:
        row = -row
    explained = float(lam_hat / tr)
    return VolatilityFactorSet(
        cov.grid,
        row[None, :],
        np.array([lam_hat]),
        explained,
        provenance="quantum",
        uncertainty=result.coefficient_uncertainty[:m0],
    )


def _factor_integrals(factors: VolatilityFactorSet):
    """Cumulative integral of each factor from 0 to every tenor node."""
    g = factors.grid
    f = factors.factors
    cum = np.zeros_like(f)
    # constant extrapolation below the first tenor
    cum[:, 0] = f[:, 0] * g[0]
    for j in range(1, g.size):
        seg = 0.5 * (f[:, j - 1] + f[:, j]) * (g[j] - g[j - 1])
        cum[:, j] = cum[:, j - 1] + seg
    return cum


def drift(factors: VolatilityFactorSet, tau) -> np.ndarray | float:
    """No-arbitrage drift alpha(tau) = sum_i sigma_i(tau) * int_0^tau sigma_i.

    The integral is the exact trapezoid of the piecewise-linear factor
    interpolant. tau may be a scalar or an array.
    """
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    g = factors.grid
    if np.any(taus < 0.0) or np.any(taus > g[-1] + 1e-12):
        raise ValidationError(f"tau outside [0, {g[-1]}]")
    cum = _factor_integrals(factors)
    out = np.zeros(taus.size)
    for i in range(factors.n_factors):
        sig = np.interp(taus, g, factors.factors[i])
        # integral up to tau: constant part below g[0], else node + remainder
        below = taus <= g[0]
        integ = np.empty(taus.size)
        integ[below] = factors.factors[i, 0] * taus[below]
        if np.any(~below):
            t_hi = taus[~below]
            idx = np.searchsorted(g, t_hi, side="right") - 1
            s_lo = factors.factors[i][idx]
            s_hi = np.interp(t_hi, g, factors.factors[i])
            integ[~below] = cum[i][idx] + 0.5 * (s_lo + s_hi) * (t_hi - g[idx])
        out += sig * integ
    return out if np.asarray(tau).ndim else float(out[0])


def bond_price(curve: ForwardCurve, maturity: float) -> float:
    """P(t, T) = exp(-integral of the forward interpolant from t to T)."""
    tau = maturity - curve.t
    if tau < -1e-12 or tau > curve.grid[-1] + 1e-12:
        raise ValidationError(
            f"maturity {maturity} outside [{curve.t}, {curve.t + curve.grid[-1]}]"
        )
    tau = max(tau, 0.0)
    if tau == 0.0:
        return 1.0
    g, f = curve.grid, curve.rates
    nodes = [0.0] + [float(x) for x in g[g < tau]] + [tau]
    vals = [curve.rate_at(x) for x in nodes]
    integral = float(np.trapezoid(vals, nodes))
    return float(np.exp(-integral))


def _alive_interp(grid: np.ndarray, times: np.ndarray):
    """Node indices and weights locating each step time on the maturity grid."""
    n_steps = times.size - 1
    lo = np.zeros(n_steps, dtype=np.int64)
    hi = np.zeros(n_steps, dtype=np.int64)
    w = np.zeros(n_steps)
    for s in range(n_steps):
        t = times[s + 1]
        if t <= grid[0]:
            lo[s] = hi[s] = 0
            w[s] = 0.0
            continue
        j = int(np.searchsorted(grid, t, side="left"))
        if j >= grid.size:
            raise ValidationError("maturity grid exhausted before horizon")
        if abs(grid[j] - t) < 1e-12:
            lo[s] = hi[s] = j
            w[s] = 0.0
        else:
            lo[s], hi[s] = j - 1, j
            w[s] = (t - grid[j - 1]) / (grid[j] - grid[j - 1])
    return lo, hi, w


def _simulate(cfg: HjmConfig, factors: VolatilityFactorSet, rec_steps,
              store_curves: bool, store_paths: bool):
    if cfg.initial_curve is None:
        raise ValidationError("config needs an initial curve")
    curve = cfg.initial_curve
    grid = curve.grid
    n_steps = int(round(cfg.horizon / cfg.dt))
    if n_steps < 1:
        raise ValidationError("horizon shorter than one step")
    times = np.arange(n_steps + 1) * cfg.dt
    if grid[-1] + 1e-12 < times[-1]:
        raise ValidationError("maturity grid exhausted before horizon")
    if factors.grid[-1] + 1e-12 < grid[-1]:
        raise ValidationError("factors do not cover the simulation grid")
    # per-step drift and volatility at time-to-maturity T_j - t_i
    taus = np.clip(grid[None, :] - times[:-1, None], 0.0, None)
    dead = grid[None, :] < times[:-1, None] - 1e-12
    drift_dt = np.empty((n_steps, grid.size))
    vol_sqdt = np.empty((n_steps, factors.n_factors, grid.size))
    sqdt = np.sqrt(cfg.dt)
    for s in range(n_steps):
        drift_dt[s] = drift(factors, taus[s]) * cfg.dt
        vol_sqdt[s] = factors.vol_at(taus[s]) * sqdt
        drift_dt[s][dead[s]] = 0.0
        vol_sqdt[s][:, dead[s]] = 0.0
    lo, hi, w = _alive_interp(grid, times)

    rec = sorted(set(int(s) for s in rec_steps))
    if any(s < 1 or s > n_steps for s in rec):
        raise ValidationError("recorded steps outside the horizon")
    parent = np.random.SeedSequence(cfg.seed)
    n_chunks = (cfg.n_paths + _CHUNK - 1) // _CHUNK
    children = parent.spawn(n_chunks)
    disc_parts = []
    f_sum = np.zeros((n_steps + 1, grid.size))
    f_sq = np.zeros((n_steps + 1, grid.size))
    sr_parts = []
    curve_parts = []
    done = 0
    for ci in range(n_chunks):
        count = min(_CHUNK, cfg.n_paths - done)
        done += count
        rng = np.random.default_rng(children[ci])
        z = rng.standard_normal((count, n_steps, factors.n_factors))
        disc, fs, fq, srs, cvs = _kernels.run_hjm_paths(
            curve.rates, drift_dt, vol_sqdt, z, rec, store_curves, store_paths,
            lo, hi, w, cfg.dt,
        )
        disc_parts.append(disc)
        f_sum += fs
        f_sq += fq
        if store_paths:
            sr_parts.append(srs)
        if store_curves:
            curve_parts.append(cvs)
    discounts = np.vstack(disc_parts) if disc_parts else np.zeros((0, len(rec)))
    mean_curve = f_sum / cfg.n_paths
    var = np.clip(f_sq / cfg.n_paths - mean_curve**2, 0.0, None)
    std_curve = np.sqrt(var)
    short_rates = np.vstack(sr_parts) if store_paths else None
    curves = np.vstack(curve_parts) if store_curves else None
    return times, rec, discounts, mean_curve, std_curve, short_rates, curves


def evolve(cfg: HjmConfig, factors: VolatilityFactorSet,
           store_curves: bool | None = None) -> PathResult:
    """Euler-Maruyama evolution of the whole forward curve.

    f_{t+dt}(T_j) = f_t(T_j) + alpha(T_j - t) dt + sum_i sigma_i(T_j - t)
    sqrt(dt) Z_i with independent standard normals per factor, step and
    path. The short rate r(t) = f(t, t) interpolates the curve at tau=0
    and the money-market account accumulates exp(+integral r) by
    trapezoid. Identical seeds give identical results.
    """
    n_steps = int(round(cfg.horizon / cfg.dt))
    budget = cfg.n_paths * (n_steps + 1)
    store_paths = budget <= _PATH_STORAGE_CAP
    if store_curves is None:
        store_curves = budget * cfg.initial_curve.grid.size <= _PATH_STORAGE_CAP if cfg.initial_curve is not None else False
    if store_curves and not store_paths:
        raise ValidationError("cannot store curves for runs beyond the path-storage cap")
    times, _, _, mean_curve, std_curve, short_rates, curves = _simulate(
        cfg, factors, rec_steps=[n_steps], store_curves=store_curves,
        store_paths=store_paths,
    )
    money = None
    if short_rates is not None:
        # B(t) = exp(+int_0^t r), accumulated with the same trapezoid rule
        increments = 0.5 * (short_rates[:, 1:] + short_rates[:, :-1]) * cfg.dt
        money = np.exp(np.concatenate(
            [np.zeros((short_rates.shape[0], 1)), np.cumsum(increments, axis=1)], axis=1
        ))
    return PathResult(
        times=times,
        grid=cfg.initial_curve.grid,
        mean_curve=mean_curve,
        std_curve=std_curve,
        seed=cfg.seed,
        short_rates=short_rates,
        money_market=money,
        curves=curves,
    )


@dataclass(frozen=True)
class MartingaleRow:
    maturity: float
    mc_estimate: float
    mc_standard_error: float
    analytic_price: float

    @property
    def abs_error(self) -> float:
        return abs(self.mc_estimate - self.analytic_price)

    def to_dict(self) -> dict:
        return {
            "maturity": self.maturity,
            "mc_estimate": self.mc_estimate,
            "mc_standard_error": self.mc_standard_error,
            "analytic_price": self.analytic_price,
            "abs_error": self.abs_error,
        }


def martingale_check(cfg: HjmConfig, factors: VolatilityFactorSet, maturities) -> list:
    """Compare MC discount factors E[exp(-int r)] to initial bond prices.

    Each requested maturity snaps to the nearest time step. Returns one
    MartingaleRow per maturity.
    """
    mats = [float(m) for m in maturities]
    if not mats:
        raise ValidationError("need at least one maturity")
    n_steps = int(round(cfg.horizon / cfg.dt))
    rec = []
    for m in mats:
        step = int(round(m / cfg.dt))
        if step < 1 or step > n_steps:
            raise ValidationError(f"maturity {m} outside the simulated horizon")
        rec.append(step)
    _, rec_sorted, discounts, _, _, _, _ = _simulate(
        cfg, factors, rec_steps=rec, store_curves=False, store_paths=False
    )
    rows = []
    pos = {s: i for i, s in enumerate(rec_sorted)}
    for m in mats:
        step = int(round(m / cfg.dt))
        col = discounts[:, pos[step]]
        est = float(col.mean())
        se = float(col.std(ddof=1) / np.sqrt(col.size)) if col.size > 1 else 0.0
        rows.append(
            MartingaleRow(
                maturity=step * cfg.dt,
                mc_estimate=est,
                mc_standard_error=se,
                analytic_price=bond_price(cfg.initial_curve, step * cfg.dt),
            )
        )
    return rows


def read_history_csv(path) -> tuple:
    """Parse `date,tenor_1m,tenor_3m,...` history into (grid, dates, rates).

    Tenor suffixes encode years: `Nm` is N/12, `Ny` is N, `Nw` is N/52.
    Rates are decimal per annum, one row per observation date.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        if not header or header[0].strip().lower() != "date":
            raise ValidationError(f"{path}: first column must be 'date'")
        tenors = []
        for col in header[1:]:
            name = col.strip().lower()
            if not name.startswith("tenor_"):
                raise ValidationError(f"{path}: bad tenor column {col!r}")
            suffix = name[len("tenor_"):]
            unit = suffix[-1]
            try:
                qty = float(suffix[:-1])
            except ValueError:
                raise ValidationError(f"{path}: bad tenor column {col!r}") from None
            scale = {"m": 1.0 / 12.0, "y": 1.0, "w": 1.0 / 52.0}.get(unit)
            if scale is None:
                raise ValidationError(f"{path}: unknown tenor unit in {col!r}")
            tenors.append(qty * scale)
        grid = validate_grid(tenors)
        dates = []
        rows = []
        for ln, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != grid.size + 1:
                raise ValidationError(f"{path}:{ln}: expected {grid.size + 1} fields")
            dates.append(row[0].strip())
            try:
                rows.append([float(x) for x in row[1:]])
            except ValueError:
                raise ValidationError(f"{path}:{ln}: non-numeric rate") from None
    if not rows:
        raise ValidationError(f"{path}: no observations")
    return grid, dates, np.asarray(rows, dtype=float)

"""Batch command-line front end emitting deterministic JSON reports.

Subcommands: decompose (spectral/factor analysis of a covariance), qpca
(iterative quantum extraction of the leading component), hjm (forward
curve Monte Carlo with bond prices and martingale table), ingest-check
(validate a rate-history CSV). Exit codes: 0 success, 2 validation
error, 3 numerical/convergence error.
"""
from __future__ import annotations

import argparse
import datetime
import json
import os
import sys

import numpy as np

from . import __version__
from ._backend import backend_name
from .errors import NumericalError, QhjmError, ValidationError
from .fixtures import BUILTIN_NAMES, builtin_matrix
from .hjm import (
    CovarianceMatrix,
    HjmConfig,
    VolatilityFactorSet,
    bond_price,
    estimate_covariance,
    evolve,
    extract_factors,
    flat_curve,
    martingale_check,
    quantum_extract_factors,
    read_history_csv,
)
from .linalg import eigh, normalize_to_density
from .qpca import (
    QpcaConfig,
    basis_histograms,
    build_qpca_circuit,
    check_ambiguity,
    extract_leading_component,
    _child_seed,
)
from .simulator import NoiseModel
from .synthesis import entangling_count

_EXIT_VALIDATION = 2
_EXIT_NUMERICAL = 3


def _default_seed() -> int:
    env = os.environ.get("QHJM_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ValidationError(f"QHJM_SEED={env!r} is not an integer") from None


def _existing_file(path: str) -> str:
    if not os.path.isfile(path):
        raise argparse.ArgumentTypeError(f"no such file: {path}")
    return path


def _positive_int(value: str) -> int:
    iv = int(value)
    if iv < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return iv


def _load_matrix(args):
    """Matrix + grid from --builtin or a JSON file {"matrix": ..., "grid": ...}."""
    if args.builtin:
        return builtin_matrix(args.builtin)
    with open(args.matrix) as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict) or "matrix" not in payload:
        raise ValidationError(f"{args.matrix}: expected an object with a 'matrix' key")
    matrix = np.asarray(payload["matrix"], dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValidationError(f"{args.matrix}: matrix must be square")
    grid = payload.get("grid")
    grid = np.asarray(grid, dtype=float) if grid is not None else np.arange(1.0, matrix.shape[0] + 1.0)
    return matrix, grid


def _report(command: str, config: dict, provenance: dict, results: dict) -> dict:
    return {
        "schema_version": 1,
        "command": command,
        "config": config,
        "provenance": {"backend": backend_name(), **provenance},
        "results": results,
        "generated_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _emit(report: dict, output: str | None) -> None:
    text = json.dumps(report, indent=2, sort_keys=True, default=_json_default)
    if output:
        with open(output, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def cmd_decompose(args) -> dict:
    matrix, grid = _load_matrix(args)
    cov = CovarianceMatrix(grid, matrix)
    r = args.r if args.r is not None else cov.grid.size
    factors = extract_factors(cov, r)
    dec = eigh(cov.matrix)
    results = {
        "eigenvalues": dec.eigenvalues.tolist(),
        "eigenvectors": np.real(dec.eigenvectors).tolist(),
        "explained_variance": factors.explained_variance,
        "near_degenerate_pairs": [list(p) for p in dec.near_degenerate],
        "factors": factors.to_dict(),
    }
    config = {
        "source": args.builtin or args.matrix,
        "r": r,
        "seed": args.seed,
    }
    return _report("decompose", config, {"seed": args.seed}, results)


def cmd_qpca(args) -> dict:
    matrix, _ = _load_matrix(args)
    dim = matrix.shape[0]
    target = 1 << (dim - 1).bit_length()
    if target != dim:
        padded = np.zeros((target, target))
        padded[:dim, :dim] = matrix
        matrix = padded
    rho = normalize_to_density(matrix)
    noise = NoiseModel(args.noise, seed=_child_seed(args.seed, 0xD0)) if args.noise else None
    cfg = QpcaConfig(
        n_bits=args.bits,
        shots=args.shots,
        max_iterations=args.iterations,
        noise=noise,
        seed=args.seed,
        target_bitstring=args.target_bits,
    )
    dec = eigh(rho)
    run_cfg = cfg if cfg.target_bitstring is not None else QpcaConfig(
        **{**cfg.__dict__, "target_bitstring": "1" * cfg.n_bits}
    )
    ambiguity = check_ambiguity(
        rho, run_cfg, _child_seed(args.seed, 0xAB), _child_seed(args.seed, 0xAC)
    )
    result = extract_leading_component(rho, cfg, oracle_check=True)
    mags = np.abs(result.eigenvector)
    histograms = basis_histograms(rho, mags, run_cfg)
    circuit = build_qpca_circuit(rho, cfg)
    n_outcomes = 2**cfg.n_bits
    reg = result.eigenvalue_register_probs
    tv_uniform = (
        None if reg is None else float(0.5 * np.sum(np.abs(reg - 1.0 / n_outcomes)))
    )
    results = {
        "oracle": {
            "eigenvalues": dec.eigenvalues.tolist(),
            "leading_eigenvector": np.real(dec.eigenvectors[:, 0]).tolist(),
        },
        "estimate": result.to_dict(),
        "ambiguity": ambiguity.to_dict(),
        "histograms": histograms,
        "entangling_count": entangling_count(circuit),
        "eigenvalue_register_tv_to_uniform": tv_uniform,
    }
    config = {
        "source": args.builtin or args.matrix,
        "bits": args.bits,
        "shots": args.shots,
        "iterations": args.iterations,
        "noise": args.noise,
        "target_bits": args.target_bits,
        "seed": args.seed,
    }
    prov = {"seed": args.seed, "shots": args.shots, "noise_p": args.noise or None}
    return _report("qpca", config, prov, results)


def _build_factor_set(args, curve_grid):
    if args.sigma is not None:
        level = float(args.sigma)
        return VolatilityFactorSet(
            curve_grid,
            np.full((1, curve_grid.size), level),
            np.array([level**2]),
            1.0,
            provenance="override",
        )
    if args.history:
        grid, _, rates = read_history_csv(args.history)
        cov = estimate_covariance((grid, rates), annualization=args.annualization)
    else:
        matrix, grid = builtin_matrix(args.factors_from)
        cov = CovarianceMatrix(grid, matrix)
    if args.quantum:
        qcfg = QpcaConfig(n_bits=args.bits, shots=args.shots, seed=args.seed)
        return quantum_extract_factors(cov, qcfg, r=args.r)
    return extract_factors(cov, args.r)


def cmd_hjm(args) -> dict:
    if args.sigma is None and not args.history and not args.factors_from:
        raise ValidationError("need --history, --factors-from, or --sigma")
    weekly = np.arange(1, int(np.ceil(args.horizon * 52.0)) + 1) / 52.0
    if args.sigma is not None:
        curve_grid = weekly
        factors = _build_factor_set(args, curve_grid)
    else:
        factors = _build_factor_set(args, None)
        if factors.grid[-1] + 1e-12 < args.horizon:
            raise ValidationError(
                f"factor tenors end at {factors.grid[-1]:.4f}y, before the "
                f"{args.horizon}y horizon"
            )
        curve_grid = np.union1d(weekly[weekly <= factors.grid[-1] + 1e-12], factors.grid)
    curve = flat_curve(curve_grid, args.f0)
    cfg = HjmConfig(
        dt=args.dt,
        horizon=args.horizon,
        n_paths=args.paths,
        n_factors=factors.n_factors,
        seed=args.seed,
        initial_curve=curve,
    )
    result = evolve(cfg, factors)
    if args.maturities:
        maturities = [float(x) for x in args.maturities.split(",")]
    else:
        maturities = [m for m in (0.25, 0.5, 1.0) if m <= args.horizon + 1e-12] or [args.horizon]
    rows = martingale_check(cfg, factors, maturities)
    n_steps = len(result.times) - 1
    stride = max(1, n_steps // 12)
    picks = list(range(0, n_steps + 1, stride))
    if picks[-1] != n_steps:
        picks.append(n_steps)
    results = {
        "factor_set": factors.to_dict(),
        "path_summary": {
            "times": [result.times[i] for i in picks],
            "mean_curve": [result.mean_curve[i].tolist() for i in picks],
            "std_curve": [result.std_curve[i].tolist() for i in picks],
            "grid": result.grid.tolist(),
        },
        "bond_prices": [
            {"maturity": m, "price": bond_price(curve, m)} for m in maturities
        ],
        "martingale": [row.to_dict() for row in rows],
    }
    config = {
        "source": args.history or args.factors_from or f"sigma={args.sigma}",
        "r": args.r,
        "quantum": bool(args.quantum),
        "paths": args.paths,
        "dt": args.dt,
        "horizon": args.horizon,
        "f0": args.f0,
        "sigma": args.sigma,
        "maturities": maturities,
        "annualization": args.annualization,
        "seed": args.seed,
    }
    return _report("hjm", config, {"seed": args.seed}, results)


def cmd_ingest_check(args) -> dict:
    grid, dates, rates = read_history_csv(args.history)
    results = {
        "rows": len(dates),
        "grid": grid.tolist(),
        "first_date": dates[0],
        "last_date": dates[-1],
        "rate_min": float(rates.min()),
        "rate_max": float(rates.max()),
    }
    config = {"history": args.history, "seed": args.seed}
    return _report("ingest-check", config, {"seed": args.seed}, results)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qhjm",
        description="Quantum-assisted factor reduction for forward-rate Monte Carlo",
    )
    parser.add_argument("--version", action="version", version=f"qhjm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--seed", type=int, default=None, help="master RNG seed (default: QHJM_SEED or 0)")
        p.add_argument("-o", "--output", default=None, help="write the JSON report here instead of stdout")
        p.add_argument("--format", choices=["json"], default="json")

    def add_matrix_source(p):
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--builtin", choices=BUILTIN_NAMES, help="bundled fixture matrix")
        src.add_argument("--matrix", type=_existing_file, help="JSON file with 'matrix' (+ optional 'grid')")

    p = sub.add_parser("decompose", help="spectral decomposition and volatility factors")
    add_matrix_source(p)
    p.add_argument("--r", type=_positive_int, default=None, help="factors to keep (default: all)")
    add_common(p)
    p.set_defaults(fn=cmd_decompose)

    p = sub.add_parser("qpca", help="iterative quantum extraction of the leading component")
    add_matrix_source(p)
    p.add_argument("--bits", type=_positive_int, required=True, help="eigenvalue register width")
    p.add_argument("--shots", type=_positive_int, default=8192)
    p.add_argument("--iterations", type=_positive_int, default=10)
    p.add_argument("--noise", type=float, default=0.0, help="two-qubit depolarizing probability")
    p.add_argument("--target-bits", default=None, help="projection bitstring (default: all ones)")
    add_common(p)
    p.set_defaults(fn=cmd_qpca)

    p = sub.add_parser("hjm", help="forward-curve Monte Carlo and martingale table")
    p.add_argument("--history", type=_existing_file, default=None, help="rate history CSV")
    p.add_argument("--factors-from", choices=BUILTIN_NAMES, default=None, help="bundled covariance")
    p.add_argument("--sigma", type=float, default=None, help="flat single-factor volatility override")
    p.add_argument("--quantum", action="store_true", help="extract the leading factor on the simulator")
    p.add_argument("--bits", type=_positive_int, default=3, help="eigenvalue register width for --quantum")
    p.add_argument("--shots", type=_positive_int, default=8192)
    p.add_argument("--r", type=_positive_int, default=1, help="number of PCA factors")
    p.add_argument("--paths", type=_positive_int, default=10000)
    p.add_argument("--dt", type=float, default=1.0 / 252.0)
    p.add_argument("--horizon", type=float, default=0.5)
    p.add_argument("--f0", type=float, default=0.03, help="flat initial forward level")
    p.add_argument("--maturities", default=None, help="comma-separated bond maturities in years")
    p.add_argument("--annualization", type=float, default=252.0)
    add_common(p)
    p.set_defaults(fn=cmd_hjm)

    p = sub.add_parser("ingest-check", help="validate a rate-history CSV")
    p.add_argument("--history", type=_existing_file, required=True)
    add_common(p)
    p.set_defaults(fn=cmd_ingest_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.seed is None:
            args.seed = _default_seed()
        report = args.fn(args)
        _emit(report, args.output)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_VALIDATION
    except (NumericalError, QhjmError) as exc:
        hint = ""
        if "increase n_bits" in str(exc) or "projection" in str(exc):
            hint = " (hint: increase --bits)"
        print(f"error: {exc}{hint}", file=sys.stderr)
        return _EXIT_NUMERICAL
    return 0


if __name__ == "__main__":
    sys.exit(main())

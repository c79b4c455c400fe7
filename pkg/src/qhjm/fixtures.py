"""Bundled reference matrices so demos and tests run with no external data.

`SIGMA3` is an annualized covariance of daily changes in the 1m/3m/6m
forward rates (historical-data estimate from the standard textbook
treatment of yield-curve PCA); `SIGMA2` is its leading 2x2 block and
`SIGMA4` the zero-padded power-of-two extension.
"""
from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .linalg import normalize_to_density

TENORS3 = np.array([1.0 / 12.0, 3.0 / 12.0, 6.0 / 12.0])
TENORS2 = TENORS3[:2]

SIGMA3 = np.array(
    [
        [0.000189, 0.000097, 0.000091],
        [0.000097, 0.000106, 0.000101],
        [0.000091, 0.000101, 0.000126],
    ]
)

SIGMA2 = SIGMA3[:2, :2].copy()

SIGMA4 = np.zeros((4, 4))
SIGMA4[:3, :3] = SIGMA3


def rho2() -> np.ndarray:
    return normalize_to_density(SIGMA2)


def rho4() -> np.ndarray:
    return normalize_to_density(SIGMA4)


_BUILTINS = {
    "sigma2": lambda: (SIGMA2.copy(), TENORS2.copy()),
    "sigma3": lambda: (SIGMA3.copy(), TENORS3.copy()),
    "sigma4": lambda: (SIGMA4.copy(), TENORS3.copy()),
    "rho2": lambda: (rho2(), TENORS2.copy()),
    "rho4": lambda: (rho4(), TENORS3.copy()),
}


def builtin_matrix(name: str):
    """Look up a bundled matrix by CLI name; returns (matrix, tenor grid)."""
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise ValidationError(
            f"unknown builtin {name!r}; choose from {sorted(_BUILTINS)}"
        ) from None
    return factory()


BUILTIN_NAMES = tuple(sorted(_BUILTINS))

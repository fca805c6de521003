"""Raw covariates to regression features.

The transformation is fixed and deterministic: categorical fields are
dummy-encoded against a reference level, the resulting numeric vector of
length D is expanded to all monomials of total degree <= 2, and expanded
training matrices are standardized column-wise.

Monomial order is [1, x_1, ..., x_D, x_1*x_1, x_1*x_2, ..., x_D*x_D] with
the quadratic block in row-major upper-triangle order (j >= i).  The
expanded dimension is d = (D^2 + 3D + 2) / 2.  Fixing the order makes
serialized coefficient vectors portable across runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError

__all__ = [
    "FeatureSchema",
    "Scaler",
    "quadratic_dim",
    "encode",
    "expand_quadratic",
    "expand_matrix",
    "fit_scaler",
    "apply_scaler",
]

_SCALE_FLOOR = 1e-12


def quadratic_dim(n_raw: int) -> int:
    """Expanded feature count for ``n_raw`` numeric variables."""
    return (n_raw * n_raw + 3 * n_raw + 2) // 2


@dataclass(frozen=True)
class FeatureSchema:
    """Names and types of the raw covariates of one task record.

    ``categoricals`` maps each categorical name to its ordered level set;
    the first level is the reference and contributes no indicator column.
    """

    continuous: tuple[str, ...] = ()
    categoricals: tuple[tuple[str, tuple[str, ...]], ...] = ()

    def __post_init__(self):
        names = list(self.continuous) + [name for name, _ in self.categoricals]
        if len(set(names)) != len(names):
            raise ValidationError("schema field names must be unique")
        for name, levels in self.categoricals:
            if len(levels) == 0:
                raise ValidationError(f"categorical {name!r} has an empty level set")
            if len(set(levels)) != len(levels):
                raise ValidationError(f"categorical {name!r} has duplicate levels")

    @property
    def raw_dim(self) -> int:
        """D: numeric variable count after dummy encoding."""
        return len(self.continuous) + sum(len(levels) - 1 for _, levels in self.categoricals)

    @property
    def expanded_dim(self) -> int:
        """d: length of the quadratic expansion of a D-vector."""
        return quadratic_dim(self.raw_dim)

    @classmethod
    def numeric(cls, n: int, prefix: str = "x") -> "FeatureSchema":
        """Schema of ``n`` continuous variables named prefix_1..prefix_n."""
        return cls(continuous=tuple(f"{prefix}_{i + 1}" for i in range(n)))


def encode(record: Mapping[str, object], schema: FeatureSchema) -> np.ndarray:
    """Encode one raw record to its numeric D-vector.

    Continuous fields pass through; each categorical contributes one 0/1
    indicator per non-reference level.
    """
    out = np.empty(schema.raw_dim)
    pos = 0
    for name in schema.continuous:
        if name not in record:
            raise ValidationError(f"record is missing field {name!r}")
        out[pos] = float(record[name])  # type: ignore[arg-type]
        pos += 1
    for name, levels in schema.categoricals:
        if name not in record:
            raise ValidationError(f"record is missing field {name!r}")
        value = record[name]
        if value not in levels:
            raise ValidationError(
                f"unknown level {value!r} for categorical {name!r}; expected one of {levels}"
            )
        block = np.zeros(len(levels) - 1)
        idx = levels.index(value)  # type: ignore[arg-type]
        if idx > 0:
            block[idx - 1] = 1.0
        out[pos : pos + block.size] = block
        pos += block.size
    return out


def expand_quadratic(x: Sequence[float] | np.ndarray) -> np.ndarray:
    """Expand a D-vector to [1, linear terms, upper-triangle products]."""
    x = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise ValidationError("quadratic expansion requires finite inputs")
    return expand_matrix(x[None, :])[0]


def expand_matrix(X: np.ndarray) -> np.ndarray:
    """Row-wise quadratic expansion of an (n, D) matrix to (n, d)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValidationError("expected a 2-d matrix of raw features")
    if not np.all(np.isfinite(X)):
        raise ValidationError("quadratic expansion requires finite inputs")
    n, D = X.shape
    rows, cols = np.triu_indices(D)
    out = np.empty((n, quadratic_dim(D)))
    out[:, 0] = 1.0
    out[:, 1 : D + 1] = X
    out[:, D + 1 :] = X[:, rows] * X[:, cols]
    return out


@dataclass(frozen=True)
class Scaler:
    """Per-column affine standardization fitted on a training matrix."""

    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        if np.any(self.scale < _SCALE_FLOOR):
            raise ValidationError("scaler scale entries must be >= 1e-12")


def fit_scaler(X: np.ndarray) -> Scaler:
    """Fit column means and scales; constant columns are left untouched.

    A constant column (the explicit intercept term in expanded features,
    or any degenerate input) gets mean 0 and scale 1 so it passes through
    unchanged and penalized regressions keep a usable intercept.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValidationError("scaler requires a non-empty 2-d matrix")
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    constant = scale <= _SCALE_FLOOR
    mean[constant] = 0.0
    scale[constant] = 1.0
    return Scaler(mean=mean, scale=scale)


def apply_scaler(scaler: Scaler, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != scaler.mean.size:
        raise ValidationError(
            f"matrix has {X.shape[-1]} columns but scaler was fitted on {scaler.mean.size}"
        )
    return (X - scaler.mean) / scaler.scale

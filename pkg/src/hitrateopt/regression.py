"""Least-squares and penalized regression solvers.

The penalized objectives use an explicit overall strength ``a`` and a mix
parameter in [0, 1] that interpolates between the sparsity-inducing norm
(mix 0) and the squared norm (mix 1):

single task:  |y - X b|^2 / (2n) + a * [(1-mix) * sum_j |b_j|
                                        + mix * sum_j b_j^2]

multitask:    sum_m |y_m - X_m b_m|^2 / (2N)
              + a * [(1-mix) * sum_j |B_j.|_2 + mix * |B|_F^2]

where B is the (d x M) coefficient matrix, B_j. its j-th row, and N the
total sample count.  The squared penalty is intentionally not halved so
reported objective values match the printed form.  Both solvers run
cyclic coordinate descent on precomputed Gram matrices; the multitask row
subproblem is minimized exactly (scalar root-find when column curvatures
differ across tasks), so the objective is non-increasing sweep by sweep.

An optional ``intercept_index`` marks one coordinate (the constant column
of expanded feature matrices) as unpenalized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import ValidationError
from .features import quadratic_dim

__all__ = [
    "PenaltyConfig",
    "FitReport",
    "fit_ols",
    "fit_elastic_net",
    "fit_mten",
    "count_selected",
    "fallback_fit",
]

DEFAULT_SELECTION_THRESHOLD = 1e-8


@dataclass(frozen=True)
class PenaltyConfig:
    """Regularization knobs for the penalized solvers.

    ``strength`` is the overall penalty magnitude; ``mix`` = 0 gives the
    pure sparsity penalty and ``mix`` = 1 the pure squared penalty.
    """

    strength: float
    mix: float
    tol: float = 1e-8
    max_iter: int = 10_000

    def __post_init__(self):
        if self.strength < 0:
            raise ValidationError("penalty strength must be non-negative")
        if not 0.0 <= self.mix <= 1.0:
            raise ValidationError("mix must lie in [0, 1]")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValidationError("tol must be positive and max_iter >= 1")


@dataclass(frozen=True)
class FitReport:
    """Solver output: coefficients plus convergence bookkeeping.

    ``coefficients`` is (d,) for single-task fits and (d, M) for
    multitask fits.  ``objective_trace`` holds the objective after every
    coordinate-descent sweep and is non-increasing.
    """

    coefficients: np.ndarray
    selected: tuple[int, ...]
    objective_trace: np.ndarray = field(repr=False)
    converged: bool = True
    n_iter: int = 0


def fit_ols(X, y) -> np.ndarray:
    """Least-squares coefficients; minimum-norm on rank-deficient systems."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValidationError("OLS requires a non-empty 2-d design matrix")
    if X.shape[0] != y.size:
        raise ValidationError(f"X has {X.shape[0]} rows but y has {y.size} entries")
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    return beta


def count_selected(coefficients, threshold: float = DEFAULT_SELECTION_THRESHOLD,
                   intercept_index: int | None = 0) -> tuple[int, ...]:
    """Per-task counts of coefficients with magnitude above the threshold.

    The intercept row (default: row 0 of the standard expanded layout) is
    excluded; pass ``intercept_index=None`` for matrices without one.
    """
    if threshold < 0:
        raise ValidationError("threshold must be non-negative")
    B = np.asarray(coefficients, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    mask = np.abs(B) > threshold
    if intercept_index is not None:
        mask[intercept_index, :] = False
    return tuple(int(c) for c in mask.sum(axis=0))


@dataclass(frozen=True)
class GramProblem:
    """Quadratic-form view of a (multi)task least-squares problem.

    Build once per design, then solve for many penalty settings; the
    per-sweep cost depends only on the feature dimension.
    """

    grams: np.ndarray  # (M, d, d): X_m' X_m / N
    corrs: np.ndarray  # (d, M):   X_m' y_m / N
    diag: np.ndarray   # (d, M):   diagonal of each gram
    y_term: float      # sum_m y_m' y_m / (2 N)
    total: int

    @property
    def n_features(self) -> int:
        return self.corrs.shape[0]

    @property
    def n_tasks(self) -> int:
        return self.corrs.shape[1]


def build_gram_problem(X_groups: Sequence, Y_groups: Sequence) -> GramProblem:
    if len(X_groups) == 0 or len(X_groups) != len(Y_groups):
        raise ValidationError("need matching, non-empty feature and target groups")
    Xs = [np.asarray(X, dtype=float) for X in X_groups]
    ys = [np.asarray(y, dtype=float).ravel() for y in Y_groups]
    d = Xs[0].shape[1] if Xs[0].ndim == 2 else -1
    for X, y in zip(Xs, ys):
        if X.ndim != 2 or X.shape[1] != d:
            raise ValidationError("all task matrices must share one feature dimension")
        if X.shape[0] != y.size or X.shape[0] == 0:
            raise ValidationError("each task needs a non-empty X/y pair of equal length")
    total = sum(X.shape[0] for X in Xs)
    grams = np.stack([X.T @ X / total for X in Xs])
    corrs = np.stack([X.T @ y / total for X, y in zip(Xs, ys)], axis=1)
    diag = np.stack([np.diagonal(G) for G in grams], axis=1)
    y_term = sum(float(y @ y) for y in ys) / (2.0 * total)
    return GramProblem(grams=grams, corrs=corrs, diag=diag, y_term=y_term, total=total)


def _row_solve(rho: np.ndarray, curv: np.ndarray, group_penalty: float) -> np.ndarray:
    """Exact minimizer of one coefficient row given residual correlations.

    Minimizes sum_m [curv_m/2 * b_m^2 - rho_m * b_m] + group_penalty * |b|_2.
    With equal curvatures this is the familiar group soft-threshold; with
    unequal curvatures the optimal scaling solves a monotone scalar
    equation, found by bracketed root-finding.
    """
    norm_rho = float(np.linalg.norm(rho))
    if norm_rho <= group_penalty:
        return np.zeros_like(rho)
    if group_penalty == 0.0:
        return np.divide(rho, curv, out=np.zeros_like(rho), where=curv > 0)
    if np.all(curv == curv[0]):
        return rho * ((1.0 - group_penalty / norm_rho) / curv[0])

    # b_m = rho_m / (curv_m + kappa) with kappa * |b|_2 = group_penalty.
    def gap(kappa: float) -> float:
        denom = curv + kappa
        scaled = np.divide(rho, denom, out=np.zeros_like(rho), where=denom > 0)
        return kappa * float(np.linalg.norm(scaled)) - group_penalty

    hi = group_penalty * float(np.max(curv)) / (norm_rho - group_penalty) + 1.0
    while gap(hi) < 0:
        hi *= 2.0
    kappa = brentq(gap, 0.0, hi, xtol=1e-15, rtol=8.9e-16)
    return rho / (curv + kappa)


def solve_gram_problem(problem: GramProblem, cfg: PenaltyConfig,
                       intercept_index: int | None = None,
                       warm_start: np.ndarray | None = None) -> FitReport:
    """Coordinate descent on a prebuilt Gram problem."""
    d, M = problem.n_features, problem.n_tasks
    if intercept_index is not None and not 0 <= intercept_index < d:
        raise ValidationError("intercept_index out of range")
    grams, corrs, diag = problem.grams, problem.corrs, problem.diag

    group_penalty = cfg.strength * (1.0 - cfg.mix)
    ridge = cfg.strength * cfg.mix
    curv = diag + 2.0 * ridge

    if warm_start is not None:
        B = np.array(warm_start, dtype=float).reshape(d, M)
    else:
        B = np.zeros((d, M))
    GB = np.einsum("mij,jm->im", grams, B) if warm_start is not None else np.zeros((d, M))

    penalized = np.ones(d, dtype=bool)
    if intercept_index is not None:
        penalized[intercept_index] = False
    safe_diag = np.where(diag == 0.0, 1.0, diag)

    def objective() -> float:
        loss = problem.y_term - float(np.sum(corrs * B)) + 0.5 * float(np.sum(B * GB))
        rows = B[penalized]
        pen = group_penalty * float(np.sum(np.sqrt(np.sum(rows * rows, axis=1))))
        pen += ridge * float(np.sum(rows * rows))
        return loss + pen

    def sweep(indices) -> float:
        max_delta = 0.0
        for j in indices:
            old = B[j]
            rho = corrs[j] - GB[j] + diag[j] * old
            if penalized[j]:
                new = _row_solve(rho, curv[j], group_penalty)
            else:
                new = np.divide(rho, safe_diag[j], out=np.zeros(M), where=diag[j] > 0)
            delta = new - old
            if np.any(delta != 0.0):
                B[j] = new
                GB[...] += grams[:, :, j].T * delta
                max_delta = max(max_delta, float(np.max(np.abs(delta))))
        return max_delta

    all_indices = range(d)
    trace = []
    converged = False
    n_iter = 0
    while n_iter < cfg.max_iter:
        delta = sweep(all_indices)
        n_iter += 1
        trace.append(objective())
        if delta < cfg.tol:
            converged = True
            break
        # Iterate the current active set until it stabilizes; cheaper
        # sweeps between the full passes that certify convergence.
        active = np.flatnonzero(np.any(B != 0.0, axis=1))
        while n_iter < cfg.max_iter and active.size:
            delta = sweep(active)
            n_iter += 1
            trace.append(objective())
            if delta < cfg.tol:
                break

    return FitReport(
        coefficients=B,
        selected=count_selected(B, intercept_index=intercept_index),
        objective_trace=np.asarray(trace),
        converged=converged,
        n_iter=n_iter,
    )


def fit_mten(X_groups: Sequence, Y_groups: Sequence, cfg: PenaltyConfig,
             intercept_index: int | None = None,
             warm_start: np.ndarray | None = None) -> FitReport:
    """Multitask elastic net over per-task design matrices.

    Tasks share the feature dimension but may have different sample
    counts and designs.  Block coordinate descent runs over feature rows
    of the (d x M) coefficient matrix; the sparsity penalty couples each
    row across tasks, so a feature is kept or dropped jointly.
    """
    problem = build_gram_problem(X_groups, Y_groups)
    return solve_gram_problem(problem, cfg, intercept_index=intercept_index,
                              warm_start=warm_start)


def fit_elastic_net(X, y, cfg: PenaltyConfig, intercept_index: int | None = None,
                    warm_start: np.ndarray | None = None) -> FitReport:
    """Single-task elastic net by cyclic coordinate descent.

    Expects standardized columns (the constant column excepted) so the
    penalty treats features comparably.  With ``strength`` 0 this reduces
    to least squares.  Non-convergence within ``cfg.max_iter`` sweeps is
    reported via ``converged=False``, not an exception.
    """
    warm = None if warm_start is None else np.asarray(warm_start, dtype=float).reshape(-1, 1)
    report = fit_mten([X], [y], cfg, intercept_index=intercept_index, warm_start=warm)
    return FitReport(
        coefficients=report.coefficients[:, 0],
        selected=report.selected,
        objective_trace=report.objective_trace,
        converged=report.converged,
        n_iter=report.n_iter,
    )


def fallback_fit(X_raw, y, strength: float = 1e-3) -> np.ndarray:
    """Conservative degree-1 ridge fit embedded in the expanded layout.

    Used when the quadratic surrogate underfits (too few selected
    variables) or the window is too small for the expanded dimension.
    Fits intercept + linear terms on the raw D features with a small
    fixed ridge penalty and zero quadratic coefficients.
    """
    X = np.asarray(X_raw, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[0] != y.size:
        raise ValidationError("fallback fit requires matching non-empty X and y")
    n, n_raw = X.shape
    x_mean = X.mean(axis=0)
    y_mean = float(y.mean())
    Xc = X - x_mean
    yc = y - y_mean
    gram = Xc.T @ Xc / n + 2.0 * strength * np.eye(n_raw)
    slope = np.linalg.solve(gram, Xc.T @ yc / n)
    out = np.zeros(quadratic_dim(n_raw))
    out[0] = y_mean - float(x_mean @ slope)
    out[1 : n_raw + 1] = slope
    return out

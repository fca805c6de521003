"""Independent reference implementations used only by the tests.

Everything here is deliberately naive: exhaustive path enumeration for
the hidden-Markov quantities, a proximal-gradient solver for the
multitask objective, closed-form ridge, and straight-line metric
formulas.  None of it shares code with the library paths it checks.
"""

from __future__ import annotations

from itertools import product

import numpy as np


# ---------------------------------------------------------------------------
# Hidden-Markov brute force

def enumerate_paths(n_states: int, length: int):
    return product(range(n_states), repeat=length)


def path_probability(initial, transition, emission, path, obs) -> float:
    p = initial[path[0]] * emission[path[0], obs[0]]
    for t in range(1, len(obs)):
        p *= transition[path[t - 1], path[t]] * emission[path[t], obs[t]]
    return p


def brute_likelihood(spec, obs) -> float:
    return sum(
        path_probability(spec.initial, spec.transition, spec.emission, path, obs)
        for path in enumerate_paths(spec.n_hidden, len(obs))
    )


def brute_smoothed(spec, obs) -> np.ndarray:
    T, K = len(obs), spec.n_hidden
    marginals = np.zeros((T, K))
    for path in enumerate_paths(K, T):
        p = path_probability(spec.initial, spec.transition, spec.emission, path, obs)
        for t, state in enumerate(path):
            marginals[t, state] += p
    return marginals / marginals.sum(axis=1, keepdims=True)


def brute_viterbi(spec, obs) -> np.ndarray:
    best_path, best_p = None, -1.0
    # Lexicographic enumeration order makes "first maximum" the
    # lowest-index tie-break automatically.
    for path in enumerate_paths(spec.n_hidden, len(obs)):
        p = path_probability(spec.initial, spec.transition, spec.emission, path, obs)
        if p > best_p:
            best_p, best_path = p, path
    return np.asarray(best_path)


def random_spec(rng: np.random.Generator, n_hidden: int, n_observed: int):
    from hitrateopt import HmmSpec

    def rows(shape):
        r = rng.random(shape) + 0.05
        return r / r.sum(axis=-1, keepdims=True)

    return HmmSpec(initial=rows(n_hidden), transition=rows((n_hidden, n_hidden)),
                   emission=rows((n_hidden, n_observed)))


def stationary_distribution(transition) -> np.ndarray:
    values, vectors = np.linalg.eig(np.asarray(transition).T)
    idx = int(np.argmin(np.abs(values - 1.0)))
    v = np.abs(np.real(vectors[:, idx]))
    return v / v.sum()


# ---------------------------------------------------------------------------
# Penalized regression references

def mten_objective(B, X_groups, Y_groups, strength, mix, intercept_index=None) -> float:
    B = np.atleast_2d(np.asarray(B, dtype=float).T).T
    total = sum(len(y) for y in Y_groups)
    loss = sum(
        float(np.sum((np.asarray(y) - np.asarray(X) @ B[:, m]) ** 2))
        for m, (X, y) in enumerate(zip(X_groups, Y_groups))
    ) / (2.0 * total)
    mask = np.ones(B.shape[0], dtype=bool)
    if intercept_index is not None:
        mask[intercept_index] = False
    rows = B[mask]
    penalty = strength * ((1.0 - mix) * float(np.sum(np.sqrt(np.sum(rows ** 2, axis=1))))
                          + mix * float(np.sum(rows ** 2)))
    return loss + penalty


def ista_mten(X_groups, Y_groups, strength, mix, intercept_index=None,
              iters=40_000) -> np.ndarray:
    """Proximal-gradient reference solver for the multitask objective."""
    Xs = [np.asarray(X, dtype=float) for X in X_groups]
    ys = [np.asarray(y, dtype=float).ravel() for y in Y_groups]
    d, M = Xs[0].shape[1], len(Xs)
    total = sum(len(y) for y in ys)
    lip = max(float(np.linalg.norm(X, 2)) ** 2 / total for X in Xs) + 2.0 * strength * mix
    step = 1.0 / lip
    group = strength * (1.0 - mix)
    ridge = strength * mix
    mask = np.ones(d, dtype=bool)
    if intercept_index is not None:
        mask[intercept_index] = False

    B = np.zeros((d, M))
    Z = B.copy()
    t_acc = 1.0
    for _ in range(iters):
        grad = np.zeros((d, M))
        for m, (X, y) in enumerate(zip(Xs, ys)):
            grad[:, m] = X.T @ (X @ Z[:, m] - y) / total
        grad[mask] += 2.0 * ridge * Z[mask]
        W = Z - step * grad
        norms = np.sqrt(np.sum(W[mask] ** 2, axis=1))
        shrink = np.maximum(0.0, 1.0 - step * group / np.where(norms > 0, norms, 1.0))
        W[mask] *= shrink[:, None]
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_acc ** 2))
        Z = W + ((t_acc - 1.0) / t_next) * (W - B)
        B, t_acc = W, t_next
    return B


def kkt_violation(X_groups, Y_groups, B, strength, mix, intercept_index=None) -> float:
    """Largest stationarity violation of the multitask objective at B."""
    Xs = [np.asarray(X, dtype=float) for X in X_groups]
    ys = [np.asarray(y, dtype=float).ravel() for y in Y_groups]
    B = np.atleast_2d(np.asarray(B, dtype=float).T).T
    total = sum(len(y) for y in ys)
    group = strength * (1.0 - mix)
    ridge = strength * mix
    corr = np.stack([X.T @ (y - X @ B[:, m]) / total
                     for m, (X, y) in enumerate(zip(Xs, ys))], axis=1)
    worst = 0.0
    for j in range(B.shape[0]):
        row = B[j]
        if intercept_index is not None and j == intercept_index:
            worst = max(worst, float(np.max(np.abs(corr[j]))))
            continue
        if np.all(row == 0.0):
            slack = float(np.linalg.norm(corr[j])) - group
            worst = max(worst, max(slack, 0.0))
        else:
            norm = float(np.linalg.norm(row))
            residual = corr[j] - group * row / norm - 2.0 * ridge * row
            worst = max(worst, float(np.max(np.abs(residual))))
    return worst


def ridge_closed_form(X, y, strength) -> tuple[float, np.ndarray]:
    """Centered ridge with unpenalized intercept; returns (intercept, slope)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n = len(y)
    xm = X.mean(axis=0)
    ym = float(y.mean())
    Xc, yc = X - xm, y - ym
    slope = np.linalg.solve(Xc.T @ Xc / n + 2.0 * strength * np.eye(X.shape[1]),
                            Xc.T @ yc / n)
    return ym - float(xm @ slope), slope


# ---------------------------------------------------------------------------
# Metric references (straight-line formulas)

def ref_metrics(predictions, actuals, lower, upper) -> dict:
    p = np.asarray(predictions, dtype=float)
    a = np.asarray(actuals, dtype=float)
    n = len(a)
    err = p - a
    inside = (err >= lower) & (err <= upper)
    out = {}
    out["hr"] = float(np.sum(inside)) / n
    out["mae"] = float(np.sum(np.abs(err))) / n
    out["rmse"] = float(np.sqrt(np.sum(err ** 2) / n))
    ybar = float(np.sum(a)) / n
    out["r2"] = 1.0 - float(np.sum(err ** 2)) / float(np.sum((a - ybar) ** 2))
    out["mape_a"] = float(np.sum(np.abs(err) / np.maximum(a, 1.0))) / n
    if np.all(a != 0):
        out["mape"] = float(np.sum(np.abs(err / a))) / n
    masked = np.where(inside, 0.0, err)
    out["mae_hr"] = float(np.sum(np.abs(masked))) / n
    out["rmse_hr"] = float(np.sqrt(np.sum(masked ** 2) / n))
    return out


def count_monomials(n_vars: int, max_degree: int = 2) -> int:
    """Brute-force count of monomials with total degree <= max_degree."""
    count = 0
    for degrees in product(range(max_degree + 1), repeat=n_vars):
        if sum(degrees) <= max_degree:
            count += 1
    return count

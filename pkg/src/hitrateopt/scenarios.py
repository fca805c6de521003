"""Scenario surrogate models and their mixture predictions.

A scenario is one latent data population with its own surrogate
coefficient vector, probability weight, and residual spread.  Scenario
indices are 1-based in every public signature (model 1..M), matching the
serialized form; array positions are index - 1.

The observed state of a completed task is the residual interval its
prediction error falls into.  Intervals partition the real line around
the qualification band: with edges (lo, hi) the states are
(-inf, lo) -> 1, [lo, hi] -> 2, (hi, +inf) -> 3, boundaries belonging to
the middle band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError
from .regression import fit_ols

__all__ = [
    "ResidualIntervals",
    "ScenarioModel",
    "ScenarioSet",
    "MixturePredictor",
    "initial_cluster",
    "assign_observed_state",
    "update_probabilities",
    "reconstruct",
    "mixture_predict",
    "scenario_density",
]

SIGMA_FLOOR = 1e-8
_WEIGHT_TOL = 1e-10


@dataclass(frozen=True)
class ResidualIntervals:
    """Contiguous partition of the real line by interior edge points.

    ``edges`` are strictly increasing; a residual equal to an edge is
    assigned to whichever adjacent interval is closer to the middle, so
    the central band is closed on both sides in the three-interval case.
    """

    edges: tuple[float, ...]

    def __post_init__(self):
        edges = tuple(float(e) for e in self.edges)
        object.__setattr__(self, "edges", edges)
        if len(edges) == 0:
            raise ValidationError("at least one edge is required")
        if any(not math.isfinite(e) for e in edges):
            raise ValidationError("interval edges must be finite")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValidationError("interval edges must be strictly increasing")

    @classmethod
    def symmetric(cls, half_width: float) -> "ResidualIntervals":
        if half_width <= 0:
            raise ValidationError("half width must be positive")
        return cls(edges=(-half_width, half_width))

    @property
    def n_intervals(self) -> int:
        return len(self.edges) + 1

    def assign(self, residuals) -> np.ndarray:
        """1-based interval index for each residual."""
        r = np.atleast_1d(np.asarray(residuals, dtype=float))
        edges = np.asarray(self.edges)
        right = np.searchsorted(edges, r, side="right")
        left = np.searchsorted(edges, r, side="left")
        # Differ only on exact boundaries: edge i belongs to the interval
        # nearer the middle of the partition.
        middle = (len(edges) - 1) / 2.0
        labels = np.where(left == right, right, np.where(left <= middle, left + 1, left))
        return labels.astype(int) + 1


@dataclass(frozen=True)
class ScenarioModel:
    """One surrogate regression with its weight and residual spread."""

    index: int
    beta: np.ndarray
    weight: float
    residual_sigma: float = SIGMA_FLOOR

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float).ravel()
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "residual_sigma", max(float(self.residual_sigma), SIGMA_FLOOR))
        if self.index < 1:
            raise ValidationError("scenario indices are 1-based")
        if not 0.0 <= self.weight <= 1.0 + _WEIGHT_TOL:
            raise ValidationError("scenario weight must lie in [0, 1]")

    def predict(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(features, dtype=float) @ self.beta


@dataclass(frozen=True)
class ScenarioSet:
    """Ordered scenario models over one residual-interval partition."""

    models: tuple[ScenarioModel, ...]
    intervals: ResidualIntervals
    max_scenarios: int = 3

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(self.models))
        if len(self.models) < 1:
            raise ValidationError("a scenario set needs at least one model")
        if len(self.models) > self.max_scenarios:
            raise ValidationError(
                f"{len(self.models)} scenarios exceed the limit {self.max_scenarios}"
            )
        if [m.index for m in self.models] != list(range(1, len(self.models) + 1)):
            raise ValidationError("scenario models must be indexed 1..M in order")
        if self.intervals.n_intervals != len(self.models):
            raise ValidationError("interval count must equal the scenario count")
        total = sum(m.weight for m in self.models)
        if abs(total - 1.0) > _WEIGHT_TOL:
            raise ValidationError(f"scenario weights sum to {total}, expected 1")

    @property
    def n_scenarios(self) -> int:
        return len(self.models)

    @property
    def weights(self) -> np.ndarray:
        return np.array([m.weight for m in self.models])

    @property
    def betas(self) -> np.ndarray:
        """Coefficient matrix, one column per scenario."""
        return np.stack([m.beta for m in self.models], axis=1)

    def predictions(self, features: np.ndarray) -> np.ndarray:
        """Per-scenario predictions, shape (n_samples, M)."""
        return np.asarray(features, dtype=float) @ self.betas

    def with_weights(self, weights) -> "ScenarioSet":
        w = np.asarray(weights, dtype=float)
        total = w.sum()
        if total <= 0:
            raise ValidationError("weights must have positive mass")
        w = w / total
        models = tuple(replace(m, weight=float(w[i])) for i, m in enumerate(self.models))
        return replace(self, models=models)


def initial_cluster(X, y, intervals: ResidualIntervals) -> np.ndarray:
    """Label samples by the residual interval of a pooled least-squares fit."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[0] != y.size:
        raise ValidationError("clustering requires matching non-empty X and y")
    beta = fit_ols(X, y)
    return intervals.assign(y - X @ beta)


def assign_observed_state(residual: float, intervals: ResidualIntervals) -> int:
    """1-based interval index of one realized residual."""
    return int(intervals.assign(residual)[0])


def update_probabilities(observed_states, n_scenarios: int) -> np.ndarray:
    """Empirical frequency of each scenario among the observed states."""
    states = np.asarray(observed_states, dtype=int)
    if states.size == 0:
        raise ValidationError("observed state sequence must be non-empty")
    if states.min() < 1 or states.max() > n_scenarios:
        raise ValidationError(f"observed states must lie in [1, {n_scenarios}]")
    counts = np.bincount(states - 1, minlength=n_scenarios)
    return counts / states.size


def reconstruct(scenario_set: ScenarioSet, m: int, j: int, alpha: float) -> ScenarioSet:
    """Blend scenario m toward its adjacent neighbor j.

    The new model-m coefficients are ``alpha * beta_m + (1-alpha) *
    beta_j``; alpha = 1 returns the set unchanged, alpha = 0 replaces
    model m's surrogate with its neighbor's.  Weights are re-normalized.
    """
    M = scenario_set.n_scenarios
    if not 1 <= m <= M or not 1 <= j <= M:
        raise ValidationError(f"scenario indices must lie in [1, {M}]")
    if j == m or abs(m - j) > 1:
        raise ValidationError(f"scenario {j} is not adjacent to scenario {m}")
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError("alpha must lie in [0, 1]")
    beta_m = scenario_set.models[m - 1].beta
    beta_j = scenario_set.models[j - 1].beta
    blended = alpha * beta_m + (1.0 - alpha) * beta_j
    models = list(scenario_set.models)
    models[m - 1] = replace(models[m - 1], beta=blended)
    return replace(scenario_set, models=tuple(models)).with_weights(
        [model.weight for model in models]
    )


@dataclass(frozen=True)
class MixturePredictor:
    """Scenario set plus per-task assignment probabilities.

    ``assignments`` has one row per task; row t gives the probability of
    each scenario generating task t and must sum to 1.
    """

    scenario_set: ScenarioSet
    assignments: np.ndarray

    def __post_init__(self):
        assignments = np.atleast_2d(np.asarray(self.assignments, dtype=float))
        object.__setattr__(self, "assignments", assignments)
        if assignments.shape[1] != self.scenario_set.n_scenarios:
            raise ValidationError("assignment rows must match the scenario count")
        if np.any(assignments < 0) or np.any(np.abs(assignments.sum(axis=1) - 1.0) > 1e-8):
            raise ValidationError("assignment rows must be probability distributions")

    def predict_all(self, features: np.ndarray) -> np.ndarray:
        """Mixture predictions for features aligned with the assignment rows."""
        per_scenario = self.scenario_set.predictions(features)
        if per_scenario.shape[0] != self.assignments.shape[0]:
            raise ValidationError("feature rows must match assignment rows")
        return np.sum(self.assignments * per_scenario, axis=1)


def mixture_predict(predictor: MixturePredictor, x_expanded, t: int) -> float:
    """Probability-weighted prediction of one task."""
    if not 0 <= t < predictor.assignments.shape[0]:
        raise ValidationError(f"task index {t} out of range")
    per_scenario = predictor.scenario_set.predictions(np.asarray(x_expanded)[None, :])[0]
    return float(predictor.assignments[t] @ per_scenario)


def scenario_density(residual: float, model: ScenarioModel) -> float:
    """Zero-mean Gaussian density of a residual under one scenario."""
    if not math.isfinite(residual):
        raise ValidationError("residual must be finite")
    sigma = model.residual_sigma
    return math.exp(-0.5 * (residual / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))

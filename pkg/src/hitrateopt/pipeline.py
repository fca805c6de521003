"""End-to-end window models: clustering, surrogates, dynamics, prediction.

Fitting one training window proceeds in four steps:

1. expand the raw covariates to quadratic features and standardize them
   on the window;
2. cluster the window by the residual intervals of a pooled
   least-squares fit (the qualification band is the middle interval);
3. fit one surrogate per scenario, tuning (strength, mix) per scenario
   on a chronological validation split, with the conservative linear
   ridge fallback for underfitted or undersized scenarios;
4. learn the scenario dynamics from the observed state sequence and form
   per-task assignment probabilities (one-step-ahead predictive filter,
   or static frequencies in empirical mode).

The fitted :class:`WindowModel` predicts its own window causally and
extends to unseen tasks one step at a time: predict from the filtered
history, then fold the realized residual's interval back into the
filter.  :func:`optimize_window_model` runs the hit-rate bisection on
top of a fitted model and returns the committed state as a new model.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import erf

from .errors import ValidationError
from .features import Scaler, apply_scaler, expand_matrix, fit_scaler
from .hmm import HmmSpec, baum_welch, forward
from .metrics import HitInterval, MetricReport, hit_rate, report
from .optimizer import (
    DataWindow,
    HroResult,
    assignment_weights,
    optimize_hit_rate,
    scenario_weights,
)
from .regression import (
    PenaltyConfig,
    build_gram_problem,
    count_selected,
    fallback_fit,
    fit_ols,
    solve_gram_problem,
)
from .scenarios import ResidualIntervals, ScenarioModel, ScenarioSet, initial_cluster

__all__ = [
    "SurrogateConfig",
    "PipelineConfig",
    "ScenarioFitLog",
    "WindowModel",
    "fit_window_model",
    "optimize_window_model",
]

DEFAULT_MIX_GRID = tuple(round(0.1 * k, 1) for k in range(1, 11))


@dataclass(frozen=True)
class SurrogateConfig:
    """Per-scenario surrogate fitting and tuning policy.

    ``min_selected`` is the mechanism minimum: a converged surrogate
    keeping fewer expanded variables is treated as underfitting and
    replaced by the linear ridge fallback, as is any scenario whose
    sample count does not exceed the expanded dimension.
    """

    strength_grid: tuple[float, ...] = (1e-3, 1e-2, 1e-1, 1.0)
    mix_grid: tuple[float, ...] = DEFAULT_MIX_GRID
    min_selected: int = 17
    selection_threshold: float = 1e-8
    validation_fraction: float = 0.25
    tol: float = 1e-4
    max_iter: int = 250

    @classmethod
    def plain_quadratic(cls) -> "SurrogateConfig":
        """Unpenalized quadratic surrogates (low-dimensional benchmarks)."""
        return cls(strength_grid=(0.0,), mix_grid=(1.0,), min_selected=0)

    @classmethod
    def rolling(cls) -> "SurrogateConfig":
        """Budgeted tuning grid for many-window studies.

        Weakest-penalty fits on ill-conditioned expanded designs converge
        slowly and rarely win validation; dropping them keeps a full
        rolling pass fast without changing the selected models much.
        """
        return cls(strength_grid=(1e-2, 1e-1, 1.0), tol=3e-4, max_iter=150)


@dataclass(frozen=True)
class PipelineConfig:
    """Window-model configuration shared by the benchmark experiments.

    ``weight_mode`` selects how per-task scenario probabilities are
    formed: ``posterior`` filters the hidden state on each completed
    task's residual evidence (the default), ``predictive`` keeps the
    strictly causal one-step-ahead distribution, and ``empirical`` uses
    static state frequencies.

    ``chain_estimator`` picks how the state dynamics are learned from the
    observed window states: ``counts`` (default) estimates the transition
    from state bigrams and derives the emission as the confusion of the
    residual-interval measurement under the fitted scenario models, which
    is deterministic and cheap; ``baum_welch`` runs full EM with random
    restarts; ``known`` takes the chain from ``known_chain``, for
    benchmark processes whose state dynamics are part of the experiment
    design.
    """

    surrogate: SurrogateConfig = field(default_factory=SurrogateConfig)
    max_scenarios: int = 3
    chain_estimator: str = "counts"
    chain_smoothing: float = 0.5
    known_chain: HmmSpec | None = None
    hmm_states: int = 3
    hmm_restarts: int = 3
    hmm_max_iter: int = 120
    hmm_tol: float = 1e-6
    weight_mode: str = "posterior"
    xi: float = 0.01
    grid_resolution: float = 0.05

    def __post_init__(self):
        if self.weight_mode not in ("posterior", "predictive", "empirical"):
            raise ValidationError(
                "weight_mode must be 'posterior', 'predictive', or 'empirical'"
            )
        if self.chain_estimator not in ("counts", "baum_welch", "known"):
            raise ValidationError(
                "chain_estimator must be 'counts', 'baum_welch', or 'known'"
            )


@dataclass(frozen=True)
class ScenarioFitLog:
    """Per-scenario tuning record mirroring the selection tables."""

    scenario: int
    n_samples: int
    selected: int
    mix: float
    strength: float
    fallback: bool


def _embed_unscaled(beta_unscaled: np.ndarray, scaler: Scaler) -> np.ndarray:
    """Re-express coefficients fitted on unscaled expanded features.

    Predictions satisfy X_unscaled @ b = X_scaled @ (b * scale) + b @ mean;
    the constant offset folds into the intercept coordinate.
    """
    beta = beta_unscaled * scaler.scale
    beta[0] += float(beta_unscaled @ scaler.mean)
    return beta


def align_states_to_scenarios(spec: HmmSpec) -> HmmSpec:
    """Resolve EM's state-permutation freedom against the scenario index.

    Hidden states are relabeled so state m is the one whose emission row
    puts the most mass on observed scenario m (maximum-weight matching).
    Scenario weights built from state posteriors are only meaningful
    after this gauge is fixed.
    """
    if spec.n_hidden != spec.n_observed:
        return spec
    rows, cols = linear_sum_assignment(-spec.emission)
    order = np.empty(spec.n_hidden, dtype=int)
    order[cols] = rows
    return HmmSpec(
        initial=spec.initial[order],
        transition=spec.transition[np.ix_(order, order)],
        emission=spec.emission[order, :],
    )


def estimate_state_chain(labels, n_states: int, smoothing: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Initial distribution and transition matrix from state counts.

    Additive smoothing keeps unvisited transitions possible so the
    filter never paints itself into a corner.
    """
    states = np.asarray(labels, dtype=int) - 1
    counts = np.bincount(states, minlength=n_states) + smoothing
    bigrams = np.full((n_states, n_states), smoothing)
    np.add.at(bigrams, (states[:-1], states[1:]), 1.0)
    return counts / counts.sum(), bigrams / bigrams.sum(axis=1, keepdims=True)


def measurement_confusion(scenario_set: ScenarioSet, features: np.ndarray,
                          reference_predictions: np.ndarray) -> np.ndarray:
    """How a task from each scenario lands in the residual intervals.

    Row s gives the probability that a task generated by scenario s falls
    in each interval of the reference predictor's residuals, averaged
    over the window's covariates:  the residual is Gaussian around the
    gap between the scenario's prediction and the reference prediction.
    This is the emission matrix of the observed-state measurement.
    """
    edges = np.asarray(scenario_set.intervals.edges)
    per_scenario = scenario_set.predictions(features)
    gaps = per_scenario - np.asarray(reference_predictions)[:, None]  # (n, M)
    sigmas = np.array([m.residual_sigma for m in scenario_set.models])
    # P(residual <= edge) per task, scenario, and edge, via the normal CDF.
    z = (edges[None, None, :] - gaps[:, :, None]) / sigmas[None, :, None]
    cdf = 0.5 * (1.0 + erf(z / np.sqrt(2.0)))
    cells = np.diff(np.concatenate([
        np.zeros(cdf.shape[:2] + (1,)), cdf, np.ones(cdf.shape[:2] + (1,))
    ], axis=2), axis=2)
    emission = cells.mean(axis=0)
    return emission / emission.sum(axis=1, keepdims=True)


def _fit_one_scenario(X_scaled, x_raw, y, scaler, cfg: SurrogateConfig,
                      scenario: int) -> tuple[np.ndarray, ScenarioFitLog]:
    n, d = X_scaled.shape
    if n <= d:
        beta = _embed_unscaled(fallback_fit(x_raw, y), scaler)
        return beta, ScenarioFitLog(scenario, n, int(np.count_nonzero(beta[1:])),
                                    mix=0.0, strength=0.0, fallback=True)

    n_val = max(1, int(round(cfg.validation_fraction * n)))
    n_fit = n - n_val
    fit_problem = build_gram_problem([X_scaled[:n_fit]], [y[:n_fit]])
    X_val, y_val = X_scaled[n_fit:], y[n_fit:]

    best = None  # (val_mae, coefficients, mix, strength)
    for mix in cfg.mix_grid:
        warm = None
        for strength in sorted(cfg.strength_grid, reverse=True):
            penalty = PenaltyConfig(strength=strength, mix=mix, tol=cfg.tol,
                                    max_iter=cfg.max_iter)
            fit = solve_gram_problem(fit_problem, penalty, intercept_index=0,
                                     warm_start=warm)
            warm = fit.coefficients
            val_mae = float(np.mean(np.abs(X_val @ fit.coefficients[:, 0] - y_val)))
            if best is None or val_mae < best[0]:
                best = (val_mae, fit.coefficients, mix, strength)

    assert best is not None
    _, warm_full, mix, strength = best
    penalty = PenaltyConfig(strength=strength, mix=mix, tol=cfg.tol, max_iter=cfg.max_iter)
    full = solve_gram_problem(build_gram_problem([X_scaled], [y]), penalty,
                              intercept_index=0, warm_start=warm_full)
    beta = full.coefficients[:, 0]
    selected = count_selected(beta, cfg.selection_threshold, intercept_index=0)[0]
    if selected < cfg.min_selected:
        beta = _embed_unscaled(fallback_fit(x_raw, y), scaler)
        return beta, ScenarioFitLog(scenario, n, selected, mix=mix, strength=strength,
                                    fallback=True)
    return beta, ScenarioFitLog(scenario, n, selected, mix=mix, strength=strength,
                                fallback=False)


def fit_scenario_models(X_scaled, x_raw, y, labels, intervals: ResidualIntervals,
                        scaler: Scaler, cfg: SurrogateConfig,
                        max_scenarios: int = 3) -> tuple[ScenarioSet, tuple[ScenarioFitLog, ...]]:
    """Fit one surrogate per observed scenario of a clustered window."""
    labels = np.asarray(labels, dtype=int)
    n = labels.size
    M = intervals.n_intervals
    pooled_beta = None
    models = []
    logs = []
    for scenario in range(1, M + 1):
        rows = labels == scenario
        n_m = int(np.count_nonzero(rows))
        if n_m == 0:
            # An empty scenario keeps the pooled fit with zero weight so
            # reconstruction toward it stays well-defined.
            if pooled_beta is None:
                pooled_beta = fit_ols(X_scaled, y)
            beta = pooled_beta
            sigma = float(np.std(y - X_scaled @ beta))
            logs.append(ScenarioFitLog(scenario, 0, 0, mix=0.0, strength=0.0, fallback=True))
        else:
            beta, log = _fit_one_scenario(X_scaled[rows], x_raw[rows], y[rows],
                                          scaler, cfg, scenario)
            sigma = float(np.std(y[rows] - X_scaled[rows] @ beta))
            logs.append(log)
        models.append(ScenarioModel(index=scenario, beta=beta, weight=n_m / n,
                                    residual_sigma=sigma))
    scenario_set = ScenarioSet(models=tuple(models), intervals=intervals,
                               max_scenarios=max(max_scenarios, M))
    return scenario_set, tuple(logs)


@dataclass(frozen=True)
class WindowModel:
    """A fitted window: scenario set, dynamics, and its predictions."""

    scenario_set: ScenarioSet
    hmm: HmmSpec | None
    window: DataWindow
    weights: np.ndarray = field(repr=False)
    scaler: Scaler
    logs: tuple[ScenarioFitLog, ...]
    ols_beta: np.ndarray = field(repr=False)
    weight_mode: str = "posterior"

    @property
    def interval(self) -> HitInterval:
        return self.window.interval

    @property
    def labels(self) -> np.ndarray:
        labels = self.window.labels
        assert labels is not None
        return labels

    def prepare_features(self, x_raw) -> np.ndarray:
        return apply_scaler(self.scaler, expand_matrix(np.asarray(x_raw, dtype=float)))

    def train_predictions(self) -> np.ndarray:
        """Causal in-window mixture predictions (one-step-ahead weights)."""
        per_scenario = self.scenario_set.predictions(self.window.features)
        return np.sum(self.weights * per_scenario, axis=1)

    def train_report(self) -> MetricReport:
        return report(self.train_predictions(), self.window.targets, self.interval)

    def train_hit_rate(self) -> float:
        return hit_rate(self.train_predictions(), self.window.targets, self.interval)

    def ols_train_hit_rate(self) -> float:
        return hit_rate(self.window.features @ self.ols_beta, self.window.targets,
                        self.interval)

    def predict_stream(self, x_raw, y_actual) -> tuple[np.ndarray, np.ndarray]:
        """Extend the model over an unseen task stream, task by task.

        The state filter continues from the end of the training window.
        In posterior mode each completed task's residual evidence enters
        its own assignment probabilities; in predictive mode tasks are
        weighted strictly one step ahead and the realized state updates
        the filter afterwards.  Returns the predictions and the realized
        observed states.
        """
        X = self.prepare_features(x_raw)
        y_actual = np.asarray(y_actual, dtype=float).ravel()
        per_scenario = self.scenario_set.predictions(X)
        n = y_actual.size
        M = self.scenario_set.n_scenarios
        intervals = self.scenario_set.intervals

        if self.hmm is None or self.weight_mode == "empirical":
            static = assignment_weights(self.labels, M)[0]
            predictions = per_scenario @ static
            return predictions, intervals.assign(y_actual - predictions)

        predictions = np.empty(n)
        realized = np.empty(n, dtype=int)
        filtered = forward(self.hmm, self.labels - 1).filtered[-1]
        transition, emission = self.hmm.transition, self.hmm.emission
        inclusive = self.weight_mode == "posterior"
        for t in range(n):
            predicted_hidden = filtered @ transition
            task_weights = predicted_hidden @ emission
            provisional = per_scenario[t] @ task_weights
            state = intervals.assign(y_actual[t] - provisional)[0]
            realized[t] = state
            posterior = predicted_hidden * emission[:, state - 1]
            mass = posterior.sum()
            # A state the fitted dynamics consider impossible carries no
            # usable evidence; coast on the prediction.
            posterior = posterior / mass if mass > 0 else predicted_hidden
            predictions[t] = per_scenario[t] @ posterior if inclusive else provisional
            filtered = posterior
        return predictions, realized

    def evaluate_stream(self, x_raw, y_actual) -> MetricReport:
        predictions, _ = self.predict_stream(x_raw, y_actual)
        return report(predictions, y_actual, self.interval)

    def with_state(self, scenario_set: ScenarioSet, labels: np.ndarray,
                   weights: np.ndarray) -> "WindowModel":
        return replace(self, scenario_set=scenario_set, weights=weights,
                       window=replace(self.window, labels=labels))


def fit_window_model(x_raw, y, interval: HitInterval, config: PipelineConfig,
                     seed=0) -> WindowModel:
    """Fit the scenario mixture model on one training window."""
    x_raw = np.asarray(x_raw, dtype=float)
    if x_raw.ndim == 1:
        x_raw = x_raw[:, None]
    y = np.asarray(y, dtype=float).ravel()
    expanded = expand_matrix(x_raw)
    scaler = fit_scaler(expanded)
    X = apply_scaler(scaler, expanded)

    intervals = ResidualIntervals(edges=(interval.lower, interval.upper))
    labels = initial_cluster(X, y, intervals)
    return _assemble_model(X, x_raw, y, labels, interval, intervals, scaler, config, seed)


def _assemble_model(X, x_raw, y, labels, interval, intervals, scaler,
                    config: PipelineConfig, seed) -> WindowModel:
    scenario_set, logs = fit_scenario_models(X, x_raw, y, labels, intervals, scaler,
                                             config.surrogate, config.max_scenarios)
    ols_beta = fit_ols(X, y)
    hmm = None
    if config.weight_mode != "empirical":
        if config.chain_estimator == "known":
            if config.known_chain is None:
                raise ValidationError("chain_estimator 'known' requires known_chain")
            known = config.known_chain
            # The chain emits scenario memberships; what the window
            # observes is the residual interval of each completed task.
            # Compose the two noise stages into the effective emission.
            confusion = measurement_confusion(scenario_set, X, X @ ols_beta)
            hmm = HmmSpec(initial=known.initial, transition=known.transition,
                          emission=known.emission @ confusion)
        elif config.chain_estimator == "counts":
            initial, transition = estimate_state_chain(labels, scenario_set.n_scenarios,
                                                       config.chain_smoothing)
            emission = measurement_confusion(scenario_set, X, X @ ols_beta)
            hmm = HmmSpec(initial=initial, transition=transition, emission=emission)
        else:
            hmm = align_states_to_scenarios(baum_welch(
                labels - 1,
                n_hidden=config.hmm_states,
                n_observed=scenario_set.n_scenarios,
                restarts=config.hmm_restarts,
                max_iter=config.hmm_max_iter,
                tol=config.hmm_tol,
                seed=seed,
            ).spec)
    window = DataWindow(features=X, targets=y, interval=interval, labels=labels)
    weights = scenario_weights(scenario_set, hmm, window, mode=config.weight_mode)
    return WindowModel(scenario_set=scenario_set, hmm=hmm, window=window,
                       weights=weights, scaler=scaler, logs=logs,
                       ols_beta=ols_beta, weight_mode=config.weight_mode)


def refit_window_model(model: WindowModel, x_raw, y, labels,
                       config: PipelineConfig, seed=0) -> WindowModel:
    """Fit a new window whose observed states are already known.

    Rolling studies carry states forward: every task was labeled when it
    was first predicted (or clustered, for the initial window), so later
    windows refit surrogates and dynamics on the recorded states instead
    of re-clustering.
    """
    x_raw = np.asarray(x_raw, dtype=float)
    if x_raw.ndim == 1:
        x_raw = x_raw[:, None]
    y = np.asarray(y, dtype=float).ravel()
    expanded = expand_matrix(x_raw)
    scaler = fit_scaler(expanded)
    X = apply_scaler(scaler, expanded)
    intervals = model.scenario_set.intervals
    return _assemble_model(X, x_raw, y, np.asarray(labels, dtype=int), model.interval,
                           intervals, scaler, config, seed)


def _tail_hit_rate(model: WindowModel, tail: int) -> float:
    """Hit rate of the window's trailing tasks under the stored weights."""
    predictions = model.train_predictions()[-tail:]
    return hit_rate(predictions, model.window.targets[-tail:], model.interval)


def optimize_window_model(model: WindowModel, config: PipelineConfig,
                          holdout_fraction: float = 0.2) -> tuple[WindowModel, HroResult]:
    """Run the hit-rate bisection on a fitted window model.

    The bracket's lower end is the window's pooled least-squares hit
    rate (the conservative baseline any candidate should beat); the
    upper end is 1.  A committed reconstruction is kept only when it
    gains more than one extra hit on the trailing holdout share of the
    window, so grid flukes that would not generalize are discarded and
    an unimprovable window keeps its fitted model unchanged.
    """
    rate_lo = min(model.ols_train_hit_rate(), 1.0 - config.xi)
    result = optimize_hit_rate(
        model.scenario_set,
        model.hmm,
        model.window,
        rate_lo=rate_lo,
        rate_hi=1.0,
        xi=config.xi,
        grid_resolution=config.grid_resolution,
        weight_mode=model.weight_mode,
    )
    optimized = model.with_state(result.scenario_set, result.labels, result.weights)
    tail = max(1, int(round(holdout_fraction * model.window.n_tasks)))
    gain = _tail_hit_rate(optimized, tail) - _tail_hit_rate(model, tail)
    if holdout_fraction > 0 and gain <= 1.0 / tail:
        return model, result
    return optimized, result

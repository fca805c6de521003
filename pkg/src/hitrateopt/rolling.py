"""Rolling-window training and evaluation over a task stream.

Each window trains every roster model on the most recent
``train_window`` tasks and predicts the next ``test_step`` tasks; the
window then advances by the test step.  Scenario-based models carry
their observed states forward: a task is labeled exactly once, when it
is first clustered (initial window) or first predicted (test steps), so
no window ever sees information from tasks it has not yet predicted.

Roster entries:

``ols``        pooled least squares on the expanded window features
``fhmm_mten``  the scenario mixture model as fitted
``hro``        the scenario mixture model after hit-rate optimization
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .features import apply_scaler, expand_matrix, fit_scaler
from .metrics import HitInterval, MetricReport, report
from .pipeline import (
    PipelineConfig,
    ScenarioFitLog,
    WindowModel,
    fit_window_model,
    optimize_window_model,
    refit_window_model,
)
from .regression import fit_ols
from .simulate import LabeledDataset

__all__ = ["WindowPlan", "WindowResult", "ROSTER_MODELS", "run", "aggregate"]

ROSTER_MODELS = ("ols", "fhmm_mten", "hro")


@dataclass(frozen=True)
class WindowPlan:
    """Rolling split geometry over a stream of ``total`` tasks."""

    total: int
    train_window: int = 500
    test_step: int = 50

    def __post_init__(self):
        if self.train_window < 1 or self.test_step < 1:
            raise ValidationError("window sizes must be positive")
        if self.train_window + self.test_step > self.total:
            raise ValidationError(
                "stream too short: need at least train_window + test_step tasks"
            )

    @property
    def n_windows(self) -> int:
        return (self.total - self.train_window) // self.test_step

    def window_slices(self) -> list[tuple[slice, slice]]:
        out = []
        for w in range(self.n_windows):
            start = w * self.test_step
            fit_stop = start + self.train_window
            out.append((slice(start, fit_stop), slice(fit_stop, fit_stop + self.test_step)))
        return out


@dataclass(frozen=True)
class WindowResult:
    """Per-window evaluation of every roster model on one test slice."""

    index: int
    test_start: int
    test_stop: int
    reports: dict[str, MetricReport]
    predictions: dict[str, np.ndarray] = field(repr=False)
    actuals: np.ndarray = field(repr=False)
    selection_logs: dict[str, tuple[ScenarioFitLog, ...]]

    def hit_rates(self) -> dict[str, float]:
        """One point of the per-window hit-rate curve."""
        return {name: rep.hr for name, rep in self.reports.items()}


class _ScenarioModelState:
    """Carried state of one scenario-based roster entry."""

    def __init__(self, optimize: bool):
        self.optimize = optimize
        self.labels: np.ndarray | None = None  # filled progressively, 1-based
        self.model: WindowModel | None = None

    def fit(self, x, y, interval, config, seed, train_slice) -> WindowModel:
        if self.model is None:
            model = fit_window_model(x, y, interval, config, seed=seed)
            self.labels = np.zeros(0, dtype=int)
            self._record(train_slice, model.labels)
        else:
            assert self.labels is not None
            known = self.labels[train_slice]
            model = refit_window_model(self.model, x, y, known, config, seed=seed)
        if self.optimize:
            # Optimization reshapes the scenario set for this window; the
            # recorded observed states stay as first assigned so later
            # windows keep a stable state history.
            model, _ = optimize_window_model(model, config)
        self.model = model
        return model

    def _record(self, where: slice, labels: np.ndarray) -> None:
        assert self.labels is not None
        stop = where.stop if where.stop is not None else labels.size
        if self.labels.size < stop:
            grown = np.zeros(stop, dtype=int)
            grown[: self.labels.size] = self.labels
            self.labels = grown
        self.labels[where] = labels

    def predict(self, x_test, y_test, test_slice) -> np.ndarray:
        assert self.model is not None
        predictions, realized = self.model.predict_stream(x_test, y_test)
        self._record(test_slice, realized)
        return predictions


def run(stream: LabeledDataset, plan: WindowPlan, interval: HitInterval,
        config: PipelineConfig | None = None, roster=ROSTER_MODELS,
        seed: int = 0) -> list[WindowResult]:
    """Roll every roster model across the stream.

    All models are evaluated on identical test slices; scenario state
    carried between windows is updated only by realized observed states,
    never by unpredicted targets.
    """
    if len(stream) < plan.total:
        raise ValidationError(f"stream has {len(stream)} tasks, plan needs {plan.total}")
    unknown = set(roster) - set(ROSTER_MODELS)
    if unknown:
        raise ValidationError(f"unknown roster models: {sorted(unknown)}")
    if config is None:
        config = PipelineConfig()

    states = {
        name: _ScenarioModelState(optimize=(name == "hro"))
        for name in roster
        if name != "ols"
    }
    results = []
    for index, (train_slice, test_slice) in enumerate(plan.window_slices()):
        assert test_slice.start == train_slice.stop  # no test task precedes its window
        x_train, y_train = stream.x[train_slice], stream.y[train_slice]
        x_test, y_test = stream.x[test_slice], stream.y[test_slice]

        predictions: dict[str, np.ndarray] = {}
        logs: dict[str, tuple[ScenarioFitLog, ...]] = {}
        for name in roster:
            if name == "ols":
                expanded = expand_matrix(np.atleast_2d(x_train))
                scaler = fit_scaler(expanded)
                beta = fit_ols(apply_scaler(scaler, expanded), y_train)
                test_features = apply_scaler(scaler, expand_matrix(np.atleast_2d(x_test)))
                predictions[name] = test_features @ beta
                continue
            state = states[name]
            fit_seed = np.random.SeedSequence((seed, index, ROSTER_MODELS.index(name)))
            window_model = state.fit(x_train, y_train, interval, config, fit_seed,
                                     train_slice)
            logs[name] = window_model.logs
            predictions[name] = state.predict(x_test, y_test, test_slice)

        reports = {name: report(preds, y_test, interval)
                   for name, preds in predictions.items()}
        results.append(WindowResult(
            index=index + 1,
            test_start=test_slice.start,
            test_stop=test_slice.stop,
            reports=reports,
            predictions=predictions,
            actuals=y_test.copy(),
            selection_logs=logs,
        ))
    return results


def aggregate(results: list[WindowResult], interval: HitInterval) -> dict[str, MetricReport]:
    """Pooled metrics per model over every test slice.

    Pooling concatenates raw test errors, so the pooled MAE is the mean
    over all errors rather than the mean of per-window MAEs.
    """
    if not results:
        raise ValidationError("nothing to aggregate")
    names = results[0].predictions.keys()
    actuals = np.concatenate([r.actuals for r in results])
    return {
        name: report(np.concatenate([r.predictions[name] for r in results]),
                     actuals, interval)
        for name in names
    }

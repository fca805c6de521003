"""Hit-rate optimization over scenario reconstructions.

The search space is the reconstruction grid: every (scenario m, adjacent
neighbor j, blend weight alpha) triple on a uniform alpha grid, plus the
identity candidate (the unmodified set, alpha = 1).  Each candidate is
scored by the training-window hit rate and MAE of its mixture predictor
under the current per-task assignment probabilities.

Because the candidate set is fixed and finite for a given scenario set,
"is rate theta achievable" is simply "max candidate rate >= theta", which
makes feasibility downward-closed along the rate axis.  The optimal-rate
search is classic bisection on that feasibility predicate: a feasible
trial commits the best candidate (and refreshes the observed states and
assignment probabilities from its residuals) and raises the bracket's
lower end; an infeasible trial lowers the upper end.  The bracket width
halves exactly once per iteration, so the trial count for width w and
tolerance xi is exactly ceil(log2(w / xi)).

The controlled-rate search targets a required rate instead of the
maximum: among candidates at or above the target it keeps those closest
to it (within ``rate_band``) and returns the MAE-minimal one.  Sweeping
ascending targets traces the frontier of (achievable rate, best MAE)
pairs.  Ties anywhere resolve by lower MAE, then the lexicographically
smallest (m, j, alpha), so results do not depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InfeasibleTargetError, ValidationError
from .hmm import HmmSpec, forward
from .metrics import HitInterval, hit_rate
from .scenarios import ResidualIntervals, ScenarioSet, reconstruct, update_probabilities

__all__ = [
    "DataWindow",
    "FeasibilityResult",
    "TrialRecord",
    "HroResult",
    "FrontierPoint",
    "hit_rate",
    "assignment_weights",
    "scenario_weights",
    "feasibility_check",
    "optimize_hit_rate",
    "controlled_fit",
    "frontier",
]

DEFAULT_GRID_RESOLUTION = 0.05
DEFAULT_RATE_BAND = 0.015


@dataclass(frozen=True)
class DataWindow:
    """One training window: expanded features, targets, band, states.

    ``labels`` are the 1-based observed scenario states of each task,
    used to form assignment probabilities; optional when scoring with
    static uniform weights.
    """

    features: np.ndarray
    targets: np.ndarray
    interval: HitInterval
    labels: np.ndarray | None = None

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        targets = np.asarray(self.targets, dtype=float).ravel()
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "targets", targets)
        if features.ndim != 2 or features.shape[0] == 0:
            raise ValidationError("window features must be a non-empty 2-d matrix")
        if features.shape[0] != targets.size:
            raise ValidationError("window features and targets differ in length")
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=int)
            object.__setattr__(self, "labels", labels)
            if labels.size != targets.size:
                raise ValidationError("window labels and targets differ in length")

    @property
    def n_tasks(self) -> int:
        return self.targets.size


def assignment_weights(labels: np.ndarray | None, n_scenarios: int,
                       hmm: HmmSpec | None = None, n_tasks: int | None = None) -> np.ndarray:
    """Causal per-task scenario probabilities from the observed states.

    With an HMM attached, row t is the one-step-ahead predictive
    distribution of the observed state given states 1..t-1 (the first row
    uses the initial distribution).  Without one, every row is the
    empirical state frequency; with no labels at all, uniform.
    """
    if hmm is not None:
        if labels is None:
            raise ValidationError("an HMM needs observed labels to filter")
        if hmm.n_observed != n_scenarios:
            raise ValidationError("HMM observed alphabet must match the scenario count")
        post = forward(hmm, np.asarray(labels, dtype=int) - 1)
        predicted_hidden = np.vstack([hmm.initial, post.filtered[:-1] @ hmm.transition])
        return predicted_hidden @ hmm.emission
    if n_tasks is None:
        n_tasks = 0 if labels is None else np.asarray(labels).size
    if labels is None:
        return np.full((n_tasks, n_scenarios), 1.0 / n_scenarios)
    freqs = update_probabilities(labels, n_scenarios)
    return np.tile(freqs, (n_tasks, 1))


def scenario_weights(scenario_set: ScenarioSet, hmm: HmmSpec | None, window: DataWindow,
                     mode: str = "posterior") -> np.ndarray:
    """Per-task assignment probabilities over scenarios.

    ``posterior`` (default): the filtered hidden-state distribution given
    the observed states up to and including each task's own, so a
    completed task's realized state sharpens its own scenario weights as
    far as the emission's measurement noise allows; requires one hidden
    state per scenario.  ``predictive``: the strictly causal one-step-
    ahead observed-state distribution.  ``empirical``: static state
    frequencies.
    """
    M = scenario_set.n_scenarios
    if mode not in ("posterior", "predictive", "empirical"):
        raise ValidationError("mode must be posterior, predictive, or empirical")
    if hmm is None or mode == "empirical":
        return assignment_weights(window.labels, M, hmm=None, n_tasks=window.n_tasks)
    if window.labels is None:
        raise ValidationError("an HMM needs observed labels to filter")
    if mode == "predictive":
        return assignment_weights(window.labels, M, hmm=hmm)
    if hmm.n_hidden != M:
        raise ValidationError(
            "posterior weighting needs one hidden state per scenario; "
            f"got {hmm.n_hidden} states for {M} scenarios"
        )
    return forward(hmm, np.asarray(window.labels, dtype=int) - 1).filtered


@dataclass(frozen=True)
class _CandidateGrid:
    """Flat, lex-ordered scoring of every reconstruction candidate."""

    moves: np.ndarray   # (n_cands, 2) scenario pair; (0, 0) marks identity
    alphas: np.ndarray  # (n_cands,)
    rates: np.ndarray
    maes: np.ndarray

    def order(self, primary: np.ndarray) -> np.ndarray:
        """Candidate indices sorted by (primary, mae, m, j, alpha)."""
        return np.lexsort((self.alphas, self.moves[:, 1], self.moves[:, 0],
                           self.maes, primary))

    def alpha_vector(self, index: int, n_scenarios: int) -> np.ndarray:
        vec = np.ones(n_scenarios)
        m = int(self.moves[index, 0])
        if m > 0:
            vec[m - 1] = self.alphas[index]
        return vec

    def move(self, index: int) -> tuple[int, int, float] | None:
        m, j = (int(v) for v in self.moves[index])
        if m == 0:
            return None
        return m, j, float(self.alphas[index])


def _alpha_grid(grid_resolution: float) -> np.ndarray:
    if not 0.0 < grid_resolution <= 1.0:
        raise ValidationError("grid resolution must lie in (0, 1]")
    steps = max(1, round(1.0 / grid_resolution))
    return np.linspace(0.0, 1.0, steps + 1)


def _adjacent_pairs(n_scenarios: int) -> list[tuple[int, int]]:
    pairs = []
    for m in range(1, n_scenarios + 1):
        for j in (m - 1, m + 1):
            if 1 <= j <= n_scenarios:
                pairs.append((m, j))
    return pairs


def _score_candidates(scenario_set: ScenarioSet, window: DataWindow,
                      weights: np.ndarray, grid_resolution: float) -> _CandidateGrid:
    alphas = _alpha_grid(grid_resolution)
    preds = scenario_set.predictions(window.features)
    base = np.sum(weights * preds, axis=1)
    y = window.targets
    lo, hi = window.interval.lower, window.interval.upper

    move_rows = [(0, 0)]
    alpha_rows = [1.0]
    base_err = base - y
    rate_rows = [float(np.mean((base_err >= lo) & (base_err <= hi)))]
    mae_rows = [float(np.mean(np.abs(base_err)))]
    for m, j in _adjacent_pairs(scenario_set.n_scenarios):
        shift = weights[:, m - 1] * (preds[:, j - 1] - preds[:, m - 1])
        err = base_err[None, :] + (1.0 - alphas)[:, None] * shift[None, :]
        hits = (err >= lo) & (err <= hi)
        move_rows.extend([(m, j)] * alphas.size)
        alpha_rows.extend(alphas.tolist())
        rate_rows.extend(hits.mean(axis=1).tolist())
        mae_rows.extend(np.mean(np.abs(err), axis=1).tolist())
    return _CandidateGrid(
        moves=np.asarray(move_rows, dtype=int),
        alphas=np.asarray(alpha_rows),
        rates=np.asarray(rate_rows),
        maes=np.asarray(mae_rows),
    )


def _window_weights(scenario_set: ScenarioSet, window: DataWindow,
                    hmm: HmmSpec | None, weight_mode: str) -> np.ndarray:
    return scenario_weights(scenario_set, hmm, window, mode=weight_mode)


@dataclass(frozen=True)
class FeasibilityResult:
    """Outcome of one feasibility scan at a trial rate."""

    feasible: bool
    achieved_rate: float
    achieved_mae: float
    alpha: np.ndarray
    scenario_set: ScenarioSet
    move: tuple[int, int, float] | None


def _apply_move(scenario_set: ScenarioSet, move: tuple[int, int, float] | None) -> ScenarioSet:
    if move is None:
        return scenario_set
    m, j, alpha = move
    return reconstruct(scenario_set, m, j, alpha)


def feasibility_check(scenario_set: ScenarioSet, hmm: HmmSpec | None, window: DataWindow,
                      theta: float, grid_resolution: float = DEFAULT_GRID_RESOLUTION,
                      weights: np.ndarray | None = None,
                      weight_mode: str = "posterior") -> FeasibilityResult:
    """Can any reconstruction candidate reach hit rate ``theta``?

    Scans the full candidate grid under fixed assignment probabilities
    and returns the rate-maximal candidate (ties: lower MAE, then lowest
    (m, j, alpha)); the scan is feasible when that maximum is >= theta.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValidationError("theta must lie in [0, 1]")
    if weights is None:
        weights = _window_weights(scenario_set, window, hmm, weight_mode)
    grid = _score_candidates(scenario_set, window, weights, grid_resolution)
    best = int(grid.order(-grid.rates)[0])
    achieved = float(grid.rates[best])
    return FeasibilityResult(
        feasible=achieved >= theta,
        achieved_rate=achieved,
        achieved_mae=float(grid.maes[best]),
        alpha=grid.alpha_vector(best, scenario_set.n_scenarios),
        scenario_set=_apply_move(scenario_set, grid.move(best)),
        move=grid.move(best),
    )


@dataclass(frozen=True)
class TrialRecord:
    """One bisection trial: the rate tried and what the scan found."""

    theta: float
    feasible: bool
    alpha: np.ndarray
    achieved_rate: float


@dataclass(frozen=True)
class HroResult:
    """Bisection outcome: optimal rate plus the best committed state."""

    optimal_rate: float
    scenario_set: ScenarioSet
    labels: np.ndarray
    weights: np.ndarray = field(repr=False)
    trace: tuple[TrialRecord, ...]
    train_rate: float
    train_mae: float
    any_feasible: bool


def _mixture_metrics(scenario_set: ScenarioSet, window: DataWindow,
                     weights: np.ndarray) -> tuple[np.ndarray, float, float]:
    preds = np.sum(weights * scenario_set.predictions(window.features), axis=1)
    err = preds - window.targets
    rate = float(np.mean((err >= window.interval.lower) & (err <= window.interval.upper)))
    return preds, rate, float(np.mean(np.abs(err)))


def optimize_hit_rate(scenario_set: ScenarioSet, hmm: HmmSpec | None, window: DataWindow,
                      rate_lo: float, rate_hi: float = 1.0, xi: float = 0.01,
                      grid_resolution: float = DEFAULT_GRID_RESOLUTION,
                      weight_mode: str = "posterior") -> HroResult:
    """Bisection search for the best achievable training hit rate.

    Every feasible trial commits its best candidate: the scenario set is
    reconstructed, observed states are re-derived from the committed
    predictor's residuals, and assignment probabilities are refreshed
    under the committed models.  The returned state is the committed
    state with the highest honest (post-refresh) training hit rate, never
    worse than the unmodified input set.  ``optimal_rate`` is the last
    feasible trial value; if no trial is feasible it falls back to
    ``rate_lo`` with ``any_feasible`` False.
    """
    if not 0.0 <= rate_lo < rate_hi <= 1.0:
        raise ValidationError("need 0 <= rate_lo < rate_hi <= 1")
    if xi <= 0.0:
        raise ValidationError("xi must be positive")
    if window.labels is None:
        raise ValidationError("the optimization window needs observed labels")

    labels = window.labels
    weights = _window_weights(scenario_set, window, hmm, weight_mode)
    current = scenario_set
    current_window = window
    _, best_rate, best_mae = _mixture_metrics(current, window, weights)
    best_state = (current, labels, weights, best_rate, best_mae)

    lo = rate_lo
    width = rate_hi - rate_lo
    trace: list[TrialRecord] = []
    last_feasible: float | None = None
    while width > xi:
        theta = lo + width / 2.0
        result = feasibility_check(current, hmm, current_window, theta,
                                   grid_resolution=grid_resolution, weights=weights)
        if result.feasible:
            committed = result.scenario_set
            weights = _window_weights(committed, current_window, hmm, weight_mode)
            preds, honest_rate, honest_mae = _mixture_metrics(committed, current_window,
                                                              weights)
            labels = committed.intervals.assign(current_window.targets - preds)
            current = committed
            current_window = replace(current_window, labels=labels)
            if honest_rate > best_state[3] or (
                honest_rate == best_state[3] and honest_mae < best_state[4]
            ):
                best_state = (committed, labels, weights, honest_rate, honest_mae)
            lo = theta
            last_feasible = theta
        width /= 2.0
        trace.append(TrialRecord(theta=theta, feasible=result.feasible,
                                 alpha=result.alpha, achieved_rate=result.achieved_rate))

    return HroResult(
        optimal_rate=rate_lo if last_feasible is None else last_feasible,
        scenario_set=best_state[0],
        labels=best_state[1],
        weights=best_state[2],
        trace=tuple(trace),
        train_rate=best_state[3],
        train_mae=best_state[4],
        any_feasible=last_feasible is not None,
    )


@dataclass(frozen=True)
class FrontierPoint:
    """One controlled-rate solution (or an infeasibility marker)."""

    target_rate: float
    alpha: np.ndarray
    achieved_rate: float
    achieved_mae: float
    feasible: bool = True
    move: tuple[int, int, float] | None = None


def _pick_controlled(grid: _CandidateGrid, target_rate: float, rate_band: float,
                     n_scenarios: int) -> FrontierPoint:
    eligible = grid.rates >= target_rate
    if not np.any(eligible):
        raise InfeasibleTargetError(target_rate, float(np.max(grid.rates)))
    in_band = eligible & (grid.rates <= target_rate + rate_band)
    if not np.any(in_band):
        # Nothing lands inside the control band; take the candidates
        # whose rate hugs the target most tightly from above.
        closest = np.min(grid.rates[eligible])
        in_band = eligible & (grid.rates == closest)
    order = grid.order(np.where(in_band, grid.maes, np.inf))
    best = int(order[0])
    return FrontierPoint(
        target_rate=target_rate,
        alpha=grid.alpha_vector(best, n_scenarios),
        achieved_rate=float(grid.rates[best]),
        achieved_mae=float(grid.maes[best]),
        feasible=True,
        move=grid.move(best),
    )


def controlled_fit(scenario_set: ScenarioSet, hmm: HmmSpec | None, window: DataWindow,
                   target_rate: float, grid_resolution: float = DEFAULT_GRID_RESOLUTION,
                   rate_band: float = DEFAULT_RATE_BAND,
                   weights: np.ndarray | None = None,
                   weight_mode: str = "posterior") -> FrontierPoint:
    """Best candidate controlled to a required hit rate.

    Among grid candidates achieving at least ``target_rate``, candidates
    within ``rate_band`` above the target are preferred (the controlled
    rate should hug its requirement, not overshoot it), and the MAE-
    minimal of those is returned.  An unreachable target raises
    ``InfeasibleTargetError`` carrying the best achievable rate.
    """
    if not 0.0 <= target_rate <= 1.0:
        raise ValidationError("target rate must lie in [0, 1]")
    if rate_band < 0.0:
        raise ValidationError("rate band must be non-negative")
    if weights is None:
        weights = _window_weights(scenario_set, window, hmm, weight_mode)
    grid = _score_candidates(scenario_set, window, weights, grid_resolution)
    return _pick_controlled(grid, target_rate, rate_band, scenario_set.n_scenarios)


def frontier(scenario_set: ScenarioSet, hmm: HmmSpec | None, window: DataWindow,
             rate_grid, grid_resolution: float = DEFAULT_GRID_RESOLUTION,
             rate_band: float = DEFAULT_RATE_BAND,
             weight_mode: str = "posterior") -> list[FrontierPoint]:
    """Controlled fits across an ascending grid of target rates.

    Candidates are scored once and reused for every target.  Infeasible
    targets produce flagged points (``feasible`` False, the max
    achievable rate, NaN MAE) instead of raising.
    """
    targets = [float(t) for t in rate_grid]
    if any(not 0.0 <= t <= 1.0 for t in targets):
        raise ValidationError("rate grid entries must lie in [0, 1]")
    if any(b < a for a, b in zip(targets, targets[1:])):
        raise ValidationError("rate grid must be ascending")
    weights = _window_weights(scenario_set, window, hmm, weight_mode)
    grid = _score_candidates(scenario_set, window, weights, grid_resolution)
    points = []
    for target in targets:
        try:
            points.append(_pick_controlled(grid, target, rate_band,
                                           scenario_set.n_scenarios))
        except InfeasibleTargetError as exc:
            points.append(FrontierPoint(
                target_rate=target,
                alpha=np.ones(scenario_set.n_scenarios),
                achieved_rate=exc.max_achievable,
                achieved_mae=math.nan,
                feasible=False,
                move=None,
            ))
    return points

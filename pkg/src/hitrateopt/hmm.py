"""Discrete hidden Markov models: sampling, inference, and EM learning.

State and symbol indices are 0-based throughout this module.  Forward and
backward passes use per-step normalization so length-1000 sequences stay
in range; likelihoods are accumulated in the log domain.  An observation
sequence that is impossible under a spec yields a log-likelihood of -inf
rather than an error, so EM restarts can discard such initializations.

Everything here is pure given (inputs, seed): specs are frozen, arrays are
marked read-only, and identical seeds reproduce identical draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CapacityError, ValidationError

__all__ = [
    "HmmSpec",
    "GaussianEmissionSpec",
    "StatePosterior",
    "BaumWelchResult",
    "sample_state_path",
    "emit_labels",
    "forward",
    "backward_smooth",
    "viterbi",
    "baum_welch",
    "flatten_factorial",
    "predict_next_state_probs",
]

_ROW_SUM_TOL = 1e-12
_VARIANCE_FLOOR = 1e-8


def _check_stochastic(name: str, rows: np.ndarray) -> None:
    if np.any(rows < 0):
        raise ValidationError(f"{name} has negative entries")
    sums = rows.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > _ROW_SUM_TOL):
        raise ValidationError(f"{name} rows must sum to 1 within {_ROW_SUM_TOL}")


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class HmmSpec:
    """A discrete HMM: initial distribution, transition and emission rows.

    ``transition`` is (n_hidden, n_hidden), ``emission`` is
    (n_hidden, n_observed); every row is a probability distribution.
    """

    initial: np.ndarray
    transition: np.ndarray
    emission: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "initial", _frozen_array(self.initial))
        object.__setattr__(self, "transition", _frozen_array(self.transition))
        object.__setattr__(self, "emission", _frozen_array(self.emission))
        if self.initial.ndim != 1 or self.transition.ndim != 2 or self.emission.ndim != 2:
            raise ValidationError("initial must be a vector; transition and emission matrices")
        k = self.initial.size
        if self.transition.shape != (k, k):
            raise ValidationError(
                f"transition shape {self.transition.shape} does not match {k} hidden states"
            )
        if self.emission.shape[0] != k:
            raise ValidationError(
                f"emission has {self.emission.shape[0]} rows but there are {k} hidden states"
            )
        _check_stochastic("initial", self.initial[None, :])
        _check_stochastic("transition", self.transition)
        _check_stochastic("emission", self.emission)

    @property
    def n_hidden(self) -> int:
        return self.initial.size

    @property
    def n_observed(self) -> int:
        return self.emission.shape[1]


@dataclass(frozen=True)
class GaussianEmissionSpec:
    """Per-state scalar Gaussian emission: one (mean, variance) per state.

    Variances are floored at 1e-8 so a state fitted on identical samples
    still defines a proper density.
    """

    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "means", _frozen_array(self.means))
        variances = np.maximum(np.array(self.variances, dtype=float), _VARIANCE_FLOOR)
        object.__setattr__(self, "variances", _frozen_array(variances))
        if self.means.shape != self.variances.shape or self.means.ndim != 1:
            raise ValidationError("means and variances must be equal-length vectors")

    def density(self, value: float) -> np.ndarray:
        """Per-state density of a scalar observation."""
        diff = value - self.means
        return np.exp(-0.5 * diff * diff / self.variances) / np.sqrt(2.0 * np.pi * self.variances)


@dataclass(frozen=True)
class StatePosterior:
    """Forward/backward output: per-time state distributions.

    ``filtered[t]`` is p(state_t | obs_1..t); ``smoothed[t]``, when
    present, is p(state_t | obs_1..T).  ``log_likelihood`` is the log of
    the total observation probability (-inf for impossible sequences).
    """

    filtered: np.ndarray
    log_likelihood: float
    smoothed: np.ndarray | None = None


@dataclass(frozen=True)
class BaumWelchResult:
    """Best-restart EM fit together with its per-iteration likelihoods."""

    spec: HmmSpec
    log_likelihood: float
    restart_index: int
    traces: tuple[np.ndarray, ...] = field(repr=False, default=())

    @property
    def trace(self) -> np.ndarray:
        """Log-likelihood after each EM iteration of the winning restart."""
        return self.traces[self.restart_index]


def _as_symbols(observations, n_observed: int, allow_empty: bool = False) -> np.ndarray:
    obs = np.asarray(observations)
    if obs.ndim != 1:
        raise ValidationError("observations must be a 1-d sequence of symbols")
    if obs.size == 0:
        if allow_empty:
            return obs.astype(int)
        raise ValidationError("observation sequence must be non-empty")
    if not np.issubdtype(obs.dtype, np.integer):
        rounded = np.rint(np.asarray(obs, dtype=float))
        if np.any(rounded != np.asarray(obs, dtype=float)):
            raise ValidationError("observation symbols must be integers")
        obs = rounded.astype(int)
    if obs.min() < 0 or obs.max() >= n_observed:
        raise ValidationError(f"observation symbols must lie in [0, {n_observed})")
    return obs.astype(int)


def sample_state_path(spec: HmmSpec, length: int, seed) -> np.ndarray:
    """Draw a hidden state sequence of the given length.

    The first state comes from ``spec.initial``; identical (spec, seed)
    pairs reproduce identical paths.
    """
    if length < 1:
        raise ValidationError("length must be >= 1")
    rng = np.random.default_rng(seed)
    cum_initial = np.cumsum(spec.initial)
    cum_rows = np.cumsum(spec.transition, axis=1)
    u = rng.random(length)
    path = np.empty(length, dtype=int)
    path[0] = min(int(np.searchsorted(cum_initial, u[0], side="right")), spec.n_hidden - 1)
    for t in range(1, length):
        row = cum_rows[path[t - 1]]
        path[t] = min(int(np.searchsorted(row, u[t], side="right")), spec.n_hidden - 1)
    return path


def emit_labels(spec: HmmSpec, hidden_path, seed) -> np.ndarray:
    """Draw one observed symbol per hidden state along a path."""
    path = np.asarray(hidden_path, dtype=int)
    if path.size == 0:
        return np.empty(0, dtype=int)
    if path.min() < 0 or path.max() >= spec.n_hidden:
        raise ValidationError(f"hidden indices must lie in [0, {spec.n_hidden})")
    rng = np.random.default_rng(seed)
    cum_rows = np.cumsum(spec.emission, axis=1)
    u = rng.random(path.size)
    labels = np.empty(path.size, dtype=int)
    for t, state in enumerate(path):
        labels[t] = min(int(np.searchsorted(cum_rows[state], u[t], side="right")),
                        spec.n_observed - 1)
    return labels


def _forward_pass(spec: HmmSpec, obs: np.ndarray):
    """Scaled forward recursion.

    Returns (filtered, step_norms, log_likelihood).  On an impossible
    observation the remaining filtered rows are uniform and the
    log-likelihood is -inf.
    """
    T, k = obs.size, spec.n_hidden
    filtered = np.empty((T, k))
    norms = np.empty(T)
    a = spec.initial * spec.emission[:, obs[0]]
    log_likelihood = 0.0
    for t in range(T):
        if t > 0:
            a = (filtered[t - 1] @ spec.transition) * spec.emission[:, obs[t]]
        c = a.sum()
        if c <= 0.0:
            filtered[t:] = 1.0 / k
            norms[t:] = 1.0
            return filtered, norms, -np.inf
        filtered[t] = a / c
        norms[t] = c
        log_likelihood += np.log(c)
    return filtered, norms, log_likelihood


def forward(spec: HmmSpec, observations) -> StatePosterior:
    """Filtered state distributions and the sequence log-likelihood."""
    obs = _as_symbols(observations, spec.n_observed)
    filtered, _, log_likelihood = _forward_pass(spec, obs)
    return StatePosterior(filtered=filtered, log_likelihood=log_likelihood)


def _backward_pass(spec: HmmSpec, obs: np.ndarray, norms: np.ndarray) -> np.ndarray:
    T, k = obs.size, spec.n_hidden
    beta = np.empty((T, k))
    beta[-1] = 1.0
    for t in range(T - 2, -1, -1):
        beta[t] = (spec.transition @ (spec.emission[:, obs[t + 1]] * beta[t + 1])) / norms[t + 1]
    return beta


def backward_smooth(spec: HmmSpec, observations) -> StatePosterior:
    """Smoothed (per-time marginal) state distributions."""
    obs = _as_symbols(observations, spec.n_observed)
    filtered, norms, log_likelihood = _forward_pass(spec, obs)
    if not np.isfinite(log_likelihood):
        smoothed = np.full_like(filtered, 1.0 / spec.n_hidden)
        return StatePosterior(filtered=filtered, log_likelihood=log_likelihood,
                              smoothed=smoothed)
    beta = _backward_pass(spec, obs, norms)
    smoothed = filtered * beta
    smoothed /= smoothed.sum(axis=1, keepdims=True)
    return StatePosterior(filtered=filtered, log_likelihood=log_likelihood, smoothed=smoothed)


def viterbi(spec: HmmSpec, observations) -> np.ndarray:
    """Most probable hidden path; ties resolve to the lowest state index."""
    obs = _as_symbols(observations, spec.n_observed)
    T, k = obs.size, spec.n_hidden
    with np.errstate(divide="ignore"):
        log_init = np.log(spec.initial)
        log_trans = np.log(spec.transition)
        log_emis = np.log(spec.emission)
    score = log_init + log_emis[:, obs[0]]
    back = np.empty((T, k), dtype=int)
    for t in range(1, T):
        step = score[:, None] + log_trans
        # argmax returns the first (lowest-index) maximizer, which fixes
        # the tie-break deterministically.
        back[t] = np.argmax(step, axis=0)
        score = step[back[t], np.arange(k)] + log_emis[:, obs[t]]
    path = np.empty(T, dtype=int)
    path[-1] = int(np.argmax(score))
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path


def _random_stochastic(rng: np.random.Generator, shape, jitter: float = 0.5) -> np.ndarray:
    rows = 1.0 + jitter * rng.random(shape)
    return rows / rows.sum(axis=-1, keepdims=True)


def _batched_em_step(initial, transition, emission, obs: np.ndarray, onehot: np.ndarray):
    """One EM iteration for a stack of restarts run in lockstep.

    ``initial`` is (R, K), ``transition`` (R, K, K), ``emission``
    (R, K, V).  Returns the updated stack and the (R,) log-likelihoods of
    the inputs.  All restarts share the forward/backward recursion, which
    keeps the per-iteration cost nearly independent of R.
    """
    R, K = initial.shape
    T = obs.size
    emis_obs = emission[:, :, obs]                      # (R, K, T)
    filtered = np.empty((T, R, K))
    norms = np.empty((T, R))
    a = initial * emis_obs[:, :, 0]
    for t in range(T):
        if t > 0:
            a = np.einsum("rk,rkj->rj", filtered[t - 1], transition) * emis_obs[:, :, t]
        c = a.sum(axis=1)
        c = np.where(c > 0, c, 1.0)
        norms[t] = c
        filtered[t] = a / c[:, None]
    log_likelihood = np.log(norms).sum(axis=0)

    beta = np.empty((T, R, K))
    beta[-1] = 1.0
    for t in range(T - 2, -1, -1):
        beta[t] = np.einsum("rkj,rj->rk", transition,
                            emis_obs[:, :, t + 1] * beta[t + 1]) / norms[t + 1][:, None]

    gamma = filtered * beta                             # (T, R, K)
    gamma_sums = gamma.sum(axis=2, keepdims=True)
    gamma = np.where(gamma_sums > 0, gamma / np.where(gamma_sums > 0, gamma_sums, 1.0),
                     1.0 / K)
    new_initial = gamma[0]
    weighted = (emis_obs[:, :, 1:].transpose(2, 0, 1) * beta[1:]) / norms[1:, :, None]
    counts = transition * np.einsum("tri,trj->rij", filtered[:-1], weighted)
    row_sums = counts.sum(axis=2, keepdims=True)
    new_transition = counts / np.where(row_sums > 0, row_sums, 1.0)
    new_transition += np.where(row_sums > 0, 0.0, 1.0 / K)
    emis_counts = np.einsum("trk,tv->rkv", gamma, onehot)
    emis_sums = emis_counts.sum(axis=2, keepdims=True)
    new_emission = emis_counts / np.where(emis_sums > 0, emis_sums, 1.0)
    new_emission += np.where(emis_sums > 0, 0.0, 1.0 / emission.shape[2])

    new_initial = new_initial / new_initial.sum(axis=1, keepdims=True)
    new_transition /= new_transition.sum(axis=2, keepdims=True)
    new_emission /= new_emission.sum(axis=2, keepdims=True)
    return (new_initial, new_transition, new_emission), log_likelihood


def baum_welch(
    observations,
    n_hidden: int,
    n_observed: int | None = None,
    restarts: int = 5,
    max_iter: int = 200,
    tol: float = 1e-6,
    seed=0,
) -> BaumWelchResult:
    """Fit an HMM by expectation-maximization with random restarts.

    Each restart starts from stochastic matrices perturbed away from
    uniform; the restart with the best final log-likelihood wins, ties
    going to the lowest restart index.  The per-iteration log-likelihood
    trace of every restart is retained and is non-decreasing.
    """
    if n_hidden < 1:
        raise ValidationError("n_hidden must be >= 1")
    if restarts < 1:
        raise ValidationError("restarts must be >= 1")
    obs = np.asarray(observations)
    if obs.size < 2:
        raise ValidationError("Baum-Welch requires at least two observations")
    if n_observed is None:
        n_observed = int(np.max(obs)) + 1
    obs = _as_symbols(obs, n_observed)
    onehot = np.zeros((obs.size, n_observed))
    onehot[np.arange(obs.size), obs] = 1.0

    rng = np.random.default_rng(seed)
    initial = np.empty((restarts, n_hidden))
    transition = np.empty((restarts, n_hidden, n_hidden))
    emission = np.empty((restarts, n_hidden, n_observed))
    for r in range(restarts):
        initial[r] = _random_stochastic(rng, n_hidden)
        transition[r] = _random_stochastic(rng, (n_hidden, n_hidden))
        emission[r] = _random_stochastic(rng, (n_hidden, n_observed))

    # All restarts iterate in lockstep; a converged restart freezes its
    # arrays so every trace ends at the likelihood of the kept fit.
    trace_lists: list[list[float]] = [[] for _ in range(restarts)]
    done = np.zeros(restarts, dtype=bool)
    for iteration in range(max_iter + 1):
        updated, log_likelihood = _batched_em_step(initial, transition, emission,
                                                   obs, onehot)
        for r in range(restarts):
            if done[r]:
                continue
            trace_lists[r].append(float(log_likelihood[r]))
            if iteration >= 1 and trace_lists[r][-1] - trace_lists[r][-2] < tol:
                done[r] = True
        if np.all(done) or iteration == max_iter:
            break
        keep = ~done
        initial[keep] = updated[0][keep]
        transition[keep] = updated[1][keep]
        emission[keep] = updated[2][keep]

    finals = np.array([t[-1] if t else -np.inf for t in trace_lists])
    winner = int(np.argmax(finals))
    spec = HmmSpec(initial=initial[winner], transition=transition[winner],
                   emission=emission[winner])
    return BaumWelchResult(
        spec=spec,
        log_likelihood=float(finals[winner]),
        restart_index=winner,
        traces=tuple(np.asarray(t) for t in trace_lists),
    )


def flatten_factorial(chains: Sequence[HmmSpec], max_states: int = 4096) -> HmmSpec:
    """Flatten independent chains into one product-space HMM.

    The flattened transition/initial/emission are Kronecker products of
    the per-chain matrices; the joint observed symbol is the mixed-radix
    code of the per-chain symbols (first chain most significant).  Exact
    inference on the product spec reproduces the factored joint.
    """
    if len(chains) == 0:
        raise ValidationError("at least one chain is required")
    if len(chains) == 1:
        return chains[0]
    n_states = 1
    for chain in chains:
        n_states *= chain.n_hidden
        if n_states > max_states:
            raise CapacityError(
                f"product state space exceeds {max_states}; exact flattening refused"
            )
    initial = chains[0].initial
    transition = chains[0].transition
    emission = chains[0].emission
    for chain in chains[1:]:
        initial = np.kron(initial, chain.initial)
        transition = np.kron(transition, chain.transition)
        emission = np.kron(emission, chain.emission)
    return HmmSpec(initial=initial, transition=transition, emission=emission)


def predict_next_state_probs(spec: HmmSpec, filtered_last) -> np.ndarray:
    """One-step state prediction: filtered distribution through the transition."""
    v = np.asarray(filtered_last, dtype=float).ravel()
    if v.size != spec.n_hidden:
        raise ValidationError(f"expected a length-{spec.n_hidden} distribution")
    if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-8:
        raise ValidationError("filtered_last must be a probability distribution")
    return v @ spec.transition

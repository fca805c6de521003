"""Exception types shared across the package."""


class HitRateOptError(Exception):
    """Base class for all package errors."""


class ValidationError(HitRateOptError):
    """An input violates a documented precondition or type invariant."""


class CapacityError(HitRateOptError):
    """A request exceeds a hard size limit (e.g. product state space)."""


class DegenerateDataError(HitRateOptError):
    """A computation is undefined on the given data (e.g. constant targets)."""


class InfeasibleTargetError(HitRateOptError):
    """A controlled hit-rate target exceeds what any candidate can achieve.

    Carries the best rate any grid candidate reached so callers can fall
    back or report the gap.
    """

    def __init__(self, target_rate: float, max_achievable: float):
        self.target_rate = target_rate
        self.max_achievable = max_achievable
        super().__init__(
            f"target hit rate {target_rate:.4f} is infeasible; "
            f"best achievable on the candidate grid is {max_achievable:.4f}"
        )

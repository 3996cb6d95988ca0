"""Accuracy propagation through the decision hierarchy.

The overall accuracy of a staged classification is the product of the
stage accuracies along the decision path, which yields a branch-dependent
interval rather than a single number. A correction ledger models how
many errors the conflict check and the confidence thresholds would catch
if every re-examination succeeded, and a Monte-Carlo simulator exposes
the stage-independence assumption behind the product formula.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .predictions import SUM_TOLERANCE, StageId
from .taxonomy import FlapProfile


class PropagationError(Exception):
    pass


class LedgerInconsistent(PropagationError):
    pass


class BadMix(PropagationError):
    pass


@dataclass(frozen=True)
class StageAccuracies:
    j_usage: float
    j_tear: float
    j_profile: float
    j_concave: float = 1.0
    j_convex: float = 1.0

    def __post_init__(self):
        for name in ("j_usage", "j_tear", "j_profile", "j_concave", "j_convex"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} outside [0, 1]: {v}")


def path_accuracy(acc: StageAccuracies, profile_branch: FlapProfile) -> float:
    """Product of stage accuracies along one profile branch.

    The rectangular branch has three stages; concave/convex append their
    severity stage.
    """
    product = acc.j_usage * acc.j_tear * acc.j_profile
    if profile_branch is FlapProfile.CONCAVE:
        product *= acc.j_concave
    elif profile_branch is FlapProfile.CONVEX:
        product *= acc.j_convex
    return product


def accuracy_interval(acc: StageAccuracies) -> tuple[float, float]:
    """(min, max) over the three branch accuracies."""
    paths = [path_accuracy(acc, branch) for branch in FlapProfile]
    return (min(paths), max(paths))


@dataclass(frozen=True)
class CorrectionLedger:
    """Accounting of errors the review mechanisms would have caught.

    threshold_caught maps a gated stage to (misclassifications caught,
    correct classifications flagged for recheck). conflicts_overlap_thresholds
    models the ambiguity of whether conflict-caught errors are already
    among the threshold catches (True) or found additionally (False).
    """

    total_runs: int
    total_errors: int
    threshold_caught: dict[StageId, tuple[int, int]] = field(default_factory=dict)
    conflict_caught: int = 0
    conflicts_overlap_thresholds: bool = False

    def __post_init__(self):
        if self.total_runs <= 0:
            raise LedgerInconsistent("total_runs must be positive")
        if not 0 <= self.total_errors <= self.total_runs:
            raise LedgerInconsistent("total_errors outside 0..total_runs")
        if self.conflict_caught < 0:
            raise LedgerInconsistent("conflict_caught must be non-negative")
        caught = 0
        for stage, (errors_caught, correct_flagged) in self.threshold_caught.items():
            if errors_caught < 0 or correct_flagged < 0:
                raise LedgerInconsistent(f"negative counts for {stage.value}")
            caught += errors_caught
        extra = 0 if self.conflicts_overlap_thresholds else self.conflict_caught
        if caught + extra > self.total_errors:
            raise LedgerInconsistent(
                f"caught {caught + extra} errors but only {self.total_errors} occurred"
            )


def corrected_accuracy(ledger: CorrectionLedger) -> tuple[float, float]:
    """(low, high) accuracy assuming every caught error is corrected.

    low counts only the threshold catches (conflicts assumed already
    included); high additionally credits conflict catches when they do
    not overlap the threshold catches.
    """
    threshold_errors = sum(e for e, _ in ledger.threshold_caught.values())
    base = ledger.total_runs - ledger.total_errors + threshold_errors
    low = base / ledger.total_runs
    if ledger.conflicts_overlap_thresholds:
        high = low
    else:
        high = (base + ledger.conflict_caught) / ledger.total_runs
    return (low, high)


def monte_carlo_hierarchy(
    acc: StageAccuracies,
    branch_mix: tuple[float, float, float],
    n_trials: int,
    seed: int,
) -> float:
    """Simulated hierarchy accuracy under stage independence.

    branch_mix gives the (rectangular, concave, convex) truth
    proportions; each stage along a trial's branch succeeds independently
    with its accuracy. Returns the fraction of fully correct trials.
    """
    if n_trials < 1:
        raise BadMix("n_trials must be >= 1")
    if any(m < 0 for m in branch_mix) or abs(sum(branch_mix) - 1.0) > SUM_TOLERANCE:
        raise BadMix(f"branch mix must be non-negative and sum to 1: {branch_mix}")

    rng = np.random.default_rng(seed)
    branches = rng.choice(3, size=n_trials, p=np.asarray(branch_mix) / sum(branch_mix))

    u = rng.random((n_trials, 4))
    success = (
        (u[:, 0] < acc.j_usage)
        & (u[:, 1] < acc.j_tear)
        & (u[:, 2] < acc.j_profile)
    )
    severity_acc = np.ones(n_trials)
    severity_acc[branches == 1] = acc.j_concave
    severity_acc[branches == 2] = acc.j_convex
    success &= u[:, 3] < severity_acc
    return float(np.count_nonzero(success)) / n_trials


def propagation_report(
    acc: StageAccuracies,
    ledger: CorrectionLedger | None = None,
    decimals: int = 3,
) -> dict:
    from .metrics import round_report

    report = {
        "stage_accuracies": {
            "usage": acc.j_usage,
            "tear": acc.j_tear,
            "profile": acc.j_profile,
            "concave": acc.j_concave,
            "convex": acc.j_convex,
        },
        "path_accuracy": {
            branch.value: round_report(path_accuracy(acc, branch), decimals)
            for branch in FlapProfile
        },
        "interval": [round_report(v, decimals) for v in accuracy_interval(acc)],
    }
    if ledger is not None:
        low, high = corrected_accuracy(ledger)
        report["corrected_accuracy"] = [
            round_report(low, decimals),
            round_report(high, decimals),
        ]
    return report

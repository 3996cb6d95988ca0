"""Wear-state type system for abrasive flap wheels.

Encodes the three-level decision tree (usage condition, flap profile +
flap tear, profile severity) together with the table of consistent
outcomes and the conflict families that the level-1/level-2 consistency
check can report.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional


class UsageState(Enum):
    NEW = "new"
    USED = "used"


class FlapProfile(Enum):
    RECTANGULAR = "rectangular"
    CONCAVE = "concave"
    CONVEX = "convex"


class TearState(Enum):
    WITH_TEAR = "with_tear"
    NO_TEAR = "no_tear"


class Severity(Enum):
    FULLY = "fully"
    PARTIALLY = "partially"


class ConflictKind(Enum):
    """Impossible level-1/level-2 combinations.

    A new wheel is assumed to have a rectangular flap shape and no tears,
    so "new" contradicts a tear verdict or a non-rectangular profile.
    Spherical-stock wheels (new with a shaped profile) are unsupported.
    """

    NEW_WITH_TEAR = "new_with_tear"
    NEW_CONCAVE = "new_concave"
    NEW_CONVEX = "new_convex"


# Reporting order when several conflicts apply at once.
_CONFLICT_ORDER = (
    ConflictKind.NEW_WITH_TEAR,
    ConflictKind.NEW_CONCAVE,
    ConflictKind.NEW_CONVEX,
)


class TaxonomyError(Exception):
    """Base class for wear-taxonomy violations."""


class InconsistentParts(TaxonomyError):
    """The usage/profile/tear combination is a known conflict."""

    def __init__(self, conflicts: tuple[ConflictKind, ...]):
        self.conflicts = conflicts
        names = ", ".join(c.value for c in conflicts)
        super().__init__(f"inconsistent combination: {names}")


class MissingSeverity(TaxonomyError):
    """A concave or convex profile requires a severity."""


class SpuriousSeverity(TaxonomyError):
    """A rectangular profile must not carry a severity."""


@dataclass(frozen=True, order=True)
class WearOutcome:
    """One complete, consistent path through the hierarchy.

    ``id`` is a stable API contract (1..11) serialized into reports.
    """

    id: int
    usage: UsageState
    profile: FlapProfile
    tear: TearState
    severity: Optional[Severity] = None

    def parts(self) -> tuple:
        return (self.usage, self.profile, self.tear, self.severity)


CONSISTENT_OUTCOMES: tuple[WearOutcome, ...] = (
    WearOutcome(1, UsageState.NEW, FlapProfile.RECTANGULAR, TearState.NO_TEAR),
    WearOutcome(2, UsageState.USED, FlapProfile.RECTANGULAR, TearState.NO_TEAR),
    WearOutcome(3, UsageState.USED, FlapProfile.RECTANGULAR, TearState.WITH_TEAR),
    WearOutcome(4, UsageState.USED, FlapProfile.CONCAVE, TearState.NO_TEAR, Severity.PARTIALLY),
    WearOutcome(5, UsageState.USED, FlapProfile.CONCAVE, TearState.WITH_TEAR, Severity.PARTIALLY),
    WearOutcome(6, UsageState.USED, FlapProfile.CONCAVE, TearState.NO_TEAR, Severity.FULLY),
    WearOutcome(7, UsageState.USED, FlapProfile.CONCAVE, TearState.WITH_TEAR, Severity.FULLY),
    WearOutcome(8, UsageState.USED, FlapProfile.CONVEX, TearState.NO_TEAR, Severity.PARTIALLY),
    WearOutcome(9, UsageState.USED, FlapProfile.CONVEX, TearState.WITH_TEAR, Severity.PARTIALLY),
    WearOutcome(10, UsageState.USED, FlapProfile.CONVEX, TearState.NO_TEAR, Severity.FULLY),
    WearOutcome(11, UsageState.USED, FlapProfile.CONVEX, TearState.WITH_TEAR, Severity.FULLY),
)

_OUTCOME_BY_PARTS = {o.parts(): o for o in CONSISTENT_OUTCOMES}
_OUTCOME_BY_ID = {o.id: o for o in CONSISTENT_OUTCOMES}


def enumerate_consistent_outcomes() -> tuple[WearOutcome, ...]:
    """All 11 consistent outcomes, in id order."""
    return CONSISTENT_OUTCOMES


def outcome_by_id(outcome_id: int) -> WearOutcome:
    if outcome_id not in _OUTCOME_BY_ID:
        raise KeyError(f"no outcome with id {outcome_id}")
    return _OUTCOME_BY_ID[outcome_id]


def check_consistency(
    usage: UsageState, profile: FlapProfile, tear: TearState
) -> tuple[ConflictKind, ...]:
    """Return all applicable conflict kinds, empty tuple if consistent.

    Multiple conflicts (e.g. new + concave + with tear) are all reported,
    ordered NEW_WITH_TEAR < NEW_CONCAVE < NEW_CONVEX.
    """
    if usage is UsageState.USED:
        return ()
    conflicts = []
    if tear is TearState.WITH_TEAR:
        conflicts.append(ConflictKind.NEW_WITH_TEAR)
    if profile is FlapProfile.CONCAVE:
        conflicts.append(ConflictKind.NEW_CONCAVE)
    elif profile is FlapProfile.CONVEX:
        conflicts.append(ConflictKind.NEW_CONVEX)
    conflicts.sort(key=_CONFLICT_ORDER.index)
    return tuple(conflicts)


def outcome_from_parts(
    usage: UsageState,
    profile: FlapProfile,
    tear: TearState,
    severity: Optional[Severity] = None,
) -> WearOutcome:
    """Look up the unique consistent outcome matching the given fields.

    Raises InconsistentParts for conflicting combinations and
    MissingSeverity / SpuriousSeverity when the severity presence rule
    (present iff profile is concave or convex) is violated.
    """
    conflicts = check_consistency(usage, profile, tear)
    if conflicts:
        raise InconsistentParts(conflicts)
    needs_severity = profile in (FlapProfile.CONCAVE, FlapProfile.CONVEX)
    if needs_severity and severity is None:
        raise MissingSeverity(f"{profile.value} profile requires a severity")
    if not needs_severity and severity is not None:
        raise SpuriousSeverity("rectangular profile must not carry a severity")
    return _OUTCOME_BY_PARTS[(usage, profile, tear, severity)]

import itertools

import pytest

from flapwear.taxonomy import (
    ConflictKind,
    FlapProfile,
    InconsistentParts,
    MissingSeverity,
    Severity,
    SpuriousSeverity,
    TearState,
    UsageState,
    WearOutcome,
    check_consistency,
    enumerate_consistent_outcomes,
    outcome_from_parts,
)


def test_exactly_eleven_outcomes():
    outcomes = enumerate_consistent_outcomes()
    assert len(outcomes) == 11
    assert [o.id for o in outcomes] == list(range(1, 12))


def test_outcome_1_is_new_rectangular_no_tear():
    first = enumerate_consistent_outcomes()[0]
    assert first == WearOutcome(
        1, UsageState.NEW, FlapProfile.RECTANGULAR, TearState.NO_TEAR
    )
    assert first.severity is None


def test_outcome_7_is_used_concave_tear_fully():
    seventh = enumerate_consistent_outcomes()[6]
    assert seventh.id == 7
    assert seventh.usage is UsageState.USED
    assert seventh.profile is FlapProfile.CONCAVE
    assert seventh.tear is TearState.WITH_TEAR
    assert seventh.severity is Severity.FULLY


def test_severity_presence_follows_profile():
    for outcome in enumerate_consistent_outcomes():
        if outcome.profile is FlapProfile.RECTANGULAR:
            assert outcome.severity is None
        else:
            assert outcome.severity is not None


def test_only_new_outcome_is_rectangular_without_tear():
    new_outcomes = [o for o in enumerate_consistent_outcomes() if o.usage is UsageState.NEW]
    assert new_outcomes == [enumerate_consistent_outcomes()[0]]


@pytest.mark.parametrize(
    "usage,profile,tear,expected",
    [
        (UsageState.NEW, FlapProfile.RECTANGULAR, TearState.NO_TEAR, ()),
        (UsageState.NEW, FlapProfile.CONCAVE, TearState.NO_TEAR, (ConflictKind.NEW_CONCAVE,)),
        (UsageState.NEW, FlapProfile.CONVEX, TearState.NO_TEAR, (ConflictKind.NEW_CONVEX,)),
        (UsageState.NEW, FlapProfile.RECTANGULAR, TearState.WITH_TEAR, (ConflictKind.NEW_WITH_TEAR,)),
        (UsageState.USED, FlapProfile.CONVEX, TearState.WITH_TEAR, ()),
    ],
)
def test_check_consistency_cases(usage, profile, tear, expected):
    assert check_consistency(usage, profile, tear) == expected


def test_multi_conflict_reports_all_kinds_in_order():
    conflicts = check_consistency(
        UsageState.NEW, FlapProfile.CONCAVE, TearState.WITH_TEAR
    )
    assert conflicts == (ConflictKind.NEW_WITH_TEAR, ConflictKind.NEW_CONCAVE)
    conflicts = check_consistency(
        UsageState.NEW, FlapProfile.CONVEX, TearState.WITH_TEAR
    )
    assert conflicts == (ConflictKind.NEW_WITH_TEAR, ConflictKind.NEW_CONVEX)


def test_used_never_conflicts():
    for profile, tear in itertools.product(FlapProfile, TearState):
        assert check_consistency(UsageState.USED, profile, tear) == ()


def test_level12_cross_product_closure():
    """Every level-1 x level-2 combination is either one of the
    consistent paths or one of the three conflict families."""
    consistent_paths = {
        (o.usage, o.profile, o.tear) for o in enumerate_consistent_outcomes()
    }
    n_consistent = 0
    for usage, profile, tear in itertools.product(UsageState, FlapProfile, TearState):
        conflicts = check_consistency(usage, profile, tear)
        if conflicts:
            assert (usage, profile, tear) not in consistent_paths
            assert usage is UsageState.NEW
            assert all(isinstance(c, ConflictKind) for c in conflicts)
        else:
            assert (usage, profile, tear) in consistent_paths
            n_consistent += 1
    # 7 level-1/2 paths; severity expands the 4 shaped ones to 8 outcomes.
    assert n_consistent == 7


def test_outcome_from_parts_round_trip():
    for outcome in enumerate_consistent_outcomes():
        rebuilt = outcome_from_parts(
            outcome.usage, outcome.profile, outcome.tear, outcome.severity
        )
        assert rebuilt is outcome


def test_outcome_from_parts_examples():
    assert (
        outcome_from_parts(
            UsageState.USED, FlapProfile.CONCAVE, TearState.NO_TEAR, Severity.PARTIALLY
        ).id
        == 4
    )
    assert (
        outcome_from_parts(UsageState.USED, FlapProfile.RECTANGULAR, TearState.NO_TEAR).id
        == 2
    )


def test_outcome_from_parts_rejects_conflict():
    with pytest.raises(InconsistentParts) as excinfo:
        outcome_from_parts(UsageState.NEW, FlapProfile.RECTANGULAR, TearState.WITH_TEAR)
    assert excinfo.value.conflicts == (ConflictKind.NEW_WITH_TEAR,)


def test_outcome_from_parts_severity_presence_errors():
    with pytest.raises(MissingSeverity):
        outcome_from_parts(UsageState.USED, FlapProfile.CONCAVE, TearState.NO_TEAR)
    with pytest.raises(SpuriousSeverity):
        outcome_from_parts(
            UsageState.USED, FlapProfile.RECTANGULAR, TearState.NO_TEAR, Severity.FULLY
        )


def test_canonical_names():
    assert UsageState.NEW.value == "new"
    assert FlapProfile.CONCAVE.value == "concave"
    assert TearState.WITH_TEAR.value == "with_tear"
    assert Severity.PARTIALLY.value == "partially"

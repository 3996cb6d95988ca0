"""Shared fixtures: published confusion matrices and derived targets."""

import pytest

from flapwear.predictions import StageId

# Test-set confusion matrices of the five staged classifiers
# (rows = true class, cols = predicted class, stage class order).
USAGE_MATRIX = [[458, 2], [19, 1021]]
PROFILE_MATRIX = [[1165, 0, 0], [40, 1212, 107], [15, 1, 1024]]
TEAR_MATRIX = [[419, 61], [11, 662]]
CONCAVE_MATRIX = [[157, 3], [0, 280]]
CONVEX_MATRIX = [[141, 19], [0, 220]]

ALL_MATRICES = {
    StageId.USAGE: USAGE_MATRIX,
    StageId.PROFILE: PROFILE_MATRIX,
    StageId.TEAR: TEAR_MATRIX,
    StageId.CONCAVE_SEVERITY: CONCAVE_MATRIX,
    StageId.CONVEX_SEVERITY: CONVEX_MATRIX,
}

# Published stage accuracies (3-decimal) used by the propagation checks.
STAGE_ACCURACIES = {
    "usage": 0.986,
    "tear": 0.938,
    "profile": 0.954,
    "concave": 0.993,
    "convex": 0.950,
}


@pytest.fixture
def all_matrices():
    return dict(ALL_MATRICES)

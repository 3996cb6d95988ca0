"""Desk-scale validation runs: synthetic wheels and calibrated oracles.

Two ways to exercise the full hierarchy without real images: generate
synthetic wheels and push them through the rule-based classifiers, or
replay stochastic oracles calibrated to published confusion matrices.
Both report measured accuracies next to the analytic path products so
the propagation model can be checked side by side.
"""

from __future__ import annotations

import numpy as np

from .engine import EngineConfig, RunInput, classify_run
from .predictions import StageId
from .propagation import StageAccuracies, path_accuracy
from .synth import (
    InvalidSpec,
    WheelSpec,
    generate_observation,
    observation_vectors,
    sample_oracle_predictions,
)
from .taxonomy import (
    CONSISTENT_OUTCOMES,
    FlapProfile,
    TearState,
    WearOutcome,
    outcome_from_parts,
)

# Stages along each profile branch, in decision order.
BRANCH_STAGES: dict[FlapProfile, tuple[StageId, ...]] = {
    FlapProfile.RECTANGULAR: (StageId.USAGE, StageId.TEAR, StageId.PROFILE),
    FlapProfile.CONCAVE: (
        StageId.USAGE,
        StageId.TEAR,
        StageId.PROFILE,
        StageId.CONCAVE_SEVERITY,
    ),
    FlapProfile.CONVEX: (
        StageId.USAGE,
        StageId.TEAR,
        StageId.PROFILE,
        StageId.CONVEX_SEVERITY,
    ),
}

DEFAULT_CONFIDENCE_LAW = (0.97, 0.89, 0.03)


def expected_outcome(spec: WheelSpec) -> WearOutcome:
    """Ground-truth outcome of a consistent wheel spec."""
    return outcome_from_parts(spec.usage, spec.profile, spec.tear, spec.severity)


def spec_for_outcome(
    outcome: WearOutcome, rng: np.random.Generator, noise_sigma: float = 0.0
) -> WheelSpec:
    """Randomized wheel spec realizing a given outcome.

    Geometry parameters are sampled within ranges where the rule-based
    classifiers resolve the wear state at zero noise.
    """
    n_flaps = int(rng.integers(12, 33))
    torn: frozenset[int] = frozenset()
    if outcome.tear is TearState.WITH_TEAR:
        n_torn = int(rng.integers(1, 4))
        torn = frozenset(int(i) for i in rng.choice(n_flaps, n_torn, replace=False))
    depth = float(rng.uniform(0.08, 0.4))
    return WheelSpec(
        usage=outcome.usage,
        profile=outcome.profile,
        severity=outcome.severity,
        n_flaps=n_flaps,
        torn_flaps=torn,
        profile_depth=depth,
        noise_sigma=noise_sigma,
    )


def classify_spec(
    spec: WheelSpec, seed: int, config: EngineConfig | None = None, tool_id: str = "synthetic"
):
    """Generate an observation for the spec and run the hierarchy on it."""
    obs = generate_observation(spec, seed)
    vectors = observation_vectors(obs)
    run = RunInput(
        tool_id=tool_id,
        usage=vectors[StageId.USAGE],
        profile=vectors[StageId.PROFILE],
        tear=vectors[StageId.TEAR],
        concave_severity=vectors.get(StageId.CONCAVE_SEVERITY),
        convex_severity=vectors.get(StageId.CONVEX_SEVERITY),
    )
    return classify_run(run, config)


def run_synthetic_batch(
    n: int,
    seed: int,
    noise_sigma: float = 0.0,
    config: EngineConfig | None = None,
) -> dict:
    """Round-robin over the 11 outcomes; measures hierarchy accuracy."""
    if n < 1:
        raise InvalidSpec("batch size must be >= 1")
    rng = np.random.default_rng(seed)
    correct = 0
    per_outcome: dict[int, list[int]] = {o.id: [0, 0] for o in CONSISTENT_OUTCOMES}
    for k in range(n):
        outcome = CONSISTENT_OUTCOMES[k % len(CONSISTENT_OUTCOMES)]
        spec = spec_for_outcome(outcome, rng, noise_sigma)
        result = classify_spec(spec, seed=int(rng.integers(0, 2**31)), config=config)
        hit = result.outcome is not None and result.outcome.id == outcome.id
        correct += hit
        per_outcome[outcome.id][0] += hit
        per_outcome[outcome.id][1] += 1
    return {
        "mode": "synth",
        "n": n,
        "noise_sigma": noise_sigma,
        "hierarchy_accuracy": correct / n,
        "per_outcome": {
            str(oid): {"correct": c, "total": t}
            for oid, (c, t) in per_outcome.items()
            if t
        },
    }


def row_probabilities(counts: list[list[int]]) -> np.ndarray:
    """Confusion-row distributions P(pred | truth)."""
    counts_arr = np.asarray(counts, dtype=float)
    totals = counts_arr.sum(axis=1, keepdims=True)
    if np.any(totals == 0):
        raise ValueError("confusion matrix has an empty truth row")
    return counts_arr / totals


def truth_marginals(counts: list[list[int]]) -> np.ndarray:
    """Truth-class distribution from confusion-matrix row totals."""
    counts_arr = np.asarray(counts, dtype=float)
    totals = counts_arr.sum(axis=1)
    return totals / totals.sum()


def matrices_to_accuracies(matrices: dict[StageId, list[list[int]]]) -> StageAccuracies:
    def acc(stage: StageId) -> float:
        counts_arr = np.asarray(matrices[stage], dtype=float)
        return float(np.trace(counts_arr) / counts_arr.sum())

    return StageAccuracies(
        j_usage=acc(StageId.USAGE),
        j_tear=acc(StageId.TEAR),
        j_profile=acc(StageId.PROFILE),
        j_concave=acc(StageId.CONCAVE_SEVERITY),
        j_convex=acc(StageId.CONVEX_SEVERITY),
    )


def oracle_branch_trials(
    matrices: dict[StageId, list[list[int]]],
    branch: FlapProfile,
    n_trials: int,
    seed: int,
    confidence_law: tuple[float, float, float] = DEFAULT_CONFIDENCE_LAW,
) -> dict:
    """Replay one branch through oracles calibrated to confusion matrices.

    Per trial and stage, the truth class is drawn from the matrix's
    truth marginals and the prediction from the truth's confusion row,
    so each stage errs at exactly the matrix's overall error rate. A
    trial is correct when every stage on the branch is.
    """
    rng = np.random.default_rng(seed)
    stage_results: dict[StageId, dict[str, np.ndarray]] = {}
    all_correct = np.ones(n_trials, dtype=bool)
    for stage in BRANCH_STAGES[branch]:
        counts = matrices[stage]
        rows = row_probabilities(counts)
        truths = rng.choice(len(rows), size=n_trials, p=truth_marginals(counts))
        preds, confs = sample_oracle_predictions(stage, truths, rows, confidence_law, rng)
        correct = preds == truths
        all_correct &= correct
        stage_results[stage] = {"correct": correct, "confidence": confs}

    measured = float(np.count_nonzero(all_correct)) / n_trials
    return {
        "branch": branch.value,
        "n_trials": n_trials,
        "measured_accuracy": measured,
        "stage_accuracy": {
            stage.value: float(np.mean(res["correct"]))
            for stage, res in stage_results.items()
        },
        "stage_results": stage_results,
    }


def run_oracle_batch(
    matrices: dict[StageId, list[list[int]]],
    n_trials: int,
    seed: int,
    confidence_law: tuple[float, float, float] = DEFAULT_CONFIDENCE_LAW,
) -> dict:
    """All three branches against their analytic path accuracies."""
    acc = matrices_to_accuracies(matrices)
    branches = {}
    for i, branch in enumerate(FlapProfile):
        trial = oracle_branch_trials(matrices, branch, n_trials, seed + i, confidence_law)
        trial.pop("stage_results")
        trial["analytic_accuracy"] = path_accuracy(acc, branch)
        branches[branch.value] = trial
    return {
        "mode": "oracle",
        "n_trials_per_branch": n_trials,
        "stage_accuracies": {
            "usage": acc.j_usage,
            "tear": acc.j_tear,
            "profile": acc.j_profile,
            "concave": acc.j_concave,
            "convex": acc.j_convex,
        },
        "branches": branches,
    }

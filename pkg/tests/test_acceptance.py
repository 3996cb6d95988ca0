"""Acceptance suite: one test per release criterion.

Each test prints a PASS line once its assertions hold (visible with
pytest -s or in the captured output of a verbose run).
"""

import json
import random

import numpy as np
import pytest

from flapwear.engine import EngineConfig
from flapwear.metrics import (
    ConfusionMatrix,
    accuracy,
    class_metrics,
    macro_f1,
    pairwise_auc,
    roc_curve,
)
from flapwear.predictions import StageId
from flapwear.propagation import (
    CorrectionLedger,
    StageAccuracies,
    accuracy_interval,
    corrected_accuracy,
    path_accuracy,
)
from flapwear.simulate import (
    classify_spec,
    matrices_to_accuracies,
    oracle_branch_trials,
    row_probabilities,
    sample_oracle_predictions,
    spec_for_outcome,
    truth_marginals,
)
from flapwear.taxonomy import (
    FlapProfile,
    TearState,
    UsageState,
    check_consistency,
    enumerate_consistent_outcomes,
)
from flapwear import cli

from conftest import (
    ALL_MATRICES,
    CONCAVE_MATRIX,
    CONVEX_MATRIX,
    PROFILE_MATRIX,
    TEAR_MATRIX,
    USAGE_MATRIX,
)

TOL = 1e-3


def report(criterion, text):
    print(f"ACCEPTANCE {criterion}: {text} ... PASS")


def test_criterion_1_usage_metric_replay():
    cm = ConfusionMatrix(StageId.USAGE, USAGE_MATRIX)
    assert accuracy(cm) == pytest.approx(0.986, abs=TOL)
    assert macro_f1(cm) == pytest.approx(0.983, abs=TOL)
    expected = {
        0: (0.960, 0.996, 0.978),  # new
        1: (0.998, 0.982, 0.990),  # used
    }
    for cls, (p, r, f1) in expected.items():
        m = class_metrics(cm, cls)
        assert m.precision == pytest.approx(p, abs=TOL)
        assert m.recall == pytest.approx(r, abs=TOL)
        assert m.f1 == pytest.approx(f1, abs=TOL)
    report(1, "usage metric replay (accuracy 0.986, macro-F1 0.983)")


def test_criterion_2_profile_metric_replay():
    cm = ConfusionMatrix(StageId.PROFILE, PROFILE_MATRIX)
    assert accuracy(cm) == pytest.approx(0.954, abs=TOL)
    expected = {
        0: (0.955, 1.000, 0.977),  # rectangular
        1: (0.999, 0.892, 0.943),  # concave
        2: (0.905, 0.985, 0.943),  # convex
    }
    for cls, (p, r, f1) in expected.items():
        m = class_metrics(cm, cls)
        assert m.precision == pytest.approx(p, abs=TOL)
        assert m.recall == pytest.approx(r, abs=TOL)
        assert m.f1 == pytest.approx(f1, abs=TOL)
    report(2, "profile metric replay (accuracy 0.954, per-class values)")


def test_criterion_3_severity_and_tear_metric_replay():
    cases = [
        (StageId.CONCAVE_SEVERITY, CONCAVE_MATRIX, 0.993, 0.993),
        (StageId.CONVEX_SEVERITY, CONVEX_MATRIX, 0.950, 0.948),
        (StageId.TEAR, TEAR_MATRIX, 0.938, 0.935),
    ]
    for stage, counts, acc, mf1 in cases:
        cm = ConfusionMatrix(stage, counts)
        assert accuracy(cm) == pytest.approx(acc, abs=TOL)
        assert macro_f1(cm) == pytest.approx(mf1, abs=TOL)
    report(3, "severity and tear metric replay (0.993/0.993, 0.950/0.948, 0.938/0.935)")


def test_criterion_4_propagation():
    acc = StageAccuracies(
        j_usage=0.986, j_tear=0.938, j_profile=0.954, j_concave=0.993, j_convex=0.950
    )
    assert path_accuracy(acc, FlapProfile.RECTANGULAR) == pytest.approx(0.882, abs=TOL)
    assert path_accuracy(acc, FlapProfile.CONCAVE) == pytest.approx(0.876, abs=TOL)
    assert path_accuracy(acc, FlapProfile.CONVEX) == pytest.approx(0.838, abs=TOL)
    low, high = accuracy_interval(acc)
    assert low == pytest.approx(0.838, abs=TOL)
    assert high == pytest.approx(0.882, abs=TOL)

    ledger = CorrectionLedger(
        total_runs=360,
        total_errors=45,
        threshold_caught={StageId.USAGE: (11, 10), StageId.TEAR: (11, 9)},
        conflict_caught=4,
    )
    corrected_low, corrected_high = corrected_accuracy(ledger)
    assert corrected_low == pytest.approx(0.936, abs=TOL)
    assert corrected_high == pytest.approx(0.947, abs=TOL)
    report(4, "propagation (0.882/0.876/0.838, interval, bounds 0.936/0.947)")


def test_criterion_5_consistency_closure():
    outcomes = enumerate_consistent_outcomes()
    assert len(outcomes) == 11
    assert [o.id for o in outcomes] == list(range(1, 12))
    consistent_paths = {(o.usage, o.profile, o.tear) for o in outcomes}

    conflict_families = set()
    for usage in UsageState:
        for profile in FlapProfile:
            for tear in TearState:
                conflicts = check_consistency(usage, profile, tear)
                if conflicts:
                    assert usage is UsageState.NEW
                    assert (usage, profile, tear) not in consistent_paths
                    conflict_families.update(c.value for c in conflicts)
                else:
                    assert (usage, profile, tear) in consistent_paths
    assert conflict_families == {"new_with_tear", "new_concave", "new_convex"}
    report(5, "consistency closure (11 outcomes, exactly 3 conflict families)")


def test_criterion_6_zero_noise_closed_loop():
    rng = np.random.default_rng(2026)
    outcomes = enumerate_consistent_outcomes()
    config = EngineConfig(thresholds={})
    n_specs = 550
    for k in range(n_specs):
        outcome = outcomes[k % len(outcomes)]
        spec = spec_for_outcome(outcome, rng, noise_sigma=0.0)
        result = classify_spec(spec, seed=int(rng.integers(0, 2**31)), config=config)
        assert result.outcome is not None, f"spec {spec} gave {result.verdict}"
        assert result.outcome.id == outcome.id, f"spec {spec} classified as {result.outcome.id}"
    report(6, f"zero-noise closed loop ({n_specs}/{n_specs} specs recovered)")


def test_criterion_7_oracle_monte_carlo_consistency():
    acc = matrices_to_accuracies(ALL_MATRICES)
    for i, branch in enumerate(FlapProfile):
        trial = oracle_branch_trials(ALL_MATRICES, branch, n_trials=10**5, seed=100 + i)
        analytic = path_accuracy(acc, branch)
        assert trial["measured_accuracy"] == pytest.approx(analytic, abs=0.01), branch
    report(7, "oracle/Monte-Carlo consistency (each branch within 0.01 of its path product)")


def test_criterion_8_roc_correctness():
    rng = random.Random(88)
    for _ in range(100):
        n = rng.randint(2, 200)
        samples = [
            (rng.choice([rng.random(), round(rng.random(), 1)]), rng.random() < 0.5)
            for _ in range(n)
        ]
        if not any(p for _, p in samples):
            samples[0] = (samples[0][0], True)
        if all(p for _, p in samples):
            samples[0] = (samples[0][0], False)
        trapezoid = roc_curve(samples).auc
        brute = pairwise_auc(samples)
        assert abs(trapezoid - brute) <= 1e-12

    assert roc_curve([(0.9, True), (0.8, True), (0.3, False), (0.1, False)]).auc == 1.0
    assert roc_curve([(0.4, True), (0.4, False), (0.4, True)]).auc == pytest.approx(0.5)
    report(8, "ROC correctness (100 random sets, perfect separation, constant scores)")


def test_criterion_9_threshold_gating_direction():
    rng = np.random.default_rng(99)
    n = 20000
    rows = row_probabilities(USAGE_MATRIX)
    truths = rng.choice(2, size=n, p=truth_marginals(USAGE_MATRIX))
    preds, confs = sample_oracle_predictions(
        StageId.USAGE, truths, rows, (0.97, 0.89, 0.03), rng
    )
    flagged = confs < 0.91
    erroneous = preds != truths
    frac_err_flagged = np.mean(flagged[erroneous])
    frac_ok_flagged = np.mean(flagged[~erroneous])
    assert frac_err_flagged > frac_ok_flagged
    report(
        9,
        f"threshold gating flags errors preferentially "
        f"({frac_err_flagged:.2f} vs {frac_ok_flagged:.2f})",
    )


def test_criterion_10_cli_determinism(tmp_path):
    preds = tmp_path / "preds.jsonl"
    lines = []
    for run in range(2):
        for stage, view, probs in [
            ("usage", "radial", [0.02, 0.98]),
            ("profile", "radial", [0.05, 0.15, 0.80]),
            ("tear", "axial", [0.85, 0.15]),
            ("convex_severity", "radial", [0.9, 0.1]),
        ]:
            lines.append(
                json.dumps(
                    {
                        "image_id": f"img-{run}-{view}",
                        "tool_id": "tool-a",
                        "view": view,
                        "stage": stage,
                        "probs": probs,
                        "truth": None,
                    }
                )
            )
    preds.write_text("\n".join(lines) + "\n")

    labeled = tmp_path / "labeled.jsonl"
    labeled_lines = []
    for i, (probs, truth) in enumerate(
        [([0.9, 0.1], "new"), ([0.2, 0.8], "used"), ([0.7, 0.3], "used")]
    ):
        labeled_lines.append(
            json.dumps(
                {
                    "image_id": f"l-{i}",
                    "tool_id": "tool-b",
                    "view": "radial",
                    "stage": "usage",
                    "probs": probs,
                    "truth": truth,
                }
            )
        )
    labeled.write_text("\n".join(labeled_lines) + "\n")

    sim = tmp_path / "sim.json"
    sim.write_text(json.dumps({"mode": "synth", "n": 44}))
    prop = tmp_path / "prop.json"
    prop.write_text(
        json.dumps(
            {
                "accuracies": {
                    "usage": 0.986, "tear": 0.938, "profile": 0.954,
                    "concave": 0.993, "convex": 0.950,
                },
                "ledger": {
                    "total_runs": 360, "total_errors": 45,
                    "threshold_caught": {"usage": [11, 10], "tear": [11, 9]},
                    "conflict_caught": 4,
                },
            }
        )
    )

    commands = [
        ["classify", str(preds)],
        ["evaluate", str(labeled)],
        ["simulate", str(sim), "--seed", "7"],
        ["propagate", str(prop)],
    ]
    for i, argv in enumerate(commands):
        dir_a, dir_b = tmp_path / f"run-a{i}", tmp_path / f"run-b{i}"
        assert cli.main(argv + ["--out", str(dir_a)]) == 0
        assert cli.main(argv + ["--out", str(dir_b)]) == 0
        files_a = {p.name: p.read_bytes() for p in sorted(dir_a.iterdir())}
        files_b = {p.name: p.read_bytes() for p in sorted(dir_b.iterdir())}
        assert files_a and files_a == files_b
    report(10, "CLI determinism (all four commands byte-identical on rerun)")

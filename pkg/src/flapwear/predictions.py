"""Ingestion and validation of per-image probability vectors.

Upstream models emit one probability vector per image and stage. This
module validates those vectors, applies the argmax decision rule,
parses/serializes the line-delimited prediction file format and splits
datasets by tool so that no tool leaks across train/val/test.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

from .taxonomy import FlapProfile, Severity, TearState, UsageState

SUM_TOLERANCE = 1e-6


class View(Enum):
    RADIAL = "radial"
    AXIAL = "axial"


class StageId(Enum):
    USAGE = "usage"
    PROFILE = "profile"
    TEAR = "tear"
    CONCAVE_SEVERITY = "concave_severity"
    CONVEX_SEVERITY = "convex_severity"


# Class order per stage is a wire contract: vectors and confusion
# matrices index classes in exactly this order.
STAGE_CLASSES: dict[StageId, tuple[str, ...]] = {
    StageId.USAGE: (UsageState.NEW.value, UsageState.USED.value),
    StageId.PROFILE: (
        FlapProfile.RECTANGULAR.value,
        FlapProfile.CONCAVE.value,
        FlapProfile.CONVEX.value,
    ),
    StageId.TEAR: (TearState.WITH_TEAR.value, TearState.NO_TEAR.value),
    StageId.CONCAVE_SEVERITY: (Severity.FULLY.value, Severity.PARTIALLY.value),
    StageId.CONVEX_SEVERITY: (Severity.FULLY.value, Severity.PARTIALLY.value),
}

# Tears are judged on the axial view, everything else on the radial one.
STAGE_VIEW: dict[StageId, View] = {
    StageId.USAGE: View.RADIAL,
    StageId.PROFILE: View.RADIAL,
    StageId.TEAR: View.AXIAL,
    StageId.CONCAVE_SEVERITY: View.RADIAL,
    StageId.CONVEX_SEVERITY: View.RADIAL,
}


def stage_class_count(stage: StageId) -> int:
    return len(STAGE_CLASSES[stage])


class VectorError(ValueError):
    """A probability vector violates its invariants."""


class BadLength(VectorError):
    pass


class OutOfRange(VectorError):
    pass


class NotNormalized(VectorError):
    pass


class ViewMismatch(ValueError):
    """Prediction view does not match the stage's required view."""


class ParseError(ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class ValidationError(ValueError):
    def __init__(self, line: int, cause: Exception):
        self.line = line
        self.cause = cause
        super().__init__(f"line {line}: {cause}")


class EmptyInput(ValueError):
    pass


@dataclass(frozen=True)
class ProbabilityVector:
    stage: StageId
    probs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))


def validate_vector(v: ProbabilityVector) -> None:
    """Raise if the vector violates its invariants.

    Normalization is never applied silently; a vector whose entries do
    not sum to 1 within SUM_TOLERANCE is rejected with the deviation.
    """
    expected = stage_class_count(v.stage)
    if len(v.probs) != expected:
        raise BadLength(
            f"stage {v.stage.value} expects {expected} classes, got {len(v.probs)}"
        )
    for p in v.probs:
        if not math.isfinite(p) or p < 0.0 or p > 1.0:
            raise OutOfRange(f"probability {p} outside [0, 1]")
    total = sum(v.probs)
    if abs(total - 1.0) > SUM_TOLERANCE:
        raise NotNormalized(f"probabilities sum to {total} (deviation {total - 1.0:+g})")


def argmax_class(v: ProbabilityVector) -> int:
    """Index of the maximal probability; ties go to the lowest index."""
    validate_vector(v)
    return max(range(len(v.probs)), key=lambda i: (v.probs[i], -i))


def confidence(v: ProbabilityVector) -> float:
    """Maximum class probability of the vector."""
    validate_vector(v)
    return max(v.probs)


@dataclass(frozen=True)
class Prediction:
    image_id: str
    tool_id: str
    view: View
    vector: ProbabilityVector

    def __post_init__(self):
        required = STAGE_VIEW[self.vector.stage]
        if self.view is not required:
            raise ViewMismatch(
                f"stage {self.vector.stage.value} requires the "
                f"{required.value} view, got {self.view.value}"
            )


@dataclass(frozen=True)
class LabeledSample:
    prediction: Prediction
    truth: int

    def __post_init__(self):
        n = stage_class_count(self.prediction.vector.stage)
        if not 0 <= self.truth < n:
            raise OutOfRange(f"truth index {self.truth} outside stage range 0..{n - 1}")


@dataclass(frozen=True)
class DatasetSplit:
    train_tools: frozenset[str]
    val_tools: frozenset[str]
    test_tools: frozenset[str]


def _record_to_sample(rec: dict, line_no: int) -> LabeledSample | Prediction:
    try:
        stage = StageId(rec["stage"])
        view = View(rec["view"])
        probs = rec["probs"]
        if not isinstance(probs, list) or not all(
            isinstance(p, (int, float)) and not isinstance(p, bool) for p in probs
        ):
            raise ParseError(line_no, "probs must be an array of numbers")
        vector = ProbabilityVector(stage, tuple(probs))
        prediction = Prediction(str(rec["image_id"]), str(rec["tool_id"]), view, vector)
    except ParseError:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise ParseError(line_no, str(exc)) from exc

    try:
        validate_vector(vector)
        if "truth" in rec and rec["truth"] is not None:
            truth = STAGE_CLASSES[stage].index(rec["truth"])
            return LabeledSample(prediction, truth)
    except (VectorError, ViewMismatch) as exc:
        raise ValidationError(line_no, exc) from exc
    except ValueError as exc:
        raise ParseError(line_no, f"unknown truth class {rec['truth']!r}") from exc
    return prediction


def parse_prediction_file(path: str | Path) -> list[LabeledSample | Prediction]:
    """Parse a line-delimited prediction file.

    Each line is a JSON record with fields image_id, tool_id, view,
    stage, probs and optionally truth (canonical class name). Records
    with a truth field come back as LabeledSample, others as Prediction.
    Blank lines are skipped; errors carry the 1-based line number.
    """
    samples: list[LabeledSample | Prediction] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(line_no, f"invalid JSON: {exc.msg}") from exc
            if not isinstance(rec, dict):
                raise ParseError(line_no, "record must be a JSON object")
            samples.append(_record_to_sample(rec, line_no))
    return samples


def serialize_record(item: LabeledSample | Prediction) -> str:
    """One prediction file line for a sample (inverse of parsing)."""
    if isinstance(item, LabeledSample):
        pred = item.prediction
        truth = STAGE_CLASSES[pred.vector.stage][item.truth]
    else:
        pred, truth = item, None
    rec = {
        "image_id": pred.image_id,
        "tool_id": pred.tool_id,
        "view": pred.view.value,
        "stage": pred.vector.stage.value,
        "probs": list(pred.vector.probs),
    }
    if truth is not None:
        rec["truth"] = truth
    return json.dumps(rec, sort_keys=True)


def write_prediction_file(path: str | Path, items: Iterable[LabeledSample | Prediction]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item in items:
            fh.write(serialize_record(item) + "\n")


def write_manifest(path: str | Path) -> None:
    """Sidecar manifest declaring the class order of every stage."""
    manifest = {
        "stages": {s.value: list(STAGE_CLASSES[s]) for s in StageId},
        "views": {s.value: STAGE_VIEW[s].value for s in StageId},
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", "utf-8")


def split_by_tool(
    samples: list[LabeledSample | Prediction],
    fractions: tuple[float, float, float],
    seed: int,
) -> DatasetSplit:
    """Assign every tool to exactly one of train/val/test.

    The split is by tool, never by image, so no tool can leak between
    subsets. Subset sizes follow the fractions by largest remainder;
    assignment is deterministic for a given seed.
    """
    if not samples:
        raise EmptyInput("no samples to split")
    if abs(sum(fractions) - 1.0) > SUM_TOLERANCE:
        raise ValueError(f"fractions must sum to 1, got {sum(fractions)}")

    tools = sorted(
        {(s.prediction if isinstance(s, LabeledSample) else s).tool_id for s in samples}
    )
    random.Random(seed).shuffle(tools)

    n = len(tools)
    raw = [f * n for f in fractions]
    counts = [int(math.floor(r)) for r in raw]
    remainders = sorted(range(3), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in remainders[: n - sum(counts)]:
        counts[i] += 1

    train = frozenset(tools[: counts[0]])
    val = frozenset(tools[counts[0] : counts[0] + counts[1]])
    test = frozenset(tools[counts[0] + counts[1] :])
    return DatasetSplit(train, val, test)

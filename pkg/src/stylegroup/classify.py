"""Per-dimension fuzzy classification of learners and questionnaire validation.

For each style dimension the pipeline is fuzzify -> infer -> defuzzify ->
label. Classification is deterministic and per-learner independent:
cohort order never changes an individual profile.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

from .dsl import DIMENSIONS, RuleBase
from .fuzzy import (
    DEFAULT_GRID_POINTS,
    MissingInputError,
    NoRuleFiredError as _EmptyEnvelopeError,
    defuzzify_centroid,
    infer,
)
from .ingest import BehaviorRecord, QuestionnaireRecord
from .stats import pearson_r


class ClassificationError(Exception):
    """Base class for per-learner classification failures."""


class MissingFeatureError(ClassificationError):
    def __init__(self, learner_id: str, variable: str):
        super().__init__(f"learner {learner_id!r} has no value for {variable!r}")
        self.learner_id = learner_id
        self.variable = variable


class NoRuleFiredError(ClassificationError):
    def __init__(self, learner_id: str, dimension: str):
        super().__init__(
            f"no rule fired for learner {learner_id!r} in dimension {dimension!r}"
        )
        self.learner_id = learner_id
        self.dimension = dimension


class InsufficientPairsError(ClassificationError):
    def __init__(self, dimension: str, count: int):
        super().__init__(
            f"dimension {dimension!r} has {count} paired learners, need at least 3"
        )
        self.dimension = dimension


@dataclass(frozen=True)
class DimensionResult:
    dimension: str
    crisp_score: float
    label: str
    term_memberships: dict[str, float]
    fired_rules: tuple[tuple[str, float], ...]


@dataclass(frozen=True)
class StyleProfile:
    """One learner's result per dimension, in fixed dimension order."""

    learner_id: str
    results: tuple[DimensionResult, ...]

    def result(self, dimension: str) -> DimensionResult:
        for result in self.results:
            if result.dimension == dimension:
                return result
        raise KeyError(f"profile of {self.learner_id!r} has no dimension {dimension!r}")

    @property
    def signature(self) -> tuple[str, ...]:
        return tuple(result.label for result in self.results)


@dataclass(frozen=True)
class ClassificationFailure:
    learner_id: str
    dimension: str | None
    reason: str


@lru_cache(maxsize=8)
def _compiled(rb: RuleBase):
    return tuple(
        (dimension, *rb.compile_dimension(dimension)) for dimension in rb.dimensions()
    )


def classify_learner(
    record: BehaviorRecord, rb: RuleBase, grid_points: int = DEFAULT_GRID_POINTS
) -> StyleProfile:
    """Classify one learner across every dimension the rule base covers."""
    results = []
    for dimension, rules, out_var in _compiled(rb):
        try:
            output = infer(rules, record.features)
        except MissingInputError as exc:
            raise MissingFeatureError(record.learner_id, exc.variable) from None
        try:
            crisp = defuzzify_centroid(output, grid_points=grid_points)
        except _EmptyEnvelopeError:
            raise NoRuleFiredError(record.learner_id, dimension) from None
        results.append(
            DimensionResult(
                dimension=dimension,
                crisp_score=crisp,
                label=out_var.classify(crisp),
                term_memberships=out_var.fuzzify(crisp),
                fired_rules=tuple((rule_id, strength) for rule_id, strength, _ in output.fired),
            )
        )
    return StyleProfile(learner_id=record.learner_id, results=tuple(results))


def classify_cohort(
    records: Iterable[BehaviorRecord],
    rb: RuleBase,
    grid_points: int = DEFAULT_GRID_POINTS,
) -> tuple[list[StyleProfile], list[ClassificationFailure]]:
    """Classify every learner independently; failures are collected, not fatal."""
    profiles = []
    failures = []
    for record in records:
        try:
            profiles.append(classify_learner(record, rb, grid_points=grid_points))
        except MissingFeatureError as exc:
            failures.append(
                ClassificationFailure(record.learner_id, None, str(exc))
            )
        except NoRuleFiredError as exc:
            failures.append(
                ClassificationFailure(record.learner_id, exc.dimension, str(exc))
            )
    return profiles, failures


# --------------------------------------------------------------------------
# Validation against questionnaire ground truth


@dataclass(frozen=True)
class PairedRow:
    learner_id: str
    dimension: str
    crisp_score: float
    questionnaire_score: float


@dataclass(frozen=True)
class ValidationReport:
    """Correlation between crisp scores and questionnaire scores.

    ``overall_r`` pools every paired (dimension, learner) row and is the
    canonical overall figure; the mean of the per-dimension coefficients
    is reported alongside. The saved rows make every coefficient
    reproducible from the report alone.
    """

    per_dimension_r: dict[str, float]
    overall_r: float
    mean_dimension_r: float
    rows: tuple[PairedRow, ...]
    unmatched_profile_entries: int
    unmatched_questionnaire_entries: int

    def to_json_dict(self) -> dict:
        return {
            "per_dimension_r": dict(self.per_dimension_r),
            "overall_r": self.overall_r,
            "mean_dimension_r": self.mean_dimension_r,
            "unmatched_profile_entries": self.unmatched_profile_entries,
            "unmatched_questionnaire_entries": self.unmatched_questionnaire_entries,
            "rows": [
                {
                    "learner_id": row.learner_id,
                    "dimension": row.dimension,
                    "crisp_score": row.crisp_score,
                    "questionnaire_score": row.questionnaire_score,
                }
                for row in self.rows
            ],
        }


def validate_against_questionnaire(
    profiles: Sequence[StyleProfile],
    questionnaire: Sequence[QuestionnaireRecord],
) -> ValidationReport:
    """Pearson correlation per dimension plus the pooled overall coefficient.

    Learners appearing in only one source are dropped (inner join) and
    counted. Every dimension the profiles cover needs at least 3 pairs.
    """
    scores = {
        (record.learner_id, record.dimension): record.score for record in questionnaire
    }
    dimensions = [
        d for d in DIMENSIONS if any(r.dimension == d for p in profiles for r in p.results)
    ]

    rows = []
    matched_keys = set()
    for dimension in dimensions:
        for profile in profiles:
            key = (profile.learner_id, dimension)
            if key in scores:
                matched_keys.add(key)
                rows.append(
                    PairedRow(
                        learner_id=profile.learner_id,
                        dimension=dimension,
                        crisp_score=profile.result(dimension).crisp_score,
                        questionnaire_score=scores[key],
                    )
                )

    per_dimension = {}
    for dimension in dimensions:
        dim_rows = [row for row in rows if row.dimension == dimension]
        if len(dim_rows) < 3:
            raise InsufficientPairsError(dimension, len(dim_rows))
        per_dimension[dimension] = pearson_r(
            [row.crisp_score for row in dim_rows],
            [row.questionnaire_score for row in dim_rows],
        )

    overall = pearson_r(
        [row.crisp_score for row in rows],
        [row.questionnaire_score for row in rows],
    )
    total_profile_entries = sum(len(p.results) for p in profiles)
    return ValidationReport(
        per_dimension_r=per_dimension,
        overall_r=overall,
        mean_dimension_r=sum(per_dimension.values()) / len(per_dimension),
        rows=tuple(rows),
        unmatched_profile_entries=total_profile_entries - len(rows),
        unmatched_questionnaire_entries=len(scores) - len(matched_keys),
    )


# --------------------------------------------------------------------------
# Export


def profiles_to_csv(profiles: Sequence[StyleProfile]) -> str:
    """Flat export: one row per (learner, dimension)."""
    lines = ["learner_id,dimension,crisp_score,label"]
    for profile in profiles:
        for result in profile.results:
            lines.append(
                f"{profile.learner_id},{result.dimension},"
                f"{result.crisp_score!r},{result.label}"
            )
    return "\n".join(lines) + "\n"


def profiles_from_csv(text: str) -> list[StyleProfile]:
    """Rebuild profiles from the flat export (fired-rule detail is not kept there)."""
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or lines[0] != "learner_id,dimension,crisp_score,label":
        raise ValueError("not a profile export: bad header")
    grouped: dict[str, list[DimensionResult]] = {}
    order: list[str] = []
    for line in lines[1:]:
        learner_id, dimension, crisp, label = line.split(",")
        if learner_id not in grouped:
            grouped[learner_id] = []
            order.append(learner_id)
        grouped[learner_id].append(
            DimensionResult(
                dimension=dimension,
                crisp_score=float(crisp),
                label=label,
                term_memberships={},
                fired_rules=(),
            )
        )
    return [StyleProfile(learner_id=lid, results=tuple(grouped[lid])) for lid in order]


def profiles_to_json(profiles: Sequence[StyleProfile]) -> str:
    """Detailed export including fired rules and term memberships."""
    payload = [
        {
            "learner_id": profile.learner_id,
            "results": [
                {
                    "dimension": result.dimension,
                    "crisp_score": result.crisp_score,
                    "label": result.label,
                    "term_memberships": result.term_memberships,
                    "fired_rules": [
                        {"rule_id": rule_id, "strength": strength}
                        for rule_id, strength in result.fired_rules
                    ],
                }
                for result in profile.results
            ],
        }
        for profile in profiles
    ]
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"

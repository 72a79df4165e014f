"""Trapezoidal fuzzy sets, Mamdani product inference, centroid defuzzification.

A linguistic variable is a named variable over a closed universe whose values
("low", "medium", "much", ...) are trapezoidal fuzzy sets. Inference follows
the Mamdani product scheme: a rule's firing strength is the product of its
antecedent membership degrees, implication scales the consequent term by the
strength, and the per-rule outputs aggregate into one envelope by pointwise
max. The envelope collapses to a crisp score through its centre of gravity.

All types are immutable; every operation is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

DEFAULT_GRID_POINTS = 1001

# Integrated envelope area below this is treated as "no rule fired".
ZERO_AREA_TOL = 1e-12


class FuzzyError(Exception):
    """Base class for inference failures."""


class OutOfUniverseError(FuzzyError):
    """A crisp value lies outside the variable's universe of discourse."""


class EmptyAntecedentError(FuzzyError):
    """A firing strength was requested for an empty antecedent."""


class MissingInputError(FuzzyError):
    """A rule references an input variable with no supplied value."""

    def __init__(self, variable: str):
        super().__init__(f"no value supplied for input variable {variable!r}")
        self.variable = variable


class NoRuleFiredError(FuzzyError):
    """The aggregated output envelope is identically zero."""


@dataclass(frozen=True)
class Trapezoid:
    """Trapezoidal fuzzy number (a, b, c, d).

    Membership is 0 outside [a, d], 1 on the plateau [b, c], and linear on
    the ramps [a, b] and [c, d]. A degenerate ramp (a == b or c == d)
    behaves as a step.
    """

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        if not (self.a <= self.b <= self.c <= self.d):
            raise ValueError(
                f"trapezoid corners must satisfy a <= b <= c <= d, "
                f"got ({self.a}, {self.b}, {self.c}, {self.d})"
            )

    def membership(self, x: float) -> float:
        """Degree of membership of x, exact at the corner points."""
        if x < self.a or x > self.d:
            return 0.0
        if self.b <= x <= self.c:
            return 1.0
        if x < self.b:
            return (x - self.a) / (self.b - self.a)
        return (self.d - x) / (self.d - self.c)

    def membership_grid(self, xs: np.ndarray) -> np.ndarray:
        """Vectorised membership over an array of points."""
        xs = np.asarray(xs, dtype=float)
        out = np.zeros(xs.shape)
        out[(xs >= self.a) & (xs <= self.d)] = 1.0
        if self.b > self.a:
            rise = (xs >= self.a) & (xs < self.b)
            out[rise] = (xs[rise] - self.a) / (self.b - self.a)
        if self.d > self.c:
            fall = (xs > self.c) & (xs <= self.d)
            out[fall] = (self.d - xs[fall]) / (self.d - self.c)
        return out

    @property
    def plateau_midpoint(self) -> float:
        return (self.b + self.c) / 2.0

    @property
    def support(self) -> tuple[float, float]:
        return (self.a, self.d)

    def corners(self) -> tuple[float, float, float, float]:
        return (self.a, self.b, self.c, self.d)


@dataclass(frozen=True)
class LinguisticVariable:
    """A named variable with a closed universe and ordered, labelled terms."""

    name: str
    universe: tuple[float, float]
    terms: tuple[tuple[str, Trapezoid], ...]

    def __post_init__(self):
        object.__setattr__(self, "universe", tuple(self.universe))
        object.__setattr__(self, "terms", tuple(tuple(t) for t in self.terms))
        lo, hi = self.universe
        if not lo < hi:
            raise ValueError(f"variable {self.name!r}: universe bounds must satisfy lo < hi")
        if not self.terms:
            raise ValueError(f"variable {self.name!r} declares no terms")
        seen = set()
        for label, trap in self.terms:
            if label in seen:
                raise ValueError(f"variable {self.name!r}: duplicate term {label!r}")
            seen.add(label)
            if trap.a < lo or trap.d > hi:
                raise ValueError(
                    f"variable {self.name!r}: term {label!r} extends outside "
                    f"the universe [{lo}, {hi}]"
                )

    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.terms)

    def term(self, label: str) -> Trapezoid:
        for term_label, trap in self.terms:
            if term_label == label:
                return trap
        raise KeyError(f"variable {self.name!r} has no term {label!r}")

    def _require_in_universe(self, x: float) -> None:
        lo, hi = self.universe
        if not lo <= x <= hi:
            raise OutOfUniverseError(
                f"{x} is outside the universe [{lo}, {hi}] of variable {self.name!r}"
            )

    def fuzzify(self, x: float) -> dict[str, float]:
        """Membership degree of x in every term; degrees need not sum to 1."""
        self._require_in_universe(x)
        return {label: trap.membership(x) for label, trap in self.terms}

    def classify(self, score: float) -> str:
        """Label of the term with maximal membership at the score.

        Ties break in favour of the earliest-declared term.
        """
        self._require_in_universe(score)
        best_label = self.terms[0][0]
        best = -1.0
        for label, trap in self.terms:
            degree = trap.membership(score)
            if degree > best:
                best = degree
                best_label = label
        return best_label


def rule_strength(degrees: Sequence[float]) -> float:
    """Mamdani product: firing strength is the product of all antecedent degrees."""
    if len(degrees) == 0:
        raise EmptyAntecedentError("rule has no antecedent clauses")
    strength = 1.0
    for degree in degrees:
        strength *= degree
    return strength


@dataclass(frozen=True)
class InferenceRule:
    """One IF/THEN rule bound to concrete variables and term labels."""

    rule_id: str
    antecedent: tuple[tuple[LinguisticVariable, str], ...]
    consequent_variable: LinguisticVariable
    consequent_term: str


@dataclass(frozen=True)
class FuzzyOutput:
    """Aggregated inference result over one output variable.

    The envelope is the pointwise max of the strength-scaled consequent
    terms of every rule that fired; `fired` keeps (rule id, strength,
    consequent trapezoid) for strengths > 0.
    """

    variable: LinguisticVariable
    fired: tuple[tuple[str, float, Trapezoid], ...]

    def envelope(self, x: float) -> float:
        value = 0.0
        for _, strength, trap in self.fired:
            value = max(value, strength * trap.membership(x))
        return value

    def envelope_grid(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        env = np.zeros(xs.shape)
        for _, strength, trap in self.fired:
            np.maximum(env, strength * trap.membership_grid(xs), out=env)
        return env

    @property
    def is_empty(self) -> bool:
        return not self.fired


def infer(rules: Sequence[InferenceRule], inputs: Mapping[str, float]) -> FuzzyOutput:
    """Run Mamdani product inference for one dimension's rules.

    An identically-zero envelope (no rule fired) is a valid result here;
    defuzzification reports it.
    """
    if not rules:
        raise ValueError("cannot infer from an empty rule list")
    out_var = rules[0].consequent_variable
    for rule in rules:
        if rule.consequent_variable.name != out_var.name:
            raise ValueError("all rules passed to infer must share one output variable")
    fired = []
    for rule in rules:
        degrees = []
        for variable, term_label in rule.antecedent:
            if variable.name not in inputs:
                raise MissingInputError(variable.name)
            degrees.append(variable.term(term_label).membership(inputs[variable.name]))
        strength = rule_strength(degrees)
        if strength > 0.0:
            fired.append((rule.rule_id, strength, out_var.term(rule.consequent_term)))
    return FuzzyOutput(variable=out_var, fired=tuple(fired))


def _pair_crossings(
    f: tuple[float, Trapezoid], g: tuple[float, Trapezoid], lo: float, hi: float
) -> list[float]:
    """Interior abscissae where two strength-scaled trapezoids intersect.

    Both functions are linear between consecutive corner points, so each
    crossing is found exactly from two interior samples of the difference.
    """
    sf, tf = f
    sg, tg = g
    nodes = sorted({lo, hi, *tf.corners(), *tg.corners()})
    nodes = [p for p in nodes if lo <= p <= hi]
    crossings = []
    for x0, x1 in zip(nodes, nodes[1:]):
        if x1 <= x0:
            continue
        third = (x1 - x0) / 3.0
        q1, q2 = x0 + third, x0 + 2.0 * third
        d1 = sf * tf.membership(q1) - sg * tg.membership(q1)
        d2 = sf * tf.membership(q2) - sg * tg.membership(q2)
        if d1 == d2:
            continue
        # Root of the linear difference; a spurious node is harmless.
        x_cross = q1 - d1 * (q2 - q1) / (d2 - d1)
        if x0 < x_cross < x1:
            crossings.append(x_cross)
    return crossings


def _integration_nodes(out: FuzzyOutput, grid_points: int) -> np.ndarray:
    """Uniform grid refined with every envelope breakpoint.

    Term corners and crossings of the scaled terms are inserted so the
    envelope is linear on every open segment between consecutive nodes.
    """
    lo, hi = out.variable.universe
    nodes = set(np.linspace(lo, hi, grid_points))
    for _, _, trap in out.fired:
        nodes.update(p for p in trap.corners() if lo < p < hi)
    contributions = [(strength, trap) for _, strength, trap in out.fired]
    for i in range(len(contributions)):
        for j in range(i + 1, len(contributions)):
            nodes.update(_pair_crossings(contributions[i], contributions[j], lo, hi))
    return np.array(sorted(nodes))


def defuzzify_centroid(out: FuzzyOutput, grid_points: int = DEFAULT_GRID_POINTS) -> float:
    """Centre-of-gravity of the output envelope over the variable's universe.

    Computes integral(x * env(x)) / integral(env(x)) by trapezoidal
    quadrature on a uniform grid of `grid_points` points refined with the
    envelope's breakpoints. The envelope is linear between refined nodes
    (one-sided limits handle step edges), so both moments are integrated
    without discretisation error and the result is independent of
    `grid_points`.
    """
    xs = _integration_nodes(out, grid_points)
    x0, x1 = xs[:-1], xs[1:]
    h = x1 - x0
    third = h / 3.0
    yq1 = out.envelope_grid(x0 + third)
    yq2 = out.envelope_grid(x1 - third)
    # One-sided limits at the segment ends, extrapolated from the interior
    # samples; env is linear on each open segment.
    y0 = 2.0 * yq1 - yq2
    y1 = 2.0 * yq2 - yq1
    area = float(np.sum(h * (y0 + y1) / 2.0))
    if area < ZERO_AREA_TOL:
        raise NoRuleFiredError(
            f"output envelope of {out.variable.name!r} is identically zero"
        )
    first_moment = float(
        np.sum(h * x0 * (y0 + y1) / 2.0 + h * h * (y0 + 2.0 * y1) / 6.0)
    )
    return first_moment / area

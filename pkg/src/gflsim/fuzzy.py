"""Mamdani fuzzy inference with centroid defuzzification.

Crisp inputs are fuzzified through piecewise-linear membership functions,
a complete antecedent grid fires with min-AND, per-output-term strengths
are max-aggregated, and the clip-implication composite is defuzzified by
a midpoint-rule centroid over the output universe.

Everything here is immutable after construction and every operation is a
pure function, so instances can be shared freely between the live
simulation loop and parallel fitness replays.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

__all__ = [
    "FuzzyDefinitionError",
    "NoActivationError",
    "MembershipFunction",
    "triangle",
    "trapezoid",
    "LinguisticVariable",
    "RuleBase",
    "Activation",
    "FuzzySystem",
    "evaluate_rules",
    "defuzzify_centroid",
    "compute_rss_threshold",
    "DEFAULT_CONSEQUENTS",
    "default_velocity",
    "default_distance",
    "default_channels",
    "default_output",
    "default_rule_base",
    "default_system",
]

DEFAULT_RESOLUTION = 1001


class FuzzyDefinitionError(ValueError):
    """A membership function, variable, or rule grid is malformed."""


class NoActivationError(ValueError):
    """Defuzzification was requested for an all-zero activation."""


@dataclass(frozen=True)
class MembershipFunction:
    """Triangular or trapezoidal fuzzy set, defined by 3 or 4 breakpoints."""

    label: str
    points: tuple[float, ...]

    def __post_init__(self) -> None:
        pts = tuple(float(p) for p in self.points)
        object.__setattr__(self, "points", pts)
        if len(pts) not in (3, 4):
            raise FuzzyDefinitionError(
                f"term {self.label!r}: expected 3 or 4 breakpoints, got {len(pts)}"
            )
        if any(not math.isfinite(p) for p in pts):
            raise FuzzyDefinitionError(f"term {self.label!r}: non-finite breakpoint")
        if any(b < a for a, b in zip(pts, pts[1:])):
            raise FuzzyDefinitionError(
                f"term {self.label!r}: breakpoints must be non-decreasing: {pts}"
            )
        if pts[0] == pts[-1]:
            raise FuzzyDefinitionError(f"term {self.label!r}: support is empty")

    @property
    def shape(self) -> str:
        return "triangular" if len(self.points) == 3 else "trapezoidal"

    @property
    def support(self) -> tuple[float, float]:
        return self.points[0], self.points[-1]

    @property
    def peak(self) -> float:
        """Midpoint of the top plateau (the peak itself for a triangle)."""
        if len(self.points) == 3:
            return self.points[1]
        return 0.5 * (self.points[1] + self.points[2])

    def _edges(self) -> tuple[float, float, float, float]:
        pts = self.points
        if len(pts) == 3:
            return pts[0], pts[1], pts[1], pts[2]
        return pts

    def degree(self, x: float) -> float:
        """Membership degree of ``x``, in [0, 1]; 0 outside the support."""
        a, b, c, z = self._edges()
        if x < a or x > z:
            return 0.0
        if b <= x <= c:
            return 1.0
        if x < b:
            return (x - a) / (b - a)
        return (z - x) / (z - c)

    def degrees(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`degree` (same arithmetic, element for element)."""
        a, b, c, z = self._edges()
        xs = np.asarray(xs, dtype=float)
        out = np.zeros_like(xs)
        if b > a:
            rising = (xs >= a) & (xs < b)
            out[rising] = (xs[rising] - a) / (b - a)
        out[(xs >= b) & (xs <= c)] = 1.0
        if z > c:
            falling = (xs > c) & (xs <= z)
            out[falling] = (z - xs[falling]) / (z - c)
        return out


def triangle(label: str, a: float, b: float, c: float) -> MembershipFunction:
    return MembershipFunction(label, (a, b, c))


def trapezoid(label: str, a: float, b: float, c: float, d: float) -> MembershipFunction:
    return MembershipFunction(label, (a, b, c, d))


@dataclass(frozen=True)
class LinguisticVariable:
    """Named variable over a closed universe with an ordered term set.

    Construction enforces full coverage (every universe point belongs
    to at least one term with positive degree) and strictly increasing
    term peaks, so downstream inference can never see an empty activation.
    """

    name: str
    lo: float
    hi: float
    terms: tuple[MembershipFunction, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.lo < self.hi:
            raise FuzzyDefinitionError(f"variable {self.name!r}: need lo < hi")
        if not self.terms:
            raise FuzzyDefinitionError(f"variable {self.name!r}: no terms")
        labels = [t.label for t in self.terms]
        if len(set(labels)) != len(labels):
            raise FuzzyDefinitionError(f"variable {self.name!r}: duplicate term labels")
        peaks = [t.peak for t in self.terms]
        if any(q <= p for p, q in zip(peaks, peaks[1:])):
            raise FuzzyDefinitionError(
                f"variable {self.name!r}: term peaks must strictly increase"
            )
        self._check_coverage()

    def _check_coverage(self) -> None:
        # A coverage gap is an interval where every term is zero.  Its
        # boundary is made of support endpoints, so it suffices to probe
        # each endpoint plus the midpoint between adjacent endpoints.
        pts = {self.lo, self.hi}
        for t in self.terms:
            pts.update(p for p in t.support if self.lo <= p <= self.hi)
        pts = sorted(pts)
        probes = list(pts) + [0.5 * (p + q) for p, q in zip(pts, pts[1:])]
        for x in probes:
            if all(t.degree(x) == 0.0 for t in self.terms):
                raise FuzzyDefinitionError(
                    f"variable {self.name!r}: no term covers x={x}"
                )

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(t.label for t in self.terms)

    def clamp(self, x: float) -> float:
        return min(max(float(x), self.lo), self.hi)

    def fuzzify(self, x: float) -> tuple[float, ...]:
        """Degree per term for ``x``; values outside the universe are clamped."""
        xc = self.clamp(x)
        return tuple(t.degree(xc) for t in self.terms)


@dataclass(frozen=True)
class RuleBase:
    """Complete antecedent grid mapping level combinations to output terms.

    ``consequents`` is laid out row-major over ``levels`` (first input is
    the slowest axis) and holds 1-based output-term indices.
    """

    levels: tuple[int, ...]
    consequents: tuple[int, ...]
    n_output_terms: int = 5

    def __post_init__(self) -> None:
        object.__setattr__(self, "levels", tuple(int(n) for n in self.levels))
        object.__setattr__(self, "consequents", tuple(int(g) for g in self.consequents))
        expected = math.prod(self.levels)
        if len(self.consequents) != expected:
            raise FuzzyDefinitionError(
                f"rule grid needs {expected} consequents, got {len(self.consequents)}"
            )
        bad = [g for g in self.consequents if not 1 <= g <= self.n_output_terms]
        if bad:
            raise FuzzyDefinitionError(f"consequent indices out of 1..{self.n_output_terms}: {bad}")

    @property
    def n_cells(self) -> int:
        return len(self.consequents)

    def consequent(self, *level_idx: int) -> int:
        flat = 0
        for n, i in zip(self.levels, level_idx):
            flat = flat * n + i
        return self.consequents[flat]


@dataclass(frozen=True)
class Activation:
    """Per-output-term firing strengths after rule aggregation."""

    strengths: tuple[float, ...]

    def __post_init__(self) -> None:
        s = tuple(float(v) for v in self.strengths)
        object.__setattr__(self, "strengths", s)
        if any(not 0.0 <= v <= 1.0 for v in s):
            raise FuzzyDefinitionError(f"strengths outside [0,1]: {s}")

    def any_fired(self) -> bool:
        return any(v > 0.0 for v in self.strengths)


def evaluate_rules(rules: RuleBase, *degree_vectors: Sequence[float]) -> Activation:
    """Fire the whole grid: min-AND per cell, max aggregation per output term.

    The result does not depend on cell iteration order.
    """
    if len(degree_vectors) != len(rules.levels):
        raise FuzzyDefinitionError(
            f"expected {len(rules.levels)} degree vectors, got {len(degree_vectors)}"
        )
    for n, degs in zip(rules.levels, degree_vectors):
        if len(degs) != n:
            raise FuzzyDefinitionError(f"degree vector length {len(degs)} != {n} levels")
    strengths = [0.0] * rules.n_output_terms
    for flat, combo in enumerate(itertools.product(*(range(n) for n in rules.levels))):
        w = min(degree_vectors[axis][idx] for axis, idx in enumerate(combo))
        term = rules.consequents[flat] - 1
        if w > strengths[term]:
            strengths[term] = w
    return Activation(tuple(strengths))


@lru_cache(maxsize=64)
def _output_grid(var: LinguisticVariable, resolution: int):
    """Midpoint sample positions, per-term degree table, and per-term
    nonzero sample-index ranges, all read-only."""
    if resolution < 1:
        raise FuzzyDefinitionError(f"resolution must be positive, got {resolution}")
    xs = var.lo + (np.arange(resolution) + 0.5) * ((var.hi - var.lo) / resolution)
    table = np.stack([t.degrees(xs) for t in var.terms])
    spans = []
    for row in table:
        nz = np.flatnonzero(row)
        spans.append((int(nz[0]), int(nz[-1]) + 1) if len(nz) else (0, 0))
    xs.setflags(write=False)
    table.setflags(write=False)
    return xs, table, tuple(spans)


def _centroid_row(
    strengths: Sequence[float],
    xs: np.ndarray,
    table: np.ndarray,
    spans: tuple[tuple[int, int], ...],
) -> float:
    """Midpoint Riemann centroid of the clipped, max-aggregated composite.

    Zero-strength terms clip to an all-zero row and cannot change the max,
    so only the activated rows participate, restricted to the samples
    where they are nonzero (adding exact zeros elsewhere cannot change
    either Riemann sum).
    """
    active = [t for t, v in enumerate(strengths) if v > 0.0]
    if not active:
        raise NoActivationError("all firing strengths are zero")
    i0 = min(spans[t][0] for t in active)
    i1 = max(spans[t][1] for t in active)
    if i0 >= i1:
        raise NoActivationError("activated supports are narrower than the sample grid")
    if len(active) == 1:
        t = active[0]
        comp = np.minimum(strengths[t], table[t, i0:i1])
    else:
        clipped = np.array([strengths[t] for t in active])
        comp = np.maximum.reduce(
            np.minimum(clipped[:, None], table[active, i0:i1]), axis=0
        )
    denom = np.add.reduce(comp)
    if denom == 0.0:
        raise NoActivationError("activated supports are narrower than the sample grid")
    return float(np.dot(comp, xs[i0:i1]) / denom)


def defuzzify_centroid(
    activation: Activation,
    out_var: LinguisticVariable,
    resolution: int = DEFAULT_RESOLUTION,
) -> float:
    """Center-of-area defuzzification by midpoint rule with uniform samples."""
    if len(activation.strengths) != len(out_var.terms):
        raise FuzzyDefinitionError(
            f"{len(activation.strengths)} strengths for {len(out_var.terms)} output terms"
        )
    if not activation.any_fired():
        raise NoActivationError("all firing strengths are zero")
    xs, table, spans = _output_grid(out_var, resolution)
    return _centroid_row(np.asarray(activation.strengths, dtype=float), xs, table, spans)


class FuzzySystem:
    """Fixed input/output variables plus the full inference pipeline.

    Crisp values are cached per activation pattern, which makes repeated
    evaluation of the exact same firing strengths (the common case during
    evolutionary replays) nearly free while keeping a single arithmetic
    path, bit-identical everywhere.
    """

    def __init__(
        self,
        input_vars: Sequence[LinguisticVariable],
        output_var: LinguisticVariable,
        resolution: int = DEFAULT_RESOLUTION,
    ) -> None:
        self.input_vars = tuple(input_vars)
        self.output_var = output_var
        self.resolution = int(resolution)
        if not self.input_vars:
            raise FuzzyDefinitionError("at least one input variable required")
        self.levels = tuple(len(v.terms) for v in self.input_vars)
        self.n_cells = math.prod(self.levels)
        self.n_output_terms = len(output_var.terms)
        self._xs, self._table, self._spans = _output_grid(output_var, self.resolution)
        self._sup_lo = np.array([t.support[0] for t in output_var.terms])
        self._sup_hi = np.array([t.support[1] for t in output_var.terms])
        self._value_cache: dict[tuple, float] = {}
        self._onehot_cache: dict[tuple[int, ...], np.ndarray] = {}

    def check_rule_base(self, rules: RuleBase) -> None:
        if rules.levels != self.levels or rules.n_output_terms != self.n_output_terms:
            raise FuzzyDefinitionError(
                f"rule grid {rules.levels}->{rules.n_output_terms} does not match "
                f"system {self.levels}->{self.n_output_terms}"
            )

    def fuzzify(self, inputs: Sequence[float]) -> tuple[tuple[float, ...], ...]:
        if len(inputs) != len(self.input_vars):
            raise FuzzyDefinitionError(
                f"expected {len(self.input_vars)} inputs, got {len(inputs)}"
            )
        return tuple(v.fuzzify(x) for v, x in zip(self.input_vars, inputs))

    def cell_weights(self, degree_vectors: Sequence[Sequence[float]]) -> np.ndarray:
        """Flat min-AND firing weight per grid cell, row-major over levels."""
        w = np.asarray(degree_vectors[0], dtype=float)
        for degs in degree_vectors[1:]:
            w = np.minimum(w[..., None], np.asarray(degs, dtype=float))
        return w.reshape(-1)

    def _onehot(self, consequents: tuple[int, ...]) -> np.ndarray:
        m = self._onehot_cache.get(consequents)
        if m is None:
            g = np.asarray(consequents)
            m = g[:, None] == np.arange(1, self.n_output_terms + 1)
            self._onehot_cache[consequents] = m
        return m

    def strengths(self, weights: np.ndarray, consequents: tuple[int, ...]) -> np.ndarray:
        """Max firing weight per output term under the given consequent map."""
        m = self._onehot(consequents)
        return np.max(np.where(m, weights[:, None], 0.0), axis=0)

    def activation_bounds(self, strengths: np.ndarray) -> tuple[float, float]:
        """Hull of the supports of the activated output terms.

        The centroid of any non-empty composite lies strictly inside this
        interval, which lets callers classify a value against thresholds
        without computing it.
        """
        fired = strengths > 0.0
        return float(self._sup_lo[fired].min()), float(self._sup_hi[fired].max())

    def crisp_from_strengths(self, strengths) -> float:
        s5 = strengths.tolist() if isinstance(strengths, np.ndarray) else list(strengths)
        key = tuple(s5)
        v = self._value_cache.get(key)
        if v is None:
            v = _centroid_row(s5, self._xs, self._table, self._spans)
            self._value_cache[key] = v
        return v

    def compute(self, consequents: tuple[int, ...], inputs: Sequence[float]) -> float:
        """Full fuzzify -> fire -> defuzzify pipeline for one input vector."""
        degs = self.fuzzify(inputs)
        w = self.cell_weights(degs)
        s = self.strengths(w, tuple(consequents))
        return self.crisp_from_strengths(s)


def compute_rss_threshold(
    rules: RuleBase,
    system: FuzzySystem,
    velocity: float,
    dist_norm: float,
    chan_norm: float,
) -> float:
    """Crisp handoff signal in [0, 1] for one (velocity, distance, channel) triple.

    ``dist_norm`` and ``chan_norm`` are expected pre-normalized to [0, 1];
    out-of-universe values are clamped rather than rejected.
    """
    system.check_rule_base(rules)
    return system.compute(rules.consequents, (velocity, dist_norm, chan_norm))


# Consequents for the shipped 3x3x3 grid, velocity-major then distance then
# channels, encoded 1 (very low) .. 5 (very high).  This is also the seed
# chromosome for consequent evolution.
DEFAULT_CONSEQUENTS: tuple[int, ...] = (
    2, 2, 3, 3, 3, 4, 4, 5, 5,
    1, 2, 2, 3, 3, 3, 4, 4, 4,
    1, 1, 2, 2, 2, 3, 3, 4, 4,
)


def default_velocity(name: str = "velocity") -> LinguisticVariable:
    return LinguisticVariable(name, 0.0, 30.0, (
        triangle("slow", 0.0, 0.0, 15.0),
        triangle("medium", 5.0, 15.0, 25.0),
        triangle("fast", 15.0, 30.0, 30.0),
    ))


def default_distance(name: str = "distance") -> LinguisticVariable:
    return LinguisticVariable(name, 0.0, 1.0, (
        triangle("near", 0.0, 0.0, 0.4),
        triangle("medium", 0.2, 0.5, 0.8),
        triangle("far", 0.6, 1.0, 1.0),
    ))


def default_channels(name: str = "channels") -> LinguisticVariable:
    return LinguisticVariable(name, 0.0, 1.0, (
        triangle("low", 0.0, 0.0, 0.5),
        triangle("medium", 0.25, 0.5, 0.75),
        triangle("high", 0.5, 1.0, 1.0),
    ))


def default_output(name: str = "rss_threshold") -> LinguisticVariable:
    return LinguisticVariable(name, 0.0, 1.0, (
        triangle("very_low", 0.0, 0.0, 0.25),
        triangle("low", 0.0, 0.25, 0.5),
        triangle("medium", 0.25, 0.5, 0.75),
        triangle("high", 0.5, 0.75, 1.0),
        triangle("very_high", 0.75, 1.0, 1.0),
    ))


def default_rule_base() -> RuleBase:
    return RuleBase(levels=(3, 3, 3), consequents=DEFAULT_CONSEQUENTS)


def default_system(resolution: int = DEFAULT_RESOLUTION) -> FuzzySystem:
    """Three-input system over the default universes."""
    return FuzzySystem(
        (default_velocity(), default_distance(), default_channels()),
        default_output(),
        resolution,
    )

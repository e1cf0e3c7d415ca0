"""Counting-invariant constraint sets over histogram coordinates.

A constraint set is a list of index subsets of [0, d); each subset pins the
sum of the histogram entries it covers.  This module compiles subsets to
{0,1} incidence matrices, drops linearly dependent subsets, evaluates
margins, tests equivalence of histograms, and does privacy-budget addition.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

from .errors import ParseError
from .intlinalg import IntMatrix


@dataclass(frozen=True)
class ConstraintSet:
    """Index subsets of [0, dimension) whose sums must be preserved."""

    dimension: int
    subsets: tuple
    labels: tuple = ()

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        norm = []
        for s in self.subsets:
            idx = list(s)
            if len(set(idx)) != len(idx):
                raise ValueError(f"duplicate indices in subset {idx}")
            for i in idx:
                if not 0 <= i < self.dimension:
                    raise ValueError(f"index {i} outside [0, {self.dimension})")
            norm.append(tuple(sorted(int(i) for i in idx)))
        object.__setattr__(self, "subsets", tuple(norm))
        labels = self.labels or tuple(None for _ in norm)
        if len(labels) != len(norm):
            raise ValueError("labels/subsets length mismatch")
        object.__setattr__(self, "labels", tuple(labels))

    @property
    def count(self) -> int:
        return len(self.subsets)

    def to_json(self) -> str:
        doc = {
            "dimension": self.dimension,
            "constraints": [
                {"label": lab if lab is not None else f"c{i}", "indices": list(s)}
                for i, (s, lab) in enumerate(zip(self.subsets, self.labels))
            ],
        }
        return json.dumps(doc, indent=2)

    @staticmethod
    def from_json(text: str) -> "ConstraintSet":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ParseError(f"constraint document is not valid JSON: {e}") from e
        try:
            dim = int(doc["dimension"])
            entries = doc["constraints"]
            subsets = [tuple(int(i) for i in c["indices"]) for c in entries]
            labels = [c.get("label") for c in entries]
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"malformed constraint document: {e}") from e
        try:
            return ConstraintSet(dim, tuple(subsets), tuple(labels))
        except ValueError as e:
            raise ParseError(str(e)) from e


@dataclass(frozen=True)
class Histogram:
    """Non-negative integer counts, one per histogram cell."""

    values: tuple

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        if any(v < 0 for v in vals):
            raise ValueError("histogram entries must be non-negative")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)


def partition_constraints(group_sizes, labels=None) -> ConstraintSet:
    """One subset per contiguous group; the groups partition [0, d)."""
    if any(g < 1 for g in group_sizes):
        raise ValueError("group sizes must be positive")
    d = sum(group_sizes)
    subsets = []
    start = 0
    for g in group_sizes:
        subsets.append(tuple(range(start, start + g)))
        start += g
    if labels is None:
        labels = tuple(f"group_{i}" for i in range(len(group_sizes)))
    return ConstraintSet(d, tuple(subsets), tuple(labels))


def table_margin_constraints(nrows: int, ncols: int) -> ConstraintSet:
    """Row-sum and column-sum subsets for a table flattened row-major."""
    if nrows < 1 or ncols < 1:
        raise ValueError("table dimensions must be positive")
    d = nrows * ncols
    subsets = []
    labels = []
    for i in range(nrows):
        subsets.append(tuple(i * ncols + j for j in range(ncols)))
        labels.append(f"row_{i}")
    for j in range(ncols):
        subsets.append(tuple(i * ncols + j for i in range(nrows)))
        labels.append(f"col_{j}")
    return ConstraintSet(d, tuple(subsets), tuple(labels))


def incidence_matrix(cs: ConstraintSet) -> IntMatrix:
    """k x d {0,1} matrix; row l marks membership in subset l."""
    rows = []
    for s in cs.subsets:
        row = [0] * cs.dimension
        for i in s:
            row[i] = 1
        rows.append(row)
    return IntMatrix.from_rows(rows) if rows else IntMatrix.zeros(0, cs.dimension)


def full_rank_reduce(cs: ConstraintSet):
    """Keep the earliest linearly independent subset rows.

    Returns (incidence matrix of the kept rows, rank).  Later rows that lie
    in the span of earlier ones are dropped, so identical constraint
    configurations always map to the identical reduced system.
    """
    full = incidence_matrix(cs)
    kept = []
    echelon = []  # list of (pivot_col, reduced_row as Fractions)
    for i in range(full.rows):
        row = [Fraction(x) for x in full.row(i)]
        for pivot_col, base in echelon:
            if row[pivot_col] != 0:
                f = row[pivot_col] / base[pivot_col]
                row = [a - f * b for a, b in zip(row, base)]
        pivot = next((j for j, x in enumerate(row) if x != 0), None)
        if pivot is not None:
            echelon.append((pivot, row))
            kept.append(i)
    reduced = IntMatrix.from_rows([full.row(i) for i in kept]) if kept else IntMatrix.zeros(0, cs.dimension)
    return reduced, len(kept)


def margins(cs: ConstraintSet, x) -> tuple:
    """Per-subset sums of x (any integer vector of matching length)."""
    vals = x.values if isinstance(x, Histogram) else tuple(int(v) for v in x)
    if len(vals) != cs.dimension:
        raise ValueError("dimension mismatch")
    return tuple(sum(vals[i] for i in s) for s in cs.subsets)


def equivalent(cs: ConstraintSet, x, y) -> bool:
    """True iff every subset sum of x equals that of y, exactly."""
    return margins(cs, x) == margins(cs, y)


def budget_compose(budgets):
    """Sequential composition: budgets add componentwise."""
    eps = 0.0
    delta = 0.0
    for e, dl in budgets:
        if e < 0 or dl < 0:
            raise ValueError("budget components must be non-negative")
        eps += e
        delta += dl
    return eps, delta

from fractions import Fraction

import pytest

from latticedp import table_margin_constraints
from latticedp.constraints import ConstraintSet, partition_constraints
from latticedp.mechanism import compile_constraints


@pytest.fixture(scope="session")
def ctx_table44():
    return compile_constraints(table_margin_constraints(4, 4))


@pytest.fixture(scope="session")
def ctx_d2():
    return compile_constraints(ConstraintSet(2, ((0, 1),)))


@pytest.fixture(scope="session")
def ctx_county10():
    return compile_constraints(partition_constraints([10], labels=("state_total",)))


# Fictitious 4x4 county-by-education contingency table, row-major.  Widely
# circulated printings carry a transcription slip in the third row's total;
# the cell values are authoritative and margins are recomputed from them.
CHILDREN_CELLS = (
    15, 1, 3, 1,
    20, 10, 10, 15,
    3, 10, 10, 2,
    12, 14, 7, 2,
)


def frac_determinant(rows):
    """Independent determinant oracle: Gaussian elimination over Fractions."""
    n = len(rows)
    m = [[Fraction(x) for x in r] for r in rows]
    det = Fraction(1)
    for t in range(n):
        piv = next((i for i in range(t, n) if m[i][t] != 0), None)
        if piv is None:
            return 0
        if piv != t:
            m[t], m[piv] = m[piv], m[t]
            det = -det
        det *= m[t][t]
        inv = 1 / m[t][t]
        for i in range(t + 1, n):
            if m[i][t] != 0:
                f = m[i][t] * inv
                m[i] = [a - f * b for a, b in zip(m[i], m[t])]
    assert det.denominator == 1
    return int(det)


def frac_rank(rows):
    """Row rank over the rationals, independent of the package's elimination."""
    m = [[Fraction(x) for x in r] for r in rows if any(r)]
    rank = 0
    cols = len(rows[0]) if rows else 0
    for c in range(cols):
        piv = next((i for i in range(rank, len(m)) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        inv = 1 / m[rank][c]
        m[rank] = [x * inv for x in m[rank]]
        for i in range(len(m)):
            if i != rank and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[rank])]
        rank += 1
    return rank


def dgeom_pmf(e, a):
    return (1.0 - a) / (1.0 + a) * a ** abs(e)


class ScriptedRng:
    """Deterministic stand-in for a Generator: replays a fixed uniform list."""

    def __init__(self, values):
        self.values = list(values)
        self.cursor = 0

    def random(self):
        v = self.values[self.cursor]
        self.cursor += 1
        return v

"""Exact integer matrix arithmetic.

Everything in this module runs on Python's arbitrary-precision integers:
Smith normal form with unimodular cofactors, unimodular inversion, lattice
basis extraction from the cofactor matrix, and fraction-free determinants.
No floating point enters any computation here, so every identity the rest
of the package relies on (U A V = D, A C = 0, det = +-1) holds exactly.

Matrices are small (tens of rows/columns), so the elementary-operation
algorithms below are entirely adequate; there is no attempt at asymptotic
cleverness.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import EmptyLattice, NotUnimodular, RankDeficient


@dataclass(frozen=True)
class IntMatrix:
    """Immutable integer matrix, entries row-major."""

    rows: int
    cols: int
    entries: tuple

    def __post_init__(self):
        if self.rows < 0 or self.cols < 0:
            raise ValueError("negative dimensions")
        if len(self.entries) != self.rows * self.cols:
            raise ValueError(
                f"expected {self.rows * self.cols} entries, got {len(self.entries)}"
            )

    @staticmethod
    def from_rows(rows) -> "IntMatrix":
        rows = [list(r) for r in rows]
        n = len(rows)
        m = len(rows[0]) if rows else 0
        if any(len(r) != m for r in rows):
            raise ValueError("ragged rows")
        flat = tuple(int(x) for r in rows for x in r)
        return IntMatrix(n, m, flat)

    @staticmethod
    def identity(n: int) -> "IntMatrix":
        return IntMatrix(n, n, tuple(1 if i == j else 0 for i in range(n) for j in range(n)))

    @staticmethod
    def zeros(n: int, m: int) -> "IntMatrix":
        return IntMatrix(n, m, (0,) * (n * m))

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i * self.cols + j]

    def row(self, i: int):
        return list(self.entries[i * self.cols : (i + 1) * self.cols])

    def column(self, j: int):
        return [self.entries[i * self.cols + j] for i in range(self.rows)]

    def to_rows(self):
        return [self.row(i) for i in range(self.rows)]

    def transpose(self) -> "IntMatrix":
        return IntMatrix(
            self.cols,
            self.rows,
            tuple(self.entries[i * self.cols + j] for j in range(self.cols) for i in range(self.rows)),
        )

    def mul(self, other: "IntMatrix") -> "IntMatrix":
        if self.cols != other.rows:
            raise ValueError("dimension mismatch")
        a, b = self.to_rows(), other.to_rows()
        out = []
        for i in range(self.rows):
            ai = a[i]
            for j in range(other.cols):
                out.append(sum(ai[t] * b[t][j] for t in range(self.cols)))
        return IntMatrix(self.rows, other.cols, tuple(out))

    def mul_vector(self, vec):
        if self.cols != len(vec):
            raise ValueError("dimension mismatch")
        return [sum(self[i, t] * vec[t] for t in range(self.cols)) for i in range(self.rows)]

    def is_diagonal(self) -> bool:
        return all(
            self[i, j] == 0 for i in range(self.rows) for j in range(self.cols) if i != j
        )

    def submatrix_columns(self, cols) -> "IntMatrix":
        cols = list(cols)
        return IntMatrix(
            self.rows,
            len(cols),
            tuple(self[i, j] for i in range(self.rows) for j in cols),
        )


@dataclass(frozen=True)
class SmithDecomposition:
    """U A V = D with U, V unimodular and D diagonal (divisibility chain).

    The input matrix is retained so consumers can verify identities against
    the original system instead of a reconstruction.
    """

    a: IntMatrix
    u: IntMatrix
    d_mat: IntMatrix
    v: IntMatrix
    v_inv: IntMatrix
    rank: int

    def invariant_factors(self):
        return [self.d_mat[i, i] for i in range(self.rank)]


@dataclass(frozen=True)
class LatticeBasis:
    """Integer basis of the constraint null lattice, one column per free direction."""

    basis: IntMatrix
    ambient_dim: int
    lattice_dim: int
    gram_det: int


def determinant(mat: IntMatrix) -> int:
    """Exact determinant by Bareiss fraction-free elimination."""
    if mat.rows != mat.cols:
        raise ValueError("determinant of non-square matrix")
    n = mat.rows
    if n == 0:
        return 1
    m = mat.to_rows()
    sign = 1
    prev = 1
    for t in range(n - 1):
        if m[t][t] == 0:
            for i in range(t + 1, n):
                if m[i][t] != 0:
                    m[t], m[i] = m[i], m[t]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(t + 1, n):
            for j in range(t + 1, n):
                # Bareiss update: the division is exact.
                m[i][j] = (m[i][j] * m[t][t] - m[i][t] * m[t][j]) // prev
            m[i][t] = 0
        prev = m[t][t]
    return sign * m[n - 1][n - 1]


def _swap_rows(m, u, i, j):
    m[i], m[j] = m[j], m[i]
    u[i], u[j] = u[j], u[i]


def _swap_cols(m, v, vinv, i, j):
    for row in m:
        row[i], row[j] = row[j], row[i]
    for row in v:
        row[i], row[j] = row[j], row[i]
    vinv[i], vinv[j] = vinv[j], vinv[i]


def _add_row(m, u, dst, src, q):
    """row dst += q * row src (on the working matrix and on U)."""
    if q == 0:
        return
    mdst, msrc = m[dst], m[src]
    for t in range(len(mdst)):
        mdst[t] += q * msrc[t]
    udst, usrc = u[dst], u[src]
    for t in range(len(udst)):
        udst[t] += q * usrc[t]


def _add_col(m, v, vinv, dst, src, q):
    """col dst += q * col src; V mirrors the op, V^-1 absorbs its inverse."""
    if q == 0:
        return
    for row in m:
        row[dst] += q * row[src]
    for row in v:
        row[dst] += q * row[src]
    vsrc, vdst = vinv[src], vinv[dst]
    for t in range(len(vsrc)):
        vsrc[t] -= q * vdst[t]


def _negate_row(m, u, i):
    m[i] = [-x for x in m[i]]
    u[i] = [-x for x in u[i]]


def _clear_pivot(m, u, v, vinv, t, k, d):
    """Reduce column t and row t to zero outside the pivot at (t, t).

    Uses Euclidean steps: remainders replace the pivot whenever they are
    nonzero, so the pivot magnitude strictly decreases and the loop
    terminates with the pivot dividing everything it eliminated.
    """
    while True:
        if m[t][t] < 0:
            _negate_row(m, u, t)
        progressed = False
        for i in range(t + 1, k):
            if m[i][t] != 0:
                q = m[i][t] // m[t][t]
                _add_row(m, u, i, t, -q)
                if m[i][t] != 0:
                    _swap_rows(m, u, t, i)
                    progressed = True
        for j in range(t + 1, d):
            if m[t][j] != 0:
                q = m[t][j] // m[t][t]
                _add_col(m, v, vinv, j, t, -q)
                if m[t][j] != 0:
                    _swap_cols(m, v, vinv, t, j)
                    progressed = True
        if progressed:
            continue
        col_clear = all(m[i][t] == 0 for i in range(t + 1, k))
        row_clear = all(m[t][j] == 0 for j in range(t + 1, d))
        if col_clear and row_clear:
            return


def smith_normal_form(a: IntMatrix) -> SmithDecomposition:
    """Diagonalize an integer matrix by unimodular row/column operations.

    Returns U (rows x rows), V and V^-1 (cols x cols) and the diagonal D with
    U A V = D and the divisibility chain D[0] | D[1] | ... enforced.  The
    smallest-magnitude candidate is chosen as pivot at every stage, which
    keeps intermediate growth modest for the incidence-style inputs this
    package feeds it.

    Raises RankDeficient when the matrix has fewer independent rows than
    rows, since downstream lattice construction requires full row rank.
    """
    k, d = a.rows, a.cols
    m = a.to_rows()
    u = IntMatrix.identity(k).to_rows()
    v = IntMatrix.identity(d).to_rows()
    vinv = IntMatrix.identity(d).to_rows()

    limit = min(k, d)
    rank = 0
    for t in range(limit):
        # Pivot selection: smallest nonzero magnitude in the trailing block.
        best = None
        for i in range(t, k):
            for j in range(t, d):
                x = m[i][j]
                if x != 0 and (best is None or abs(x) < abs(m[best[0]][best[1]])):
                    best = (i, j)
        if best is None:
            break
        if best[0] != t:
            _swap_rows(m, u, t, best[0])
        if best[1] != t:
            _swap_cols(m, v, vinv, t, best[1])
        _clear_pivot(m, u, v, vinv, t, k, d)
        rank = t + 1

    if rank < k:
        raise RankDeficient(f"matrix has rank {rank} < {k} rows")

    # Enforce the divisibility chain d_l | d_{l+1}. Folding column l+1 into
    # column l re-exposes the pair to a Euclidean pass whose pivot becomes
    # their gcd.
    changed = True
    while changed:
        changed = False
        for t in range(rank - 1):
            if m[t + 1][t + 1] % m[t][t] != 0:
                _add_col(m, v, vinv, t, t + 1, 1)
                _clear_pivot(m, u, v, vinv, t, k, d)
                changed = True
    for t in range(rank):
        if m[t][t] < 0:
            _negate_row(m, u, t)

    dec = SmithDecomposition(
        a=a,
        u=IntMatrix.from_rows(u),
        d_mat=IntMatrix.from_rows(m),
        v=IntMatrix.from_rows(v),
        v_inv=IntMatrix.from_rows(vinv),
        rank=rank,
    )
    _check_decomposition(dec)
    return dec


def _check_decomposition(dec: SmithDecomposition):
    uav = dec.u.mul(dec.a).mul(dec.v)
    if uav != dec.d_mat:
        raise AssertionError("U A V != D")
    if not dec.d_mat.is_diagonal():
        raise AssertionError("D not diagonal")
    if abs(determinant(dec.u)) != 1 or abs(determinant(dec.v)) != 1:
        raise AssertionError("cofactor not unimodular")
    if dec.v.mul(dec.v_inv) != IntMatrix.identity(dec.v.rows):
        raise AssertionError("V V^-1 != I")
    factors = dec.invariant_factors()
    for lo, hi in zip(factors, factors[1:]):
        if hi % lo != 0:
            raise AssertionError("divisibility chain violated")


def lattice_basis(snf: SmithDecomposition) -> LatticeBasis:
    """Extract the null-lattice basis: the last d - k columns of V.

    Every produced column c satisfies A c = 0 exactly, which is verified
    against the stored input before returning.
    """
    k = snf.rank
    d = snf.v.rows
    if k == d:
        raise EmptyLattice("constraints pin every coordinate; lattice is {0}")
    basis = snf.v.submatrix_columns(range(k, d))
    prod = snf.a.mul(basis)
    if any(x != 0 for x in prod.entries):
        raise AssertionError("basis columns do not annihilate the constraints")
    gram = gram_determinant(basis)
    return LatticeBasis(basis=basis, ambient_dim=d, lattice_dim=d - k, gram_det=gram)


def unimodular_inverse(v: IntMatrix) -> IntMatrix:
    """Exact inverse of a determinant +-1 integer matrix.

    Gauss-Jordan over the rationals; the result is integral precisely
    because |det| = 1, which is checked first.
    """
    if v.rows != v.cols:
        raise NotUnimodular("matrix not square")
    n = v.rows
    det = determinant(v)
    if abs(det) != 1:
        raise NotUnimodular(f"determinant {det} (expected +-1)")
    work = [[Fraction(x) for x in v.row(i)] for i in range(n)]
    inv = [[Fraction(1 if i == j else 0) for j in range(n)] for i in range(n)]
    for t in range(n):
        piv = None
        for i in range(t, n):
            if work[i][t] != 0:
                piv = i
                break
        work[t], work[piv] = work[piv], work[t]
        inv[t], inv[piv] = inv[piv], inv[t]
        p = work[t][t]
        work[t] = [x / p for x in work[t]]
        inv[t] = [x / p for x in inv[t]]
        for i in range(n):
            if i != t and work[i][t] != 0:
                f = work[i][t]
                work[i] = [a - f * b for a, b in zip(work[i], work[t])]
                inv[i] = [a - f * b for a, b in zip(inv[i], inv[t])]
    out = []
    for row in inv:
        for x in row:
            if x.denominator != 1:
                raise NotUnimodular("inverse not integral")
            out.append(int(x))
    return IntMatrix(n, n, tuple(out))


def gram_determinant(basis: IntMatrix) -> int:
    """det(B^T B), exact; positive iff the columns are independent."""
    g = basis.transpose().mul(basis)
    det = determinant(g)
    if det <= 0:
        raise RankDeficient("basis columns are linearly dependent")
    return det

"""Noise target densities on the lattice and their calibration constants.

Targets are unnormalized log densities evaluated at integer lattice points:
exponential in the l1 or l2 norm (Laplace-style, scale epsilon) or quadratic
(Gaussian-style, scale sigma).  Norm accumulation happens in exact integer
arithmetic; floats appear only in the final scalar.

Also here: the double geometric proposal distribution, the unit-ball volume,
the lattice tail constant, and the sigma calibration for the Gaussian
mechanism.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import ParameterDomain


class NoiseKind(enum.Enum):
    LAPLACE_L1 = "l1"
    LAPLACE_L2 = "l2"
    GAUSSIAN = "gauss"


@dataclass(frozen=True)
class NoiseTarget:
    """Unnormalized log density on the lattice.

    Laplace kinds use `epsilon`; the Gaussian kind uses `sigma` and an
    optional integer `center` (defaults to the origin).
    """

    kind: NoiseKind
    epsilon: float = None
    sigma: float = None
    center: tuple = None

    def __post_init__(self):
        if self.kind in (NoiseKind.LAPLACE_L1, NoiseKind.LAPLACE_L2):
            if self.epsilon is None or self.epsilon <= 0:
                raise ParameterDomain("Laplace targets need epsilon > 0")
        elif self.kind is NoiseKind.GAUSSIAN:
            if self.sigma is None or self.sigma <= 0:
                raise ParameterDomain("Gaussian targets need sigma > 0")
        if self.center is not None:
            object.__setattr__(self, "center", tuple(int(c) for c in self.center))

    @property
    def scale(self) -> float:
        """Scalar the kernels multiply the integer norm statistic by."""
        if self.kind is NoiseKind.GAUSSIAN:
            return 1.0 / (2.0 * self.sigma * self.sigma)
        return float(self.epsilon)


def log_target(target: NoiseTarget, z) -> float:
    """Log density (up to the normalizing constant) at integer point z.

    Sums of |z_i| and squared deviations are exact integers; the only float
    operation is the final scale multiplication (and one sqrt for the l2
    norm).
    """
    zs = [int(v) for v in z]
    if target.kind is NoiseKind.LAPLACE_L1:
        return -target.scale * sum(abs(v) for v in zs)
    if target.kind is NoiseKind.LAPLACE_L2:
        return -target.scale * math.sqrt(float(sum(v * v for v in zs)))
    center = target.center or (0,) * len(zs)
    if len(center) != len(zs):
        raise ValueError("center/point dimension mismatch")
    return -target.scale * sum((v - c) * (v - c) for v, c in zip(zs, center))


@dataclass(frozen=True)
class DoubleGeometric:
    """Integer distribution with mass (1-a)/(1+a) * a^|e|, a in (0, 1)."""

    a: float

    def __post_init__(self):
        if not 0.0 < self.a < 1.0:
            raise ParameterDomain("ratio a must lie strictly in (0, 1)")

    def pmf(self, e: int) -> float:
        return (1.0 - self.a) / (1.0 + self.a) * self.a ** abs(e)

    def cdf(self, e: int) -> float:
        if e >= 0:
            return 1.0 - self.a ** (e + 1) / (1.0 + self.a)
        return self.a ** (-e) / (1.0 + self.a)

    def quantile_magnitude(self, p: float) -> int:
        """Smallest radius r with P(|E| <= r) >= p."""
        if not 0.0 <= p < 1.0:
            raise ParameterDomain("p must be in [0, 1)")
        r = 0
        mass = (1.0 - self.a) / (1.0 + self.a)
        acc = mass
        while acc < p:
            r += 1
            acc += 2.0 * mass * self.a ** r
        return r

    @property
    def variance(self) -> float:
        return 2.0 * self.a / (1.0 - self.a) ** 2


def sample_double_geometric(dg: DoubleGeometric, rng) -> int:
    """One draw via inverse CDF on the folded magnitude plus a fair sign.

    Consumes one uniform for the magnitude and, when the magnitude is
    nonzero, a second uniform for the sign.  The chain kernels replicate
    this consumption pattern exactly, so chains built from either path are
    step-for-step identical given the same generator state.
    """
    a = dg.a
    u = rng.random()
    p0 = (1.0 - a) / (1.0 + a)
    if u < p0:
        return 0
    u2 = (u - p0) / (1.0 - p0)
    mag = 1 + int(math.floor(math.log(1.0 - u2) / math.log(a)))
    s = rng.random()
    return -mag if s < 0.5 else mag


def unit_ball_volume(m: int) -> float:
    """Volume of the m-dimensional unit l2 ball: pi^(m/2) / Gamma(m/2 + 1)."""
    if m < 0:
        raise ParameterDomain("dimension must be non-negative")
    return math.pi ** (m / 2.0) / math.gamma(m / 2.0 + 1.0)


def tail_constant_K(basis) -> float:
    """Tail prefactor 4 * 2^m * V_m / sqrt(det(B^T B)) for an m-dim lattice."""
    m = basis.lattice_dim
    return 4.0 * 2.0**m * unit_ball_volume(m) / math.sqrt(basis.gram_det)


def calibration_constant(m: int, K: float) -> float:
    """Explicit c constant for the Gaussian variance calibration.

    Only the asymptotic order max{m ln m, ln K} is pinned down by the
    privacy analysis; this concrete choice takes three times the largest of
    the dimensional term, ln K, and 1, which covers each branch of the case
    analysis with slack.
    """
    if m < 1:
        raise ParameterDomain("lattice dimension must be >= 1")
    return 3.0 * max(m * math.log(max(m, 2)), math.log(max(K, math.e)), 1.0)


def gaussian_sigma(eps: float, delta: float, m: int, K: float, c: float = None) -> float:
    """Standard deviation sqrt(2 c ln(1/delta)) / eps for the Gaussian target.

    Requires 0 < delta < eps < 1/e.  `c` defaults to calibration_constant;
    callers may override it when they have a sharper constant for their
    constraint system.
    """
    if not (0.0 < delta < eps < 1.0 / math.e):
        raise ParameterDomain(
            f"need 0 < delta < eps < 1/e, got eps={eps}, delta={delta}"
        )
    if c is None:
        c = calibration_constant(m, K)
    return math.sqrt(2.0 * c * math.log(1.0 / delta)) / eps

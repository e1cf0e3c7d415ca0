"""End-to-end additive mechanisms on the constraint lattice.

`compile_constraints` turns a constraint set into everything the samplers
need (reduced incidence system, Smith factorization, lattice basis, tail
constant); `privatize` adds one lattice noise draw to a histogram;
`noise_replicates` returns many thinned draws from one long chain.

The noise chain never sees the data: noise is sampled around the origin
from a seed-determined stream and added to the histogram afterwards, so the
same seed yields byte-identical noise whatever the input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .constraints import ConstraintSet, Histogram, full_rank_reduce, margins
from .errors import ConfigInvalid, ParameterDomain
from .intlinalg import IntMatrix, LatticeBasis, SmithDecomposition, lattice_basis, smith_normal_form
from .noise import NoiseKind, NoiseTarget, calibration_constant, gaussian_sigma, tail_constant_K
from .sampler import (
    ChainConfig,
    ChainContext,
    ProposalSpec,
    run_chain,
)


@dataclass(frozen=True)
class MechanismContext:
    """Compiled constraint system, reusable across any number of releases."""

    constraints: ConstraintSet
    incidence: IntMatrix
    snf: SmithDecomposition
    basis: LatticeBasis
    k: int
    d: int
    tail_k: float
    chain: ChainContext

    @property
    def lattice_dim(self) -> int:
        return self.d - self.k

    @property
    def degenerate(self) -> bool:
        return self.lattice_dim == 0


@dataclass(frozen=True)
class MechanismSpec:
    """Mechanism choice plus its privacy and sampling parameters."""

    constraints: ConstraintSet
    kind: NoiseKind
    epsilon: float
    delta: float = 0.0
    sampler_cfg: ChainConfig = None
    proposal: ProposalSpec = None
    sigma_constant: float = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ParameterDomain("epsilon must be positive")
        if self.kind is NoiseKind.GAUSSIAN:
            if not 0.0 < self.delta < self.epsilon < 1.0 / math.e:
                raise ParameterDomain("Gaussian mechanism needs 0 < delta < epsilon < 1/e")
        elif self.delta != 0.0:
            raise ParameterDomain("Laplace mechanisms carry delta = 0")


@dataclass(frozen=True)
class Release:
    """A privatized histogram along with the noise and audit metadata."""

    output: tuple
    noise: tuple
    budget_spent: tuple
    diagnostics: dict = field(default_factory=dict)


def compile_constraints(cs: ConstraintSet) -> MechanismContext:
    """Reduce, factorize, and pre-stage a constraint set for sampling.

    Dependent constraint rows are dropped first, so the Smith factorization
    always sees a full-row-rank system.  A fully pinned system (k = d) is
    compiled into a degenerate context whose only lattice point is the
    origin; release operations then return their input unchanged.
    """
    reduced, k = full_rank_reduce(cs)
    d = cs.dimension
    snf = smith_normal_form(reduced)
    if k == d:
        chain = ChainContext(
            vmat=np.eye(d, dtype=np.int64),
            vinv=np.eye(d, dtype=np.int64),
            k=k,
            d=d,
            incidence=np.array(reduced.to_rows(), dtype=np.int64).reshape(k, d),
        )
        return MechanismContext(
            constraints=cs, incidence=reduced, snf=snf, basis=None,
            k=k, d=d, tail_k=float("nan"), chain=chain,
        )
    basis = lattice_basis(snf)
    vmat = np.array(snf.v.to_rows(), dtype=np.int64)
    vinv = np.array(snf.v_inv.to_rows(), dtype=np.int64)
    incidence = np.array(reduced.to_rows(), dtype=np.int64).reshape(k, d)
    chain = ChainContext(vmat=vmat, vinv=vinv, k=k, d=d, incidence=incidence)
    return MechanismContext(
        constraints=cs, incidence=reduced, snf=snf, basis=basis,
        k=k, d=d, tail_k=tail_constant_K(basis), chain=chain,
    )


def build_target(ctx: MechanismContext, spec: MechanismSpec) -> NoiseTarget:
    """Noise target for a spec; calibrates sigma for the Gaussian kind."""
    if spec.kind is NoiseKind.GAUSSIAN:
        sigma = gaussian_sigma(
            spec.epsilon, spec.delta, ctx.lattice_dim, ctx.tail_k, c=spec.sigma_constant
        )
        return NoiseTarget(kind=spec.kind, sigma=sigma)
    return NoiseTarget(kind=spec.kind, epsilon=spec.epsilon)


def _resolve_run(ctx: MechanismContext, spec: MechanismSpec):
    cfg = spec.sampler_cfg
    if cfg is None:
        raise ConfigInvalid("mechanism spec carries no sampler configuration")
    ps = spec.proposal
    if ps is None:
        from .sampler import DEFAULT_PROPOSAL_RATIO

        ps = ProposalSpec.uniform(DEFAULT_PROPOSAL_RATIO, ctx.lattice_dim)
    return cfg, ps


def _diagnostics(ctx, spec, cfg, target):
    diag = {
        "seed": cfg.seed,
        "nsim": cfg.nsim,
        "burn_in": cfg.burn_in,
        "thin": cfg.thin,
        "kind": spec.kind.value,
        "epsilon": spec.epsilon,
        "delta": spec.delta,
        "lattice_dim": ctx.lattice_dim,
        "version": __version__,
    }
    if spec.kind is NoiseKind.GAUSSIAN:
        diag["sigma"] = target.sigma
        diag["sigma_constant"] = (
            spec.sigma_constant
            if spec.sigma_constant is not None
            else calibration_constant(ctx.lattice_dim, ctx.tail_k)
        )
    return diag


def privatize(ctx: MechanismContext, x: Histogram, spec: MechanismSpec, rng=None) -> Release:
    """Add one lattice noise draw to the histogram.

    The final retained chain draw is used.  Margins of the output equal the
    margins of the input exactly; this is asserted, not assumed.
    """
    if len(x) != ctx.d:
        raise ConfigInvalid(f"histogram length {len(x)} != dimension {ctx.d}")
    if ctx.degenerate:
        noise = np.zeros(ctx.d, dtype=np.int64)
        diag = {"degenerate": True, "version": __version__}
        return Release(
            output=tuple(x.values),
            noise=tuple(int(v) for v in noise),
            budget_spent=(spec.epsilon, spec.delta),
            diagnostics=diag,
        )
    cfg, ps = _resolve_run(ctx, spec)
    target = build_target(ctx, spec)
    draws = run_chain(cfg, target, ps, ctx.chain, rng=rng)
    noise = draws[-1]
    output = tuple(int(v) + int(n) for v, n in zip(x.values, noise))
    if margins(ctx.constraints, output) != margins(ctx.constraints, x):
        raise AssertionError("lattice noise failed to preserve margins")
    return Release(
        output=output,
        noise=tuple(int(n) for n in noise),
        budget_spent=(spec.epsilon, spec.delta),
        diagnostics=_diagnostics(ctx, spec, cfg, target),
    )


def noise_replicates(ctx: MechanismContext, spec: MechanismSpec, count: int, rng=None) -> np.ndarray:
    """`count` thinned, post-burn-in noise vectors from one long chain."""
    if count < 1:
        raise ConfigInvalid("count must be >= 1")
    if ctx.degenerate:
        return np.zeros((count, ctx.d), dtype=np.int64)
    cfg, ps = _resolve_run(ctx, spec)
    cfg = ChainConfig(
        nsim=cfg.burn_in + count * cfg.thin,
        burn_in=cfg.burn_in,
        thin=cfg.thin,
        seed=cfg.seed,
        init=cfg.init,
        init_state=cfg.init_state,
    )
    target = build_target(ctx, spec)
    return run_chain(cfg, target, ps, ctx.chain, rng=rng)

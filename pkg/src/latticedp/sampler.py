"""Invariant-respecting Metropolis chain over the constraint lattice.

Proposals are built coordinate-wise in the reduced coordinate system (the
first k coordinates stay pinned at zero, so every move maps to a lattice
vector and margins are preserved by construction), then accepted or
rejected in a single Metropolis test per sweep.

`metropolis_step` is the single-step reference implementation;
`run_chain` drives the compiled kernel and is what everything
performance-sensitive goes through.  Both consume random draws in the same
order, so they produce identical trajectories from identical generator
states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigInvalid
from .noise import DoubleGeometric, NoiseKind, NoiseTarget, log_target, sample_double_geometric

INIT_PROPOSAL = "proposal"
INIT_ZERO = "zero"
INIT_EXPLICIT = "explicit"

DEFAULT_THIN = 10_000
DEFAULT_PROPOSAL_RATIO = math.exp(-1.0)


def default_burn_in(kind: NoiseKind) -> int:
    """Burn-in presets: the l2 target mixes an order of magnitude slower."""
    return 1_000_000 if kind is NoiseKind.LAPLACE_L2 else 100_000


@dataclass(frozen=True)
class ChainContext:
    """Coordinate system shared by every chain on one constraint lattice."""

    vmat: np.ndarray
    vinv: np.ndarray
    k: int
    d: int
    incidence: np.ndarray

    @property
    def lattice_dim(self) -> int:
        return self.d - self.k


@dataclass(frozen=True)
class ProposalSpec:
    """Per-free-coordinate double geometric jump distributions."""

    etas: tuple

    @staticmethod
    def uniform(a: float, m: int) -> "ProposalSpec":
        return ProposalSpec(tuple(DoubleGeometric(a) for _ in range(m)))

    def ratios(self) -> np.ndarray:
        return np.array([eta.a for eta in self.etas], dtype=np.float64)


@dataclass
class ChainState:
    v: np.ndarray
    log_density: float
    step_index: int = 0

    def z(self, ctx: ChainContext) -> np.ndarray:
        return ctx.vmat @ self.v


@dataclass(frozen=True)
class ChainConfig:
    nsim: int
    burn_in: int = 0
    thin: int = 1
    seed: int = None
    init: str = INIT_PROPOSAL
    init_state: tuple = None

    def __post_init__(self):
        if self.nsim < 1 or self.burn_in < 0 or self.thin < 1:
            raise ConfigInvalid("need nsim >= 1, burn_in >= 0, thin >= 1")
        if self.burn_in + self.thin > self.nsim:
            raise ConfigInvalid(
                f"nsim={self.nsim} leaves no retained sample after "
                f"burn_in={self.burn_in} at thin={self.thin}"
            )
        if self.init not in (INIT_PROPOSAL, INIT_ZERO, INIT_EXPLICIT):
            raise ConfigInvalid(f"unknown init '{self.init}'")
        if self.init == INIT_EXPLICIT and self.init_state is None:
            raise ConfigInvalid("explicit init needs init_state")

    @property
    def keep(self) -> int:
        return (self.nsim - self.burn_in) // self.thin

    def rng(self):
        return np.random.default_rng(self.seed)


def _validate_proposal(ps: ProposalSpec, ctx: ChainContext):
    if len(ps.etas) != ctx.lattice_dim:
        raise ConfigInvalid(
            f"proposal has {len(ps.etas)} coordinates, lattice has {ctx.lattice_dim}"
        )


def initial_state(cfg: ChainConfig, target: NoiseTarget, ps: ProposalSpec, ctx: ChainContext, rng) -> ChainState:
    """Draw the starting reduced coordinates per the configured pi_0."""
    v = np.zeros(ctx.d, dtype=np.int64)
    if cfg.init == INIT_PROPOSAL:
        for j in range(ctx.k, ctx.d):
            v[j] = sample_double_geometric(ps.etas[j - ctx.k], rng)
    elif cfg.init == INIT_EXPLICIT:
        given = np.asarray(cfg.init_state, dtype=np.int64)
        if given.shape != (ctx.d,):
            raise ConfigInvalid("init_state must have length d")
        if np.any(given[: ctx.k] != 0):
            raise ConfigInvalid("init_state must be zero on the pinned coordinates")
        v[:] = given
    return ChainState(v=v, log_density=log_target(target, ctx.vmat @ v), step_index=0)


def propose_jump(ps: ProposalSpec, ctx: ChainContext, rng) -> np.ndarray:
    """One jump u = V e with the pinned coordinates of e forced to zero.

    The constraint rows annihilate every column of V past k, so A u = 0
    holds identically - no tolerance involved.
    """
    e = np.zeros(ctx.d, dtype=np.int64)
    for j in range(ctx.k, ctx.d):
        e[j] = sample_double_geometric(ps.etas[j - ctx.k], rng)
    return ctx.vmat @ e


def metropolis_step(state: ChainState, target: NoiseTarget, ps: ProposalSpec, ctx: ChainContext, rng) -> ChainState:
    """One Gibbs-swept proposal and a single shared accept/reject."""
    _validate_proposal(ps, ctx)
    e = np.zeros(ctx.d, dtype=np.int64)
    for j in range(ctx.k, ctx.d):
        e[j] = sample_double_geometric(ps.etas[j - ctx.k], rng)
    v_star = state.v + e
    lq_star = log_target(target, ctx.vmat @ v_star)
    r = rng.random()
    dlq = lq_star - state.log_density
    if dlq >= 0.0 or r <= math.exp(dlq):
        return ChainState(v=v_star, log_density=lq_star, step_index=state.step_index + 1)
    return ChainState(v=state.v, log_density=state.log_density, step_index=state.step_index + 1)


def _kernel_args(target: NoiseTarget, ctx: ChainContext):
    kind = {
        NoiseKind.LAPLACE_L1: _kernels.KIND_L1,
        NoiseKind.LAPLACE_L2: _kernels.KIND_L2,
        NoiseKind.GAUSSIAN: _kernels.KIND_GAUSS,
    }[target.kind]
    center = np.zeros(ctx.d, dtype=np.int64)
    if target.kind is NoiseKind.GAUSSIAN and target.center is not None:
        center[:] = np.asarray(target.center, dtype=np.int64)
    return kind, target.scale, center


def run_chain(cfg: ChainConfig, target: NoiseTarget, ps: ProposalSpec, ctx: ChainContext, rng=None) -> np.ndarray:
    """Post-burn-in, thinned lattice points from one chain.

    Returns an array of shape (cfg.keep, d); every row satisfies the
    constraint system exactly.  Reproducible from cfg.seed when no explicit
    generator is passed.
    """
    if ctx.lattice_dim == 0:
        return np.zeros((cfg.keep, ctx.d), dtype=np.int64)
    _validate_proposal(ps, ctx)
    if rng is None:
        rng = cfg.rng()
    state = initial_state(cfg, target, ps, ctx, rng)
    kind, scale, center = _kernel_args(target, ctx)
    out = np.empty((cfg.keep, ctx.d), dtype=np.int64)
    _kernels.chain_collect(
        rng, ctx.vmat, ctx.k, kind, scale, center, ps.ratios(),
        cfg.nsim, cfg.burn_in, cfg.thin, state.v, out,
    )
    return out


def advance(state: ChainState, target: NoiseTarget, ps: ProposalSpec, ctx: ChainContext, nsteps: int, rng) -> ChainState:
    """Kernel-backed fast-forward of a chain state by nsteps sweeps."""
    _validate_proposal(ps, ctx)
    kind, scale, center = _kernel_args(target, ctx)
    v = state.v.copy()
    _kernels.chain_advance(rng, ctx.vmat, ctx.k, kind, scale, center, ps.ratios(), nsteps, v)
    return ChainState(
        v=v,
        log_density=log_target(target, ctx.vmat @ v),
        step_index=state.step_index + nsteps,
    )

"""Lagged maximal couplings, meeting times, TV upper bounds, and PSRF.

Two chains with the same kernel are run at lag L under a per-coordinate
maximal coupling of their proposals and a shared acceptance uniform.  The
first index at which the lagged pair coincides bounds how far the chain at
any earlier time can be from its target: averaging
max(0, ceil((tau - L - l) / L)) over replicate meetings estimates an upper
bound on the total variation distance at time l.

The potential scale reduction factor across independent chains is kept as a
secondary mixing diagnostic.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .errors import InsufficientChains, MeetingTimeout, RejectionLimit
from .noise import NoiseTarget, log_target, sample_double_geometric
from .sampler import (
    ChainConfig,
    ChainContext,
    ChainState,
    ProposalSpec,
    _kernel_args,
    _validate_proposal,
    initial_state,
)

DEFAULT_MEETING_CAP = 50_000_000


def thread_count() -> int:
    """Parallel fan-out width, capped by LATTICE_DP_THREADS."""
    cap = os.environ.get("LATTICE_DP_THREADS", "").strip()
    avail = os.cpu_count() or 1
    if cap:
        try:
            return max(1, min(int(cap), avail))
        except ValueError:
            pass
    return avail


@dataclass
class CoupledState:
    leader: ChainState
    follower: ChainState
    lag: int
    met: bool = False


@dataclass(frozen=True)
class MeetingTimeSample:
    tau: int
    lag: int


@dataclass(frozen=True)
class TvBoundCurve:
    lag: int
    times: tuple
    bounds: tuple
    replicates: int

    def rows(self):
        return [(l, b, self.replicates) for l, b in zip(self.times, self.bounds)]

    def to_json(self) -> str:
        import json

        return json.dumps(
            {
                "lag": self.lag,
                "replicates": self.replicates,
                "times": list(self.times),
                "bounds": list(self.bounds),
            },
            indent=2,
        )


def coupled_step(cs: CoupledState, target: NoiseTarget, ps: ProposalSpec, ctx: ChainContext, rng) -> CoupledState:
    """Reference single step of the joint kernel (mirrors the compiled path).

    Per free coordinate: the leader proposes; the follower copies that
    coordinate when the maximal-coupling test passes, otherwise it
    rejection-samples from the residual of its own proposal.  One uniform
    then drives both Metropolis tests.  Once the states coincide the copy
    branch always fires and the shared test keeps them glued.
    """
    _validate_proposal(ps, ctx)
    v = cs.leader.v
    w = cs.follower.v
    ev = np.zeros(ctx.d, dtype=np.int64)
    ew = np.zeros(ctx.d, dtype=np.int64)
    pow_ratio = _kernels._pow_ratio
    for j in range(ctx.k, ctx.d):
        eta = ps.etas[j - ctx.k]
        a = eta.a
        e = sample_double_geometric(eta, rng)
        vstar_j = v[j] + e
        s = rng.random()
        if s * pow_ratio(a, abs(e)) <= pow_ratio(a, abs(vstar_j - w[j])):
            wstar_j = vstar_j
        else:
            tries = 0
            while True:
                tries += 1
                if tries > _kernels._REJECT_CAP:
                    raise RejectionLimit(f"residual sampler stuck at coordinate {j}")
                et = sample_double_geometric(eta, rng)
                st = rng.random()
                wt = w[j] + et
                if st * pow_ratio(a, abs(et)) > pow_ratio(a, abs(wt - v[j])):
                    wstar_j = wt
                    break
        ev[j] = e
        ew[j] = wstar_j - w[j]
    r = rng.random()
    v_star = v + ev
    w_star = w + ew
    lq_v = log_target(target, ctx.vmat @ v_star)
    lq_w = log_target(target, ctx.vmat @ w_star)
    dv = lq_v - cs.leader.log_density
    dw = lq_w - cs.follower.log_density
    leader = cs.leader
    follower = cs.follower
    if dv >= 0.0 or r <= math.exp(dv):
        leader = ChainState(v=v_star, log_density=lq_v, step_index=leader.step_index + 1)
    else:
        leader = replace(leader, step_index=leader.step_index + 1)
    if dw >= 0.0 or r <= math.exp(dw):
        follower = ChainState(v=w_star, log_density=lq_w, step_index=follower.step_index + 1)
    else:
        follower = replace(follower, step_index=follower.step_index + 1)
    met = bool(np.array_equal(leader.v, follower.v))
    return CoupledState(leader=leader, follower=follower, lag=cs.lag, met=cs.met or met)


def sample_meeting_time(lag: int, cfg: ChainConfig, target: NoiseTarget, ps: ProposalSpec,
                        ctx: ChainContext, rng=None, cap: int = DEFAULT_MEETING_CAP) -> MeetingTimeSample:
    """First index l > lag at which the lagged pair coincides.

    The leader is advanced `lag` single-kernel sweeps from pi_0, the
    follower starts fresh from pi_0, and the pair then evolves jointly.
    Degenerate lattices meet immediately at lag + 1.
    """
    if lag < 1:
        raise ValueError("lag must be >= 1")
    if rng is None:
        rng = cfg.rng()
    if ctx.lattice_dim == 0:
        return MeetingTimeSample(tau=lag + 1, lag=lag)
    _validate_proposal(ps, ctx)
    v = initial_state(cfg, target, ps, ctx, rng).v
    w = initial_state(cfg, target, ps, ctx, rng).v
    kind, scale, center = _kernel_args(target, ctx)
    tau = _kernels.meeting_time(
        rng, ctx.vmat, ctx.k, kind, scale, center, ps.ratios(), lag, cap, v, w
    )
    if tau == -1:
        raise MeetingTimeout(f"no meeting within {cap} sweeps at lag {lag}", steps=cap)
    if tau == -2:
        raise RejectionLimit("residual sampler exceeded its attempt cap")
    return MeetingTimeSample(tau=int(tau), lag=lag)


def sample_meeting_times(lag: int, cfg: ChainConfig, target: NoiseTarget, ps: ProposalSpec,
                         ctx: ChainContext, replicates: int, cap: int = DEFAULT_MEETING_CAP,
                         on_timeout: str = "raise"):
    """Independent replicate meetings, fanned out across threads.

    Replicate i runs on a child stream spawned from cfg.seed, so results do
    not depend on the thread schedule.  on_timeout='collect' records a
    timeout as tau=None instead of raising, preserving partial results.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    seeds = np.random.SeedSequence(cfg.seed).spawn(replicates)

    def one(i):
        rng = np.random.default_rng(seeds[i])
        try:
            return sample_meeting_time(lag, cfg, target, ps, ctx, rng=rng, cap=cap)
        except MeetingTimeout:
            if on_timeout == "collect":
                return None
            raise

    workers = min(thread_count(), replicates)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(replicates)))
    else:
        results = [one(i) for i in range(replicates)]
    return results


def tv_bound_curve(taus, times) -> TvBoundCurve:
    """Empirical mean of max(0, ceil((tau - L - l) / L)) at each time l."""
    taus = list(taus)
    if not taus:
        raise ValueError("need at least one meeting time")
    lag = taus[0].lag
    if any(t.lag != lag for t in taus):
        raise ValueError("meeting times mix different lags")
    bounds = []
    for l in times:
        total = 0
        for t in taus:
            excess = t.tau - lag - l
            total += max(0, -(-excess // lag))
        bounds.append(total / len(taus))
    return TvBoundCurve(lag=lag, times=tuple(int(l) for l in times), bounds=tuple(bounds), replicates=len(taus))


def psrf(chains):
    """Potential scale reduction factor across chains, per coordinate.

    Accepts a list of equal-length traces, each (n,) or (n, d).  Uses
    sqrt((W + B/n) / W) with W the mean within-chain variance and B/n the
    variance of the chain means, so identical chains score exactly 1.
    """
    if len(chains) < 2:
        raise InsufficientChains("need at least two chains")
    arrays = [np.asarray(c, dtype=np.float64) for c in chains]
    scalar_input = arrays[0].ndim == 1
    arrays = [a.reshape(a.shape[0], -1) for a in arrays]
    n = arrays[0].shape[0]
    if any(a.shape != arrays[0].shape for a in arrays):
        raise ValueError("chains must share a common shape")
    if n < 2:
        raise InsufficientChains("chains must have length >= 2")
    stacked = np.stack(arrays)  # (m, n, d)
    means = stacked.mean(axis=1)  # (m, d)
    within = stacked.var(axis=1, ddof=1).mean(axis=0)  # (d,)
    between = means.var(axis=0, ddof=1)  # (d,)
    out = np.empty_like(within)
    for i in range(out.shape[0]):
        if within[i] == 0.0:
            out[i] = 1.0 if between[i] == 0.0 else np.inf
        else:
            out[i] = math.sqrt((within[i] + between[i]) / within[i])
    return float(out[0]) if scalar_input and out.shape[0] == 1 else out

"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion
lines.  Statistical gates use frozen seeds; tolerances are stated inline
next to each assertion.
"""

import json
import math

import numpy as np
import pytest
from scipy import stats

import latticedp as ldp
from latticedp import _kernels
from latticedp.cli import main as cli_main
from latticedp.constraints import partition_constraints, table_margin_constraints
from latticedp.coupling import (
    CoupledState,
    coupled_step,
    psrf,
    sample_meeting_times,
    tv_bound_curve,
)
from latticedp.errors import RankDeficient
from latticedp.intlinalg import IntMatrix, determinant, lattice_basis, smith_normal_form
from latticedp.mechanism import MechanismSpec, compile_constraints, noise_replicates, privatize
from latticedp.noise import NoiseKind, NoiseTarget, gaussian_sigma
from latticedp.sampler import ChainConfig, ProposalSpec, initial_state, run_chain

from conftest import CHILDREN_CELLS, dgeom_pmf

pytestmark = pytest.mark.acceptance

A1 = math.exp(-1.0)
L1_TARGET = NoiseTarget(kind=NoiseKind.LAPLACE_L1, epsilon=0.25)


def report(number, name, detail=""):
    suffix = f"  [{detail}]" if detail else ""
    print(f"\nACCEPTANCE {number} ({name}): PASS{suffix}")


def _mech_spec(cs, ctx, kind, *, epsilon=0.25, delta=0.0, burn_in, thin, seed, a):
    return MechanismSpec(
        constraints=cs,
        kind=kind,
        epsilon=epsilon,
        delta=delta,
        sampler_cfg=ChainConfig(nsim=burn_in + thin, burn_in=burn_in, thin=thin, seed=seed),
        proposal=ProposalSpec.uniform(a, ctx.lattice_dim),
    )


# ----------------------------------------------------------- criterion 1

def test_criterion_1_exact_invariance():
    """1000 noise draws on the 4x4 table and on a state partition: every
    constrained margin is exactly zero (integer equality, no tolerance)."""
    configs = [
        ("4x4 table", table_margin_constraints(4, 4)),
        ("state partition", partition_constraints([6, 4])),
    ]
    for name, cs in configs:
        ctx = compile_constraints(cs)
        spec = _mech_spec(cs, ctx, NoiseKind.LAPLACE_L1,
                          burn_in=100_000, thin=1000, seed=101, a=A1)
        draws = noise_replicates(ctx, spec, 1000)
        assert draws.shape[0] == 1000
        products = ctx.chain.incidence @ draws.T
        assert not products.any(), f"{name}: nonzero margin in noise"
    report(1, "exact invariance", "2 configurations x 1000 draws, all margins 0")


# ----------------------------------------------------------- criterion 2

def test_criterion_2_snf_on_random_binary_matrices():
    """500 random {0,1} full-row-rank systems (k <= 6, d <= 12): all Smith
    identities hold exactly."""
    rng = np.random.default_rng(202)
    checked = 0
    while checked < 500:
        k = int(rng.integers(1, 7))
        d = int(rng.integers(k, 13))
        a = IntMatrix.from_rows(rng.integers(0, 2, size=(k, d)).tolist())
        try:
            dec = smith_normal_form(a)
        except RankDeficient:
            continue
        assert dec.u.mul(dec.a).mul(dec.v) == dec.d_mat
        assert abs(determinant(dec.u)) == 1
        assert abs(determinant(dec.v)) == 1
        assert dec.d_mat.is_diagonal()
        factors = dec.invariant_factors()
        assert all(f != 0 for f in factors)
        assert all(hi % lo == 0 for lo, hi in zip(factors, factors[1:]))
        if k < d:
            basis = lattice_basis(dec)
            assert all(x == 0 for x in dec.a.mul(basis.basis).entries)
        checked += 1
    report(2, "Smith normal form correctness", "500 random systems, exact")


# ----------------------------------------------------------- criterion 3

def test_criterion_3_one_dimensional_oracle(ctx_d2):
    """d=2 sum lattice, l1 target at eps=0.25: the lattice coefficient is
    exactly double geometric with ratio e^{-0.5}; the chain's empirical law
    over 1e6 post-burn-in sweeps must be within TV 0.02 of it."""
    cfg = ChainConfig(nsim=1_100_000, burn_in=100_000, thin=1, seed=303)
    ps = ProposalSpec.uniform(A1, 1)
    draws = run_chain(cfg, L1_TARGET, ps, ctx_d2.chain)
    sign = 1 if ctx_d2.basis.basis[0, 0] > 0 else -1
    coef = sign * draws[:, 0]
    vals, counts = np.unique(coef, return_counts=True)
    emp = dict(zip(vals.tolist(), (counts / counts.sum()).tolist()))
    ratio = math.exp(-0.5)
    support = set(emp) | set(range(-80, 81))
    tv = 0.5 * sum(abs(emp.get(t, 0.0) - dgeom_pmf(t, ratio)) for t in support)
    assert tv < 0.02, f"TV {tv} >= 0.02"
    report(3, "1-D oracle equivalence", f"TV = {tv:.4f} < 0.02")


# ----------------------------------------------------------- criterion 4

def _unbiasedness(cs, kind, a, burn_in, seed, thin=10_000):
    ctx = compile_constraints(cs)
    spec = _mech_spec(cs, ctx, kind, burn_in=burn_in, thin=thin, seed=seed, a=a)
    draws = noise_replicates(ctx, spec, 1000).astype(float)
    mean = draws.mean(axis=0)
    se = draws.std(axis=0, ddof=1) / math.sqrt(draws.shape[0])
    ratio = np.abs(mean) / np.maximum(se, 1e-12)
    assert np.all(ratio <= 4.0), f"max |mean|/SE = {ratio.max():.2f}"
    return float(ratio.max())


def test_criterion_4_unbiasedness():
    """Per-coordinate mean of 1000 thinned replicates within 4 standard
    errors of zero, l1 and l2 targets, on the table and a 10-county state."""
    table = table_margin_constraints(4, 4)
    county = partition_constraints([10], labels=("state_total",))
    worst = []
    worst.append(_unbiasedness(table, NoiseKind.LAPLACE_L1, A1, 100_000, 404))
    worst.append(_unbiasedness(table, NoiseKind.LAPLACE_L2, math.exp(-2.0), 1_000_000, 405))
    worst.append(_unbiasedness(county, NoiseKind.LAPLACE_L1, A1, 100_000, 406))
    worst.append(_unbiasedness(county, NoiseKind.LAPLACE_L2, math.exp(-2.0), 1_000_000, 407))
    report(4, "unbiasedness", f"max |mean|/SE over 4 configs = {max(worst):.2f} <= 4")


# ----------------------------------------------------------- criterion 5

def _laplace_bound(K, m, eps):
    return lambda t: K * t**m * math.exp(-eps * t)


def _bound_threshold(bound, start, limit=1_000_000):
    t = max(int(start), 1)
    while bound(t) >= 1.0 and t < limit:
        t += 1
    return t


def test_criterion_5_tail_domination(ctx_d2):
    """Survival of ||z||_2 sits below K t^m e^{-eps t} everywhere past the
    threshold where the bound drops under 1 (documented, computed here)."""
    # d=2: the distribution is exactly known; check against a fresh run.
    K2 = ldp.tail_constant_K(ctx_d2.basis)
    bound2 = _laplace_bound(K2, 1, 0.25)
    t0 = _bound_threshold(bound2, 1)
    assert t0 == 23  # 16/sqrt(2) * t * e^{-t/4} < 1 first holds at t = 23
    cfg = ChainConfig(nsim=1_100_000, burn_in=100_000, thin=1, seed=505)
    draws = run_chain(cfg, L1_TARGET, ProposalSpec.uniform(A1, 1), ctx_d2.chain)
    norms = np.sqrt((draws.astype(float) ** 2).sum(axis=1))
    tmax = int(norms.max()) + 2
    for t in range(t0, tmax + 1):
        sf = float((norms >= t).mean())
        assert sf <= bound2(t), f"d=2: SF({t})={sf} above bound {bound2(t)}"

    # 4x4 table: empirical dominance at the 95th/99th percentile radii and
    # past the threshold.
    cs = table_margin_constraints(4, 4)
    ctx = compile_constraints(cs)
    spec = _mech_spec(cs, ctx, NoiseKind.LAPLACE_L1, burn_in=100_000,
                      thin=1000, seed=506, a=A1)
    z = noise_replicates(ctx, spec, 1000).astype(float)
    norms44 = np.sqrt((z**2).sum(axis=1))
    K44 = ctx.tail_k
    bound44 = _laplace_bound(K44, ctx.lattice_dim, 0.25)
    for q in (95, 99):
        t = float(np.percentile(norms44, q))
        sf = float((norms44 >= t).mean())
        assert sf <= bound44(t), f"4x4: SF at p{q} radius above bound"
    t0_44 = _bound_threshold(bound44, ctx.lattice_dim / 0.25)
    for t in range(t0_44, t0_44 + 50):
        assert float((norms44 >= t).mean()) <= bound44(t)
    report(5, "tail domination", f"thresholds t0: d=2 -> {t0}, 4x4 -> {t0_44}")


# ----------------------------------------------------------- criterion 6

def test_criterion_6_tv_convergence_at_desk_scale():
    """4x4 table, l1 target, eps=0.25, a=e^{-1}: with 200 coupled replicates
    the estimated TV upper bound is below 0.05 by l = 3e4, at L = 1 and a
    larger lag."""
    cs = table_margin_constraints(4, 4)
    ctx = compile_constraints(cs)
    ps = ProposalSpec.uniform(A1, ctx.lattice_dim)
    cfg = ChainConfig(nsim=2, burn_in=0, thin=1, seed=606)
    details = []
    for lag in (1, 8):
        mts = sample_meeting_times(lag, cfg, L1_TARGET, ps, ctx.chain, replicates=200)
        curve = tv_bound_curve(mts, [0, 10_000, 30_000])
        assert curve.bounds[-1] < 0.05, f"L={lag}: bound {curve.bounds[-1]} at l=3e4"
        taus = [m.tau for m in mts]
        details.append(f"L={lag}: bound@3e4={curve.bounds[-1]:.4f} max tau={max(taus)}")
    report(6, "TV convergence", "; ".join(details))


# ----------------------------------------------------------- criterion 7

def test_criterion_7_coupling_faithfulness(ctx_d2):
    """Leader of the coupled kernel visits states with the single-kernel law
    (two-sample chi-square over 1e5 steps), and meeting is absorbing."""
    nsteps = 100_000
    rng = np.random.default_rng(707)
    v = np.zeros(2, dtype=np.int64)
    w = np.zeros(2, dtype=np.int64)
    out = np.empty((nsteps, 2), dtype=np.int64)
    avec = np.array([A1])
    center = np.zeros(2, dtype=np.int64)
    tau = _kernels.coupled_trace(
        rng, ctx_d2.chain.vmat, 1, _kernels.KIND_L1, 0.25, center, avec, 1, nsteps, v, w, out
    )
    assert tau > 0
    leader = out[20_000::20, 0]

    cfg = ChainConfig(nsim=120_000, burn_in=20_000, thin=20, seed=708)
    single = run_chain(cfg, L1_TARGET, ProposalSpec.uniform(A1, 1), ctx_d2.chain)[:, 0]
    edges = np.arange(-10.5, 11.5)
    obs1, _ = np.histogram(leader, bins=edges)
    obs2, _ = np.histogram(single, bins=edges)
    keep = (obs1 + obs2) >= 10
    o1 = np.append(obs1[keep], leader.size - obs1[keep].sum())
    o2 = np.append(obs2[keep], single.size - obs2[keep].sum())
    _, p, _, _ = stats.chi2_contingency(np.vstack([o1, o2]))
    assert p > 0.01, f"chi-square p = {p}"

    # Absorbing: once met, the pair never separates (checked per replicate).
    ps = ProposalSpec.uniform(A1, 1)
    for seed in range(25):
        rng = np.random.default_rng(7000 + seed)
        cfg1 = ChainConfig(nsim=1, init="proposal")
        cs_state = CoupledState(
            leader=initial_state(cfg1, L1_TARGET, ps, ctx_d2.chain, rng),
            follower=initial_state(cfg1, L1_TARGET, ps, ctx_d2.chain, rng),
            lag=1,
        )
        guard = 0
        while not cs_state.met:
            cs_state = coupled_step(cs_state, L1_TARGET, ps, ctx_d2.chain, rng)
            guard += 1
            assert guard < 200_000
        for _ in range(100):
            cs_state = coupled_step(cs_state, L1_TARGET, ps, ctx_d2.chain, rng)
            assert np.array_equal(cs_state.leader.v, cs_state.follower.v)
    report(7, "coupling faithfulness", f"chi-square p = {p:.3f}; absorbing in 25/25")


# ----------------------------------------------------------- criterion 8

def test_criterion_8_psrf_below_1_01():
    """Four independent chains on the 4x4 table after the default burn-in
    reach max-coordinate PSRF < 1.01."""
    cs = table_margin_constraints(4, 4)
    ctx = compile_constraints(cs)
    ps = ProposalSpec.uniform(A1, ctx.lattice_dim)
    traces = []
    for i in range(4):
        cfg = ChainConfig(nsim=200_000, burn_in=100_000, thin=1, seed=808 + i)
        traces.append(run_chain(cfg, L1_TARGET, ps, ctx.chain))
    stat = psrf(traces)
    assert np.max(stat) < 1.01, f"max PSRF {np.max(stat)}"
    report(8, "PSRF", f"max coordinate PSRF = {np.max(stat):.5f} < 1.01")


# ----------------------------------------------------------- criterion 9

def test_criterion_9_data_independent_noise(tmp_path):
    """Same seed, two different histograms: the released noise streams are
    byte-identical."""
    cs_conf = {"constraints": {"table": [4, 4]}, "norm": "l1", "epsilon": 0.25,
               "a": A1, "burn_in": 20_000, "thin": 500, "seed": 909}
    hist_a = tmp_path / "a.csv"
    hist_b = tmp_path / "b.csv"
    hist_a.write_text("".join(f"{v}\n" for v in CHILDREN_CELLS))
    hist_b.write_text("".join(f"{v}\n" for v in range(16)))
    noise_files = []
    for tag, hist in (("a", hist_a), ("b", hist_b)):
        conf = dict(cs_conf, data=str(hist), out=str(tmp_path / tag))
        cpath = tmp_path / f"{tag}.json"
        cpath.write_text(json.dumps(conf))
        assert cli_main(["privatize", "--config", str(cpath)]) == 0
        noise_files.append((tmp_path / tag / "noise.csv").read_bytes())
    assert noise_files[0] == noise_files[1]
    report(9, "data independence", "noise.csv byte-identical across inputs")


# ----------------------------------------------------------- criterion 10

def test_criterion_10_gaussian_mechanism():
    """Gaussian mechanism at (eps, delta) = (0.25, 1e-6) on the 4x4 table:
    sigma matches the documented calibration (regression lock), noise is
    unbiased, and the empirical tail sits under K t^m e^{-t^2/2sigma^2}."""
    cs = table_margin_constraints(4, 4)
    ctx = compile_constraints(cs)
    m = ctx.lattice_dim

    # Independent spell-out of K and sigma for this lattice.
    K_expected = 4.0 * 2.0**9 * (math.pi**4.5 / math.gamma(5.5)) / math.sqrt(4096)
    assert ctx.tail_k == pytest.approx(K_expected, rel=1e-12)
    c_expected = 3.0 * 9.0 * math.log(9.0)
    sigma_expected = math.sqrt(2.0 * c_expected * math.log(1e6)) / 0.25
    sigma = gaussian_sigma(0.25, 1e-6, m, ctx.tail_k)
    assert sigma == pytest.approx(sigma_expected, rel=1e-12)
    # Regression lock (implementation-defined value, not paper ground truth).
    assert sigma == pytest.approx(161.94873681290557, rel=1e-9)

    # Wide proposal tuned to the target scale: jump ratio exp(-2/sigma)
    # keeps the thinned draws effectively uncorrelated (pilot-checked).
    a = math.exp(-2.0 / sigma)
    spec = _mech_spec(cs, ctx, NoiseKind.GAUSSIAN, delta=1e-6,
                      burn_in=200_000, thin=200, seed=1010, a=a)
    draws = noise_replicates(ctx, spec, 1000).astype(float)
    mean = draws.mean(axis=0)
    se = draws.std(axis=0, ddof=1) / math.sqrt(draws.shape[0])
    ratio = np.abs(mean) / np.maximum(se, 1e-12)
    assert np.all(ratio <= 4.0), f"max |mean|/SE = {ratio.max():.2f}"

    norms = np.sqrt((draws**2).sum(axis=1))
    bound = lambda t: ctx.tail_k * t**m * math.exp(-t * t / (2 * sigma * sigma))
    t0 = int(sigma)
    while bound(t0) >= 1.0:
        t0 += 1
    for q in (95, 99):
        t = float(np.percentile(norms, q))
        assert float((norms >= t).mean()) <= bound(t)
    for t in range(t0, t0 + 200, 10):
        assert float((norms >= t).mean()) <= bound(t)
    assert norms.max() < t0  # draws concentrate far inside the threshold
    report(
        10, "Gaussian mechanism",
        f"sigma = {sigma:.3f}, max |mean|/SE = {ratio.max():.2f}, tail threshold t0 = {t0}",
    )

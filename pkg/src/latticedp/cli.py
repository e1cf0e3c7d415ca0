"""Command-line front end.

Subcommands: snf, privatize, replicates, couple, psrf.  Inputs are CSV
(matrices, histograms, county records) and JSON (constraint sets, run
configs); outputs are CSV files suitable for tables/plots plus a JSON
manifest carrying every parameter needed to reproduce the run bit for bit.

Exit codes: 0 success, 2 config/parse error, 3 numeric/rank error,
4 diagnostics timeout.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .constraints import (
    ConstraintSet,
    Histogram,
    margins,
    partition_constraints,
    table_margin_constraints,
)
from .coupling import psrf as psrf_stat
from .coupling import sample_meeting_times, thread_count, tv_bound_curve
from .errors import (
    ConfigInvalid,
    EmptyLattice,
    LatticeDpError,
    MeetingTimeout,
    NegativePopulation,
    NotUnimodular,
    ParameterDomain,
    ParseError,
    RankDeficient,
)
from .intlinalg import IntMatrix, lattice_basis, smith_normal_form
from .mechanism import (
    MechanismSpec,
    build_target,
    compile_constraints,
    noise_replicates,
    privatize,
)
from .noise import NoiseKind
from .sampler import (
    DEFAULT_PROPOSAL_RATIO,
    DEFAULT_THIN,
    ChainConfig,
    ProposalSpec,
    default_burn_in,
    run_chain,
)

_NORMS = {"l1": NoiseKind.LAPLACE_L1, "l2": NoiseKind.LAPLACE_L2, "gauss": NoiseKind.GAUSSIAN}


# ---------------------------------------------------------------- file I/O

def read_int_matrix_csv(path) -> IntMatrix:
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = [c.strip() for c in line.split(",")]
            try:
                row = [int(c) for c in cells]
            except ValueError:
                raise ParseError(f"non-integer matrix entry in {path!r}", line=lineno)
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(f"ragged row in {path!r}", line=lineno)
            rows.append(row)
    if not rows:
        raise ParseError(f"empty matrix file {path!r}")
    return IntMatrix.from_rows(rows)


def read_histogram_csv(path) -> Histogram:
    values = []
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            for tok in line.replace(",", " ").split():
                try:
                    values.append(int(tok))
                except ValueError:
                    raise ParseError(f"non-integer histogram entry {tok!r}", line=lineno)
    if not values:
        raise ParseError(f"empty histogram file {path!r}")
    try:
        return Histogram(tuple(values))
    except ValueError as e:
        raise ParseError(str(e)) from e


def write_histogram_csv(path, values):
    with open(path, "w", newline="") as fh:
        for v in values:
            fh.write(f"{int(v)}\n")


def load_county_csv(path):
    """Group county populations by state, preserving file order.

    Expects a header `state,county,population`.  Returns a list of
    (state, county_names, Histogram) triples; an empty data section yields
    an empty list with a warning on stderr.
    """
    groups = []
    index = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"empty county file {path!r}")
        if [h.strip().lower() for h in header] != ["state", "county", "population"]:
            raise ParseError(f"expected header state,county,population in {path!r}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise ParseError(f"expected 3 fields in {path!r}", line=lineno)
            state, county, pop = (c.strip() for c in row)
            try:
                count = int(pop)
            except ValueError:
                raise ParseError(f"non-integer population {pop!r}", line=lineno)
            if count < 0:
                raise NegativePopulation(f"{state}/{county} has population {count}")
            if state not in index:
                index[state] = len(groups)
                groups.append((state, [], []))
            groups[index[state]][1].append(county)
            groups[index[state]][2].append(count)
    if not groups:
        print(f"warning: {path} contains no county records", file=sys.stderr)
    return [(state, names, Histogram(tuple(counts))) for state, names, counts in groups]


def _matrix_json(mat: IntMatrix):
    return mat.to_rows()


# ------------------------------------------------------------ config layer

def _load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as e:
        raise ParseError(f"cannot read config {path!r}: {e}") from e
    except json.JSONDecodeError as e:
        raise ParseError(f"config {path!r} is not valid JSON: {e}") from e


def _resolve_constraints(conf) -> ConstraintSet:
    spec = conf.get("constraints")
    if spec is None:
        raise ConfigInvalid("config missing 'constraints'")
    if isinstance(spec, dict) and "path" in spec:
        try:
            with open(spec["path"]) as fh:
                return ConstraintSet.from_json(fh.read())
        except OSError as e:
            raise ParseError(f"cannot read constraints {spec['path']!r}: {e}") from e
    if isinstance(spec, dict) and "table" in spec:
        r, c = spec["table"]
        return table_margin_constraints(int(r), int(c))
    if isinstance(spec, dict) and "partition" in spec:
        return partition_constraints([int(g) for g in spec["partition"]])
    raise ConfigInvalid("constraints must give 'path', 'table', or 'partition'")


def _overlay(conf: dict, args) -> dict:
    merged = dict(conf)
    for key, attr in (
        ("seed", "seed"), ("epsilon", "epsilon"), ("delta", "delta"),
        ("norm", "norm"), ("a", "a"), ("nsim", "nsim"), ("burn_in", "burn_in"),
        ("thin", "thin"), ("lag", "lag"), ("replicates", "replicates"),
        ("chains", "chains"), ("out", "out"),
    ):
        val = getattr(args, attr, None)
        if val is not None:
            merged[key] = val
    return merged


def _chain_config(conf, kind: NoiseKind) -> ChainConfig:
    burn_in = int(conf.get("burn_in", default_burn_in(kind)))
    thin = int(conf.get("thin", DEFAULT_THIN))
    nsim = conf.get("nsim")
    nsim = int(nsim) if nsim is not None else burn_in + thin
    seed = conf.get("seed")
    seed = int(seed) if seed is not None else None
    return ChainConfig(nsim=nsim, burn_in=burn_in, thin=thin, seed=seed)


def _mechanism_spec(conf, cs: ConstraintSet, lattice_dim: int) -> MechanismSpec:
    norm = conf.get("norm", "l1")
    if norm not in _NORMS:
        raise ConfigInvalid(f"unknown norm {norm!r} (expected l1, l2, or gauss)")
    kind = _NORMS[norm]
    epsilon = float(conf.get("epsilon", 0.25))
    delta = float(conf.get("delta", 0.0))
    cfg = _chain_config(conf, kind)
    a = float(conf.get("a", DEFAULT_PROPOSAL_RATIO))
    proposal = ProposalSpec.uniform(a, lattice_dim) if lattice_dim > 0 else ProposalSpec(())
    sigma_constant = conf.get("sigma_constant")
    return MechanismSpec(
        constraints=cs, kind=kind, epsilon=epsilon, delta=delta,
        sampler_cfg=cfg, proposal=proposal,
        sigma_constant=float(sigma_constant) if sigma_constant is not None else None,
    )


def _outdir(conf) -> str:
    out = conf.get("out", ".")
    os.makedirs(out, exist_ok=True)
    return out


def _manifest(path, conf, spec: MechanismSpec = None, extra=None):
    doc = {"version": __version__}
    doc.update({k: v for k, v in conf.items() if k != "out"})
    if spec is not None:
        doc["norm"] = spec.kind.value
        doc["epsilon"] = spec.epsilon
        doc["delta"] = spec.delta
        doc["seed"] = spec.sampler_cfg.seed
        doc["nsim"] = spec.sampler_cfg.nsim
        doc["burn_in"] = spec.sampler_cfg.burn_in
        doc["thin"] = spec.sampler_cfg.thin
        doc["a"] = spec.proposal.etas[0].a if spec.proposal.etas else None
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ------------------------------------------------------------- subcommands

def cmd_snf(args) -> int:
    mat = read_int_matrix_csv(args.matrix)
    dec = smith_normal_form(mat)
    try:
        basis = lattice_basis(dec)
        basis_rows = _matrix_json(basis.basis)
        gram = basis.gram_det
    except EmptyLattice:
        basis_rows = None
        gram = None
    doc = {
        "rank": dec.rank,
        "u": _matrix_json(dec.u),
        "d": _matrix_json(dec.d_mat),
        "v": _matrix_json(dec.v),
        "v_inv": _matrix_json(dec.v_inv),
        "basis": basis_rows,
        "gram_det": gram,
    }
    text = json.dumps(doc, indent=2)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "snf.json"), "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _privatize_one(cs, hist, conf, seed, label=None):
    ctx = compile_constraints(cs)
    local = dict(conf)
    if seed is not None:
        local["seed"] = seed
    spec = _mechanism_spec(local, cs, ctx.lattice_dim)
    release = privatize(ctx, hist, spec)
    if margins(cs, release.output) != margins(cs, hist):
        raise AssertionError(f"margin check failed for {label or 'histogram'}")
    return spec, release


def cmd_privatize(args) -> int:
    conf = _overlay(_load_config(args.config) if args.config else {}, args)
    out = _outdir(conf)
    data_path = conf.get("data")
    if data_path is None:
        raise ConfigInvalid("config missing 'data'")

    if _is_county_csv(data_path):
        return _privatize_counties(conf, data_path, out)

    cs = _resolve_constraints(conf)
    hist = read_histogram_csv(data_path)
    spec, release = _privatize_one(cs, hist, conf, conf.get("seed"))
    write_histogram_csv(os.path.join(out, "output.csv"), release.output)
    write_histogram_csv(os.path.join(out, "noise.csv"), release.noise)
    _manifest(
        os.path.join(out, "manifest.json"), conf, spec,
        extra={"diagnostics": release.diagnostics, "margins_ok": True},
    )
    return 0


def _is_county_csv(path) -> bool:
    try:
        with open(path, newline="") as fh:
            header = fh.readline()
    except OSError as e:
        raise ParseError(f"cannot read data {path!r}: {e}") from e
    return [h.strip().lower() for h in header.split(",")] == ["state", "county", "population"]


def _privatize_counties(conf, data_path, out) -> int:
    groups = load_county_csv(data_path)
    base_seed = conf.get("seed")
    seeds = np.random.SeedSequence(base_seed).generate_state(max(len(groups), 1)).tolist()

    def one(i):
        state, names, hist = groups[i]
        cs = partition_constraints([len(hist)], labels=(f"{state}_total",))
        spec, release = _privatize_one(cs, hist, conf, int(seeds[i]), label=state)
        return state, names, hist, spec, release

    workers = min(thread_count(), max(len(groups), 1))
    if workers > 1 and len(groups) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(len(groups))))
    else:
        results = [one(i) for i in range(len(groups))]

    summary = {}
    for state, names, hist, spec, release in results:
        with open(os.path.join(out, f"{state}_output.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["state", "county", "population"])
            for name, value in zip(names, release.output):
                writer.writerow([state, name, value])
        with open(os.path.join(out, f"{state}_noise.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["state", "county", "noise"])
            for name, value in zip(names, release.noise):
                writer.writerow([state, name, value])
        summary[state] = {
            "counties": len(names),
            "noise_sum": int(sum(release.noise)),
            "seed": spec.sampler_cfg.seed,
        }
    _manifest(os.path.join(out, "manifest.json"), conf, extra={"states": summary})
    return 0


def cmd_replicates(args) -> int:
    conf = _overlay(_load_config(args.config) if args.config else {}, args)
    out = _outdir(conf)
    cs = _resolve_constraints(conf)
    ctx = compile_constraints(cs)
    spec = _mechanism_spec(conf, cs, ctx.lattice_dim)
    count = int(conf.get("replicates", 1000))
    draws = noise_replicates(ctx, spec, count)
    with open(os.path.join(out, "noise_samples.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"coord_{i}" for i in range(ctx.d)])
        for row in draws:
            writer.writerow([int(v) for v in row])
    with open(os.path.join(out, "noise_summary.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["coordinate", "mean", "q1", "median", "q3", "min", "max"])
        for i in range(ctx.d):
            col = draws[:, i]
            q1, med, q3 = np.percentile(col, [25, 50, 75])
            writer.writerow([i, float(col.mean()), q1, med, q3, int(col.min()), int(col.max())])
    _manifest(
        os.path.join(out, "manifest.json"), conf, spec,
        extra={"replicates": count, "lattice_dim": ctx.lattice_dim},
    )
    return 0


def _l_grid(conf, lag):
    grid = conf.get("l_grid")
    if grid is not None:
        return [int(v) for v in grid]
    # Log-spaced default: enough resolution to see where the bound dies off.
    top = int(conf.get("l_max", 100_000))
    pts = sorted({0} | {int(round(10 ** (e / 8.0))) for e in range(0, int(8 * math.log10(top)) + 1)})
    return [p for p in pts if p <= top]


def cmd_couple(args) -> int:
    conf = _overlay(_load_config(args.config) if args.config else {}, args)
    out = _outdir(conf)
    cs = _resolve_constraints(conf)
    ctx = compile_constraints(cs)
    spec = _mechanism_spec(conf, cs, ctx.lattice_dim)
    target = build_target(ctx, spec)
    lags = conf.get("lags")
    if lags is None:
        lags = [int(conf.get("lag", 1))]
    replicates = int(conf.get("replicates", 200))
    cap = int(conf.get("meeting_cap", 50_000_000))
    timeouts = {}
    if ctx.lattice_dim == 0:
        # Fully pinned system: the sampler is constant at the origin, so the
        # chain sits at its target from step 0 and the distance is 0 at
        # every l.  Nothing to couple.
        for lag in lags:
            with open(os.path.join(out, f"tv_bound_L{lag}.csv"), "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["l", "bound", "replicates"])
                for l in _l_grid(conf, lag):
                    writer.writerow([l, 0.0, replicates])
        _manifest(
            os.path.join(out, "manifest.json"), conf, spec,
            extra={"lags": [int(l) for l in lags], "replicates": replicates,
                   "timeouts": {}, "degenerate": True},
        )
        return 0
    for lag in lags:
        results = sample_meeting_times(
            int(lag), spec.sampler_cfg, target, spec.proposal, ctx.chain,
            replicates, cap=cap, on_timeout="collect",
        )
        good = [r for r in results if r is not None]
        timeouts[int(lag)] = len(results) - len(good)
        rows = []
        curve = None
        if good:
            curve = tv_bound_curve(good, _l_grid(conf, lag))
            rows = curve.rows()
        path = os.path.join(out, f"tv_bound_L{lag}.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["l", "bound", "replicates"])
            for l, bound, reps in rows:
                writer.writerow([l, bound, reps])
        if curve is not None:
            with open(os.path.join(out, f"tv_bound_L{lag}.json"), "w") as fh:
                fh.write(curve.to_json() + "\n")
        with open(os.path.join(out, f"meeting_times_L{lag}.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["replicate", "tau", "lag"])
            for i, r in enumerate(results):
                writer.writerow([i, r.tau if r is not None else "", lag])
    _manifest(
        os.path.join(out, "manifest.json"), conf, spec,
        extra={"lags": [int(l) for l in lags], "replicates": replicates, "timeouts": timeouts},
    )
    if any(timeouts.values()):
        print(f"warning: {sum(timeouts.values())} replicate(s) timed out", file=sys.stderr)
        return 4
    return 0


def cmd_psrf(args) -> int:
    conf = _overlay(_load_config(args.config) if args.config else {}, args)
    out = _outdir(conf)
    cs = _resolve_constraints(conf)
    ctx = compile_constraints(cs)
    # PSRF wants dense post-burn-in traces: thin 1 and a long tail by default.
    local = dict(conf)
    local.setdefault("thin", 1)
    if local.get("nsim") is None:
        kind = _NORMS.get(local.get("norm", "l1"), NoiseKind.LAPLACE_L1)
        burn = int(local.get("burn_in", default_burn_in(kind)))
        local["nsim"] = burn + 100_000 * int(local["thin"])
    spec = _mechanism_spec(local, cs, ctx.lattice_dim)
    target = build_target(ctx, spec)
    nchains = int(local.get("chains", 4))
    cfg = spec.sampler_cfg
    seeds = np.random.SeedSequence(cfg.seed).spawn(nchains)

    def one(i):
        rng = np.random.default_rng(seeds[i])
        return run_chain(cfg, target, spec.proposal, ctx.chain, rng=rng)

    workers = min(thread_count(), nchains)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(one, range(nchains)))
    else:
        traces = [one(i) for i in range(nchains)]
    stats = np.atleast_1d(psrf_stat(traces))
    with open(os.path.join(out, "psrf.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["coordinate", "psrf"])
        for i, v in enumerate(stats):
            writer.writerow([i, float(v)])
    _manifest(
        os.path.join(out, "manifest.json"), local, spec,
        extra={"chains": nchains, "max_psrf": float(np.max(stats))},
    )
    print(f"max PSRF over {len(stats)} coordinates: {float(np.max(stats)):.6f}")
    return 0


# ------------------------------------------------------------------ driver

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lattice-dp",
        description="Invariant-preserving integer DP noise on constraint lattices.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_snf = sub.add_parser("snf", help="Smith normal form of an integer matrix CSV")
    p_snf.add_argument("--matrix", required=True, help="CSV of integer rows")
    p_snf.add_argument("--out", default=None, help="directory for snf.json (default: stdout)")
    p_snf.set_defaults(func=cmd_snf)

    def common(p):
        p.add_argument("--config", default=None, help="JSON run configuration")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--epsilon", type=float, default=None)
        p.add_argument("--delta", type=float, default=None)
        p.add_argument("--norm", choices=sorted(_NORMS), default=None)
        p.add_argument("--a", type=float, default=None, help="proposal ratio in (0,1)")
        p.add_argument("--nsim", type=int, default=None)
        p.add_argument("--burn-in", dest="burn_in", type=int, default=None)
        p.add_argument("--thin", type=int, default=None)
        p.add_argument("--lag", type=int, default=None)
        p.add_argument("--replicates", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")

    p_priv = sub.add_parser("privatize", help="release a privatized histogram")
    common(p_priv)
    p_priv.set_defaults(func=cmd_privatize)

    p_rep = sub.add_parser("replicates", help="thinned noise draws plus summaries")
    common(p_rep)
    p_rep.set_defaults(func=cmd_replicates)

    p_cpl = sub.add_parser("couple", help="TV upper bounds from lagged couplings")
    common(p_cpl)
    p_cpl.set_defaults(func=cmd_couple)

    p_psrf = sub.add_parser("psrf", help="potential scale reduction across chains")
    common(p_psrf)
    p_psrf.add_argument("--chains", type=int, default=None)
    p_psrf.set_defaults(func=cmd_psrf)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ConfigInvalid) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (RankDeficient, NotUnimodular, ParameterDomain, NegativePopulation) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except MeetingTimeout as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    except LatticeDpError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

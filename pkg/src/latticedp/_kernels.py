"""Hot loops for the lattice samplers.

Every function here is written in numba-compatible numpy style and compiled
with @njit when numba is importable and LATTICE_DP_NO_JIT is unset.  The
pure-Python path runs the very same source, and because numpy Generator
streams advance identically under both, chains are step-for-step identical
across paths for a given seed.

Proposal-density comparisons are expressed as products of powers of the
ratio a (computed by repeated multiplication) rather than through logs, so
the accept/copy decisions involve no library-dependent transcendentals
except exp() in the Metropolis test.

State layout: v is the full d-vector of reduced coordinates (first k pinned
at zero), z = V v its lattice image, maintained incrementally.  avec holds
the per-free-coordinate proposal ratios, length d - k.
"""

import math
import os

import numpy as np

KIND_L1 = 0
KIND_L2 = 1
KIND_GAUSS = 2

_REJECT_CAP = 1_000_000


def _env_flag(name):
    return os.environ.get(name, "").strip().lower() in ("1", "true", "yes", "on")


def _resolve_jit():
    if _env_flag("LATTICE_DP_NO_JIT"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


JIT_ENABLED = _resolve_jit()


def jit_enabled() -> bool:
    """True when the compiled path is active (numba present, not disabled)."""
    return JIT_ENABLED


def dgeom_draw(rng, a):
    """Double geometric draw: folded inverse CDF plus a fair sign.

    One uniform for the magnitude; a second only when the magnitude is
    nonzero.
    """
    u = rng.random()
    p0 = (1.0 - a) / (1.0 + a)
    if u < p0:
        return 0
    u2 = (u - p0) / (1.0 - p0)
    mag = 1 + int(math.floor(math.log(1.0 - u2) / math.log(a)))
    s = rng.random()
    if s < 0.5:
        return -mag
    return mag


def _pow_ratio(a, n):
    """a**n for integer n >= 0 by repeated multiplication (path-stable)."""
    out = 1.0
    for _ in range(n):
        out *= a
    return out


def _logq(kind, scale, z, center):
    """Unnormalized log target at z; integer accumulation, one float op out."""
    if kind == KIND_L1:
        s = 0
        for i in range(z.shape[0]):
            s += abs(z[i])
        return -scale * s
    if kind == KIND_L2:
        s = 0
        for i in range(z.shape[0]):
            s += z[i] * z[i]
        return -scale * math.sqrt(float(s))
    s = 0
    for i in range(z.shape[0]):
        t = z[i] - center[i]
        s += t * t
    return -scale * s


def _accept(r, dlq):
    if dlq >= 0.0:
        return True
    return r <= math.exp(dlq)


def _image(vmat, v, z):
    d = vmat.shape[0]
    for i in range(d):
        acc = 0
        for j in range(d):
            acc += vmat[i, j] * v[j]
        z[i] = acc


def _sweep(rng, vmat, k, kind, scale, center, avec, v, z, zprop, evec):
    """One Gibbs-swept proposal plus a single shared accept/reject.

    Returns 1 on accept, 0 on reject; v and z are updated in place.
    """
    d = vmat.shape[0]
    for i in range(d):
        zprop[i] = z[i]
    for j in range(k, d):
        e = dgeom_draw(rng, avec[j - k])
        evec[j] = e
        if e != 0:
            for i in range(d):
                zprop[i] += e * vmat[i, j]
    r = rng.random()
    dlq = _logq(kind, scale, zprop, center) - _logq(kind, scale, z, center)
    if _accept(r, dlq):
        for j in range(k, d):
            v[j] += evec[j]
        for i in range(d):
            z[i] = zprop[i]
        return 1
    return 0


def chain_advance(rng, vmat, k, kind, scale, center, avec, nsteps, v):
    """Advance the chain nsteps sweeps in place; returns accepted count."""
    d = vmat.shape[0]
    z = np.empty(d, np.int64)
    zprop = np.empty(d, np.int64)
    evec = np.zeros(d, np.int64)
    _image(vmat, v, z)
    accepted = 0
    for _ in range(nsteps):
        accepted += _sweep(rng, vmat, k, kind, scale, center, avec, v, z, zprop, evec)
    return accepted


def chain_collect(rng, vmat, k, kind, scale, center, avec, nsim, burn_in, thin, v, out):
    """Run nsim sweeps, writing post-burn-in states every `thin` sweeps.

    out must be ((nsim - burn_in) // thin, d); row i holds the lattice point
    z at sweep burn_in + (i + 1) * thin.  Returns accepted count.
    """
    d = vmat.shape[0]
    z = np.empty(d, np.int64)
    zprop = np.empty(d, np.int64)
    evec = np.zeros(d, np.int64)
    _image(vmat, v, z)
    accepted = 0
    row = 0
    for step in range(1, nsim + 1):
        accepted += _sweep(rng, vmat, k, kind, scale, center, avec, v, z, zprop, evec)
        if step > burn_in and (step - burn_in) % thin == 0:
            for i in range(d):
                out[row, i] = z[i]
            row += 1
    return accepted


def _coupled_sweep(rng, vmat, k, kind, scale, center, avec, v, w, zv, zw, zvp, zwp, evl, evf):
    """One joint sweep of the lagged pair under per-coordinate maximal coupling.

    The follower either copies the leader's proposed coordinate (maximal
    overlap branch) or rejection-samples from the residual of its own
    proposal.  A single shared uniform drives both Metropolis tests.
    Returns 0, or -2 if the residual sampler exceeded its attempt cap.
    """
    d = vmat.shape[0]
    for i in range(d):
        zvp[i] = zv[i]
        zwp[i] = zw[i]
    for j in range(k, d):
        a = avec[j - k]
        e = dgeom_draw(rng, a)
        vstar_j = v[j] + e
        s = rng.random()
        if s * _pow_ratio(a, abs(e)) <= _pow_ratio(a, abs(vstar_j - w[j])):
            wstar_j = vstar_j
        else:
            tries = 0
            wstar_j = w[j]
            while True:
                tries += 1
                if tries > _REJECT_CAP:
                    return -2
                et = dgeom_draw(rng, a)
                st = rng.random()
                wt = w[j] + et
                if st * _pow_ratio(a, abs(et)) > _pow_ratio(a, abs(wt - v[j])):
                    wstar_j = wt
                    break
        evl[j] = e
        evf[j] = wstar_j - w[j]
        if e != 0:
            for i in range(d):
                zvp[i] += e * vmat[i, j]
        df = wstar_j - w[j]
        if df != 0:
            for i in range(d):
                zwp[i] += df * vmat[i, j]
    r = rng.random()
    dv = _logq(kind, scale, zvp, center) - _logq(kind, scale, zv, center)
    if _accept(r, dv):
        for j in range(k, d):
            v[j] += evl[j]
        for i in range(d):
            zv[i] = zvp[i]
    dw = _logq(kind, scale, zwp, center) - _logq(kind, scale, zw, center)
    if _accept(r, dw):
        for j in range(k, d):
            w[j] += evf[j]
        for i in range(d):
            zw[i] = zwp[i]
    return 0


def _states_equal(k, v, w):
    for j in range(k, v.shape[0]):
        if v[j] != w[j]:
            return False
    return True


def meeting_time(rng, vmat, k, kind, scale, center, avec, lag, cap, v, w):
    """Lagged meeting time: leader warm-started `lag` single-kernel sweeps.

    v and w are the chains' initial reduced coordinates (drawn by the
    caller); both are evolved in place.  Returns the first index l > lag at
    which the states coincide, -1 if `cap` sweeps pass without meeting, or
    -2 on a residual-sampler cap breach.
    """
    d = vmat.shape[0]
    zv = np.empty(d, np.int64)
    zw = np.empty(d, np.int64)
    zvp = np.empty(d, np.int64)
    zwp = np.empty(d, np.int64)
    evl = np.zeros(d, np.int64)
    evf = np.zeros(d, np.int64)
    _image(vmat, v, zv)
    for _ in range(lag):
        _sweep(rng, vmat, k, kind, scale, center, avec, v, zv, zvp, evl)
    _image(vmat, w, zw)
    l = lag
    while True:
        l += 1
        if l > cap:
            return -1
        status = _coupled_sweep(
            rng, vmat, k, kind, scale, center, avec, v, w, zv, zw, zvp, zwp, evl, evf
        )
        if status == -2:
            return -2
        if _states_equal(k, v, w):
            return l


def coupled_trace(rng, vmat, k, kind, scale, center, avec, lag, nsteps, v, w, out):
    """Advance the coupled pair nsteps past the lag, recording leader states.

    out is (nsteps, d); row i holds the leader's z at index lag + 1 + i.
    The pair keeps evolving after meeting (the coupling glues them), so the
    recorded trajectory is a full-length draw of the single-kernel chain.
    Returns the first meeting index, -1 if none occurred within nsteps, or
    -2 on a residual-sampler cap breach.
    """
    d = vmat.shape[0]
    zv = np.empty(d, np.int64)
    zw = np.empty(d, np.int64)
    zvp = np.empty(d, np.int64)
    zwp = np.empty(d, np.int64)
    evl = np.zeros(d, np.int64)
    evf = np.zeros(d, np.int64)
    _image(vmat, v, zv)
    for _ in range(lag):
        _sweep(rng, vmat, k, kind, scale, center, avec, v, zv, zvp, evl)
    _image(vmat, w, zw)
    tau = -1
    for step in range(nsteps):
        status = _coupled_sweep(
            rng, vmat, k, kind, scale, center, avec, v, w, zv, zw, zvp, zwp, evl, evf
        )
        if status == -2:
            return -2
        for i in range(d):
            out[step, i] = zv[i]
        if tau == -1 and _states_equal(k, v, w):
            tau = lag + 1 + step
    return tau


if JIT_ENABLED:
    from numba import njit

    _dec = njit(cache=True, nogil=True)
    dgeom_draw = _dec(dgeom_draw)
    _pow_ratio = _dec(_pow_ratio)
    _logq = _dec(_logq)
    _accept = _dec(_accept)
    _image = _dec(_image)
    _sweep = _dec(_sweep)
    chain_advance = _dec(chain_advance)
    chain_collect = _dec(chain_collect)
    _coupled_sweep = _dec(_coupled_sweep)
    _states_equal = _dec(_states_equal)
    meeting_time = _dec(meeting_time)
    coupled_trace = _dec(coupled_trace)

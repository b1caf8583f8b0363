"""Pure-numpy kernel backend, vectorized across a batch of paths.

Every function advances a block of K exponential-Euler steps for P paths
at once.  States have shape (P, 2m), noise increment blocks (K, P, 2m),
grid buffers (P, n).  The drift is evaluated at the step's left endpoint;
the linear part and the noise are exact per mode.

Scratch buffers are allocated once per call and reused across steps.  The
arithmetic sequence of the slow update is kept identical between
`pair_block` and `slow_block` (same ufunc calls in the same order), so a
slow-only run of either kernel reproduces the other bit for bit; the
compiled backend (_kernels_cy) implements the same semantics with
per-path scalar loops and may differ from this one in the last ulp.
"""

from __future__ import annotations

import numpy as np

from .couplings import (
    CID_DEFAULT,
    CID_MIXED,
    CID_SIN_FAST,
    CID_SLOW_ONLY,
    CID_Y_ONLY,
    CID_ZERO,
)

BACKEND = "numpy"


class _Buffers:
    def __init__(self, P: int, n: int, m2: int):
        self.xg = np.empty((P, n))
        self.yg = np.empty((P, n))
        self.dg = np.empty((P, n))
        self.gg = np.empty((P, n))
        self.t1 = np.empty((P, n))
        self.co = np.empty((P, m2))
        self.sn = np.empty((P, m2))
        self.ab = np.empty((P, m2))
        self.rn = np.empty(P)


def _add_f_full(cid, cpar, xg, yg, dg, t1):
    """dg += f(x, y) on the grid.  Term order: x part, then y part."""
    af = cpar[0]
    if cid == CID_ZERO:
        return False
    if cid == CID_DEFAULT:
        np.sin(xg, out=t1)
        t1 *= af
        dg += t1
        np.sin(yg, out=t1)
        t1 *= 0.5 * af
        dg += t1
    elif cid == CID_SLOW_ONLY:
        np.sin(xg, out=t1)
        t1 *= af
        dg += t1
    elif cid == CID_Y_ONLY:
        np.sin(yg, out=t1)
        t1 *= 0.5 * af
        dg += t1
    elif cid == CID_SIN_FAST:
        np.sin(yg, out=t1)
        t1 *= af
        dg += t1
    elif cid == CID_MIXED:
        np.add(xg, yg, out=t1)
        np.sin(t1, out=t1)
        t1 *= af
        dg += t1
    else:
        raise ValueError(f"unknown coupling id {cid}")
    return True


def _add_f_slow(cid, cpar, xg, dg, t1):
    """dg += x-only part of a separable f (live part of the averaged drift)."""
    af = cpar[0]
    if cid in (CID_DEFAULT, CID_SLOW_ONLY):
        np.sin(xg, out=t1)
        t1 *= af
        dg += t1
        return True
    return False


def _add_f_ypart(cid, cpar, yg, dg, t1):
    af = cpar[0]
    if cid in (CID_DEFAULT, CID_Y_ONLY):
        np.sin(yg, out=t1)
        t1 *= 0.5 * af
        dg += t1
        return True
    if cid == CID_SIN_FAST:
        np.sin(yg, out=t1)
        t1 *= af
        dg += t1
        return True
    return False


def _add_g_full(cid, cpar, xg, yg, gg, t1):
    """gg += g(x, y) on the grid.  Term order: x part, then y part."""
    ag, bg = cpar[1], cpar[2]
    if cid in (CID_ZERO, CID_SIN_FAST):
        return False
    if cid in (CID_DEFAULT, CID_SLOW_ONLY, CID_MIXED):
        np.sin(xg, out=t1)
        t1 *= ag
        gg += t1
        np.arctan(yg, out=t1)
        t1 *= bg
        gg += t1
    elif cid == CID_Y_ONLY:
        np.arctan(yg, out=t1)
        t1 *= bg
        gg += t1
    else:
        raise ValueError(f"unknown coupling id {cid}")
    return True


def _add_cubic(xg, dg, t1):
    """dg += x - x^3 on the grid."""
    np.multiply(xg, xg, out=t1)
    t1 *= xg
    np.subtract(xg, t1, out=t1)
    dg += t1


def _check_blow(step_idx, blow, thresh, buf, *states):
    hit = None
    for s in states:
        np.abs(s, out=buf.ab)
        # negated <= so that NaN states are flagged too
        over = ~(np.max(buf.ab, axis=1) <= thresh)
        hit = over if hit is None else (hit | over)
    newly = hit & (blow < 0)
    if np.any(newly):
        blow[newly] = step_idx
        for s in states:
            s[newly] = 0.0


def _supnorm(acc, s):
    np.maximum(acc, np.sqrt(np.sum(s * s, axis=1)), out=acc)


def pair_block(
    K, x, y, dL, dZ, decx, phx, decy, phy, bsyn, bana, cid, cpar,
    en_n, en_f, en_g, xref, supdiff, supx, blow, step0, blow_thresh,
):
    """Advance the coupled slow-fast pair K steps; x, y updated in place.

    xref (K, P, 2m), when given, is compared against x after each step and
    the per-path sup norm of the difference accumulated into supdiff.
    supx accumulates the running sup of ||x||.
    """
    bsynT = bsyn.T
    banaT = bana.T
    P, m2 = x.shape
    b = _Buffers(P, bsyn.shape[0], m2)
    for j in range(K):
        np.matmul(x, bsynT, out=b.xg)
        np.matmul(y, bsynT, out=b.yg)
        b.dg[:] = 0.0
        have_slow = False
        if en_n:
            _add_cubic(b.xg, b.dg, b.t1)
            have_slow = True
        if en_f:
            have_slow |= _add_f_full(cid, cpar, b.xg, b.yg, b.dg, b.t1)
        b.gg[:] = 0.0
        have_fast = False
        if en_g:
            have_fast = _add_g_full(cid, cpar, b.xg, b.yg, b.gg, b.t1)
        np.multiply(decx, x, out=x)
        if have_slow:
            np.matmul(b.dg, banaT, out=b.co)
            b.co *= phx
            x += b.co
        if dL is not None:
            x += dL[j]
        np.multiply(decy, y, out=y)
        if have_fast:
            np.matmul(b.gg, banaT, out=b.co)
            b.co *= phy
            y += b.co
        if dZ is not None:
            y += dZ[j]
        _check_blow(step0 + j, blow, blow_thresh, b, x, y)
        if supx is not None:
            _supnorm(supx, x)
        if xref is not None:
            np.subtract(x, xref[j], out=b.sn)
            _supnorm(supdiff, b.sn)


def slow_block(
    K, x, dL, decx, phx, bsyn, bana, cid, cpar,
    en_n, en_f, foff, xrec, supx, blow, step0, blow_thresh,
):
    """Advance the averaged (slow-only) equation K steps.

    foff, when given, is a constant per-path drift field in coefficient
    space (the held ergodic-average part of the averaged drift).  xrec,
    when given, records the state after every step.
    """
    bsynT = bsyn.T
    banaT = bana.T
    P, m2 = x.shape
    b = _Buffers(P, bsyn.shape[0], m2)
    for j in range(K):
        have_drift = False
        if en_n or en_f:
            np.matmul(x, bsynT, out=b.xg)
            b.dg[:] = 0.0
            if en_n:
                _add_cubic(b.xg, b.dg, b.t1)
                have_drift = True
            if en_f:
                have_drift |= _add_f_slow(cid, cpar, b.xg, b.dg, b.t1)
        np.multiply(decx, x, out=x)
        if have_drift:
            np.matmul(b.dg, banaT, out=b.co)
            if foff is not None:
                b.co += foff
            b.co *= phx
            x += b.co
        elif foff is not None:
            np.multiply(phx, foff, out=b.co)
            x += b.co
        if dL is not None:
            x += dL[j]
        _check_blow(step0 + j, blow, blow_thresh, b, x)
        if supx is not None:
            _supnorm(supx, x)
        if xrec is not None:
            xrec[j] = x


def frozen_block(
    K, y, dZ, dec, ph, bsyn, bana, cid, cpar,
    en_g, xf_grid, facc_mode, facc, yrec, blow, step0, blow_thresh,
):
    """Advance the frozen fast equation K steps at unit time scale.

    xf_grid (P, n) holds the frozen slow state on the grid.  facc_mode:
    0 none, 1 accumulate the y-part of f per path (shape (P, 2m)),
    2 accumulate full f(x_frozen, Y) per path, 3 accumulate full f summed
    over paths per step (shape (K, 2m)).  Accumulation uses the post-step
    state.
    """
    bsynT = bsyn.T
    banaT = bana.T
    P, m2 = y.shape
    b = _Buffers(P, bsyn.shape[0], m2)
    for j in range(K):
        np.matmul(y, bsynT, out=b.yg)
        b.gg[:] = 0.0
        have_fast = False
        if en_g:
            have_fast = _add_g_full(cid, cpar, xf_grid, b.yg, b.gg, b.t1)
        np.multiply(dec, y, out=y)
        if have_fast:
            np.matmul(b.gg, banaT, out=b.co)
            b.co *= ph
            y += b.co
        if dZ is not None:
            y += dZ[j]
        _check_blow(step0 + j, blow, blow_thresh, b, y)
        if facc_mode:
            np.matmul(y, bsynT, out=b.yg)
            b.dg[:] = 0.0
            if facc_mode == 1:
                got = _add_f_ypart(cid, cpar, b.yg, b.dg, b.t1)
            else:
                got = _add_f_full(cid, cpar, xf_grid, b.yg, b.dg, b.t1)
            if got:
                np.matmul(b.dg, banaT, out=b.co)
                if facc_mode == 3:
                    facc[j] += np.sum(b.co, axis=0)
                else:
                    facc += b.co
        if yrec is not None:
            yrec[j] = y


def aux_block(
    K, x, y, xh, yh, dL, dZ, decx, phx, decy, phy, bsyn, bana, cid, cpar,
    en_n, en_f, en_g, xf_grid, gap_int, gap_sup, dt,
    blow, step0, blow_thresh,
):
    """Advance the true pair and its block-frozen companion in lockstep.

    The companion's couplings are evaluated at the frozen slow state
    xf_grid (P, n), refreshed by the caller at the breakpoint boundaries;
    both pairs consume the same noise rows.  gap_int accumulates
    dt * ||y - yh|| per step and gap_sup the running sup of ||x - xh||.
    """
    bsynT = bsyn.T
    banaT = bana.T
    P, m2 = x.shape
    n = bsyn.shape[0]
    b = _Buffers(P, n, m2)
    xhg = np.empty((P, n))
    yhg = np.empty((P, n))
    for j in range(K):
        np.matmul(x, bsynT, out=b.xg)
        np.matmul(y, bsynT, out=b.yg)
        np.matmul(xh, bsynT, out=xhg)
        np.matmul(yh, bsynT, out=yhg)
        # true pair
        b.dg[:] = 0.0
        sd = False
        if en_n:
            _add_cubic(b.xg, b.dg, b.t1)
            sd = True
        if en_f:
            sd |= _add_f_full(cid, cpar, b.xg, b.yg, b.dg, b.t1)
        b.gg[:] = 0.0
        fd = False
        if en_g:
            fd = _add_g_full(cid, cpar, b.xg, b.yg, b.gg, b.t1)
        np.multiply(decx, x, out=x)
        if sd:
            np.matmul(b.dg, banaT, out=b.co)
            b.co *= phx
            x += b.co
        if dL is not None:
            x += dL[j]
        np.multiply(decy, y, out=y)
        if fd:
            np.matmul(b.gg, banaT, out=b.co)
            b.co *= phy
            y += b.co
        if dZ is not None:
            y += dZ[j]
        # companion, couplings frozen at the last breakpoint state
        b.dg[:] = 0.0
        sdh = False
        if en_n:
            _add_cubic(xhg, b.dg, b.t1)
            sdh = True
        if en_f:
            sdh |= _add_f_full(cid, cpar, xf_grid, yhg, b.dg, b.t1)
        b.gg[:] = 0.0
        fdh = False
        if en_g:
            fdh = _add_g_full(cid, cpar, xf_grid, yhg, b.gg, b.t1)
        np.multiply(decx, xh, out=xh)
        if sdh:
            np.matmul(b.dg, banaT, out=b.co)
            b.co *= phx
            xh += b.co
        if dL is not None:
            xh += dL[j]
        np.multiply(decy, yh, out=yh)
        if fdh:
            np.matmul(b.gg, banaT, out=b.co)
            b.co *= phy
            yh += b.co
        if dZ is not None:
            yh += dZ[j]
        _check_blow(step0 + j, blow, blow_thresh, b, x, y, xh, yh)
        np.subtract(y, yh, out=b.sn)
        np.sqrt(np.sum(b.sn * b.sn, axis=1), out=b.rn)
        b.rn *= dt
        gap_int += b.rn
        np.subtract(x, xh, out=b.sn)
        _supnorm(gap_sup, b.sn)

# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernel backend: per-path scalar loops over modes and grid.

Implements the same block-stepping functions as the numpy backend with
identical semantics (left-endpoint drift, exact linear decay, blow-up
zeroing).  Fastest for small path batches; the numpy backend overtakes it
on large batches where SIMD transcendentals dominate.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport atan, fabs, sin, sqrt

cnp.import_array()

BACKEND = "cython"

DEF CID_ZERO = 0
DEF CID_DEFAULT = 1
DEF CID_SLOW_ONLY = 2
DEF CID_Y_ONLY = 3
DEF CID_SIN_FAST = 4
DEF CID_MIXED = 5


cdef inline void _synth(const double[:, ::1] bsyn, const double[::1] st,
                        double* out, int n, int m2) noexcept nogil:
    cdef int q, i
    cdef double acc
    for q in range(n):
        acc = 0.0
        for i in range(m2):
            acc += bsyn[q, i] * st[i]
        out[q] = acc


cdef inline void _project(const double[:, ::1] bana, const double* grid,
                          double* out, int n, int m2) noexcept nogil:
    cdef int q, i
    cdef double acc
    for i in range(m2):
        acc = 0.0
        for q in range(n):
            acc += bana[i, q] * grid[q]
        out[i] = acc


cdef inline void _add_f_full(int cid, double af, const double* xg,
                             const double* yg, double* dg, int n) noexcept nogil:
    cdef int q
    if cid == CID_DEFAULT:
        for q in range(n):
            dg[q] += af * sin(xg[q]) + (0.5 * af) * sin(yg[q])
    elif cid == CID_SLOW_ONLY:
        for q in range(n):
            dg[q] += af * sin(xg[q])
    elif cid == CID_Y_ONLY:
        for q in range(n):
            dg[q] += (0.5 * af) * sin(yg[q])
    elif cid == CID_SIN_FAST:
        for q in range(n):
            dg[q] += af * sin(yg[q])
    elif cid == CID_MIXED:
        for q in range(n):
            dg[q] += af * sin(xg[q] + yg[q])


cdef inline void _add_f_ypart(int cid, double af, const double* yg,
                              double* dg, int n) noexcept nogil:
    cdef int q
    if cid == CID_DEFAULT or cid == CID_Y_ONLY:
        for q in range(n):
            dg[q] += (0.5 * af) * sin(yg[q])
    elif cid == CID_SIN_FAST:
        for q in range(n):
            dg[q] += af * sin(yg[q])


cdef inline bint _add_g_full(int cid, double ag, double bg, const double* xg,
                             const double* yg, double* gg, int n) noexcept nogil:
    cdef int q
    if cid == CID_ZERO or cid == CID_SIN_FAST:
        return 0
    if cid == CID_Y_ONLY:
        for q in range(n):
            gg[q] += bg * atan(yg[q])
    else:
        for q in range(n):
            gg[q] += ag * sin(xg[q]) + bg * atan(yg[q])
    return 1


cdef inline double _norm(const double[::1] v, int m2) noexcept nogil:
    cdef int i
    cdef double acc = 0.0
    for i in range(m2):
        acc += v[i] * v[i]
    return sqrt(acc)


cdef inline bint _over(const double[::1] v, int m2, double thr) noexcept nogil:
    cdef int i
    for i in range(m2):
        if not (fabs(v[i]) <= thr):  # negated <= so NaN counts as over
            return 1
    return 0


def pair_block(int K, double[:, ::1] x, double[:, ::1] y,
               double[:, :, ::1] dL, double[:, :, ::1] dZ,
               double[::1] decx, double[::1] phx,
               double[::1] decy, double[::1] phy,
               double[:, ::1] bsyn, double[:, ::1] bana,
               int cid, double[::1] cpar,
               bint en_n, bint en_f, bint en_g,
               double[:, :, ::1] xref, double[::1] supdiff, double[::1] supx,
               long long[::1] blow, long long step0, double blow_thresh):
    cdef int P = x.shape[0]
    cdef int m2 = x.shape[1]
    cdef int n = bsyn.shape[0]
    cdef double af = cpar[0], ag = cpar[1], bg = cpar[2]
    cdef cnp.ndarray scratch = np.empty((4, n), dtype=np.float64)
    cdef double[:, ::1] sc = scratch
    cdef double* xg
    cdef double* yg
    cdef double* dg
    cdef double* gg
    cdef cnp.ndarray co = np.empty((2, m2), dtype=np.float64)
    cdef double[:, ::1] cv = co
    cdef int p, j, i, q
    cdef double acc, d
    cdef bint have_slow_drift, have_fast_drift
    with nogil:
        xg = &sc[0, 0]; yg = &sc[1, 0]; dg = &sc[2, 0]; gg = &sc[3, 0]
        for p in range(P):
            for j in range(K):
                _synth(bsyn, x[p], xg, n, m2)
                _synth(bsyn, y[p], yg, n, m2)
                have_slow_drift = 0
                for q in range(n):
                    dg[q] = 0.0
                if en_n:
                    for q in range(n):
                        dg[q] += xg[q] - xg[q] * xg[q] * xg[q]
                    have_slow_drift = 1
                if en_f and cid != CID_ZERO:
                    _add_f_full(cid, af, xg, yg, dg, n)
                    have_slow_drift = 1
                for q in range(n):
                    gg[q] = 0.0
                have_fast_drift = 0
                if en_g:
                    have_fast_drift = _add_g_full(cid, ag, bg, xg, yg, gg, n)
                if have_slow_drift:
                    _project(bana, dg, &cv[0, 0], n, m2)
                if have_fast_drift:
                    _project(bana, gg, &cv[1, 0], n, m2)
                for i in range(m2):
                    acc = decx[i] * x[p, i]
                    if have_slow_drift:
                        acc += phx[i] * cv[0, i]
                    if dL is not None:
                        acc += dL[j, p, i]
                    x[p, i] = acc
                    acc = decy[i] * y[p, i]
                    if have_fast_drift:
                        acc += phy[i] * cv[1, i]
                    if dZ is not None:
                        acc += dZ[j, p, i]
                    y[p, i] = acc
                if blow[p] < 0 and (_over(x[p], m2, blow_thresh) or
                                    _over(y[p], m2, blow_thresh)):
                    blow[p] = step0 + j
                    for i in range(m2):
                        x[p, i] = 0.0
                        y[p, i] = 0.0
                if supx is not None:
                    d = _norm(x[p], m2)
                    if d > supx[p]:
                        supx[p] = d
                if xref is not None:
                    acc = 0.0
                    for i in range(m2):
                        d = x[p, i] - xref[j, p, i]
                        acc += d * d
                    acc = sqrt(acc)
                    if acc > supdiff[p]:
                        supdiff[p] = acc


def slow_block(int K, double[:, ::1] x,
               double[:, :, ::1] dL,
               double[::1] decx, double[::1] phx,
               double[:, ::1] bsyn, double[:, ::1] bana,
               int cid, double[::1] cpar,
               bint en_n, bint en_f,
               double[:, ::1] foff, double[:, :, ::1] xrec, double[::1] supx,
               long long[::1] blow, long long step0, double blow_thresh):
    cdef int P = x.shape[0]
    cdef int m2 = x.shape[1]
    cdef int n = bsyn.shape[0]
    cdef double af = cpar[0]
    cdef cnp.ndarray scratch = np.empty((2, n), dtype=np.float64)
    cdef double[:, ::1] sc = scratch
    cdef cnp.ndarray co = np.empty(m2, dtype=np.float64)
    cdef double[::1] cv = co
    cdef double* xg
    cdef double* dg
    cdef int p, j, i, q
    cdef double acc, d
    cdef bint have_drift, live_f
    live_f = en_f and (cid == CID_DEFAULT or cid == CID_SLOW_ONLY)
    with nogil:
        xg = &sc[0, 0]; dg = &sc[1, 0]
        for p in range(P):
            for j in range(K):
                have_drift = 0
                if en_n or live_f:
                    _synth(bsyn, x[p], xg, n, m2)
                    for q in range(n):
                        dg[q] = 0.0
                    if en_n:
                        for q in range(n):
                            dg[q] += xg[q] - xg[q] * xg[q] * xg[q]
                    if live_f:
                        for q in range(n):
                            dg[q] += af * sin(xg[q])
                    _project(bana, dg, &cv[0], n, m2)
                    have_drift = 1
                for i in range(m2):
                    acc = decx[i] * x[p, i]
                    if have_drift:
                        if foff is not None:
                            acc += phx[i] * (cv[i] + foff[p, i])
                        else:
                            acc += phx[i] * cv[i]
                    elif foff is not None:
                        acc += phx[i] * foff[p, i]
                    if dL is not None:
                        acc += dL[j, p, i]
                    x[p, i] = acc
                if blow[p] < 0 and _over(x[p], m2, blow_thresh):
                    blow[p] = step0 + j
                    for i in range(m2):
                        x[p, i] = 0.0
                if supx is not None:
                    d = _norm(x[p], m2)
                    if d > supx[p]:
                        supx[p] = d
                if xrec is not None:
                    for i in range(m2):
                        xrec[j, p, i] = x[p, i]


def frozen_block(int K, double[:, ::1] y,
                 double[:, :, ::1] dZ,
                 double[::1] dec, double[::1] ph,
                 double[:, ::1] bsyn, double[:, ::1] bana,
                 int cid, double[::1] cpar,
                 bint en_g, double[:, ::1] xf_grid,
                 int facc_mode, double[:, ::1] facc, double[:, :, ::1] yrec,
                 long long[::1] blow, long long step0, double blow_thresh):
    cdef int P = y.shape[0]
    cdef int m2 = y.shape[1]
    cdef int n = bsyn.shape[0]
    cdef double af = cpar[0], ag = cpar[1], bg = cpar[2]
    cdef cnp.ndarray scratch = np.empty((2, n), dtype=np.float64)
    cdef double[:, ::1] sc = scratch
    cdef cnp.ndarray co = np.empty(m2, dtype=np.float64)
    cdef double[::1] cv = co
    cdef double* yg
    cdef double* gg
    cdef int p, j, i, q
    cdef double acc
    cdef bint have_fast_drift
    with nogil:
        yg = &sc[0, 0]; gg = &sc[1, 0]
        for p in range(P):
            for j in range(K):
                _synth(bsyn, y[p], yg, n, m2)
                for q in range(n):
                    gg[q] = 0.0
                have_fast_drift = 0
                if en_g:
                    have_fast_drift = _add_g_full(cid, ag, bg, &xf_grid[p, 0],
                                                  yg, gg, n)
                if have_fast_drift:
                    _project(bana, gg, &cv[0], n, m2)
                for i in range(m2):
                    acc = dec[i] * y[p, i]
                    if have_fast_drift:
                        acc += ph[i] * cv[i]
                    if dZ is not None:
                        acc += dZ[j, p, i]
                    y[p, i] = acc
                if blow[p] < 0 and _over(y[p], m2, blow_thresh):
                    blow[p] = step0 + j
                    for i in range(m2):
                        y[p, i] = 0.0
                if facc_mode != 0:
                    _synth(bsyn, y[p], yg, n, m2)
                    for q in range(n):
                        gg[q] = 0.0
                    if facc_mode == 1:
                        _add_f_ypart(cid, af, yg, gg, n)
                    else:
                        _add_f_full(cid, af, &xf_grid[p, 0], yg, gg, n)
                    _project(bana, gg, &cv[0], n, m2)
                    if facc_mode == 3:
                        for i in range(m2):
                            facc[j, i] += cv[i]
                    else:
                        for i in range(m2):
                            facc[p, i] += cv[i]
                if yrec is not None:
                    for i in range(m2):
                        yrec[j, p, i] = y[p, i]


def aux_block(int K, double[:, ::1] x, double[:, ::1] y,
              double[:, ::1] xh, double[:, ::1] yh,
              double[:, :, ::1] dL, double[:, :, ::1] dZ,
              double[::1] decx, double[::1] phx,
              double[::1] decy, double[::1] phy,
              double[:, ::1] bsyn, double[:, ::1] bana,
              int cid, double[::1] cpar,
              bint en_n, bint en_f, bint en_g,
              double[:, ::1] xf_grid,
              double[::1] gap_int, double[::1] gap_sup, double dt,
              long long[::1] blow, long long step0, double blow_thresh):
    cdef int P = x.shape[0]
    cdef int m2 = x.shape[1]
    cdef int n = bsyn.shape[0]
    cdef double af = cpar[0], ag = cpar[1], bg = cpar[2]
    cdef cnp.ndarray scratch = np.empty((6, n), dtype=np.float64)
    cdef double[:, ::1] sc = scratch
    cdef cnp.ndarray co = np.empty((4, m2), dtype=np.float64)
    cdef double[:, ::1] cv = co
    cdef double* xg
    cdef double* yg
    cdef double* xhg
    cdef double* yhg
    cdef double* dg
    cdef double* gg
    cdef int p, j, i, q
    cdef double acc, d
    cdef bint sd, fd, sdh, fdh
    with nogil:
        xg = &sc[0, 0]; yg = &sc[1, 0]; xhg = &sc[2, 0]; yhg = &sc[3, 0]
        dg = &sc[4, 0]; gg = &sc[5, 0]
        for p in range(P):
            for j in range(K):
                _synth(bsyn, x[p], xg, n, m2)
                _synth(bsyn, y[p], yg, n, m2)
                _synth(bsyn, xh[p], xhg, n, m2)
                _synth(bsyn, yh[p], yhg, n, m2)
                # true pair drift
                for q in range(n):
                    dg[q] = 0.0
                sd = 0
                if en_n:
                    for q in range(n):
                        dg[q] += xg[q] - xg[q] * xg[q] * xg[q]
                    sd = 1
                if en_f and cid != CID_ZERO:
                    _add_f_full(cid, af, xg, yg, dg, n)
                    sd = 1
                if sd:
                    _project(bana, dg, &cv[0, 0], n, m2)
                for q in range(n):
                    gg[q] = 0.0
                fd = 0
                if en_g:
                    fd = _add_g_full(cid, ag, bg, xg, yg, gg, n)
                if fd:
                    _project(bana, gg, &cv[1, 0], n, m2)
                # companion drift, couplings frozen at the breakpoint state
                for q in range(n):
                    dg[q] = 0.0
                sdh = 0
                if en_n:
                    for q in range(n):
                        dg[q] += xhg[q] - xhg[q] * xhg[q] * xhg[q]
                    sdh = 1
                if en_f and cid != CID_ZERO:
                    _add_f_full(cid, af, &xf_grid[p, 0], yhg, dg, n)
                    sdh = 1
                if sdh:
                    _project(bana, dg, &cv[2, 0], n, m2)
                for q in range(n):
                    gg[q] = 0.0
                fdh = 0
                if en_g:
                    fdh = _add_g_full(cid, ag, bg, &xf_grid[p, 0], yhg, gg, n)
                if fdh:
                    _project(bana, gg, &cv[3, 0], n, m2)
                for i in range(m2):
                    acc = decx[i] * x[p, i]
                    if sd:
                        acc += phx[i] * cv[0, i]
                    if dL is not None:
                        acc += dL[j, p, i]
                    x[p, i] = acc
                    acc = decy[i] * y[p, i]
                    if fd:
                        acc += phy[i] * cv[1, i]
                    if dZ is not None:
                        acc += dZ[j, p, i]
                    y[p, i] = acc
                    acc = decx[i] * xh[p, i]
                    if sdh:
                        acc += phx[i] * cv[2, i]
                    if dL is not None:
                        acc += dL[j, p, i]
                    xh[p, i] = acc
                    acc = decy[i] * yh[p, i]
                    if fdh:
                        acc += phy[i] * cv[3, i]
                    if dZ is not None:
                        acc += dZ[j, p, i]
                    yh[p, i] = acc
                if blow[p] < 0 and (_over(x[p], m2, blow_thresh) or
                                    _over(y[p], m2, blow_thresh) or
                                    _over(xh[p], m2, blow_thresh) or
                                    _over(yh[p], m2, blow_thresh)):
                    blow[p] = step0 + j
                    for i in range(m2):
                        x[p, i] = 0.0
                        y[p, i] = 0.0
                        xh[p, i] = 0.0
                        yh[p, i] = 0.0
                acc = 0.0
                for i in range(m2):
                    d = y[p, i] - yh[p, i]
                    acc += d * d
                gap_int[p] += dt * sqrt(acc)
                acc = 0.0
                for i in range(m2):
                    d = x[p, i] - xh[p, i]
                    acc += d * d
                acc = sqrt(acc)
                if acc > gap_sup[p]:
                    gap_sup[p] = acc

# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled population kernels.

Same contracts as ``_pykernels``; arithmetic follows the same operation
order so both backends return bit-identical arrays.
"""

import numpy as np
from libc.math cimport fabs, sqrt


def competition_psi(own, other, opponents, bint maximize):
    cdef double[::1] o = np.ascontiguousarray(own, dtype=np.float64)
    cdef double[::1] th = np.ascontiguousarray(other, dtype=np.float64)
    cdef long long[:, ::1] opp = np.ascontiguousarray(opponents, dtype=np.int64)
    cdef Py_ssize_t n = opp.shape[0], s = opp.shape[1], i, j
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] res = out
    cdef double total, a, b, sc
    for i in range(n):
        a = o[i]
        total = 0.0
        for j in range(s):
            b = th[opp[i, j]]
            if a == b:
                sc = 0.5
            elif (a > b) == maximize:
                sc = 1.0
            else:
                sc = 0.0
            if j == 0:
                total = sc
            else:
                total = total + sc
        res[i] = total / s
    return out


def biased_mutate(bits, mask_u, value_u, double m, double beta):
    out = np.array(bits, dtype=np.uint8, copy=True, order="C")
    cdef unsigned char[:, ::1] b = out
    cdef double[:, ::1] mu = np.ascontiguousarray(mask_u, dtype=np.float64)
    cdef double[:, ::1] vu = np.ascontiguousarray(value_u, dtype=np.float64)
    cdef Py_ssize_t n = b.shape[0], l = b.shape[1], i, j
    for i in range(n):
        for j in range(l):
            if mu[i, j] < m:
                b[i, j] = 1 if vu[i, j] < beta else 0
    return out


cdef inline int _n_unique(long long* vals, int k) nogil:
    cdef int i, j, u = 0
    cdef bint seen
    for i in range(k):
        seen = False
        for j in range(i):
            if vals[j] == vals[i]:
                seen = True
                break
        if not seen:
            u += 1
    return u


def phi_components(food_ids, grams, ex_ids, minutes, food_pg, food_cat,
                   food_like, ex_like, targets, double session_minutes,
                   long long n_categories):
    cdef long long[:, :, ::1] fid = np.ascontiguousarray(food_ids, dtype=np.int64)
    cdef double[:, :, ::1] g = np.ascontiguousarray(grams, dtype=np.float64)
    cdef long long[:, ::1] eid = np.ascontiguousarray(ex_ids, dtype=np.int64)
    cdef double[:, ::1] mins = np.ascontiguousarray(minutes, dtype=np.float64)
    cdef double[:, ::1] pg = np.ascontiguousarray(food_pg, dtype=np.float64)
    cdef long long[::1] cat = np.ascontiguousarray(food_cat, dtype=np.int64)
    cdef double[::1] flike = np.ascontiguousarray(food_like, dtype=np.float64)
    cdef double[::1] elike = np.ascontiguousarray(ex_like, dtype=np.float64)
    cdef double[::1] tg = np.ascontiguousarray(targets, dtype=np.float64)
    cdef Py_ssize_t n = fid.shape[0], i, b, j, k
    out = np.empty((n, 5), dtype=np.float64)
    cdef double[:, ::1] res = out
    cdef double meal[8]
    cdef double hf_b[3]
    cdef double prop_b[3]
    cdef long long ids[12]
    cdef long long cats[12]
    cdef long long exs[3]
    cdef double acc, dev, t, a, mean_g, var, d, cv, hf, ea, cd, psi, lk
    cdef double cat_den = <double>(12 if n_categories > 12 else n_categories)
    cdef bint outside

    for i in range(n):
        for b in range(3):
            for k in range(8):
                acc = g[i, b, 0] * pg[fid[i, b, 0], k]
                for j in range(1, 4):
                    acc = acc + g[i, b, j] * pg[fid[i, b, j], k]
                meal[k] = acc
            acc = 0.0
            for k in range(8):
                a = meal[k]
                t = tg[k]
                if k < 4:
                    dev = fabs(a - t) / t
                elif k == 6:
                    dev = (t - a if t - a > 0.0 else 0.0) / t
                else:
                    dev = (a - t if a - t > 0.0 else 0.0) / t
                if dev > 1.0:
                    dev = 1.0
                if k == 0:
                    acc = dev
                else:
                    acc = acc + dev
            hf_b[b] = acc / 8.0

            mean_g = (g[i, b, 0] + g[i, b, 1] + g[i, b, 2] + g[i, b, 3]) / 4.0
            d = g[i, b, 0] - mean_g
            var = d * d
            outside = False
            for j in range(4):
                if j > 0:
                    d = g[i, b, j] - mean_g
                    var = var + d * d
                if g[i, b, j] < 10.0 or g[i, b, j] > 500.0:
                    outside = True
            if outside:
                prop_b[b] = 1.0
            else:
                cv = sqrt(var / 4.0) / mean_g
                prop_b[b] = cv if cv < 1.0 else 1.0
            for j in range(4):
                ids[b * 4 + j] = fid[i, b, j]
                cats[b * 4 + j] = cat[fid[i, b, j]]
            exs[b] = eid[i, b]

        hf = (hf_b[0] + hf_b[1] + hf_b[2]) / 3.0

        ea = 0.0
        for b in range(3):
            dev = fabs(mins[i, b] - session_minutes) / session_minutes
            if dev > 1.0:
                dev = 1.0
            if b == 0:
                ea = dev
            else:
                ea = ea + dev
        ea = ea / 3.0

        cd = ((1.0 - _n_unique(ids, 12) / 12.0)
              + (1.0 - _n_unique(cats, 12) / cat_den)
              + (prop_b[0] + prop_b[1] + prop_b[2]) / 3.0
              + (1.0 - _n_unique(exs, 3) / 3.0)) / 4.0

        acc = 0.0
        for b in range(3):
            for j in range(4):
                lk = flike[fid[i, b, j]]
                if b == 0 and j == 0:
                    acc = lk
                else:
                    acc = acc + lk
            acc = acc + elike[eid[i, b]]
        psi = 1.0 - acc / 15.0

        res[i, 0] = hf
        res[i, 1] = ea
        res[i, 2] = cd
        res[i, 3] = psi
        res[i, 4] = (hf + ea + cd + psi) / 4.0
    return out

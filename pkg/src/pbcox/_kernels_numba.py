"""Jitted twins of the kernels in ``_kernels_numpy``.

Same names, same signatures, loop-oriented bodies. Compiled lazily on
first call; ``cache=True`` persists the machine code next to the package
so repeated runs (and worker processes) skip recompilation.
"""

import math

import numpy as np
from numba import njit

LOG_ZERO = -1e30


@njit(cache=True)
def pmf_conv(p):
    n = p.size
    pmf = np.zeros(n + 1)
    pmf[0] = 1.0
    for i in range(n):
        pi = p[i]
        qi = 1.0 - pi
        hi = i + 1
        last = pmf[0]
        pmf[0] = qi * last
        for t in range(1, hi + 1):
            cur = pmf[t]
            pmf[t] = qi * cur + pi * last
            last = cur
    return pmf


@njit(cache=True)
def pmf_conv_prefix(p, dmax):
    pmf = np.zeros(dmax + 1)
    pmf[0] = 1.0
    for i in range(p.size):
        pi = p[i]
        qi = 1.0 - pi
        hi = min(i + 1, dmax)
        last = pmf[0]
        pmf[0] = qi * last
        for t in range(1, hi + 1):
            cur = pmf[t]
            pmf[t] = qi * cur + pi * last
            last = cur
    return pmf


@njit(cache=True)
def _char_fn(p):
    n = p.size
    m = n + 1
    half = m // 2
    zre = np.ones(m)
    zim = np.zeros(m)
    w = 2.0 * np.pi / m
    for l in range(1, half + 1):
        c = math.cos(w * l)
        s = math.sin(w * l)
        re = 1.0
        im = 0.0
        for i in range(n):
            pi = p[i]
            a = 1.0 - pi + pi * c
            b = pi * s
            re, im = re * a - im * b, re * b + im * a
        zre[l] = re
        zim[l] = im
    for l in range(half + 1, m):
        zre[l] = zre[m - l]
        zim[l] = -zim[m - l]
    return zre, zim


@njit(cache=True)
def pmf_dft(p):
    m = p.size + 1
    zre, zim = _char_fn(p)
    w = 2.0 * np.pi / m
    out = np.empty(m)
    for d in range(m):
        acc = 0.0
        for l in range(m):
            acc += math.cos(w * l * d) * zre[l] + math.sin(w * l * d) * zim[l]
        out[d] = acc / m
    return out


@njit(cache=True)
def pmf_dft_single(p, d):
    n = p.size
    m = n + 1
    half = m // 2
    w = 2.0 * np.pi / m
    acc = 1.0  # l = 0 term: z_0 = 1
    for l in range(1, half + 1):
        c = math.cos(w * l)
        s = math.sin(w * l)
        re = 1.0
        im = 0.0
        for i in range(n):
            pi = p[i]
            a = 1.0 - pi + pi * c
            b = pi * s
            re, im = re * a - im * b, re * b + im * a
        # e^{-iwld} z_l plus its conjugate mirror at m-l
        contrib = math.cos(w * l * d) * re + math.sin(w * l * d) * im
        if 2 * l == m:
            acc += contrib
        else:
            acc += 2.0 * contrib
    return acc / m


@njit(cache=True)
def apl_terms(r_desc, prefix_r, nj, dj, ev_flat, ev_off, lambdas):
    k = nj.size
    terms = np.empty(k)
    flags = np.zeros(k, dtype=np.bool_)
    for j in range(k):
        lam = lambdas[j]
        n = nj[j]
        d = dj[j]
        sum_logp = 0.0
        sum_rl_ev = 0.0
        ok = True
        for t in range(ev_off[j], ev_off[j + 1]):
            rl = r_desc[ev_flat[t]] * lam
            pe = -math.expm1(-rl)
            if pe <= 0.0:
                ok = False
                break
            sum_logp += math.log(pe)
            sum_rl_ev += rl
        log_a = sum_logp - (lam * prefix_r[n] - sum_rl_ev)
        if not ok or not math.isfinite(log_a):
            terms[j] = -np.inf
            flags[j] = True
            continue
        pvec = np.empty(n)
        for i in range(n):
            pvec[i] = -math.expm1(-r_desc[i] * lam)
        b = pmf_conv_prefix(pvec, d)[d]
        if b <= 0.0:
            terms[j] = -np.inf
            flags[j] = True
            continue
        val = log_a - math.log(b)
        if val > 0.0:
            val = 0.0
        terms[j] = val
    return terms, flags

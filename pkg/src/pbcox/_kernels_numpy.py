"""Pure-numpy implementations of the hot numeric kernels.

These are the fallback twins of the jitted kernels in ``_kernels_numba``;
both modules expose the same function names and signatures, and the test
suite asserts they agree. Selection happens in ``_backend``.

Conventions shared by both backends:

* probability vectors are 1-d float64 arrays with entries in [0, 1];
* DFT kernels return the raw real part of the inverse transform without
  clamping (the public layer owns the clamping policy);
* ``apl_terms`` returns ``-inf`` with a flag instead of raising, so that
  optimizers can backtrack through bad regions.
"""

import numpy as np

LOG_ZERO = -1e30  # sentinel for log of an exactly-zero probability


def pmf_conv(p):
    """Full pmf of the sum of independent Bernoulli(p_i) by direct convolution."""
    n = p.size
    pmf = np.zeros(n + 1)
    pmf[0] = 1.0
    for i in range(n):
        pi = p[i]
        pmf[1 : i + 2] = pmf[1 : i + 2] * (1.0 - pi) + pmf[0 : i + 1] * pi
        pmf[0] *= 1.0 - pi
    return pmf


def pmf_conv_prefix(p, dmax):
    """Entries 0..dmax of the convolution pmf.

    Truncation above ``dmax`` is exact for the retained entries: probability
    mass that moves past ``dmax`` can never flow back down.
    """
    pmf = np.zeros(dmax + 1)
    pmf[0] = 1.0
    for i in range(p.size):
        pi = p[i]
        hi = min(i + 1, dmax)
        pmf[1 : hi + 1] = pmf[1 : hi + 1] * (1.0 - pi) + pmf[0:hi] * pi
        pmf[0] *= 1.0 - pi
    return pmf


def _char_fn(p):
    """Characteristic-function samples z_l = prod_i (1 - p_i + p_i e^{i w l}).

    Only l = 0..floor(m/2) is computed; the rest follows from conjugate
    symmetry z_{m-l} = conj(z_l).
    """
    m = p.size + 1
    half = m // 2
    e = np.exp(2j * np.pi * np.arange(1, half + 1) / m)
    zh = np.ones(half, dtype=np.complex128)
    for pi in p:
        zh *= (1.0 - pi) + pi * e
    z = np.ones(m, dtype=np.complex128)
    z[1 : half + 1] = zh
    z[half + 1 :] = np.conj(z[1 : m - half][::-1])
    return z


def pmf_dft(p):
    """Full pmf via the discrete Fourier transform of the characteristic function."""
    m = p.size + 1
    return np.fft.fft(_char_fn(p)).real / m


def pmf_dft_single(p, d):
    """Single pmf entry via the characteristic-function inverse transform."""
    m = p.size + 1
    z = _char_fn(p)
    phase = np.exp(-2j * np.pi * np.arange(m) * d / m)
    return float((phase * z).sum().real) / m


def apl_terms(r_desc, prefix_r, nj, dj, ev_flat, ev_off, lambdas):
    """Per-event-time log terms of the exact tie-aware partial likelihood.

    Parameters use the time-descending subject order: the risk set at the
    j-th distinct event time is ``r_desc[:nj[j]]``; ``prefix_r[m]`` is the
    sum of the first m risk scores; ``ev_flat[ev_off[j]:ev_off[j+1]]`` holds
    the positions (in that order) of the subjects failing at time j.

    The denominator uses the truncated convolution, which is exact and,
    for a single pmf entry, cheaper than the DFT route at every size.

    Returns (terms, flags); a flagged entry is ``-inf`` from a zero event
    probability or an underflowed denominator.
    """
    k = nj.size
    terms = np.empty(k)
    flags = np.zeros(k, dtype=bool)
    for j in range(k):
        lam = lambdas[j]
        n = int(nj[j])
        d = int(dj[j])
        ev = ev_flat[ev_off[j] : ev_off[j + 1]]
        r_ev = r_desc[ev] * lam
        p_ev = -np.expm1(-r_ev)
        if np.any(p_ev <= 0.0):
            terms[j] = -np.inf
            flags[j] = True
            continue
        # survivors contribute log(1-p) = -r*lam exactly; inf risk scores
        # produce a non-finite value here, flagged just below
        with np.errstate(invalid="ignore"):
            surv = lam * prefix_r[n] - float(r_ev.sum())
            log_a = float(np.log(p_ev).sum()) - surv
        if not np.isfinite(log_a):
            terms[j] = -np.inf
            flags[j] = True
            continue
        pvec = -np.expm1(-r_desc[:n] * lam)
        b = pmf_conv_prefix(pvec, d)[d]
        if b <= 0.0:
            terms[j] = -np.inf
            flags[j] = True
            continue
        terms[j] = min(log_a - np.log(b), 0.0)
    return terms, flags

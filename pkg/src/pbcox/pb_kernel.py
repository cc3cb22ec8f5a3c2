"""Poisson-binomial probability mass function by four algorithms.

The distribution of a sum of independent, non-identically distributed
Bernoulli indicators underlies the exact tie-aware partial likelihood:
its pmf at the observed tie count is the likelihood denominator. Four
routes are provided:

* ``pb_pmf_enum``    -- explicit sum over all size-d subsets (test oracle)
* ``pb_pmf_dft``     -- inverse transform of the characteristic function
* ``pb_pmf_conv``    -- direct convolution of the two-point distributions
* ``pb_pmf_poisson`` -- one-parameter Poisson approximation

plus ``lecam_bound``, the Le Cam upper bound on the average absolute
error of the Poisson approximation. Everything here is pure and
deterministic; heavy loops live in the selected kernel backend.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .exceptions import CapacityError, DomainError, EvaluationError

#: refuse enumeration above this length; the work grows as 2^n
ENUM_CAP = 25

#: production routing: direct convolution up to here, DFT beyond
CONV_DFT_CUTOFF = 50

#: sentinel returned by log-pmf when the probability is exactly zero
LOG_ZERO = kernels.LOG_ZERO

# negative DFT output larger than this is rounding noise and clamps to 0;
# anything below it signals a bug rather than roundoff
_DFT_NOISE_FLOOR = -1e-6


@dataclass(frozen=True)
class PBResult:
    """A single pmf value together with the algorithm that produced it."""

    value: float
    algorithm: str


def _as_probs(probs):
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size < 1:
        raise DomainError("probs must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise DomainError("probs must lie in [0, 1]")
    return p


def _check_d(d, n):
    d = int(d)
    if d < 0 or d > n:
        raise DomainError(f"d={d} outside [0, {n}]")
    return d


def _clamp_dft(value):
    if value < _DFT_NOISE_FLOOR:
        raise EvaluationError(
            f"DFT pmf value {value:g} below noise floor {_DFT_NOISE_FLOOR:g}"
        )
    return min(max(value, 0.0), 1.0)


def _enum_vector(p):
    """Full pmf by enumerating every subset product, grouped by subset size.

    Work and memory grow as 2^n (about 8*2^n bytes), which is why the cap
    exists; this is the independent oracle, not a production path.
    """
    n = p.size
    size = 1 << n
    w = np.empty(size)
    w[0] = 1.0
    length = 1
    for pi in p:
        w[length : 2 * length] = w[:length] * pi
        w[:length] *= 1.0 - pi
        length *= 2
    counts = np.bitwise_count(np.arange(size, dtype=np.uint64)).astype(np.intp)
    return np.bincount(counts, weights=w, minlength=n + 1)


def pb_pmf_enum(probs, d):
    """Exact pmf entry by enumeration over all size-d subsets."""
    p = _as_probs(probs)
    if p.size > ENUM_CAP:
        raise CapacityError(f"enumeration capped at n={ENUM_CAP}, got {p.size}")
    d = _check_d(d, p.size)
    return PBResult(float(_enum_vector(p)[d]), "enumeration")


def pb_pmf_dft(probs, d):
    """Exact pmf entry via the DFT of the characteristic function.

    The imaginary residue is discarded and the result clamped to [0, 1];
    a real part below the noise floor raises ``EvaluationError``.
    """
    p = _as_probs(probs)
    d = _check_d(d, p.size)
    return PBResult(_clamp_dft(kernels.pmf_dft_single(p, d)), "dft_cf")


def pb_pmf_conv(probs, d):
    """Exact pmf entry by sequential convolution of two-point distributions."""
    p = _as_probs(probs)
    d = _check_d(d, p.size)
    return PBResult(float(kernels.pmf_conv_prefix(p, d)[d]), "convolution")


def pb_pmf_poisson(probs, d):
    """Poisson approximation mu^d e^{-mu} / d! with mu the sum of probs.

    Unlike the exact routes, d may exceed the number of trials.
    """
    p = _as_probs(probs)
    d = int(d)
    if d < 0:
        raise DomainError(f"d={d} must be nonnegative")
    mu = float(p.sum())
    if mu == 0.0:
        return PBResult(1.0 if d == 0 else 0.0, "poisson_approx")
    logv = d * math.log(mu) - mu - math.lgamma(d + 1)
    return PBResult(math.exp(logv), "poisson_approx")


def pb_pmf(probs, d):
    """Exact pmf entry by the default production route.

    Direct convolution is exact and fast at small n; the DFT route scales
    better, so it takes over above ``CONV_DFT_CUTOFF``.
    """
    p = _as_probs(probs)
    d = _check_d(d, p.size)
    if p.size <= CONV_DFT_CUTOFF:
        return PBResult(float(kernels.pmf_conv_prefix(p, d)[d]), "convolution")
    return PBResult(_clamp_dft(kernels.pmf_dft_single(p, d)), "dft_cf")


def pb_log_pmf(probs, d):
    """log of the routed pmf entry, with ``LOG_ZERO`` standing in for -inf."""
    value = pb_pmf(probs, d).value
    return math.log(value) if value > 0.0 else LOG_ZERO


def lecam_bound(probs):
    """Le Cam bound (2/n) * sum(p_i^2) on the average absolute error of
    the Poisson approximation across all pmf entries."""
    p = _as_probs(probs)
    return 2.0 * float(np.sum(p * p)) / p.size


def pmf_vector(probs, algorithm="auto"):
    """Full pmf over d = 0..n as an array; mainly for tests and diagnostics.

    ``algorithm`` is one of 'auto', 'enumeration', 'dft_cf', 'convolution',
    'poisson_approx'.
    """
    p = _as_probs(probs)
    n = p.size
    if algorithm == "auto":
        algorithm = "convolution" if n <= CONV_DFT_CUTOFF else "dft_cf"
    if algorithm == "convolution":
        return kernels.pmf_conv(p)
    if algorithm == "dft_cf":
        raw = kernels.pmf_dft(p)
        return np.array([_clamp_dft(v) for v in raw])
    if algorithm == "enumeration":
        if n > ENUM_CAP:
            raise CapacityError(f"enumeration capped at n={ENUM_CAP}, got {n}")
        return _enum_vector(p)
    if algorithm == "poisson_approx":
        return np.array([pb_pmf_poisson(p, d).value for d in range(n + 1)])
    raise DomainError(f"unknown algorithm {algorithm!r}")

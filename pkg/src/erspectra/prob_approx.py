"""Poisson and binomial tails, Bennett's bound, the Gaussian tail and the
discretised Gaussian tail Q(v, w) used by the reference intensity.

All pmf arithmetic runs in log space with log-gamma so that means of order
1e4 do not underflow.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erfc, gammaln, logsumexp

from erspectra.errors import DomainError
from erspectra.scalar_theory import bennett_h

_SQRT2 = math.sqrt(2.0)
_LOG_REL_CUTOFF = math.log(1e-18)


def gaussian_tail(s):
    """G(s) = P(N(0,1) >= s)."""
    return 0.5 * erfc(np.asarray(s, dtype=float) / _SQRT2)


def gaussian_density(s):
    s = np.asarray(s, dtype=float)
    return np.exp(-0.5 * s * s) / math.sqrt(2.0 * math.pi)


def poisson_logpmf(k, mu):
    k = np.asarray(k, dtype=float)
    return k * math.log(mu) - mu - gammaln(k + 1.0)


def _log_sum_truncated(log_terms: np.ndarray) -> float:
    top = float(np.max(log_terms))
    kept = log_terms[log_terms >= top + _LOG_REL_CUTOFF]
    return float(logsumexp(kept))


def _log_upper_tail(mu: float, k: int) -> float:
    """log P(Poisson(mu) >= k) for k > 0, summed upward from k."""
    span = int(math.ceil(max(k, mu) - k + 40.0 * math.sqrt(mu) + 60.0))
    j = np.arange(k, k + span + 1)
    return _log_sum_truncated(poisson_logpmf(j, mu))


def _log_lower_tail(mu: float, k: int) -> float:
    """log P(Poisson(mu) <= k) for k >= 0, summed downward from k."""
    lo = max(0, int(math.floor(min(k, mu) - 40.0 * math.sqrt(mu) - 60.0)))
    j = np.arange(lo, k + 1)
    return _log_sum_truncated(poisson_logpmf(j, mu))


def poisson_tail(mu: float, k: int, direction: str = ">=") -> float:
    """P(Poisson(mu) >= k) or P(Poisson(mu) <= k).

    The tail on the far side of the mean is summed directly; the near side is
    the complement of the far tail, which keeps relative accuracy where the
    probability is small.
    """
    if mu <= 0:
        raise DomainError(f"mu must be positive, got {mu}")
    k = int(k)
    if direction == ">=":
        if k <= 0:
            return 1.0
        if k > mu:
            return math.exp(_log_upper_tail(mu, k))
        return -math.expm1(_log_lower_tail(mu, k - 1))
    if direction == "<=":
        if k < 0:
            return 0.0
        if k < mu:
            return math.exp(_log_lower_tail(mu, k))
        return -math.expm1(_log_upper_tail(mu, k + 1))
    raise ValueError(f"direction must be '>=' or '<=', got {direction!r}")


def bennett_bound(mu: float, a: float) -> float:
    """Upper bound exp(-mu h(a)) on P(Poisson(mu) >= (1 + a) mu)."""
    if mu <= 0 or a <= 0:
        raise DomainError("bennett_bound needs mu > 0 and a > 0")
    return math.exp(-mu * bennett_h(a))


def bennett_lower_bound(mu: float, a: float) -> float:
    """Bound exp(-mu a^2 / 2) on the lower tail P(Poisson(mu) <= (1 - a) mu)."""
    if mu <= 0 or a <= 0:
        raise DomainError("bennett_lower_bound needs mu > 0 and a > 0")
    return math.exp(-mu * a * a / 2.0)


def integer_threshold(x: float) -> int:
    """Smallest integer k with k >= x, treating floating values within
    rounding distance of an integer as that integer.
    """
    nearest = round(x)
    if abs(x - nearest) <= 1e-9 * max(1.0, abs(x)):
        return int(nearest)
    return int(math.ceil(x))


def q_statistic(v: int, w: float, d: float) -> float:
    """Q(v, w) = P(Poisson(d v) - d v >= w sqrt(d v))."""
    if v < 1 or d <= 0:
        raise DomainError("q_statistic needs v >= 1 and d > 0")
    mu = d * v
    x = mu + w * math.sqrt(mu)
    if not math.isfinite(x):
        return 1.0 if x < 0 else 0.0
    return poisson_tail(mu, integer_threshold(x), ">=")


def binomial_logpmf(v: int, n: int, p: float) -> float:
    if p == 0.0:
        return 0.0 if v == 0 else -math.inf
    if p == 1.0:
        return 0.0 if v == n else -math.inf
    return (
        gammaln(n + 1.0)
        - gammaln(v + 1.0)
        - gammaln(n - v + 1.0)
        + v * math.log(p)
        + (n - v) * math.log1p(-p)
    )


def binomial_poisson_check(n: int, p: float, v: int, C: float = 5.0) -> tuple[float, float]:
    """Ratio P(Bin(n, p) = v) / P(Poisson(np) = v) and the envelope 1 + C(v^2/n + p^2 n).

    The ratio is within the envelope when ``|ratio - 1| <= bound - 1``.
    """
    if not (0 <= v <= math.sqrt(n)) or not (0 <= p <= 1.0 / math.sqrt(n)):
        raise DomainError(f"need 0 <= v <= sqrt(n) and 0 <= p <= 1/sqrt(n); got n={n}, p={p}, v={v}")
    bound = 1.0 + C * (v * v / n + p * p * n)
    mu = n * p
    if mu == 0.0:
        return (1.0 if v == 0 else math.nan), bound
    log_ratio = binomial_logpmf(v, n, p) - float(poisson_logpmf(v, mu))
    return math.exp(log_ratio), bound

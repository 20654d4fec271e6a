"""Closed-form scalar functions: the degree-rate function, the typical
maximal degree, the edge scaling constants and the eigenvalue predictor
Lambda(alpha, beta) of the model tridiagonal operator.
"""

from __future__ import annotations

import dataclasses
import math

from erspectra.errors import DomainError

# 1 / (log 4 - 1): the critical ratio d / log N at which the typical
# maximal normalized degree equals 2.
B_STAR = 1.0 / (math.log(4.0) - 1.0)

# Smallest beta for which the square root inside Lambda stays real for all alpha >= 2.
BETA_MIN = 2.0 * (math.sqrt(2.0) - 1.0)

BISECTION_TOL = 1e-12


def eval_f(u: float, d: float) -> float:
    """Rate function u log u - (u - 1) + (1/d) log sqrt(2 pi d u).

    ``exp(-d f(u))`` is the Stirling approximation of the probability that a
    Poisson(d) variable equals ``d u``.
    """
    if d <= 0:
        raise DomainError(f"d must be positive, got {d}")
    if u < 1:
        raise DomainError(f"u must be >= 1, got {u}")
    return u * math.log(u) - (u - 1.0) + 0.5 * math.log(2.0 * math.pi * d * u) / d


def bennett_h(a: float) -> float:
    """Bennett's function (1 + a) log(1 + a) - a, defined for a >= -1."""
    if a < -1:
        raise DomainError(f"h is defined for a >= -1, got {a}")
    if a == -1:
        return 1.0
    return (1.0 + a) * math.log1p(a) - a


def _bisect_increasing(func, target, lo, hi, tol=BISECTION_TOL):
    """Solve func(x) = target for increasing func on [lo, hi]."""
    while func(hi) < target:
        hi = 2.0 * hi
    if func(lo) > target:
        raise DomainError("target lies below the bracket; no solution")
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if func(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_u(N: int, d: float) -> float:
    """Typical maximal normalized degree: the root of f(u) = log N / d."""
    target = math.log(N) / d
    hi = max(4.0, 12.0 * target)
    return _bisect_increasing(lambda u: eval_f(u, d), target, 1.0, hi)


def solve_a(N: int, d: float) -> float:
    """Root of h(a - 1) = log N / d, a Stirling-free variant of :func:`solve_u`."""
    target = math.log(N) / d
    hi = max(4.0, 12.0 * target)
    return 1.0 + _bisect_increasing(bennett_h, target, 0.0, hi)


def tau_of(u: float) -> float:
    """Inverse spacing scale 2 (u-1)^{5/2} / (u^{1/2} (u-2)); pole at u = 2."""
    if u <= 2:
        raise DomainError(f"tau needs u > 2, got {u}")
    return 2.0 * (u - 1.0) ** 2.5 / (math.sqrt(u) * (u - 2.0))


def theta_of(u: float) -> float:
    """Degree-to-eigenvalue slope (u - 1) / sqrt(u)."""
    return (u - 1.0) / math.sqrt(u)


def sigma_of(u: float, d: float) -> float:
    """Edge location sqrt(dd) Lambda(u/dd, 1/dd) with dd = 1 + 1/d.

    For d below about 4.8 the second argument 1/dd drops under the beta
    bound that guarantees a real square root for every alpha >= 2, so the
    formula is evaluated directly and only rejected when it is not real.
    """
    dd = 1.0 + 1.0 / d
    return math.sqrt(dd) * _lambda_formula(u / dd, 1.0 / dd)


@dataclasses.dataclass(frozen=True)
class ScaleParams:
    """All scalar constants attached to one (N, d) pair."""

    N: int
    d: float
    d_frak: float
    u_frak: float
    a_frak: float
    tau: float
    theta: float
    sigma: float

    @property
    def log_n_over_d(self) -> float:
        return math.log(self.N) / self.d

    @property
    def frac_du(self) -> float:
        """The representative of d * u_frak in [-1/2, 1/2)."""
        return frac_part(self.d * self.u_frak)

    def rescale(self, lam):
        """Map an eigenvalue to the edge scale d tau (lambda - sigma)."""
        return self.d * self.tau * (lam - self.sigma)

    def unscale(self, s):
        return self.sigma + s / (self.d * self.tau)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def frac_part(x: float) -> float:
    """Representative of x modulo 1 in [-1/2, 1/2)."""
    return x - math.floor(x + 0.5)


def solve_scale_params(N: int, d: float) -> ScaleParams:
    """Solve for u_frak and a_frak and evaluate tau, theta and sigma.

    Raises :class:`DomainError` when ``u_frak <= 2``: the edge scaling has a
    pole there and the predictor is undefined.
    """
    if N < 3:
        raise DomainError(f"N must be >= 3, got {N}")
    if not 0 < d <= 3.0 * math.log(N):
        raise DomainError(f"need 0 < d <= 3 log N, got d={d}, N={N}")
    u = solve_u(N, d)
    if u <= 2:
        raise DomainError(f"subcritical predictor undefined: u_frak = {u:.6f} <= 2")
    a = solve_a(N, d)
    return ScaleParams(
        N=int(N),
        d=float(d),
        d_frak=1.0 + 1.0 / d,
        u_frak=u,
        a_frak=a,
        tau=tau_of(u),
        theta=theta_of(u),
        sigma=sigma_of(u, d),
    )


def _lambda_formula(alpha: float, beta: float) -> float:
    if beta == 1.0:
        return alpha / math.sqrt(alpha - 1.0)
    disc = (alpha + beta) ** 2 - 4.0 * alpha
    if disc < 0:
        raise DomainError(f"Lambda formula is not real at ({alpha}, {beta})")
    inner = alpha - 0.5 * beta * (alpha + beta) + 0.5 * beta * math.sqrt(disc)
    if inner <= 0:
        raise DomainError(f"Lambda formula is not real at ({alpha}, {beta})")
    return alpha / math.sqrt(inner)


def lambda_ab(alpha: float, beta: float) -> float:
    """Largest eigenvalue of the model operator with off-diagonals
    (sqrt(alpha), sqrt(beta), 1, 1, ...).
    """
    if alpha < 2 or beta < BETA_MIN:
        raise DomainError(
            f"Lambda needs alpha >= 2 and beta >= {BETA_MIN:.6f}; got ({alpha}, {beta})"
        )
    return _lambda_formula(alpha, beta)


def lambda_d(alpha: float, beta: float, d: float) -> float:
    """Largest eigenvalue of the operator with off-diagonals
    (sqrt(alpha), sqrt(beta), sqrt(dd), sqrt(dd), ...), dd = 1 + 1/d.
    """
    if d <= 0:
        raise DomainError(f"d must be positive, got {d}")
    dd = 1.0 + 1.0 / d
    return math.sqrt(dd) * lambda_ab(alpha / dd, beta / dd)


def lambda_derivatives_at_beta1(alpha: float) -> tuple[float, float]:
    """Partial derivatives of Lambda in alpha and beta at beta = 1."""
    if alpha <= 2:
        raise DomainError(f"derivatives need alpha > 2, got {alpha}")
    d_alpha = (alpha - 2.0) / (2.0 * (alpha - 1.0) ** 1.5)
    d_beta = alpha * (alpha - 2.0) / (2.0 * (alpha - 1.0) ** 2.5)
    return d_alpha, d_beta


def quartic_q(alpha: float, beta: float, lam: float) -> float:
    """Biquadratic whose largest positive root is Lambda(alpha, beta)."""
    lam2 = lam * lam
    return (1.0 - beta) * lam2 * lam2 + (alpha * beta + beta * beta - 2.0 * alpha) * lam2 + alpha * alpha


def is_admissible(alpha: float, beta: float, c: float = 0.25) -> bool:
    """Region where the gap and expansion claims for Lambda are made."""
    return alpha > 2 and beta >= BETA_MIN and abs(beta - 1.0) <= c * min(1.0, alpha - 2.0)

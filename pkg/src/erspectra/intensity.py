"""Limiting intensity of the rescaled edge eigenvalue process.

On the rescaled axis s = d tau (lambda - sigma) the edge eigenvalues converge
to a Poisson process whose tail mass is

    rho(E_s) = sum_l u^(h + l) G(s + theta (h + l)),   h = <d u>,

where G is the standard Gaussian tail and the sum runs over all integers l.
Each term is the contribution of vertices whose degree sits l below the
lattice point nearest d u.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy.special import log_ndtr, logsumexp

from erspectra.errors import DomainError
from erspectra.prob_approx import poisson_logpmf, q_statistic
from erspectra.scalar_theory import ScaleParams, frac_part, theta_of

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
REL_TOL = 1e-12


@dataclasses.dataclass(frozen=True)
class IntensityCurve:
    params: ScaleParams
    frac_part: float
    ell_cutoff: int = 50


def make_curve(params: ScaleParams, ell_cutoff: int = 50) -> IntensityCurve:
    return IntensityCurve(params, frac_part(params.d * params.u_frak), int(ell_cutoff))


def _initial_cutoff(u, theta, s_abs, floor):
    return max(floor, math.ceil(10.0 + s_abs / theta) + math.ceil(10.0 / math.log(u)))


def _log_lattice_sum(u, h, theta, s, L, density):
    s = np.atleast_1d(np.asarray(s, dtype=float))
    ell = np.arange(-L, L + 1, dtype=float)
    shift = h + ell
    arg = s[:, None] + theta * shift[None, :]
    if density:
        log_kernel = -0.5 * arg * arg - LOG_SQRT_2PI
    else:
        log_kernel = log_ndtr(-arg)
    return logsumexp(shift[None, :] * math.log(u) + log_kernel, axis=1)


def _lattice_sum(u, h, theta, s, floor, density=False):
    """Evaluate the two-sided lattice sum, doubling the cutoff until stable.

    At s = +inf the sum is 0; at s = -inf the tail is +inf and the density 0.
    """
    s_arr = np.asarray(s, dtype=float)
    finite = np.isfinite(s_arr)
    if not np.all(finite):
        out = np.where(s_arr > 0, 0.0, 0.0 if density else np.inf).astype(float)
        if np.any(finite):
            out[finite] = _lattice_sum(u, h, theta, s_arr[finite], floor, density)
        return out if s_arr.ndim else float(out)
    s_abs = float(np.max(np.abs(s_arr))) if s_arr.size else 0.0
    L = _initial_cutoff(u, theta, s_abs, floor)
    current = _log_lattice_sum(u, h, theta, s_arr, L, density)
    for _ in range(20):
        L *= 2
        refined = _log_lattice_sum(u, h, theta, s_arr, L, density)
        if np.all(np.abs(np.expm1(refined - current)) < REL_TOL):
            current = refined
            break
        current = refined
    out = np.exp(current)
    return out.reshape(s_arr.shape) if s_arr.ndim else float(out[0])


def _log_tail(curve: IntensityCurve, s):
    """log rho(E_s), usable where rho itself would overflow or underflow."""
    p = curve.params
    s_arr = np.asarray(s, dtype=float)
    s_abs = float(np.max(np.abs(s_arr))) if s_arr.size else 0.0
    L = 2 * _initial_cutoff(p.u_frak, p.theta, s_abs, curve.ell_cutoff)
    out = _log_lattice_sum(p.u_frak, curve.frac_part, p.theta, s_arr, L, False)
    return out.reshape(s_arr.shape) if s_arr.ndim else float(out[0])


def rho_tail(curve: IntensityCurve, s):
    """Expected number of rescaled edge eigenvalues in [s, infinity)."""
    p = curve.params
    return _lattice_sum(p.u_frak, curve.frac_part, p.theta, s, curve.ell_cutoff)


def rho_density(curve: IntensityCurve, s):
    """Density of the intensity measure, equal to -d/ds rho_tail(s)."""
    p = curve.params
    return _lattice_sum(p.u_frak, curve.frac_part, p.theta, s, curve.ell_cutoff, density=True)


def rho_interval(curve: IntensityCurve, lo: float, hi: float) -> float:
    """Intensity mass of [lo, hi)."""
    return float(rho_tail(curve, lo) - rho_tail(curve, hi))


def limit_cdf_largest(u_bar: float, h: float, s, ell_cutoff: int = 50):
    """CDF exp(-sum_l u^(h+l) G(s + theta(u)(h+l))) of the largest rescaled point."""
    if u_bar <= 2:
        raise DomainError(f"need u_bar > 2, got {u_bar}")
    if not -0.5 <= h < 0.5:
        raise DomainError(f"h must lie in [-1/2, 1/2), got {h}")
    return np.exp(-_lattice_sum(u_bar, h, theta_of(u_bar), s, ell_cutoff))


@dataclasses.dataclass(frozen=True)
class WindowSpec:
    K: float
    kappa: float
    residual: float

    @property
    def kappa_positive(self) -> bool:
        return self.kappa > 0


def solve_kappa(curve: IntensityCurve, K: float, tol: float = 1e-9) -> WindowSpec:
    """Window edge kappa with rho([-kappa, infinity)) = K.

    A non-positive kappa is returned as is (``kappa_positive`` is then False);
    it means K is too small for the window to contain the origin.
    """
    if K <= 0:
        raise DomainError(f"K must be positive, got {K}")
    lo, hi = -1.0, 1.0
    while rho_tail(curve, lo) <= K:
        lo *= 2.0
    while rho_tail(curve, hi) >= K:
        hi *= 2.0
    mid = 0.5 * (lo + hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        value = rho_tail(curve, mid)
        if abs(value - K) <= 0.01 * tol * K or hi - lo <= 1e-15 * max(1.0, abs(mid)):
            break
        if value > K:
            lo = mid
        else:
            hi = mid
    residual = abs(rho_tail(curve, mid) - K)
    return WindowSpec(K=float(K), kappa=-mid, residual=float(residual))


def window_q(params: ScaleParams, gamma: float, c_star: float) -> float:
    """Half-width q = c_* d^(2 gamma - 1)/log a - a + u of the alpha window around u."""
    d = params.d
    return c_star * d ** (2.0 * gamma - 1.0) / math.log(params.a_frak) - params.a_frak + params.u_frak


def rho_tilde_tail(N: int, d: float, q: float, s, params: ScaleParams | None = None):
    """Finite-N intensity sum over degrees v with |v - d u| <= d q of
    N P(Poisson(d) = v) Q(v, s - theta (v - d u)).
    """
    from erspectra.scalar_theory import solve_scale_params

    if q < 0:
        raise DomainError(f"q must be non-negative, got {q}")
    p = params if params is not None else solve_scale_params(N, d)
    center = d * p.u_frak
    vs = np.arange(max(1, math.ceil(center - d * q - 1e-12)), math.floor(center + d * q + 1e-12) + 1)
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.zeros_like(s_arr)
    for v in vs:
        weight = N * math.exp(float(poisson_logpmf(v, d)))
        for i, si in enumerate(s_arr):
            out[i] += weight * q_statistic(int(v), si - p.theta * (v - center), d)
    return out.reshape(np.shape(s)) if np.ndim(s) else float(out[0])

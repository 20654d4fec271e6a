"""Finite truncations of the model operator Z_omega(alpha, beta).

Z_omega(alpha, beta) is the symmetric tridiagonal operator on l^2(N) with zero
diagonal and off-diagonal entries (sqrt(alpha), sqrt(beta), sqrt(omega),
sqrt(omega), ...).  Up to the factor sqrt(d) it is the adjacency operator of a
rooted tree, restricted to radial functions.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy.linalg import solve_banded

from erspectra.errors import ConvergenceError, DomainError
from erspectra.scalar_theory import lambda_d


@dataclasses.dataclass(frozen=True)
class TridiagonalModel:
    omega: float
    alpha: float
    beta: float
    n: int

    @property
    def offdiag(self) -> np.ndarray:
        e = np.full(self.n - 1, math.sqrt(self.omega))
        e[0] = math.sqrt(self.alpha)
        e[1] = math.sqrt(self.beta)
        return e

    def dense(self) -> np.ndarray:
        e = self.offdiag
        return np.diag(e, 1) + np.diag(e, -1)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        e = self.offdiag
        out = np.zeros_like(v, dtype=float)
        out[:-1] += e * v[1:]
        out[1:] += e * v[:-1]
        return out


@dataclasses.dataclass(frozen=True)
class EigenPair:
    value: float
    vector: np.ndarray
    residual: float


def build_model(omega: float, alpha: float, beta: float, n: int = 256) -> TridiagonalModel:
    if n < 4:
        raise ValueError(f"truncation size must be >= 4, got {n}")
    if omega <= 0 or alpha <= 0 or beta <= 0:
        raise DomainError("omega, alpha and beta must be positive")
    return TridiagonalModel(float(omega), float(alpha), float(beta), int(n))


def sturm_count(offdiag: np.ndarray, x: float) -> int:
    """Number of eigenvalues strictly below x of the zero-diagonal tridiagonal
    matrix with the given off-diagonal, from the signs of the LDL^T pivots.
    """
    tiny = np.finfo(float).tiny ** 0.5
    count = 0
    q = -x
    if q < 0:
        count += 1
    for e in offdiag:
        if q == 0.0:
            q = tiny
        q = -x - e * e / q
        if q < 0:
            count += 1
    return count


def eigenvalue_by_rank(model: TridiagonalModel, rank: int, tol: float = 1e-15) -> float:
    """The eigenvalue with ``rank`` eigenvalues strictly below it (0-based, ascending)."""
    e = model.offdiag
    bound = 2.0 * float(np.max(np.abs(e))) + 1.0
    lo, hi = -bound, bound
    for _ in range(200):
        if hi - lo <= tol * max(1.0, abs(lo), abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        if sturm_count(e, mid) <= rank:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _inverse_iteration(model, lam, max_iter=8, tol=1e-10):
    n = model.n
    e = model.offdiag
    shift = lam + 1e-13 * max(1.0, abs(lam))
    banded = np.zeros((3, n))
    banded[0, 1:] = e
    banded[1, :] = -shift
    banded[2, :-1] = e
    # deterministic start vector with no symmetry that could hide the target
    v = 1.0 / np.arange(1, n + 1, dtype=float)
    v /= np.linalg.norm(v)
    residual = np.inf
    for it in range(1, max_iter + 1):
        w = solve_banded((1, 1), banded, v)
        v = w / np.linalg.norm(w)
        residual = float(np.linalg.norm(model.matvec(v) - lam * v))
        if residual <= tol:
            return v, residual, it
    raise ConvergenceError(
        f"inverse iteration stalled at residual {residual:.3e}", iterations=max_iter, residual=residual
    )


def top_eigenpair(model: TridiagonalModel) -> EigenPair:
    """Largest eigenpair by Sturm bisection followed by inverse iteration."""
    lam = eigenvalue_by_rank(model, model.n - 1)
    v, residual, _ = _inverse_iteration(model, lam)
    if v[0] < 0:
        v = -v
    return EigenPair(lam, v, residual)


def spectrum(model: TridiagonalModel) -> np.ndarray:
    """Full ascending spectrum, used for the symmetry and uniqueness checks."""
    return np.array([eigenvalue_by_rank(model, k) for k in range(model.n)])


def count_above(model: TridiagonalModel, x: float) -> int:
    return model.n - sturm_count(model.offdiag, x)


def geometric_ratio(lam: float, omega: float) -> float:
    """Decay ratio 2 sqrt(omega) / (lam + sqrt(lam^2 - 4 omega)) of the eigenvector tail."""
    if lam <= 2.0 * math.sqrt(omega):
        raise DomainError(f"need lambda > 2 sqrt(omega); got lambda={lam}, omega={omega}")
    return 2.0 * math.sqrt(omega) / (lam + math.sqrt(lam * lam - 4.0 * omega))


def closed_form_eigenvector(alpha, beta, omega, lam, n, sign=1):
    """Explicit eigenvector of the infinite operator, truncated to n entries.

    With ``sign=-1`` the vector belongs to ``-lam``; it is the ``sign=+1``
    vector with every odd entry negated.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    ratio = geometric_ratio(lam, omega)
    root = math.sqrt(lam * lam - 4.0 * omega)
    u = np.empty(n)
    u[0] = 1.0
    u[1] = sign * lam / math.sqrt(alpha)
    u[2] = sign * 2.0 * math.sqrt(beta) / (lam + root) * u[1]
    k = np.arange(3, n)
    u[3:] = u[2] * (sign * ratio) ** (k - 2)
    return u / np.linalg.norm(u)


@dataclasses.dataclass(frozen=True)
class TailReport:
    alpha: float
    beta: float
    d: float
    eigenvalue: float
    ratio: float
    tail_mass: float  # sum over i >= 2 of u_i^2 for the unit vector
    tail_mass_times_alpha: float
    r_decay: int  # smallest r with u_r <= u_2 (d alpha)^-10
    r_threshold: float  # 22 + (1/c)(log d/log alpha)(alpha/(alpha-2))^2
    all_positive: bool


def eigenvector_tail_checks(alpha: float, beta: float, d: float, c_tail: float = 0.1) -> TailReport:
    """Measure the tail of the Perron vector of Z_dd(alpha, beta), dd = 1 + 1/d.

    Uses the geometric form of the infinite eigenvector, so no truncation error
    enters the reported tail mass.
    """
    dd = 1.0 + 1.0 / d
    if alpha <= 2.0 + 4.0 / d:
        raise DomainError(f"need alpha > 2 + 4/d, got alpha={alpha}")
    lam = lambda_d(alpha, beta, d)
    ratio = geometric_ratio(lam, dd)
    root = math.sqrt(lam * lam - 4.0 * dd)
    c1 = lam / math.sqrt(alpha)
    c2 = 2.0 * math.sqrt(beta) / (lam + root)
    u2_sq = (c1 * c2) ** 2
    tail = u2_sq / (1.0 - ratio * ratio)
    norm_sq = 1.0 + c1 * c1 + tail
    target = (d * alpha) ** -10.0
    # u_r / u_2 = ratio^(r-2) <= target
    r_decay = 2 + max(0, math.ceil(math.log(target) / math.log(ratio) - 1e-12))
    r_threshold = 22.0 + (1.0 / c_tail) * (math.log(d) / math.log(alpha)) * (alpha / (alpha - 2.0)) ** 2
    return TailReport(
        alpha=alpha,
        beta=beta,
        d=d,
        eigenvalue=lam,
        ratio=ratio,
        tail_mass=tail / norm_sq,
        tail_mass_times_alpha=alpha * tail / norm_sq,
        r_decay=r_decay,
        r_threshold=r_threshold,
        all_positive=bool(c1 > 0 and c2 > 0 and ratio > 0),
    )

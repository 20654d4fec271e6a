"""Edge eigenpairs of H = A / sqrt(d) and the local objects built around a
high-degree vertex: restricted eigenpairs, the approximate tridiagonal basis,
the stray eigenvalue and localization profiles.
"""

from __future__ import annotations

import dataclasses
import math
import warnings

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from erspectra.errors import ConvergenceError, NotATreeError
from erspectra.graph import Ball, GraphSample, make_rng
from erspectra.tridiagonal import build_model

DENSE_GLOBAL_MAX = 600


@dataclasses.dataclass
class EdgeEigen:
    """Extreme eigenpairs of H.

    ``top_values`` are in decreasing order and ``bottom_values`` in increasing
    order, so index j pairs the j-th largest with the j-th smallest.
    """

    top_values: np.ndarray
    top_vectors: np.ndarray
    bottom_values: np.ndarray
    bottom_vectors: np.ndarray
    top_residuals: np.ndarray
    bottom_residuals: np.ndarray
    k: int

    @property
    def values(self) -> np.ndarray:
        return np.sort(np.concatenate([self.top_values, self.bottom_values]))

    @property
    def residuals(self) -> np.ndarray:
        return np.concatenate([self.top_residuals, self.bottom_residuals])


def _dense_extremes(H: np.ndarray, k: int, largest: bool):
    w, V = np.linalg.eigh(H)
    order = np.argsort(w)[::-1] if largest else np.argsort(w)
    order = order[:k]
    return w[order], V[:, order]


def _sparse_extremes(H, k, largest, v0, tol, ncv, maxiter):
    n = H.shape[0]
    ncv = int(min(n - 1, max(ncv, 2 * k + 1)))
    try:
        w, V = eigsh(H, k=k, which="LA" if largest else "SA", v0=v0, tol=tol, ncv=ncv, maxiter=maxiter)
    except ArpackNoConvergence as exc:
        raise ConvergenceError(
            f"sparse eigensolver did not converge ({len(exc.eigenvalues)} of {k} pairs)",
            iterations=maxiter,
        ) from exc
    order = np.argsort(w)[::-1] if largest else np.argsort(w)
    return w[order], V[:, order]


def _residuals(H, w, V):
    if V.size == 0:
        return np.zeros(0)
    return np.linalg.norm(H @ V - V * w, axis=0)


def top_k_eigenpairs(
    graph: GraphSample,
    k: int,
    which: str = "top",
    seed: int = 0,
    tol: float = 1e-10,
    ncv: int = 64,
    residual_tol: float = 1e-8,
) -> EdgeEigen:
    """The k algebraically largest and/or smallest eigenpairs of H.

    Small graphs are diagonalized densely; otherwise an implicitly restarted
    Lanczos solver runs from a start vector drawn from ``seed``.  Every pair is
    certified by its residual.
    """
    if k < 1 or k > 32:
        raise ValueError(f"k must lie in [1, 32], got {k}")
    if which not in ("top", "bottom", "both"):
        raise ValueError(f"which must be top, bottom or both, got {which!r}")
    N = graph.N
    k = min(k, N)
    H = graph.H
    dense = N <= DENSE_GLOBAL_MAX or k >= N - 1
    v0 = make_rng(seed, 0).standard_normal(N)
    maxiter = int(10 * k * math.sqrt(N)) + 100
    empty = (np.zeros(0), np.zeros((N, 0)))
    top, bottom = empty, empty
    Hd = H.toarray() if dense else None
    if which in ("top", "both"):
        top = _dense_extremes(Hd, k, True) if dense else _sparse_extremes(H, k, True, v0, tol, ncv, maxiter)
    if which in ("bottom", "both"):
        bottom = _dense_extremes(Hd, k, False) if dense else _sparse_extremes(H, k, False, v0, tol, ncv, maxiter)
    res_top = _residuals(H, *top)
    res_bottom = _residuals(H, *bottom)
    worst = max(res_top.max(initial=0.0), res_bottom.max(initial=0.0))
    if worst > residual_tol:
        raise ConvergenceError(f"eigenpair residual {worst:.3e} exceeds {residual_tol:.1e}", residual=worst)
    return EdgeEigen(top[0], top[1], bottom[0], bottom[1], res_top, res_bottom, k)


@dataclasses.dataclass
class RestrictedEigen:
    mu: float
    support: np.ndarray  # global vertex ids of B_{r+1}(x)
    values: np.ndarray  # unit vector on the support, positive at x when possible
    is_tree: bool
    r: int

    def to_dense(self, N: int) -> np.ndarray:
        out = np.zeros(N)
        out[self.support] = self.values
        return out


def restricted_eigenpair(graph: GraphSample, x: int, r: int, sign: int = 1, dense_max: int = 4096) -> RestrictedEigen:
    """Extreme eigenpair of H restricted to the ball B_{r+1}(x).

    ``sign=+1`` gives the largest eigenvalue, ``sign=-1`` the smallest.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    ball = Ball(graph, x, r + 1)
    Hloc = ball.local_adjacency * (1.0 / math.sqrt(graph.d))
    n = Hloc.shape[0]
    if n == 1:
        w, v = 0.0, np.ones(1)
    elif n <= dense_max:
        vals, vecs = np.linalg.eigh(Hloc.toarray())
        idx = -1 if sign > 0 else 0
        w, v = float(vals[idx]), vecs[:, idx]
    else:
        v0 = np.ones(n) / math.sqrt(n)
        vals, vecs = eigsh(Hloc, k=1, which="LA" if sign > 0 else "SA", v0=v0, tol=1e-12, ncv=min(n - 1, 40))
        w, v = float(vals[0]), vecs[:, 0]
    if v[0] < 0 or (v[0] == 0 and v.sum() < 0):
        v = -v
    return RestrictedEigen(w, ball.vertices.copy(), v, ball.is_tree(r + 1), r)


# ---------------------------------------------------------------------------
# approximate tridiagonalization around a vertex


@dataclasses.dataclass
class TridiagBasis:
    """Orthogonal basis f_0..f_r (plus f_{r+1}) around x on a tree ball.

    Vectors are dense arrays over the local vertex order of B_{r+1}(x).
    """

    x: int
    r: int
    d: float
    vertices: np.ndarray
    depth: np.ndarray
    sphere_sizes: list
    F: np.ndarray  # F_0 .. F_{r-1}
    f_vectors: list  # f_0 .. f_r
    f_next: np.ndarray  # f_{r+1}
    g_vectors: dict  # i -> g_i for 1 <= i <= r
    M: np.ndarray
    local_adjacency: sp.csr_matrix

    @property
    def alpha(self) -> float:
        return self.sphere_sizes[1] / self.d

    @property
    def beta(self) -> float:
        return self.sphere_sizes[2] / (self.d * self.sphere_sizes[1])


def _path_sums(parent, depth, children, F, max_depth):
    """c_y = sum over z on the path (x, y] of (N_z - F_|z|), for depth(y) <= max_depth."""
    c = np.zeros(parent.size)
    for lvl in range(1, max_depth + 1):
        idx = np.flatnonzero(depth == lvl)
        c[idx] = c[parent[idx]] + (children[idx] - F[lvl])
    return c


def build_tridiag_basis(graph: GraphSample, x: int, r: int) -> TridiagBasis:
    """Construct f_i, F_i, g_i and M on the tree ball B_{r+1}(x)."""
    if r < 1:
        raise ValueError(f"radius must be >= 1, got {r}")
    ball = Ball(graph, x, r + 1)
    if not ball.is_tree(r + 1):
        raise NotATreeError(f"the ball of radius {r + 1} around {x} contains a cycle")
    sizes = ball.sphere_sizes
    for i in range(r):
        if sizes[i] == 0:
            raise ZeroDivisionError(f"sphere S_{i} is empty before radius {r}")
    d = graph.d
    depth, parent = ball.depth, ball.parent
    Ny = ball.children_counts.astype(float)  # valid for depth <= r
    n = ball.vertices.size

    F = np.zeros(max(r, 1))
    F[0] = sizes[1]
    c = np.zeros(n)
    for i in range(1, r):
        c = _path_sums(parent, depth, Ny, F, i - 1)
        prev = depth == i - 1
        F[i] = sizes[i + 1] / sizes[i] + float(np.sum((Ny[prev] - d) * c[prev])) / sizes[i]
    c = _path_sums(parent, depth, Ny, F, r - 1)

    def f_vec(i):
        v = (depth == i).astype(float)
        if i >= 3:
            mask = depth == i - 2
            v[mask] += c[mask]
        return v

    fs = [f_vec(i) for i in range(r + 1)]
    f_next = f_vec(r + 1)

    g = {}
    for i in range(1, r + 1):
        v = np.zeros(n)
        if i >= 4:
            t = np.flatnonzero(depth == i - 3)
            v[t] = (Ny[t] - F[i - 1]) * c[t]
            kids = np.flatnonzero(depth == i - 2)
            np.add.at(v, parent[kids], Ny[kids] - F[i - 2])
        g[i] = v

    A = ball.local_adjacency
    norms = [float(np.linalg.norm(v)) for v in fs]
    M = np.zeros((r + 1, r + 1))
    for i in range(r):
        # equals <A f_i, f_{i+1}> / (sqrt(d) |f_i| |f_{i+1}|) on trees
        M[i, i + 1] = M[i + 1, i] = norms[i + 1] / (math.sqrt(d) * norms[i])
    return TridiagBasis(
        x=int(x),
        r=int(r),
        d=d,
        vertices=ball.vertices,
        depth=depth,
        sphere_sizes=sizes,
        F=F,
        f_vectors=fs,
        f_next=f_next,
        g_vectors=g,
        M=M,
        local_adjacency=A,
    )


@dataclasses.dataclass
class YErrorReport:
    identity_residual: float  # max over i and entries of |A f_i - f_{i+1} - F_{i-1} f_{i-1} - g_i|
    low_g_max: float  # max |g_i| over i <= 3
    support_ok: bool
    g_f_inner: float  # max |<g_i, f_{i-3}>| normalized by the two norms
    g_norm_ratio: dict  # i -> ||g_i||^2 / (4 |S_{i-3}| d^{2+4 gamma} i^2)
    orthogonality: float  # max normalized |<f_i, f_j>|, i != j
    m01_error: float
    m12_error: float

    def passes(self, tol: float = 1e-9) -> bool:
        return (
            self.identity_residual <= tol
            and self.low_g_max <= tol
            and self.support_ok
            and self.g_f_inner <= tol
            and self.m01_error <= 1e-12
            and self.m12_error <= 1e-12
        )


def verify_yerror(basis: TridiagBasis, gamma: float = 0.125) -> YErrorReport:
    A = basis.local_adjacency
    fs = basis.f_vectors + [basis.f_next]
    r, d = basis.r, basis.d
    residual = float(np.max(np.abs(A @ fs[0] - fs[1])))
    for i in range(1, r + 1):
        lhs = A @ fs[i]
        rhs = fs[i + 1] + basis.F[i - 1] * fs[i - 1] + basis.g_vectors[i]
        residual = max(residual, float(np.max(np.abs(lhs - rhs))))
    low = max((float(np.max(np.abs(basis.g_vectors[i]))) for i in range(1, min(r, 3) + 1)), default=0.0)
    support_ok = True
    inner = 0.0
    ratios = {}
    for i in range(4, r + 1):
        gi = basis.g_vectors[i]
        support_ok &= bool(np.all(gi[basis.depth != i - 3] == 0.0))
        fi3 = fs[i - 3]
        gn = float(np.linalg.norm(gi))
        if gn > 0:
            inner = max(inner, abs(float(gi @ fi3)) / (gn * np.linalg.norm(fi3)))
        envelope = 4.0 * basis.sphere_sizes[i - 3] * d ** (2.0 + 4.0 * gamma) * i * i
        ratios[i] = gn * gn / envelope
    ortho = 0.0
    for i in range(len(fs)):
        for j in range(i + 1, len(fs)):
            ni, nj = np.linalg.norm(fs[i]), np.linalg.norm(fs[j])
            if ni > 0 and nj > 0:
                ortho = max(ortho, abs(float(fs[i] @ fs[j])) / (ni * nj))
    m01 = abs(basis.M[0, 1] - math.sqrt(basis.alpha)) if r >= 1 else 0.0
    m12 = abs(basis.M[1, 2] - math.sqrt(basis.beta)) if r >= 2 else 0.0
    return YErrorReport(residual, low, support_ok, inner, ratios, ortho, m01, m12)


@dataclasses.dataclass
class MZComparison:
    deviation: float
    envelope: float
    ratio: float


def model_block(alpha: float, beta: float, d: float, r: int) -> np.ndarray:
    """Upper-left (r+1) x (r+1) block of Z_dd(alpha, beta), dd = 1 + 1/d."""
    e = build_model(1.0 + 1.0 / d, alpha, beta, max(r + 1, 4)).offdiag[:r]
    return np.diag(e, 1) + np.diag(e, -1)


def compare_M_Z(basis: TridiagBasis, d: float | None = None, gamma: float = 0.125, C: float = 10.0) -> MZComparison:
    d = basis.d if d is None else d
    Z = model_block(basis.alpha, basis.beta, d, basis.r)
    dev = float(np.max(np.abs(basis.M - Z)))
    envelope = C * basis.r**2 * d ** (-1.5 + 3.0 * gamma)
    return MZComparison(dev, envelope, dev / envelope)


# ---------------------------------------------------------------------------
# stray eigenvalue, localization, perturbation


def stray_predictor(d: float) -> float:
    return math.sqrt(d) + d**-0.5 + d**-1.5


@dataclasses.dataclass
class StrayEstimate:
    nu_hat: float
    overlap: float
    predictor: float
    separated: bool
    index: int
    distance_to_flat: float


def stray_estimate(graph: GraphSample, eigen: EdgeEigen | None = None, k: int = 4, seed: int = 0) -> StrayEstimate:
    """Locate the eigenpair most aligned with the flat unit vector.

    When no eigenvector has overlap at least 0.5 with the flat vector the
    stray eigenvalue is reported as not separated from the bulk.
    """
    if eigen is None:
        eigen = top_k_eigenpairs(graph, k, "top", seed=seed)
    V = eigen.top_vectors
    overlaps = np.abs(V.sum(axis=0)) / math.sqrt(graph.N)
    j = int(np.argmax(overlaps))
    ov = float(overlaps[j])
    separated = ov >= 0.5
    if not separated:
        warnings.warn("stray eigenvalue not separated from the bulk", RuntimeWarning, stacklevel=2)
    return StrayEstimate(
        nu_hat=float(eigen.top_values[j]),
        overlap=ov,
        predictor=stray_predictor(graph.d),
        separated=separated,
        index=j,
        distance_to_flat=math.sqrt(max(0.0, 2.0 - 2.0 * ov)),
    )


@dataclasses.dataclass
class LocalizationProfile:
    x: int
    outside_mass: np.ndarray  # ||w restricted to the complement of B_i(x)||, i = 0..r_max
    radial_residual: float | None
    radial_coefficients: np.ndarray | None


def radial_coefficients(sigma: float, alpha_x: float, r: int) -> np.ndarray:
    """Normalized radial profile u_0..u_r: u_1 = (sigma/sqrt(alpha)) u_0,
    u_k = (2/(sigma + sqrt(sigma^2 - 4)))^{k-1} u_1.
    """
    if sigma <= 2:
        raise ValueError(f"radial profile needs sigma > 2, got {sigma}")
    ratio = 2.0 / (sigma + math.sqrt(sigma * sigma - 4.0))
    u = np.empty(r + 1)
    u[0] = 1.0
    if r >= 1:
        u[1:] = (sigma / math.sqrt(alpha_x)) * ratio ** np.arange(r)
    return u / np.linalg.norm(u)


def localization_profile(graph: GraphSample, w: np.ndarray, x: int, r_max: int = 6, sigma: float | None = None) -> LocalizationProfile:
    """Mass of w outside growing balls around x, and its distance to the
    radial profile when ``sigma`` is supplied.
    """
    ball = Ball(graph, x, r_max)
    w = np.asarray(w, dtype=float)
    in_ball = np.zeros(w.size, dtype=bool)
    in_ball[ball.vertices] = True
    beyond = float(np.sum(w[~in_ball] ** 2))
    sphere_mass = np.array([float(np.sum(w[s] ** 2)) for s in ball.spheres])
    # suffix sums avoid the cancellation of total minus inner mass
    tail = np.cumsum(sphere_mass[::-1])[::-1]
    outside = np.sqrt(np.r_[tail[1:], 0.0] + beyond)
    residual, coeffs = None, None
    if sigma is not None and ball.sphere_sizes[1] > 0:
        alpha_x = ball.sphere_sizes[1] / graph.d
        coeffs = radial_coefficients(sigma, alpha_x, r_max)
        sign = 1.0 if w[x] >= 0 else -1.0
        approx = np.zeros_like(w)
        for i, s in enumerate(ball.spheres):
            if s.size:
                approx[s] = coeffs[i] / math.sqrt(s.size)
        residual = float(np.linalg.norm(sign * w - approx))
    return LocalizationProfile(int(x), outside, residual, coeffs)


@dataclasses.dataclass
class PerturbationReport:
    eps: float
    delta: float
    located: float
    predicted: float
    error: float
    bound: float
    vector_distance: float


def perturbation_check(M: np.ndarray, lam: float, v: np.ndarray, delta: float) -> PerturbationReport:
    """Compare the eigenvalue of M near lam with the first-order prediction
    lam + <v, (M - lam) v> for an approximate unit eigenvector v.

    Requires an isolated window: exactly one eigenvalue in [lam - delta, lam + delta]
    and 5 * ||(M - lam) v|| <= delta.
    """
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    resid = M @ v - lam * v
    eps = float(np.linalg.norm(resid))
    if 5.0 * eps > delta:
        raise ValueError(f"window too small: 5 eps = {5 * eps:.3e} > delta = {delta:.3e}")
    vals, vecs = scipy.linalg.eigh(M)
    inside = np.flatnonzero(np.abs(vals - lam) <= delta)
    if inside.size != 1:
        raise ValueError(f"expected one eigenvalue in the window, found {inside.size}")
    j = int(inside[0])
    w = vecs[:, j] * np.sign(vecs[:, j] @ v or 1.0)
    predicted = lam + float(v @ resid)
    return PerturbationReport(
        eps=eps,
        delta=delta,
        located=float(vals[j]),
        predicted=predicted,
        error=abs(float(vals[j]) - predicted),
        bound=eps * eps / delta,
        vector_distance=float(np.linalg.norm(w - v)),
    )

"""Rescaled point processes near the spectral edge and the Monte Carlo
checks built on them: rigidity matching, Poisson statistics, edge symmetry
and localization.
"""

from __future__ import annotations

import dataclasses
import functools
import math
import warnings

import numpy as np
from scipy import stats

from erspectra.config import Config
from erspectra.errors import DomainError, InsufficientSamplesError
from erspectra.graph import Ball, GraphSample, alpha_beta, capped_radius, classify_vertices, default_radius, sample_er
from erspectra.intensity import IntensityCurve, make_curve, rho_tail, solve_kappa, window_q
from erspectra.scalar_theory import ScaleParams, lambda_d, solve_scale_params
from erspectra.spectra import (
    EdgeEigen,
    localization_profile,
    restricted_eigenpair,
    top_k_eigenpairs,
)

KINDS = ("Phi", "Sigma", "SigmaTilde")


@dataclasses.dataclass
class EdgeProcess:
    """Finite point configuration on the rescaled axis, sorted increasingly."""

    kind: str
    points: np.ndarray
    labels: np.ndarray | None
    params: ScaleParams
    n_graveyard: int = 0
    stray_removed: bool = False

    def count_in(self, lo: float, hi: float = math.inf) -> int:
        return int(np.count_nonzero((self.points >= lo) & (self.points < hi)))

    @property
    def largest(self) -> float:
        return float(self.points[-1]) if self.points.size else -math.inf


def _sorted_process(kind, points, labels, params, graveyard=0, stray_removed=False):
    points = np.asarray(points, dtype=float)
    order = np.argsort(points, kind="stable")
    labels = None if labels is None else np.asarray(labels)[order]
    return EdgeProcess(kind, points[order], labels, params, int(graveyard), stray_removed)


def flat_overlaps(vectors: np.ndarray) -> np.ndarray:
    return np.abs(vectors.sum(axis=0)) / math.sqrt(vectors.shape[0])


def build_phi(eigen: EdgeEigen, params: ScaleParams, exclude_stray: bool = True, window_lo: float | None = None) -> EdgeProcess:
    """Rescale the top eigenvalues to d tau (lambda - sigma).

    The stray eigenvalue is the one whose eigenvector overlaps most with the
    flat vector; it is removed only when that overlap is at least 1/2.
    """
    values = np.asarray(eigen.top_values, dtype=float)
    keep = np.ones(values.size, dtype=bool)
    removed = False
    if exclude_stray and values.size:
        ov = flat_overlaps(eigen.top_vectors)
        j = int(np.argmax(ov))
        if ov[j] >= 0.5:
            keep[j] = False
            removed = True
    points = params.rescale(values[keep])
    if window_lo is not None and points.size and eigen.k < eigen.top_vectors.shape[0] and points.min() >= window_lo:
        warnings.warn(
            "the smallest computed eigenvalue is still inside the window; increase k",
            RuntimeWarning,
            stacklevel=2,
        )
    return _sorted_process("Phi", points, np.flatnonzero(keep), params, 0, removed)


def _window_vertices(graph: GraphSample, params: ScaleParams, q: float) -> np.ndarray:
    alpha = graph.degrees / graph.d
    return np.flatnonzero((np.abs(alpha - params.u_frak) <= q) & (graph.degrees > 0))


def build_sigma(graph: GraphSample, params: ScaleParams, q: float) -> EdgeProcess:
    """Reference points Z_x = theta (d alpha_x - d u) + d sqrt(alpha_x) (beta_x - 1)."""
    xs = _window_vertices(graph, params, q)
    pts = []
    for x in xs:
        a, b = alpha_beta(graph, int(x))
        pts.append(params.theta * (params.d * a - params.d * params.u_frak) + params.d * math.sqrt(a) * (b - 1.0))
    return _sorted_process("Sigma", pts, xs, params, graph.N - xs.size)


def build_sigma_tilde(graph: GraphSample, params: ScaleParams, q: float) -> EdgeProcess:
    """Predicted points d tau (Lambda_dd(alpha_x, beta_x) - sigma) for window vertices.

    Window vertices whose (alpha_x, beta_x) fall outside the domain of the
    predictor go to the graveyard.
    """
    xs = _window_vertices(graph, params, q)
    pts, labels = [], []
    for x in xs:
        a, b = alpha_beta(graph, int(x))
        try:
            lam = lambda_d(a, b, params.d)
        except DomainError:
            continue
        pts.append(params.rescale(lam))
        labels.append(int(x))
    return _sorted_process("SigmaTilde", pts, labels, params, graph.N - len(pts))


def chi_scale(params: ScaleParams, gamma: float) -> float:
    """chi = (u - 2) d^{2 gamma - 1} / (u^{3/2} log u)."""
    u = params.u_frak
    return (u - 2.0) * params.d ** (2.0 * gamma - 1.0) / (u**1.5 * math.log(u))


def rescaled_window_lo(params: ScaleParams, gamma: float, c: float) -> float:
    """Lower edge sigma - c chi of the matching window, on the rescaled axis."""
    return -params.d * params.tau * c * chi_scale(params, gamma)


def eta_scale(params: ScaleParams, gamma: float, eps: float = 0.0) -> float:
    """eta = d^{3 gamma + eps/2 - 1/2} u^5/(u - 2)^5, the reference-process error scale."""
    u = params.u_frak
    return params.d ** (3.0 * gamma + 0.5 * eps - 0.5) * u**5 / (u - 2.0) ** 5


@dataclasses.dataclass
class MatchReport:
    window_lo: float
    pairs: list  # (eigen point, predictor point, gap)
    unmatched_eigen: list
    unmatched_predictor: list
    chi: float | None
    gap_tol: float

    @property
    def exact_match(self) -> bool:
        return not self.unmatched_eigen and not self.unmatched_predictor and all(g <= self.gap_tol for _, _, g in self.pairs)

    @property
    def max_gap(self) -> float:
        return max((g for _, _, g in self.pairs), default=0.0)


def match_rigidity(phi: EdgeProcess, sigma_tilde: EdgeProcess, window_lo: float, gap_tol: float = 0.1, chi: float | None = None) -> MatchReport:
    """Greedy nearest-neighbour matching of the two processes above window_lo.

    Eigen points are visited from the largest down; each takes the closest
    unused predictor point, ties going to the larger predictor.
    """
    eig = sorted((p for p in phi.points if p >= window_lo), reverse=True)
    pred = sorted(p for p in sigma_tilde.points if p >= window_lo)
    free = list(pred)
    pairs, lost = [], []
    for e in eig:
        if not free:
            lost.append(e)
            continue
        gaps = [abs(e - p) for p in free]
        best = min(range(len(free)), key=lambda i: (gaps[i], -free[i]))
        pairs.append((float(e), float(free[best]), float(gaps[best])))
        free.pop(best)
    return MatchReport(window_lo, pairs, lost, [float(p) for p in free], chi, gap_tol)


def symmetry_check(eigen: EdgeEigen, m: int | None = None, exclude_stray: bool = True) -> float:
    """Max |lambda_j(top) + lambda_j(bottom)| over the first m rank pairs."""
    top = np.asarray(eigen.top_values, dtype=float)
    if exclude_stray and top.size and eigen.top_vectors.size:
        ov = flat_overlaps(eigen.top_vectors)
        j = int(np.argmax(ov))
        if ov[j] >= 0.5:
            top = np.delete(top, j)
    bottom = np.asarray(eigen.bottom_values, dtype=float)
    n = min(top.size, bottom.size) if m is None else min(m, top.size, bottom.size)
    if n == 0:
        return 0.0
    return float(np.max(np.abs(top[:n] + bottom[:n])))


# ---------------------------------------------------------------------------
# Poisson statistics


@functools.lru_cache(maxsize=32)
def _inverse_tail_table(curve: IntensityCurve, lo: float, grid_size: int):
    """Grid on which s -> rho_tail(s) is inverted, reaching far into the upper tail."""
    mass = float(rho_tail(curve, lo))
    hi = lo + 1.0
    while rho_tail(curve, hi) > 1e-12 * mass:
        hi += 2.0 * (hi - lo)
    grid = np.linspace(lo, hi, grid_size)
    # tail is decreasing; store the reversed arrays for np.interp
    return mass, rho_tail(curve, grid)[::-1], grid[::-1]


def sample_poisson_process(curve: IntensityCurve, lo: float, rng: np.random.Generator, grid_size: int = 4000) -> np.ndarray:
    """Points of the Poisson process with tail mass rho_tail above ``lo``."""
    mass, tail, grid = _inverse_tail_table(curve, float(lo), int(grid_size))
    targets = rng.uniform(0.0, mass, size=rng.poisson(mass))
    return np.sort(np.interp(targets, tail, grid))


@dataclasses.dataclass
class IntervalTest:
    lo: float
    hi: float
    mass: float
    counts: np.ndarray
    chi2: float
    dof: int
    p_value: float


@dataclasses.dataclass
class PoissonStats:
    n_processes: int
    ks_statistic: float
    ks_p_value: float
    intervals: list
    dkappa_terms: dict  # n -> sup over the grid of the n-point discrepancy
    dkappa_estimate: float
    largest_points: np.ndarray


def _chi_square_counts(counts: np.ndarray, mass: float, min_expected: float = 5.0):
    M = counts.size
    if mass <= 0:
        return 0.0, 0, 1.0 if np.all(counts == 0) else 0.0
    kmax = int(counts.max()) + 1
    probs = stats.poisson.pmf(np.arange(kmax), mass)
    observed = np.bincount(counts, minlength=kmax).astype(float)
    # pool into bins with enough expected mass; the last bin holds the upper tail
    bins_exp, bins_obs = [], []
    acc_e = acc_o = 0.0
    for k in range(kmax):
        acc_e += M * probs[k]
        acc_o += observed[k]
        if acc_e >= min_expected:
            bins_exp.append(acc_e)
            bins_obs.append(acc_o)
            acc_e = acc_o = 0.0
    tail_e = acc_e + M * stats.poisson.sf(kmax - 1, mass)
    if bins_exp:
        bins_exp[-1] += tail_e
        bins_obs[-1] += acc_o
    else:
        bins_exp, bins_obs = [tail_e], [acc_o]
    exp_arr, obs_arr = np.array(bins_exp), np.array(bins_obs)
    dof = exp_arr.size - 1
    chi2 = float(np.sum((obs_arr - exp_arr) ** 2 / exp_arr))
    p = float(stats.chi2.sf(chi2, dof)) if dof > 0 else 1.0
    return chi2, dof, p


def _poisson_ge(k, mass):
    return 1.0 if k <= 0 else float(stats.poisson.sf(k - 1, mass))


def _dkappa(processes, curve, s_grid, k_max):
    """sup over (s, k) of |P(count in [s, inf) >= k) - Poisson| and the analogue for pairs."""
    s_grid = np.sort(np.asarray(s_grid, dtype=float))
    counts = np.array([[p.count_in(s) for s in s_grid] for p in processes])
    masses = rho_tail(curve, s_grid)
    ks = np.arange(1, k_max + 1)
    one = 0.0
    for j, m in enumerate(masses):
        for k in ks:
            one = max(one, abs(float(np.mean(counts[:, j] >= k)) - _poisson_ge(k, m)))
    two = 0.0
    for a in range(s_grid.size):
        for b in range(a + 1, s_grid.size):
            # s_a < s_b: count(E_a) = count(E_b) + count([s_a, s_b)), independent parts
            m_b, m_ab = masses[b], masses[a] - masses[b]
            ys = np.arange(0, k_max + 1)
            pb = stats.poisson.pmf(ys, m_b)
            for k1 in ks:
                for k2 in ks:
                    emp = float(np.mean((counts[:, a] >= k1) & (counts[:, b] >= k2)))
                    joint = sum(pb[y] * _poisson_ge(k1 - y, m_ab) for y in range(k2, k_max + 1))
                    joint += _poisson_ge(k_max + 1, m_b) * 1.0
                    two = max(two, abs(emp - joint))
    return {1: one, 2: two}


def poisson_tests(
    processes: list,
    curve: IntensityCurve,
    intervals: list,
    s_grid=None,
    k_max: int = 4,
    min_processes: int = 50,
) -> PoissonStats:
    """Compare rescaled edge processes across seeds with the Poisson limit.

    (a) chi-square of interval counts against Poisson(rho(I)); (b) KS distance
    of the largest point against exp(-rho_tail); (c) a truncated estimate of the
    bounded-Lipschitz style distance using one- and two-set count events.
    """
    M = len(processes)
    if M < min_processes:
        raise InsufficientSamplesError(f"need at least {min_processes} processes, got {M}")
    largest = np.array([p.largest for p in processes])
    cdf = lambda s: np.exp(-rho_tail(curve, np.asarray(s, dtype=float)))  # noqa: E731
    ks = stats.kstest(largest, cdf)
    tests = []
    for lo, hi in intervals:
        mass = float(rho_tail(curve, lo) - (rho_tail(curve, hi) if math.isfinite(hi) else 0.0))
        counts = np.array([p.count_in(lo, hi) for p in processes])
        chi2, dof, pval = _chi_square_counts(counts, mass)
        tests.append(IntervalTest(lo, hi, mass, counts, chi2, dof, pval))
    if s_grid is None:
        s_grid = [lo for lo, _ in intervals]
    terms = _dkappa(processes, curve, s_grid, k_max)
    estimate = sum(2.0**-n * v for n, v in terms.items())
    return PoissonStats(M, float(ks.statistic), float(ks.pvalue), tests, terms, estimate, largest)


def mass_intervals(curve: IntensityCurve, masses=(1.0, 1.0, 1.5)) -> list:
    """Consecutive intervals [s_{j+1}, s_j) from the top with the given rho masses."""
    from erspectra.intensity import solve_kappa as _solve

    edges = [math.inf]
    cum = 0.0
    for m in masses:
        cum += m
        edges.append(-_solve(curve, cum).kappa)
    return [(edges[j + 1], edges[j]) for j in range(len(masses))]


def sigma_phi_sandwich(phi: EdgeProcess, sigma: EdgeProcess, s_grid, eta: float) -> np.ndarray:
    """Per grid point, whether Sigma(E_{s+eta}) <= Phi(E_s) <= Sigma(E_{s-eta})."""
    out = []
    for s in s_grid:
        out.append(sigma.count_in(s + eta) <= phi.count_in(s) <= sigma.count_in(s - eta))
    return np.array(out)


def close_pair_present(sigma: EdgeProcess, lo: float, eta: float) -> bool:
    pts = sigma.points[sigma.points >= lo]
    return bool(pts.size >= 2 and np.min(np.diff(pts)) < eta)


# ---------------------------------------------------------------------------
# per-seed pipelines


@dataclasses.dataclass
class RigiditySeed:
    seed: int
    top_nonstray: float
    best_vertex: int
    best_prediction: float
    best_gap: float
    n_w: int
    restricted_mu: float | None
    restricted_radius: int | None
    restricted_gap: float | None
    symmetry: float
    outside_mass: list
    loc_bound: list
    radial_residual: float | None
    stray_overlap: float
    match: MatchReport | None


def match_vertex(graph: GraphSample, candidates, lam: float, w: np.ndarray, tol: float) -> tuple[int, float, float]:
    """Anchor vertex of an edge eigenpair among ``candidates``.

    Among candidates whose predictor lies within ``tol`` of ``lam`` the one
    carrying the largest eigenvector weight is chosen; when none is within
    ``tol`` the closest predictor wins.  Returns (vertex, predictor, gap), with
    vertex -1 when no candidate has a defined predictor.
    """
    rows = []
    for x in candidates:
        a, b = alpha_beta(graph, int(x))
        if b is None:
            continue
        try:
            pred = lambda_d(a, b, graph.d)
        except DomainError:
            continue
        rows.append((int(x), pred, abs(pred - lam), abs(float(w[int(x)]))))
    if not rows:
        return -1, math.nan, math.inf
    close = [row for row in rows if row[2] <= tol]
    pick = max(close, key=lambda row: row[3]) if close else min(rows, key=lambda row: row[2])
    return pick[0], pick[1], pick[2]


def rigidity_seed(N: int, d: float, seed: int, cfg: Config, k: int = 6, index: int = 0, match_tol: float = 0.1) -> RigiditySeed:
    """Sample one graph and compare its top edge with the vertex predictors."""
    params = solve_scale_params(N, d)
    graph = sample_er(N, d, seed, index)
    eigen = top_k_eigenpairs(graph, k, "both", seed=seed, tol=cfg.eig_tol, ncv=cfg.eig_ncv, residual_tol=cfg.residual_tol)
    ov = flat_overlaps(eigen.top_vectors)
    stray = int(np.argmax(ov))
    nonstray = [j for j in range(eigen.top_values.size) if not (j == stray and ov[stray] >= 0.5)]
    j1 = nonstray[0]
    lam1 = float(eigen.top_values[j1])
    w1 = eigen.top_vectors[:, j1]

    classes = classify_vertices(graph, params, cfg.gamma, cfg.c_star)
    x_best, pred_best, gap_best = match_vertex(graph, classes.W, lam1, w1, match_tol)

    mu = r_used = mu_gap = None
    outside, bound, radial = [], [], None
    q_loc = cfg.loc_factor / params.sigma
    if x_best >= 0:
        r_target = default_radius(params, cfg.c_radius)
        r_cap = capped_radius(graph, x_best, r_target + 1)
        r_used = max(0, min(r_target, r_cap - 1))
        res = restricted_eigenpair(graph, x_best, r_used, +1, cfg.dense_max)
        mu = res.mu
        mu_gap = abs(mu - pred_best)
        prof = localization_profile(graph, w1, x_best, 4, sigma=params.sigma)
        outside = prof.outside_mass.tolist()
        bound = [q_loc**i / (1.0 - q_loc) ** 2 + cfg.loc_slack for i in range(5)]
        radial = prof.radial_residual

    window = rescaled_window_lo(params, cfg.gamma, cfg.c_window)
    q = cfg.q_window if cfg.q_window is not None else window_q(params, cfg.gamma, cfg.c_star)
    phi = build_phi(eigen, params, exclude_stray=True)
    match = None
    if q > 0:
        st = build_sigma_tilde(graph, params, q)
        match = match_rigidity(phi, st, window, cfg.gap_tol, chi_scale(params, cfg.gamma))
    return RigiditySeed(
        seed=seed,
        top_nonstray=lam1,
        best_vertex=x_best,
        best_prediction=pred_best,
        best_gap=gap_best,
        n_w=int(classes.W.size),
        restricted_mu=mu,
        restricted_radius=r_used,
        restricted_gap=mu_gap,
        symmetry=symmetry_check(eigen, 3),
        outside_mass=outside,
        loc_bound=bound,
        radial_residual=radial,
        stray_overlap=float(ov[stray]),
        match=match,
    )


def edge_process_seed(N: int, d: float, seed: int, cfg: Config, k: int, s_floor: float | None = None, index: int = 0) -> EdgeProcess:
    """Rescaled top edge process of one sample, stray removed."""
    params = solve_scale_params(N, d)
    graph = sample_er(N, d, seed, index)
    eigen = top_k_eigenpairs(graph, k, "top", seed=seed, tol=cfg.eig_tol, ncv=cfg.eig_ncv, residual_tol=cfg.residual_tol)
    return build_phi(eigen, params, exclude_stray=True, window_lo=s_floor)


def default_k_window(curve: IntensityCurve, K: float) -> float:
    return -solve_kappa(curve, K).kappa

"""Erdos-Renyi sampling, breadth-first geometry around a vertex, vertex
classes by normalized degree, and structural audits of balls.
"""

from __future__ import annotations

import dataclasses
import math
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from erspectra.config import RNG_IDENTITY
from erspectra.scalar_theory import ScaleParams


def make_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Independent stream for (seed, index); workers never share a stream."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


class GraphSample:
    """Simple undirected graph stored as a symmetric CSR pattern."""

    def __init__(self, N, d, indptr, indices, seed=None, index=0):
        self.N = int(N)
        self.d = float(d)
        self.seed = seed
        self.index = index
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.degrees = np.diff(self.indptr)

    @classmethod
    def from_edges(cls, N, d, u, v, seed=None, index=0):
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        if u.size and (np.any(u == v) or u.min() < 0 or max(u.max(), v.max()) >= N):
            raise ValueError("edges must join two distinct vertices in range")
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        key = np.unique(lo * N + hi)
        lo, hi = key // N, key % N
        rows = np.concatenate([lo, hi])
        cols = np.concatenate([hi, lo])
        pattern = sp.csr_matrix((np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(N, N))
        pattern.sort_indices()
        return cls(N, d, pattern.indptr, pattern.indices, seed=seed, index=index)

    @property
    def n_edges(self) -> int:
        return int(self.indices.size // 2)

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Edge list with u < v, sorted lexicographically."""
        rows = np.repeat(np.arange(self.N), self.degrees)
        keep = rows < self.indices
        return rows[keep], self.indices[keep]

    def neighbors(self, x: int) -> np.ndarray:
        return self.indices[self.indptr[x] : self.indptr[x + 1]]

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        data = np.ones(self.indices.size, dtype=float)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.N, self.N))

    @cached_property
    def H(self) -> sp.csr_matrix:
        """Rescaled adjacency A / sqrt(d)."""
        return self.adjacency * (1.0 / math.sqrt(self.d))

    def metadata(self) -> dict:
        return {"N": self.N, "d": self.d, "seed": self.seed, "index": self.index, "rng": RNG_IDENTITY}


def _pair_rows(idx: np.ndarray, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Invert the lexicographic enumeration of pairs (u, v), u < v."""

    def row_offset(u):
        return u * (N - 1) - u * (u - 1) // 2

    b = 2.0 * N - 1.0
    u = np.floor((b - np.sqrt(np.maximum(b * b - 8.0 * idx, 0.0))) / 2.0).astype(np.int64)
    u = np.clip(u, 0, N - 2)
    # floating point can land one row off in either direction
    u = np.where(row_offset(u) > idx, u - 1, u)
    u = np.where(row_offset(u + 1) <= idx, u + 1, u)
    v = idx - row_offset(u) + u + 1
    return u, v


def sample_er(N: int, d: float, seed: int, index: int = 0) -> GraphSample:
    """Sample G(N, d/N) by geometric skipping over the pair enumeration."""
    if N < 3:
        raise ValueError(f"N must be >= 3, got {N}")
    if not 0 <= d <= N:
        raise ValueError(f"need 0 <= d <= N, got d={d}")
    p = d / N
    M = N * (N - 1) // 2
    if p == 0.0:
        return GraphSample.from_edges(N, d, [], [], seed=seed, index=index)
    rng = make_rng(seed, index)
    mean = M * p
    batch = int(mean + 10.0 * math.sqrt(mean) + 100)
    chunks = []
    last = -1
    while last < M:
        # clipping keeps the running sum in int64 when p is tiny
        gaps = np.minimum(rng.geometric(p, size=batch), M + 1)
        pos = last + np.cumsum(gaps)
        chunks.append(pos)
        last = int(pos[-1])
        batch = batch // 4 + 100
    idx = np.concatenate(chunks)
    idx = idx[idx < M]
    u, v = _pair_rows(idx, N)
    return GraphSample.from_edges(N, d, u, v, seed=seed, index=index)


def dump_edges(graph: GraphSample, path) -> None:
    u, v = graph.edges()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# er {graph.N} {graph.d:g} {graph.seed}\n")
        for a, b in zip(u.tolist(), v.tolist()):
            fh.write(f"{a} {b}\n")


def load_edges(path) -> GraphSample:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if header[:2] != ["#", "er"]:
            raise ValueError("missing '# er N d seed' header")
        N, d = int(header[2]), float(header[3])
        seed = None if header[4] == "None" else int(header[4])
        data = np.loadtxt(fh, dtype=np.int64, ndmin=2)
    if data.size == 0:
        data = np.zeros((0, 2), dtype=np.int64)
    return GraphSample.from_edges(N, d, data[:, 0], data[:, 1], seed=seed)


def _gather_neighbors(graph: GraphSample, frontier: np.ndarray):
    """All (source, neighbor) pairs leaving the frontier."""
    starts = graph.indptr[frontier]
    counts = graph.indptr[frontier + 1] - starts
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    src = np.repeat(frontier, counts)
    offsets = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    return src, graph.indices[np.repeat(starts, counts) + offsets]


class Ball:
    """Breadth-first ball B_R(x) with spheres, depths and BFS parents.

    ``vertices`` are listed sphere by sphere; ``parent[i]`` is the local index
    of the vertex through which ``vertices[i]`` was first reached.
    """

    def __init__(self, graph: GraphSample, x: int, radius: int):
        if not 0 <= x < graph.N:
            raise ValueError(f"vertex {x} out of range")
        self.graph = graph
        self.x = int(x)
        self.radius = int(radius)
        seen = {self.x: 0}
        spheres = [np.array([self.x], dtype=np.int64)]
        parents = [np.array([-1], dtype=np.int64)]
        offset = 0
        frontier = spheres[0]
        for _ in range(radius):
            src, nbr = _gather_neighbors(graph, frontier)
            fresh = np.array([n not in seen for n in nbr.tolist()], dtype=bool) if nbr.size else np.zeros(0, bool)
            new, first = np.unique(nbr[fresh], return_index=True)
            order = np.argsort(first, kind="stable")
            new = new[order]
            src_new = src[fresh][first[order]]
            for local, v in enumerate(new.tolist()):
                seen[v] = offset + frontier.size + local
            parents.append(np.array([seen[s] for s in src_new.tolist()], dtype=np.int64))
            offset += frontier.size
            spheres.append(new)
            frontier = new
        self.spheres = spheres
        self.vertices = np.concatenate(spheres)
        self.depth = np.concatenate([np.full(s.size, i, dtype=np.int64) for i, s in enumerate(spheres)])
        self.parent = np.concatenate(parents)
        self.local = seen

    @property
    def sphere_sizes(self) -> list[int]:
        return [int(s.size) for s in self.spheres]

    def size_upto(self, r: int) -> int:
        return int(sum(s.size for s in self.spheres[: r + 1]))

    @cached_property
    def local_adjacency(self) -> sp.csr_matrix:
        """Adjacency of the induced subgraph on the ball, in local indices."""
        src, nbr = _gather_neighbors(self.graph, self.vertices)
        lookup = self.local
        mask = np.array([n in lookup for n in nbr.tolist()], dtype=bool) if nbr.size else np.zeros(0, bool)
        rows = np.array([lookup[s] for s in src[mask].tolist()], dtype=np.int64)
        cols = np.array([lookup[n] for n in nbr[mask].tolist()], dtype=np.int64)
        n = self.vertices.size
        return sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))

    def edges_within(self, r: int) -> int:
        """Number of edges of the graph with both ends in B_r(x)."""
        n = self.size_upto(r)
        sub = self.local_adjacency[:n, :n]
        return int(sub.nnz // 2)

    def is_tree(self, r: int) -> bool:
        return self.edges_within(r) == self.size_upto(r) - 1

    @cached_property
    def children_counts(self) -> np.ndarray:
        """N_y(x): neighbors of y one step further from x; -1 beyond radius - 1."""
        adj = self.local_adjacency.tocoo()
        out = np.zeros(self.vertices.size, dtype=np.int64)
        forward = self.depth[adj.col] == self.depth[adj.row] + 1
        np.add.at(out, adj.row[forward], 1)
        out[self.depth >= self.radius] = -1
        return out


@dataclasses.dataclass(frozen=True)
class VertexProfile:
    x: int
    alpha: float
    beta: float | None
    beta_defined: bool
    sphere_sizes: list
    is_tree: bool
    children: dict


def vertex_profile(graph: GraphSample, x: int, r: int) -> VertexProfile:
    if r < 1:
        raise ValueError(f"radius must be >= 1, got {r}")
    ball = Ball(graph, x, max(r, 2))
    sizes = ball.sphere_sizes
    s1, s2 = sizes[1], sizes[2]
    beta_defined = s1 > 0
    beta = s2 / (graph.d * s1) if beta_defined else None
    if r < ball.radius:
        ball_r = Ball(graph, x, r)
    else:
        ball_r = ball
    counts = ball_r.children_counts
    children = {
        int(v): int(c)
        for v, c, dep in zip(ball_r.vertices, counts, ball_r.depth)
        if 1 <= dep <= r - 1
    }
    return VertexProfile(
        x=int(x),
        alpha=graph.degrees[x] / graph.d,
        beta=beta,
        beta_defined=beta_defined,
        sphere_sizes=sizes[: r + 1],
        is_tree=ball_r.is_tree(r),
        children=children,
    )


def alpha_beta(graph: GraphSample, x: int) -> tuple[float, float | None]:
    ball = Ball(graph, x, 2)
    s1, s2 = ball.sphere_sizes[1], ball.sphere_sizes[2]
    return s1 / graph.d, (s2 / (graph.d * s1) if s1 else None)


@dataclasses.dataclass(frozen=True)
class VertexClasses:
    W: np.ndarray
    V: np.ndarray
    U: np.ndarray
    thresholds: dict
    gamma: float
    c_star: float
    dense_regime: bool
    condition_holds: bool


def class_thresholds(params: ScaleParams, gamma: float, c_star: float) -> tuple[dict, bool, bool]:
    N, d, a = params.N, params.d, params.a_frak
    log_n = math.log(N)
    dense = d > log_n**0.75
    t_w = a - c_star * d ** (2.0 * gamma - 1.0) / math.log(a)
    if dense:
        t_v = a - c_star * a**1.5 / (a - 2.0) * log_n**0.25 / math.sqrt(d) * math.log(d)
        t_u = 2.0 + (math.sqrt(log_n) * math.log(d) / d) ** 0.25
    else:
        t_v = a - c_star * math.sqrt(a)
        t_u = a / 5.0
    condition = a - 2.0 >= math.log(d) * max(d ** (-1.0 / 20.0 + 1.5 * gamma), d ** (-2.0 * gamma / 3.0))
    return {"W": t_w, "V": t_v, "U": t_u}, dense, condition


def classify_vertices(graph: GraphSample, params: ScaleParams, gamma: float = 0.125, c_star: float = 3.0) -> VertexClasses:
    """Vertices whose normalized degree clears each of the three cutoffs.

    Isolated vertices have no two-sphere ratio and are never classified.
    """
    thresholds, dense, condition = class_thresholds(params, gamma, c_star)
    alpha = graph.degrees / graph.d
    valid = graph.degrees > 0

    def members(t):
        return np.flatnonzero(valid & (alpha >= t))

    return VertexClasses(
        W=members(thresholds["W"]),
        V=members(thresholds["V"]),
        U=members(thresholds["U"]),
        thresholds=thresholds,
        gamma=gamma,
        c_star=c_star,
        dense_regime=dense,
        condition_holds=condition,
    )


def default_radius(params: ScaleParams, c: float = 0.1) -> int:
    """Radius 42 + floor((1/c) (a^2/(a-2)^2) (log d/log a))."""
    a, d = params.a_frak, params.d
    return 42 + int(math.floor((1.0 / c) * (a * a / (a - 2.0) ** 2) * (math.log(d) / math.log(a))))


def capped_radius(graph: GraphSample, x: int, r: int) -> int:
    """Largest r' <= r such that B_r'(x) holds at most half of the vertices."""
    ball = Ball(graph, x, 0)
    r_ok = 0
    for radius in range(1, r + 1):
        ball = Ball(graph, x, radius)
        if ball.vertices.size > graph.N / 2 or ball.sphere_sizes[-1] == 0:
            break
        r_ok = radius
    return r_ok


def tree_radius(graph: GraphSample, x: int, r_max: int) -> int:
    """Largest r <= r_max with the ball B_{r+1}(x) a tree; -1 if even B_1 has a cycle."""
    # grow one layer at a time: balls around hubs explode, so stop at the first cycle
    best = -1
    for r in range(0, r_max + 1):
        if not Ball(graph, x, r + 1).is_tree(r + 1):
            break
        best = r
    return best


@dataclasses.dataclass
class AuditReport:
    x: int
    r: int
    delta: float
    gamma: float
    is_tree: bool
    sphere_sizes: list
    # distance to the closest other flagged vertex and whether balls are disjoint
    min_flagged_distance: float
    balls_disjoint: bool
    # |S_{i+1}|/(d|S_i|) - 1 over sqrt(delta/|S_i|), i = 1..r
    growth_ratio: list
    # |S_i|/(D_x d^{i-1}) - 1 over sqrt(delta/D_x), i = 1..r
    sphere_ratio: list
    # max |D_y - d| / (sqrt(delta) d) over B_r(x) minus x
    degree_ratio: float
    # max over z, i of sum of (N_y - d) over descendants at generation i, over d^{(i+1)/2 + gamma}
    children_sum_ratio: float
    # sum over S_i of (N_y - d)^2, divided by D_x d^i, i = 1..r
    quadratic_sum: list
    quadratic_ratio: list
    degenerate_spheres: list

    def all_ratios_le_one(self) -> bool:
        vals = [abs(v) for v in self.growth_ratio + self.sphere_ratio]
        vals += [self.degree_ratio, self.children_sum_ratio]
        return bool(all(np.isfinite(vals)) and max(vals, default=0.0) <= 1.0)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def audit_ball(graph: GraphSample, x: int, r: int, delta: float, flagged=None, gamma: float | None = None) -> AuditReport:
    """Measure the concentration properties of the ball B_r(x).

    Each quantity is reported as a ratio to its envelope; nothing here raises
    on a violation.
    """
    d = graph.d
    if gamma is None:
        gamma = 0.5 * (math.log(delta) / math.log(d) + 1.0)
    ball = Ball(graph, x, r + 1)
    sizes = ball.sphere_sizes
    D_x = sizes[1]
    tree = ball.is_tree(r)
    degenerate = [i for i in range(1, r + 2) if sizes[i] == 0]

    growth, sphere = [], []
    for i in range(1, r + 1):
        if sizes[i] == 0:
            growth.append(math.nan)
            sphere.append(math.nan)
            continue
        growth.append(abs(sizes[i + 1] / (d * sizes[i]) - 1.0) / math.sqrt(delta / sizes[i]))
        sphere.append(abs(sizes[i] / (D_x * d ** (i - 1)) - 1.0) / math.sqrt(delta / D_x))

    inner = ball.vertices[(ball.depth >= 1) & (ball.depth <= r)]
    degree_ratio = float(np.max(np.abs(graph.degrees[inner] - d)) / (math.sqrt(delta) * d)) if inner.size else 0.0

    excess = np.where(ball.children_counts >= 0, ball.children_counts - d, 0.0)
    # generation sums: level[z] = sum over descendants of z at generation i
    children_ratio = 0.0
    level = excess.copy()
    nonroot = ball.parent >= 0
    for i in range(1, r + 1):
        up = np.zeros_like(level)
        np.add.at(up, ball.parent[nonroot], level[nonroot])
        # up[z] = sum of (N_y - d) over y at generation i below z
        eligible = (ball.depth >= 1) & (ball.depth + i <= r)
        if np.any(eligible):
            children_ratio = max(children_ratio, float(np.max(np.abs(up[eligible]))) / d ** ((i + 1) / 2.0 + gamma))
        level = up

    quad, quad_ratio = [], []
    for i in range(1, r + 1):
        mask = ball.depth == i
        value = float(np.sum(excess[mask] ** 2))
        quad.append(value)
        quad_ratio.append(value / (D_x * d**i) if D_x else math.nan)

    min_dist = math.inf
    if flagged is not None:
        others = [int(y) for y in flagged if int(y) != int(x)]
        if others:
            far = Ball(graph, x, 2 * r)
            for y in others:
                if y in far.local:
                    min_dist = min(min_dist, int(far.depth[far.local[y]]))
    return AuditReport(
        x=int(x),
        r=int(r),
        delta=float(delta),
        gamma=float(gamma),
        is_tree=tree,
        sphere_sizes=sizes,
        min_flagged_distance=float(min_dist),
        balls_disjoint=bool(min_dist > 2 * r),
        growth_ratio=growth,
        sphere_ratio=sphere,
        degree_ratio=degree_ratio,
        children_sum_ratio=children_ratio,
        quadratic_sum=quad,
        quadratic_ratio=quad_ratio,
        degenerate_spheres=degenerate,
    )


def ball_spanning_tree(graph: GraphSample, x: int, radius: int) -> tuple[GraphSample, np.ndarray]:
    """Breadth-first spanning tree of B_radius(x) as a graph on local labels.

    Cycle-closing edges of the ball are dropped; spheres and depths are kept.
    Returns the tree (root relabelled 0) and the global ids of its vertices.
    """
    ball = Ball(graph, x, radius)
    child = np.flatnonzero(ball.parent >= 0)
    tree = GraphSample.from_edges(ball.vertices.size, graph.d, ball.parent[child], child, seed=graph.seed)
    return tree, ball.vertices.copy()

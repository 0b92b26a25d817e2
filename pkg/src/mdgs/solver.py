"""Exact ground states through maximum-weight matching.

Every covering M satisfies ``H(M) = sum_v J_v - sum_{e in M} g_e`` with
the edge gain ``g_e = J_u + J_v - J_e``, so minimising H is the same as
finding a maximum-gain (not necessarily perfect) matching. Bipartite
graphs go through ``scipy.optimize.linear_sum_assignment``; everything
else through the blossom implementation in networkx.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from scipy.optimize import linear_sum_assignment

from .disorder import WeightAssignment, gauge_transform, make_inaccessible
from .lattice import Lattice
from .matching import (
    Covering,
    LocalConstraint,
    energy,
    sym_diff_decompose,
    tie_tolerance,
)

__all__ = [
    "GainGraph",
    "SolveResult",
    "InfeasibleConstraintError",
    "gain_graph",
    "ground_state",
    "constrained_ground_state",
    "constraint_feasible",
    "delta_H",
    "transition_point",
    "flexibility",
    "optimality",
    "is_inaccessible",
    "metastate_table",
    "metastate_cell",
    "PathModVerdict",
    "path_modification_check",
    "reduction_residual",
    "solve_audit",
    "SolveAudit",
]


class InfeasibleConstraintError(ValueError):
    """No covering satisfies the requested local constraint."""


@dataclass(frozen=True)
class GainGraph:
    lattice: Lattice
    gains: np.ndarray  # one entry per edge, in edge order
    penalty: float

    @property
    def edges(self) -> np.ndarray:
        return self.lattice.edges


@dataclass(frozen=True)
class SolveResult:
    covering: Covering | None
    energy: float
    tie_events: int = 0
    feasible: bool = True

    def __bool__(self) -> bool:
        return self.feasible


def _values(J) -> np.ndarray:
    return np.asarray(getattr(J, "values", J), dtype=np.float64)


def gain_graph(lattice: Lattice, J) -> GainGraph:
    w = _values(J)
    V = lattice.num_vertices
    ends = lattice.edges
    gains = w[ends[:, 0]] + w[ends[:, 1]] - w[V:]
    return GainGraph(lattice, gains, float(np.sum(np.abs(gains))) + 2.0)


def reduction_residual(M: Covering, J) -> float:
    """``H(M) + sum of dimer gains - sum of vertex weights`` (zero up to rounding)."""
    w = _values(J)
    L = M.lattice
    V = L.num_vertices
    g = gain_graph(L, w).gains
    dimer_gain = sum(g[e - V] for e in sorted(M.dimers))
    return energy(M, w) + dimer_gain - float(np.sum(w[:V]))


@dataclass
class SolveAudit:
    """Running record of every solve made while the audit is active."""

    solves: int = 0
    max_residual: float = 0.0
    worst: list = field(default_factory=list)

    def record(self, M: Covering, w: np.ndarray) -> None:
        self.solves += 1
        r = abs(reduction_residual(M, w))
        if r > self.max_residual:
            self.max_residual = r
            self.worst = [M, w.copy()]


_audits: list[SolveAudit] = []


@contextmanager
def solve_audit():
    """Check the reduction identity on every solve inside the block."""
    audit = SolveAudit()
    _audits.append(audit)
    try:
        yield audit
    finally:
        _audits.remove(audit)


def _max_gain_matching(lattice: Lattice, edge_ids: np.ndarray, weights: np.ndarray) -> list[int]:
    """Maximum-weight matching on the listed (local) edge ids with positive weights."""
    if len(edge_ids) == 0:
        return []
    ends = lattice.edges[edge_ids]
    colors = lattice.vertex_colors
    if colors is not None:
        left = np.where(colors[ends[:, 0]] == 0, ends[:, 0], ends[:, 1])
        right = np.where(colors[ends[:, 0]] == 0, ends[:, 1], ends[:, 0])
        rows, r_inv = np.unique(left, return_inverse=True)
        cols, c_inv = np.unique(right, return_inverse=True)
        cost = np.zeros((len(rows), len(cols)))
        which = np.full((len(rows), len(cols)), -1, dtype=np.int64)
        cost[r_inv, c_inv] = -weights
        which[r_inv, c_inv] = np.arange(len(edge_ids))
        ri, ci = linear_sum_assignment(cost)
        picked = which[ri, ci]
        picked = picked[(picked >= 0) & (cost[ri, ci] < 0)]
        return sorted(int(edge_ids[k]) for k in picked)
    G = nx.Graph()
    for k, (a, b) in enumerate(ends.tolist()):
        G.add_edge(a, b, weight=float(weights[k]), eid=int(edge_ids[k]))
    mate = nx.max_weight_matching(G, maxcardinality=False, weight="weight")
    return sorted(G.edges[a, b]["eid"] for a, b in mate)


def constrained_ground_state(lattice: Lattice, J, xi: LocalConstraint | None = None) -> SolveResult:
    """Lowest-energy covering agreeing with ``xi``.

    Constraints are compiled into the matching problem: an occupied site
    removes its vertices, a vacant edge is deleted, and a vacant vertex
    (which must then be matched) gets a large bonus on its edges.
    """
    L = lattice
    w = _values(J)
    V = L.num_vertices
    xi = xi or LocalConstraint()
    status = {L.check_site(x): s for x, s in xi.items}

    taken = np.zeros(V, dtype=bool)
    occupied = [x for x, s in status.items() if s == 1]
    for x in occupied:
        for v in L.vertex_set(x):
            if taken[v]:
                return SolveResult(None, float("nan"), feasible=False)
            taken[v] = True
    forced = np.zeros(V, dtype=bool)
    for x, s in status.items():
        if s == 0 and x < V and not taken[x]:
            forced[x] = True

    ends = L.edges
    edge_ok = ~taken[ends[:, 0]] & ~taken[ends[:, 1]]
    for x, s in status.items():
        if s == 0 and x >= V:
            edge_ok[x - V] = False
    gains = w[ends[:, 0]] + w[ends[:, 1]] - w[V:]
    active = np.flatnonzero(edge_ok)
    bonus_count = forced[ends[active, 0]].astype(np.int64) + forced[ends[active, 1]]
    penalty = float(np.sum(np.abs(gains[active]))) + 2.0
    eff = gains[active] + penalty * bonus_count
    keep = eff > 0
    chosen = _max_gain_matching(L, active[keep], eff[keep])

    matched = np.zeros(V, dtype=bool)
    dimers = []
    for k in chosen:
        a, b = ends[k]
        matched[a] = matched[b] = True
        dimers.append(V + k)
    if np.any(forced & ~matched):
        return SolveResult(None, float("nan"), feasible=False)
    monomers = [v for v in range(V) if not taken[v] and not matched[v]]
    M = Covering.from_sites(L, occupied + dimers + monomers)
    if not xi.agrees(M):  # pragma: no cover - compilation bug guard
        raise AssertionError("constrained solve violated its constraint")
    for audit in _audits:
        audit.record(M, w)
    return SolveResult(M, energy(M, w))


def ground_state(lattice: Lattice, J) -> SolveResult:
    """The minimum-energy covering."""
    return constrained_ground_state(lattice, J, None)


def constraint_feasible(lattice: Lattice, xi: LocalConstraint) -> bool:
    return constrained_ground_state(lattice, np.zeros(lattice.num_sites), xi).feasible


def _solve_or_raise(lattice, J, xi) -> SolveResult:
    res = constrained_ground_state(lattice, J, xi)
    if not res.feasible:
        raise InfeasibleConstraintError(f"constraint {xi.as_dict()} admits no covering")
    return res


def delta_H(lattice: Lattice, J, xi: LocalConstraint, xi2: LocalConstraint) -> float:
    """H(M_xi2) - H(M_xi) for two constraints on the same sites."""
    if xi.sites != xi2.sites:
        raise ValueError("both constraints must be defined on the same sites")
    return _solve_or_raise(lattice, J, xi2).energy - _solve_or_raise(lattice, J, xi).energy


def transition_point(lattice: Lattice, J, x: int, *, details: bool = False):
    """K_x = H(M_{x,0}) - H(M_{x,1}) + J_x.

    ``x`` is occupied in the ground state exactly when ``J_x <= K_x``.
    With ``details`` the two constrained solves are returned as well.
    """
    x = lattice.check_site(x)
    w = _values(J)
    vacant = _solve_or_raise(lattice, w, LocalConstraint.of({x: 0}))
    filled = _solve_or_raise(lattice, w, LocalConstraint.of({x: 1}))
    K = vacant.energy - filled.energy + w[x]
    if details:
        return K, vacant, filled
    return K


def flexibility(lattice: Lattice, J, x: int) -> float:
    """|K_x - J_x|: how far J_x must move before x changes status."""
    return abs(transition_point(lattice, J, x) - _values(J)[lattice.check_site(x)])


def optimality(lattice: Lattice, J, v: int) -> float:
    """max over neighbours u of (J_u + J_v - J_uv); -inf for isolated vertices."""
    if not lattice.is_vertex(v):
        raise ValueError(f"site {v} is not a vertex")
    w = _values(J)
    best = -np.inf
    for e in lattice.incident_edges(v):
        a, b = lattice.endpoints(e)
        best = max(best, w[a] + w[b] - w[e])
    return float(best)


def is_inaccessible(lattice: Lattice, J, e: int) -> bool:
    if not lattice.is_edge(e):
        raise ValueError(f"site {e} is not an edge")
    w = _values(J)
    a, b = lattice.endpoints(e)
    return bool(w[e] > w[a] + w[b])


def metastate_table(lattice: Lattice, J, sites) -> dict[LocalConstraint, SolveResult]:
    """Constrained solves for every valid configuration on ``sites``."""
    out = {}
    for xi in LocalConstraint.all_on(lattice.check_site(s) for s in sites):
        res = constrained_ground_state(lattice, J, xi)
        if res.feasible:
            out[xi] = res
    return out


def metastate_cell(lattice: Lattice, J, sites, *, with_ties: bool = False):
    """The configuration on ``sites`` whose constrained energy is strictly
    lowest, i.e. the cell of the local weights.

    Ties (within the solver tolerance) go to the lexicographically smaller
    covering; ``with_ties`` additionally returns the number of tie events.
    """
    table = metastate_table(lattice, J, sites)
    if not table:
        raise InfeasibleConstraintError("no valid configuration on these sites")
    tol = tie_tolerance(J)
    best = min(r.energy for r in table.values())
    tied = [(xi, r) for xi, r in table.items() if r.energy <= best + tol]
    xi, _ = min(tied, key=lambda t: t[1].covering.sort_key())
    ties = int(len(tied) > 1)
    return (xi, ties) if with_ties else xi


@dataclass(frozen=True)
class PathModVerdict:
    verdict: str  # "EMPTY", "PATH", "FAIL" or "SKIP"
    reason: str = ""
    stop_index: int | None = None  # p for the PATH branch (1-based)

    @property
    def ok(self) -> bool:
        return self.verdict != "FAIL"


def path_modification_check(lattice: Lattice, J: WeightAssignment, path, j: int, eps: float,
                            seed: int | None = None, *stream: int,
                            uniform: float | None = None) -> PathModVerdict:
    """Raise the edges at ``u1`` by eps/2, make the edges hanging off the
    path's interior inaccessible, re-solve, and classify the change.

    ``path`` lists the vertices ``u1..uk``; ``j`` is 1-based. A correct
    solver yields either no change or a path that starts at ``u1``, runs
    along ``path`` and stops at some ``u_p`` with ``p <= k-1``.
    """
    L = lattice
    u = [L.check_site(v) for v in path]
    k = len(u)
    if k < 3 or len(set(u)) != k or any(not L.is_vertex(v) for v in u):
        return PathModVerdict("SKIP", "path must have at least 3 distinct vertices")
    if not 1 < j < k:
        return PathModVerdict("SKIP", "need 1 < j < k")
    try:
        path_edges = [L.edge_site(u[i], u[i + 1]) for i in range(k - 1)]
    except ValueError:
        return PathModVerdict("SKIP", "consecutive path vertices are not adjacent")
    M = ground_state(L, J).covering
    for i, e in enumerate(path_edges):
        if (e in M) != (i % 2 == 0):
            return PathModVerdict("SKIP", "path edges do not alternate starting with a dimer at u1")
    if path_edges[j - 1] not in M:
        return PathModVerdict("SKIP", "(u_j, u_j+1) is not a dimer")
    if not eps > 0:
        return PathModVerdict("SKIP", "eps must be positive")
    if flexibility(L, J, path_edges[-1]) < eps:
        return PathModVerdict("SKIP", "last path edge is not flexible enough")

    u1 = u[0]
    on_path = set(path_edges)
    interior = [u[i] for i in range(1, k - 1) if i != j - 1]
    E_S = sorted({e for v in interior for e in L.incident_edges(v)} - on_path)

    gauged = gauge_transform(J, u1, eps / 2)
    lifted, _ = make_inaccessible(gauged, E_S, seed, *stream, uniform=uniform)
    final = lifted.replace({u1: lifted[u1] - eps / 2}, note=f"lower({u1},{eps / 2!r})")

    for e in E_S:
        if not is_inaccessible(L, final, e):
            return PathModVerdict("FAIL", f"edge {e} is not inaccessible after the shift")
    if not set(E_S) & set(L.incident_edges(u1)):
        drop = optimality(L, J, u1) - optimality(L, final, u1)
        if abs(drop - eps / 2) > 1e-9 * max(1.0, abs(eps)):
            return PathModVerdict("FAIL", f"optimality at u1 dropped by {drop}, expected {eps / 2}")

    M2 = ground_state(L, final).covering
    decomp = sym_diff_decompose(M, M2)
    if len(decomp) == 0:
        return PathModVerdict("EMPTY")
    if len(decomp) != 1 or decomp.components[0].kind != "path":
        return PathModVerdict("FAIL", f"symmetric difference has {len(decomp)} components")
    elems = list(decomp.components[0].elements)
    if elems[-1] == u1:
        elems.reverse()
    if elems[0] != u1:
        return PathModVerdict("FAIL", "changed path does not start at u1")
    p = len(elems) - 1  # vertices on the changed path
    expected = [u[0]]
    for i in range(p - 1):
        expected.append(path_edges[i])
    expected.append(u[p - 1])
    if p < 2 or p > k - 1 or elems != expected:
        return PathModVerdict("FAIL", f"changed path {elems} does not follow the prescribed path")
    return PathModVerdict("PATH", stop_index=p)

"""Randomised property checks: solver against brute force, and the
structural lemmas about ground states on finite graphs.

Each lemma check draws one random instance and returns ``(status, detail)``
with status ``"pass"``, ``"fail"`` or ``"skip"``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .disorder import GoodDistribution, WeightAssignment, gauge_transform, make_rng, sample
from .lattice import Lattice, from_edge_list, torus
from .matching import (
    Covering,
    brute_force_ground_state,
    covering_matrix,
    sym_diff_decompose,
)
from .solver import (
    delta_H,
    flexibility,
    ground_state,
    is_inaccessible,
    metastate_cell,
    metastate_table,
    optimality,
    path_modification_check,
    solve_audit,
    transition_point,
)

CHAIN_TOL = 1e-9
RESIDUAL_TOL = 1e-9


# -- oracle equivalence -----------------------------------------------------

def oracle_lattices(max_sites: int = 27) -> list[tuple[str, Lattice]]:
    """Small graphs for the brute-force comparison, filtered by site count."""
    graphs = [
        ("P2", from_edge_list(2, [(0, 1)])),
        ("P3", from_edge_list(3, [(0, 1), (1, 2)])),
        ("triangle", from_edge_list(3, [(0, 1), (1, 2), (0, 2)])),
        ("C4", from_edge_list(4, [(0, 1), (1, 2), (2, 3), (0, 3)])),
        ("grid2x3", from_edge_list(6, [(0, 1), (1, 2), (3, 4), (4, 5), (0, 3), (1, 4), (2, 5)])),
        ("ladder2x4", from_edge_list(8, [(0, 1), (1, 2), (2, 3), (4, 5), (5, 6), (6, 7),
                                         (0, 4), (1, 5), (2, 6), (3, 7)])),
    ]
    graphs += [(f"torus1d-n{n}", torus(1, n)) for n in range(3, 9)]
    graphs.append(("torus2d-n3", torus(2, 3)))
    return [(name, L) for name, L in graphs if L.num_sites <= max_sites]


@dataclass
class OracleReport:
    trials: int = 0
    mismatches: list = field(default_factory=list)
    tie_events: int = 0
    solves: int = 0
    max_residual: float = 0.0
    per_lattice: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.mismatches and self.max_residual <= RESIDUAL_TOL


def oracle_check(max_sites: int = 27, trials: int = 1000, seed: int = 1,
                 dist: GoodDistribution = GoodDistribution()) -> OracleReport:
    """Compare :func:`ground_state` with exhaustive enumeration."""
    report = OracleReport()
    with solve_audit() as audit:
        for li, (name, L) in enumerate(oracle_lattices(max_sites)):
            mat = covering_matrix(L)
            bad = 0
            for t in range(trials):
                J = sample(L, dist, seed, li, t)
                fast = ground_state(L, J).covering
                slow, _, ties = brute_force_ground_state(L, J, matrix=mat)
                report.tie_events += ties
                report.trials += 1
                if fast != slow:
                    bad += 1
                    report.mismatches.append((name, t))
            report.per_lattice[name] = {"sites": L.num_sites, "coverings": len(mat),
                                        "trials": trials, "mismatches": bad}
    report.solves = audit.solves
    report.max_residual = audit.max_residual
    return report


# -- helpers ----------------------------------------------------------------

def _decomposition_problems(M1: Covering, M2: Covering) -> list[str]:
    L = M1.lattice
    problems = []
    dec = sym_diff_decompose(M1, M2)
    union: set[int] = set()
    for c in dec:
        if union & c.sites:
            problems.append("components overlap")
        union |= c.sites
        if c.side_a & c.side_b:
            problems.append("sides overlap")
        if not c.side_a <= M1.occupied or not c.side_b <= M2.occupied:
            problems.append("sides do not belong to their coverings")
        seq = list(c.elements)
        pairs = zip(seq, seq[1:] + seq[:1]) if c.kind == "loop" else zip(seq, seq[1:])
        for a, b in pairs:
            if (a in c.side_a) == (b in c.side_a):
                problems.append(f"{c.kind} does not alternate at {a},{b}")
                break
        if c.kind == "path" and not (L.is_vertex(seq[0]) and L.is_vertex(seq[-1])):
            problems.append("path endpoints are not vertices")
        if c.kind == "loop" and any(L.is_vertex(x) for x in seq):
            problems.append("loop contains a vertex")
    diff = M1.occupied ^ M2.occupied
    if union != diff:
        problems.append("components do not cover the symmetric difference")
    deg: dict[int, int] = {}
    for e in diff:
        if L.is_edge(e):
            for v in L.endpoints(e):
                deg[v] = deg.get(v, 0) + 1
    for v, k in deg.items():
        if k > 2:
            problems.append(f"vertex {v} has degree {k}")
        if k == 1 and (v in M1) == (v in M2):
            problems.append(f"degree-one vertex {v} not occupied by exactly one covering")
    # each single swap must leave a covering; only vertices the component touches can break
    occ1 = M1.occupied
    for c in dec:
        swapped = (occ1 - c.side_a) | c.side_b
        touched = set().union(*(L.vertex_set(x) for x in c.elements))
        if any(sum(y in swapped for y in L.neighbors(v)) != 1 for v in touched):
            problems.append(f"swapping the {c.kind} at {min(c.elements)} breaks the covering")
            break
    occ = occ1
    for c in dec:
        occ = (occ - c.side_a) | c.side_b
    if occ != M2.occupied:
        problems.append("swapping every component does not reach the second covering")
    return problems


def _random_sites(L: Lattice, rng: np.random.Generator, size: int) -> list[int]:
    """A connected-ish cluster of ``size`` sites grown from a random seed site."""
    sites = [int(rng.integers(L.num_sites))]
    while len(sites) < size:
        pool = sorted(set().union(*(L.sigma_adjacent(x) for x in sites)) - set(sites))
        sites.append(int(pool[rng.integers(len(pool))]))
    return sorted(sites)


def _fresh(J: WeightAssignment, rng: np.random.Generator) -> float:
    return float(J.distribution.draw(rng, 1)[0]) if J.distribution else float(rng.standard_normal())


# -- lemma checks -----------------------------------------------------------

def check_decomposition(L, J, rng):
    M1 = ground_state(L, J).covering
    J2 = sample(L, J.distribution or GoodDistribution(), int(rng.integers(2**63)))
    mask = rng.random(L.num_sites) < rng.uniform(0.05, 1.0)
    J2 = J.derive(np.where(mask, J2.values, J.values), "partial resample")
    M2 = ground_state(L, J2).covering
    problems = _decomposition_problems(M1, M2) + _decomposition_problems(M2, M1)
    return ("fail", "; ".join(problems)) if problems else ("pass", "")


def check_single_vertex_change(L, J, rng):
    M = ground_state(L, J).covering
    candidates = sorted(M.monomers)
    if not candidates:
        return "skip", "ground state has no monomers"
    v = candidates[rng.integers(len(candidates))]
    J2 = J.replace({v: _fresh(J, rng)})
    M2 = ground_state(L, J2).covering
    dec = sym_diff_decompose(M, M2)
    if len(dec) == 0:
        return "pass", ""
    c = dec.components[0]
    if len(dec) == 1 and c.kind == "path" and v in (c.elements[0], c.elements[-1]):
        return "pass", ""
    return "fail", f"changing vertex {v} produced {len(dec)} components"


def check_gauge(L, J, rng):
    u = int(rng.integers(L.num_vertices))
    lam = float(rng.normal(scale=3.0))
    M = ground_state(L, J).covering
    M2 = ground_state(L, gauge_transform(J, u, lam)).covering
    return ("pass", "") if M == M2 else ("fail", f"gauge at {u} by {lam} changed the ground state")


def check_local_criteria(L, J, rng):
    M = ground_state(L, J).covering
    for e in range(L.num_vertices, L.num_sites):
        if is_inaccessible(L, J, e) and e in M:
            return "fail", f"inaccessible edge {e} is a dimer"
    for v in range(L.num_vertices):
        if optimality(L, J, v) < 0 and v not in M:
            return "fail", f"vertex {v} has negative optimality but is not a monomer"
    return "pass", ""


def _three_valid(L, J, rng, size):
    sites = _random_sites(L, rng, size)
    table = metastate_table(L, J, sites)
    keys = list(table)
    picks = [keys[i] for i in rng.integers(len(keys), size=3)]
    return sites, table, picks


def check_chain_rule(L, J, rng):
    _, _, (a, b, c) = _three_valid(L, J, rng, int(rng.integers(1, 4)))
    lhs = delta_H(L, J, a, b) + delta_H(L, J, b, c)
    rhs = delta_H(L, J, a, c)
    return ("pass", "") if abs(lhs - rhs) <= CHAIN_TOL else ("fail", f"chain rule off by {lhs - rhs}")


def check_energy_bound(L, J, rng):
    sites, _, (a, b, _) = _three_valid(L, J, rng, int(rng.integers(1, 4)))
    dh = abs(delta_H(L, J, a, b))
    region = L.closure(L.closure(sites))
    bound = float(np.sum(np.abs(J.values[sorted(region)])))
    return ("pass", "") if dh <= bound + 1e-12 else ("fail", f"|dH|={dh} exceeds {bound}")


def check_cell_restriction(L, J, rng):
    sites = _random_sites(L, rng, int(rng.integers(1, 4)))
    M = ground_state(L, J).covering
    xi = metastate_cell(L, J, sites)
    if xi != M.restrict(sites):
        return "fail", f"cell {xi.as_dict()} disagrees with ground state on {sites}"
    table = metastate_table(L, J, sites)
    if table[xi].covering != M:
        return "fail", "constrained ground state of the cell differs from the ground state"
    return "pass", ""


def check_transition_point(L, J, rng):
    x = int(rng.integers(L.num_sites))
    K = transition_point(L, J, x)
    J2 = J.replace({x: _fresh(J, rng)})
    K2 = transition_point(L, J2, x)
    tol = 1e-9 * max(1.0, abs(K))
    if abs(K - K2) > tol:
        return "fail", f"K at {x} moved from {K} to {K2} when only J_x changed"
    for weights in (J, J2):
        inside = x in ground_state(L, weights).covering
        if inside != (weights[x] <= K):
            return "fail", f"membership of {x} disagrees with J_x <= K"
    return "pass", ""


def check_perturbation_protection(L, J, rng):
    x = int(rng.integers(L.num_sites))
    y = x if rng.random() < 0.2 else int(rng.integers(L.num_sites))
    F = flexibility(L, J, x)
    eps = float(rng.uniform(0.0, 1.0)) * F
    sign = 1.0 if rng.random() < 0.5 else -1.0
    M = ground_state(L, J).covering
    M2 = ground_state(L, J.replace({y: J[y] + sign * eps})).covering
    diff = M.occupied ^ M2.occupied
    if x in diff:
        return "fail", f"shifting {y} by {sign * eps} < F({x})={F} flipped {x}"
    if y == x and diff:
        return "fail", "shifting x below its own flexibility changed the ground state"
    return "pass", ""


def check_raise_unoccupied(L, J, rng):
    M = ground_state(L, J).covering
    free = sorted(set(range(L.num_sites)) - M.occupied)
    size = int(rng.integers(1, min(10, len(free)) + 1))
    S = rng.choice(free, size=size, replace=False)
    raised = J.replace({int(x): J[int(x)] + float(rng.exponential()) for x in S})
    if ground_state(L, raised).covering != M:
        return "fail", "raising unoccupied weights changed the ground state"
    for x in rng.integers(L.num_sites, size=3):
        before, after = flexibility(L, J, int(x)), flexibility(L, raised, int(x))
        if after < before - 1e-9 * max(1.0, before):
            return "fail", f"flexibility of {x} fell from {before} to {after}"
    return "pass", ""


def random_alternating_path(L: Lattice, M: Covering, rng: np.random.Generator, max_len: int = 12):
    """A simple path u1..uk whose edges alternate dimer / non-dimer in M,
    starting with a dimer at u1. Returns None when none was found."""
    dimers = sorted(M.dimers)
    if not dimers:
        return None
    a, b = L.endpoints(dimers[rng.integers(len(dimers))])
    if rng.random() < 0.5:
        a, b = b, a
    path = [a, b]
    target = int(rng.integers(4, max_len + 1))
    while len(path) < target:
        end = path[-1]
        options = []
        for e in L.incident_edges(end):
            if e in M:
                continue
            c, d = L.endpoints(e)
            nxt = d if c == end else c
            if nxt in path:
                continue
            partner = M.cover_of(nxt)
            if not L.is_edge(partner):
                options.append((nxt, None))
                continue
            p, q = L.endpoints(partner)
            beyond = q if p == nxt else p
            if beyond not in path:
                options.append((nxt, beyond))
        if not options:
            break
        nxt, beyond = options[rng.integers(len(options))]
        path.append(nxt)
        if beyond is None:
            break
        if len(path) + 1 <= target or rng.random() < 0.5:
            path.append(beyond)
        else:
            break
    return path if len(path) >= 4 else None


def check_path_modification(L, J, rng):
    M = ground_state(L, J).covering
    path = random_alternating_path(L, M, rng)
    if path is None:
        return "skip", "no alternating path of length >= 4"
    k = len(path)
    odd = [j for j in range(3, k) if j % 2 == 1]
    if not odd:
        return "skip", "path too short for a dimer at (u_j, u_j+1)"
    j = int(odd[rng.integers(len(odd))])
    last = L.edge_site(path[-2], path[-1])
    F = flexibility(L, J, last)
    eps = float(rng.uniform(0.05, 1.0)) * F
    verdict = path_modification_check(L, J, path, j, eps, uniform=float(rng.random()))
    if verdict.verdict == "FAIL":
        return "fail", verdict.reason
    if verdict.verdict == "SKIP":
        return "skip", verdict.reason
    return "pass", verdict.verdict


LEMMAS: dict[str, Callable] = {
    "paths_and_loops": check_decomposition,
    "single_vertex_change": check_single_vertex_change,
    "gauge_invariance": check_gauge,
    "inaccessible_and_optimality": check_local_criteria,
    "chain_rule": check_chain_rule,
    "energy_difference_bound": check_energy_bound,
    "cell_restriction": check_cell_restriction,
    "transition_point": check_transition_point,
    "perturbation_protection": check_perturbation_protection,
    "raise_unoccupied": check_raise_unoccupied,
    "path_modification": check_path_modification,
}


@dataclass
class LemmaTally:
    passed: int = 0
    failed: int = 0
    skipped: int = 0
    failures: list = field(default_factory=list)

    @property
    def trials(self) -> int:
        return self.passed + self.failed + self.skipped


@dataclass
class LemmaSuiteReport:
    tallies: dict
    solves: int
    max_residual: float

    @property
    def ok(self) -> bool:
        return all(t.failed == 0 for t in self.tallies.values()) and self.max_residual <= RESIDUAL_TOL


def run_lemma_suite(trials: int = 500, sizes=(4, 5, 6, 7, 8), seed: int = 2, d: int = 2,
                    dist: GoodDistribution = GoodDistribution(), lemmas=None) -> LemmaSuiteReport:
    """Run every lemma check ``trials`` times on 2-d tori of the given sizes."""
    lattices = {n: torus(d, n) for n in sizes}
    names = list(lemmas or LEMMAS)
    tallies = {name: LemmaTally() for name in names}
    with solve_audit() as audit:
        for li, name in enumerate(names):
            check = LEMMAS[name]
            tally = tallies[name]
            for t in range(trials):
                n = sizes[t % len(sizes)]
                L = lattices[n]
                J = sample(L, dist, seed, li, t, 0)
                rng = make_rng(seed, li, t, 1)
                status, detail = check(L, J, rng)
                if status == "pass":
                    tally.passed += 1
                elif status == "skip":
                    tally.skipped += 1
                else:
                    tally.failed += 1
                    tally.failures.append({"trial": t, "n": n, "detail": detail})
    return LemmaSuiteReport(tallies, audit.solves, audit.max_residual)


__all__ = [
    "oracle_lattices",
    "oracle_check",
    "OracleReport",
    "LEMMAS",
    "run_lemma_suite",
    "LemmaSuiteReport",
    "LemmaTally",
    "random_alternating_path",
    "CHAIN_TOL",
    "RESIDUAL_TOL",
]

"""Monomer-dimer coverings, local constraints and symmetric differences."""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np

from .lattice import Lattice

__all__ = [
    "Covering",
    "LocalConstraint",
    "Component",
    "SymDiffDecomposition",
    "InvalidCoveringError",
    "energy",
    "sym_diff_decompose",
    "apply_component_swap",
    "is_valid_constraint",
    "enumerate_coverings",
    "covering_matrix",
    "brute_force_ground_state",
    "local_extension",
    "tie_tolerance",
    "MAX_ENUMERATION_SITES",
]

MAX_ENUMERATION_SITES = 40


class InvalidCoveringError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Covering:
    """A full monomer-dimer covering: every vertex is a monomer or lies in
    exactly one dimer."""

    lattice: Lattice
    dimers: frozenset[int]
    monomers: frozenset[int]

    def __post_init__(self):
        L = self.lattice
        object.__setattr__(self, "dimers", frozenset(int(e) for e in self.dimers))
        object.__setattr__(self, "monomers", frozenset(int(v) for v in self.monomers))
        covered = np.zeros(L.num_vertices, dtype=np.int64)
        for v in self.monomers:
            if not L.is_vertex(v):
                raise InvalidCoveringError(f"monomer {v} is not a vertex")
            covered[v] += 1
        for e in self.dimers:
            if not L.is_edge(e):
                raise InvalidCoveringError(f"dimer {e} is not an edge")
            a, b = L.endpoints(e)
            covered[a] += 1
            covered[b] += 1
        if np.any(covered > 1):
            v = int(np.argmax(covered > 1))
            raise InvalidCoveringError(f"vertex {v} is covered {covered[v]} times")
        if np.any(covered == 0):
            v = int(np.argmin(covered))
            raise InvalidCoveringError(f"vertex {v} is not covered")

    @classmethod
    def from_sites(cls, lattice: Lattice, occupied: Iterable[int]) -> "Covering":
        occ = {int(x) for x in occupied}
        V = lattice.num_vertices
        return cls(lattice, frozenset(x for x in occ if x >= V), frozenset(x for x in occ if x < V))

    @classmethod
    def from_dimers(cls, lattice: Lattice, dimers: Iterable[int]) -> "Covering":
        """Covering with the given dimers and monomers everywhere else."""
        dimers = frozenset(int(e) for e in dimers)
        covered = {v for e in dimers for v in lattice.endpoints(e)}
        return cls(lattice, dimers, frozenset(set(range(lattice.num_vertices)) - covered))

    @classmethod
    def from_status(cls, lattice: Lattice, status) -> "Covering":
        return cls.from_sites(lattice, np.flatnonzero(np.asarray(status)))

    @property
    def occupied(self) -> frozenset[int]:
        return self.dimers | self.monomers

    def status(self) -> np.ndarray:
        out = np.zeros(self.lattice.num_sites, dtype=np.uint8)
        out[list(self.occupied)] = 1
        return out

    def __contains__(self, x) -> bool:
        return x in self.dimers or x in self.monomers

    def __eq__(self, other) -> bool:
        if not isinstance(other, Covering):
            return NotImplemented
        return self.lattice == other.lattice and self.dimers == other.dimers and self.monomers == other.monomers

    def __hash__(self) -> int:
        return hash((self.dimers, self.monomers))

    def __repr__(self) -> str:
        return f"Covering({len(self.dimers)} dimers, {len(self.monomers)} monomers on {self.lattice!r})"

    def sort_key(self) -> tuple[int, ...]:
        """Key for the lexicographic tie-break between equal-energy coverings."""
        return tuple(sorted(self.occupied))

    def restrict(self, sites: Iterable[int]) -> "LocalConstraint":
        return LocalConstraint.of({x: int(x in self) for x in sites})

    def cover_of(self, v: int) -> int:
        """The site covering vertex ``v``: the monomer itself or its dimer."""
        if v in self.monomers:
            return v
        for e in self.lattice.incident_edges(v):
            if e in self.dimers:
                return e
        raise InvalidCoveringError(f"vertex {v} uncovered")  # unreachable for valid coverings

    def symmetric_difference(self, other: "Covering") -> frozenset[int]:
        return self.occupied ^ other.occupied

    # -- serialization ----------------------------------------------------

    def to_text(self, header: str | None = None) -> str:
        buf = io.StringIO()
        if header:
            for line in header.splitlines():
                buf.write(f"# {line}\n")
        buf.write("sigma_index,status\n")
        occ = self.occupied
        for x in range(self.lattice.num_sites):
            buf.write(f"{x},{int(x in occ)}\n")
        return buf.getvalue()

    def save(self, path, header: str | None = None) -> None:
        Path(path).write_text(self.to_text(header))

    @classmethod
    def from_text(cls, lattice: Lattice, text: str) -> tuple["Covering", str | None]:
        header_lines = []
        status = np.full(lattice.num_sites, -1, dtype=np.int64)
        seen_header = False
        for line in text.splitlines():
            if line.startswith("#"):
                header_lines.append(line[2:] if line.startswith("# ") else line[1:])
                continue
            if not line.strip():
                continue
            if not seen_header:
                if line.strip() != "sigma_index,status":
                    raise ValueError(f"unexpected covering header {line!r}")
                seen_header = True
                continue
            idx, st = line.split(",")
            if st not in ("0", "1"):
                raise ValueError(f"status must be 0 or 1, got {st!r}")
            status[lattice.check_site(int(idx))] = int(st)
        if (status < 0).any():
            raise ValueError("covering file does not list every site")
        header = "\n".join(header_lines) if header_lines else None
        return cls.from_status(lattice, status), header

    @classmethod
    def load(cls, lattice: Lattice, path) -> tuple["Covering", str | None]:
        return cls.from_text(lattice, Path(path).read_text())


@dataclass(frozen=True)
class LocalConstraint:
    """A prescribed 0/1 status on a finite set of sites."""

    items: tuple[tuple[int, int], ...] = ()

    @classmethod
    def of(cls, mapping: Mapping[int, int] | Iterable[tuple[int, int]] = ()) -> "LocalConstraint":
        pairs = dict(mapping.items() if isinstance(mapping, Mapping) else mapping)
        for x, s in pairs.items():
            if s not in (0, 1):
                raise ValueError(f"status of site {x} must be 0 or 1, got {s!r}")
        return cls(tuple(sorted((int(x), int(s)) for x, s in pairs.items())))

    @property
    def sites(self) -> tuple[int, ...]:
        return tuple(x for x, _ in self.items)

    def as_dict(self) -> dict[int, int]:
        return dict(self.items)

    def __len__(self) -> int:
        return len(self.items)

    def __bool__(self) -> bool:
        return bool(self.items)

    def flipped(self, x: int) -> "LocalConstraint":
        d = self.as_dict()
        d[x] = 1 - d[x]
        return LocalConstraint.of(d)

    def agrees(self, covering: Covering) -> bool:
        return all(int(x in covering) == s for x, s in self.items)

    @staticmethod
    def all_on(sites: Iterable[int]) -> Iterator["LocalConstraint"]:
        """Every 0/1 configuration on ``sites`` in lexicographic order."""
        sites = sorted(set(sites))
        for bits in range(2 ** len(sites)):
            yield LocalConstraint.of({x: (bits >> (len(sites) - 1 - i)) & 1 for i, x in enumerate(sites)})


@dataclass(frozen=True)
class Component:
    """One path or loop of a symmetric difference.

    ``elements`` lists the sites in walking order; a path runs
    ``(u1, (u1,u2), ..., (u_{k-1},u_k), u_k)`` and a loop lists only edges.
    ``side_a`` and ``side_b`` are the parts lying in the first and second
    covering respectively.
    """

    kind: str
    elements: tuple[int, ...]
    side_a: frozenset[int]
    side_b: frozenset[int]

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def sites(self) -> frozenset[int]:
        return self.side_a | self.side_b

    def reversed_sides(self) -> "Component":
        return Component(self.kind, self.elements, self.side_b, self.side_a)

    def to_json(self) -> dict:
        return {"kind": self.kind, "elements": list(self.elements),
                "side_a": sorted(self.side_a), "side_b": sorted(self.side_b)}


@dataclass(frozen=True)
class SymDiffDecomposition:
    components: tuple[Component, ...]

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    @property
    def sites(self) -> frozenset[int]:
        return frozenset().union(*(c.sites for c in self.components)) if self.components else frozenset()

    def component_containing(self, x: int) -> Component | None:
        for c in self.components:
            if x in c.sites:
                return c
        return None

    def to_json(self) -> str:
        return json.dumps([c.to_json() for c in self.components])


def energy(M: Covering, J) -> float:
    """H(M): the summed weight of all occupied sites."""
    lattice = getattr(J, "lattice", None)
    if lattice is not None and lattice != M.lattice:
        raise ValueError("covering and weights live on different lattices")
    vals = np.asarray(getattr(J, "values", J), dtype=np.float64)
    idx = np.fromiter(sorted(M.occupied), dtype=np.int64)
    return float(np.sum(vals[idx]))


def sym_diff_decompose(M1: Covering, M2: Covering) -> SymDiffDecomposition:
    """Split M1 xor M2 into vertex-disjoint simple paths and loops."""
    if M1.lattice != M2.lattice:
        raise ValueError("coverings live on different lattices")
    L = M1.lattice
    diff = M1.occupied ^ M2.occupied
    incident: dict[int, list[int]] = {}
    for e in sorted(x for x in diff if L.is_edge(x)):
        for v in L.endpoints(e):
            incident.setdefault(v, []).append(e)
    for v, es in incident.items():
        if len(es) > 2:
            raise AssertionError(f"vertex {v} touches {len(es)} edges of the symmetric difference")

    visited: set[int] = set()
    comps: list[Component] = []

    def walk(start: int, first_edge: int) -> tuple[list[int], list[int]]:
        verts, edges = [start], []
        v, e = start, first_edge
        while True:
            edges.append(e)
            a, b = L.endpoints(e)
            w = b if a == v else a
            if w == start:
                return verts, edges
            verts.append(w)
            nxt = [f for f in incident[w] if f != e]
            if not nxt:
                return verts, edges
            v, e = w, nxt[0]

    # paths first, starting from their smaller endpoint
    for v in sorted(incident):
        if v in visited or len(incident[v]) != 1:
            continue
        verts, edges = walk(v, incident[v][0])
        visited.update(verts)
        if verts[0] not in diff or verts[-1] not in diff:
            raise AssertionError("path endpoint is not a monomer of exactly one covering")
        elements = [verts[0]]
        elements.extend(edges)
        elements.append(verts[-1])
        comps.append(_component("path", elements, M1))
    for v in sorted(incident):
        if v in visited:
            continue
        first = min(incident[v])
        verts, edges = walk(v, first)
        visited.update(verts)
        comps.append(_component("loop", edges, M1))
    stray = {x for x in diff if L.is_vertex(x)} - visited
    if stray:
        raise AssertionError(f"vertices {sorted(stray)} in the difference are not path endpoints")
    comps.sort(key=lambda c: min(c.sites))
    return SymDiffDecomposition(tuple(comps))


def _component(kind: str, elements: list[int], M1: Covering) -> Component:
    occ = M1.occupied
    a = frozenset(x for x in elements if x in occ)
    return Component(kind, tuple(elements), a, frozenset(elements) - a)


def apply_component_swap(M: Covering, comp: Component) -> Covering:
    """Exchange one side of ``comp`` for the other inside ``M``."""
    occ = M.occupied
    if comp.side_a <= occ and not (comp.side_b & occ):
        out, into = comp.side_a, comp.side_b
    elif comp.side_b <= occ and not (comp.side_a & occ):
        out, into = comp.side_b, comp.side_a
    else:
        raise ValueError("component is not compatible with this covering")
    return Covering.from_sites(M.lattice, (occ - out) | into)


def enumerate_coverings(L: Lattice, max_sites: int = MAX_ENUMERATION_SITES) -> list[Covering]:
    """Every covering of ``L`` (brute force, small graphs only)."""
    return [Covering.from_sites(L, occ) for occ in _enumerate(L, max_sites)]


def covering_matrix(L: Lattice, max_sites: int = MAX_ENUMERATION_SITES) -> np.ndarray:
    """0/1 matrix with one row per covering and one column per site."""
    rows = list(_enumerate(L, max_sites))
    mat = np.zeros((len(rows), L.num_sites), dtype=np.uint8)
    for i, occ in enumerate(rows):
        mat[i, occ] = 1
    return mat


def _enumerate(L: Lattice, max_sites: int) -> Iterator[list[int]]:
    if L.num_sites > max_sites:
        raise ValueError(f"enumeration limited to {max_sites} sites, lattice has {L.num_sites}")
    V = L.num_vertices
    covered = [False] * V
    chosen: list[int] = []
    inc = L.incidence

    def rec(v: int):
        while v < V and covered[v]:
            v += 1
        if v == V:
            yield list(chosen)
            return
        covered[v] = True
        chosen.append(v)
        yield from rec(v + 1)
        chosen.pop()
        for e in inc[v]:
            a, b = L.endpoints(e)
            w = b if a == v else a
            if w > v and not covered[w]:
                covered[w] = True
                chosen.append(e)
                yield from rec(v + 1)
                chosen.pop()
                covered[w] = False
        covered[v] = False

    yield from rec(0)


def tie_tolerance(values) -> float:
    """Absolute tolerance under which two energies count as tied."""
    vals = np.asarray(getattr(values, "values", values), dtype=np.float64)
    return 1e-9 * max(1.0, float(np.max(np.abs(vals))) if vals.size else 1.0)


def brute_force_ground_state(L: Lattice, J, constraint: LocalConstraint | None = None,
                             matrix: np.ndarray | None = None) -> tuple[Covering | None, float, int]:
    """Exhaustive argmin of H (the oracle for the matching solver).

    Returns ``(covering, energy, tie_events)``; ``covering`` is None when
    no covering satisfies ``constraint``. Ties are broken towards the
    lexicographically smallest sorted set of occupied sites.
    """
    mat = covering_matrix(L) if matrix is None else matrix
    vals = np.asarray(getattr(J, "values", J), dtype=np.float64)
    keep = np.ones(len(mat), dtype=bool)
    if constraint:
        for x, s in constraint.items:
            keep &= mat[:, x] == s
    if not keep.any():
        return None, float("nan"), 0
    rows = np.flatnonzero(keep)
    energies = mat[rows].astype(np.float64) @ vals
    best = energies.min()
    tied = rows[energies <= best + tie_tolerance(vals)]
    if len(tied) > 1:
        keys = [tuple(np.flatnonzero(mat[r])) for r in tied]
        winner = tied[min(range(len(tied)), key=keys.__getitem__)]
        ties = 1
    else:
        winner, ties = tied[0], 0
    M = Covering.from_status(L, mat[winner])
    return M, energy(M, vals), ties


def is_valid_constraint(L: Lattice, xi: LocalConstraint) -> bool:
    """Whether some covering of ``L`` agrees with ``xi``."""
    from .solver import constraint_feasible

    return constraint_feasible(L, xi)


def local_extension(M: Covering, xi: LocalConstraint) -> Covering | None:
    """A covering that agrees with ``xi`` and with ``M`` outside the double
    closure of ``xi``'s sites, found by backtracking over that region.

    Returns None when no such covering exists.
    """
    L = M.lattice
    S = set(xi.sites)
    region = L.closure(L.closure(S))
    want = xi.as_dict()
    occ = M.occupied

    def fixed_status(x: int) -> int | None:
        if x in want:
            return want[x]
        if x not in region:
            return int(x in occ)
        return None

    covered = [0] * L.num_vertices
    chosen: set[int] = set()
    for x in list(region | set(occ)):
        if fixed_status(x) == 1:
            chosen.add(x)
    for x in chosen:
        for v in L.vertex_set(x):
            covered[v] += 1
    if any(c > 1 for c in covered):
        return None
    todo = [v for v in range(L.num_vertices) if not covered[v]]

    def options(v: int) -> list[int]:
        opts = []
        for x in (v, *L.incidence[v]):
            if fixed_status(x) is not None:
                continue
            if L.is_edge(x) and any(covered[w] for w in L.endpoints(x)):
                continue
            opts.append(x)
        # try what M already does first so the repair stays small
        opts.sort(key=lambda x: (x not in occ, x))
        return opts

    def rec(i: int) -> bool:
        while i < len(todo) and covered[todo[i]]:
            i += 1
        if i == len(todo):
            return True
        v = todo[i]
        for x in options(v):
            verts = L.vertex_set(x)
            for w in verts:
                covered[w] = 1
            chosen.add(x)
            if rec(i + 1):
                return True
            chosen.discard(x)
            for w in verts:
                covered[w] = 0
        return False

    if not rec(0):
        return None
    return Covering.from_sites(L, chosen)

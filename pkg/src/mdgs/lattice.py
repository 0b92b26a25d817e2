"""Finite graphs and periodic tori with a dense index over sites.

A *site* is either a vertex or an edge. Sites are numbered densely:
vertices occupy ``0 .. V-1`` and edges ``V .. V+E-1``. For a torus of
side ``n`` in dimension ``d`` the vertex with coordinates ``c`` has index
``sum(c[k] * n**k)`` and the edge leaving vertex ``v`` in direction ``k``
has index ``V + v*d + k``.
"""

from __future__ import annotations

import itertools
from collections import deque
from functools import cached_property
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

__all__ = ["Lattice", "SiteId", "torus", "from_edge_list", "load_edge_list"]


class SiteId(NamedTuple):
    tag: str  # "vertex" or "edge"
    index: int  # dense site index


class Lattice:
    """An immutable simple graph, optionally a ``(d, n)`` torus.

    Use :func:`torus` or :func:`from_edge_list` rather than calling the
    constructor directly.
    """

    def __init__(self, num_vertices: int, edges, *, dim: int | None = None, side: int | None = None):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if num_vertices < 1:
            raise ValueError("a lattice needs at least one vertex")
        if edges.size and (edges.min() < 0 or edges.max() >= num_vertices):
            raise ValueError("edge references a vertex that does not exist")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise ValueError("self-loops are not allowed")
        canon = np.sort(edges, axis=1)
        if dim is None and len({(int(a), int(b)) for a, b in canon}) != len(canon):
            raise ValueError("multi-edges are not allowed")
        self.num_vertices = int(num_vertices)
        self.num_edges = len(canon)
        self.num_sites = self.num_vertices + self.num_edges
        self.edges = canon
        self.edges.setflags(write=False)
        self.dim = dim
        self.side = side

    # -- identity ---------------------------------------------------------

    @property
    def kind(self) -> str:
        return "torus" if self.dim is not None else "graph"

    @property
    def is_torus(self) -> bool:
        return self.dim is not None

    def describe(self) -> dict:
        if self.is_torus:
            return {"kind": "torus", "d": self.dim, "n": self.side}
        return {"kind": "graph", "V": self.num_vertices, "E": self.num_edges,
                "edges": self.edges.tolist()}

    def label(self) -> str:
        if self.is_torus:
            return f"torus{self.dim}d-n{self.side}"
        return f"graph-V{self.num_vertices}-E{self.num_edges}"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Lattice):
            return NotImplemented
        return (self.num_vertices == other.num_vertices and self.dim == other.dim
                and self.side == other.side and np.array_equal(self.edges, other.edges))

    def __hash__(self) -> int:
        return hash((self.num_vertices, self.dim, self.side, self.edges.tobytes()))

    def __repr__(self) -> str:
        if self.is_torus:
            return f"torus(d={self.dim}, n={self.side})"
        return f"Lattice(V={self.num_vertices}, E={self.num_edges})"

    def __reduce__(self):
        return (_rebuild, (self.num_vertices, self.edges.tolist(), self.dim, self.side))

    # -- sites ------------------------------------------------------------

    def is_vertex(self, x: int) -> bool:
        return 0 <= x < self.num_vertices

    def is_edge(self, x: int) -> bool:
        return self.num_vertices <= x < self.num_sites

    def check_site(self, x) -> int:
        if isinstance(x, SiteId):
            if x.tag == "vertex" and not self.is_vertex(x.index):
                raise ValueError(f"{x} is not a vertex of {self!r}")
            if x.tag == "edge" and not self.is_edge(x.index):
                raise ValueError(f"{x} is not an edge of {self!r}")
            if x.tag not in ("vertex", "edge"):
                raise ValueError(f"unknown site tag {x.tag!r}")
            x = x.index
        x = int(x)
        if not 0 <= x < self.num_sites:
            raise ValueError(f"site {x} out of range for {self!r}")
        return x

    def site_id(self, x: int) -> SiteId:
        x = self.check_site(x)
        return SiteId("vertex" if x < self.num_vertices else "edge", x)

    def edge_site(self, u: int, v: int) -> int:
        """Site index of the edge joining ``u`` and ``v``."""
        key = (min(u, v), max(u, v))
        try:
            return self._edge_lookup[key]
        except KeyError:
            raise ValueError(f"no edge between {u} and {v}") from None

    def endpoints(self, e: int) -> tuple[int, int]:
        if not self.is_edge(e):
            raise ValueError(f"site {e} is not an edge")
        a, b = self.edges[e - self.num_vertices]
        return int(a), int(b)

    def vertex_set(self, x: int) -> tuple[int, ...]:
        """Vertices of a site: the vertex itself, or an edge's two endpoints."""
        x = self.check_site(x)
        if x < self.num_vertices:
            return (x,)
        return self.endpoints(x)

    @cached_property
    def _edge_lookup(self) -> dict[tuple[int, int], int]:
        V = self.num_vertices
        return {(int(a), int(b)): V + i for i, (a, b) in enumerate(self.edges)}

    @cached_property
    def incidence(self) -> tuple[tuple[int, ...], ...]:
        """``incidence[v]`` is the tuple of edge sites incident to ``v``, sorted."""
        inc: list[list[int]] = [[] for _ in range(self.num_vertices)]
        V = self.num_vertices
        for i, (a, b) in enumerate(self.edges.tolist()):
            inc[a].append(V + i)
            inc[b].append(V + i)
        return tuple(tuple(sorted(x)) for x in inc)

    def incident_edges(self, v: int) -> tuple[int, ...]:
        """The set E_v of edges incident to vertex ``v``."""
        if not self.is_vertex(v):
            raise ValueError(f"site {v} is not a vertex")
        return self.incidence[v]

    def vertex_neighbors(self, v: int) -> tuple[int, ...]:
        """Vertices ``u`` with ``u ~ v`` in the graph."""
        out = []
        for e in self.incident_edges(v):
            a, b = self.endpoints(e)
            out.append(b if a == v else a)
        return tuple(out)

    def degree(self, v: int) -> int:
        return len(self.incident_edges(v))

    def neighbors(self, x) -> frozenset[int]:
        """N(v) = {v} together with the edges incident to v.

        For an edge, returns the edge and every site sharing an endpoint
        with it.
        """
        x = self.check_site(x)
        if self.is_vertex(x):
            return frozenset((x, *self.incidence[x]))
        return frozenset((x, *self.sigma_adjacent(x)))

    def sigma_adjacent(self, x: int) -> frozenset[int]:
        """Sites ``y != x`` whose vertex set meets the vertex set of ``x``."""
        x = self.check_site(x)
        out: set[int] = set()
        for v in self.vertex_set(x):
            out.add(v)
            out.update(self.incidence[v])
        out.discard(x)
        return frozenset(out)

    def exterior_boundary(self, sites: Iterable[int]) -> frozenset[int]:
        """Sites outside ``sites`` adjacent to at least one member."""
        S = {self.check_site(x) for x in sites}
        touched: set[int] = set()
        for x in S:
            for v in self.vertex_set(x):
                touched.add(v)
                touched.update(self.incidence[v])
        return frozenset(touched - S)

    def closure(self, sites: Iterable[int]) -> frozenset[int]:
        S = frozenset(self.check_site(x) for x in sites)
        return S | self.exterior_boundary(S)

    # -- metric -----------------------------------------------------------

    @cached_property
    def _adjacency(self) -> tuple[tuple[int, ...], ...]:
        return tuple(self.vertex_neighbors(v) for v in range(self.num_vertices))

    def coords(self, v: int) -> tuple[int, ...]:
        if not self.is_torus:
            raise ValueError("coordinates are only defined on tori")
        n = self.side
        return tuple((v // n**k) % n for k in range(self.dim))

    def vertex_at(self, coords) -> int:
        if not self.is_torus:
            raise ValueError("coordinates are only defined on tori")
        n = self.side
        return int(sum((int(c) % n) * n**k for k, c in enumerate(coords)))

    def torus_edge(self, v: int, direction: int) -> int:
        """Site index of the torus edge leaving ``v`` in ``direction``."""
        if not self.is_torus:
            raise ValueError("directions are only defined on tori")
        return self.num_vertices + v * self.dim + direction

    def vertex_distance(self, u: int, v: int) -> int:
        if self.is_torus:
            n = self.side
            return sum(min((a - b) % n, (b - a) % n) for a, b in zip(self.coords(u), self.coords(v)))
        return self._bfs(u)[v]

    def _bfs(self, source: int) -> list[int]:
        dist = [-1] * self.num_vertices
        dist[source] = 0
        queue = deque([source])
        adj = self._adjacency
        while queue:
            u = queue.popleft()
            for w in adj[u]:
                if dist[w] < 0:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        big = self.num_vertices  # unreachable marker, larger than any path
        return [d if d >= 0 else big for d in dist]

    def distance(self, x, y) -> int:
        """Shortest vertex-path distance between the vertex sets of two sites."""
        xs = self.vertex_set(self.check_site(x))
        ys = self.vertex_set(self.check_site(y))
        return min(self.vertex_distance(a, b) for a in xs for b in ys)

    # -- torus helpers ----------------------------------------------------

    def translate(self, x: int, shift) -> int:
        """Image of a site under the torus translation by ``shift``."""
        x = self.check_site(x)
        if self.is_vertex(x):
            return self.vertex_at(np.add(self.coords(x), shift))
        base, k = divmod(x - self.num_vertices, self.dim)
        return self.torus_edge(self.vertex_at(np.add(self.coords(base), shift)), k)

    def box(self, radius: int, center: int = 0) -> list[int]:
        """Sites of B_K around ``center``: vertices within sup-distance K
        and edges with both endpoints among them."""
        if not self.is_torus:
            raise ValueError("boxes are only defined on tori")
        if 2 * radius + 1 > self.side:
            raise ValueError("box does not fit in the torus")
        c = self.coords(center)
        offsets = itertools.product(range(-radius, radius + 1), repeat=self.dim)
        verts = sorted(self.vertex_at(np.add(c, off)) for off in offsets)
        vset = set(verts)
        edges = {e for v in verts for e in self.incidence[v]
                 if all(w in vset for w in self.endpoints(e))}
        return verts + sorted(edges)

    @cached_property
    def vertex_colors(self) -> np.ndarray | None:
        """A proper 2-colouring of the vertices, or None when not bipartite."""
        if self.is_torus:
            if self.side % 2:
                return None
            n = self.side
            idx = np.arange(self.num_vertices)
            parity = sum((idx // n**k) % n for k in range(self.dim)) % 2
            return parity.astype(np.int8)
        color = np.full(self.num_vertices, -1, dtype=np.int8)
        adj = self._adjacency
        for s in range(self.num_vertices):
            if color[s] >= 0:
                continue
            color[s] = 0
            queue = deque([s])
            while queue:
                u = queue.popleft()
                for w in adj[u]:
                    if color[w] < 0:
                        color[w] = 1 - color[u]
                        queue.append(w)
                    elif color[w] == color[u]:
                        return None
        return color


def _rebuild(num_vertices, edges, dim, side):
    if dim is not None:
        return torus(dim, side)
    return Lattice(num_vertices, edges)


def torus(d: int, n: int) -> Lattice:
    """The torus (Z/nZ)^d with nearest-neighbour edges."""
    if d < 1:
        raise ValueError("dimension must be at least 1")
    if n < 3:
        raise ValueError("side must be at least 3; smaller tori have multi-edges or loops")
    V = n**d
    idx = np.arange(V, dtype=np.int64)
    heads = []
    for k in range(d):
        coord = (idx // n**k) % n
        heads.append(idx + ((coord + 1) % n - coord) * n**k)
    head = np.stack(heads, axis=1).reshape(-1)
    base = np.repeat(idx, d)
    return Lattice(V, np.stack([base, head], axis=1), dim=d, side=n)


def from_edge_list(num_vertices: int, edges) -> Lattice:
    return Lattice(num_vertices, list(edges))


def load_edge_list(path) -> Lattice:
    """Read a graph file: first line ``V E``, then ``E`` lines ``u v``."""
    lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or len(lines[0]) != 2:
        raise ValueError(f"{path}: first line must be 'V E'")
    V, E = (int(t) for t in lines[0])
    body = lines[1:]
    if len(body) != E:
        raise ValueError(f"{path}: header announces {E} edges, found {len(body)}")
    edges = []
    for row in body:
        if len(row) != 2:
            raise ValueError(f"{path}: malformed edge line {' '.join(row)!r}")
        edges.append((int(row[0]), int(row[1])))
    return Lattice(V, edges)

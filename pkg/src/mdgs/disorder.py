"""Weight distributions, seeded sampling and weight transformations."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy import integrate

from .lattice import Lattice

__all__ = [
    "GoodDistribution",
    "WeightAssignment",
    "DivergentIntegralError",
    "make_rng",
    "sample",
    "resample_p",
    "gauge_transform",
    "make_inaccessible",
    "perturb_origin_scheme",
    "origin_scheme_edges",
    "goodness_constant",
    "FAMILIES",
]

FAMILIES = ("gaussian", "exponential", "pareto")


class DivergentIntegralError(ArithmeticError):
    """The goodness integral is infinite or could not be evaluated."""


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for the stream ``(seed, *key)``.

    Streams with different keys are statistically independent, so samples
    can be produced in any order (or process) with identical results.
    """
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class GoodDistribution:
    family: str = "gaussian"
    shape: float | None = None  # pareto only
    scale: float = 1.0  # pareto only

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.family == "pareto":
            if self.shape is None or not self.shape > 4:
                raise ValueError("pareto needs shape > 4 for a finite 4+delta moment")
            if not self.scale > 0:
                raise ValueError("pareto scale must be positive")

    @property
    def lower(self) -> float:
        """Lower end of the support."""
        if self.family == "gaussian":
            return -math.inf
        if self.family == "exponential":
            return 0.0
        return float(self.scale)

    def describe(self) -> dict:
        out: dict = {"family": self.family}
        if self.family == "pareto":
            out.update(shape=self.shape, scale=self.scale)
        return out

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.family == "gaussian":
            return rng.standard_normal(size)
        if self.family == "exponential":
            return rng.standard_exponential(size)
        return self.scale * (1.0 + rng.pareto(self.shape, size))

    def logpdf(self, x: float) -> float:
        if x <= self.lower:
            return -math.inf
        if self.family == "gaussian":
            return -0.5 * x * x - 0.5 * math.log(2 * math.pi)
        if self.family == "exponential":
            return -x
        a, s = self.shape, self.scale
        return math.log(a) + a * math.log(s) - (a + 1) * math.log(x)

    def pdf(self, x: float) -> float:
        return math.exp(self.logpdf(x))


@dataclass(frozen=True, eq=False)
class WeightAssignment:
    """A weight for every site of a lattice plus how it was produced."""

    lattice: Lattice
    values: np.ndarray
    distribution: GoodDistribution | None = None
    seed: int | None = None
    log: tuple[str, ...] = field(default=())

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.shape != (self.lattice.num_sites,):
            raise ValueError(f"expected {self.lattice.num_sites} weights, got shape {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, x):
        return self.values[x]

    def derive(self, values, note: str) -> "WeightAssignment":
        return WeightAssignment(self.lattice, values, self.distribution, self.seed, self.log + (note,))

    def replace(self, updates: dict[int, float], note: str = "replace") -> "WeightAssignment":
        vals = self.values.copy()
        for x, w in updates.items():
            vals[self.lattice.check_site(x)] = w
        return self.derive(vals, note)

    def provenance(self) -> dict:
        return {
            "distribution": self.distribution.describe() if self.distribution else None,
            "seed": self.seed,
            "transformations": list(self.log),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# lattice={self.lattice.label()} seed={self.seed} "
                  f"distribution={self.distribution.describe() if self.distribution else None}\n")
        buf.write("sigma_index,value\n")
        for i, w in enumerate(self.values.tolist()):
            buf.write(f"{i},{w:.17g}\n")
        return buf.getvalue()

    def save(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def load(cls, lattice: Lattice, path) -> "WeightAssignment":
        rows = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
        reader = csv.reader(rows)
        header = next(reader)
        if header != ["sigma_index", "value"]:
            raise ValueError(f"{path}: unexpected header {header}")
        vals = np.full(lattice.num_sites, np.nan)
        for idx, val in reader:
            vals[lattice.check_site(int(idx))] = float(val)
        if np.isnan(vals).any():
            raise ValueError(f"{path}: weights missing for some sites")
        return cls(lattice, vals, log=(f"loaded:{Path(path).name}",))


def sample(lattice: Lattice, dist: GoodDistribution, seed: int, *stream: int) -> WeightAssignment:
    """I.i.d. weights, one per site in site-index order."""
    rng = make_rng(seed, *stream)
    return WeightAssignment(lattice, dist.draw(rng, lattice.num_sites), dist, seed,
                            (f"sample{list(stream)}",) if stream else ())


def resample_p(J: WeightAssignment, Jprime: WeightAssignment, p: float, seed: int, *stream: int,
               return_mask: bool = False):
    """Replace each weight by its independent copy with probability ``p``."""
    if J.lattice != Jprime.lattice:
        raise ValueError("weight assignments live on different lattices")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    coins = make_rng(seed, *stream).random(len(J)) < p
    out = J.derive(np.where(coins, Jprime.values, J.values), f"resample_p({p})")
    return (out, coins) if return_mask else out


def gauge_transform(J: WeightAssignment, u: int, lam: float) -> WeightAssignment:
    """Add ``lam`` to the weight of vertex ``u`` and of every edge at ``u``."""
    L = J.lattice
    if not L.is_vertex(u):
        raise ValueError(f"gauge transforms act on vertices; site {u} is an edge")
    vals = J.values.copy()
    vals[u] += lam
    vals[list(L.incident_edges(u))] += lam
    return J.derive(vals, f"gauge({u},{lam!r})")


def make_inaccessible(J: WeightAssignment, edges: Iterable[int], seed: int | None = None, *stream: int,
                      uniform: float | None = None) -> tuple[WeightAssignment, float]:
    """Shift every edge in ``edges`` by a common z so each becomes inaccessible.

    z is the largest ``|J_e - J_u - J_v|`` over the set plus an independent
    uniform(0, 1) draw (or ``uniform`` when given).
    """
    L = J.lattice
    edges = sorted({L.check_site(e) for e in edges})
    for e in edges:
        if not L.is_edge(e):
            raise ValueError(f"site {e} is a vertex; only edges can be made inaccessible")
    if uniform is None:
        if seed is None:
            raise ValueError("either seed or uniform must be given")
        uniform = float(make_rng(seed, *stream).random())
    w = J.values
    slack = 0.0
    for e in edges:
        u, v = L.endpoints(e)
        slack = max(slack, abs(w[e] - w[u] - w[v]))
    z = slack + uniform
    vals = w.copy()
    vals[edges] += z
    return J.derive(vals, f"inaccessible({len(edges)} edges,z={z!r})"), z


def origin_scheme_edges(lattice: Lattice, path: Iterable[int], origin: int) -> list[int]:
    """Edges incident to the path's vertices but not to ``origin``."""
    path = [lattice.check_site(v) for v in path]
    at_origin = set(lattice.incident_edges(origin))
    out = {e for v in path for e in lattice.incident_edges(v)} - at_origin
    return sorted(out)


def perturb_origin_scheme(J: WeightAssignment, path: Iterable[int], eps: float, seed: int | None = None,
                          *stream: int, origin: int | None = None,
                          uniform: float | None = None) -> WeightAssignment:
    """Make the edges around a vertex path inaccessible and raise the
    origin's edges by eps/2."""
    L = J.lattice
    path = [L.check_site(v) for v in path]
    if any(not L.is_vertex(v) for v in path):
        raise ValueError("path must consist of vertices")
    if origin is None:
        origin = path[0]
    if origin not in path:
        raise ValueError("origin must lie on the path")
    if not eps > 0:
        raise ValueError("eps must be positive")
    shifted, _ = make_inaccessible(J, origin_scheme_edges(L, path, origin), seed, *stream, uniform=uniform)
    vals = shifted.values.copy()
    vals[list(L.incident_edges(origin))] += eps / 2
    return shifted.derive(vals, f"origin_shift({origin},{eps!r})")


def goodness_constant(dist: GoodDistribution, z: float, alpha: float = 2.0, *, analytic: bool = True) -> float:
    """C(z, alpha): the alpha-moment of the shift density ratio p(x - z) / p(x).

    The Gaussian family uses the closed form exp(alpha (alpha - 1) z^2 / 2)
    unless ``analytic`` is False; everything else is adaptive quadrature.
    """
    if z < 0:
        raise ValueError("z must be non-negative")
    if not alpha > 1:
        raise ValueError("alpha must exceed 1")
    if z == 0:
        return 1.0
    if dist.family == "gaussian" and analytic:
        expo = alpha * (alpha - 1) * z * z / 2
        if expo > 700:
            raise DivergentIntegralError(f"C({z}, {alpha}) overflows double precision")
        return math.exp(expo)

    def integrand(x: float) -> float:
        lp = alpha * dist.logpdf(x - z) + (1 - alpha) * dist.logpdf(x)
        return math.exp(lp) if lp > -745 else 0.0

    lo = dist.lower + z  # p(x - z) vanishes below this
    try:
        if math.isinf(lo):
            val, err = integrate.quad(integrand, -math.inf, math.inf, epsabs=1e-8, epsrel=1e-10, limit=500)
        else:
            head, err1 = integrate.quad(integrand, lo, lo + 1.0, epsabs=1e-8, epsrel=1e-10, limit=500)
            tail, err2 = integrate.quad(integrand, lo + 1.0, math.inf, epsabs=1e-8, epsrel=1e-10, limit=500)
            val, err = head + tail, err1 + err2
    except OverflowError as exc:
        raise DivergentIntegralError(str(exc)) from exc
    if not math.isfinite(val) or err > 1e-6 * max(1.0, abs(val)):
        raise DivergentIntegralError(f"C({z}, {alpha}) did not converge (value {val}, error {err})")
    return float(val)

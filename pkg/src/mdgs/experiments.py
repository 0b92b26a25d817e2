"""Seeded Monte Carlo campaigns on tori.

Every experiment is a pure function of its configuration. Sample ``i``
draws all of its randomness from streams keyed by ``(seed, i, purpose)``,
so results do not depend on the order in which samples are computed or on
how many worker processes compute them.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np
from scipy import stats

from .checks import _decomposition_problems
from .disorder import GoodDistribution, WeightAssignment, make_rng, resample_p, sample
from .lattice import Lattice, torus
from .matching import LocalConstraint, energy, sym_diff_decompose
from .solver import constrained_ground_state, ground_state, transition_point

__all__ = [
    "ExperimentReport",
    "window_map",
    "stabilization_experiment",
    "chaos_experiment",
    "clt_experiment",
    "clt_summary",
    "correlation_decay_experiment",
    "derivative_decomposition_check",
    "transition_convergence_experiment",
    "critical_droplet_experiment",
    "epsilon_exponent",
]

# streams inside one sample
_J, _JPRIME, _COINS, _SITES = 0, 1, 2, 3


@dataclass
class ExperimentReport:
    name: str
    config: dict
    records: list[dict]
    summary: dict
    tie_events: int = 0
    failures: int = 0
    wall_seconds: float = 0.0
    columns: list[str] = field(default_factory=list)

    def stem(self) -> str:
        lat = self.config.get("lattice", "lattice")
        return f"{self.name}_{lat}_seed{self.config.get('seed')}"

    def to_json(self) -> str:
        doc = {
            "experiment": self.name,
            "config": self.config,
            "summary": self.summary,
            "tie_events": self.tie_events,
            "failures": self.failures,
            "samples_file": self.stem() + ".csv",
            "columns": self.columns,
        }
        return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# experiment={self.name} seed={self.config.get('seed')}\n")
        buf.write(f"# config={json.dumps(_jsonable(self.config), sort_keys=True)}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for rec in self.records:
            writer.writerow([_cell(rec.get(c)) for c in self.columns])
        return buf.getvalue()

    def write(self, outdir) -> list[Path]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        paths = [outdir / f"{self.stem()}.json", outdir / f"{self.stem()}.csv"]
        paths[0].write_text(self.to_json())
        paths[1].write_text(self.to_csv())
        # wall-clock lives in its own file so the report files replay bit for bit
        timing = outdir / f"{self.stem()}.timing.json"
        timing.write_text(json.dumps({"wall_seconds": self.wall_seconds}) + "\n")
        return paths + [timing]


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    if isinstance(v, (list, tuple)):
        return ";".join(_cell(x) for x in v)
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _mean_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=np.float64)
    if len(x) == 0:
        return float("nan"), float("nan")
    se = float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else float("nan")
    return float(np.mean(x)), se


def _run(fn, tasks, jobs: int):
    """Map ``fn`` over ``tasks`` preserving order, optionally in processes."""
    tasks = list(tasks)
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def _base_config(name: str, lattice: str, dist: GoodDistribution, seed: int, samples: int, **extra) -> dict:
    cfg = {"experiment": name, "lattice": lattice, "distribution": dist.describe(),
           "seed": int(seed), "samples": int(samples)}
    cfg.update(extra)
    return cfg


# -- nested embedding --------------------------------------------------------

def window_map(big: Lattice, R: int, center: int = 0) -> np.ndarray:
    """Image in ``big`` of every site of the R-torus centred at ``center``.

    The small torus's origin lands on ``center``; small coordinate ``i``
    sits at offset ``((i + R//2) mod R) - R//2``. Each small edge takes the
    weight of the big edge leaving its base vertex in the same direction,
    including the seam edges that close the small torus periodically.
    """
    if not big.is_torus:
        raise ValueError("windows are defined on tori only")
    d, n = big.dim, big.side
    if R > n:
        raise ValueError("window larger than the torus")
    small = torus(d, R)
    Vs = small.num_vertices
    idx = np.arange(Vs)
    c = np.array(big.coords(center))
    big_v = np.zeros(Vs, dtype=np.int64)
    for k in range(d):
        coord = (idx // R**k) % R
        off = (coord + R // 2) % R - R // 2
        big_v += ((c[k] + off) % n) * n**k
    edges = big.num_vertices + np.repeat(big_v, d) * d + np.tile(np.arange(d), Vs)
    return np.concatenate([big_v, edges])


def _restrict(J: WeightAssignment, small: Lattice, mapping: np.ndarray) -> WeightAssignment:
    return WeightAssignment(small, J.values[mapping], J.distribution, J.seed, J.log + ("window",))


# -- stabilization -----------------------------------------------------------

def _stabilization_sample(i, *, d, sizes, K, seed, dist):
    big = torus(d, sizes[-1])
    J = sample(big, dist, seed, i, _J)
    box = big.box(K, 0)
    status = []
    for s in sizes:
        small = torus(d, s)
        mapping = window_map(big, s, 0)
        M = ground_state(small, _restrict(J, small, mapping)).covering
        occupied_big = {int(mapping[x]) for x in M.occupied}
        status.append(np.array([b in occupied_big for b in box]))
    rec = {"sample": i}
    for (R, n), a, b in zip(zip(sizes, sizes[1:]), status, status[1:]):
        dis = [box[t] for t in np.flatnonzero(a != b)]
        rec[f"disagree_{R}_{n}"] = len(dis) / len(box)
        rec[f"sites_{R}_{n}"] = dis
    return rec


def stabilization_experiment(d: int, sizes, K: int, samples: int, seed: int,
                             dist: GoodDistribution = GoodDistribution(), jobs: int = 1) -> ExperimentReport:
    """Estimate P(x in M_n xor M_R) over x in B_K for consecutive sizes.

    Weights are drawn once on the largest torus; every smaller torus uses
    the centred window of those weights.
    """
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2 or any(b < a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("sizes must be a non-decreasing list of at least two entries")
    if sizes[0] < 2 * K + 2:
        raise ValueError("every size must be at least 2K + 2")
    t0 = time.perf_counter()
    fn = partial(_stabilization_sample, d=d, sizes=tuple(sizes), K=K, seed=seed, dist=dist)
    records = _run(fn, range(samples), jobs)
    pairs = list(zip(sizes, sizes[1:]))
    summary = {"box_sites": len(torus(d, sizes[-1]).box(K, 0)), "pairs": []}
    for R, n in pairs:
        m, se = _mean_se([r[f"disagree_{R}_{n}"] for r in records])
        summary["pairs"].append({"R": R, "n": n, "p_disagree": m, "se": se})
    cols = ["sample"] + [c for R, n in pairs for c in (f"disagree_{R}_{n}", f"sites_{R}_{n}")]
    cfg = _base_config("stabilize", f"torus{d}d-n{'-'.join(map(str, sizes))}", dist, seed, samples,
                       d=d, sizes=sizes, K=K)
    return ExperimentReport("stabilize", cfg, records, summary, columns=cols,
                            wall_seconds=time.perf_counter() - t0)


# -- disorder chaos ----------------------------------------------------------

def _chaos_sample(i, *, d, n, p_grid, seed, dist):
    L = torus(d, n)
    J = sample(L, dist, seed, i, _J)
    Jp = sample(L, dist, seed, i, _JPRIME)
    base = ground_state(L, J)
    rec = {"sample": i, "H": base.energy}
    for k, p in enumerate(p_grid):
        Jmix = resample_p(J, Jp, p, seed, i, _COINS)
        res = ground_state(L, Jmix)
        dec = sym_diff_decompose(base.covering, res.covering)
        problems = _decomposition_problems(base.covering, res.covering)
        sizes = sorted((len(c) for c in dec), reverse=True)
        rec[f"origin_{k}"] = int(0 in (base.covering.occupied ^ res.covering.occupied))
        rec[f"components_{k}"] = sizes
        rec[f"largest_frac_{k}"] = (sizes[0] if sizes else 0) / n**d
        rec[f"structure_ok_{k}"] = int(not problems)
        rec[f"H_{k}"] = res.energy
    return rec


def chaos_experiment(d: int, n: int, p_grid, samples: int, seed: int,
                     dist: GoodDistribution = GoodDistribution(), jobs: int = 1) -> ExperimentReport:
    """Compare M with the ground state after resampling a p-fraction of the weights.

    The same coin uniforms are reused across the p-grid, so for each sample
    the resampled set grows with p.
    """
    p_grid = [float(p) for p in p_grid]
    if any(not 0 <= p <= 1 for p in p_grid):
        raise ValueError("p-grid must lie in [0, 1]")
    t0 = time.perf_counter()
    fn = partial(_chaos_sample, d=d, n=n, p_grid=tuple(p_grid), seed=seed, dist=dist)
    records = _run(fn, range(samples), jobs)
    H0 = np.array([r["H"] for r in records])
    per_p = []
    for k, p in enumerate(p_grid):
        m, se = _mean_se([r[f"origin_{k}"] for r in records])
        hist: dict[int, int] = {}
        for r in records:
            for s in r[f"components_{k}"]:
                hist[s] = hist.get(s, 0) + 1
        lf, lf_se = _mean_se([r[f"largest_frac_{k}"] for r in records])
        Hp = np.array([r[f"H_{k}"] for r in records])
        ks = stats.ks_2samp(H0, Hp, method="asymp") if p > 0 else None
        per_p.append({
            "p": p,
            "p_origin_in_diff": m,
            "se": se,
            "component_size_histogram": {str(s): hist[s] for s in sorted(hist)},
            "largest_component_fraction": lf,
            "largest_component_fraction_se": lf_se,
            "structure_failures": sum(1 - r[f"structure_ok_{k}"] for r in records),
            "marginal_ks_pvalue": None if ks is None else float(ks.pvalue),
        })
    failures = sum(q["structure_failures"] for q in per_p)
    cols = ["sample", "H"] + [c for k in range(len(p_grid))
                              for c in (f"origin_{k}", f"components_{k}", f"largest_frac_{k}",
                                        f"structure_ok_{k}", f"H_{k}")]
    cfg = _base_config("chaos", f"torus{d}d-n{n}", dist, seed, samples, d=d, n=n, p_grid=p_grid)
    return ExperimentReport("chaos", cfg, records, {"per_p": per_p}, failures=failures, columns=cols,
                            wall_seconds=time.perf_counter() - t0)


# -- central limit theorem ---------------------------------------------------

def clt_summary(values, volume: int, seed: int, key: int = 0, n_resamples: int = 2000) -> dict:
    """Moments, a KS test of the standardised sample against N(0, 1) and a
    bootstrap interval for Var / volume."""
    x = np.asarray(values, dtype=np.float64)
    mean, var = float(np.mean(x)), float(np.var(x, ddof=1))
    z = (x - mean) / math.sqrt(var)
    ks = stats.kstest(z, "norm", method="asymp")
    boot = stats.bootstrap((x,), lambda a, axis: np.var(a, axis=axis, ddof=1) / volume,
                           n_resamples=n_resamples, confidence_level=0.95, method="percentile",
                           random_state=make_rng(seed, 2**31 - 1, key))
    return {
        "mean": mean,
        "mean_se": math.sqrt(var / len(x)),
        "variance": var,
        "var_over_volume": var / volume,
        "var_over_volume_ci": [float(boot.confidence_interval.low), float(boot.confidence_interval.high)],
        "ks_statistic": float(ks.statistic),
        "ks_pvalue": float(ks.pvalue),
    }


def _clt_sample(i, *, d, n, seed, dist, null):
    if null:
        return {"sample": i, "n": n, "H": float(make_rng(seed, n, i, _J).standard_normal())}
    L = torus(d, n)
    return {"sample": i, "n": n, "H": ground_state(L, sample(L, dist, seed, n, i, _J)).energy}


def clt_experiment(d: int, n_list, samples: int, dist: GoodDistribution = GoodDistribution(),
                   seed: int = 0, jobs: int = 1, null: bool = False) -> ExperimentReport:
    """Sample H(M_n) per size and test its standardised law against N(0, 1).

    With ``null`` the ground-state energies are replaced by i.i.d. standard
    normals, which calibrates the test pipeline itself.
    """
    if samples < 50:
        raise ValueError("need at least 50 samples for a meaningful KS test")
    n_list = [int(n) for n in n_list]
    t0 = time.perf_counter()
    records, per_n = [], []
    for n in n_list:
        fn = partial(_clt_sample, d=d, n=n, seed=seed, dist=dist, null=null)
        recs = _run(fn, range(samples), jobs)
        records.extend(recs)
        s = clt_summary([r["H"] for r in recs], n**d, seed, key=n)
        s["n"] = n
        per_n.append(s)
    cfg = _base_config("clt", f"torus{d}d-n{'-'.join(map(str, n_list))}", dist, seed, samples,
                       d=d, n_list=n_list, null=null)
    return ExperimentReport("clt", cfg, records, {"per_n": per_n}, columns=["n", "sample", "H"],
                            wall_seconds=time.perf_counter() - t0)


# -- correlation decay -------------------------------------------------------

def _decay_sample(i, *, d, n, shifts, anchor, seed, dist):
    L = torus(d, n)
    M = ground_state(L, sample(L, dist, seed, i, _J)).covering
    occ = np.zeros(L.num_vertices)
    occ[sorted(M.monomers)] = 1.0
    grid = occ.reshape((n,) * d, order="F")  # axis k <-> coordinate k
    rec = {"sample": i, "density": float(occ.mean())}
    for s in shifts:
        moved = np.roll(grid, -s, axis=0).reshape(-1, order="F")
        if anchor is None:
            rec[f"xy_{s}"] = float(np.mean(occ * moved))
            rec[f"x_{s}"] = float(occ.mean())
            rec[f"y_{s}"] = float(moved.mean())
        else:
            rec[f"xy_{s}"] = float(occ[anchor] * moved[anchor])
            rec[f"x_{s}"] = float(occ[anchor])
            rec[f"y_{s}"] = float(moved[anchor])
    return rec


def _cov_with_se(xy, x, y) -> tuple[float, float]:
    xy, x, y = (np.asarray(a, dtype=np.float64) for a in (xy, x, y))
    mx, my = x.mean(), y.mean()
    cov = float(xy.mean() - mx * my)
    influence = xy - my * x - mx * y
    return cov, float(np.std(influence, ddof=1) / math.sqrt(len(xy)))


def correlation_decay_experiment(d: int, n: int, R_list, samples: int, seed: int,
                                 dist: GoodDistribution = GoodDistribution(), anchor: int | None = None,
                                 jobs: int = 1) -> ExperimentReport:
    """cov(1{x1 in M_n}, 1{x2 in M_n}) for monomer indicators at distance 2R.

    By default the covariance is averaged over all translates of the pair;
    with ``anchor`` only the pair (anchor, anchor + 2R e_1) is used.
    """
    R_list = [int(R) for R in R_list]
    if any(R < 0 for R in R_list):
        raise ValueError("R must be non-negative")
    if 2 * max(R_list) > n / 2:
        raise ValueError("need 2 max(R) <= n/2 so the separation fits on the torus")
    t0 = time.perf_counter()
    shifts = tuple(2 * R for R in R_list)
    fn = partial(_decay_sample, d=d, n=n, shifts=shifts, anchor=anchor, seed=seed, dist=dist)
    records = _run(fn, range(samples), jobs)
    per_R = []
    for R, s in zip(R_list, shifts):
        cov, se = _cov_with_se(*([r[f"{k}_{s}"] for r in records] for k in ("xy", "x", "y")))
        per_R.append({"R": R, "distance": s, "covariance": cov, "se": se})
    dens, dens_se = _mean_se([r["density"] for r in records])
    cols = ["sample", "density"] + [f"{k}_{s}" for s in shifts for k in ("xy", "x", "y")]
    cfg = _base_config("decay", f"torus{d}d-n{n}", dist, seed, samples, d=d, n=n, R_list=R_list,
                       anchor=anchor, indicator="monomer")
    return ExperimentReport("decay", cfg, records,
                            {"per_R": per_R, "monomer_density": dens, "monomer_density_se": dens_se},
                            columns=cols, wall_seconds=time.perf_counter() - t0)


# -- derivative decomposition ------------------------------------------------

def _split(J, Jp, K):
    """Replacement derivative cases and the error ratios E1, E2."""
    if J < K and Jp < K:
        return "both_below", Jp - J, 0.0, 0.0
    if J < K < Jp:
        return "up_cross", K - J, (K - J) / (Jp - J), 0.0
    if Jp < K < J:
        return "down_cross", Jp - K, 0.0, (Jp - K) / (Jp - J)
    return "both_above", 0.0, 0.0, 0.0


def _pick_sites(L: Lattice, count_or_sites, seed, i) -> list[int]:
    if isinstance(count_or_sites, int):
        rng = make_rng(seed, i, _SITES)
        return sorted(int(x) for x in rng.choice(L.num_sites, size=count_or_sites, replace=False))
    return [L.check_site(x) for x in count_or_sites]


def _derivative_sample(i, *, d, n, sites, seed, dist, tol):
    L = torus(d, n)
    J = sample(L, dist, seed, i, _J)
    Jp = sample(L, dist, seed, i, _JPRIME)
    H = ground_state(L, J).energy
    rows = []
    for x in _pick_sites(L, sites, seed, i):
        K = transition_point(L, J, x)
        Jx = J.replace({x: Jp[x]})
        dH = ground_state(L, Jx).energy - H
        case, predicted, e1, e2 = _split(J[x], Jp[x], K)
        err = abs(dH - predicted)
        ok = err <= tol * max(1.0, abs(dH)) and abs(e1) <= 1 and abs(e2) <= 1
        row = {"sample": i, "site": x, "J": J[x], "Jprime": Jp[x], "K": K, "dH": dH,
               "predicted": predicted, "case": case, "E1": e1, "E2": e2, "error": err, "ok": int(ok)}
        if not ok:
            row["instance"] = J.values.tolist()
        rows.append(row)
    return rows


def derivative_decomposition_check(d: int, n: int, sites, samples: int, seed: int,
                                   dist: GoodDistribution = GoodDistribution(), jobs: int = 1,
                                   tol: float = 1e-9) -> ExperimentReport:
    """Check the three-case formula for the replacement derivative.

    The derivative is ``H(M(J^x)) - H(M(J))`` where ``J^x`` swaps ``J_x`` for
    an independent copy; it must equal ``J'-J``, ``K-J``, ``J'-K`` or 0
    according to where ``J_x`` and ``J'_x`` sit relative to ``K_x``.
    ``sites`` is either a count of random sites per sample or a list.
    """
    t0 = time.perf_counter()
    fn = partial(_derivative_sample, d=d, n=n, sites=sites, seed=seed, dist=dist, tol=tol)
    records = [r for rows in _run(fn, range(samples), jobs) for r in rows]
    cases = ("both_below", "up_cross", "down_cross", "both_above")
    freq = {c: sum(r["case"] == c for r in records) / len(records) for c in cases}
    failures = sum(1 - r["ok"] for r in records)
    summary = {
        "checks": len(records),
        "failures": failures,
        "max_error": max(r["error"] for r in records),
        "max_abs_E": max(max(abs(r["E1"]), abs(r["E2"])) for r in records),
        "case_frequencies": freq,
    }
    cols = ["sample", "site", "J", "Jprime", "K", "dH", "predicted", "case", "E1", "E2", "error", "ok",
            "instance"]
    cfg = _base_config("derivative", f"torus{d}d-n{n}", dist, seed, samples, d=d, n=n,
                       sites=sites if isinstance(sites, int) else list(sites), tol=tol)
    return ExperimentReport("derivative", cfg, records, summary, failures=failures, columns=cols,
                            wall_seconds=time.perf_counter() - t0)


# -- transition point convergence --------------------------------------------

def epsilon_exponent(delta: float) -> tuple[float, float]:
    """Moment order (16 + 4 delta) / delta and outer power delta / (4 + delta)."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    return (16 + 4 * delta) / delta, delta / (4 + delta)


def _small_site(big: Lattice, small: Lattice, x: int) -> int:
    """Site of the window torus centred at ``x`` (or its base vertex) that maps onto ``x``."""
    if big.is_vertex(x):
        return 0
    # the edge leaving the small origin in the same direction
    return small.num_vertices + (x - big.num_vertices) % big.dim


def _transition_sample(i, *, d, pairs, sites, seed, dist, beta):
    rows = []
    for pi, (R, n) in enumerate(pairs):
        big = torus(d, n)
        J = sample(big, dist, seed, i, pi, _J)
        Jp = sample(big, dist, seed, i, pi, _JPRIME)
        small = torus(d, R)
        for x in _pick_sites(big, sites, seed, i * len(pairs) + pi):
            Kn = transition_point(big, J, x)
            if R == n:
                # the full torus embeds into itself by the identity
                mapping, xs = np.arange(big.num_sites), x
            else:
                base = x if big.is_vertex(x) else (x - big.num_vertices) // d
                mapping = window_map(big, R, base)
                xs = _small_site(big, small, x)
            assert mapping[xs] == x
            KR = transition_point(small, _restrict(J, small, mapping), xs)
            a, b = J[x], Jp[x]
            _, _, e1n, e2n = _split(a, b, Kn)
            _, _, e1r, e2r = _split(a, b, KR)
            A1 = float(a < Kn and b < Kn) - float(a < KR and b < KR)
            rows.append({"sample": i, "R": R, "n": n, "site": x, "J": a, "Jprime": b, "K_n": Kn, "K_R": KR,
                         "A1": A1, "A2": e1n - e1r, "A3": e2n - e2r,
                         "above_beta": int(max(Kn, KR) > beta)})
    return rows


def transition_convergence_experiment(d: int, pairs, sites, samples: int, seed: int,
                                      dist: GoodDistribution = GoodDistribution(), delta: float = 1.0,
                                      delta_grid=(0.01, 0.1, 0.5), jobs: int = 1) -> ExperimentReport:
    """Compare transition points on the n-torus with those on the centred
    R-window (periodically closed) around each site, and estimate the
    replacement errors A1, A2, A3 and epsilon(n, R).
    """
    pairs = [(int(R), int(n)) for R, n in pairs]
    for R, n in pairs:
        if R > n:
            raise ValueError(f"window R={R} larger than torus n={n}")
        if R < 3:
            raise ValueError("window tori need R >= 3")
    q, outer = epsilon_exponent(delta)
    t0 = time.perf_counter()
    fn = partial(_transition_sample, d=d, pairs=tuple(pairs), sites=sites, seed=seed, dist=dist,
                 beta=dist.lower)
    records = [r for rows in _run(fn, range(samples), jobs) for r in rows]
    per_pair = []
    for R, n in pairs:
        rows = [r for r in records if (r["R"], r["n"]) == (R, n)]
        gap = np.array([abs(r["K_n"] - r["K_R"]) for r in rows])
        above = np.array([r["above_beta"] for r in rows], dtype=bool)
        A = np.array([[r["A1"], r["A2"], r["A3"]] for r in rows])
        entry = {"R": R, "n": n, "count": len(rows),
                 "max_abs_A": float(np.max(np.abs(A))) if len(A) else 0.0,
                 "epsilon": float(np.mean(np.abs(A.sum(axis=1)) ** q) ** outer) if len(A) else 0.0,
                 "tail": []}
        for k in range(3):
            m, se = _mean_se(np.abs(A[:, k]))
            entry[f"mean_abs_A{k + 1}"], entry[f"mean_abs_A{k + 1}_se"] = m, se
        for dg in delta_grid:
            m, se = _mean_se(((gap > dg) & above).astype(float))
            entry["tail"].append({"delta": float(dg), "prob": m, "se": se})
        per_pair.append(entry)
    cols = ["sample", "R", "n", "site", "J", "Jprime", "K_n", "K_R", "A1", "A2", "A3", "above_beta"]
    cfg = _base_config("transition", f"torus{d}d-" + "-".join(f"{R}in{n}" for R, n in pairs), dist, seed,
                       samples, d=d, pairs=pairs, sites=sites if isinstance(sites, int) else list(sites),
                       delta=delta, moment_order=q, delta_grid=list(delta_grid))
    return ExperimentReport("transition", cfg, records, {"per_pair": per_pair}, columns=cols,
                            wall_seconds=time.perf_counter() - t0)


# -- critical droplet --------------------------------------------------------

def _droplet_sample(i, *, d, n, site, seed, dist):
    L = torus(d, n)
    J = sample(L, dist, seed, i, _J)
    M = ground_state(L, J).covering
    flipped = LocalConstraint.of({site: 0 if site in M else 1})
    res = constrained_ground_state(L, J, flipped)
    if not res.feasible:
        raise AssertionError(f"flipping site {site} is infeasible on {L!r}")
    dec = sym_diff_decompose(M, res.covering)
    comp = dec.component_containing(site)
    single = len(dec) == 1 and comp is not None
    return {"sample": i, "size": len(M.occupied ^ res.covering.occupied),
            "contains_site": int(comp is not None), "single_component": int(single),
            "kind": comp.kind if comp else "", "excess_energy": res.energy - energy(M, J)}


def critical_droplet_experiment(d: int, n: int, samples: int, seed: int,
                                dist: GoodDistribution = GoodDistribution(), site: int = 0,
                                jobs: int = 1) -> ExperimentReport:
    """Force the opposite status at ``site`` and measure M xor M'."""
    t0 = time.perf_counter()
    fn = partial(_droplet_sample, d=d, n=n, site=site, seed=seed, dist=dist)
    records = _run(fn, range(samples), jobs)
    sizes = np.array([r["size"] for r in records])
    hist: dict[int, int] = {}
    for s in sizes.tolist():
        hist[s] = hist.get(s, 0) + 1
    m, se = _mean_se(sizes)
    violations = sum(1 - r["single_component"] for r in records) + sum(1 - r["contains_site"] for r in records)
    summary = {"mean_size": m, "mean_size_se": se, "median_size": float(np.median(sizes)),
               "p95_size": float(np.percentile(sizes, 95)), "max_size": int(sizes.max()),
               "histogram": {str(k): hist[k] for k in sorted(hist)},
               "kinds": {k: sum(r["kind"] == k for r in records) for k in ("path", "loop")},
               "violations": violations}
    cols = ["sample", "size", "contains_site", "single_component", "kind", "excess_energy"]
    cfg = _base_config("droplet", f"torus{d}d-n{n}", dist, seed, samples, d=d, n=n, site=site)
    return ExperimentReport("droplet", cfg, records, summary, failures=violations, columns=cols,
                            wall_seconds=time.perf_counter() - t0)

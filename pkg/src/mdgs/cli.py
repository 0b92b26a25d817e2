"""Command-line entry point: ``mdgs <subcommand> [flags]``.

Exit codes: 0 success, 1 usage error, 2 a property check reported FAIL.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import checks, experiments
from .disorder import FAMILIES, DivergentIntegralError, GoodDistribution, WeightAssignment, goodness_constant, resample_p, sample
from .lattice import Lattice, load_edge_list, torus
from .matching import sym_diff_decompose
from .solver import flexibility, ground_state, optimality, transition_point

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2
DEFAULT_OUT = "mdgs_out"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _add_lattice(p, *, single=True):
    if single:
        p.add_argument("--torus", nargs=2, type=int, metavar=("D", "N"), help="periodic d-dimensional torus of side n")
        p.add_argument("--graph", type=Path, help="edge-list file ('V E' header, then 'u v' lines)")
    else:
        p.add_argument("--dim", type=int, default=2, help="torus dimension")


def _add_common(p, *, weights=True, jobs=False):
    p.add_argument("--dist", choices=FAMILIES, default="gaussian")
    p.add_argument("--shape", type=float, help="pareto shape (> 4)")
    p.add_argument("--scale", type=float, default=1.0, help="pareto scale")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, help=f"output directory (default $MDGS_OUT or ./{DEFAULT_OUT})")
    p.add_argument("--config", type=Path, help="key=value file; explicit flags win")
    if weights:
        p.add_argument("--weights", type=Path, help="read weights from a CSV instead of sampling")
    if jobs:
        p.add_argument("--jobs", type=int, default=1, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mdgs", description="Ground states of the disordered monomer-dimer model.")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)

    p = sub.add_parser("solve", help="ground state of one disorder sample")
    _add_lattice(p)
    _add_common(p)

    for name, what in (("flexibility", "|K_x - J_x| per site"), ("optimality", "O(v) per vertex")):
        p = sub.add_parser(name, help=what)
        _add_lattice(p)
        _add_common(p)
        p.add_argument("--site", type=int, nargs="+", default=[0])

    p = sub.add_parser("transition", help="transition points per site, or window convergence with --pairs")
    _add_lattice(p)
    _add_common(p, jobs=True)
    p.add_argument("--site", type=int, nargs="+", default=[0])
    p.add_argument("--pairs", nargs="+", metavar="R:N", help="run the window convergence experiment")
    p.add_argument("--sites", type=int, default=4, help="random sites per sample (with --pairs)")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--delta", type=float, default=1.0, help="moment exponent parameter for epsilon(n, R)")
    p.add_argument("--delta-grid", type=float, nargs="+", default=[0.01, 0.1, 0.5])

    p = sub.add_parser("decompose", help="M xor M(p) for a p-resampled copy of the disorder")
    _add_lattice(p)
    _add_common(p)
    p.add_argument("--p", type=float, default=0.1)

    p = sub.add_parser("stabilize", help="disagreement of nested tori inside a box")
    _add_lattice(p, single=False)
    _add_common(p, weights=False, jobs=True)
    p.add_argument("--sizes", type=int, nargs="+", default=[8, 16, 32])
    p.add_argument("--K", type=int, default=2)
    p.add_argument("--samples", type=int, default=200)

    p = sub.add_parser("chaos", help="disorder chaos under p-resampling")
    _add_lattice(p)
    _add_common(p, weights=False, jobs=True)
    p.add_argument("--p-grid", type=float, nargs="+", default=[0.0, 0.01, 0.05, 0.2, 1.0])
    p.add_argument("--samples", type=int, default=300)

    p = sub.add_parser("clt", help="normality of the ground-state energy")
    _add_lattice(p, single=False)
    _add_common(p, weights=False, jobs=True)
    p.add_argument("--sizes", type=int, nargs="+", default=[8, 16, 24])
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--null", action="store_true", help="feed i.i.d. normals through the pipeline")

    p = sub.add_parser("decay", help="covariance of monomer indicators at distance 2R")
    _add_lattice(p)
    _add_common(p, weights=False, jobs=True)
    p.add_argument("--R", type=int, nargs="+", default=[0, 2, 4, 8])
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--anchor", type=int, help="use a single pair anchored at this vertex")

    p = sub.add_parser("derivative", help="three-case replacement derivative identity")
    _add_lattice(p)
    _add_common(p, weights=False, jobs=True)
    p.add_argument("--sites", type=int, default=20, help="random sites per sample")
    p.add_argument("--samples", type=int, default=200)

    p = sub.add_parser("droplet", help="critical droplet at the origin")
    _add_lattice(p)
    _add_common(p, weights=False, jobs=True)
    p.add_argument("--samples", type=int, default=500)

    p = sub.add_parser("oracle-check", help="solver against brute force on small graphs")
    p.add_argument("--max-sigma", type=int, default=27, help="largest |Sigma| to enumerate")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--lemma-trials", type=int, default=0, help="also run the lemma suite")
    _add_common(p, weights=False)

    p = sub.add_parser("goodness", help="the shift constant C(z, alpha)")
    _add_common(p, weights=False)
    p.add_argument("--z", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--numeric", action="store_true", help="force quadrature for the Gaussian family")
    return parser


# -- config file -------------------------------------------------------------

def _config_defaults(sub: argparse.ArgumentParser, path: Path) -> dict:
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    out = {}
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for num, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in actions:
            raise UsageError(f"{path}:{num}: unknown config key {key!r}")
        act = actions[key]
        tokens = value.replace(",", " ").split()
        conv = act.type or str
        try:
            if isinstance(act, argparse._StoreTrueAction):
                out[key] = value.strip().lower() in ("1", "true", "yes")
            elif act.nargs in (None, "?"):
                out[key] = conv(value.strip())
            else:
                out[key] = [conv(t) for t in tokens]
        except ValueError as exc:
            raise UsageError(f"{path}:{num}: bad value for {key}: {exc}") from exc
        if act.choices is not None and out[key] not in act.choices:
            raise UsageError(f"{path}:{num}: {key} must be one of {list(act.choices)}")
    return out


def parse(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError(parser.format_help())
    if getattr(args, "config", None):
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**_config_defaults(sub, args.config))
        args = parser.parse_args(argv)
    return args


# -- helpers -------------------------------------------------------------------

def _dist(args) -> GoodDistribution:
    try:
        return GoodDistribution(args.dist, args.shape, args.scale)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _lattice(args) -> Lattice:
    if (args.torus is None) == (args.graph is None):
        raise UsageError("give exactly one of --torus D N or --graph PATH")
    try:
        return torus(*args.torus) if args.torus else load_edge_list(args.graph)
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _torus_dims(args) -> tuple[int, int]:
    if args.graph is not None or args.torus is None:
        raise UsageError("this experiment needs --torus D N")
    return tuple(args.torus)


def _weights(args, L: Lattice) -> WeightAssignment:
    if getattr(args, "weights", None):
        try:
            return WeightAssignment.load(L, args.weights)
        except (OSError, ValueError) as exc:
            raise UsageError(str(exc)) from exc
    return sample(L, _dist(args), args.seed)


def _outdir(args) -> Path:
    if args.out is not None:
        return args.out
    return Path(os.environ.get("MDGS_OUT", DEFAULT_OUT))


def _echo(args) -> dict:
    skip = {"config", "out", "jobs"}
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items()) if k not in skip}


def _write_json(args, stem: str, doc: dict) -> Path:
    out = _outdir(args)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{stem}.json"
    path.write_text(json.dumps(experiments._jsonable({"config": _echo(args), **doc}), indent=2, sort_keys=True) + "\n")
    return path


def _emit(report: experiments.ExperimentReport, args) -> int:
    report.config["command_line"] = _echo(args)
    paths = report.write(_outdir(args))
    print(json.dumps(experiments._jsonable(report.summary), indent=1, sort_keys=True)[:3000])
    print("wrote " + ", ".join(str(p) for p in paths))
    if report.failures:
        print(f"FAIL: {report.failures} failing records", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


# -- subcommands ---------------------------------------------------------------

def cmd_solve(args) -> int:
    L = _lattice(args)
    J = _weights(args, L)
    res = ground_state(L, J)
    out = _outdir(args)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"solve_{L.label()}_seed{args.seed}.covering"
    header = f"config={json.dumps(_echo(args), sort_keys=True)} energy={res.energy:.17g}"
    res.covering.save(path, header=header)
    print(f"energy {res.energy:.17g}")
    print(f"monomers {len(res.covering.monomers)} dimers {len(res.covering.dimers)}")
    print(f"wrote {path}")
    return EXIT_OK


def _per_site(args, name, fn) -> int:
    L = _lattice(args)
    J = _weights(args, L)
    rows = []
    for x in args.site:
        try:
            val = fn(L, J, L.check_site(x))
        except (ValueError, IndexError) as exc:
            raise UsageError(str(exc)) from exc
        rows.append({"site": x, "J": float(J[x]), name: val})
        print(f"site {x}  J={J[x]:.17g}  {name}={val:.17g}")
    path = _write_json(args, f"{name}_{L.label()}_seed{args.seed}", {"sites": rows})
    print(f"wrote {path}")
    return EXIT_OK


def cmd_transition(args) -> int:
    if not args.pairs:
        return _per_site(args, "transition", transition_point)
    d, _ = _torus_dims(args)
    try:
        pairs = [tuple(int(t) for t in s.split(":")) for s in args.pairs]
        report = experiments.transition_convergence_experiment(
            d, pairs, args.sites, args.samples, args.seed, _dist(args), delta=args.delta,
            delta_grid=tuple(args.delta_grid), jobs=args.jobs)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return _emit(report, args)


def cmd_decompose(args) -> int:
    L = _lattice(args)
    J = _weights(args, L)
    try:
        Jp = resample_p(J, sample(L, J.distribution or _dist(args), args.seed, 1), args.p, args.seed, 2)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    M, Mp = ground_state(L, J).covering, ground_state(L, Jp).covering
    dec = sym_diff_decompose(M, Mp)
    problems = checks._decomposition_problems(M, Mp)
    for c in dec:
        print(f"{c.kind:4s} length {len(c):4d} from {c.elements[0]} to {c.elements[-1]}")
    path = _write_json(args, f"decompose_{L.label()}_seed{args.seed}",
                       {"components": json.loads(dec.to_json()), "problems": problems})
    print(f"{len(dec)} components; wrote {path}")
    if problems:
        print("FAIL: " + "; ".join(problems), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _experiment(fn, **kw):
    try:
        return fn(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_stabilize(args) -> int:
    return _emit(_experiment(experiments.stabilization_experiment, d=args.dim, sizes=args.sizes, K=args.K,
                             samples=args.samples, seed=args.seed, dist=_dist(args), jobs=args.jobs), args)


def cmd_chaos(args) -> int:
    d, n = _torus_dims(args)
    return _emit(_experiment(experiments.chaos_experiment, d=d, n=n, p_grid=args.p_grid, samples=args.samples,
                             seed=args.seed, dist=_dist(args), jobs=args.jobs), args)


def cmd_clt(args) -> int:
    return _emit(_experiment(experiments.clt_experiment, d=args.dim, n_list=args.sizes, samples=args.samples,
                             dist=_dist(args), seed=args.seed, jobs=args.jobs, null=args.null), args)


def cmd_decay(args) -> int:
    d, n = _torus_dims(args)
    return _emit(_experiment(experiments.correlation_decay_experiment, d=d, n=n, R_list=args.R,
                             samples=args.samples, seed=args.seed, dist=_dist(args), anchor=args.anchor,
                             jobs=args.jobs), args)


def cmd_derivative(args) -> int:
    d, n = _torus_dims(args)
    return _emit(_experiment(experiments.derivative_decomposition_check, d=d, n=n, sites=args.sites,
                             samples=args.samples, seed=args.seed, dist=_dist(args), jobs=args.jobs), args)


def cmd_droplet(args) -> int:
    d, n = _torus_dims(args)
    return _emit(_experiment(experiments.critical_droplet_experiment, d=d, n=n, samples=args.samples,
                             seed=args.seed, dist=_dist(args), jobs=args.jobs), args)


def cmd_oracle(args) -> int:
    rep = checks.oracle_check(args.max_sigma, args.trials, args.seed, _dist(args))
    doc = {"trials": rep.trials, "mismatches": rep.mismatches, "tie_events": rep.tie_events,
           "solves": rep.solves, "max_residual": rep.max_residual, "per_lattice": rep.per_lattice}
    ok = rep.ok
    print(f"oracle: {rep.trials} trials, {len(rep.mismatches)} mismatches, max residual {rep.max_residual:.3g}")
    if args.lemma_trials:
        suite = checks.run_lemma_suite(args.lemma_trials, seed=args.seed, dist=_dist(args))
        doc["lemmas"] = {k: {"passed": t.passed, "failed": t.failed, "skipped": t.skipped, "failures": t.failures}
                         for k, t in suite.tallies.items()}
        for k, t in suite.tallies.items():
            print(f"{k:28s} pass {t.passed:5d} fail {t.failed:3d} skip {t.skipped:4d}")
        ok = ok and suite.ok
    path = _write_json(args, f"oracle-check_sigma{args.max_sigma}_seed{args.seed}", doc)
    print(f"{'PASS' if ok else 'FAIL'}; wrote {path}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_goodness(args) -> int:
    try:
        c = goodness_constant(_dist(args), args.z, args.alpha, analytic=not args.numeric)
    except (ValueError, DivergentIntegralError) as exc:
        raise UsageError(str(exc)) from exc
    print(f"C({args.z!r}, {args.alpha!r}) = {c:.17g}")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "flexibility": lambda a: _per_site(a, "flexibility", flexibility),
    "optimality": lambda a: _per_site(a, "optimality", optimality),
    "transition": cmd_transition,
    "decompose": cmd_decompose,
    "stabilize": cmd_stabilize,
    "chaos": cmd_chaos,
    "clt": cmd_clt,
    "decay": cmd_decay,
    "derivative": cmd_derivative,
    "droplet": cmd_droplet,
    "oracle-check": cmd_oracle,
    "goodness": cmd_goodness,
}


def run(argv=None) -> int:
    try:
        args = parse(sys.argv[1:] if argv is None else argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

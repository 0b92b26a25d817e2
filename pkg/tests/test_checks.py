from mdgs.checks import LEMMAS, oracle_check, oracle_lattices, random_alternating_path, run_lemma_suite
from mdgs.disorder import GoodDistribution, make_rng, sample
from mdgs.lattice import torus
from mdgs.solver import ground_state


def test_oracle_lattices_respect_size_limit():
    assert all(L.num_sites <= 24 for _, L in oracle_lattices(24))
    names = [name for name, _ in oracle_lattices(27)]
    assert "torus2d-n3" in names and "triangle" in names


def test_small_oracle_run():
    rep = oracle_check(trials=25, seed=4)
    assert rep.ok and rep.trials == 25 * len(oracle_lattices())


def test_every_lemma_runs():
    rep = run_lemma_suite(trials=10, seed=3)
    assert set(rep.tallies) == set(LEMMAS)
    assert rep.ok, {k: t.failures for k, t in rep.tallies.items() if t.failed}


def test_random_alternating_path_alternates():
    L = torus(2, 6)
    J = sample(L, GoodDistribution(), 1)
    M = ground_state(L, J).covering
    rng = make_rng(1, 0)
    found = 0
    for _ in range(40):
        path = random_alternating_path(L, M, rng)
        if path is None:
            continue
        found += 1
        edges = [L.edge_site(a, b) for a, b in zip(path, path[1:])]
        assert [e in M for e in edges] == [i % 2 == 0 for i in range(len(edges))]
    assert found > 0

import math

import numpy as np
import pytest

from conftest import weights
from mdgs.disorder import GoodDistribution, sample
from mdgs.lattice import from_edge_list, torus
from mdgs.matching import LocalConstraint, brute_force_ground_state, covering_matrix, energy
from mdgs.solver import (
    constrained_ground_state,
    delta_H,
    flexibility,
    gain_graph,
    ground_state,
    is_inaccessible,
    metastate_cell,
    optimality,
    path_modification_check,
    reduction_residual,
    solve_audit,
    transition_point,
)

GAUSS = GoodDistribution()


def test_edge_examples(edge_uv):
    J = weights(edge_uv, [1.0, 2.0, 2.5])
    res = ground_state(edge_uv, J)
    assert res.covering.dimers == {2} and res.energy == 2.5
    assert transition_point(edge_uv, J, 2) == 3.0
    assert transition_point(edge_uv, J, 0) == 0.5 and 0 not in res.covering
    assert flexibility(edge_uv, J, 2) == 0.5 and flexibility(edge_uv, J, 0) == 0.5
    assert optimality(edge_uv, J, 1) == 0.5
    assert metastate_cell(edge_uv, J, [2]).as_dict() == {2: 1}
    assert metastate_cell(edge_uv, J, []).as_dict() == {}
    assert delta_H(edge_uv, J, LocalConstraint.of({2: 1}), LocalConstraint.of({2: 0})) == 0.5


def test_inaccessible_edge(edge_uv):
    J = weights(edge_uv, [1.0, 2.0, 3.5])
    res = ground_state(edge_uv, J)
    assert res.covering.dimers == frozenset() and res.energy == 3.0
    assert optimality(edge_uv, J, 1) == -0.5 and 1 in res.covering.monomers
    assert is_inaccessible(edge_uv, weights(edge_uv, [1, 1, 2.5]), 2)
    assert not is_inaccessible(edge_uv, weights(edge_uv, [1, 1, 1.5]), 2)


def test_triangle_example(triangle):
    J = weights(triangle, [0, 0, 0, -1.0, -0.5, -0.25])
    res = ground_state(triangle, J)
    assert res.energy == -1.0 and res.covering.dimers == {3} and res.covering.monomers == {2}


def test_constrained_examples(edge_uv):
    for Je in (-10.0, 0.0, 2.5):
        res = constrained_ground_state(edge_uv, weights(edge_uv, [1.0, 2.0, Je]), LocalConstraint.of({2: 0}))
        assert res.covering.dimers == frozenset()
    J = weights(edge_uv, [1.0, 2.0, 2.5])
    assert constrained_ground_state(edge_uv, J, LocalConstraint.of({})).covering == ground_state(edge_uv, J).covering
    bad = constrained_ground_state(edge_uv, J, LocalConstraint.of({0: 1, 2: 1}))
    assert not bad.feasible and bad.covering is None


@pytest.mark.parametrize("L", [torus(1, 5), torus(1, 6), torus(2, 3), from_edge_list(6, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5), (5, 3)])])
def test_matches_brute_force(L):
    mat = covering_matrix(L)
    for s in range(60):
        J = sample(L, GAUSS, s)
        slow, H, _ = brute_force_ground_state(L, J, matrix=mat)
        res = ground_state(L, J)
        assert res.covering == slow
        assert math.isclose(res.energy, H, abs_tol=1e-12)


def test_constrained_matches_brute_force():
    L = torus(2, 3)
    mat = covering_matrix(L)
    rng = np.random.default_rng(5)
    for s in range(60):
        J = sample(L, GAUSS, s)
        S = rng.choice(L.num_sites, size=2, replace=False)
        xi = LocalConstraint.of({int(x): int(rng.integers(2)) for x in S})
        slow, H, _ = brute_force_ground_state(L, J, xi, matrix=mat)
        res = constrained_ground_state(L, J, xi)
        assert res.feasible == (slow is not None)
        if slow is not None:
            assert res.covering == slow


def test_constrained_ignores_weights_on_constrained_sites():
    L = torus(2, 4)
    J = sample(L, GAUSS, 1)
    xi = LocalConstraint.of({3: 0, L.torus_edge(5, 0): 1})
    base = constrained_ground_state(L, J, xi).covering
    for x in xi.sites:
        assert constrained_ground_state(L, J.replace({x: J[x] + 7.0}), xi).covering == base


def test_transition_point_independent_of_own_weight():
    L = torus(2, 4)
    J = sample(L, GAUSS, 2)
    for x in (0, 7, L.torus_edge(3, 1)):
        K = transition_point(L, J, x)
        for shift in (-3.0, 0.4, 2.0):
            J2 = J.replace({x: J[x] + shift})
            assert math.isclose(transition_point(L, J2, x), K, abs_tol=1e-9)
            assert (x in ground_state(L, J2).covering) == (J2[x] <= K)


def test_flexibility_is_abs_delta_h():
    L = torus(2, 4)
    J = sample(L, GAUSS, 3)
    for x in (1, L.torus_edge(6, 0)):
        dh = delta_H(L, J, LocalConstraint.of({x: 0}), LocalConstraint.of({x: 1}))
        assert math.isclose(flexibility(L, J, x), abs(dh), abs_tol=1e-12)
        back = delta_H(L, J, LocalConstraint.of({x: 1}), LocalConstraint.of({x: 0}))
        assert back == -dh


def test_reduction_identity_for_every_covering():
    L = torus(1, 6)
    J = sample(L, GAUSS, 4)
    from mdgs.matching import enumerate_coverings

    for M in enumerate_coverings(L):
        assert abs(reduction_residual(M, J)) < 1e-12


def test_gain_graph_penalty():
    L = torus(2, 3)
    G = gain_graph(L, sample(L, GAUSS, 0))
    assert G.penalty > np.abs(G.gains).sum() + 1
    assert G.gains.shape == (L.num_edges,)


def test_solve_audit_records_residuals():
    L = torus(2, 4)
    with solve_audit() as audit:
        for s in range(5):
            ground_state(L, sample(L, GAUSS, s))
    assert audit.solves == 5 and audit.max_residual < 1e-9


def test_energy_field_matches_covering():
    L = torus(2, 7)
    J = sample(L, GAUSS, 9)
    res = ground_state(L, J)
    assert math.isclose(res.energy, energy(res.covering, J), rel_tol=1e-15, abs_tol=1e-12)


def _chain():
    # path 0-1-2-3 whose ground state holds dimers (0,1) and (2,3)
    L = from_edge_list(4, [(0, 1), (1, 2), (2, 3)])
    J = weights(L, [0, 0, 0, 0, -0.1, 0.0, -5.0])
    return L, J


def test_path_modification_forced_flip():
    L, J = _chain()
    assert ground_state(L, J).covering.dimers == {4, 6}
    v = path_modification_check(L, J, [0, 1, 2, 3], 3, 0.4, uniform=0.5)
    assert v.verdict == "PATH" and v.stop_index == 2


def test_path_modification_small_eps_is_empty():
    L, J = _chain()
    assert path_modification_check(L, J, [0, 1, 2, 3], 3, 0.05, uniform=0.5).verdict == "EMPTY"


def test_path_modification_skips_bad_input():
    L, J = _chain()
    assert path_modification_check(L, J, [0, 1], 1, 0.1, uniform=0.5).verdict == "SKIP"
    assert path_modification_check(L, J, [1, 2, 3], 2, 0.1, uniform=0.5).verdict == "SKIP"
    assert path_modification_check(L, J, [0, 1, 2, 3], 2, 0.1, uniform=0.5).verdict == "SKIP"

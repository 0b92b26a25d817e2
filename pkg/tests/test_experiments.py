import json

import numpy as np
import pytest

from mdgs.disorder import GoodDistribution
from mdgs.experiments import (
    clt_experiment,
    clt_summary,
    chaos_experiment,
    correlation_decay_experiment,
    critical_droplet_experiment,
    derivative_decomposition_check,
    epsilon_exponent,
    stabilization_experiment,
    transition_convergence_experiment,
    window_map,
)
from mdgs.lattice import torus


def test_window_map_shapes_and_identity():
    big = torus(2, 8)
    assert np.array_equal(window_map(big, 8, 0), np.arange(big.num_sites))
    m = window_map(big, 4, big.vertex_at((3, 5)))
    assert len(m) == torus(2, 4).num_sites and len(set(m.tolist())) == len(m)
    assert m[0] == big.vertex_at((3, 5))
    with pytest.raises(ValueError):
        window_map(big, 9)


def test_window_reuses_parent_edge_weights():
    big, small = torus(1, 10), torus(1, 4)
    m = window_map(big, 4, 0)
    # small vertex 3 sits at offset -1; its edge closes the window onto vertex 9 -> 0 of the big torus
    assert m[3] == 9
    assert m[small.torus_edge(3, 0)] == big.torus_edge(9, 0)


def test_stabilization_identical_sizes_agree():
    rep = stabilization_experiment(2, (8, 8), 1, 5, seed=1)
    assert rep.summary["pairs"][0]["p_disagree"] == 0.0
    assert all(r["sites_8_8"] == [] for r in rep.records)


def test_stabilization_rejects_bad_sizes():
    with pytest.raises(ValueError):
        stabilization_experiment(2, (16, 8), 2, 5, seed=1)
    with pytest.raises(ValueError):
        stabilization_experiment(2, (5, 8), 2, 5, seed=1)


def test_chaos_p_zero_and_structure():
    rep = chaos_experiment(2, 8, (0.0, 0.3), 10, seed=2)
    p0, p3 = rep.summary["per_p"]
    assert p0["p_origin_in_diff"] == 0.0 and p0["component_size_histogram"] == {}
    assert p0["structure_failures"] == 0 and p3["structure_failures"] == 0
    assert rep.failures == 0


def test_clt_rejects_small_samples():
    with pytest.raises(ValueError):
        clt_experiment(2, (8,), 49)


def test_clt_one_dimensional_report():
    rep = clt_experiment(1, (64,), 60, seed=3)
    s = rep.summary["per_n"][0]
    assert np.isfinite(s["mean"]) and s["variance"] > 0
    lo, hi = s["var_over_volume_ci"]
    assert lo <= s["var_over_volume"] <= hi
    json.loads(rep.to_json())


def test_clt_summary_on_normals_is_calibrated():
    x = np.random.default_rng(0).standard_normal(2000)
    s = clt_summary(x, 1, seed=0)
    assert s["ks_pvalue"] > 1e-3 and abs(s["variance"] - 1) < 0.1


def test_decay_same_site_is_bernoulli_variance():
    rep = correlation_decay_experiment(2, 12, (0, 2), 20, seed=4)
    r0 = rep.summary["per_R"][0]
    dens = rep.summary["monomer_density"]
    assert 0 < r0["covariance"] <= 0.25
    assert abs(r0["covariance"] - dens * (1 - dens)) < 1e-12


def test_decay_anchor_translation():
    a = correlation_decay_experiment(2, 12, (1,), 150, seed=5, anchor=0).summary["per_R"][0]
    b = correlation_decay_experiment(2, 12, (1,), 150, seed=5, anchor=40).summary["per_R"][0]
    assert abs(a["covariance"] - b["covariance"]) < 4 * np.hypot(a["se"], b["se"]) + 1e-12


def test_decay_rejects_far_pairs():
    with pytest.raises(ValueError):
        correlation_decay_experiment(2, 12, (4,), 5, seed=1)


def test_derivative_identity_small_run():
    rep = derivative_decomposition_check(2, 6, 6, 10, seed=6)
    assert rep.failures == 0
    assert abs(sum(rep.summary["case_frequencies"].values()) - 1) < 1e-12
    assert rep.summary["max_abs_E"] <= 1


def test_derivative_forced_equal_replacement():
    from mdgs.experiments import _split

    case, predicted, e1, e2 = _split(0.3, 0.3, 1.0)
    assert predicted == 0.0 and e1 == e2 == 0.0


def test_transition_identity_embedding_is_exact():
    rep = transition_convergence_experiment(2, [(8, 8)], 3, 4, seed=7)
    entry = rep.summary["per_pair"][0]
    assert entry["max_abs_A"] == 0.0 and entry["epsilon"] == 0.0
    with pytest.raises(ValueError):
        transition_convergence_experiment(2, [(10, 8)], 3, 4, seed=7)


def test_transition_bounds():
    rep = transition_convergence_experiment(2, [(4, 8)], 4, 10, seed=8)
    assert rep.summary["per_pair"][0]["max_abs_A"] <= 2
    assert epsilon_exponent(1.0) == (20.0, 0.2)


def test_droplet_contains_origin():
    rep = critical_droplet_experiment(2, 8, 15, seed=9)
    assert all(r["contains_site"] and r["single_component"] for r in rep.records)
    assert all(r["excess_energy"] > 0 for r in rep.records)


def test_report_files(tmp_path):
    rep = critical_droplet_experiment(2, 6, 5, seed=3)
    paths = rep.write(tmp_path)
    names = sorted(p.name for p in paths)
    assert names == ["droplet_torus2d-n6_seed3.csv", "droplet_torus2d-n6_seed3.json",
                     "droplet_torus2d-n6_seed3.timing.json"]
    csv_lines = (tmp_path / names[0]).read_text().splitlines()
    assert csv_lines[0].startswith("# experiment=droplet seed=3")
    assert csv_lines[2] == ",".join(rep.columns)


def test_jobs_do_not_change_results():
    a = chaos_experiment(2, 6, (0.1, 0.5), 6, seed=4, jobs=1)
    b = chaos_experiment(2, 6, (0.1, 0.5), 6, seed=4, jobs=2)
    assert a.to_json() == b.to_json() and a.to_csv() == b.to_csv()


def test_pareto_disorder_runs():
    rep = clt_experiment(2, (6,), 50, dist=GoodDistribution("pareto", shape=5.0), seed=1)
    assert rep.config["distribution"] == {"family": "pareto", "shape": 5.0, "scale": 1.0}
